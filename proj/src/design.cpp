#include "stratarank/design.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "stratarank/rng.hpp"

namespace stratarank {

std::int64_t ObservationTable::n_present() const {
    std::int64_t n = 0;
    for (std::uint8_t p : present) n += p ? 1 : 0;
    return n;
}

int DesignSpec::factor_index(const std::string& fname) const {
    for (std::size_t i = 0; i < factors.size(); ++i)
        if (factors[i].name == fname) return static_cast<int>(i);
    return -1;
}

int DesignSpec::stratum_index(const std::string& sname) const {
    for (std::size_t i = 0; i < strata.size(); ++i)
        if (strata[i].name == sname) return static_cast<int>(i);
    return -1;
}

bool DesignSpec::stratum_is_blocking(int s) const {
    for (const BlockWord& b : block_words)
        if (b.stratum == s) return true;
    return false;
}

EffectClass::Role DesignSpec::role_of(const EffectClass& e) const {
    for (Word m : e.members) {
        auto it = tau_overrides.find(m);
        if (it != tau_overrides.end()) return it->second;
    }
    return EffectClass::Role::fixed;  // treatment effects default to fixed
}

std::vector<EffectClass> DesignSpec::effect_classes() const {
    std::vector<EffectClass> classes;
    if (model.empty()) {
        classes = enumerate_effect_classes(n_factors(), alias);
    } else {
        std::set<Word> seen;
        for (Word w : model) {
            EffectClass cls = alias_class_of(w, alias);
            if (cls.is_intercept())
                throw SemanticError("model effect collapses to the intercept class");
            if (seen.insert(cls.representative).second)
                classes.push_back(std::move(cls));
        }
        std::sort(classes.begin(), classes.end(),
                  [](const EffectClass& a, const EffectClass& b) {
                      return word_canon_less(a.representative, b.representative);
                  });
    }
    for (EffectClass& cls : classes) cls.role = role_of(cls);
    return classes;
}

void DesignSpec::validate() const {
    if (factors.empty()) throw SemanticError("design has no factors");
    std::set<std::string> names;
    for (const FactorSpec& f : factors) {
        if (f.name.empty()) throw SemanticError("factor with empty name");
        if (f.levels < 2)
            throw SemanticError("factor " + f.name + " needs at least 2 levels");
        if (!names.insert(f.name).second)
            throw SemanticError("duplicate factor name " + f.name);
        if (!f.level_labels.empty() &&
            f.level_labels.size() != static_cast<std::size_t>(f.levels))
            throw SemanticError("factor " + f.name + ": label count mismatch");
    }

    const Word all = (Word{1} << n_factors()) - 1;
    for (Word g : alias.generators) {
        if ((g & ~all) != 0)
            throw SemanticError("alias word references an undeclared factor");
        for (int i : word_factors(g))
            if (factors[i].levels != 2)
                throw SemanticError(
                    "fractionation of multi-level designs is not supported; "
                    "factor " + factors[i].name + " has " +
                    std::to_string(factors[i].levels) + " levels");
    }

    names.clear();
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const StratumNode& node = strata[s];
        if (!names.insert(node.name).second)
            throw SemanticError("duplicate stratum name " + node.name);
        if (node.parent >= static_cast<int>(strata.size()) ||
            node.parent == static_cast<int>(s))
            throw SemanticError("stratum " + node.name + " has an invalid parent");
        // walk up; a cycle would loop forever otherwise
        int hops = 0;
        for (int p = node.parent; p >= 0; p = strata[p].parent)
            if (++hops > static_cast<int>(strata.size()))
                throw SemanticError("stratum tree contains a cycle");
    }
    for (const BlockWord& b : block_words) {
        if (b.stratum < 0 || b.stratum >= static_cast<int>(strata.size()))
            throw SemanticError("block word names an undeclared stratum");
        if (b.word == 0 || (b.word & ~all) != 0)
            throw SemanticError("block word references an undeclared factor");
        for (int i : word_factors(b.word))
            if (factors[i].levels != 2)
                throw SemanticError("block words require two-level factors");
    }
    for (Word w : model)
        if (w == 0 || (w & ~all) != 0)
            throw SemanticError("model effect references an undeclared factor");

    const ObservationTable& obs = observations;
    if (obs.n_obs < 2 || obs.n_present() < 2)
        throw SemanticError("design needs more than one present observation");
    if (obs.present.size() != static_cast<std::size_t>(obs.n_obs))
        throw SemanticError("observation table: presence column length mismatch");
    if (obs.levels.size() != factors.size())
        throw SemanticError("observation table: factor column count mismatch");
    for (std::size_t f = 0; f < factors.size(); ++f) {
        if (obs.levels[f].size() != static_cast<std::size_t>(obs.n_obs))
            throw SemanticError("observation table: column length mismatch");
        for (std::uint16_t v : obs.levels[f])
            if (v >= factors[f].levels)
                throw SemanticError("observation outside the level range of " +
                                    factors[f].name);
    }
    if (obs.unit_id.size() != strata.size())
        throw SemanticError("observation table: stratum column count mismatch");
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const auto& ids = obs.unit_id[s];
        if (ids.size() != static_cast<std::size_t>(obs.n_obs))
            throw SemanticError("observation table: unit column length mismatch");
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            if (!obs.present[i]) continue;
            if (ids[i] < 0 ||
                ids[i] >= static_cast<std::int32_t>(obs.unit_label[s].size()))
                throw SemanticError("present observation lacks a unit label in " +
                                    strata[s].name);
        }
        // A unit's parent label must be constant across its observations.
        const int p = strata[s].parent;
        if (p < 0) continue;
        std::vector<std::int32_t> parent_of(obs.unit_label[s].size(), -1);
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            if (!obs.present[i]) continue;
            const std::int32_t u = ids[i];
            const std::int32_t pu = obs.unit_id[p][i];
            if (parent_of[u] == -1) parent_of[u] = pu;
            else if (parent_of[u] != pu)
                throw SemanticError("unit " + obs.unit_label[s][u] + " of stratum " +
                                    strata[s].name + " spans two parent units");
        }
    }
}

namespace {

int sign_of_word(const std::vector<std::vector<std::uint16_t>>& levels, Word w,
                 std::int64_t row) {
    int s = 1;
    for (int i : word_factors(w))
        if (levels[i][row] == 1) s = -s;
    return s;
}

}  // namespace

DesignSpec make_factorial(const std::vector<int>& levels, int rep,
                          const std::vector<Word>& words,
                          const std::vector<Word>& block_words,
                          const std::string& block_stratum) {
    if (rep < 1) throw SemanticError("replication must be at least 1");
    DesignSpec spec;
    const int k = static_cast<int>(levels.size());
    for (int i = 0; i < k; ++i)
        spec.factors.push_back({std::string(1, char('A' + i)), levels[i], {}});
    spec.alias = AliasIdeal::from_generators(words);
    spec.full_rep = rep;

    // Enumerate the grid with factor 0 varying slowest; a fraction keeps
    // the runs whose sign product is +1 for every defining word.
    std::vector<std::uint16_t> combo(k, 0);
    std::vector<std::vector<std::uint16_t>> kept(k);
    for (;;) {
        bool keep = true;
        for (Word g : words) {
            int s = 1;
            for (int i : word_factors(g))
                if (combo[i] == 1) s = -s;
            if (s != 1) { keep = false; break; }
        }
        if (keep)
            for (int i = 0; i < k; ++i) kept[i].push_back(combo[i]);
        int i = k - 1;
        for (; i >= 0; --i) {
            if (++combo[i] < levels[i]) break;
            combo[i] = 0;
        }
        if (i < 0) break;
    }
    const std::int64_t n_combos = static_cast<std::int64_t>(kept.empty() ? 0 : kept[0].size());
    if (n_combos == 0) throw SemanticError("fraction retains no runs");

    ObservationTable& obs = spec.observations;
    obs.n_obs = n_combos * rep;
    obs.present.assign(obs.n_obs, 1);
    obs.levels.assign(k, {});
    for (int f = 0; f < k; ++f) {
        obs.levels[f].reserve(obs.n_obs);
        for (std::int64_t c = 0; c < n_combos; ++c)
            for (int j = 0; j < rep; ++j) obs.levels[f].push_back(kept[f][c]);
    }

    if (!block_words.empty()) {
        StratumNode node;
        node.name = block_stratum;
        spec.strata.push_back(node);
        for (Word w : block_words) spec.block_words.push_back({0, w});
        const int nb = static_cast<int>(block_words.size());
        std::vector<std::int32_t> ids(obs.n_obs);
        int max_unit = -1;
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            int unit = 0;
            for (int b = 0; b < nb; ++b)
                if (sign_of_word(obs.levels, block_words[b], i) < 0) unit |= 1 << b;
            ids[i] = unit;
            max_unit = std::max(max_unit, unit);
        }
        obs.unit_id.push_back(std::move(ids));
        std::vector<std::string> labels;
        for (int u = 0; u <= max_unit; ++u) labels.push_back("b" + std::to_string(u));
        obs.unit_label.push_back(std::move(labels));
    }
    return spec;
}

namespace {

// Appends a stratum whose units are keyed by the listed factor levels and
// (optionally) the replicate index of a `full rep=r` table.
void add_keyed_stratum(DesignSpec& spec, const std::string& name,
                       const std::vector<int>& key_factors, bool use_rep,
                       int parent) {
    StratumNode node;
    node.name = name;
    node.parent = parent;
    node.unit_factors = key_factors;
    node.unit_uses_rep = use_rep;
    spec.strata.push_back(node);

    const ObservationTable& obs = spec.observations;
    const int rep = std::max(1, spec.full_rep);
    std::vector<std::int32_t> ids(obs.n_obs);
    std::map<std::vector<int>, std::int32_t> index;
    std::vector<std::string> labels;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        std::vector<int> key;
        for (int f : key_factors) key.push_back(obs.levels[f][i]);
        if (use_rep) key.push_back(static_cast<int>(i % rep));
        auto [it, inserted] = index.emplace(key, static_cast<std::int32_t>(labels.size()));
        if (inserted) {
            std::string label = name;
            for (int part : key) label += "." + std::to_string(part);
            labels.push_back(label);
        }
        ids[i] = it->second;
    }
    spec.observations.unit_id.push_back(std::move(ids));
    spec.observations.unit_label.push_back(std::move(labels));
}

}  // namespace

DesignSpec make_split_plot(int a, int b, int c) {
    DesignSpec spec = make_factorial({a, c}, b);
    spec.name = "split-plot";
    add_keyed_stratum(spec, "wholeplot", {0}, true, -1);
    spec.validate();
    return spec;
}

DesignSpec make_nested_animal(int n_sire, int n_dam, int n_animal, int diet_levels) {
    DesignSpec spec;
    spec.name = "nested-animal";
    spec.factors.push_back({"T", diet_levels, {}});
    spec.alias = AliasIdeal::from_generators({});

    StratumNode sire;
    sire.name = "sire";
    spec.strata.push_back(sire);
    StratumNode dam;
    dam.name = "dam";
    dam.parent = 0;
    spec.strata.push_back(dam);

    ObservationTable& obs = spec.observations;
    obs.n_obs = std::int64_t{1} * n_sire * n_dam * n_animal;
    obs.present.assign(obs.n_obs, 1);
    obs.levels.assign(1, {});
    obs.unit_id.assign(2, {});
    obs.unit_label.assign(2, {});
    for (int s = 0; s < n_sire; ++s)
        obs.unit_label[0].push_back("s" + std::to_string(s));
    for (int s = 0; s < n_sire; ++s)
        for (int d = 0; d < n_dam; ++d)
            obs.unit_label[1].push_back("s" + std::to_string(s) + ".d" + std::to_string(d));
    for (int s = 0; s < n_sire; ++s)
        for (int d = 0; d < n_dam; ++d)
            for (int an = 0; an < n_animal; ++an) {
                obs.levels[0].push_back(static_cast<std::uint16_t>(an % diet_levels));
                obs.unit_id[0].push_back(s);
                obs.unit_id[1].push_back(s * n_dam + d);
            }
    spec.validate();
    return spec;
}

DesignSpec make_crossed_nested_grid(int diet_levels, int n_sire, int n_dam) {
    DesignSpec spec = make_factorial({diet_levels, n_sire, n_dam}, 1);
    spec.name = "crossed-nested";
    spec.factors[0].name = "T";
    spec.factors[1].name = "S";
    spec.factors[2].name = "D";
    add_keyed_stratum(spec, "sire", {1}, false, -1);
    add_keyed_stratum(spec, "dam", {1, 2}, false, 0);
    spec.validate();
    return spec;
}

DesignSpec make_latin_square(int r,
                             const std::vector<std::pair<int, int>>& missing_cells) {
    DesignSpec spec;
    spec.name = "latin-square";
    spec.factors.push_back({"R", r, {}});
    spec.factors.push_back({"C", r, {}});
    spec.factors.push_back({"T", r, {}});
    spec.alias = AliasIdeal::from_generators({});
    spec.model = {Word{1}, Word{2}, Word{4}};  // main effects only

    ObservationTable& obs = spec.observations;
    obs.n_obs = std::int64_t{r} * r;
    obs.present.assign(obs.n_obs, 1);
    obs.levels.assign(3, {});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            obs.levels[0].push_back(static_cast<std::uint16_t>(i));
            obs.levels[1].push_back(static_cast<std::uint16_t>(j));
            obs.levels[2].push_back(static_cast<std::uint16_t>((i + j) % r));
        }
    for (auto [i, j] : missing_cells) {
        if (i < 0 || i >= r || j < 0 || j >= r)
            throw SemanticError("missing cell outside the square");
        obs.present[std::int64_t{i} * r + j] = 0;
    }
    spec.validate();
    return spec;
}

void delete_fraction(DesignSpec& spec, double rate, std::uint64_t seed) {
    CounterRng rng = CounterRng::stream(seed, 0, 0x9d5f);
    for (std::int64_t i = 0; i < spec.observations.n_obs; ++i) {
        if (!spec.observations.present[i]) continue;
        if (rng.uniform() < rate) spec.observations.present[i] = 0;
    }
    spec.full_rep = 0;  // no longer a plain `full rep=r` table
}

}  // namespace stratarank
