#include "stratarank/parse.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "stratarank/csv.hpp"

namespace stratarank {

namespace {

struct Line {
    std::string text;
    int number = 0;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// unknown names inside a structurally well-formed word are semantic errors
Word parse_word(const std::string& token, const DesignSpec& spec, int line) {
    if (token.empty()) throw ParseError("empty effect word", line, 1);
    Word w = 0;
    if (token.find('*') != std::string::npos) {
        for (const std::string& part : split(token, '*')) {
            const int f = spec.factor_index(part);
            if (f < 0)
                throw SemanticError("line " + std::to_string(line) +
                                    ": unknown factor " + part + " in word");
            w ^= Word{1} << f;
        }
        return w;
    }
    for (char c : token) {
        const int f = spec.factor_index(std::string(1, c));
        if (f < 0)
            throw SemanticError("line " + std::to_string(line) + ": unknown factor " +
                                std::string(1, c) + " in word " + token);
        w ^= Word{1} << f;
    }
    return w;
}

int find_level(const FactorSpec& f, const std::string& token, int line) {
    if (!f.level_labels.empty())
        for (int l = 0; l < f.levels; ++l)
            if (f.level_labels[l] == token) return l;
    try {
        const int l = std::stoi(token);
        if (l >= 0 && l < f.levels) return l;
    } catch (const std::exception&) {
    }
    throw ParseError("level " + token + " is outside factor " + f.name, line, 1);
}

// one unit per distinct key; key = annotated factor levels (+ rep slot)
void assign_generated_units(DesignSpec& spec, int stratum, int rep, int line) {
    const StratumNode& node = spec.strata[stratum];
    const ObservationTable& obs = spec.observations;
    std::vector<std::int32_t> ids(obs.n_obs);
    std::vector<std::string> labels;

    std::vector<Word> stratum_block_words;
    for (const BlockWord& b : spec.block_words)
        if (b.stratum == stratum) stratum_block_words.push_back(b.word);

    if (!node.unit_factors.empty() || node.unit_uses_rep) {
        std::map<std::vector<int>, std::int32_t> seen;
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            std::vector<int> key;
            for (int f : node.unit_factors) key.push_back(obs.levels[f][i]);
            if (node.unit_uses_rep) key.push_back(static_cast<int>(i % rep));
            auto [it, inserted] =
                seen.emplace(key, static_cast<std::int32_t>(labels.size()));
            if (inserted) {
                std::string label = node.name;
                for (int part : key) label += "." + std::to_string(part);
                labels.push_back(label);
            }
            ids[i] = it->second;
        }
    } else if (!stratum_block_words.empty()) {
        int max_unit = -1;
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            int unit = 0;
            for (std::size_t b = 0; b < stratum_block_words.size(); ++b) {
                int sign = 1;
                for (int f : word_factors(stratum_block_words[b]))
                    if (obs.levels[f][i] == 1) sign = -sign;
                if (sign < 0) unit |= 1 << b;
            }
            ids[i] = unit;
            max_unit = std::max(max_unit, unit);
        }
        for (int u = 0; u <= max_unit; ++u) labels.push_back("b" + std::to_string(u));
    } else {
        // no annotation: each run is its own unit
        (void)line;
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            ids[i] = static_cast<std::int32_t>(i);
            labels.push_back(node.name + "." + std::to_string(i));
        }
    }
    spec.observations.unit_id[stratum] = std::move(ids);
    spec.observations.unit_label[stratum] = std::move(labels);
}

void generate_full_observations(DesignSpec& spec, int rep, int line) {
    DesignSpec grid = make_factorial(
        [&] {
            std::vector<int> ls;
            for (const FactorSpec& f : spec.factors) ls.push_back(f.levels);
            return ls;
        }(),
        rep, spec.alias.generators);
    spec.observations = std::move(grid.observations);
    spec.observations.unit_id.assign(spec.strata.size(), {});
    spec.observations.unit_label.assign(spec.strata.size(), {});
    spec.full_rep = rep;
    for (std::size_t s = 0; s < spec.strata.size(); ++s)
        assign_generated_units(spec, static_cast<int>(s), rep, line);
}

void parse_csv_observations(DesignSpec& spec, const std::vector<Line>& lines) {
    if (lines.empty())
        throw ParseError("observations: csv needs at least a header row", 0, 1);
    const auto header = split_csv_line(lines[0].text);
    const std::size_t want =
        2 + spec.factors.size() + spec.strata.size();  // obs_id, ..., present
    if (header.size() != want)
        throw ParseError("observation header needs obs_id, one column per factor, "
                         "one per stratum, and present",
                         lines[0].number, 1);
    std::vector<int> factor_col(spec.factors.size(), -1);
    std::vector<int> stratum_col(spec.strata.size(), -1);
    int present_col = -1;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& h = trim(header[c]);
        if (h == "present") {
            present_col = static_cast<int>(c);
            continue;
        }
        const int f = spec.factor_index(h);
        if (f >= 0) {
            factor_col[f] = static_cast<int>(c);
            continue;
        }
        const int s = spec.stratum_index(h);
        if (s >= 0) {
            stratum_col[s] = static_cast<int>(c);
            continue;
        }
        throw ParseError("observation column " + h + " is neither a factor, a "
                         "stratum nor present",
                         lines[0].number, static_cast<int>(c + 1));
    }
    for (std::size_t f = 0; f < spec.factors.size(); ++f)
        if (factor_col[f] < 0)
            throw ParseError("observation table misses factor column " +
                                 spec.factors[f].name,
                             lines[0].number, 1);
    for (std::size_t s = 0; s < spec.strata.size(); ++s)
        if (stratum_col[s] < 0)
            throw ParseError("observation table misses stratum column " +
                                 spec.strata[s].name,
                             lines[0].number, 1);
    if (present_col < 0)
        throw ParseError("observation table misses the present column",
                         lines[0].number, 1);

    ObservationTable& obs = spec.observations;
    obs.n_obs = static_cast<std::int64_t>(lines.size()) - 1;
    obs.present.assign(obs.n_obs, 1);
    obs.levels.assign(spec.factors.size(), std::vector<std::uint16_t>(obs.n_obs, 0));
    obs.unit_id.assign(spec.strata.size(), std::vector<std::int32_t>(obs.n_obs, -1));
    obs.unit_label.assign(spec.strata.size(), {});
    std::vector<std::map<std::string, std::int32_t>> interned(spec.strata.size());

    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto f = split_csv_line(lines[row].text);
        if (f.size() != want)
            throw ParseError("observation row has " + std::to_string(f.size()) +
                                 " fields, expected " + std::to_string(want),
                             lines[row].number, 1);
        const std::int64_t i = static_cast<std::int64_t>(row) - 1;
        for (std::size_t fac = 0; fac < spec.factors.size(); ++fac)
            obs.levels[fac][i] = static_cast<std::uint16_t>(find_level(
                spec.factors[fac], trim(f[factor_col[fac]]), lines[row].number));
        const std::string pres = trim(f[present_col]);
        obs.present[i] = (pres == "0" || pres == "false") ? 0 : 1;
        for (std::size_t s = 0; s < spec.strata.size(); ++s) {
            const std::string label = trim(f[stratum_col[s]]);
            if (label.empty()) {
                if (obs.present[i])
                    throw ParseError("present observation lacks a unit for stratum " +
                                         spec.strata[s].name,
                                     lines[row].number, 1);
                continue;
            }
            auto [it, inserted] = interned[s].emplace(
                label, static_cast<std::int32_t>(obs.unit_label[s].size()));
            if (inserted) obs.unit_label[s].push_back(label);
            obs.unit_id[s][i] = it->second;
        }
    }
}

}  // namespace

DesignSpec parse_design(const std::string& text) {
    // logical lines: physical lines further split on ';'
    std::vector<Line> lines;
    {
        std::istringstream in(text);
        std::string phys;
        int number = 0;
        while (std::getline(in, phys)) {
            ++number;
            const auto hash = phys.find('#');
            if (hash != std::string::npos) phys = phys.substr(0, hash);
            for (const std::string& part : split(phys, ';'))
                if (!part.empty()) lines.push_back({part, number});
        }
    }

    DesignSpec spec;
    bool saw_factors = false, saw_obs = false;
    int obs_mode_full_rep = -1;  // >=1 once `full` seen
    std::vector<Line> csv_lines;
    std::vector<std::pair<std::string, Line>> deferred;  // sections after factors

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const Line& line = lines[li];
        const auto colon = line.text.find(':');
        if (colon == std::string::npos) {
            if (saw_obs && obs_mode_full_rep < 0) {
                csv_lines.push_back(line);  // raw CSV row
                continue;
            }
            throw ParseError("expected key: value", line.number, 1);
        }
        const std::string key = trim(line.text.substr(0, colon));
        const std::string value = trim(line.text.substr(colon + 1));
        if (key == "name") {
            spec.name = value;
        } else if (key == "factors") {
            saw_factors = true;
            for (const std::string& item : split(value, ',')) {
                const auto slash = item.find('/');
                if (slash == std::string::npos)
                    throw ParseError("factor needs NAME/levels: " + item, line.number, 1);
                FactorSpec f;
                f.name = trim(item.substr(0, slash));
                std::string rest = trim(item.substr(slash + 1));
                const auto brace = rest.find('{');
                if (brace != std::string::npos) {
                    const auto close = rest.find('}');
                    if (close == std::string::npos)
                        throw ParseError("unterminated level labels", line.number, 1);
                    for (const std::string& lab :
                         split(rest.substr(brace + 1, close - brace - 1), '|'))
                        f.level_labels.push_back(lab);
                    rest = trim(rest.substr(0, brace));
                }
                try {
                    f.levels = std::stoi(rest);
                } catch (const std::exception&) {
                    throw ParseError("bad level count in " + item, line.number, 1);
                }
                spec.factors.push_back(std::move(f));
            }
        } else if (key == "observations" || key == "runs") {
            saw_obs = true;
            if (value.rfind("full", 0) == 0) {
                obs_mode_full_rep = 1;
                const auto eq = value.find("rep=");
                if (eq != std::string::npos) {
                    try {
                        obs_mode_full_rep = std::stoi(value.substr(eq + 4));
                    } catch (const std::exception&) {
                        throw ParseError("bad rep count", line.number, 1);
                    }
                }
            } else if (value.rfind("file=", 0) == 0) {
                std::ifstream in(value.substr(5));
                if (!in)
                    throw ParseError("cannot open observation file " + value.substr(5),
                                     line.number, 1);
                std::string row;
                int sub = 0;
                while (std::getline(in, row)) {
                    ++sub;
                    if (!trim(row).empty()) csv_lines.push_back({trim(row), sub});
                }
            } else if (value == "csv" || value.empty()) {
                // rows follow inline
            } else {
                throw ParseError("observations must be `full [rep=r]`, `csv` or "
                                 "`file=path`",
                                 line.number, 1);
            }
        } else if (key == "strata" || key == "alias" || key == "blocks" ||
                   key == "model" || key == "random") {
            deferred.emplace_back(key, line);
        } else {
            throw ParseError("unknown section " + key, line.number, 1);
        }
    }
    if (!saw_factors) throw ParseError("missing factors section", 1, 1);

    // sections that reference factor names
    std::vector<Word> alias_words;
    for (const auto& [key, line] : deferred) {
        const std::string value = trim(line.text.substr(line.text.find(':') + 1));
        if (key == "strata") {
            for (const std::string& chain : split(value, ',')) {
                int parent = -1;
                for (const std::string& nodetext : split(chain, '>')) {
                    StratumNode node;
                    std::string name = nodetext;
                    const auto bra = nodetext.find('[');
                    if (bra != std::string::npos) {
                        const auto ket = nodetext.find(']');
                        if (ket == std::string::npos || ket < bra)
                            throw ParseError("unterminated stratum annotation",
                                             line.number, 1);
                        name = trim(nodetext.substr(0, bra));
                        // unit keys are '+'-separated: wholeplot[A+rep]
                        for (const std::string& kf :
                             split(nodetext.substr(bra + 1, ket - bra - 1), '+')) {
                            if (kf == "rep") {
                                node.unit_uses_rep = true;
                                continue;
                            }
                            const int f = spec.factor_index(kf);
                            if (f < 0)
                                throw ParseError("unknown unit key " + kf, line.number, 1);
                            node.unit_factors.push_back(f);
                        }
                    }
                    node.name = name;
                    node.parent = parent;
                    spec.strata.push_back(node);
                    parent = static_cast<int>(spec.strata.size()) - 1;
                }
            }
        } else if (key == "alias") {
            std::istringstream words(value);
            std::string token;
            while (words >> token)
                alias_words.push_back(parse_word(token, spec, line.number));
        } else if (key == "blocks") {
            for (const std::string& item : split(value, ',')) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    throw ParseError("blocks need stratum=WORD", line.number, 1);
                BlockWord b;
                const std::string sname = trim(item.substr(0, eq));
                b.stratum = spec.stratum_index(sname);
                if (b.stratum < 0)
                    throw ParseError("blocks name an undeclared stratum " + sname,
                                     line.number, 1);
                b.word = parse_word(trim(item.substr(eq + 1)), spec, line.number);
                spec.block_words.push_back(b);
            }
        } else if (key == "model") {
            if (value == "full") continue;
            if (value == "main") {
                for (int f = 0; f < spec.n_factors(); ++f)
                    spec.model.push_back(Word{1} << f);
            } else if (value.rfind("order<=", 0) == 0) {
                const int max_order = std::stoi(value.substr(7));
                const Word all = (Word{1} << spec.n_factors()) - 1;
                for (Word w = 1; w <= all; ++w)
                    if (word_order(w) <= max_order) spec.model.push_back(w);
            } else {
                for (const std::string& item : split(value, ' '))
                    if (!item.empty())
                        spec.model.push_back(parse_word(item, spec, line.number));
            }
        } else if (key == "random") {
            std::istringstream words(value);
            std::string token;
            while (words >> token)
                spec.tau_overrides[parse_word(token, spec, line.number)] =
                    EffectClass::Role::random;
        }
    }

    try {
        spec.alias = AliasIdeal::from_generators(alias_words);
    } catch (const std::exception& err) {
        throw ParseError(err.what(), 1, 1);
    }

    if (!saw_obs) throw ParseError("missing observations (or runs) section", 1, 1);
    try {
        if (obs_mode_full_rep >= 1) {
            generate_full_observations(spec, obs_mode_full_rep, 0);
        } else {
            parse_csv_observations(spec, csv_lines);
        }
        spec.validate();
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& err) {
        throw SemanticError(err.what());
    }
    return spec;
}

std::string serialize_design(const DesignSpec& spec) {
    std::ostringstream out;
    if (!spec.name.empty()) out << "name: " << spec.name << '\n';
    out << "factors: ";
    for (std::size_t f = 0; f < spec.factors.size(); ++f) {
        if (f) out << ", ";
        out << spec.factors[f].name << '/' << spec.factors[f].levels;
        if (!spec.factors[f].level_labels.empty()) {
            out << '{';
            for (std::size_t l = 0; l < spec.factors[f].level_labels.size(); ++l)
                out << (l ? "|" : "") << spec.factors[f].level_labels[l];
            out << '}';
        }
    }
    out << '\n';

    if (!spec.strata.empty()) {
        // re-emit as chains rooted at parentless strata
        out << "strata: ";
        std::vector<std::string> chains;
        std::vector<std::vector<int>> children(spec.strata.size());
        std::vector<int> roots;
        for (std::size_t s = 0; s < spec.strata.size(); ++s) {
            if (spec.strata[s].parent < 0) roots.push_back(static_cast<int>(s));
            else children[spec.strata[s].parent].push_back(static_cast<int>(s));
        }
        auto render = [&](int s) {
            std::string t = spec.strata[s].name;
            if (!spec.strata[s].unit_factors.empty() || spec.strata[s].unit_uses_rep) {
                t += '[';
                bool first = true;
                for (int f : spec.strata[s].unit_factors) {
                    if (!first) t += '+';
                    t += spec.factors[f].name;
                    first = false;
                }
                if (spec.strata[s].unit_uses_rep) {
                    if (!first) t += '+';
                    t += "rep";
                }
                t += ']';
            }
            return t;
        };
        bool first_chain = true;
        for (int root : roots) {
            std::string chain = render(root);
            int cur = root;
            while (!children[cur].empty()) {
                // chains only; trees with siblings re-emit each child as its own
                // chain segment below
                if (children[cur].size() > 1) break;
                cur = children[cur][0];
                chain += '>' + render(cur);
            }
            if (!first_chain) out << ", ";
            out << chain;
            first_chain = false;
            for (std::size_t extra = 1; extra < children[root].size(); ++extra)
                out << ", " << render(root) << '>' << render(children[root][extra]);
        }
        out << '\n';
    }

    std::vector<std::string> fnames;
    for (const FactorSpec& f : spec.factors) fnames.push_back(f.name);
    if (!spec.alias.generators.empty()) {
        out << "alias:";
        for (Word g : spec.alias.generators) out << ' ' << word_name(g, fnames);
        out << '\n';
    }
    if (!spec.block_words.empty()) {
        out << "blocks: ";
        for (std::size_t b = 0; b < spec.block_words.size(); ++b) {
            if (b) out << ", ";
            out << spec.strata[spec.block_words[b].stratum].name << '='
                << word_name(spec.block_words[b].word, fnames);
        }
        out << '\n';
    }
    if (!spec.model.empty()) {
        out << "model:";
        for (Word w : spec.model) out << ' ' << word_name(w, fnames);
        out << '\n';
    }
    if (!spec.tau_overrides.empty()) {
        out << "random:";
        for (const auto& [w, role] : spec.tau_overrides)
            if (role == EffectClass::Role::random) out << ' ' << word_name(w, fnames);
        out << '\n';
    }

    if (spec.full_rep >= 1) {
        out << "observations: full rep=" << spec.full_rep << '\n';
        return out.str();
    }
    out << "observations: csv\n";
    out << "obs_id";
    for (const FactorSpec& f : spec.factors) out << ',' << f.name;
    for (const StratumNode& s : spec.strata) out << ',' << s.name;
    out << ",present\n";
    const ObservationTable& obs = spec.observations;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        out << i;
        for (std::size_t f = 0; f < spec.factors.size(); ++f) {
            const std::uint16_t l = obs.levels[f][i];
            if (!spec.factors[f].level_labels.empty())
                out << ',' << spec.factors[f].level_labels[l];
            else
                out << ',' << l;
        }
        for (std::size_t s = 0; s < spec.strata.size(); ++s) {
            const std::int32_t u = obs.unit_id[s][i];
            out << ',' << (u >= 0 ? obs.unit_label[s][u] : std::string());
        }
        out << ',' << (obs.present[i] ? 1 : 0) << '\n';
    }
    return out.str();
}

DesignSpec load_design_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open design file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_design(buf.str());
}

}  // namespace stratarank
