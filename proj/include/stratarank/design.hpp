#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratarank/alias.hpp"
#include "stratarank/word.hpp"

namespace stratarank {

struct FactorSpec {
    std::string name;
    int levels = 2;  // >= 2
    std::vector<std::string> level_labels;  // defaults "0".."l-1"
};

struct StratumNode {
    enum class Role { randomization, residual };

    std::string name;
    int parent = -1;  // index into DesignSpec::strata, -1 = root
    Role role = Role::randomization;
    // Unit-key annotation for generated (balanced) observations: factor
    // indices and/or the replicate index. Empty + no block word means one
    // unit per run.
    std::vector<int> unit_factors;
    bool unit_uses_rep = false;
};

// Per-observation treatment levels, stratum unit labels and presence.
// Levels are stored column-major (one vector per factor); unit ids are
// dense per stratum with the label text kept for diagnostics and
// serialization.
struct ObservationTable {
    std::int64_t n_obs = 0;
    std::vector<std::uint8_t> present;                 // length n_obs
    std::vector<std::vector<std::uint16_t>> levels;    // [factor][obs]
    std::vector<std::vector<std::int32_t>> unit_id;    // [stratum][obs]
    std::vector<std::vector<std::string>> unit_label;  // [stratum][unit id]

    std::int64_t n_present() const;
};

struct BlockWord {
    int stratum = -1;
    Word word = 0;
};

struct DesignSpec {
    std::string name;
    std::vector<FactorSpec> factors;
    std::vector<StratumNode> strata;  // declared randomization strata only
    AliasIdeal alias;
    std::vector<BlockWord> block_words;
    ObservationTable observations;
    std::map<Word, EffectClass::Role> tau_overrides;  // default: all fixed
    // Effects to enumerate; empty = the full quotient lattice.
    std::vector<Word> model;

    // Bookkeeping so balanced designs serialize back to `full rep=r`.
    int full_rep = 0;  // 0 = explicit CSV observations

    int n_factors() const { return static_cast<int>(factors.size()); }
    std::int64_t n_obs() const { return observations.n_obs; }
    int factor_index(const std::string& fname) const;   // -1 if absent
    int stratum_index(const std::string& sname) const;  // -1 if absent
    bool stratum_is_blocking(int s) const;
    EffectClass::Role role_of(const EffectClass& e) const;

    // Effect classes per the model restriction, canonical order.
    std::vector<EffectClass> effect_classes() const;

    void validate() const;  // throws SemanticError
};

struct SemanticError : std::runtime_error {
    explicit SemanticError(const std::string& what) : std::runtime_error(what) {}
};

// ---- builders used by the corpus, simulations and search ----------------

// Full factorial (or the +1 fraction of it when `words` is nonempty, all
// factors two-level) with `rep` replicates per retained run. A blocking
// stratum keyed by the block-word signs is appended when block words are
// given.
DesignSpec make_factorial(const std::vector<int>& levels, int rep,
                          const std::vector<Word>& words = {},
                          const std::vector<Word>& block_words = {},
                          const std::string& block_stratum = "block");

// Split plot: whole-plot factor A (a levels), b whole plots per level,
// sub-plot factor B (c levels) applied once per whole plot. Stratum
// "wholeplot" has a*b units of size c.
DesignSpec make_split_plot(int a, int b, int c);

// Sire -> Dam -> Animal nested chain with a cyclic diet treatment
// (diet_levels must divide n_animal for balance).
DesignSpec make_nested_animal(int n_sire, int n_dam, int n_animal,
                              int diet_levels);

// Full Diet x Sire x Dam grid with sire/dam treated as random factors and
// matching sire > dam strata; exercises the crossed-nested product rule.
DesignSpec make_crossed_nested_grid(int diet_levels, int n_sire, int n_dam);

// r x r Latin square (cyclic layout), factors Row/Col/Treat, model
// restricted to main effects. `missing_cells` lists (row, col) pairs to
// drop.
DesignSpec make_latin_square(int r,
                             const std::vector<std::pair<int, int>>& missing_cells = {});

// Marks ~rate of the present observations absent, using the given stream
// of uniforms; never touches already-absent rows.
void delete_fraction(DesignSpec& spec, double rate, std::uint64_t seed);

}  // namespace stratarank
