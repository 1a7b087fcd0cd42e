#pragma once

#include <string>
#include <vector>

#include "stratarank/design.hpp"

namespace stratarank::corpus {

struct Entry {
    std::string label;
    DesignSpec spec;
    bool blocked_or_aliased = false;
    bool balanced = true;
};

// The shipped test corpus: balanced and deleted split-plots, Latin squares
// (with and without missing cells), nested and crossed-nested chains,
// blocked fractions, plain factorials. All N <= 500.
std::vector<Entry> full_corpus();

// Seeded random small structures (split-plot / nested / factorial shapes)
// with optional 20% deletion, N <= 200, for the rank-trace and dense
// oracle sweeps.
std::vector<Entry> random_designs(int count, std::uint64_t seed);

}  // namespace stratarank::corpus
