#pragma once

#include <cstddef>
#include <vector>

#include "stratarank/word.hpp"

namespace stratarank {

// The ideal generated by the defining words of a regular fraction, closed
// under symmetric difference. The closure always contains the empty word
// (it is the subgroup of (2^{1..k}, xor) spanned by the generators); the
// empty word is never accepted as a generator.
struct AliasIdeal {
    std::vector<Word> generators;   // as given, empty word rejected
    std::vector<Word> closure{0};   // sorted ascending as integers, includes 0

    static AliasIdeal from_generators(const std::vector<Word>& gens);

    bool trivial() const { return closure.size() == 1; }
    std::size_t order() const { return closure.size(); }
    bool contains(Word w) const;

    // Number of independent generators, i.e. log2 of the closure size.
    int rank() const;
};

// One coset of 2^{1..k} modulo the ideal. The representative is the
// minimum-cardinality member, ties broken lexicographically on sorted
// factor indices. The coset of the empty effect is the intercept class.
struct EffectClass {
    enum class Role { fixed, random };

    Word representative = 0;
    std::vector<Word> members;  // canonical order, pairwise distinct
    Role role = Role::fixed;

    bool is_intercept() const { return representative == 0; }
};

EffectClass alias_class_of(Word e, const AliasIdeal& ideal);

// All non-intercept cosets for k factors, ordered by
// (representative cardinality, lexicographic). The intercept class is
// tracked by callers that need it (resolution) but never emitted here.
std::vector<EffectClass> enumerate_effect_classes(int k, const AliasIdeal& ideal);

}  // namespace stratarank
