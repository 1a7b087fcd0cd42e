#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stratarank {

// A factorial effect as a bitset over factor indices 0..k-1.
// Symmetric difference of effects is XOR, which keeps coset arithmetic
// exact and allocation-free for k <= 63.
using Word = std::uint64_t;

inline int word_order(Word w) { return __builtin_popcountll(w); }

inline bool word_contains(Word outer, Word inner) {
    return (outer & inner) == inner;
}

// Lexicographic order on the ascending factor-index sequences,
// e.g. {0,3} < {1,2} because the sequences (0,3) < (1,2).
inline bool word_lex_less(Word a, Word b) {
    while (a != 0 && b != 0) {
        const Word la = a & (~a + 1);  // lowest set bit
        const Word lb = b & (~b + 1);
        if (la != lb) return la < lb;
        a ^= la;
        b ^= lb;
    }
    return a == 0 && b != 0;
}

// Canonical effect order: by cardinality, ties broken lexicographically
// on sorted factor indices.
inline bool word_canon_less(Word a, Word b) {
    const int oa = word_order(a), ob = word_order(b);
    if (oa != ob) return oa < ob;
    return word_lex_less(a, b);
}

inline std::vector<int> word_factors(Word w) {
    std::vector<int> out;
    while (w != 0) {
        const int i = __builtin_ctzll(w);
        out.push_back(i);
        w &= w - 1;
    }
    return out;
}

// Renders an effect by its factor names: concatenated when every
// participating name is a single character ("ABC"), ':'-joined otherwise.
std::string word_name(Word w, const std::vector<std::string>& factor_names);

}  // namespace stratarank
