#include "stratarank/alias.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace stratarank {

std::string word_name(Word w, const std::vector<std::string>& factor_names) {
    if (w == 0) return "(1)";
    bool all_single = true;
    for (int i : word_factors(w)) {
        if (static_cast<std::size_t>(i) >= factor_names.size() ||
            factor_names[i].size() != 1) {
            all_single = false;
            break;
        }
    }
    std::string out;
    bool first = true;
    for (int i : word_factors(w)) {
        const std::string& name = static_cast<std::size_t>(i) < factor_names.size()
                                      ? factor_names[i]
                                      : std::string(1, char('A' + i));
        if (!all_single && !first) out += ':';
        out += name;
        first = false;
    }
    return out;
}

AliasIdeal AliasIdeal::from_generators(const std::vector<Word>& gens) {
    AliasIdeal ideal;
    std::unordered_set<Word> seen{0};
    std::vector<Word> closure{0};
    for (Word g : gens) {
        if (g == 0) throw std::invalid_argument("alias ideal: empty defining word");
        ideal.generators.push_back(g);
        if (seen.count(g)) continue;  // dependent generator, closure unchanged
        const std::size_t n = closure.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Word w = closure[i] ^ g;
            if (seen.insert(w).second) closure.push_back(w);
        }
    }
    std::sort(closure.begin(), closure.end());
    ideal.closure = std::move(closure);
    return ideal;
}

bool AliasIdeal::contains(Word w) const {
    return std::binary_search(closure.begin(), closure.end(), w);
}

int AliasIdeal::rank() const {
    int r = 0;
    for (std::size_t n = closure.size(); n > 1; n >>= 1) ++r;
    return r;
}

EffectClass alias_class_of(Word e, const AliasIdeal& ideal) {
    EffectClass cls;
    cls.members.reserve(ideal.closure.size());
    for (Word a : ideal.closure) cls.members.push_back(e ^ a);
    std::sort(cls.members.begin(), cls.members.end(), word_canon_less);
    cls.members.erase(std::unique(cls.members.begin(), cls.members.end()),
                      cls.members.end());
    cls.representative = cls.members.front();
    return cls;
}

std::vector<EffectClass> enumerate_effect_classes(int k, const AliasIdeal& ideal) {
    if (k < 1 || k > 16)
        throw std::invalid_argument("effect enumeration supports 1..16 factors");
    const Word all = (k == 64) ? ~Word{0} : ((Word{1} << k) - 1);
    std::vector<char> visited(std::size_t{1} << k, 0);
    // Mark the intercept class as visited so it is never emitted.
    for (Word a : ideal.closure) visited[a & all] = 1;
    std::vector<EffectClass> classes;
    for (Word e = 1; e <= all; ++e) {
        if (visited[e]) continue;
        EffectClass cls = alias_class_of(e, ideal);
        for (Word m : cls.members) visited[m & all] = 1;
        classes.push_back(std::move(cls));
    }
    std::sort(classes.begin(), classes.end(),
              [](const EffectClass& a, const EffectClass& b) {
                  return word_canon_less(a.representative, b.representative);
              });
    return classes;
}

}  // namespace stratarank
