#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "stratarank/parse.hpp"
#include "stratarank/rng.hpp"

using namespace stratarank;

namespace {

// independent brute-force closure: expand by repeated xor until stable
std::set<Word> brute_closure(const std::vector<Word>& gens) {
    std::set<Word> closure{0};
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Word> items(closure.begin(), closure.end());
        for (Word a : items)
            for (Word g : gens)
                if (closure.insert(a ^ g).second) changed = true;
    }
    return closure;
}

}  // namespace

TEST_CASE("ideal closure materializes the xor span") {
    const AliasIdeal ideal = AliasIdeal::from_generators({0b1111, 0b10101});
    const std::set<Word> expect = brute_closure({0b1111, 0b10101});
    CHECK(ideal.closure.size() == expect.size());
    for (Word w : ideal.closure) CHECK(expect.count(w) == 1);
    CHECK(ideal.contains(0));
    // closure of the closure is the closure
    const AliasIdeal again = AliasIdeal::from_generators(ideal.closure.empty()
                                                             ? std::vector<Word>{}
                                                             : [&] {
                                                                   std::vector<Word> g;
                                                                   for (Word w : ideal.closure)
                                                                       if (w) g.push_back(w);
                                                                   return g;
                                                               }());
    CHECK(again.closure == ideal.closure);
}

TEST_CASE("empty generator rejected") {
    CHECK_THROWS(AliasIdeal::from_generators({0}));
}

TEST_CASE("alias_class_of matches the coset") {
    SUBCASE("word ABC pairs A with BC") {
        const AliasIdeal ideal = AliasIdeal::from_generators({0b111});
        const EffectClass cls = alias_class_of(0b001, ideal);
        CHECK(cls.representative == 0b001);
        CHECK(cls.members == std::vector<Word>{0b001, 0b110});
    }
    SUBCASE("trivial ideal keeps singletons") {
        const AliasIdeal ideal = AliasIdeal::from_generators({});
        const EffectClass cls = alias_class_of(0b001, ideal);
        CHECK(cls.members == std::vector<Word>{0b001});
    }
    SUBCASE("two generators, coset by exhaustive closure") {
        // ABCD and ACE over 5 factors
        const AliasIdeal ideal = AliasIdeal::from_generators({0b01111, 0b10101});
        const std::set<Word> closure = brute_closure({0b01111, 0b10101});
        const Word e = 0b00011;  // {A,B}
        const EffectClass cls = alias_class_of(e, ideal);
        std::set<Word> expect;
        for (Word a : closure) expect.insert(e ^ a);
        CHECK(cls.members.size() == expect.size());
        for (Word m : cls.members) CHECK(expect.count(m) == 1);
        // canonical representative: min cardinality, lexicographic ties
        for (Word m : cls.members) CHECK_FALSE(word_canon_less(m, cls.representative));
    }
}

TEST_CASE("effect class enumeration") {
    SUBCASE("k=3 with ABC") {
        const AliasIdeal ideal = AliasIdeal::from_generators({0b111});
        const auto classes = enumerate_effect_classes(3, ideal);
        REQUIRE(classes.size() == 3);
        CHECK(classes[0].representative == 0b001);
        CHECK(classes[1].representative == 0b010);
        CHECK(classes[2].representative == 0b100);
        CHECK(classes[0].members == std::vector<Word>{0b001, 0b110});
    }
    SUBCASE("k=2 full factorial") {
        const auto classes = enumerate_effect_classes(2, AliasIdeal::from_generators({}));
        REQUIRE(classes.size() == 3);
    }
    SUBCASE("k=5 with ABCDE pairs |E| with 5-|E|") {
        const AliasIdeal ideal = AliasIdeal::from_generators({0b11111});
        const auto classes = enumerate_effect_classes(5, ideal);
        REQUIRE(classes.size() == 15);
        for (const EffectClass& cls : classes) {
            REQUIRE(cls.members.size() == 2);
            CHECK(word_order(cls.members[0]) + word_order(cls.members[1]) == 5);
        }
        // brute-force coset partition over all 32 subsets
        std::set<Word> covered{0, 0b11111};
        for (const EffectClass& cls : classes)
            for (Word m : cls.members) CHECK(covered.insert(m).second);
        CHECK(covered.size() == 32);
    }
}

TEST_CASE("coset partition covers the power set exactly once, k <= 6") {
    CounterRng rng = CounterRng::stream(7, 0, 0);
    for (int k = 2; k <= 6; ++k) {
        for (int trial = 0; trial < 8; ++trial) {
            const Word all = (Word{1} << k) - 1;
            std::vector<Word> gens;
            const int p = static_cast<int>(rng.next_u64() % 3);
            for (int g = 0; g < p; ++g) {
                const Word w = 1 + rng.next_u64() % all;
                gens.push_back(w);
            }
            AliasIdeal ideal;
            try {
                ideal = AliasIdeal::from_generators(gens);
            } catch (const std::exception&) {
                continue;
            }
            const auto classes = enumerate_effect_classes(k, ideal);
            std::set<Word> covered;
            for (Word a : ideal.closure) covered.insert(a);
            for (const EffectClass& cls : classes)
                for (Word m : cls.members) CHECK(covered.insert(m).second);
            CHECK(covered.size() == (std::size_t{1} << k));
        }
    }
}

TEST_CASE("minimal design file") {
    const DesignSpec spec = parse_design("factors: A/2; strata: plot; runs: full");
    CHECK(spec.n_obs() == 2);
    CHECK(spec.factors.size() == 1);
    CHECK(spec.strata.size() == 1);
    CHECK(spec.observations.unit_label[0].size() == 2);  // one unit per run
}

TEST_CASE("the blocked 2^{3-1} file") {
    const std::string text =
        "factors: A/2, B/2, C/2\n"
        "strata: block\n"
        "alias: ABC\n"
        "blocks: block=B\n"
        "observations: full rep=2\n";
    const DesignSpec spec = parse_design(text);
    CHECK(spec.n_obs() == 8);
    CHECK(spec.alias.closure == std::vector<Word>{0, 0b111});
    CHECK(spec.observations.unit_label[0].size() == 2);  // two blocks of four
}

TEST_CASE("undeclared factor in a word is a semantic error") {
    const std::string text =
        "factors: A/2\n"
        "alias: AX\n"
        "observations: full rep=1\n";
    CHECK_THROWS_AS(parse_design(text), SemanticError);
}

TEST_CASE("multi-level fractionation is rejected") {
    const std::string text =
        "factors: A/3, B/2\n"
        "alias: AB\n"
        "observations: full rep=1\n";
    CHECK_THROWS(parse_design(text));
}

TEST_CASE("serialization round-trips bit-exactly") {
    std::vector<DesignSpec> specs;
    specs.push_back(make_split_plot(3, 4, 4));
    specs.push_back(make_nested_animal(3, 2, 3, 3));
    specs.push_back(make_factorial({2, 2, 2}, 2, {Word{0b111}}, {Word{0b010}}));
    specs.push_back(make_latin_square(4, {{0, 0}}));
    for (const DesignSpec& spec : specs) {
        const std::string once = serialize_design(spec);
        const DesignSpec reparsed = parse_design(once);
        CHECK(serialize_design(reparsed) == once);
        // canonical representatives are stable across the round trip
        const auto a = spec.effect_classes();
        const auto b = reparsed.effect_classes();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i].representative == b[i].representative);
    }
}

TEST_CASE("random-side overrides annotate classes without changing df") {
    const std::string text =
        "factors: A/2, B/2\nrandom: AB\nobservations: full rep=2\n";
    const DesignSpec spec = parse_design(text);
    const auto classes = spec.effect_classes();
    REQUIRE(classes.size() == 3);
    CHECK(classes[0].role == EffectClass::Role::fixed);
    CHECK(classes[2].role == EffectClass::Role::random);
    const DesignSpec plain = parse_design("factors: A/2, B/2\nobservations: full rep=2\n");
    // tau is annotation only: identical allocation either way
    CHECK(serialize_design(spec) != serialize_design(plain));
}

TEST_CASE("unit labels spanning two parents are rejected") {
    DesignSpec spec = make_nested_animal(2, 2, 2, 2);
    // move one observation of dam s1.d0 under sire s0
    spec.observations.unit_id[0][4] = 0;
    CHECK_THROWS_AS(spec.validate(), SemanticError);
}
