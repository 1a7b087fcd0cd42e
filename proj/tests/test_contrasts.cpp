#include <doctest.h>

#include <cmath>

#include "stratarank/contrasts.hpp"
#include "stratarank/rank.hpp"
#include "stratarank/rng.hpp"

using namespace stratarank;

TEST_CASE("one-way Helmert contrasts") {
    SUBCASE("l=2 is the sign column") {
        const Eigen::MatrixXd h = one_way_contrasts(2);
        REQUIRE(h.cols() == 1);
        CHECK(h(0, 0) == doctest::Approx(1.0));
        CHECK(h(1, 0) == doctest::Approx(-1.0));
    }
    SUBCASE("l=3 matches the (1,-1,0),(1,1,-2) convention") {
        const Eigen::MatrixXd h = one_way_contrasts(3);
        CHECK(h(0, 0) == 1.0);
        CHECK(h(1, 0) == -1.0);
        CHECK(h(2, 0) == 0.0);
        CHECK(h(0, 1) == 1.0);
        CHECK(h(1, 1) == 1.0);
        CHECK(h(2, 1) == -2.0);
    }
    SUBCASE("l=4 columns are zero-sum, orthogonal, rank 3") {
        const Eigen::MatrixXd h = one_way_contrasts(4);
        REQUIRE(h.cols() == 3);
        for (int j = 0; j < 3; ++j) CHECK(std::fabs(h.col(j).sum()) <= 1e-12);
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                CHECK(std::fabs(h.col(i).dot(h.col(j))) <= 1e-12);
        CHECK(gram_rank(h.transpose() * h, 4).rank == 3);
    }
    SUBCASE("polynomial contrasts are also orthonormal zero-sum") {
        const Eigen::MatrixXd h = one_way_contrasts(5, ContrastKind::polynomial);
        for (int j = 0; j < 4; ++j) CHECK(std::fabs(h.col(j).sum()) <= 1e-10);
        CHECK(gram_rank(h.transpose() * h, 5).rank == 4);
    }
    SUBCASE("l < 2 rejected") { CHECK_THROWS(one_way_contrasts(1)); }
}

TEST_CASE("ideal df is the product of level contrasts") {
    const DesignSpec spec = make_factorial({3, 2, 4}, 1);
    const AliasIdeal none = AliasIdeal::from_generators({});
    CHECK(ideal_df(alias_class_of(0b101, none), spec) == 6);  // (3-1)(4-1)
    CHECK(ideal_df(alias_class_of(0b010, none), spec) == 1);
    const DesignSpec two = make_factorial({2, 2, 2}, 1);
    CHECK(ideal_df(alias_class_of(0b111, none), two) == 1);
}

TEST_CASE("contrast bases") {
    SUBCASE("full 2x2, basis for A is the sign column in run order") {
        const DesignSpec spec = make_factorial({2, 2}, 1);
        const ContrastBasis basis =
            effect_contrast_basis(spec, alias_class_of(0b01, spec.alias));
        REQUIRE(basis.d == 1);
        const double s = basis.columns(0, 0);
        CHECK(s > 0);
        CHECK(basis.columns(1, 0) == doctest::Approx(s));
        CHECK(basis.columns(2, 0) == doctest::Approx(-s));
        CHECK(basis.columns(3, 0) == doctest::Approx(-s));
    }
    SUBCASE("alias partners share the column space on retained runs") {
        const DesignSpec spec = make_factorial({2, 2, 2}, 1, {Word{0b111}});
        REQUIRE(spec.n_obs() == 4);
        const Eigen::MatrixXd a = member_columns(spec, 0b001);
        const Eigen::MatrixXd bc = member_columns(spec, 0b110);
        Eigen::MatrixXd both(spec.n_obs(), 2);
        both.col(0) = a.col(0);
        both.col(1) = bc.col(0);
        CHECK(gram_rank(both.transpose() * both, spec.n_obs()).rank == 1);
    }
    SUBCASE("split-plot A basis is constant within whole plots") {
        const DesignSpec spec = make_split_plot(3, 4, 4);
        const ContrastBasis basis =
            effect_contrast_basis(spec, alias_class_of(0b01, spec.alias));
        REQUIRE(basis.d == 2);
        for (std::int64_t i = 0; i < spec.n_obs(); ++i)
            for (std::int64_t j = 0; j < spec.n_obs(); ++j)
                if (spec.observations.unit_id[0][i] == spec.observations.unit_id[0][j])
                    for (long c = 0; c < 2; ++c)
                        CHECK(basis.columns(i, c) ==
                              doctest::Approx(basis.columns(j, c)));
    }
}

TEST_CASE("basis invariants on balanced grids") {
    const DesignSpec spec = make_factorial({3, 4}, 2);
    const auto classes = spec.effect_classes();
    std::vector<ContrastBasis> bases;
    for (const auto& e : classes) bases.push_back(effect_contrast_basis(spec, e));

    SUBCASE("columns sum to zero over the grid") {
        for (const auto& b : bases)
            for (long c = 0; c < b.d; ++c)
                CHECK(std::fabs(b.columns.col(c).sum()) <= 1e-10);
    }
    SUBCASE("cross-effect blocks of X'X vanish") {
        for (std::size_t i = 0; i < bases.size(); ++i)
            for (std::size_t j = i + 1; j < bases.size(); ++j) {
                const Eigen::MatrixXd cross =
                    bases[i].columns.transpose() * bases[j].columns;
                CHECK(cross.cwiseAbs().maxCoeff() <= 1e-10);
            }
    }
    SUBCASE("rank equals the nominal dimension") {
        for (const auto& b : bases) {
            const Eigen::MatrixXd gram = b.columns.transpose() * b.columns;
            CHECK(gram_rank(gram, spec.n_obs()).rank == b.d);
        }
    }
}

TEST_CASE("alias-column equivalence on regular fractions, k <= 6") {
    CounterRng rng = CounterRng::stream(0xa1b2, 0, 0);
    for (int k = 3; k <= 6; ++k) {
        for (int trial = 0; trial < 6; ++trial) {
            const Word all = (Word{1} << k) - 1;
            Word g = 0;
            while (word_order(g) < 2) g = 1 + rng.next_u64() % all;
            DesignSpec spec;
            try {
                spec = make_factorial(std::vector<int>(k, 2), 1, {g});
            } catch (const std::exception&) {
                continue;
            }
            for (const EffectClass& cls : spec.effect_classes()) {
                const long d = ideal_df(cls, spec);
                Eigen::MatrixXd stacked(spec.n_obs(),
                                        d * static_cast<long>(cls.members.size()));
                long col = 0;
                for (Word m : cls.members) {
                    const Eigen::MatrixXd mc = member_columns(spec, m);
                    for (long c = 0; c < mc.cols(); ++c) stacked.col(col++) = mc.col(c);
                }
                CHECK(gram_rank(stacked.transpose() * stacked, spec.n_obs()).rank == d);
            }
        }
    }
}
