#include <doctest.h>

#include <cmath>

#include "corpus.hpp"
#include "stratarank/reference.hpp"
#include "stratarank/rng.hpp"

using namespace stratarank;

namespace {

std::vector<double> random_vector(std::int64_t n, std::uint64_t seed) {
    CounterRng rng = CounterRng::stream(seed, 0, 0);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("incidence maps") {
    SUBCASE("48 observations in 12 whole plots of 4") {
        const DesignSpec spec = make_split_plot(3, 4, 4);
        const IncidenceMap inc = build_incidence(spec.observations, spec, "wholeplot");
        CHECK(inc.q == 12);
        for (std::int64_t s : inc.unit_sizes) CHECK(s == 4);
    }
    SUBCASE("deleted sub-plots shrink units") {
        DesignSpec spec = make_split_plot(3, 4, 4);
        delete_fraction(spec, 0.2, 99);
        const IncidenceMap inc = build_incidence(spec.observations, spec, "wholeplot");
        CHECK(inc.q <= 12);
        std::int64_t total = 0;
        bool any_small = false;
        for (std::int64_t s : inc.unit_sizes) {
            total += s;
            any_small = any_small || s < 4;
        }
        CHECK(total == spec.observations.n_present());
        CHECK(any_small);
    }
    SUBCASE("grand stratum holds everything") {
        const DesignSpec spec = make_factorial({2, 2}, 2);
        const ProjectorFamily fam = ProjectorFamily::build(spec);
        CHECK(fam.grand().q == 1);
        CHECK(fam.grand().unit_sizes[0] == 8);
    }
    SUBCASE("unknown stratum") {
        const DesignSpec spec = make_split_plot(2, 2, 2);
        CHECK_THROWS_AS(build_incidence(spec.observations, spec, "oven"),
                        SemanticError);
    }
}

TEST_CASE("apply_projector basics") {
    // two units {(1,3),(2,2)} -> unit means (2,2,2,2)
    DesignSpec spec;
    spec.factors.push_back({"A", 2, {}});
    StratumNode node;
    node.name = "u";
    spec.strata.push_back(node);
    ObservationTable& obs = spec.observations;
    obs.n_obs = 4;
    obs.present = {1, 1, 1, 1};
    obs.levels = {{0, 1, 0, 1}};
    obs.unit_id = {{0, 0, 1, 1}};
    obs.unit_label = {{"u0", "u1"}};
    spec.validate();

    const ProjectorFamily fam = ProjectorFamily::build(spec);
    std::vector<double> v{1, 3, 2, 2}, out(4);
    fam.apply_mean(0, v, out);
    for (double x : out) CHECK(x == doctest::Approx(2.0));

    SUBCASE("idempotence on a random vector") {
        const std::vector<double> r = random_vector(4, 5);
        std::vector<double> once(4), twice(4);
        fam.apply_orth(0, r, once);
        fam.apply_orth(0, once, twice);
        CHECK(max_abs_diff(once, twice) <= 1e-12);
    }
    SUBCASE("constants are fixed points of the mean operator") {
        std::vector<double> c(4, 3.25), got(4);
        fam.apply_mean(0, c, got);
        CHECK(max_abs_diff(c, got) <= 1e-15);
    }
    SUBCASE("length mismatch") {
        std::vector<double> bad(3), got(4);
        CHECK_THROWS(fam.apply_mean(0, bad, got));
    }
}

TEST_CASE("orthogonal decomposition audit") {
    SUBCASE("balanced split-plot chain") {
        const OrthoAudit audit = check_orthogonal_decomposition(make_split_plot(3, 4, 4));
        CHECK(audit.sum_to_identity);
        CHECK(audit.pairwise_orthogonal);
        CHECK(audit.max_violation <= 1e-12);
    }
    SUBCASE("child unit spanning two parents breaks orthogonality") {
        // 6 observations, parent units {0,1,2} / {3,4,5}, child unit c1
        // deliberately straddling both parents
        DesignSpec spec;
        spec.factors.push_back({"A", 2, {}});
        StratumNode parent, child;
        parent.name = "p";
        child.name = "c";  // parent link intentionally omitted
        spec.strata = {parent, child};
        ObservationTable& obs = spec.observations;
        obs.n_obs = 6;
        obs.present.assign(6, 1);
        obs.levels = {{0, 1, 0, 1, 0, 1}};
        obs.unit_id = {{0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}};
        obs.unit_label = {{"p0", "p1"}, {"c0", "c1", "c2"}};
        spec.validate();
        const OrthoAudit audit = check_orthogonal_decomposition(spec);
        CHECK_FALSE(audit.pairwise_orthogonal);
        CHECK(audit.max_violation > 1e-6);
    }
    SUBCASE("single stratum is trivially clean") {
        const OrthoAudit audit = check_orthogonal_decomposition(make_factorial({2, 2}, 2));
        CHECK(audit.sum_to_identity);
        CHECK(audit.pairwise_orthogonal);
    }
}

TEST_CASE("operator properties across random designs") {
    for (const auto& entry : corpus::random_designs(12, 0xfeed)) {
        const ProjectorFamily fam = ProjectorFamily::build(entry.spec);
        const std::int64_t n = fam.n();
        const std::vector<double> u = random_vector(n, 11);
        const std::vector<double> v = random_vector(n, 12);
        std::vector<double> pu(n), pv(n), ppu(n);
        for (int s = 0; s <= fam.strata_count(); ++s) {
            const ProjectorHandle h = s < fam.strata_count()
                                          ? ProjectorHandle::stratum(fam, s)
                                          : ProjectorHandle::residual(fam);
            pu = apply_projector(h, u);
            pv = apply_projector(h, v);
            ppu = apply_projector(h, pu);
            CHECK(max_abs_diff(pu, ppu) <= 1e-12);  // idempotent
            double lhs = 0.0, rhs = 0.0;            // symmetric
            for (std::int64_t i = 0; i < n; ++i) {
                lhs += pu[i] * v[i];
                rhs += u[i] * pv[i];
            }
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
        // resolution of identity at present rows
        std::vector<double> acc(n), part(n);
        fam.apply_mean(-1, u, acc);
        for (int s = 0; s < fam.strata_count(); ++s) {
            fam.apply_orth(s, u, part);
            for (std::int64_t i = 0; i < n; ++i) acc[i] += part[i];
        }
        fam.apply_residual(u, part);
        for (std::int64_t i = 0; i < n; ++i) acc[i] += part[i];
        for (std::int64_t i = 0; i < n; ++i)
            if (fam.grand().unit_of[i] >= 0)
                CHECK(std::fabs(acc[i] - u[i]) <= 1e-10);
    }
}

TEST_CASE("streaming operators agree with the dense serial reference") {
    for (const auto& entry : corpus::random_designs(8, 0xd00d)) {
        if (entry.spec.n_obs() > 200) continue;
        const ProjectorFamily fam = ProjectorFamily::build(entry.spec);
        const auto dense = reference::dense_family(entry.spec);
        const std::int64_t n = fam.n();
        const std::vector<double> v = random_vector(n, 21);
        Eigen::VectorXd ev(n);
        for (std::int64_t i = 0; i < n; ++i) ev(i) = v[i];
        std::vector<double> got(n);
        // dense[0] = grand, then strata, then residual
        fam.apply_mean(-1, v, got);
        Eigen::VectorXd want = dense[0] * ev;
        for (std::int64_t i = 0; i < n; ++i)
            CHECK(std::fabs(got[i] - want(i)) <= 1e-12);
        for (int s = 0; s < fam.strata_count(); ++s) {
            fam.apply_orth(s, v, got);
            want = dense[s + 1] * ev;
            for (std::int64_t i = 0; i < n; ++i)
                CHECK(std::fabs(got[i] - want(i)) <= 1e-12);
        }
        fam.apply_residual(v, got);
        want = dense.back() * ev;
        for (std::int64_t i = 0; i < n; ++i)
            CHECK(std::fabs(got[i] - want(i)) <= 1e-12);
    }
}

TEST_CASE("fully deleted stratum is an error") {
    DesignSpec spec = make_split_plot(2, 2, 2);
    for (std::int64_t i = 0; i < spec.n_obs(); ++i)
        spec.observations.present[i] = 0;
    CHECK_THROWS(build_incidence(spec.observations, spec, "wholeplot"));
}
