// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "stratarank/diagnostics.hpp"
#include "stratarank/metrics.hpp"
#include "stratarank/reference.hpp"
#include "stratarank/rng.hpp"
#include "stratarank/oracles.hpp"
#include "stratarank/simulate.hpp"

using namespace stratarank;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::printf("%s  criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", id, what.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++failures;
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// --- criterion 1: partition identity over the corpus ---------------------
void criterion_partition_identity() {
    const auto t0 = clock_type::now();
    const auto corpus = corpus::full_corpus();
    bool ok = corpus.size() >= 50;
    std::string detail = std::to_string(corpus.size()) + " designs";
    for (const auto& entry : corpus) {
        const DfTable t = partition_table(entry.spec);
        long cells = 0, residuals = 0;
        for (const auto& row : t.cells)
            for (const DfCell& c : row) cells += c.df;
        for (int r : t.residual_df) residuals += r;
        if (cells + residuals + t.deficit != t.n_present - 1) {
            ok = false;
            detail = entry.label + ": identity broken";
            break;
        }
        if (!entry.blocked_or_aliased && t.deficit != 0) {
            ok = false;
            detail = entry.label + ": unexpected deficit";
            break;
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 5.0) ok = false;
    report(1, "partition identity on the corpus", ok, detail + ", " + fmt(secs) + "s");
}

// --- criterion 2: split-plot closed form, all (a,b,c) in {2..5}^3 --------
void criterion_split_plot_table() {
    const auto t0 = clock_type::now();
    bool ok = true;
    for (int a = 2; a <= 5 && ok; ++a)
        for (int b = 2; b <= 5 && ok; ++b)
            for (int c = 2; c <= 5 && ok; ++c) {
                const ClosedFormTable oracle = split_plot_table(a, b, c);
                const DfTable t = partition_table(make_split_plot(a, b, c));
                ok = t.cells[0][0].df == oracle.df_of("A") &&
                     t.residual_df[0] == oracle.df_of("wholeplot_error") &&
                     t.cells[1][1].df == oracle.df_of("B") &&
                     t.cells[2][1].df == oracle.df_of("AB") &&
                     t.residual_df[1] == oracle.df_of("subplot_error") &&
                     t.total == oracle.total() && t.deficit == 0;
            }
    const double secs = seconds_since(t0);
    if (secs >= 1.0) ok = false;
    report(2, "split-plot closed form, 64 shapes", ok, fmt(secs) + "s");
}

// --- criterion 3: Cochran identity --------------------------------------
void criterion_cochran() {
    bool ok = true;
    std::vector<std::vector<int>> stack{{}};
    for (int k = 1; k <= 4; ++k) {
        std::vector<std::vector<int>> next;
        for (const auto& prefix : stack)
            for (int l = 2; l <= 4; ++l) {
                auto v = prefix;
                v.push_back(l);
                next.push_back(v);
                if (static_cast<int>(v.size()) == k && !cochran_check(make_factorial(v, 1)))
                    ok = false;
            }
        stack = std::move(next);
    }
    report(3, "Cochran identity on balanced single-stratum factorials", ok, "");
}

// --- criterion 4: Box-Hunter resolution vs brute-force cosets ------------
void criterion_box_hunter() {
    bool ok = true;
    long tested = 0;
    std::string detail;
    for (int k = 3; k <= 6 && ok; ++k) {
        const Word all = (Word{1} << k) - 1;
        std::vector<Word> words;
        for (Word w = 1; w <= all; ++w)
            if (word_order(w) >= 2) words.push_back(w);
        // p = 1
        for (Word g : words) {
            const DesignSpec spec = make_factorial(std::vector<int>(k, 2), 1, {g});
            const DfTable t = partition_table(spec);
            const ResolutionResult r = resolution(spec, t);
            // brute-force oracle: shortest word of the closed ideal
            std::set<Word> closure{0};
            for (bool grew = true; grew;) {
                grew = false;
                for (Word a : std::set<Word>(closure))
                    if (closure.insert(a ^ g).second) grew = true;
            }
            int shortest = k + 1;
            for (Word w : closure)
                if (w) shortest = std::min(shortest, word_order(w));
            if (!r.r || *r.r != shortest) {
                ok = false;
                detail = "k=" + std::to_string(k) + " single word";
                break;
            }
            ++tested;
        }
        // p = 2, independent pairs
        for (std::size_t i = 0; i < words.size() && ok; ++i)
            for (std::size_t j = i + 1; j < words.size(); ++j) {
                if (words[j] == words[i]) continue;
                const Word g1 = words[i], g2 = words[j];
                if ((g1 ^ g2) == 0) continue;
                const DesignSpec spec =
                    make_factorial(std::vector<int>(k, 2), 1, {g1, g2});
                const DfTable t = partition_table(spec);
                const ResolutionResult r = resolution(spec, t);
                const std::set<Word> closure{0, g1, g2, g1 ^ g2};
                int shortest = k + 1;
                for (Word w : closure)
                    if (w) shortest = std::min(shortest, word_order(w));
                if (!r.r || *r.r != shortest) {
                    ok = false;
                    detail = "k=" + std::to_string(k) + " word pair";
                    break;
                }
                ++tested;
            }
    }
    report(4, "Box-Hunter resolution vs brute-force cosets", ok,
           std::to_string(tested) + " fractions" + detail);
}

// --- criterion 5: Table-4 member vector ----------------------------------
void criterion_table4() {
    const DesignSpec spec = make_factorial({2, 2, 2}, 2, {Word{0b111}}, {Word{0b010}});
    const DfTable t = partition_table(spec);
    const auto rows = member_retention(spec, t);
    auto rho = [&](Word m) {
        for (const auto& r : rows)
            if (r.member == m) return r.rho;
        return -1.0;
    };
    auto delta = [&](Word m) {
        for (const auto& r : rows)
            if (r.member == m) return r.delta;
        return -1L;
    };
    long lost = 0;
    for (const auto& r : rows) lost += r.delta;
    const bool ok = rho(0b001) == 1.0 && rho(0b010) == 0.0 && rho(0b100) == 1.0 &&
                    rho(0b011) == 0.0 && rho(0b101) == 1.0 && rho(0b110) == 0.0 &&
                    delta(0b001) == 0 && delta(0b010) == 1 && delta(0b100) == 0 &&
                    delta(0b011) == 1 && delta(0b101) == 0 && delta(0b110) == 1 &&
                    lost == 3;
    report(5, "blocked 2^{3-1} member retention table", ok,
           "rho=(1,0,1,0,1,0), df lost = " + std::to_string(lost));
}

// --- criterion 6: rank-trace equivalence ---------------------------------
void criterion_rank_trace() {
    bool ok = true;
    double worst = 0.0;
    for (const auto& entry : corpus::random_designs(50, 0xacce97)) {
        const ProjectorFamily fam = ProjectorFamily::build(entry.spec);
        for (const EffectClass& e : entry.spec.effect_classes()) {
            const ContrastBasis basis = effect_contrast_basis(entry.spec, e);
            for (int s = 0; s <= fam.strata_count(); ++s) {
                const ProjectorHandle h = s < fam.strata_count()
                                              ? ProjectorHandle::stratum(fam, s)
                                              : ProjectorHandle::residual(fam);
                const DfCell cell = df_cell(basis, h);
                const double trace = trace_df_crosscheck(basis, h);
                worst = std::max(worst, std::fabs(cell.df - trace));
            }
        }
    }
    ok = worst <= 1e-6;
    report(6, "rank equals trace on 50 seeded designs", ok,
           "max |df - trace| = " + fmt(worst));
}

// --- criterion 7: dense-oracle equivalence -------------------------------
void criterion_dense_oracle() {
    bool ok = true;
    std::string detail;
    for (const auto& entry : corpus::full_corpus()) {
        if (entry.spec.n_obs() > 200) continue;
        const DfTable t = partition_table(entry.spec);
        const ProjectorFamily fam = ProjectorFamily::build(entry.spec);
        const auto dense = reference::dense_family(entry.spec);
        std::vector<Eigen::MatrixXd> bases;
        long total_cols = 0;
        for (const EffectClass& e : t.effects) {
            bases.push_back(effect_contrast_basis(entry.spec, e).columns);
            total_cols += bases.back().cols();
        }
        for (int s = 0; s < t.n_strata() && ok; ++s) {
            Eigen::MatrixXd stacked(entry.spec.n_obs(), total_cols);
            long col = 0;
            int joint_before = 0;
            for (std::size_t e = 0; e < t.effects.size(); ++e) {
                const int streaming = t.cells[e][s].df + t.cells[e][s].absorbed_df;
                for (long c = 0; c < bases[e].cols(); ++c)
                    stacked.col(col++) = bases[e].col(c);
                const int joint = reference::dense_df(
                    dense[s + 1], stacked.leftCols(col), fam.n_present());
                if (joint - joint_before != streaming) {
                    ok = false;
                    detail = entry.label;
                    break;
                }
                joint_before = joint;
            }
        }
        if (!ok) break;
    }
    report(7, "streaming df equals dense-matrix df", ok, detail);
}

// --- criteria 8+9: Monte Carlo size --------------------------------------
void criterion_split_plot_mc() {
    const auto t0 = clock_type::now();
    SimConfig cfg;
    cfg.design = make_split_plot(3, 4, 4);
    cfg.sigma = {{"wholeplot", 1.0}, {"residual", 1.0}};
    cfg.n_reps = 1000;
    cfg.master_seed = 2024;
    const SimReport balanced = simulate_split_plot(cfg);
    cfg.missing_rate = 0.2;
    const SimReport missing = simulate_split_plot(cfg);
    const double secs = seconds_since(t0);
    const bool ok = balanced.exact.rate() >= 0.03 && balanced.exact.rate() <= 0.07 &&
                    balanced.naive.rate() > 0.35 && missing.exact.rate() >= 0.03 &&
                    missing.exact.rate() <= 0.08 && missing.naive.rate() > 0.30 &&
                    secs < 60.0;
    report(8, "split-plot Monte Carlo size", ok,
           "exact " + fmt(balanced.exact.rate()) + "/" + fmt(missing.exact.rate()) +
               ", naive " + fmt(balanced.naive.rate()) + "/" +
               fmt(missing.naive.rate()) + ", " + fmt(secs) + "s");
}

void criterion_nested_mc() {
    const auto t0 = clock_type::now();
    SimConfig cfg;
    cfg.design = make_nested_animal(6, 4, 3, 3);
    cfg.sigma = {{"sire", 1.0}, {"dam", 0.5}, {"residual", 1.0}};
    cfg.n_reps = 1000;
    cfg.master_seed = 2024;
    const SimReport balanced = simulate_nested(cfg);
    cfg.missing_rate = 0.2;
    const SimReport missing = simulate_nested(cfg);
    const double secs = seconds_since(t0);
    const bool ok = balanced.exact.rate() >= 0.015 && balanced.exact.rate() <= 0.06 &&
                    balanced.naive.rate() < 0.02 && missing.exact.rate() >= 0.04 &&
                    missing.exact.rate() <= 0.11 && missing.naive.rate() < 0.03 &&
                    secs < 60.0;
    report(9, "nested Monte Carlo size", ok,
           "exact " + fmt(balanced.exact.rate()) + "/" + fmt(missing.exact.rate()) +
               ", naive " + fmt(balanced.naive.rate()) + "/" +
               fmt(missing.naive.rate()) + ", " + fmt(secs) + "s");
}

// --- criterion 10: power ordering ----------------------------------------
void criterion_power() {
    SimConfig a = power_design_narrow_blocks();
    SimConfig b = power_design_wide_blocks();
    a.n_reps = b.n_reps = 10000;
    a.master_seed = b.master_seed = 2024;
    const PowerReport rep = simulate_power_study(a, b);
    const bool ok = rep.b.power_a > rep.a.power_a && rep.b.power_b > rep.a.power_b &&
                    rep.b.mean_ci_width_a < rep.a.mean_ci_width_a &&
                    rep.a.type1_c >= 0.03 && rep.a.type1_c <= 0.07 &&
                    rep.b.type1_c >= 0.03 && rep.b.type1_c <= 0.07;
    report(10, "power ordering of the blocked-fraction pair", ok,
           "power_A " + fmt(rep.a.power_a) + "<" + fmt(rep.b.power_a) + ", CI " +
               fmt(rep.b.mean_ci_width_a) + "<" + fmt(rep.a.mean_ci_width_a) +
               ", type1 " + fmt(rep.a.type1_c) + "/" + fmt(rep.b.type1_c));
}

// --- criterion 11: timing ratios ------------------------------------------
void criterion_timing() {
    const BenchResult bench = benchmark({10000, 100000}, 100, 7);
    const BenchRow& mid = bench.rows[0];
    const BenchRow& big = bench.rows[1];
    const double scale = big.projector_seconds / std::max(1e-12, mid.projector_seconds);
    const bool ok = big.speedup >= 10.0 && scale <= 20.0;
    report(11, "projector beats the 100-draw bootstrap", ok,
           "speedup " + fmt(big.speedup) + "x at N=1e5, scaling " + fmt(scale) +
               "x from 1e4");
}

// --- criterion 12: diagnostics soundness ----------------------------------
void criterion_diagnostics() {
    bool ok = true;
    std::string detail;
    for (const auto& entry : corpus::full_corpus()) {
        const DfTable t = partition_table(entry.spec);
        const ProjectorFamily fam = ProjectorFamily::build(entry.spec);
        for (std::size_t e = 0; e < t.effects.size() && ok; ++e)
            for (int s = 0; s < t.n_strata(); ++s) {
                const int df = t.cells[e][s].df + t.cells[e][s].absorbed_df;
                auto [bound, flagged] =
                    stratum_bound(t.effects[e],
                                  s < fam.strata_count() ? s : fam.strata_count(),
                                  entry.spec);
                const bool full = full_retention_check(
                    t.effects[e], s < fam.strata_count() ? s : fam.strata_count(),
                    entry.spec);
                if (df > bound || full != (df == t.ideal[e])) {
                    ok = false;
                    detail = entry.label;
                    break;
                }
            }
        if (!ok) break;
    }
    report(12, "stratum bounds and full-retention agreement", ok, detail);
}

// --- criterion 13: determinism --------------------------------------------
void criterion_determinism() {
    SimConfig cfg;
    cfg.design = make_split_plot(3, 4, 4);
    cfg.sigma = {{"wholeplot", 1.0}, {"residual", 1.0}};
    cfg.n_reps = 300;
    cfg.missing_rate = 0.2;
    cfg.master_seed = 99;
    cfg.threads = 1;
    const std::string sim1 = simulate_split_plot(cfg).to_csv();
    cfg.threads = 4;
    const std::string sim4 = simulate_split_plot(cfg).to_csv();

    const std::string t1 = partition_table(make_split_plot(4, 3, 4), {}, 1).to_csv();
    const std::string t4 = partition_table(make_split_plot(4, 3, 4), {}, 4).to_csv();

    SimConfig pa = power_design_narrow_blocks(), pb = power_design_wide_blocks();
    pa.n_reps = pb.n_reps = 500;
    pa.threads = pb.threads = 1;
    const std::string p1 = simulate_power_study(pa, pb).to_csv();
    pa.threads = pb.threads = 5;
    const std::string p5 = simulate_power_study(pa, pb).to_csv();

    const bool ok = sim1 == sim4 && t1 == t4 && p1 == p5;
    report(13, "bit-identical CSV output for any thread count", ok, "");
}

}  // namespace

int main() {
    const auto t0 = clock_type::now();
    criterion_partition_identity();
    criterion_split_plot_table();
    criterion_cochran();
    criterion_box_hunter();
    criterion_table4();
    criterion_rank_trace();
    criterion_dense_oracle();
    criterion_split_plot_mc();
    criterion_nested_mc();
    criterion_power();
    criterion_timing();
    criterion_diagnostics();
    criterion_determinism();
    std::printf("%d of 13 criteria passed (%.1fs total)\n", 13 - failures,
                seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
