#include "stratarank/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "stratarank/csv.hpp"
#include "stratarank/metrics.hpp"
#include "stratarank/parse.hpp"
#include "stratarank/rng.hpp"
#include "stratarank/stats.hpp"
#include "stratarank/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stratarank {

double SimConfig::sd_residual() const {
    auto it = sigma.find("residual");
    return it != sigma.end() ? it->second : 1.0;
}

double SimConfig::sd_for(const std::string& stratum) const {
    auto it = sigma.find(stratum);
    return it != sigma.end() ? it->second : 0.0;
}

double MethodStats::mc_se() const {
    if (n <= 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::string SimReport::to_csv() const {
    std::ostringstream out;
    out << "scenario,method,rejections,n,rate,mc_se\n";
    out << scenario << ",exact," << exact.rejections << ',' << exact.n << ','
        << fmt_double(exact.rate()) << ',' << fmt_double(exact.mc_se()) << '\n';
    out << scenario << ",naive," << naive.rejections << ',' << naive.n << ','
        << fmt_double(naive.rate()) << ',' << fmt_double(naive.mc_se()) << '\n';
    out << scenario << ",redraws," << redraws << ",,,\n";
    out << scenario << ",skipped," << skipped << ",,,\n";
    return out.str();
}

namespace {

// One simulated response vector: stratum unit effects plus residual noise
// plus the sign-coded fixed part. Draw order is fixed (units in id order,
// then residuals in row order) so a replicate is reproducible.
std::vector<double> draw_response(const DesignSpec& spec, const SimConfig& cfg,
                                  CounterRng& rng) {
    const ObservationTable& obs = spec.observations;
    std::vector<double> y(obs.n_obs, 0.0);
    for (std::size_t s = 0; s < spec.strata.size(); ++s) {
        const double sd = cfg.sd_for(spec.strata[s].name);
        std::vector<double> effects(obs.unit_label[s].size());
        for (double& e : effects) e = sd > 0.0 ? sd * rng.normal() : 0.0;
        for (std::int64_t i = 0; i < obs.n_obs; ++i)
            if (obs.unit_id[s][i] >= 0) y[i] += effects[obs.unit_id[s][i]];
    }
    const double sd_res = cfg.sd_residual();
    for (std::int64_t i = 0; i < obs.n_obs; ++i) y[i] += sd_res * rng.normal();
    for (const auto& [word, coeff] : cfg.beta) {
        if (coeff == 0.0) continue;
        for (int f : word_factors(word))
            if (spec.factors[f].levels != 2)
                throw SemanticError("sign-coded coefficients need two-level factors");
        for (std::int64_t i = 0; i < obs.n_obs; ++i) {
            int sign = 1;
            for (int f : word_factors(word))
                if (obs.levels[f][i] == 1) sign = -sign;
            y[i] += coeff * sign;
        }
    }
    return y;
}

void apply_handle(const ProjectorFamily& fam, int s, std::span<const double> v,
                  std::span<double> out) {
    if (s == fam.strata_count()) fam.apply_residual(v, out);
    else fam.apply_orth(s, v, out);
}

// ||projection of P_s y onto span(P_s X)||^2
double projected_ss(const ProjectorFamily& fam, int s, const Eigen::MatrixXd& basis,
                    std::span<const double> y) {
    const std::int64_t n = fam.n();
    std::vector<double> w(n), col(n), pcol(n);
    apply_handle(fam, s, y, w);
    const long d = basis.cols();
    Eigen::MatrixXd b(n, d);
    for (long c = 0; c < d; ++c) {
        for (std::int64_t i = 0; i < n; ++i) col[i] = basis(i, c);
        apply_handle(fam, s, col, pcol);
        for (std::int64_t i = 0; i < n; ++i) b(i, c) = pcol[i];
    }
    Eigen::VectorXd rhs(d);
    for (long c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i) acc += b(i, c) * w[i];
        rhs(c) = acc;
    }
    const double scale = basis.colwise().norm().maxCoeff();
    const Eigen::MatrixXd gram = b.transpose() * b;
    const Eigen::MatrixXd pinv = psd_pseudo_inverse(gram, fam.n_present(), {}, scale);
    return rhs.dot(pinv * rhs);
}

double vector_ss(const ProjectorFamily& fam, int s, std::span<const double> y) {
    std::vector<double> w(fam.n());
    apply_handle(fam, s, y, w);
    double acc = 0.0;
    for (double v : w) acc += v * v;
    return acc;
}

struct StratumTest {
    double f = 0.0;
    long df_num = 0;
    long df_den = 0;
    bool valid = false;
};

// The stratum where an effect's contrasts live: the first declared
// stratum whose unit averaging leaves the columns unchanged (the
// classical effective-unit rule), else the residual. Robust to deletion:
// a whole-plot factor stays unit-constant however many sub-plots vanish.
int resident_stratum(const ProjectorFamily& fam, const Eigen::MatrixXd& basis) {
    const std::int64_t n = basis.rows();
    std::vector<double> col(n), avg(n);
    for (int s = 0; s < fam.strata_count(); ++s) {
        bool constant = true;
        for (long c = 0; c < basis.cols() && constant; ++c) {
            for (std::int64_t i = 0; i < n; ++i) col[i] = basis(i, c);
            fam.apply_mean(s, col, avg);
            for (std::int64_t i = 0; i < n; ++i) {
                if (fam.grand().unit_of[i] < 0) continue;
                if (std::fabs(avg[i] - col[i]) > 1e-9) {
                    constant = false;
                    break;
                }
            }
        }
        if (constant) return s;
    }
    return fam.strata_count();  // residual
}

// F-test of one effect against its stratum residual, df from the
// partition table. The stratum error pools everything except the effects
// resident in the stratum; partial inter-stratum leakage under imbalance
// stays in the error (subtracting it would empty the denominator on
// deleted designs).
StratumTest exact_f_test(const DesignSpec& spec, const DfTable& table,
                         const ProjectorFamily& fam, Word effect_rep, int stratum,
                         std::span<const double> y) {
    StratumTest t;
    int row = -1;
    for (std::size_t e = 0; e < table.effects.size(); ++e)
        if (table.effects[e].representative == effect_rep) row = static_cast<int>(e);
    if (row < 0) return t;
    t.df_num = table.cells[row][stratum].df;
    if (t.df_num <= 0) return t;

    double ss_resident = 0.0, ss_this = 0.0;
    long df_resident = 0;
    for (std::size_t e = 0; e < table.effects.size(); ++e) {
        const int cell_df = table.cells[e][stratum].df;
        if (cell_df == 0) continue;
        const Eigen::MatrixXd basis =
            effect_contrast_basis(spec, table.effects[e]).columns;
        const bool resident = static_cast<int>(e) == row ||
                              resident_stratum(fam, basis) == stratum;
        if (!resident) continue;
        const double ss = projected_ss(fam, stratum, basis, y);
        ss_resident += ss;
        df_resident += cell_df;
        if (static_cast<int>(e) == row) ss_this = ss;
    }
    t.df_den = table.stratum_dims[stratum] - df_resident;
    if (t.df_den <= 0) return t;
    const double ss_resid = std::max(0.0, vector_ss(fam, stratum, y) - ss_resident);
    if (ss_resid <= 0.0) return t;
    t.f = (ss_this / t.df_num) / (ss_resid / t.df_den);
    t.valid = true;
    return t;
}

struct NullSimSpec {
    Word tested_effect = 0;
    int test_stratum_of(const DfTable&) const;
    enum class Naive { two_way_residual, one_way_pooled } naive =
        Naive::two_way_residual;
};

bool level_missing(const DesignSpec& spec) {
    for (std::size_t f = 0; f < spec.factors.size(); ++f) {
        std::vector<char> seen(spec.factors[f].levels, 0);
        for (std::int64_t i = 0; i < spec.n_obs(); ++i)
            if (spec.observations.present[i]) seen[spec.observations.levels[f][i]] = 1;
        for (char s : seen)
            if (!s) return true;
    }
    return false;
}

// The stratum-mismatch mistake: A tested against the within-whole-plot
// scatter as if sub-plots were independent replicates. The denominator
// df scale with the observation count (N_present - q_WP), not with the
// whole-plot count.
double naive_subplot_f(const DesignSpec& spec, std::span<const double> y,
                       int factor, long* df_den_out) {
    const ObservationTable& obs = spec.observations;
    std::map<std::uint16_t, std::pair<double, long>> margins;
    std::vector<double> wp_sum(obs.unit_label[0].size(), 0.0);
    std::vector<long> wp_cnt(obs.unit_label[0].size(), 0);
    double grand = 0.0;
    long n = 0;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        if (!obs.present[i]) continue;
        auto& margin = margins[obs.levels[factor][i]];
        margin.first += y[i];
        ++margin.second;
        wp_sum[obs.unit_id[0][i]] += y[i];
        ++wp_cnt[obs.unit_id[0][i]];
        grand += y[i];
        ++n;
    }
    grand /= n;
    double ss_within = 0.0;
    long q = 0;
    for (std::size_t u = 0; u < wp_sum.size(); ++u)
        if (wp_cnt[u] > 0) ++q;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        if (!obs.present[i]) continue;
        const double m = wp_sum[obs.unit_id[0][i]] / wp_cnt[obs.unit_id[0][i]];
        ss_within += (y[i] - m) * (y[i] - m);
    }
    const long df_within = n - q;
    double ss_a = 0.0;
    for (const auto& [lev, acc] : margins) {
        const double m = acc.first / acc.second;
        ss_a += acc.second * (m - grand) * (m - grand);
    }
    const long df_a = static_cast<long>(margins.size()) - 1;
    *df_den_out = df_within;
    if (df_a <= 0 || df_within <= 0 || ss_within <= 0.0) return -1.0;
    return (ss_a / df_a) / (ss_within / df_within);
}

double naive_one_way_f(const DesignSpec& spec, std::span<const double> y,
                       int factor, long* df_den_out) {
    const ObservationTable& obs = spec.observations;
    std::map<std::uint16_t, std::pair<double, long>> groups;
    double grand = 0.0;
    long n = 0;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        if (!obs.present[i]) continue;
        auto& g = groups[obs.levels[factor][i]];
        g.first += y[i];
        ++g.second;
        grand += y[i];
        ++n;
    }
    grand /= n;
    double ss_between = 0.0;
    for (const auto& [lev, acc] : groups) {
        const double m = acc.first / acc.second;
        ss_between += acc.second * (m - grand) * (m - grand);
    }
    double ss_within = 0.0;
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        if (!obs.present[i]) continue;
        const auto& g = groups.at(obs.levels[factor][i]);
        ss_within += (y[i] - g.first / g.second) * (y[i] - g.first / g.second);
    }
    const long df_between = static_cast<long>(groups.size()) - 1;
    const long df_within = n - static_cast<long>(groups.size());
    *df_den_out = df_within;
    if (df_between <= 0 || df_within <= 0 || ss_within <= 0.0) return -1.0;
    return (ss_between / df_between) / (ss_within / df_within);
}

struct ReplicateOutcome {
    std::uint8_t exact_reject = 0;
    std::uint8_t naive_reject = 0;
    std::uint8_t skipped = 0;
    std::uint16_t redraws = 0;
};

// Shared null-test driver: tested effect against the stratum where it
// retains df, naive denominator as configured.
SimReport run_null_sim(const SimConfig& cfg, Word tested, int test_stratum_pref,
                       bool naive_one_way, const std::string& label,
                       std::uint64_t salt) {
    SimReport report;
    report.scenario = label;
    std::vector<ReplicateOutcome> outcomes(cfg.n_reps);

    const int nt = resolve_threads(cfg.threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(nt)
#endif
    for (long rep = 0; rep < cfg.n_reps; ++rep) {
        ReplicateOutcome& out = outcomes[rep];
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100) {
                out.skipped = 1;
                break;
            }
            CounterRng rng = CounterRng::stream(cfg.master_seed ^ salt,
                                                static_cast<std::uint64_t>(rep),
                                                static_cast<std::uint64_t>(attempt));
            DesignSpec spec = cfg.design;
            std::vector<double> y = draw_response(spec, cfg, rng);
            if (cfg.missing_rate > 0.0) {
                for (std::int64_t i = 0; i < spec.n_obs(); ++i)
                    if (rng.uniform() < cfg.missing_rate)
                        spec.observations.present[i] = 0;
            }
            if (spec.observations.n_present() < 3 || level_missing(spec)) {
                ++out.redraws;
                continue;
            }
            DfTable table;
            try {
                table = partition_table(spec);
            } catch (const std::exception&) {
                ++out.redraws;
                continue;
            }
            const ProjectorFamily fam = ProjectorFamily::build(spec);
            int stratum = test_stratum_pref >= 0 ? test_stratum_pref
                                                 : table.n_strata() - 1;
            const StratumTest exact =
                exact_f_test(spec, table, fam, tested, stratum, y);
            long naive_df = 0;
            const int factor =
                word_factors(tested).empty() ? 0 : word_factors(tested)[0];
            const double naive_f =
                naive_one_way ? naive_one_way_f(spec, y, factor, &naive_df)
                              : naive_subplot_f(spec, y, factor, &naive_df);
            if (!exact.valid || naive_f < 0.0) {
                ++out.redraws;
                continue;
            }
            out.exact_reject =
                f_sf(exact.f, exact.df_num, exact.df_den) < cfg.alpha_level ? 1 : 0;
            const long naive_num =
                static_cast<long>(cfg.design.factors[factor].levels) - 1;
            out.naive_reject =
                f_sf(naive_f, naive_num, naive_df) < cfg.alpha_level ? 1 : 0;
            break;
        }
    }

    for (const ReplicateOutcome& out : outcomes) {
        report.redraws += out.redraws;
        if (out.skipped) {
            ++report.skipped;
            continue;
        }
        report.exact.rejections += out.exact_reject;
        report.naive.rejections += out.naive_reject;
        ++report.exact.n;
        ++report.naive.n;
    }
    return report;
}

}  // namespace

SimReport simulate_split_plot(const SimConfig& cfg) {
    if (cfg.design.strata.empty())
        throw SemanticError("split-plot simulation needs a whole-plot stratum");
    // test factor A (factor 0) in the whole-plot stratum
    return run_null_sim(cfg, Word{1} << 0, 0, /*naive_one_way=*/false,
                        cfg.missing_rate > 0.0 ? "split-plot-missing"
                                               : "split-plot-balanced",
                        0x5017ULL);
}

SimReport simulate_nested(const SimConfig& cfg) {
    if (cfg.design.strata.size() < 2)
        throw SemanticError("nested simulation needs a sire>dam chain");
    return run_null_sim(cfg, Word{1} << 0, -1, /*naive_one_way=*/true,
                        cfg.missing_rate > 0.0 ? "nested-missing" : "nested-balanced",
                        0x2e57edULL);
}

namespace {

double weighted_rho(const DesignSpec& spec, const DfTable& table) {
    const std::map<Word, double> w = uniform_member_weights(spec);
    return 1.0 - ali(spec, table, w);
}

}  // namespace

PowerReport simulate_power_study(const SimConfig& cfg_a, const SimConfig& cfg_b) {
    PowerReport report;
    report.n_reps = cfg_a.n_reps;
    const SimConfig* cfgs[2] = {&cfg_a, &cfg_b};
    PowerRow* rows[2] = {&report.a, &report.b};

    for (int which = 0; which < 2; ++which) {
        const SimConfig& cfg = *cfgs[which];
        PowerRow& row = *rows[which];
        row.design = cfg.design.name.empty() ? (which == 0 ? "A" : "B")
                                             : cfg.design.name;

        DesignSpec base = cfg.design;
        const DfTable table = partition_table(base);
        const ProjectorFamily fam = ProjectorFamily::build(base);
        const int res_stratum = table.n_strata() - 1;
        row.den_df = table.residual_df[res_stratum];
        row.rho_weighted = weighted_rho(base, table);

        // raw +-1 main-effect columns (the data-generation scale)
        const std::int64_t n = base.n_obs();
        auto raw_column = [&](int factor) {
            Eigen::VectorXd col(n);
            for (std::int64_t i = 0; i < n; ++i)
                col(i) = base.observations.levels[factor][i] == 0 ? 1.0 : -1.0;
            return col;
        };
        const Eigen::VectorXd xa = raw_column(0);

        std::vector<double> xa_res(n);
        {
            std::vector<double> tmp(n);
            for (std::int64_t i = 0; i < n; ++i) tmp[i] = xa(i);
            fam.apply_residual(tmp, xa_res);
        }
        double xa_norm2 = 0.0;
        for (double v : xa_res) xa_norm2 += v * v;

        std::vector<std::uint8_t> rej_a(cfg.n_reps), rej_b(cfg.n_reps),
            rej_c(cfg.n_reps);
        std::vector<double> widths(cfg.n_reps, 0.0);

        const int nt = resolve_threads(cfg.threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
        for (long rep = 0; rep < cfg.n_reps; ++rep) {
            CounterRng rng = CounterRng::stream(cfg.master_seed, rep,
                                                which == 0 ? 0xA11 : 0xB22);
            DesignSpec spec = base;
            const std::vector<double> y = draw_response(spec, cfg, rng);

            for (int fct = 0; fct < 3; ++fct) {
                const StratumTest t = exact_f_test(spec, table, fam,
                                                   Word{1} << fct, res_stratum, y);
                const bool rej =
                    t.valid && f_sf(t.f, t.df_num, t.df_den) < cfg.alpha_level;
                if (fct == 0) rej_a[rep] = rej;
                if (fct == 1) rej_b[rep] = rej;
                if (fct == 2) rej_c[rep] = rej;
            }
            // CI width for beta_A from the intra-block normal equations
            double ss_effects = 0.0;
            for (std::size_t e = 0; e < table.effects.size(); ++e) {
                if (table.cells[e][res_stratum].df == 0) continue;
                const Eigen::MatrixXd basis =
                    effect_contrast_basis(spec, table.effects[e]).columns;
                ss_effects += projected_ss(fam, res_stratum, basis, y);
            }
            const double ms_resid =
                std::max(1e-300, (vector_ss(fam, res_stratum, y) - ss_effects) /
                                     table.residual_df[res_stratum]);
            const double se = std::sqrt(ms_resid / xa_norm2);
            widths[rep] =
                2.0 * t_critical(cfg.alpha_level, static_cast<double>(row.den_df)) * se;
        }

        long a = 0, b = 0, c = 0;
        double wsum = 0.0, wcomp = 0.0;
        for (long rep = 0; rep < cfg.n_reps; ++rep) {
            a += rej_a[rep];
            b += rej_b[rep];
            c += rej_c[rep];
            // compensated sum keeps the mean independent of accumulation noise
            const double t = wsum + widths[rep];
            if (std::fabs(wsum) >= std::fabs(widths[rep]))
                wcomp += (wsum - t) + widths[rep];
            else
                wcomp += (widths[rep] - t) + wsum;
            wsum = t;
        }
        row.power_a = static_cast<double>(a) / cfg.n_reps;
        row.power_b = static_cast<double>(b) / cfg.n_reps;
        row.type1_c = static_cast<double>(c) / cfg.n_reps;
        row.mean_ci_width_a = (wsum + wcomp) / cfg.n_reps;
    }
    return report;
}

std::string PowerReport::to_csv() const {
    std::ostringstream out;
    out << "design,power_A,power_B,type1_C,mean_ci_width_A,den_df,weighted_rho\n";
    for (const PowerRow* row : {&a, &b})
        out << row->design << ',' << fmt_double(row->power_a) << ','
            << fmt_double(row->power_b) << ',' << fmt_double(row->type1_c) << ','
            << fmt_double(row->mean_ci_width_a) << ',' << row->den_df << ','
            << fmt_double(row->rho_weighted) << '\n';
    out << "n_reps," << n_reps << ",,,,,\n";
    out << "reference_pair,I=ABCDE blocked BCDE vs I=ABCD;ACE (two generators imply "
           "8 runs; not simulated),,,,,\n";
    out << "simulated_pair,I=ABCDE blocked {AB;AC} vs I=ABCDE blocked {AB},,,,,\n";
    return out.str();
}

double bootstrap_df_baseline(std::int64_t n, int b,
                             const std::vector<std::int32_t>& unit_labels,
                             std::uint64_t seed) {
    if (b < 2) throw std::invalid_argument("bootstrap needs at least 2 draws");
    std::int32_t q = 0;
    for (std::int32_t u : unit_labels) q = std::max(q, u + 1);
    if (q < 4) throw std::invalid_argument("bootstrap needs at least 4 units");

    double f_sum = 0.0;
    std::vector<double> unit_sum(q), unit_cnt(q);
    for (int rep = 0; rep < b; ++rep) {
        CounterRng rng = CounterRng::stream(seed, rep, 0xb007);
        std::fill(unit_sum.begin(), unit_sum.end(), 0.0);
        std::fill(unit_cnt.begin(), unit_cnt.end(), 0.0);
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = rng.normal();
            unit_sum[unit_labels[i]] += v;
            unit_cnt[unit_labels[i]] += 1.0;
        }
        // two pseudo-groups of units; F = between-group / between-unit MS
        double g_sum[2] = {0, 0};
        long g_cnt[2] = {0, 0};
        std::vector<double> means(q);
        for (std::int32_t u = 0; u < q; ++u) {
            means[u] = unit_sum[u] / std::max(1.0, unit_cnt[u]);
            g_sum[u % 2] += means[u];
            ++g_cnt[u % 2];
        }
        const double grand = (g_sum[0] + g_sum[1]) / q;
        double ss_between = 0.0, ss_within = 0.0;
        for (int g = 0; g < 2; ++g) {
            const double gm = g_sum[g] / g_cnt[g];
            ss_between += g_cnt[g] * (gm - grand) * (gm - grand);
        }
        for (std::int32_t u = 0; u < q; ++u) {
            const double gm = g_sum[u % 2] / g_cnt[u % 2];
            ss_within += (means[u] - gm) * (means[u] - gm);
        }
        const double ms_within = ss_within / (q - 2);
        f_sum += ms_within > 0.0 ? ss_between / ms_within : 1.0;
    }
    const double mean_f = f_sum / b;
    if (mean_f <= 1.0 + 1e-12) return 1e6;
    return std::clamp(2.0 * mean_f / (mean_f - 1.0), 0.5, 1e6);
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

BenchResult benchmark(const std::vector<std::int64_t>& n_list, int bootstrap_draws,
                      int repeats, int threads) {
    using clock = std::chrono::steady_clock;
    BenchResult result;
    result.bootstrap_draws = bootstrap_draws;
    result.repeats = repeats;
    const int nt = resolve_threads(threads);

    for (std::int64_t n : n_list) {
        BenchRow row;
        row.n = n;
        // input generation excluded from every timed window
        std::vector<double> v(n);
        std::vector<std::int32_t> labels(n);
        CounterRng gen = CounterRng::stream(0xbe9c, static_cast<std::uint64_t>(n), 0);
        const std::int64_t block = std::max<std::int64_t>(1, n / 10);
        for (std::int64_t i = 0; i < n; ++i) {
            v[i] = gen.normal();
            labels[i] = static_cast<std::int32_t>(std::min<std::int64_t>(9, i / block));
        }
        const int q = 10;
        std::vector<double> sums(q), counts(q), proj(n);
        volatile double sink = 0.0;

        auto projector_once = [&](bool parallel) {
            std::fill(sums.begin(), sums.end(), 0.0);
            std::fill(counts.begin(), counts.end(), 0.0);
#ifdef _OPENMP
            if (parallel) {
                std::vector<double> tsum(static_cast<std::size_t>(nt) * q, 0.0);
                std::vector<double> tcnt(static_cast<std::size_t>(nt) * q, 0.0);
#pragma omp parallel num_threads(nt)
                {
                    const int tid = omp_get_thread_num();
#pragma omp for schedule(static)
                    for (std::int64_t i = 0; i < n; ++i) {
                        tsum[tid * q + labels[i]] += v[i];
                        tcnt[tid * q + labels[i]] += 1.0;
                    }
                }
                for (int t = 0; t < nt; ++t)
                    for (int u = 0; u < q; ++u) {
                        sums[u] += tsum[t * q + u];
                        counts[u] += tcnt[t * q + u];
                    }
            } else
#else
            (void)parallel;
#endif
            {
                for (std::int64_t i = 0; i < n; ++i) {
                    sums[labels[i]] += v[i];
                    counts[labels[i]] += 1.0;
                }
            }
            for (int u = 0; u < q; ++u) sums[u] /= std::max(1.0, counts[u]);
            double gram = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                proj[i] = sums[labels[i]];
                gram += proj[i] * proj[i];
            }
            // one-column Gram rank decision
            const double tol = static_cast<double>(n) * 2.22e-16 * std::sqrt(gram);
            sink = sink + (std::sqrt(gram) > tol ? 1.0 : 0.0);
        };

        std::vector<double> t_proj, t_par, t_boot;
        for (int r = 0; r < repeats; ++r) {
            auto t0 = clock::now();
            projector_once(false);
            t_proj.push_back(std::chrono::duration<double>(clock::now() - t0).count());

            t0 = clock::now();
            projector_once(true);
            t_par.push_back(std::chrono::duration<double>(clock::now() - t0).count());

            t0 = clock::now();
            sink = sink + bootstrap_df_baseline(n, bootstrap_draws, labels,
                                                0xb00 + static_cast<std::uint64_t>(r));
            t_boot.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        }
        row.projector_seconds = median(t_proj);
        row.serial_seconds = row.projector_seconds;
        row.parallel_seconds = median(t_par);
        row.bootstrap_seconds = median(t_boot);
        row.speedup = row.bootstrap_seconds / std::max(1e-12, row.projector_seconds);
        result.rows.push_back(row);
    }
    return result;
}

std::string BenchResult::to_csv() const {
    std::ostringstream out;
    out << "n,projector_s,bootstrap_s,speedup,serial_kernel_s,parallel_kernel_s\n";
    for (const BenchRow& r : rows)
        out << r.n << ',' << fmt_double(r.projector_seconds) << ','
            << fmt_double(r.bootstrap_seconds) << ',' << fmt_double(r.speedup) << ','
            << fmt_double(r.serial_seconds) << ',' << fmt_double(r.parallel_seconds)
            << '\n';
    out << "bootstrap_draws," << bootstrap_draws << ",,,,\n";
    out << "repeats," << repeats << ",,,,\n";
    return out.str();
}

namespace {

std::string trim_copy(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
    Scenario sc;
    std::istringstream in(text);
    std::string line;
    std::string design_path, design_b_path, beta_raw;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_copy(line);
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw SemanticError("scenario line needs key: value -- " + line);
        const std::string key = trim_copy(line.substr(0, colon));
        const std::string value = trim_copy(line.substr(colon + 1));
        if (key == "kind") {
            if (value == "split-plot") sc.kind = Scenario::Kind::split_plot;
            else if (value == "nested") sc.kind = Scenario::Kind::nested;
            else if (value == "power") sc.kind = Scenario::Kind::power;
            else throw SemanticError("unknown scenario kind " + value);
        } else if (key == "design") {
            design_path = value;
        } else if (key == "design_b") {
            design_b_path = value;
        } else if (key == "sigma") {
            for (const std::string& item : [&] {
                     std::vector<std::string> parts;
                     std::string cur;
                     for (char c : value) {
                         if (c == ',') { parts.push_back(cur); cur.clear(); }
                         else cur += c;
                     }
                     parts.push_back(cur);
                     return parts;
                 }()) {
                const auto eq = item.find('=');
                if (eq == std::string::npos)
                    throw SemanticError("sigma needs name=value pairs");
                sc.config.sigma[trim_copy(item.substr(0, eq))] =
                    std::stod(item.substr(eq + 1));
            }
        } else if (key == "n_reps") {
            sc.config.n_reps = std::stol(value);
        } else if (key == "alpha") {
            sc.config.alpha_level = std::stod(value);
        } else if (key == "missing_rate") {
            sc.config.missing_rate = std::stod(value);
        } else if (key == "seed") {
            sc.config.master_seed = std::stoull(value);
        } else if (key == "threads") {
            sc.config.threads = std::stoi(value);
        } else if (key == "beta") {
            beta_raw = value;  // resolved after the design loads
        } else {
            throw SemanticError("unknown scenario key " + key);
        }
    }
    if (design_path.empty()) throw SemanticError("scenario misses design:");
    auto resolve = [&](const std::string& p) {
        if (p.empty() || p.front() == '/') return p;
        return base_dir.empty() ? p : base_dir + "/" + p;
    };
    sc.config.design = load_design_file(resolve(design_path));
    if (!beta_raw.empty()) {
        std::string cur;
        auto flush = [&] {
            cur = trim_copy(cur);
            if (cur.empty()) return;
            const auto eq = cur.find('=');
            if (eq == std::string::npos) throw SemanticError("beta needs EFFECT=value");
            Word w = 0;
            const std::string name = trim_copy(cur.substr(0, eq));
            for (char c : name) {
                const int f = sc.config.design.factor_index(std::string(1, c));
                if (f < 0) throw SemanticError("beta names unknown factor " + name);
                w ^= Word{1} << f;
            }
            sc.config.beta[w] = std::stod(cur.substr(eq + 1));
            cur.clear();
        };
        for (char c : beta_raw) {
            if (c == ',') flush();
            else cur += c;
        }
        flush();
    }
    if (sc.kind == Scenario::Kind::power) {
        if (design_b_path.empty()) throw SemanticError("power scenario misses design_b:");
        sc.config_b = sc.config;
        sc.config_b.design = load_design_file(resolve(design_b_path));
    }
    return sc;
}

SimConfig power_design_narrow_blocks() {
    SimConfig cfg;
    // 2^{5-1}, I = ABCDE, four blocks via {AB, AC}: the traditional
    // handbook layout; absorbs the AB, AC and BC classes.
    cfg.design = make_factorial({2, 2, 2, 2, 2}, 1, {Word{0b11111}},
                                {Word{0b00011}, Word{0b00101}});
    cfg.design.name = "A-fourblocks";
    cfg.sigma = {{"block", std::sqrt(2.0)}, {"residual", 1.0}};
    cfg.beta = {{Word{1}, 1.0}, {Word{2}, 1.0}, {Word{4}, 0.0}};
    cfg.design.model = {Word{1}, Word{2}, Word{4}, Word{8}, Word{16}};
    cfg.n_reps = 10000;
    return cfg;
}

SimConfig power_design_wide_blocks() {
    SimConfig cfg = power_design_narrow_blocks();
    cfg.design = make_factorial({2, 2, 2, 2, 2}, 1, {Word{0b11111}},
                                {Word{0b00011}});
    cfg.design.name = "B-twoblocks";
    cfg.design.model = {Word{1}, Word{2}, Word{4}, Word{8}, Word{16}};
    return cfg;
}

}  // namespace stratarank
