#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stratarank/design.hpp"
#include "stratarank/df_table.hpp"

namespace stratarank {

struct SimConfig {
    DesignSpec design;
    std::map<std::string, double> sigma;  // stratum name -> sd; "residual" key
    std::map<Word, double> beta;          // sign-coded fixed-effect coefficients
    long n_reps = 1000;
    double alpha_level = 0.05;
    double missing_rate = 0.0;
    std::uint64_t master_seed = 1;
    int threads = 0;

    double sd_residual() const;
    double sd_for(const std::string& stratum) const;
};

struct MethodStats {
    long rejections = 0;
    long n = 0;
    double rate() const { return n > 0 ? static_cast<double>(rejections) / n : 0.0; }
    double mc_se() const;
};

struct SimReport {
    std::string scenario;
    MethodStats exact;
    MethodStats naive;
    long redraws = 0;
    long skipped = 0;

    std::string to_csv() const;
};

// Whole-plot F-test of A with the stratum-correct denominator versus the
// two-way-residual denominator.
SimReport simulate_split_plot(const SimConfig& cfg);

// Diet F-test in the Sire->Dam->Animal chain versus pooled one-way ANOVA.
SimReport simulate_nested(const SimConfig& cfg);

struct PowerRow {
    std::string design;
    double power_a = 0.0;
    double power_b = 0.0;
    double type1_c = 0.0;
    double mean_ci_width_a = 0.0;
    long den_df = 0;
    double rho_weighted = 0.0;
};

struct PowerReport {
    PowerRow a, b;
    long n_reps = 0;
    std::string to_csv() const;
};

PowerReport simulate_power_study(const SimConfig& cfg_a, const SimConfig& cfg_b);

// Parametric-bootstrap moment-matched denominator df baseline: B null
// F draws over the given unit labels, mean-matched to an F distribution.
double bootstrap_df_baseline(std::int64_t n, int b,
                             const std::vector<std::int32_t>& unit_labels,
                             std::uint64_t seed);

struct BenchRow {
    std::int64_t n = 0;
    double projector_seconds = 0.0;
    double bootstrap_seconds = 0.0;
    double speedup = 0.0;
    double serial_seconds = 0.0;    // single-thread kernel
    double parallel_seconds = 0.0;  // OpenMP kernel
};

struct BenchResult {
    std::vector<BenchRow> rows;
    int bootstrap_draws = 100;
    int repeats = 30;
    std::string to_csv() const;
};

// Median wall time of the streaming projector-df path against the B-draw
// bootstrap path; input generation is excluded from the timed window.
BenchResult benchmark(const std::vector<std::int64_t>& n_list, int bootstrap_draws,
                      int repeats, int threads = 0);

// Scenario file (key: value) driving the `simulate` subcommand.
struct Scenario {
    enum class Kind { split_plot, nested, power } kind = Kind::split_plot;
    SimConfig config;
    SimConfig config_b;  // power studies only
};

Scenario parse_scenario(const std::string& text, const std::string& base_dir);

// The engine-validated 16-run blocked-fraction comparison pair.
SimConfig power_design_narrow_blocks();  // four blocks {AB, AC}
SimConfig power_design_wide_blocks();    // two blocks {AB}

}  // namespace stratarank
