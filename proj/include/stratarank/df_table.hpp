#pragma once

#include <string>
#include <vector>

#include "stratarank/contrasts.hpp"
#include "stratarank/projector.hpp"
#include "stratarank/rank.hpp"

namespace stratarank {

struct DfCell {
    int df = 0;           // counted toward the partition identity
    int absorbed_df = 0;  // rank landing in a blocking stratum (df lost)
    bool gray_zone = false;
    std::vector<double> singular_values;
};

// The (effect x stratum) grid plus per-stratum residual rows and the
// N-1 audit. Strata are the declared ones followed by "__residual";
// blocking strata absorb fixed-effect rank instead of counting it.
struct DfTable {
    std::vector<std::string> factor_names;
    std::vector<EffectClass> effects;
    std::vector<long> ideal;  // per effect
    std::vector<std::string> stratum_names;
    std::vector<int> stratum_dims;
    std::vector<std::uint8_t> stratum_blocking;
    std::vector<std::vector<DfCell>> cells;  // [effect][stratum]
    std::vector<int> residual_df;
    std::int64_t n_present = 0;
    long total = 0;
    long deficit = 0;
    bool any_gray_zone = false;

    int n_strata() const { return static_cast<int>(stratum_names.size()); }
    std::string effect_name(std::size_t i) const;
    long effect_observed(std::size_t i) const;  // sum of counted cells

    std::string to_csv() const;
    std::string pretty() const;
};

// Rows of a parsed DfTable CSV, for the round-trip contract.
struct DfTableCsv {
    struct Row {
        std::string effect, stratum;
        long df = 0;
        long ideal = -1;  // -1 for residual rows
    };
    std::vector<Row> rows;
    long total = 0;
    long deficit = 0;
};
DfTableCsv parse_df_csv(const std::string& text);

DfCell df_cell(const ContrastBasis& basis, const ProjectorHandle& p,
               const RankPolicy& policy = {});

// trace of the product of P_s with the OLS projector onto the stratum
// image of the class space (the rank-trace identity), computed
// column-by-column without any N x N matrix.
double trace_df_crosscheck(const ContrastBasis& basis, const ProjectorHandle& p,
                           const RankPolicy& policy = {});

DfTable partition_table(const DesignSpec& spec, const RankPolicy& policy = {},
                        int threads = 0);

struct DeficitReport {
    long deficit = 0;
    struct Row {
        std::string stratum;
        int dim = 0;
        long allocated = 0;
        long residual = 0;
        long absorbed = 0;
    };
    std::vector<Row> per_stratum;
    // Exact operator-trace audit: sums trace(T_s^2) over the family.
    // Telescopes to N-1 when the unit labels nest properly; label
    // corruption shows up as a nonzero spectral deficit.
    double spectral_total = 0.0;
    bool spectral_ok = true;
};

DeficitReport verify_identity(const DesignSpec& spec, const DfTable& table);

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stratarank
