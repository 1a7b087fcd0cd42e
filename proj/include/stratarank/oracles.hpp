#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "stratarank/design.hpp"

namespace stratarank {

struct ClosedFormRow {
    std::string source;
    long df = 0;
};

struct ClosedFormTable {
    std::string family;
    std::vector<ClosedFormRow> rows;
    // Verbatim nullity expressions of the row-column correction, kept as
    // diagnostics (see latin_square_df).
    double nullity_row_centered = 0.0;
    double nullity_col_centered = 0.0;
    double nullity_combined = 0.0;

    long total() const;
    long df_of(const std::string& source) const;
};

// Rows (a-1), a(b-1), (c-1), (a-1)(c-1), a(b-1)(c-1); total abc-1.
ClosedFormTable split_plot_table(int a, int b, int c);

// Balanced path: r-1, r-1, r-1, (r-1)(r-2). Unbalanced path: row/column/
// treatment df via information-matrix (Schur complement) ranks on the
// incidence counts, error df as the remainder; assumes the cyclic Latin
// layout for the treatment incidence.
ClosedFormTable latin_square_df(int r, const Eigen::MatrixXd& incidence);

// prod (l_i - 1) * prod (n_r - 1) over strict ancestors.
long crossed_nested_df(std::span<const int> effect_levels,
                       std::span<const int> ancestor_branches);

// Strict one-stratum rank additivity: N-1 == sum of ideal effect df.
bool cochran_check(const DesignSpec& spec);

}  // namespace stratarank
