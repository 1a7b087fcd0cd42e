#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace stratarank {

// Rank-revealing threshold policy. The default is the conventional
// max(rows, cols) * machine-epsilon * sigma_max rule on the singular
// values of the projected basis; an absolute override wins when set.
struct RankPolicy {
    double absolute = -1.0;          // > 0 replaces the relative rule
    double gray_zone_factor = 10.0;  // warn when a value is this close to the cut
};

struct RankResult {
    int rank = 0;
    std::vector<double> singular_values;  // descending
    double tolerance = 0.0;
    bool gray_zone = false;
};

// Rank of a matrix B given through its Gram matrix G = B' B, where B had
// `rows` rows. Singular values of B are the square roots of G's
// eigenvalues. `scale_hint` anchors the tolerance when B is an
// annihilated image of a larger matrix: a projector can shrink every
// column to rounding noise, and a tolerance relative to that noise would
// count it as rank. Pass the column scale of the unprojected matrix.
RankResult gram_rank(const Eigen::MatrixXd& gram, std::int64_t rows,
                     const RankPolicy& policy = {}, double scale_hint = 0.0);

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix under the same
// tolerance policy.
Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& gram, std::int64_t rows,
                                   const RankPolicy& policy = {},
                                   double scale_hint = 0.0);

}  // namespace stratarank
