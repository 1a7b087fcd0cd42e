#include "stratarank/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stratarank {

namespace {

// Rank decisions happen on the Gram eigen-scale. A symmetric eigensolver
// resolves eigenvalues only to ~eps * lambda_max in absolute terms, so the
// relative cut carries a floor constant well above that noise; otherwise
// solver artifacts near 1e-16 masquerade as 1e-8 singular values.
constexpr double kMinDim = 1000.0;

double lambda_tolerance(double lambda_max, std::int64_t rows, Eigen::Index d,
                        const RankPolicy& policy, double scale_hint) {
    if (policy.absolute > 0.0) return policy.absolute * policy.absolute;
    const double dim = std::max(kMinDim, static_cast<double>(std::max<std::int64_t>(rows, d)));
    const double anchor = std::max(lambda_max, scale_hint * scale_hint);
    return dim * std::numeric_limits<double>::epsilon() * anchor;
}

}  // namespace

RankResult gram_rank(const Eigen::MatrixXd& gram, std::int64_t rows,
                     const RankPolicy& policy, double scale_hint) {
    RankResult res;
    const Eigen::Index d = gram.rows();
    if (d == 0) return res;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    res.singular_values.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ev = eig.eigenvalues()(d - 1 - i);  // descending
        res.singular_values[i] = ev > 0.0 ? std::sqrt(ev) : 0.0;
    }

    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double tol_lambda =
        lambda_tolerance(std::max(0.0, lambda_max), rows, d, policy, scale_hint);
    res.tolerance = std::sqrt(tol_lambda);
    if (std::max(lambda_max, scale_hint) <= 0.0) return res;

    const double g = policy.gray_zone_factor;
    for (double s : res.singular_values) {
        const double lambda = s * s;
        if (lambda > tol_lambda) ++res.rank;
        if (lambda >= tol_lambda / (g * g) && lambda <= tol_lambda * g * g)
            res.gray_zone = true;
    }
    return res;
}

Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& gram, std::int64_t rows,
                                   const RankPolicy& policy, double scale_hint) {
    const Eigen::Index d = gram.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double lambda_max = d > 0 ? std::max(0.0, eig.eigenvalues().maxCoeff()) : 0.0;
    const double tol_lambda = lambda_tolerance(lambda_max, rows, d, policy, scale_hint);
    Eigen::VectorXd inv(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ev = eig.eigenvalues()(i);
        inv(i) = ev > tol_lambda ? 1.0 / ev : 0.0;
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace stratarank
