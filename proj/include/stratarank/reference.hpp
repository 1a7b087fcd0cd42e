#pragma once

#include <Eigen/Dense>

#include "stratarank/design.hpp"
#include "stratarank/projector.hpp"

namespace stratarank {
namespace reference {

// Serial dense implementations used as oracles against the streaming
// kernels; they materialize the N x N operators the product code never
// forms. Only suitable for small N.

// Z (Z'Z)^+ Z' for one stratum (raw within-unit means on present rows).
Eigen::MatrixXd dense_mean_projector(const IncidenceMap& inc);

// The orthogonalized family in order: grand, T_s per declared stratum,
// residual. Rows/columns of absent observations are zero.
std::vector<Eigen::MatrixXd> dense_family(const DesignSpec& spec);

// rank(X' P X) from the materialized operator, Jacobi SVD, same
// tolerance convention as the streaming path.
int dense_df(const Eigen::MatrixXd& projector, const Eigen::MatrixXd& basis,
             std::int64_t n_present);

}  // namespace reference
}  // namespace stratarank
