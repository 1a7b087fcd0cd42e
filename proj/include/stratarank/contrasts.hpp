#pragma once

#include <Eigen/Dense>

#include "stratarank/design.hpp"

namespace stratarank {

enum class ContrastKind { helmert, polynomial };

// l x (l-1) one-way contrast matrix: columns orthogonal to the all-ones
// vector and to each other. Helmert column j contrasts level j+1 against
// the mean of levels 1..j, e.g. l=3 gives (1,-1,0) and (1,1,-2).
Eigen::MatrixXd one_way_contrasts(int levels,
                                  ContrastKind kind = ContrastKind::helmert);

// Nominal dimension of an effect class: prod (l_i - 1) over the canonical
// representative's factors.
long ideal_df(const EffectClass& e, const DesignSpec& spec);

// N x d contrast basis of an alias class. Each row carries the product of
// the one-way contrast values at that observation's levels for the
// representative's factors (factors outside the effect contribute 1).
// Columns are normalized to unit length over present rows.
struct ContrastBasis {
    EffectClass effect;
    Eigen::MatrixXd columns;  // N x d
    long d = 0;
};

ContrastBasis effect_contrast_basis(const DesignSpec& spec, const EffectClass& e,
                                    ContrastKind kind = ContrastKind::helmert);

// Same construction from an arbitrary member word (used to verify that
// alias partners share a column space on retained runs).
Eigen::MatrixXd member_columns(const DesignSpec& spec, Word member,
                               ContrastKind kind = ContrastKind::helmert);

}  // namespace stratarank
