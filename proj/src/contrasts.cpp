#include "stratarank/contrasts.hpp"

#include <cmath>
#include <stdexcept>

namespace stratarank {

Eigen::MatrixXd one_way_contrasts(int levels, ContrastKind kind) {
    if (levels < 2) throw std::invalid_argument("contrasts need at least 2 levels");
    const int l = levels;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(l, l - 1);
    if (kind == ContrastKind::helmert) {
        for (int j = 0; j < l - 1; ++j) {
            for (int r = 0; r <= j; ++r) h(r, j) = 1.0;
            h(j + 1, j) = -static_cast<double>(j + 1);
        }
    } else {
        // Orthogonal polynomials: Gram-Schmidt on powers of the centered
        // level index.
        Eigen::MatrixXd v(l, l - 1);
        for (int j = 0; j < l - 1; ++j)
            for (int r = 0; r < l; ++r)
                v(r, j) = std::pow(r - (l - 1) / 2.0, j + 1);
        for (int j = 0; j < l - 1; ++j) {
            Eigen::VectorXd col = v.col(j);
            col.array() -= col.mean();
            for (int prev = 0; prev < j; ++prev)
                col -= h.col(prev) * (h.col(prev).dot(col));
            h.col(j) = col / col.norm();
        }
    }
    return h;
}

long ideal_df(const EffectClass& e, const DesignSpec& spec) {
    long d = 1;
    for (int i : word_factors(e.representative)) d *= spec.factors[i].levels - 1;
    return d;
}

Eigen::MatrixXd member_columns(const DesignSpec& spec, Word member,
                               ContrastKind kind) {
    const ObservationTable& obs = spec.observations;
    const std::vector<int> fs = word_factors(member);
    std::vector<Eigen::MatrixXd> oneway;
    std::vector<long> dims;
    long d = 1;
    for (int f : fs) {
        oneway.push_back(one_way_contrasts(spec.factors[f].levels, kind));
        dims.push_back(spec.factors[f].levels - 1);
        d *= dims.back();
    }
    Eigen::MatrixXd cols(obs.n_obs, d);
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        // column index decomposes factor-by-factor (first factor fastest)
        for (long c = 0; c < d; ++c) {
            double val = 1.0;
            long rem = c;
            for (std::size_t t = 0; t < fs.size(); ++t) {
                const long j = rem % dims[t];
                rem /= dims[t];
                val *= oneway[t](obs.levels[fs[t]][i], j);
            }
            cols(i, c) = val;
        }
    }
    return cols;
}

ContrastBasis effect_contrast_basis(const DesignSpec& spec, const EffectClass& e,
                                    ContrastKind kind) {
    ContrastBasis basis;
    basis.effect = e;
    basis.columns = member_columns(spec, e.representative, kind);
    basis.d = basis.columns.cols();

    // Unit length over present rows stabilizes the rank tolerance; ranks
    // themselves are scale-invariant.
    const ObservationTable& obs = spec.observations;
    for (long c = 0; c < basis.d; ++c) {
        double ss = 0.0;
        for (std::int64_t i = 0; i < obs.n_obs; ++i)
            if (obs.present[i]) ss += basis.columns(i, c) * basis.columns(i, c);
        if (ss > 0.0) basis.columns.col(c) /= std::sqrt(ss);
    }
    return basis;
}

}  // namespace stratarank
