#include "stratarank/reference.hpp"

#include <limits>

namespace stratarank {
namespace reference {

Eigen::MatrixXd dense_mean_projector(const IncidenceMap& inc) {
    const std::int64_t n = inc.n();
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, inc.q);
    for (std::int64_t i = 0; i < n; ++i)
        if (inc.unit_of[i] >= 0) z(i, inc.unit_of[i]) = 1.0;
    const Eigen::MatrixXd ztz = z.transpose() * z;
    Eigen::MatrixXd ztz_pinv = Eigen::MatrixXd::Zero(inc.q, inc.q);
    for (int u = 0; u < inc.q; ++u)
        if (ztz(u, u) > 0.0) ztz_pinv(u, u) = 1.0 / ztz(u, u);
    return z * ztz_pinv * z.transpose();
}

std::vector<Eigen::MatrixXd> dense_family(const DesignSpec& spec) {
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    std::vector<Eigen::MatrixXd> out;
    const Eigen::MatrixXd grand = dense_mean_projector(fam.grand());
    out.push_back(grand);
    Eigen::MatrixXd sum = grand;
    for (int s = 0; s < fam.strata_count(); ++s) {
        const int p = fam.parent(s);
        const Eigen::MatrixXd parent =
            p < 0 ? grand : dense_mean_projector(fam.incidence(p));
        const Eigen::MatrixXd t = dense_mean_projector(fam.incidence(s)) - parent;
        sum += t;
        out.push_back(t);
    }
    Eigen::MatrixXd ident = Eigen::MatrixXd::Zero(fam.n(), fam.n());
    for (std::int64_t i = 0; i < fam.n(); ++i)
        if (fam.grand().unit_of[i] >= 0) ident(i, i) = 1.0;
    out.push_back(ident - sum);
    return out;
}

int dense_df(const Eigen::MatrixXd& projector, const Eigen::MatrixXd& basis,
             std::int64_t n_present) {
    const Eigen::MatrixXd pb = projector * basis;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pb);
    double smax = basis.colwise().norm().maxCoeff();  // annihilation anchor
    if (svd.singularValues().size() > 0)
        smax = std::max(smax, svd.singularValues()(0));
    const double tol = static_cast<double>(std::max<std::int64_t>(
                           n_present, basis.cols())) *
                       std::numeric_limits<double>::epsilon() * smax;
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol) ++rank;
    return rank;
}

}  // namespace reference
}  // namespace stratarank
