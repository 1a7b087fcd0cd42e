#include "stratarank/oracles.hpp"

#include <limits>
#include <stdexcept>

#include "stratarank/contrasts.hpp"
#include "stratarank/rank.hpp"

namespace stratarank {

long ClosedFormTable::total() const {
    long t = 0;
    for (const ClosedFormRow& r : rows) t += r.df;
    return t;
}

long ClosedFormTable::df_of(const std::string& source) const {
    for (const ClosedFormRow& r : rows)
        if (r.source == source) return r.df;
    throw std::out_of_range("no closed-form row named " + source);
}

ClosedFormTable split_plot_table(int a, int b, int c) {
    if (a < 2 || b < 2 || c < 2)
        throw std::invalid_argument("split-plot table needs a,b,c >= 2");
    ClosedFormTable t;
    t.family = "split-plot";
    t.rows = {{"A", a - 1L},
              {"wholeplot_error", static_cast<long>(a) * (b - 1)},
              {"B", c - 1L},
              {"AB", static_cast<long>(a - 1) * (c - 1)},
              {"subplot_error", static_cast<long>(a) * (b - 1) * (c - 1)}};
    return t;
}

namespace {

long schur_rank_deficit(const Eigen::MatrixXd& m, bool rows_adjusted) {
    // Information matrix of row effects adjusted for columns:
    // C = D_r - M D_c^+ M'. Its rank is (estimable row df); the all-ones
    // vector is always in the kernel.
    const Eigen::MatrixXd mm = rows_adjusted ? m : Eigen::MatrixXd(m.transpose());
    const Eigen::Index r = mm.rows(), c = mm.cols();
    Eigen::VectorXd row_counts = mm.rowwise().sum();
    Eigen::VectorXd col_counts = mm.colwise().sum();
    Eigen::MatrixXd info = row_counts.asDiagonal();
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < c; ++k)
                if (col_counts(k) > 0) acc += mm(i, k) * mm(j, k) / col_counts(k);
            info(i, j) -= acc;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const double emax = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double tol = static_cast<double>(r) *
                       std::numeric_limits<double>::epsilon() * std::max(emax, 1.0);
    long rank = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        if (std::abs(eig.eigenvalues()(i)) > tol) ++rank;
    const long nonempty = (row_counts.array() > 0).count();
    return (nonempty - 1) - rank;  // df lost relative to nonempty rows
}

double nullity(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd gram = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double emax = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                       std::numeric_limits<double>::epsilon() * std::max(emax, 1.0);
    long rank = 0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i)
        if (std::abs(eig.eigenvalues()(i)) > tol) ++rank;
    return static_cast<double>(m.cols() - rank);
}

}  // namespace

ClosedFormTable latin_square_df(int r, const Eigen::MatrixXd& incidence) {
    if (incidence.rows() != r || incidence.cols() != r)
        throw std::invalid_argument("latin incidence must be r x r");
    if (incidence.sum() <= 0.0) throw std::invalid_argument("all-zero incidence");

    ClosedFormTable t;
    t.family = "latin-square";
    const long n = static_cast<long>(incidence.sum());
    const bool balanced = (incidence.array() == incidence(0, 0)).all();

    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(r, r);
    const Eigen::MatrixXd row_centered = incidence - ones * incidence / r;
    const Eigen::MatrixXd col_centered = incidence - incidence * ones / r;
    t.nullity_row_centered = nullity(row_centered);
    t.nullity_col_centered = nullity(col_centered);
    t.nullity_combined =
        nullity(incidence) - t.nullity_row_centered - t.nullity_col_centered;

    if (balanced) {
        t.rows = {{"rows", r - 1L},
                  {"cols", r - 1L},
                  {"treatments", r - 1L},
                  {"error", static_cast<long>(r - 1) * (r - 2)}};
        return t;
    }

    const long rows_df = (r - 1) - schur_rank_deficit(incidence, true);
    const long cols_df = (r - 1) - schur_rank_deficit(incidence, false);
    // cyclic layout: treatment t sits at cells (i, (t - i) mod r)
    Eigen::MatrixXd treat_by_col = Eigen::MatrixXd::Zero(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) treat_by_col((i + j) % r, j) += incidence(i, j);
    const long treat_df = (r - 1) - schur_rank_deficit(treat_by_col, true);
    const long error_df = (n - 1) - rows_df - cols_df - treat_df;
    t.rows = {{"rows", rows_df},
              {"cols", cols_df},
              {"treatments", treat_df},
              {"error", error_df}};
    return t;
}

long crossed_nested_df(std::span<const int> effect_levels,
                       std::span<const int> ancestor_branches) {
    long d = 1;
    for (int l : effect_levels) d *= l - 1;
    for (int n : ancestor_branches) d *= n - 1;
    return d;
}

bool cochran_check(const DesignSpec& spec) {
    if (!spec.strata.empty()) return false;
    long sum = 0;
    for (const EffectClass& e : spec.effect_classes()) sum += ideal_df(e, spec);
    return sum == spec.observations.n_present() - 1;
}

}  // namespace stratarank
