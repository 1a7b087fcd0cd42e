#include "stratarank/df_table.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "stratarank/csv.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stratarank {

std::string DfTable::effect_name(std::size_t i) const {
    return word_name(effects[i].representative, factor_names);
}

long DfTable::effect_observed(std::size_t i) const {
    long sum = 0;
    for (const DfCell& c : cells[i]) sum += c.df;
    return sum;
}

std::string DfTable::to_csv() const {
    std::ostringstream out;
    out << "effect,stratum,df,ideal_df\n";
    for (std::size_t e = 0; e < effects.size(); ++e)
        for (int s = 0; s < n_strata(); ++s)
            out << effect_name(e) << ',' << stratum_names[s] << ','
                << cells[e][s].df << ',' << ideal[e] << '\n';
    for (int s = 0; s < n_strata(); ++s)
        out << "___residual," << stratum_names[s] << ',' << residual_df[s] << ",\n";
    out << "___total,," << total << ',' << deficit << '\n';
    return out.str();
}

std::string DfTable::pretty() const {
    std::ostringstream out;
    out << "df partition (N_present = " << n_present << ")\n";
    out << "  effect";
    for (const std::string& s : stratum_names) out << "  " << s;
    out << "  [ideal]\n";
    for (std::size_t e = 0; e < effects.size(); ++e) {
        out << "  " << effect_name(e);
        if (effects[e].role == EffectClass::Role::random) out << " (random)";
        for (int s = 0; s < n_strata(); ++s) {
            out << "  " << cells[e][s].df;
            if (cells[e][s].absorbed_df > 0)
                out << "(+" << cells[e][s].absorbed_df << " absorbed)";
            if (cells[e][s].gray_zone) out << "!";
        }
        out << "  [" << ideal[e] << "]\n";
    }
    out << "  residual";
    for (int s = 0; s < n_strata(); ++s) out << "  " << residual_df[s];
    out << "\n  total " << total << "  deficit " << deficit << "\n";
    return out.str();
}

DfTableCsv parse_df_csv(const std::string& text) {
    DfTableCsv parsed;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw std::runtime_error("bad df csv row: " + line);
        if (f[0] == "___total") {
            parsed.total = std::stol(f[2]);
            parsed.deficit = std::stol(f[3]);
            continue;
        }
        DfTableCsv::Row row;
        row.effect = f[0];
        row.stratum = f[1];
        row.df = std::stol(f[2]);
        row.ideal = f[3].empty() ? -1 : std::stol(f[3]);
        parsed.rows.push_back(std::move(row));
    }
    return parsed;
}

namespace {

Eigen::MatrixXd project_columns(const ContrastBasis& basis,
                                const ProjectorHandle& p) {
    const std::int64_t n = basis.columns.rows();
    Eigen::MatrixXd out(n, basis.d);
    std::vector<double> v(n), w(n);
    for (long c = 0; c < basis.d; ++c) {
        for (std::int64_t i = 0; i < n; ++i) v[i] = basis.columns(i, c);
        const ProjectorFamily& fam = *p.family;
        if (p.kind == ProjectorHandle::Kind::residual || p.index == fam.strata_count())
            fam.apply_residual(v, w);
        else if (p.index < 0)
            fam.apply_mean(-1, v, w);
        else
            fam.apply_orth(p.index, v, w);
        for (std::int64_t i = 0; i < n; ++i) out(i, c) = w[i];
    }
    return out;
}

}  // namespace

DfCell df_cell(const ContrastBasis& basis, const ProjectorHandle& p,
               const RankPolicy& policy) {
    const double scale = basis.columns.colwise().norm().maxCoeff();
    const Eigen::MatrixXd projected = project_columns(basis, p);
    const Eigen::MatrixXd gram = projected.transpose() * projected;
    const RankResult r = gram_rank(gram, p.family->n_present(), policy, scale);
    DfCell cell;
    cell.df = r.rank;
    cell.gray_zone = r.gray_zone;
    cell.singular_values = r.singular_values;
    return cell;
}

double trace_df_crosscheck(const ContrastBasis& basis, const ProjectorHandle& p,
                           const RankPolicy& policy) {
    const double scale = basis.columns.colwise().norm().maxCoeff();
    const Eigen::MatrixXd b = project_columns(basis, p);
    ContrastBasis proxy;
    proxy.effect = basis.effect;
    proxy.columns = b;
    proxy.d = basis.d;
    const Eigen::MatrixXd c = project_columns(proxy, p);  // P_s applied again
    const Eigen::MatrixXd gram = b.transpose() * b;
    const Eigen::MatrixXd pinv =
        psd_pseudo_inverse(gram, p.family->n_present(), policy, scale);
    return (pinv * (b.transpose() * c)).trace();
}

DfTable partition_table(const DesignSpec& spec, const RankPolicy& policy,
                        int threads) {
    spec.validate();
    const ProjectorFamily family = ProjectorFamily::build(spec);
    DfTable table;
    for (const FactorSpec& f : spec.factors) table.factor_names.push_back(f.name);
    table.effects = spec.effect_classes();
    table.n_present = family.n_present();

    const int m = family.strata_count();
    for (int s = 0; s < m; ++s) {
        table.stratum_names.push_back(family.stratum_name(s));
        table.stratum_dims.push_back(family.stratum_dim(s));
        table.stratum_blocking.push_back(spec.stratum_is_blocking(s) ? 1 : 0);
    }
    table.stratum_names.push_back("__residual");
    table.stratum_dims.push_back(family.residual_dim());
    table.stratum_blocking.push_back(0);

    std::vector<ContrastBasis> bases;
    bases.reserve(table.effects.size());
    for (const EffectClass& e : table.effects) {
        bases.push_back(effect_contrast_basis(spec, e));
        table.ideal.push_back(ideal_df(e, spec));
    }

    const int n_eff = static_cast<int>(table.effects.size());
    const int n_str = table.n_strata();
    table.cells.assign(n_eff, std::vector<DfCell>(n_str));

    // Within a stratum the classes are allocated sequentially in canonical
    // order: cell(e,s) = rank of [X_1..X_e] projected minus the rank
    // without X_e. On balanced designs the class images are orthogonal and
    // this equals the marginal rank; under imbalance a class can leak into
    // a stratum already claimed by another, and sequential allocation
    // keeps the stratum ledger at its dimension instead of double
    // counting. Strata are independent tasks with their own output slots,
    // so the table is identical for any schedule.
#ifdef _OPENMP
    const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
    for (int s = 0; s < n_str; ++s) {
        const ProjectorHandle handle = s < m ? ProjectorHandle::stratum(family, s)
                                             : ProjectorHandle::residual(family);
        long total_cols = 0;
        for (int e = 0; e < n_eff; ++e) total_cols += bases[e].d;
        Eigen::MatrixXd stacked(family.n(), total_cols);
        long col = 0;
        int joint_before = 0;
        double scale = 0.0;
        for (int e = 0; e < n_eff; ++e) {
            const Eigen::MatrixXd projected = project_columns(bases[e], handle);
            const double basis_scale = bases[e].columns.colwise().norm().maxCoeff();
            scale = std::max(scale, basis_scale);
            // annihilated columns enter the joint Gram as exact zeros so the
            // eigensolver's absolute noise cannot leak across effects
            const double cut = 1e4 * std::numeric_limits<double>::epsilon() *
                               std::max(1.0, basis_scale);
            for (long c = 0; c < bases[e].d; ++c) {
                stacked.col(col) = projected.col(c);
                if (stacked.col(col).norm() < cut) stacked.col(col).setZero();
                ++col;
            }
            const Eigen::MatrixXd upto = stacked.leftCols(col);
            const RankResult joint =
                gram_rank(upto.transpose() * upto, family.n_present(), policy, scale);
            // marginal spectrum kept as the diagnostic
            const Eigen::MatrixXd gram =
                projected.transpose() * projected;
            const RankResult marginal = gram_rank(
                gram, family.n_present(), policy,
                bases[e].columns.colwise().norm().maxCoeff());
            DfCell cell;
            cell.df = joint.rank - joint_before;
            cell.gray_zone = marginal.gray_zone || joint.gray_zone;
            cell.singular_values = marginal.singular_values;
            joint_before = joint.rank;
            if (s < m && table.stratum_blocking[s]) {
                cell.absorbed_df = cell.df;
                cell.df = 0;
            }
            table.cells[e][s] = std::move(cell);
        }
    }

    table.residual_df.assign(n_str, 0);
    for (int s = 0; s < n_str; ++s) {
        long allocated = 0;
        for (int e = 0; e < n_eff; ++e)
            allocated += table.cells[e][s].df + table.cells[e][s].absorbed_df;
        const long resid = table.stratum_dims[s] - allocated;
        if (resid < 0)
            throw NumericError("negative residual df in stratum " +
                               table.stratum_names[s] +
                               "; unit labels and effects are inconsistent");
        table.residual_df[s] = static_cast<int>(resid);
    }

    table.total = 0;
    for (int s = 0; s < n_str; ++s) {
        table.total += table.residual_df[s];
        for (int e = 0; e < n_eff; ++e) {
            table.total += table.cells[e][s].df;
            table.any_gray_zone = table.any_gray_zone || table.cells[e][s].gray_zone;
        }
    }
    table.deficit = (table.n_present - 1) - table.total;
    return table;
}

namespace {

// trace(M_a M_b) for two group-mean projectors via overlap counts.
double trace_mean_product(const IncidenceMap& a, const IncidenceMap& b) {
    std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> overlap;
    for (std::int64_t i = 0; i < a.n(); ++i) {
        if (a.unit_of[i] < 0 || b.unit_of[i] < 0) continue;
        ++overlap[{a.unit_of[i], b.unit_of[i]}];
    }
    double tr = 0.0;
    for (const auto& [uw, c] : overlap)
        tr += static_cast<double>(c) * c /
              (static_cast<double>(a.unit_sizes[uw.first]) * b.unit_sizes[uw.second]);
    return tr;
}

}  // namespace

DeficitReport verify_identity(const DesignSpec& spec, const DfTable& table) {
    DeficitReport report;
    report.deficit = table.deficit;
    for (int s = 0; s < table.n_strata(); ++s) {
        DeficitReport::Row row;
        row.stratum = table.stratum_names[s];
        row.dim = table.stratum_dims[s];
        row.residual = table.residual_df[s];
        for (std::size_t e = 0; e < table.effects.size(); ++e) {
            row.allocated += table.cells[e][s].df;
            row.absorbed += table.cells[e][s].absorbed_df;
        }
        report.per_stratum.push_back(row);
    }

    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const int m = fam.strata_count();
    // operators: grand, T_s = M_s - M_parent, residual = I - grand - sum T_s
    auto inc_of = [&](int s) -> const IncidenceMap& {
        return s < 0 ? fam.grand() : fam.incidence(s);
    };
    auto trace_t2 = [&](int s) {
        const int p = fam.parent(s);
        return static_cast<double>(inc_of(s).q) -
               2.0 * trace_mean_product(inc_of(s), inc_of(p < 0 ? -1 : p)) +
               static_cast<double>(inc_of(p < 0 ? -1 : p).q);
    };
    double spectral = 0.0;
    for (int s = 0; s < m; ++s) spectral += trace_t2(s);
    // residual operator trace: N_p - 2 tr(S) + tr(S^2), S = grand + sum T_s
    double tr_s = 1.0;
    for (int s = 0; s < m; ++s) {
        const int p = fam.parent(s);
        tr_s += inc_of(s).q - static_cast<double>(inc_of(p < 0 ? -1 : p).q);
    }
    double tr_s2 = 0.0;
    std::vector<int> ids{-1};
    for (int s = 0; s < m; ++s) ids.push_back(s);
    for (int a : ids)
        for (int b : ids) {
            const int pa = a < 0 ? -1 : fam.parent(a);
            const int pb = b < 0 ? -1 : fam.parent(b);
            auto term = [&](int x, int y) { return trace_mean_product(inc_of(x), inc_of(y)); };
            if (a < 0 && b < 0) tr_s2 += term(-1, -1);
            else if (a < 0) tr_s2 += term(-1, b) - term(-1, pb);
            else if (b < 0) tr_s2 += term(a, -1) - term(pa, -1);
            else tr_s2 += term(a, b) - term(a, pb) - term(pa, b) + term(pa, pb);
        }
    const double n_p = static_cast<double>(fam.n_present());
    spectral += n_p - 2.0 * tr_s + tr_s2;
    report.spectral_total = spectral;
    report.spectral_ok = std::abs(spectral - (n_p - 1.0)) <= 1e-6;
    return report;
}

}  // namespace stratarank
