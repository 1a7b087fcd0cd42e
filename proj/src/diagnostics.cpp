#include "stratarank/diagnostics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "stratarank/csv.hpp"

namespace stratarank {

namespace {

// units of a diagnostic stratum: -1 grand, declared, strata_count() residual
struct UnitView {
    std::vector<std::int32_t> unit_of;  // -1 absent
    int q = 0;
};

UnitView unit_view(const DesignSpec& spec, const ProjectorFamily& fam, int stratum) {
    UnitView v;
    const std::int64_t n = spec.n_obs();
    v.unit_of.assign(n, -1);
    if (stratum == -1) {
        for (std::int64_t i = 0; i < n; ++i)
            if (spec.observations.present[i]) v.unit_of[i] = 0;
        v.q = 1;
    } else if (stratum == fam.strata_count()) {
        for (std::int64_t i = 0; i < n; ++i)
            if (spec.observations.present[i]) v.unit_of[i] = v.q++;
    } else {
        const IncidenceMap& inc = fam.incidence(stratum);
        v.unit_of = inc.unit_of;
        v.q = inc.q;
    }
    return v;
}

long combo_count(const DesignSpec& spec, Word rep) {
    long c = 1;
    for (int f : word_factors(rep)) c *= spec.factors[f].levels;
    return c;
}

long combo_of(const DesignSpec& spec, Word rep, std::int64_t row) {
    long idx = 0, mult = 1;
    for (int f : word_factors(rep)) {
        idx += mult * spec.observations.levels[f][row];
        mult *= spec.factors[f].levels;
    }
    return idx;
}

}  // namespace

std::pair<long, bool> stratum_bound(const EffectClass& e, int stratum,
                                    const DesignSpec& spec) {
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const UnitView v = unit_view(spec, fam, stratum);
    const long d = ideal_df(e, spec);
    const long avail = v.q - 1;
    return {std::min(d, avail), d > avail};
}

double eta(const EffectClass& e, int stratum, const DesignSpec& spec) {
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const UnitView v = unit_view(spec, fam, stratum);
    const long n_combo = combo_count(spec, e.representative);
    std::vector<std::set<std::int32_t>> units_seen(n_combo);
    for (std::int64_t i = 0; i < spec.n_obs(); ++i) {
        if (v.unit_of[i] < 0) continue;
        units_seen[combo_of(spec, e.representative, i)].insert(v.unit_of[i]);
    }
    std::size_t m_min = units_seen.empty() ? 0 : units_seen[0].size();
    for (const auto& s : units_seen) m_min = std::min(m_min, s.size());
    return static_cast<double>(m_min) / static_cast<double>(v.q);
}

double replication_proxy(const EffectClass& e, int stratum, const DesignSpec& spec) {
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const UnitView v = unit_view(spec, fam, stratum);
    const long n_combo = combo_count(spec, e.representative);
    Eigen::MatrixXd profiles = Eigen::MatrixXd::Zero(v.q, n_combo);
    for (std::int64_t i = 0; i < spec.n_obs(); ++i) {
        if (v.unit_of[i] < 0) continue;
        profiles(v.unit_of[i], combo_of(spec, e.representative, i)) += 1.0;
    }
    const Eigen::RowVectorXd mean = profiles.colwise().mean();
    profiles.rowwise() -= mean;
    const Eigen::MatrixXd gram = profiles.transpose() * profiles;
    const RankResult r = gram_rank(gram, v.q);
    const double d = static_cast<double>(ideal_df(e, spec));
    return std::min(1.0, static_cast<double>(r.rank) / d);
}

bool full_retention_check(const EffectClass& e, int stratum, const DesignSpec& spec) {
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    ContrastBasis basis = effect_contrast_basis(spec, e);
    for (std::int64_t i = 0; i < spec.n_obs(); ++i)
        if (!spec.observations.present[i]) basis.columns.row(i).setZero();

    // nominal df survive iff the present rows still carry them and the
    // stratum averaging collapses none of them
    const Eigen::MatrixXd gram_x = basis.columns.transpose() * basis.columns;
    const int rank_x = gram_rank(gram_x, fam.n_present()).rank;
    if (rank_x != ideal_df(e, spec)) return false;

    const ProjectorHandle handle =
        stratum == fam.strata_count()
            ? ProjectorHandle::residual(fam)
            : ProjectorHandle::stratum(fam, stratum);
    const DfCell cell = df_cell(basis, handle);
    if (cell.df != rank_x) return false;

    // under imbalance another class can leak into the same stratum image;
    // retention is full only for the directions left after the classes
    // that precede e in canonical order (the table's allocation)
    long prev_cols = 0;
    std::vector<Eigen::MatrixXd> prev;
    for (const EffectClass& other : spec.effect_classes()) {
        if (other.representative == e.representative) break;
        prev.push_back(effect_contrast_basis(spec, other).columns);
        prev_cols += prev.back().cols();
    }
    if (prev_cols == 0) return true;
    Eigen::MatrixXd stacked(spec.n_obs(), prev_cols + basis.d);
    long col = 0;
    auto append_projected = [&](const Eigen::MatrixXd& cols) {
        std::vector<double> v(spec.n_obs()), w(spec.n_obs());
        for (long c = 0; c < cols.cols(); ++c) {
            for (std::int64_t i = 0; i < spec.n_obs(); ++i) v[i] = cols(i, c);
            if (stratum == fam.strata_count()) fam.apply_residual(v, w);
            else if (stratum < 0) fam.apply_mean(-1, v, w);
            else fam.apply_orth(stratum, v, w);
            for (std::int64_t i = 0; i < spec.n_obs(); ++i) stacked(i, col) = w[i];
            ++col;
        }
    };
    for (const Eigen::MatrixXd& cols : prev) append_projected(cols);
    const Eigen::MatrixXd before = stacked.leftCols(col);
    const int rank_before =
        gram_rank(before.transpose() * before, fam.n_present(), {}, 1.0).rank;
    append_projected(basis.columns);
    const Eigen::MatrixXd with = stacked.leftCols(col);
    const int rank_with =
        gram_rank(with.transpose() * with, fam.n_present(), {}, 1.0).rank;
    return rank_with - rank_before == rank_x;
}

bool DiagnosticReport::has_mechanism(const std::string& id) const {
    for (const MechanismFlag& m : mechanisms)
        if (m.id == id) return true;
    return false;
}

DiagnosticReport checklist(const DesignSpec& spec, double sparse_unit_threshold) {
    spec.validate();
    DiagnosticReport report;
    report.sparse_unit_threshold = sparse_unit_threshold;
    for (const FactorSpec& f : spec.factors) report.factor_names.push_back(f.name);

    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const std::vector<EffectClass> classes = spec.effect_classes();
    const int m = fam.strata_count();

    std::vector<int> strata_ids{-1};
    for (int s = 0; s < m; ++s) strata_ids.push_back(s);
    strata_ids.push_back(m);

    bool m1 = false;
    for (const EffectClass& e : classes) {
        bool kept_high = false, kept_res = false;
        for (int s : strata_ids) {
            DiagCell cell;
            cell.effect = e.representative;
            cell.stratum = s;
            cell.stratum_name = s == -1 ? "__grand"
                                : s == m ? "__residual"
                                         : fam.stratum_name(s);
            auto [bound, flagged] = stratum_bound(e, s, spec);
            cell.bound = bound;
            cell.bound_violated_nominal = flagged;
            cell.eta = eta(e, s, spec);
            cell.rho_proxy = replication_proxy(e, s, spec);
            cell.full_retention = full_retention_check(e, s, spec);
            if (s >= 0 && s < m && cell.full_retention &&
                !spec.stratum_is_blocking(s))
                kept_high = true;
            if (s == m && cell.full_retention) kept_res = true;
            report.cells.push_back(std::move(cell));
        }
        if (kept_high && !kept_res) m1 = true;
    }
    if (m1)
        report.mechanisms.push_back(
            {"M1",
             "some effect retains its contrasts only above the residual stratum",
             "liberal if tested against a lower residual"});

    if (!spec.alias.trivial() || !spec.block_words.empty()) {
        std::ostringstream why;
        if (!spec.alias.trivial())
            why << spec.alias.generators.size() << " defining word(s) collapse the lattice";
        if (!spec.block_words.empty()) {
            if (!spec.alias.trivial()) why << "; ";
            why << spec.block_words.size() << " block word(s) absorb contrast directions";
        }
        report.mechanisms.push_back({"M2", why.str(), "conservative / power loss"});
    }

    // imbalance: absent rows, unequal unit sizes, or unequal grid replication
    bool imbalance = spec.observations.n_present() != spec.n_obs();
    for (int s = 0; s < m && !imbalance; ++s) {
        const auto& sizes = fam.incidence(s).unit_sizes;
        imbalance = *std::min_element(sizes.begin(), sizes.end()) !=
                    *std::max_element(sizes.begin(), sizes.end());
    }
    if (!imbalance) {
        std::map<std::vector<std::uint16_t>, long> combo_reps;
        for (std::int64_t i = 0; i < spec.n_obs(); ++i) {
            if (!spec.observations.present[i]) continue;
            std::vector<std::uint16_t> key;
            for (const auto& col : spec.observations.levels) key.push_back(col[i]);
            ++combo_reps[key];
        }
        long lo = -1, hi = -1;
        for (const auto& [key, c] : combo_reps) {
            lo = lo < 0 ? c : std::min(lo, c);
            hi = std::max(hi, c);
        }
        imbalance = lo != hi;
    }
    if (imbalance) {
        double worst_eta = 1.0;
        for (const DiagCell& c : report.cells)
            if (c.stratum >= 0 && c.stratum < m)
                worst_eta = std::min(worst_eta, c.eta);
        std::ostringstream why;
        why << "unequal replication or missing observations; min eta over declared strata = "
            << fmt_double(worst_eta);
        report.mechanisms.push_back({"M3", why.str(), "discrete df drops"});
    }
    return report;
}

std::string DiagnosticReport::to_csv() const {
    std::ostringstream out;
    out << "effect,stratum,bound,bound_violated,eta,rho_proxy,full_retention\n";
    for (const DiagCell& c : cells)
        out << word_name(c.effect, factor_names) << ',' << c.stratum_name << ','
            << c.bound << ',' << (c.bound_violated_nominal ? 1 : 0) << ','
            << fmt_double(c.eta) << ',' << fmt_double(c.rho_proxy) << ','
            << (c.full_retention ? 1 : 0) << '\n';
    for (const MechanismFlag& f : mechanisms)
        out << "mechanism," << f.id << ",,,,," << '\n';
    return out.str();
}

std::string DiagnosticReport::to_text() const {
    std::ostringstream out;
    out << "pre-experiment diagnostics\n";
    out << "  effect @ stratum: bound (violated?) | eta | rho_proxy | full retention\n";
    for (const DiagCell& c : cells)
        out << "  " << word_name(c.effect, factor_names) << " @ " << c.stratum_name
            << ": " << c.bound << (c.bound_violated_nominal ? " (!)" : "") << " | "
            << fmt_double(c.eta) << " | " << fmt_double(c.rho_proxy) << " | "
            << (c.full_retention ? "yes" : "no") << '\n';
    if (mechanisms.empty()) {
        out << "  no mechanism flags\n";
    } else {
        for (const MechanismFlag& f : mechanisms)
            out << "  [" << f.id << "] " << f.rationale << " -> " << f.direction
                << '\n';
    }
    return out.str();
}

}  // namespace stratarank
