#include "stratarank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stratarank/csv.hpp"

namespace stratarank {

double VarianceComponents::for_stratum(const std::string& name) const {
    auto it = sigma2.find(name);
    return it != sigma2.end() ? it->second : residual;
}

void VarianceComponents::validate() const {
    if (residual <= 0.0) throw SemanticError("variance components must be positive");
    for (const auto& [name, s2] : sigma2)
        if (s2 <= 0.0)
            throw SemanticError("variance component for " + name + " must be positive");
}

namespace {

int effect_row(const DfTable& table, const EffectClass& e) {
    for (std::size_t i = 0; i < table.effects.size(); ++i)
        if (table.effects[i].representative == e.representative)
            return static_cast<int>(i);
    return -1;
}

}  // namespace

Retention retention(const DfTable& table, const EffectClass& e) {
    const int row = effect_row(table, e);
    if (row < 0) throw SemanticError("effect is not covered by the df table");
    Retention r;
    r.d_ideal = table.ideal[row];
    r.d_obs = std::min<long>(table.effect_observed(row), r.d_ideal);
    r.rho = static_cast<double>(r.d_obs) / static_cast<double>(r.d_ideal);
    r.delta = r.d_ideal - r.d_obs;
    return r;
}

std::vector<MemberRetention> member_retention(const DesignSpec& spec,
                                              const DfTable& table) {
    std::vector<MemberRetention> rows;
    const Word all = (Word{1} << spec.n_factors()) - 1;

    auto blocked = [&](Word m) {
        for (const BlockWord& b : spec.block_words)
            if (word_contains(m, b.word)) return true;
        return false;
    };

    // Intercept-class members (nonempty ones) are absorbed by the mean.
    for (Word a : spec.alias.closure) {
        if (a == 0 || (a & ~all) != 0) continue;
        MemberRetention r;
        r.member = a;
        r.class_rep = 0;
        r.d_ideal = 1;
        r.rho = 0.0;
        r.delta = 0;  // absorbed, not charged as a testable loss
        r.flag = MemberRetention::Flag::intercept;
        rows.push_back(r);
    }

    for (std::size_t i = 0; i < table.effects.size(); ++i) {
        const EffectClass& cls = table.effects[i];
        // pooled class rank, inter-block df included
        long pooled = 0;
        for (const DfCell& c : table.cells[i]) pooled += c.df + c.absorbed_df;
        pooled = std::min<long>(pooled, table.ideal[i]);

        std::vector<Word> open;  // members not lost to a block word
        for (Word m : cls.members)
            if (!blocked(m)) open.push_back(m);
        const Word claimant = open.empty() ? Word{0} : open.front();

        for (Word m : cls.members) {
            MemberRetention r;
            r.member = m;
            r.class_rep = cls.representative;
            long d_member = 1;
            for (int f : word_factors(m)) d_member *= spec.factors[f].levels - 1;
            r.d_ideal = d_member;
            if (blocked(m)) {
                r.flag = MemberRetention::Flag::blocked;
                r.rho = 0.0;
                r.delta = d_member;
            } else if (m == claimant) {
                r.flag = MemberRetention::Flag::claims;
                const long got = std::min(pooled, d_member);
                r.rho = static_cast<double>(got) / d_member;
                r.delta = d_member - got;
            } else if (word_order(m) == word_order(claimant)) {
                r.flag = MemberRetention::Flag::starved;
                r.rho = 0.0;
                r.delta = d_member;
            } else {
                r.flag = MemberRetention::Flag::inherited;
                const long got = std::min(pooled, d_member);
                r.rho = static_cast<double>(got) / d_member;
                r.delta = d_member - got;
            }
            rows.push_back(r);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const MemberRetention& a,
                                           const MemberRetention& b) {
        return word_canon_less(a.member, b.member);
    });
    return rows;
}

namespace {

// Sigma^{-1} v = sum over the whole family of sigma_s^{-2} T_s v; the
// grand component uses the residual sigma (the intercept carries no
// contrast information either way).
Eigen::MatrixXd apply_sigma_inv(const ProjectorFamily& fam,
                                const VarianceComponents& vc,
                                const Eigen::MatrixXd& x) {
    const std::int64_t n = x.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
    std::vector<double> v(n), w(n);
    for (long c = 0; c < x.cols(); ++c) {
        for (std::int64_t i = 0; i < n; ++i) v[i] = x(i, c);
        fam.apply_mean(-1, v, w);
        for (std::int64_t i = 0; i < n; ++i) out(i, c) += w[i] / vc.residual;
        for (int s = 0; s < fam.strata_count(); ++s) {
            fam.apply_orth(s, v, w);
            const double s2 = vc.for_stratum(fam.stratum_name(s));
            for (std::int64_t i = 0; i < n; ++i) out(i, c) += w[i] / s2;
        }
        fam.apply_residual(v, w);
        for (std::int64_t i = 0; i < n; ++i) out(i, c) += w[i] / vc.residual;
    }
    return out;
}

// (I - sum_{kept strata} P_s) v — the nuisance span left out of the sum.
Eigen::MatrixXd apply_dropped_complement(const ProjectorFamily& fam,
                                         const std::vector<std::string>& dropped,
                                         const Eigen::MatrixXd& x) {
    const std::int64_t n = x.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
    std::vector<double> v(n), w(n);
    for (long c = 0; c < x.cols(); ++c) {
        for (std::int64_t i = 0; i < n; ++i) v[i] = x(i, c);
        for (int s = 0; s < fam.strata_count(); ++s) {
            if (std::find(dropped.begin(), dropped.end(), fam.stratum_name(s)) ==
                dropped.end())
                continue;
            fam.apply_orth(s, v, w);
            for (std::int64_t i = 0; i < n; ++i) out(i, c) += w[i];
        }
        if (std::find(dropped.begin(), dropped.end(), "__residual") != dropped.end()) {
            fam.apply_residual(v, w);
            for (std::int64_t i = 0; i < n; ++i) out(i, c) += w[i];
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXd alias_matrix(const DesignSpec& spec, const EffectClass& e,
                             const VarianceComponents& vc,
                             const std::vector<std::string>& drop_strata,
                             const RankPolicy& policy) {
    vc.validate();
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const ContrastBasis basis = effect_contrast_basis(spec, e);
    const Eigen::MatrixXd siX = apply_sigma_inv(fam, vc, basis.columns);
    const Eigen::MatrixXd info = basis.columns.transpose() * siX;
    const Eigen::MatrixXd info_pinv = psd_pseudo_inverse(info, fam.n_present(), policy);
    const Eigen::MatrixXd mid = apply_dropped_complement(fam, drop_strata, siX);
    return info_pinv * (siX.transpose() * mid);
}

Eigen::MatrixXd alias_matrix(const DesignSpec& spec, const EffectClass& e,
                             const VarianceComponents& vc,
                             const RankPolicy& policy) {
    std::vector<std::string> drop;
    for (std::size_t s = 0; s < spec.strata.size(); ++s)
        if (spec.stratum_is_blocking(static_cast<int>(s)))
            drop.push_back(spec.strata[s].name);
    return alias_matrix(spec, e, vc, drop, policy);
}

AlphaIndex alpha_index(const DesignSpec& spec, const EffectClass& e,
                       const VarianceComponents& vc, const DfTable& table,
                       const RankPolicy& policy) {
    AlphaIndex idx;
    const Retention r = retention(table, e);
    if (r.rho < 1.0) {
        idx.kind = AlphaIndex::Kind::infinite_lost;
        idx.value = std::numeric_limits<double>::infinity();
        return idx;
    }
    const Eigen::MatrixXd a = alias_matrix(spec, e, vc, policy);
    const ProjectorFamily fam = ProjectorFamily::build(spec);
    const ContrastBasis basis = effect_contrast_basis(spec, e);
    const Eigen::MatrixXd siX = apply_sigma_inv(fam, vc, basis.columns);
    const Eigen::MatrixXd info = basis.columns.transpose() * siX;
    const double denom = psd_pseudo_inverse(info, fam.n_present(), policy).trace();
    const double num = a.trace();
    if (std::abs(num) <= 1e-10 * std::max(1.0, denom)) {
        idx.kind = AlphaIndex::Kind::zero_orthogonal;
        idx.value = 0.0;
        return idx;
    }
    idx.kind = AlphaIndex::Kind::finite;
    idx.value = num / denom;
    return idx;
}

double ali(const DesignSpec& spec, const DfTable& table,
           const std::map<Word, double>& weights) {
    const std::vector<MemberRetention> members = member_retention(spec, table);
    double sum = 0.0;
    for (const auto& [w, weight] : weights) {
        if (weight < -1e-12) throw SemanticError("negative effect weight");
        sum += weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw SemanticError("effect weights must sum to 1");
    double out = 0.0;
    for (const auto& [word, weight] : weights) {
        bool found = false;
        for (const MemberRetention& m : members) {
            if (m.member != word) continue;
            out += weight * (1.0 - m.rho);
            found = true;
            break;
        }
        if (!found) throw SemanticError("weight names an effect outside the design");
    }
    return out;
}

ResolutionResult resolution(const DesignSpec& spec, const DfTable& table) {
    ResolutionResult res;
    bool all_two_level = true;
    for (const FactorSpec& f : spec.factors) all_two_level &= f.levels == 2;
    res.regular = all_two_level && spec.strata.empty() && spec.model.empty();

    int best = std::numeric_limits<int>::max();
    // the intercept class: absorbed by the mean, retention 0 by definition
    for (Word a : spec.alias.closure)
        if (a != 0) best = std::min(best, word_order(a));
    for (std::size_t i = 0; i < table.effects.size(); ++i) {
        const Retention r = retention(table, table.effects[i]);
        if (r.d_obs == 0)
            best = std::min(best, word_order(table.effects[i].representative));
    }
    if (best != std::numeric_limits<int>::max()) res.r = best;
    return res;
}

std::map<Word, double> uniform_member_weights(const DesignSpec& spec) {
    DfTable table = partition_table(spec);
    std::map<Word, double> w;
    long count = 0;
    for (const MemberRetention& m : member_retention(spec, table)) {
        if (m.flag == MemberRetention::Flag::intercept) continue;
        w[m.member] = 1.0;
        ++count;
    }
    for (auto& [word, weight] : w) weight = 1.0 / static_cast<double>(count);
    return w;
}

RetentionReport retention_report(const DesignSpec& spec, const DfTable& table,
                                 const std::map<Word, double>* weights,
                                 const VarianceComponents* vc) {
    RetentionReport report;
    for (const FactorSpec& f : spec.factors) report.factor_names.push_back(f.name);
    report.members = member_retention(spec, table);
    for (const EffectClass& e : table.effects)
        report.classes[e.representative] = retention(table, e);
    if (vc != nullptr)
        for (const EffectClass& e : table.effects)
            report.alphas[e.representative] = alpha_index(spec, e, *vc, table);
    report.res = resolution(spec, table);
    for (const MemberRetention& m : report.members) report.df_lost_nominal += m.delta;
    if (weights != nullptr) {
        report.ali_value = ali(spec, table, *weights);
        report.has_weights = true;
    } else {
        report.ali_value = ali(spec, table, uniform_member_weights(spec));
        report.has_weights = false;
    }
    return report;
}

namespace {

std::string flag_name(MemberRetention::Flag f) {
    switch (f) {
        case MemberRetention::Flag::ok: return "";
        case MemberRetention::Flag::claims: return "";
        case MemberRetention::Flag::inherited: return "aliased";
        case MemberRetention::Flag::starved: return "aliased-lost";
        case MemberRetention::Flag::blocked: return "blocked";
        case MemberRetention::Flag::intercept: return "absorbed";
    }
    return "";
}

}  // namespace

std::string RetentionReport::to_csv() const {
    std::ostringstream out;
    out << "effect,rho,delta,alpha,flags\n";
    for (const MemberRetention& m : members) {
        out << word_name(m.member, factor_names) << ',' << fmt_double(m.rho) << ','
            << m.delta << ',';
        auto it = alphas.find(m.class_rep);
        if (m.flag == MemberRetention::Flag::intercept || it == alphas.end()) {
            out << "";
        } else if (it->second.kind == AlphaIndex::Kind::infinite_lost) {
            out << "inf";
        } else {
            out << fmt_double(it->second.value);
        }
        out << ',' << flag_name(m.flag) << '\n';
    }
    out << "ALI=" << fmt_double(ali_value) << ",resolution=";
    if (res.r) out << *res.r;
    else out << "none";
    if (!res.regular && res.r) out << " (non-regular)";
    out << ",df_lost=" << df_lost_nominal << '\n';
    return out.str();
}

std::string RetentionReport::pretty() const {
    std::ostringstream out;
    out << "effect  rho  delta  flags\n";
    for (const MemberRetention& m : members)
        out << "  " << word_name(m.member, factor_names) << "  " << fmt_double(m.rho)
            << "  " << m.delta << "  " << flag_name(m.flag) << '\n';
    out << "ALI = " << fmt_double(ali_value) << (has_weights ? "" : " (uniform weights)")
        << ", resolution = " << (res.r ? std::to_string(*res.r) : std::string("none"))
        << (res.regular || !res.r ? "" : " [generalized]")
        << ", nominal df lost = " << df_lost_nominal << '\n';
    return out.str();
}

}  // namespace stratarank
