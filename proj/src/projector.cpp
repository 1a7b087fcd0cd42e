#include "stratarank/projector.hpp"

#include <cmath>
#include <stdexcept>

#include "stratarank/rng.hpp"

namespace stratarank {

namespace {

IncidenceMap incidence_from_ids(const ObservationTable& obs,
                                std::span<const std::int32_t> ids,
                                const std::string& name) {
    IncidenceMap map;
    map.stratum = name;
    map.unit_of.assign(obs.n_obs, -1);
    std::vector<std::int32_t> dense;  // raw unit id -> dense index
    for (std::int64_t i = 0; i < obs.n_obs; ++i) {
        if (!obs.present[i]) continue;
        const std::int32_t raw = ids[i];
        if (raw >= static_cast<std::int32_t>(dense.size())) dense.resize(raw + 1, -1);
        if (dense[raw] < 0) {
            dense[raw] = map.q++;
            map.unit_sizes.push_back(0);
        }
        map.unit_of[i] = dense[raw];
        ++map.unit_sizes[dense[raw]];
    }
    if (map.q == 0)
        throw SemanticError("stratum " + name + " has no present observations");
    return map;
}

}  // namespace

IncidenceMap build_incidence(const ObservationTable& obs, const DesignSpec& spec,
                             const std::string& stratum) {
    const int s = spec.stratum_index(stratum);
    if (s < 0) throw SemanticError("unknown stratum " + stratum);
    return incidence_from_ids(obs, obs.unit_id[s], stratum);
}

ProjectorFamily ProjectorFamily::build(const DesignSpec& spec) {
    ProjectorFamily fam;
    const ObservationTable& obs = spec.observations;
    fam.n_ = obs.n_obs;
    fam.n_present_ = obs.n_present();

    std::vector<std::int32_t> zeros(obs.n_obs, 0);
    fam.grand_ = incidence_from_ids(obs, zeros, "__grand");

    for (std::size_t s = 0; s < spec.strata.size(); ++s) {
        fam.incidence_.push_back(
            incidence_from_ids(obs, obs.unit_id[s], spec.strata[s].name));
        fam.parent_.push_back(spec.strata[s].parent);
    }
    return fam;
}

void ProjectorFamily::apply_mean(int s, std::span<const double> v,
                                 std::span<double> out) const {
    const IncidenceMap& inc = s < 0 ? grand_ : incidence_.at(s);
    if (v.size() != static_cast<std::size_t>(n_) || out.size() != v.size())
        throw std::invalid_argument("apply_mean: vector length mismatch");
    std::vector<double> sums(inc.q, 0.0);
    for (std::int64_t i = 0; i < n_; ++i) {
        const std::int32_t u = inc.unit_of[i];
        if (u >= 0) sums[u] += v[i];
    }
    for (int u = 0; u < inc.q; ++u) sums[u] /= static_cast<double>(inc.unit_sizes[u]);
    for (std::int64_t i = 0; i < n_; ++i) {
        const std::int32_t u = inc.unit_of[i];
        out[i] = u >= 0 ? sums[u] : 0.0;
    }
}

void ProjectorFamily::apply_orth(int s, std::span<const double> v,
                                 std::span<double> out) const {
    apply_mean(s, v, out);
    std::vector<double> parent_mean(n_);
    apply_mean(parent_.at(s), v, parent_mean);
    for (std::int64_t i = 0; i < n_; ++i) out[i] -= parent_mean[i];
}

void ProjectorFamily::apply_residual(std::span<const double> v,
                                     std::span<double> out) const {
    apply_mean(-1, v, out);
    std::vector<double> part(n_);
    for (int s = 0; s < strata_count(); ++s) {
        apply_orth(s, v, part);
        for (std::int64_t i = 0; i < n_; ++i) out[i] += part[i];
    }
    for (std::int64_t i = 0; i < n_; ++i) {
        const bool present = grand_.unit_of[i] >= 0;
        out[i] = present ? v[i] - out[i] : 0.0;
    }
}

int ProjectorFamily::stratum_dim(int s) const {
    const int p = parent_.at(s);
    const int qp = p < 0 ? 1 : incidence_[p].q;
    return incidence_[s].q - qp;
}

int ProjectorFamily::residual_dim() const {
    int allocated = 1;  // grand mean
    for (int s = 0; s < strata_count(); ++s) allocated += stratum_dim(s);
    return static_cast<int>(n_present_) - allocated;
}

std::vector<double> apply_projector(const ProjectorHandle& p,
                                    std::span<const double> v) {
    const ProjectorFamily& fam = *p.family;
    std::vector<double> out(fam.n());
    if (p.kind == ProjectorHandle::Kind::residual || p.index == fam.strata_count())
        fam.apply_residual(v, out);
    else if (p.index < 0)
        fam.apply_mean(-1, v, out);
    else
        fam.apply_orth(p.index, v, out);
    return out;
}

OrthoAudit check_orthogonal_decomposition(const ProjectorFamily& fam,
                                          std::uint64_t probe_seed) {
    const std::int64_t n = fam.n();
    const int m = fam.strata_count();

    std::vector<std::vector<double>> probes;
    std::vector<double> e0(n, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        if (fam.grand().unit_of[i] >= 0) { e0[i] = 1.0; break; }
    probes.push_back(std::move(e0));
    std::vector<double> ones(n, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        if (fam.grand().unit_of[i] >= 0) ones[i] = 1.0;
    probes.push_back(std::move(ones));
    for (int p = 0; p < 16; ++p) {
        CounterRng rng = CounterRng::stream(probe_seed, p, 0x0b5e);
        std::vector<double> v(n, 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            if (fam.grand().unit_of[i] >= 0) v[i] = rng.normal();
        probes.push_back(std::move(v));
    }

    OrthoAudit audit;
    std::vector<double> acc(n), part(n), twice(n);
    for (const auto& v : probes) {
        // sum over the family reproduces v at present rows
        fam.apply_mean(-1, v, acc);
        for (int s = 0; s < m; ++s) {
            fam.apply_orth(s, v, part);
            for (std::int64_t i = 0; i < n; ++i) acc[i] += part[i];
        }
        fam.apply_residual(v, part);
        for (std::int64_t i = 0; i < n; ++i) acc[i] += part[i];
        for (std::int64_t i = 0; i < n; ++i) {
            const double want = fam.grand().unit_of[i] >= 0 ? v[i] : 0.0;
            const double err = std::fabs(acc[i] - want);
            if (err > audit.max_violation) audit.max_violation = err;
            if (err > 1e-8) audit.sum_to_identity = false;
        }
        // pairwise products vanish: apply T_s then T_s' for s != s'
        for (int s = 0; s < m; ++s) {
            fam.apply_orth(s, v, part);
            fam.apply_mean(-1, part, twice);
            for (std::int64_t i = 0; i < n; ++i) {
                const double err = std::fabs(twice[i]);
                if (err > audit.max_violation) audit.max_violation = err;
                if (err > 1e-8) audit.pairwise_orthogonal = false;
            }
            for (int t = 0; t < m; ++t) {
                if (t == s) continue;
                fam.apply_orth(t, part, twice);
                for (std::int64_t i = 0; i < n; ++i) {
                    const double err = std::fabs(twice[i]);
                    if (err > audit.max_violation) audit.max_violation = err;
                    if (err > 1e-8) audit.pairwise_orthogonal = false;
                }
            }
            // against the residual operator
            fam.apply_residual(part, twice);
            for (std::int64_t i = 0; i < n; ++i) {
                const double err = std::fabs(twice[i]);
                if (err > audit.max_violation) audit.max_violation = err;
                if (err > 1e-8) audit.pairwise_orthogonal = false;
            }
        }
    }
    return audit;
}

OrthoAudit check_orthogonal_decomposition(const DesignSpec& spec) {
    return check_orthogonal_decomposition(ProjectorFamily::build(spec));
}

}  // namespace stratarank
