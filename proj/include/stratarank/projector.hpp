#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stratarank/design.hpp"

namespace stratarank {

// Incidence of observations into the nonempty units of one stratum,
// restricted to present rows and densely re-indexed.
struct IncidenceMap {
    std::string stratum;
    std::vector<std::int32_t> unit_of;  // length N, -1 at absent rows
    std::vector<std::int64_t> unit_sizes;
    int q = 0;  // number of nonempty units

    std::int64_t n() const { return static_cast<std::int64_t>(unit_of.size()); }
};

IncidenceMap build_incidence(const ObservationTable& obs, const DesignSpec& spec,
                             const std::string& stratum);

// The orthogonalized projector chain of a design: the grand mean, one
// ancestor-adjusted operator per declared stratum, and the residual.
// Operators sum to the identity on present rows and are mutually
// orthogonal whenever the unit labels really nest.
class ProjectorFamily {
public:
    static ProjectorFamily build(const DesignSpec& spec);

    std::int64_t n() const { return n_; }
    std::int64_t n_present() const { return n_present_; }
    int strata_count() const { return static_cast<int>(incidence_.size()); }
    const std::string& stratum_name(int s) const { return incidence_[s].stratum; }
    const IncidenceMap& incidence(int s) const { return incidence_[s]; }
    const IncidenceMap& grand() const { return grand_; }
    int parent(int s) const { return parent_[s]; }

    // Raw within-unit mean of stratum s (-1 = grand mean). Absent rows
    // map to zero. O(N) time, O(q_s) scratch.
    void apply_mean(int s, std::span<const double> v, std::span<double> out) const;

    // Orthogonalized operator T_s = M_s - M_parent(s).
    void apply_orth(int s, std::span<const double> v, std::span<double> out) const;

    // Residual operator: v - grand - sum of every T_s.
    void apply_residual(std::span<const double> v, std::span<double> out) const;

    // Dimension of the orthogonalized stratum image: q_s - q_parent.
    int stratum_dim(int s) const;
    int residual_dim() const;

private:
    std::int64_t n_ = 0;
    std::int64_t n_present_ = 0;
    IncidenceMap grand_;
    std::vector<IncidenceMap> incidence_;
    std::vector<int> parent_;
};

// Identifies one operator of a family: -1 the grand mean, 0..m-1 the
// declared strata, m the residual.
struct ProjectorHandle {
    enum class Kind { stratum_mean, residual };

    const ProjectorFamily* family = nullptr;
    int index = 0;
    Kind kind = Kind::stratum_mean;

    static ProjectorHandle stratum(const ProjectorFamily& f, int s) {
        return {&f, s, Kind::stratum_mean};
    }
    static ProjectorHandle residual(const ProjectorFamily& f) {
        return {&f, f.strata_count(), Kind::residual};
    }
};

std::vector<double> apply_projector(const ProjectorHandle& p,
                                    std::span<const double> v);

struct OrthoAudit {
    bool sum_to_identity = true;
    bool pairwise_orthogonal = true;
    double max_violation = 0.0;
};

// Applies both sides of sum P_s = I and P_s P_s' = 0 to a deterministic
// probe battery (e0, the all-ones vector and 16 seeded random vectors).
OrthoAudit check_orthogonal_decomposition(const DesignSpec& spec);
OrthoAudit check_orthogonal_decomposition(const ProjectorFamily& family,
                                          std::uint64_t probe_seed = 0x5eedu);

}  // namespace stratarank
