#pragma once

#include <map>
#include <optional>

#include "stratarank/df_table.hpp"

namespace stratarank {

struct VarianceComponents {
    std::map<std::string, double> sigma2;  // declared stratum name -> sigma^2
    double residual = 1.0;

    double for_stratum(const std::string& name) const;
    void validate() const;  // all positive
};

struct Retention {
    double rho = 0.0;
    long delta = 0;
    long d_obs = 0;
    long d_ideal = 0;
};

// Class-level retention: the sum of counted (non-absorbed) table cells
// over its ideal dimension, clamped into [0,1] because projection ranks
// can leak a class into an extra stratum under imbalance.
Retention retention(const DfTable& table, const EffectClass& e);

// One row of the Table-4 style member report. Within a class, members
// whose letter set contains a declared block word are reported lost; the
// lowest-order remaining member claims the pooled class df (inter-block
// information included); its same-order rivals are starved; higher-order
// members inherit the class retention.
struct MemberRetention {
    Word member = 0;
    Word class_rep = 0;
    double rho = 0.0;
    long delta = 0;
    long d_ideal = 0;
    enum class Flag { ok, claims, inherited, starved, blocked, intercept } flag =
        Flag::ok;
};

std::vector<MemberRetention> member_retention(const DesignSpec& spec,
                                              const DfTable& table);

// Alias/dispersion matrix A(E); `drop_strata` names operators excluded
// from the central sum (blocking strata are excluded by default — their
// span is the nuisance the matrix measures).
Eigen::MatrixXd alias_matrix(const DesignSpec& spec, const EffectClass& e,
                             const VarianceComponents& vc,
                             const std::vector<std::string>& drop_strata,
                             const RankPolicy& policy = {});
Eigen::MatrixXd alias_matrix(const DesignSpec& spec, const EffectClass& e,
                             const VarianceComponents& vc,
                             const RankPolicy& policy = {});

struct AlphaIndex {
    enum class Kind { zero_orthogonal, finite, infinite_lost } kind = Kind::finite;
    double value = 0.0;
};

AlphaIndex alpha_index(const DesignSpec& spec, const EffectClass& e,
                       const VarianceComponents& vc, const DfTable& table,
                       const RankPolicy& policy = {});

// Alias-loss index over member-level retention. Weights must cover the
// listed members, be nonnegative and sum to 1 (+-1e-9).
double ali(const DesignSpec& spec, const DfTable& table,
           const std::map<Word, double>& weights);

struct ResolutionResult {
    std::optional<int> r;
    bool regular = true;  // single stratum, regular two-level fraction
};

// min{|E| : rho(class E)=0}, scanning classes including the intercept
// class; none when no retention vanishes.
ResolutionResult resolution(const DesignSpec& spec, const DfTable& table);

struct RetentionReport {
    std::vector<MemberRetention> members;
    std::map<Word, Retention> classes;
    std::map<Word, AlphaIndex> alphas;  // keyed by class representative
    double ali_value = 0.0;
    bool has_weights = false;
    ResolutionResult res;
    long df_lost_nominal = 0;  // sum of member deltas
    std::vector<std::string> factor_names;

    std::string to_csv() const;
    std::string pretty() const;
};

RetentionReport retention_report(const DesignSpec& spec, const DfTable& table,
                                 const std::map<Word, double>* weights = nullptr,
                                 const VarianceComponents* vc = nullptr);

// Uniform weights over the member report rows of a design.
std::map<Word, double> uniform_member_weights(const DesignSpec& spec);

}  // namespace stratarank
