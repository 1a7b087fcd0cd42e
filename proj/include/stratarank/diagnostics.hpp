#pragma once

#include <set>
#include <string>
#include <vector>

#include "stratarank/df_table.hpp"

namespace stratarank {

// Pre-data screening computed from design metadata only. Stratum index
// -1 is the grand mean, strata_count() the residual.
struct DiagCell {
    Word effect = 0;
    int stratum = 0;
    std::string stratum_name;
    long bound = 0;
    bool bound_violated_nominal = false;
    double eta = 1.0;
    double rho_proxy = 1.0;
    bool full_retention = false;
};

struct MechanismFlag {
    std::string id;         // M1, M2, M3
    std::string rationale;
    std::string direction;  // liberal / conservative hint
};

struct DiagnosticReport {
    std::vector<DiagCell> cells;
    std::vector<MechanismFlag> mechanisms;
    double sparse_unit_threshold = 0.15;  // the 10-20% rule of thumb
    std::vector<std::string> factor_names;

    bool has_mechanism(const std::string& id) const;
    std::string to_text() const;
    std::string to_csv() const;
};

std::pair<long, bool> stratum_bound(const EffectClass& e, int stratum,
                                    const DesignSpec& spec);
double replication_proxy(const EffectClass& e, int stratum, const DesignSpec& spec);
double eta(const EffectClass& e, int stratum, const DesignSpec& spec);
bool full_retention_check(const EffectClass& e, int stratum, const DesignSpec& spec);

DiagnosticReport checklist(const DesignSpec& spec,
                           double sparse_unit_threshold = 0.15);

}  // namespace stratarank
