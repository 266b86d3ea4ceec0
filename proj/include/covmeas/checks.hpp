#pragma once

// Scenario-scale invariant suite behind the `validate` command.

#include <vector>

#include "covmeas/measurement_rules.hpp"
#include "covmeas/report.hpp"
#include "covmeas/scenario.hpp"

namespace covmeas {

/// Density, Hermiticity, completeness, normalization, truncation and audit
/// checks on a built arrangement. Signaling audits are checked against
/// 5 * eps_trunc only under the intrinsic rule.
std::vector<CheckResult> run_checks(const Scenario& scenario, const Arrangement& arrangement,
                                    const TableOptions& options = {});

}  // namespace covmeas
