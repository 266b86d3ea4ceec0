#include "covmeas/checks.hpp"

#include <algorithm>

namespace covmeas {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kCompletenessTol = 1e-10;
constexpr double kNormalizationTol = 1e-8;
constexpr double kNegativityTol = 1e-10;
constexpr double kNoSignalingFactor = 5.0;

CheckResult at_most(std::string name, double value, double limit, std::string detail = {}) {
  return {std::move(name), value, limit, value <= limit, true, std::move(detail)};
}

}  // namespace

std::vector<CheckResult> run_checks(const Scenario& scenario, const Arrangement& arr, const TableOptions& options) {
  std::vector<CheckResult> out;
  const std::string violation = density_violation(arr.initial_density());
  out.push_back({"initial_density", violation.empty() ? 0.0 : 1.0, 0.0, violation.empty(), true, violation});

  double herm = 0.0;
  for (std::size_t i = 0; i < arr.part_data().size(); ++i) herm = std::max(herm, arr.part_field(i).hermiticity_residual());
  out.push_back(at_most("field_hermiticity", herm, kHermitianTol));

  double completeness = 0.0;
  for (std::size_t d = 0; d < arr.plan().devices.size(); ++d) {
    const auto& bins = arr.plan().devices[d].bins;
    Matrix sum = Matrix::Zero(arr.initial_density().rows(), arr.initial_density().cols());
    for (std::size_t b = 0; b < bins.size(); ++b) sum += arr.device_spectrum(d).projector(bins, b);
    sum -= Matrix::Identity(sum.rows(), sum.cols());
    completeness = std::max(completeness, sum.cwiseAbs().maxCoeff());
  }
  out.push_back(at_most("projector_completeness", completeness, kCompletenessTol));

  double leak = 0.0;
  for (double l : arr.leakage()) leak = std::max(leak, l);
  out.push_back(at_most("mode_leakage", leak, arr.plan().tolerances.leakage_threshold));

  out.push_back(at_most("layer_residual", arr.layer_residual(), arr.plan().tolerances.layer_commutator_max,
                        "largest within-layer projector commutator norm"));
  out.push_back(at_most("eps_trunc", arr.eps_trunc(), scenario.eps_trunc_max,
                        "largest spacelike projector commutator on the initial state"));

  for (Rule rule : {Rule::Standard, Rule::Intrinsic}) {
    const OutcomeTable t = rule_table(arr, rule, options);
    double negative = 0.0;
    for (const auto& [key, p] : t.probabilities) negative = std::max(negative, -p);
    const std::string name = std::string(to_string(rule));
    out.push_back(at_most(name + "_normalization", std::abs(t.total() - 1.0), kNormalizationTol));
    out.push_back(at_most(name + "_negativity", negative, kNegativityTol));
  }

  if (arr.plan().rule == Rule::Intrinsic) {
    for (const auto& a : scenario.audits) {
      const SignalingReport r = signaling_audit(arr, a.source, a.target, Rule::Intrinsic, options);
      out.push_back(at_most("no_signaling_" + a.source + "_" + a.target, r.tv, kNoSignalingFactor * r.eps_trunc,
                            "total variation against 5 eps_trunc"));
    }
  }
  return out;
}

}  // namespace covmeas
