#pragma once

// Deterministic CSV and JSON renderings of layers, outcome tables, signaling
// reports, validation checks and kernel tables. Every artifact carries the
// schema version and the resolved scenario hash.

#include <string>
#include <vector>

#include "covmeas/measurement_rules.hpp"
#include "covmeas/scenario.hpp"

namespace covmeas {

struct ArtifactHeader {
  int schema_version = kSchemaVersion;
  std::string scenario_hash;
  std::string scenario_name;
};

ArtifactHeader header_for(const Scenario& s);

std::string layers_csv(const ArtifactHeader& h, const std::vector<DevicePart>& parts, const CausalLayers& layers);
std::string layers_json(const ArtifactHeader& h, const std::vector<DevicePart>& parts, const CausalLayers& layers);

std::string outcome_csv(const ArtifactHeader& h, const OutcomeTable& t);
std::string outcome_json(const ArtifactHeader& h, const OutcomeTable& t, const Arrangement& arrangement);

std::string signaling_csv(const ArtifactHeader& h, const std::vector<SignalingReport>& reports);
std::string signaling_json(const ArtifactHeader& h, const std::vector<SignalingReport>& reports);

struct CheckResult {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = true;
  /// A failed check with this flag set is a numerical tolerance breach rather
  /// than an invalid scenario.
  bool numerical = true;
  std::string detail;
};

std::string checks_json(const ArtifactHeader& h, const std::vector<CheckResult>& checks,
                        const std::vector<std::string>& warnings);

struct KernelRow {
  int mode = 0;
  double omega = 0.0;
  double t = 0.0;
  bool caustic = false;
  double a = 0.0;
  double b = 0.0;
  double c_abs = 0.0;
};

std::string kernels_csv(const ArtifactHeader& h, const std::vector<KernelRow>& rows);

/// Shortest round-trip decimal form of x (17 significant digits).
std::string format_number(double x);

}  // namespace covmeas
