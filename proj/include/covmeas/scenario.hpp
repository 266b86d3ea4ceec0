#pragma once

// Versioned JSON scenario files: parsing with defaults, validation that lists
// every violation, canonical serialization and hashing, and conversion to a
// MeasurementPlan.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "covmeas/measurement_rules.hpp"

namespace covmeas {

inline constexpr int kSchemaVersion = 1;

struct SmearingEntry {
  std::string profile = "bump";  // bump | uniform | samples
  std::vector<double> values;    // samples only, left to right over the region's sites
};

struct BinEntry {
  std::string kind = "whole_line";  // whole_line | symmetric | uniform | edges
  double delta_max = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n_bins = 0;
  std::vector<double> edges;

  BinPartition partition() const;
};

struct DeviceEntry {
  std::string id;
  double t = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  SmearingEntry smearing;
  BinEntry bins;
  PartBinning part_bins;
  bool selective = true;
  Composition composition = Composition::Linear;
};

struct AuditPair {
  std::string source;
  std::string target;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  LatticeSpec lattice;
  bool exclude_zero_mode = false;
  std::vector<int> active_modes;
  int n_max = 3;
  std::size_t dimension_cap = kDefaultDimensionCap;
  std::vector<DeviceEntry> devices;
  std::vector<int> excitations;
  Rule rule = Rule::Intrinsic;
  bool decouple_spacelike = false;
  Tolerances tolerances;
  /// validate reports a tolerance breach when eps_trunc exceeds this.
  double eps_trunc_max = 0.05;
  /// Smearings with a larger share of high-|k| weight are flagged as rough.
  double high_frequency_max = 0.1;
  std::vector<AuditPair> audits;
};

/// Throws ParseError (with line and column) for malformed JSON or wrongly
/// typed fields, SchemaVersionMismatch, or ValidationError listing every violation.
Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<string>");
Scenario parse_scenario(const std::filesystem::path& path);

/// All violations of the scenario's cross-field invariants; empty when valid.
std::vector<std::string> scenario_violations(const Scenario& s);

/// Canonical JSON with every default written out.
std::string serialize_scenario(const Scenario& s);

/// SHA-256 (hex) of the canonical serialization.
std::string scenario_hash(const Scenario& s);

MeasurementPlan to_plan(const Scenario& s);

/// Warnings from validate_arrangement and the smoothness diagnostic.
std::vector<std::string> scenario_warnings(const Scenario& s);

}  // namespace covmeas
