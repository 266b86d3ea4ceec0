#include "covmeas/scenario.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "covmeas/error.hpp"
#include "json.hpp"

namespace covmeas {

namespace {

using Json = nlohmann::ordered_json;

// Walks a JSON object, collecting violations instead of stopping at the first.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& violations) : violations_(violations) {}

  void note(const std::string& msg) { violations_.push_back(msg); }

  const Json* field(const Json& obj, const std::string& path, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) note(path + key + ": required field missing");
      return nullptr;
    }
    return &obj.at(key);
  }

  double number(const Json& obj, const std::string& path, const std::string& key, double fallback, bool required) {
    const Json* v = field(obj, path, key, required);
    if (!v) return fallback;
    if (!v->is_number()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be a number");
    return v->get<double>();
  }

  long long integer(const Json& obj, const std::string& path, const std::string& key, long long fallback,
                    bool required) {
    const Json* v = field(obj, path, key, required);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be an integer");
    return v->get<long long>();
  }

  bool boolean(const Json& obj, const std::string& path, const std::string& key, bool fallback) {
    const Json* v = field(obj, path, key, false);
    if (!v) return fallback;
    if (!v->is_boolean()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be true or false");
    return v->get<bool>();
  }

  std::string string(const Json& obj, const std::string& path, const std::string& key, const std::string& fallback,
                     bool required) {
    const Json* v = field(obj, path, key, required);
    if (!v) return fallback;
    if (!v->is_string()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be a string");
    return v->get<std::string>();
  }

  template <class T>
  std::vector<T> list(const Json& obj, const std::string& path, const std::string& key) {
    const Json* v = field(obj, path, key, false);
    if (!v) return {};
    if (!v->is_array()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const Json& e = (*v)[i];
      const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
      if (!ok) {
        throw Error(ErrorCode::ParseError,
                    "field '" + path + key + "[" + std::to_string(i) + "]' must be " +
                        (std::is_integral_v<T> ? "an integer" : "a number"));
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

  const Json& object(const Json& obj, const std::string& path, const std::string& key, bool required) {
    static const Json empty = Json::object();
    const Json* v = field(obj, path, key, required);
    if (!v) return empty;
    if (!v->is_object()) throw Error(ErrorCode::ParseError, "field '" + path + key + "' must be an object");
    return *v;
  }

  void unknown_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> known) {
    const std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, value] : obj.items()) {
      if (!names.count(key)) note(path + key + ": unknown field");
    }
  }

 private:
  std::vector<std::string>& violations_;
};

std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

BinEntry read_bins(Reader& r, const Json& obj, const std::string& path) {
  BinEntry b;
  r.unknown_keys(obj, path, {"kind", "delta_max", "lo", "hi", "n_bins", "edges"});
  b.kind = r.string(obj, path, "kind", "whole_line", false);
  if (b.kind == "symmetric") {
    b.delta_max = r.number(obj, path, "delta_max", 0.0, true);
    b.n_bins = static_cast<int>(r.integer(obj, path, "n_bins", 0, true));
  } else if (b.kind == "uniform") {
    b.lo = r.number(obj, path, "lo", 0.0, true);
    b.hi = r.number(obj, path, "hi", 0.0, true);
    b.n_bins = static_cast<int>(r.integer(obj, path, "n_bins", 0, true));
  } else if (b.kind == "edges") {
    b.edges = r.list<double>(obj, path, "edges");
  } else if (b.kind != "whole_line") {
    r.note(path + "kind: unknown bin kind '" + b.kind + "'");
  }
  return b;
}

Json write_bins(const BinEntry& b) {
  Json j;
  j["kind"] = b.kind;
  if (b.kind == "symmetric") {
    j["delta_max"] = b.delta_max;
    j["n_bins"] = b.n_bins;
  } else if (b.kind == "uniform") {
    j["lo"] = b.lo;
    j["hi"] = b.hi;
    j["n_bins"] = b.n_bins;
  } else if (b.kind == "edges") {
    j["edges"] = b.edges;
  }
  return j;
}

Json to_json(const Scenario& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["lattice"] = {{"n_sites", s.lattice.n_sites},
                  {"spacing", s.lattice.spacing},
                  {"mass", s.lattice.mass},
                  {"exclude_zero_mode", s.exclude_zero_mode}};
  j["basis"] = {{"active_modes", s.active_modes}, {"n_max", s.n_max}, {"dimension_cap", s.dimension_cap}};
  Json devices = Json::array();
  for (const auto& d : s.devices) {
    Json dj;
    dj["id"] = d.id;
    dj["t"] = d.t;
    dj["x_lo"] = d.x_lo;
    dj["x_hi"] = d.x_hi;
    dj["smearing"] = {{"profile", d.smearing.profile}};
    if (d.smearing.profile == "samples") dj["smearing"]["values"] = d.smearing.values;
    dj["bins"] = write_bins(d.bins);
    dj["part_bins"] = {{"width_sigmas", d.part_bins.width_sigmas}, {"n_bins", d.part_bins.n_bins}};
    dj["selective"] = d.selective;
    dj["composition"] = to_string(d.composition);
    devices.push_back(std::move(dj));
  }
  j["devices"] = std::move(devices);
  j["initial_state"] = {{"excitations", s.excitations}};
  j["rule"] = to_string(s.rule);
  j["decouple_spacelike"] = s.decouple_spacelike;
  j["tolerances"] = {{"leakage_threshold", s.tolerances.leakage_threshold},
                     {"layer_commutator_max", s.tolerances.layer_commutator_max},
                     {"tie_commutator_max", s.tolerances.tie_commutator_max},
                     {"eps_trunc_max", s.eps_trunc_max},
                     {"high_frequency_max", s.high_frequency_max}};
  Json audits = Json::array();
  for (const auto& a : s.audits) audits.push_back({{"source", a.source}, {"target", a.target}});
  j["audits"] = std::move(audits);
  return j;
}

Scenario from_json(const Json& root) {
  if (!root.is_object()) throw Error(ErrorCode::ParseError, "scenario must be a JSON object");
  std::vector<std::string> violations;
  Reader r(violations);
  Scenario s;

  if (!root.contains("schema_version")) {
    r.note("schema_version: required field missing");
  } else {
    s.schema_version = static_cast<int>(r.integer(root, "", "schema_version", kSchemaVersion, true));
    if (s.schema_version != kSchemaVersion) {
      throw Error(ErrorCode::SchemaVersionMismatch, "schema_version " + std::to_string(s.schema_version) +
                                                        " is not supported (expected " +
                                                        std::to_string(kSchemaVersion) + ")");
    }
  }
  r.unknown_keys(root, "", {"schema_version", "name", "lattice", "basis", "devices", "initial_state", "rule",
                            "decouple_spacelike", "tolerances", "audits"});
  s.name = r.string(root, "", "name", "", false);

  const Json& lat = r.object(root, "", "lattice", true);
  r.unknown_keys(lat, "lattice.", {"n_sites", "spacing", "mass", "exclude_zero_mode"});
  s.lattice.n_sites = static_cast<int>(r.integer(lat, "lattice.", "n_sites", 0, true));
  s.lattice.spacing = r.number(lat, "lattice.", "spacing", 0.0, true);
  s.lattice.mass = r.number(lat, "lattice.", "mass", 0.0, true);
  s.exclude_zero_mode = r.boolean(lat, "lattice.", "exclude_zero_mode", false);

  const Json& basis = r.object(root, "", "basis", false);
  r.unknown_keys(basis, "basis.", {"active_modes", "n_max", "dimension_cap"});
  s.active_modes = r.list<int>(basis, "basis.", "active_modes");
  s.n_max = static_cast<int>(r.integer(basis, "basis.", "n_max", s.n_max, false));
  s.dimension_cap = static_cast<std::size_t>(
      r.integer(basis, "basis.", "dimension_cap", static_cast<long long>(kDefaultDimensionCap), false));

  if (const Json* devs = r.field(root, "", "devices", false)) {
    if (!devs->is_array()) throw Error(ErrorCode::ParseError, "field 'devices' must be an array");
    for (std::size_t i = 0; i < devs->size(); ++i) {
      const std::string path = "devices[" + std::to_string(i) + "].";
      const Json& dj = (*devs)[i];
      if (!dj.is_object()) throw Error(ErrorCode::ParseError, "field 'devices[" + std::to_string(i) + "]' must be an object");
      r.unknown_keys(dj, path, {"id", "t", "x_lo", "x_hi", "smearing", "bins", "part_bins", "selective", "composition"});
      DeviceEntry d;
      d.id = r.string(dj, path, "id", "", true);
      d.t = r.number(dj, path, "t", 0.0, true);
      d.x_lo = r.number(dj, path, "x_lo", 0.0, true);
      d.x_hi = r.number(dj, path, "x_hi", 0.0, true);
      const Json& sm = r.object(dj, path, "smearing", false);
      r.unknown_keys(sm, path + "smearing.", {"profile", "values"});
      d.smearing.profile = r.string(sm, path + "smearing.", "profile", "bump", false);
      if (d.smearing.profile == "samples") {
        if (!sm.contains("values")) r.note(path + "smearing.values: required field missing");
        d.smearing.values = r.list<double>(sm, path + "smearing.", "values");
      } else if (d.smearing.profile != "bump" && d.smearing.profile != "uniform") {
        r.note(path + "smearing.profile: unknown profile '" + d.smearing.profile + "'");
      }
      d.bins = read_bins(r, r.object(dj, path, "bins", false), path + "bins.");
      const Json& pb = r.object(dj, path, "part_bins", false);
      r.unknown_keys(pb, path + "part_bins.", {"width_sigmas", "n_bins"});
      d.part_bins.width_sigmas = r.number(pb, path + "part_bins.", "width_sigmas", d.part_bins.width_sigmas, false);
      d.part_bins.n_bins = static_cast<int>(r.integer(pb, path + "part_bins.", "n_bins", d.part_bins.n_bins, false));
      d.selective = r.boolean(dj, path, "selective", true);
      const std::string comp = r.string(dj, path, "composition", "linear", false);
      if (auto c = parse_composition(comp)) {
        d.composition = *c;
      } else {
        r.note(path + "composition: unknown composition rule '" + comp + "'");
      }
      s.devices.push_back(std::move(d));
    }
  }

  const Json& init = r.object(root, "", "initial_state", false);
  r.unknown_keys(init, "initial_state.", {"excitations"});
  s.excitations = r.list<int>(init, "initial_state.", "excitations");

  const std::string rule = r.string(root, "", "rule", "intrinsic", false);
  if (auto parsed = parse_rule(rule)) {
    s.rule = *parsed;
  } else {
    r.note("rule: unknown rule '" + rule + "'");
  }
  s.decouple_spacelike = r.boolean(root, "", "decouple_spacelike", false);

  const Json& tol = r.object(root, "", "tolerances", false);
  r.unknown_keys(tol, "tolerances.",
                 {"leakage_threshold", "layer_commutator_max", "tie_commutator_max", "eps_trunc_max", "high_frequency_max"});
  s.tolerances.leakage_threshold = r.number(tol, "tolerances.", "leakage_threshold", s.tolerances.leakage_threshold, false);
  s.tolerances.layer_commutator_max =
      r.number(tol, "tolerances.", "layer_commutator_max", s.tolerances.layer_commutator_max, false);
  s.tolerances.tie_commutator_max = r.number(tol, "tolerances.", "tie_commutator_max", s.tolerances.tie_commutator_max, false);
  s.eps_trunc_max = r.number(tol, "tolerances.", "eps_trunc_max", s.eps_trunc_max, false);
  s.high_frequency_max = r.number(tol, "tolerances.", "high_frequency_max", s.high_frequency_max, false);

  if (const Json* audits = r.field(root, "", "audits", false)) {
    if (!audits->is_array()) throw Error(ErrorCode::ParseError, "field 'audits' must be an array");
    for (std::size_t i = 0; i < audits->size(); ++i) {
      const std::string path = "audits[" + std::to_string(i) + "].";
      const Json& aj = (*audits)[i];
      if (!aj.is_object()) throw Error(ErrorCode::ParseError, "field 'audits[" + std::to_string(i) + "]' must be an object");
      r.unknown_keys(aj, path, {"source", "target"});
      s.audits.push_back({r.string(aj, path, "source", "", true), r.string(aj, path, "target", "", true)});
    }
  }

  for (auto& v : scenario_violations(s)) violations.push_back(std::move(v));
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << violations.size() << " violation(s):";
    for (const auto& v : violations) msg << "\n  " << v;
    throw Error(ErrorCode::ValidationError, msg.str());
  }
  return s;
}

}  // namespace

BinPartition BinEntry::partition() const {
  if (kind == "symmetric") return BinPartition::symmetric(delta_max, n_bins);
  if (kind == "uniform") return BinPartition::uniform(lo, hi, n_bins);
  if (kind == "edges") return BinPartition::from_edges(edges);
  return BinPartition::whole_line();
}

std::vector<std::string> scenario_violations(const Scenario& s) {
  std::vector<std::string> out;
  const auto& lat = s.lattice;
  if (lat.n_sites <= 0 || lat.n_sites % 2 != 0) out.push_back("lattice.n_sites: must be a positive even integer");
  if (!(lat.spacing > 0.0)) out.push_back("lattice.spacing: must be > 0");
  if (!(lat.mass >= 0.0)) out.push_back("lattice.mass: must be >= 0");
  if (lat.mass == 0.0 && !s.exclude_zero_mode) {
    out.push_back("lattice.mass: massless lattice needs exclude_zero_mode = true");
  }
  if (s.n_max < 1) out.push_back("basis.n_max: must be >= 1");
  if (s.dimension_cap < 1) out.push_back("basis.dimension_cap: must be >= 1");
  const int half = lat.n_sites / 2;
  std::set<int> seen;
  for (int n : s.active_modes) {
    if (n < -half || n >= half) out.push_back("basis.active_modes: mode " + std::to_string(n) + " is not on the lattice");
    if (n == 0 && lat.mass == 0.0) out.push_back("basis.active_modes: zero mode is excluded on a massless lattice");
    if (!seen.insert(n).second) out.push_back("basis.active_modes: mode " + std::to_string(n) + " listed twice");
  }
  for (int n : s.excitations) {
    const bool active = s.active_modes.empty() ? (n >= -half && n < half) : seen.count(n) > 0;
    if (!active) out.push_back("initial_state.excitations: mode " + std::to_string(n) + " is not active");
  }

  std::set<std::string> ids;
  const double box_half = 0.5 * lat.n_sites * lat.spacing;
  for (std::size_t i = 0; i < s.devices.size(); ++i) {
    const auto& d = s.devices[i];
    const std::string path = "devices[" + std::to_string(i) + "].";
    if (d.id.empty()) out.push_back(path + "id: must be non-empty");
    if (!ids.insert(d.id).second) out.push_back(path + "id: duplicate device id '" + d.id + "'");
    if (!std::isfinite(d.t)) out.push_back(path + "t: must be finite");
    if (!(d.x_lo < d.x_hi)) out.push_back(path + "x_lo: must be below x_hi");
    if (lat.spacing > 0.0 && (d.x_lo < -box_half || d.x_hi >= box_half)) {
      out.push_back(path + "x_lo: region leaves the lattice box");
    }
    const auto& b = d.bins;
    if (b.kind == "symmetric" && (!(b.delta_max > 0.0) || b.n_bins < 1)) {
      out.push_back(path + "bins: symmetric bins need delta_max > 0 and n_bins >= 1");
    }
    if (b.kind == "uniform" && (!(b.lo < b.hi) || b.n_bins < 1)) {
      out.push_back(path + "bins: uniform bins need lo < hi and n_bins >= 1");
    }
    if (b.kind == "edges") {
      for (std::size_t k = 1; k < b.edges.size(); ++k) {
        if (!(b.edges[k - 1] < b.edges[k])) out.push_back(path + "bins.edges: must be strictly increasing");
      }
    }
    if (!(d.part_bins.width_sigmas > 0.0) || d.part_bins.n_bins < 1) {
      out.push_back(path + "part_bins: need width_sigmas > 0 and n_bins >= 1");
    }
  }
  for (std::size_t i = 0; i < s.audits.size(); ++i) {
    const auto& a = s.audits[i];
    const std::string path = "audits[" + std::to_string(i) + "].";
    if (!ids.count(a.source)) out.push_back(path + "source: unknown device '" + a.source + "'");
    if (!ids.count(a.target)) out.push_back(path + "target: unknown device '" + a.target + "'");
  }
  if (s.tolerances.leakage_threshold < 0.0) out.push_back("tolerances.leakage_threshold: must be >= 0");
  return out;
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::ParseError, origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                           ": malformed JSON");
  }
  return from_json(root);
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path.string());
}

std::string serialize_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

std::string scenario_hash(const Scenario& s) {
  const std::string canonical = to_json(s).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

MeasurementPlan to_plan(const Scenario& s) {
  MeasurementPlan plan;
  plan.lattice = s.lattice;
  plan.zero_mode = s.exclude_zero_mode ? ZeroModePolicy::Exclude : ZeroModePolicy::Reject;
  plan.active_modes = s.active_modes;
  plan.n_max = s.n_max;
  plan.dimension_cap = s.dimension_cap;
  plan.excitations = s.excitations;
  plan.rule = s.rule;
  plan.tolerances = s.tolerances;
  plan.decouple_spacelike = s.decouple_spacelike;
  for (const auto& d : s.devices) {
    DeviceSpec spec;
    spec.region = {d.id, d.t, d.x_lo, d.x_hi};
    if (d.smearing.profile == "bump") {
      spec.smearing = bump_profile(s.lattice, d.id, 0.5 * (d.x_lo + d.x_hi), d.x_hi - d.x_lo);
    } else if (d.smearing.profile == "uniform") {
      spec.smearing = uniform_profile(s.lattice, d.id, d.x_lo, d.x_hi);
    } else {
      spec.smearing = sampled_profile(s.lattice, d.id, d.x_lo, d.x_hi, d.smearing.values);
    }
    spec.bins = d.bins.partition();
    spec.part_bins = d.part_bins;
    spec.selective = d.selective;
    spec.composition = d.composition;
    plan.devices.push_back(std::move(spec));
  }
  return plan;
}

std::vector<std::string> scenario_warnings(const Scenario& s) {
  std::vector<Region> regions;
  for (const auto& d : s.devices) regions.push_back({d.id, d.t, d.x_lo, d.x_hi});
  std::vector<std::string> out = validate_arrangement(regions, s.lattice.box_length()).warnings;
  const MeasurementPlan plan = to_plan(s);
  const ModeTable modes =
      build_mode_table(s.lattice, s.exclude_zero_mode ? ZeroModePolicy::Exclude : ZeroModePolicy::Reject);
  for (const auto& d : plan.devices) {
    const double frac = high_frequency_fraction(s.lattice, d.smearing, modes);
    if (frac > s.high_frequency_max) {
      out.push_back("smearing of '" + d.region.device_id + "' carries " + std::to_string(frac) +
                    " of its weight in the top third of |k|");
    }
  }
  return out;
}

}  // namespace covmeas
