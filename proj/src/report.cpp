#include "covmeas/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace covmeas {

namespace {

using Json = nlohmann::ordered_json;

std::string csv_preamble(const ArtifactHeader& h) {
  std::ostringstream out;
  out << "# schema_version=" << h.schema_version << "\n";
  out << "# scenario_hash=" << h.scenario_hash << "\n";
  if (!h.scenario_name.empty()) out << "# scenario=" << h.scenario_name << "\n";
  return out.str();
}

Json json_header(const ArtifactHeader& h) {
  Json j;
  j["schema_version"] = h.schema_version;
  j["scenario_hash"] = h.scenario_hash;
  j["scenario"] = h.scenario_name;
  return j;
}

// Doubles are written through format_number so JSON and CSV agree digit for digit.
Json number(double x) {
  if (!std::isfinite(x)) return format_number(x);
  return Json::parse(format_number(x));
}

Json numbers(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

ArtifactHeader header_for(const Scenario& s) { return {s.schema_version, scenario_hash(s), s.name}; }

std::string layers_csv(const ArtifactHeader& h, const std::vector<DevicePart>& parts, const CausalLayers& layers) {
  std::ostringstream out;
  out << csv_preamble(h);
  out << "part_id,parent,t,x_lo,x_hi,lo_closed,hi_closed,layer,predecessors\n";
  for (const auto& p : parts) {
    out << p.part_id << ',' << p.parent << ',' << format_number(p.t) << ',' << format_number(p.x_lo) << ','
        << format_number(p.x_hi) << ',' << (p.lo_closed ? 1 : 0) << ',' << (p.hi_closed ? 1 : 0) << ','
        << layers.layer_of(p.part_id) + 1 << ',' << join(p.predecessors, ";") << '\n';
  }
  return out.str();
}

std::string layers_json(const ArtifactHeader& h, const std::vector<DevicePart>& parts, const CausalLayers& layers) {
  Json j = json_header(h);
  Json layer_list = Json::array();
  for (const auto& l : layers.layers) layer_list.push_back(l);
  j["layers"] = std::move(layer_list);
  Json part_list = Json::array();
  for (const auto& p : parts) {
    part_list.push_back({{"part_id", p.part_id},
                         {"parent", p.parent},
                         {"t", number(p.t)},
                         {"x_lo", number(p.x_lo)},
                         {"x_hi", number(p.x_hi)},
                         {"lo_closed", p.lo_closed},
                         {"hi_closed", p.hi_closed},
                         {"predecessors", p.predecessors}});
  }
  j["parts"] = std::move(part_list);
  return j.dump(2) + "\n";
}

std::string outcome_csv(const ArtifactHeader& h, const OutcomeTable& t) {
  std::ostringstream out;
  out << csv_preamble(h);
  out << "# rule=" << to_string(t.rule) << "\n";
  out << "# eps_trunc=" << format_number(t.eps_trunc) << "\n";
  out << "# layer_residual=" << format_number(t.layer_residual) << "\n";
  for (const auto& d : t.devices) out << d << ',';
  out << "probability\n";
  for (const auto& [key, p] : t.probabilities) {
    for (auto b : key) out << b << ',';
    out << format_number(p) << '\n';
  }
  return out.str();
}

std::string outcome_json(const ArtifactHeader& h, const OutcomeTable& t, const Arrangement& arr) {
  Json j = json_header(h);
  j["rule"] = to_string(t.rule);
  j["devices"] = t.devices;
  j["sequence"] = t.layer_order;
  j["eps_trunc"] = number(t.eps_trunc);
  j["layer_residual"] = number(t.layer_residual);
  j["total"] = number(t.total());
  j["basis_dimension"] = arr.basis().dimension();
  j["decoupling_change"] = number(arr.decoupling_change());
  Json bins = Json::object();
  for (const auto& d : t.devices) {
    bins[d] = numbers(arr.plan().devices[arr.device_index(d)].bins.edges());
  }
  j["bin_edges"] = std::move(bins);
  Json leak = Json::object();
  const auto leakage = arr.leakage();
  for (std::size_t i = 0; i < leakage.size(); ++i) leak[arr.part_data()[i].part.part_id] = number(leakage[i]);
  j["mode_leakage"] = std::move(leak);
  Json entries = Json::array();
  for (const auto& [key, p] : t.probabilities) entries.push_back({{"bins", key}, {"probability", number(p)}});
  j["probabilities"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string signaling_csv(const ArtifactHeader& h, const std::vector<SignalingReport>& reports) {
  std::ostringstream out;
  out << csv_preamble(h);
  out << "source,target,rule,tv,eps_trunc\n";
  for (const auto& r : reports) {
    out << r.source << ',' << r.target << ',' << to_string(r.rule) << ',' << format_number(r.tv) << ','
        << format_number(r.eps_trunc) << '\n';
  }
  return out.str();
}

std::string signaling_json(const ArtifactHeader& h, const std::vector<SignalingReport>& reports) {
  Json j = json_header(h);
  Json list = Json::array();
  for (const auto& r : reports) {
    list.push_back({{"source", r.source},
                    {"target", r.target},
                    {"rule", to_string(r.rule)},
                    {"tv", number(r.tv)},
                    {"eps_trunc", number(r.eps_trunc)},
                    {"with_source", numbers(r.with_source)},
                    {"without_source", numbers(r.without_source)}});
  }
  j["reports"] = std::move(list);
  return j.dump(2) + "\n";
}

std::string checks_json(const ArtifactHeader& h, const std::vector<CheckResult>& checks,
                        const std::vector<std::string>& warnings) {
  Json j = json_header(h);
  Json list = Json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    list.push_back({{"name", c.name},
                    {"value", number(c.value)},
                    {"limit", number(c.limit)},
                    {"passed", c.passed},
                    {"detail", c.detail}});
  }
  j["passed"] = all;
  j["checks"] = std::move(list);
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string kernels_csv(const ArtifactHeader& h, const std::vector<KernelRow>& rows) {
  std::ostringstream out;
  out << csv_preamble(h);
  out << "mode,omega,t,A,B,C_abs\n";
  for (const auto& r : rows) {
    out << r.mode << ',' << format_number(r.omega) << ',' << format_number(r.t) << ',';
    if (r.caustic) {
      out << "caustic,caustic,caustic\n";
    } else {
      out << format_number(r.a) << ',' << format_number(r.b) << ',' << format_number(r.c_abs) << '\n';
    }
  }
  return out.str();
}

}  // namespace covmeas
