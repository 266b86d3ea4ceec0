#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "covmeas/checks.hpp"
#include "covmeas/error.hpp"
#include "covmeas/gaussian_analytic.hpp"
#include "covmeas/report.hpp"
#include "covmeas/scenario.hpp"

namespace fs = std::filesystem;
using namespace covmeas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitTolerance = 3;

struct Options {
  std::string scenario;
  std::string out = ".";
  std::string rule;
  std::uint64_t seed = 0;
  bool acknowledge_warnings = false;
  unsigned threads = 1;
  std::string nonselective = "channel";
  std::string source;
  std::string target;
  std::vector<double> times;
};

bool is_numerical(ErrorCode c) {
  switch (c) {
    case ErrorCode::ModeLeakage:
    case ErrorCode::LayerCommutationViolation:
    case ErrorCode::TieGroupNotCommuting:
    case ErrorCode::IncompleteFamily:
    case ErrorCode::NotAProjector:
    case ErrorCode::CausticSingularity:
      return true;
    default:
      return false;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
  std::cout << "wrote " << path.string() << "\n";
}

Scenario load(const Options& o) {
  Scenario s = parse_scenario(o.scenario);
  if (!o.rule.empty()) s.rule = *parse_rule(o.rule);
  const auto warnings = scenario_warnings(s);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (!warnings.empty() && !o.acknowledge_warnings) {
    throw Error(ErrorCode::ValidationError, "scenario has warnings; rerun with --acknowledge-warnings to proceed");
  }
  fs::create_directories(o.out);
  return s;
}

TableOptions table_options(const Options& o) {
  TableOptions t;
  t.sequence.threads = o.threads;
  t.sequence.nonselective = o.nonselective == "explicit" ? NonselectiveMode::ExplicitSum : NonselectiveMode::Channel;
  return t;
}

int run_order(const Options& o) {
  const Scenario s = load(o);
  std::vector<Region> regions;
  for (const auto& d : s.devices) regions.push_back({d.id, d.t, d.x_lo, d.x_hi});
  const auto parts = split_devices(regions);
  const auto layers = layer_parts(parts);
  for (std::size_t i = 0; i < layers.layers.size(); ++i) {
    std::cout << "S^" << i + 1 << ":";
    for (const auto& p : layers.layers[i]) std::cout << " " << p;
    std::cout << "\n";
  }
  const auto h = header_for(s);
  write_file(fs::path(o.out) / "layers.csv", layers_csv(h, parts, layers));
  write_file(fs::path(o.out) / "layers.json", layers_json(h, parts, layers));
  return kExitOk;
}

int run_simulate(const Options& o) {
  const Scenario s = load(o);
  const Arrangement arr(to_plan(s));
  const OutcomeTable t = rule_table(arr, s.rule, table_options(o));
  const auto h = header_for(s);
  const std::string stem = std::string("outcomes_") + to_string(s.rule);
  write_file(fs::path(o.out) / (stem + ".csv"), outcome_csv(h, t));
  write_file(fs::path(o.out) / (stem + ".json"), outcome_json(h, t, arr));
  std::cout << "rule " << to_string(s.rule) << ", " << t.probabilities.size() << " joint outcomes, total "
            << format_number(t.total()) << ", eps_trunc " << format_number(t.eps_trunc) << "\n";
  return kExitOk;
}

int run_audit(const Options& o) {
  const Scenario s = load(o);
  std::vector<AuditPair> pairs = s.audits;
  if (!o.source.empty() || !o.target.empty()) {
    if (o.source.empty() || o.target.empty()) {
      throw Error(ErrorCode::ValidationError, "--source and --target must be given together");
    }
    pairs = {{o.source, o.target}};
  }
  if (pairs.empty()) throw Error(ErrorCode::ValidationError, "no audit pairs: add 'audits' to the scenario or pass --source/--target");
  const Arrangement arr(to_plan(s));
  std::vector<SignalingReport> reports;
  for (const auto& p : pairs) {
    reports.push_back(signaling_audit(arr, p.source, p.target, s.rule, table_options(o)));
    std::cout << p.source << " -> " << p.target << " (" << to_string(s.rule) << "): TV "
              << format_number(reports.back().tv) << ", eps_trunc " << format_number(reports.back().eps_trunc) << "\n";
  }
  const auto h = header_for(s);
  const std::string stem = std::string("signaling_") + to_string(s.rule);
  write_file(fs::path(o.out) / (stem + ".csv"), signaling_csv(h, reports));
  write_file(fs::path(o.out) / (stem + ".json"), signaling_json(h, reports));
  return kExitOk;
}

int run_validate(const Options& o) {
  const Scenario s = load(o);
  const Arrangement arr(to_plan(s));
  const auto checks = run_checks(s, arr, table_options(o));
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_number(c.value)
              << " limit=" << format_number(c.limit) << "\n";
    ok = ok && c.passed;
  }
  write_file(fs::path(o.out) / "validation.json", checks_json(header_for(s), checks, scenario_warnings(s)));
  return ok ? kExitOk : kExitTolerance;
}

int run_kernels(const Options& o) {
  const Scenario s = load(o);
  const ModeTable modes =
      build_mode_table(s.lattice, s.exclude_zero_mode ? ZeroModePolicy::Exclude : ZeroModePolicy::Reject);
  std::vector<int> active = s.active_modes;
  if (active.empty()) {
    for (const auto& m : modes.modes()) active.push_back(m.n);
  }
  std::vector<double> times = o.times;
  if (times.empty()) {
    std::set<double> distinct;
    for (const auto& d : s.devices) distinct.insert(d.t);
    times.assign(distinct.begin(), distinct.end());
  }
  std::vector<KernelRow> rows;
  for (int n : active) {
    const Mode& m = modes[modes.index_of(n)];
    for (double t : times) {
      KernelRow row{n, m.omega, t};
      try {
        const KernelPair k = kernels(m.omega, t);
        row.a = k.a;
        row.b = k.b;
        row.c_abs = k.c_abs;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CausticSingularity) throw;
        row.caustic = true;
      }
      rows.push_back(row);
    }
  }
  write_file(fs::path(o.out) / "kernels.csv", kernels_csv(header_for(s), rows));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic versus standard ordering of smeared-field measurements"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--rule", o.rule, "Override the scenario rule")->check(CLI::IsMember({"standard", "intrinsic"}));
    sub->add_option("--seed", o.seed, "Reserved; the core is deterministic");
    sub->add_flag("--acknowledge-warnings", o.acknowledge_warnings, "Proceed despite arrangement warnings");
  };
  auto engine = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker threads for outcome branches")->check(CLI::Range(1u, 256u));
    sub->add_option("--nonselective", o.nonselective, "Non-selective update: channel or explicit")
        ->check(CLI::IsMember({"channel", "explicit"}));
  };

  auto* order = app.add_subcommand("order", "Split devices into parts and list the layers S^1, S^2, ...");
  common(order);
  auto* simulate = app.add_subcommand("simulate", "Joint outcome table under the scenario rule");
  common(simulate);
  engine(simulate);
  auto* audit = app.add_subcommand("audit", "Signaling audit between spacelike devices");
  common(audit);
  engine(audit);
  audit->add_option("--source", o.source, "Device measured or skipped");
  audit->add_option("--target", o.target, "Device whose marginal is compared");
  auto* validate = app.add_subcommand("validate", "Run the invariant suite on the scenario");
  common(validate);
  engine(validate);
  auto* kern = app.add_subcommand("kernels", "Kernel table A, B, |C| for the active modes");
  common(kern);
  kern->add_option("--t", o.times, "Times (defaults to the device times)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*order) return run_order(o);
    if (*simulate) return run_simulate(o);
    if (*audit) return run_audit(o);
    if (*validate) return run_validate(o);
    if (*kern) return run_kernels(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? kExitTolerance : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
