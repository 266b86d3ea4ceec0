#include "covmeas/measurement_rules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "covmeas/error.hpp"
#include "covmeas/gaussian_analytic.hpp"

namespace covmeas {

namespace {

constexpr double kProjectorTol = 1e-8;
constexpr double kPopulationFloor = 1e-12;

using Key = std::vector<std::size_t>;
using Distribution = std::map<Key, double>;

struct Branch {
  Key key;
  Matrix rho;
};

bool contains(const std::vector<std::string>& ids, const std::string& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes only
// its own output slot, so results do not depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

Matrix power_of_field(Composition c, std::span<const Matrix> fields) {
  switch (c) {
    case Composition::Linear: {
      Matrix out = fields[0];
      for (std::size_t i = 1; i < fields.size(); ++i) out += fields[i];
      return out;
    }
    case Composition::SumOfSquares: {
      Matrix out = fields[0] * fields[0];
      for (std::size_t i = 1; i < fields.size(); ++i) out += fields[i] * fields[i];
      return out;
    }
    case Composition::Product: {
      Matrix out = fields[0];
      for (std::size_t i = 1; i < fields.size(); ++i) out = 0.5 * (out * fields[i] + fields[i] * out);
      return out;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown composition");
}

Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

std::vector<std::vector<Eigen::Index>> columns_by_bin(const std::vector<std::size_t>& labels, std::size_t n_bins) {
  std::vector<std::vector<Eigen::Index>> out(n_bins);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(static_cast<Eigen::Index>(i));
  return out;
}

Matrix columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(Eigen::Index(j)) = m.col(cols[j]);
  return out;
}

}  // namespace

const char* to_string(Composition c) {
  switch (c) {
    case Composition::Linear:
      return "linear";
    case Composition::Product:
      return "product";
    case Composition::SumOfSquares:
      return "sum_of_squares";
  }
  return "?";
}

const char* to_string(Rule r) { return r == Rule::Standard ? "standard" : "intrinsic"; }

std::optional<Composition> parse_composition(std::string_view name) {
  if (name == "linear") return Composition::Linear;
  if (name == "product") return Composition::Product;
  if (name == "sum_of_squares") return Composition::SumOfSquares;
  return std::nullopt;
}

std::optional<Rule> parse_rule(std::string_view name) {
  if (name == "standard") return Rule::Standard;
  if (name == "intrinsic") return Rule::Intrinsic;
  return std::nullopt;
}

double compose(Composition c, std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "composition needs at least one part value");
  switch (c) {
    case Composition::Linear:
      return std::accumulate(v.begin(), v.end(), 0.0);
    case Composition::Product:
      return std::accumulate(v.begin(), v.end(), 1.0, std::multiplies<>());
    case Composition::SumOfSquares:
      return std::accumulate(v.begin(), v.end(), 0.0, [](double s, double x) { return s + x * x; });
  }
  throw Error(ErrorCode::InvalidArgument, "unknown composition");
}

double wigner_probability(const Matrix& rho, std::span<const Matrix> projectors) {
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    const Matrix& p = projectors[i];
    if (p.rows() != rho.rows() || p.cols() != rho.cols()) {
      throw Error(ErrorCode::InvalidArgument, "projector " + std::to_string(i) + " has the wrong dimension");
    }
    const double herm = (p - p.adjoint()).cwiseAbs().maxCoeff();
    const double idem = (p * p - p).cwiseAbs().maxCoeff();
    if (herm > kProjectorTol || idem > kProjectorTol) {
      throw Error(ErrorCode::NotAProjector, "operator " + std::to_string(i) + " is not an orthogonal projector");
    }
  }
  Matrix state = rho;
  for (const auto& p : projectors) state = p * state * p;
  return state.trace().real();
}

namespace {

// psi with rho = psi psi^dagger, if rho is a pure state.
std::optional<Eigen::VectorXcd> pure_vector(const Matrix& rho) {
  Eigen::Index j = 0;
  rho.diagonal().real().maxCoeff(&j);
  const double pjj = rho(j, j).real();
  if (pjj <= 0.0) return std::nullopt;
  const Eigen::VectorXcd psi = rho.col(j) / std::sqrt(pjj);
  if ((rho - psi * psi.adjoint()).cwiseAbs().maxCoeff() > 1e-12) return std::nullopt;
  return psi;
}

struct VectorBranch {
  Key key;
  Eigen::VectorXcd psi;
};

// Pure-state sequence: each branch is P_bk ... P_b1 psi, and the Lueders
// channel on a branch is the sum over its unrecorded children.
Distribution run_pure_sequence(const Eigen::VectorXcd& psi0, std::span<const SequenceStep> steps, std::size_t last,
                               const SequenceOptions& options) {
  std::vector<VectorBranch> branches{{Key{}, psi0}};
  Distribution out;
  for (std::size_t s = 0; s <= last; ++s) {
    const SequenceStep& step = steps[s];
    const Matrix& vecs = step.spectrum->eigenvectors();
    const auto bins = columns_by_bin(*step.labels, step.n_bins);
    std::vector<Eigen::VectorXcd> coeffs(branches.size());
    parallel_for(branches.size(), options.threads,
                 [&](std::size_t i) { coeffs[i] = vecs.adjoint() * branches[i].psi; });
    if (s == last) {
      for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t b = 0; b < step.n_bins; ++b) {
          double p = 0.0;
          for (Eigen::Index c : bins[b]) p += std::norm(coeffs[i](c));
          Key key = branches[i].key;
          if (step.selective) key.push_back(b);
          out[key] += p;
        }
      }
      break;
    }
    std::vector<std::pair<std::size_t, std::size_t>> children;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      for (std::size_t b = 0; b < step.n_bins; ++b) {
        double p = 0.0;
        for (Eigen::Index c : bins[b]) p += std::norm(coeffs[i](c));
        if (p >= options.prune_below) children.emplace_back(i, b);
      }
    }
    std::vector<Matrix> blocks;
    for (const auto& cols : bins) blocks.push_back(columns(vecs, cols));
    std::vector<VectorBranch> next(children.size());
    parallel_for(children.size(), options.threads, [&](std::size_t n) {
      const auto [i, b] = children[n];
      Eigen::VectorXcd w(static_cast<Eigen::Index>(bins[b].size()));
      for (std::size_t c = 0; c < bins[b].size(); ++c) w(Eigen::Index(c)) = coeffs[i](bins[b][c]);
      next[n].key = branches[i].key;
      if (step.selective) next[n].key.push_back(b);
      next[n].psi = blocks[b] * w;
    });
    branches = std::move(next);
  }
  return out;
}

}  // namespace

Distribution run_sequence(const Matrix& rho, std::span<const SequenceStep> steps, const SequenceOptions& options) {
  std::size_t last = 0;
  bool any_recorded = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].selective) {
      last = i;
      any_recorded = true;
    }
  }
  if (!any_recorded) return {{Key{}, rho.trace().real()}};
  if (const auto psi = pure_vector(rho)) return run_pure_sequence(*psi, steps, last, options);

  const bool explicit_sum = options.nonselective == NonselectiveMode::ExplicitSum;
  // With explicit sums every step extends the key; `recorded` marks the slots kept at the end.
  std::vector<bool> recorded;
  std::vector<Branch> branches{{Key{}, rho}};
  Distribution raw;

  for (std::size_t s = 0; s <= last; ++s) {
    const SequenceStep& step = steps[s];
    const auto& labels = *step.labels;
    if (!step.selective && !explicit_sum) {
      parallel_for(branches.size(), options.threads,
                   [&](std::size_t i) { branches[i].rho = dephase(branches[i].rho, *step.spectrum, labels); });
      continue;
    }
    recorded.push_back(step.selective);
    if (s == last) {
      std::vector<std::vector<double>> probs(branches.size());
      parallel_for(branches.size(), options.threads, [&](std::size_t i) {
        probs[i] = bin_probabilities(branches[i].rho, *step.spectrum, labels, step.n_bins);
      });
      for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t b = 0; b < step.n_bins; ++b) {
          Key key = branches[i].key;
          key.push_back(b);
          raw[key] += probs[i][b];
        }
      }
      break;
    }
    std::vector<std::vector<Matrix>> split(branches.size());
    parallel_for(branches.size(), options.threads, [&](std::size_t i) {
      split[i] = project_each(branches[i].rho, *step.spectrum, labels, step.n_bins);
    });
    std::vector<Branch> next;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      for (std::size_t b = 0; b < step.n_bins; ++b) {
        if (split[i][b].trace().real() < options.prune_below) continue;
        Key key = branches[i].key;
        key.push_back(b);
        next.push_back({std::move(key), std::move(split[i][b])});
      }
    }
    branches = std::move(next);
  }

  if (!explicit_sum) return raw;
  Distribution out;
  for (const auto& [key, p] : raw) {
    Key kept;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (recorded[i]) kept.push_back(key[i]);
    }
    out[kept] += p;
  }
  return out;
}

double OutcomeTable::total() const {
  double s = 0.0;
  for (const auto& [key, p] : probabilities) s += p;
  return s;
}

std::vector<double> OutcomeTable::marginal(const std::string& device_id, std::size_t n_bins) const {
  const auto it = std::find(devices.begin(), devices.end(), device_id);
  if (it == devices.end()) throw Error(ErrorCode::InvalidArgument, "device '" + device_id + "' is not recorded");
  const auto slot = static_cast<std::size_t>(it - devices.begin());
  std::vector<double> out(n_bins, 0.0);
  for (const auto& [key, p] : probabilities) out.at(key[slot]) += p;
  return out;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::InvalidArgument, "distributions differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

Arrangement::Arrangement(MeasurementPlan plan)
    : plan_(std::move(plan)),
      full_modes_(build_mode_table((plan_.lattice.validate(), plan_.lattice), plan_.zero_mode)),
      basis_([&] {
        std::vector<int> active = plan_.active_modes;
        if (active.empty()) {
          for (const auto& m : full_modes_.modes()) active.push_back(m.n);
        }
        return build_basis(full_modes_, active, plan_.n_max, plan_.dimension_cap);
      }()) {
  const auto& spec = plan_.lattice;
  std::vector<Region> regions;
  for (const auto& d : plan_.devices) {
    check_region(d.region);
    if (d.smearing.samples.size() != static_cast<std::size_t>(spec.n_sites)) {
      throw Error(ErrorCode::InvalidArgument, "smearing of '" + d.region.device_id + "' has the wrong length");
    }
    regions.push_back(d.region);
  }
  parts_ = split_devices(regions);
  layers_ = layer_parts(parts_);

  devices_.resize(plan_.devices.size());
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    PartData pd;
    pd.part = parts_[i];
    pd.device = device_index(parts_[i].parent);
    devices_[pd.device].parts.push_back(i);
    part_data_.push_back(std::move(pd));
  }
  for (std::size_t d = 0; d < devices_.size(); ++d) {
    const auto& dev = plan_.devices[d];
    for (std::size_t i : devices_[d].parts) {
      part_data_[i].smearing = devices_[d].parts.size() == 1 ? dev.smearing
                                                              : restrict_to_part(spec, dev.smearing, part_data_[i].part);
      part_data_[i].smearing.device_id = part_data_[i].part.part_id;
    }
  }

  const ModeTable& active = basis_.modes();
  if (plan_.decouple_spacelike) {
    // Each spacelike pair is constrained once, on whichever part comes later.
    // Parts with the most spacelike partners go first, which spreads the
    // constraints so no part loses all of its active-mode weight.
    std::vector<std::size_t> degree(part_data_.size(), 0);
    for (std::size_t a = 0; a < part_data_.size(); ++a) {
      for (std::size_t b = 0; b < part_data_.size(); ++b) {
        const auto& pa = part_data_[a];
        const auto& pb = part_data_[b];
        if (a != b && spacelike(pa.part, pb.part)) ++degree[a];
      }
    }
    std::vector<std::size_t> order(part_data_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (degree[a] != degree[b]) return degree[a] > degree[b];
      const auto& pa = part_data_[a].part;
      const auto& pb = part_data_[b].part;
      if (pa.t != pb.t) return pa.t < pb.t;
      return pa.x_lo < pb.x_lo;
    });
    for (std::size_t n = 0; n < order.size(); ++n) {
      PartData& p = part_data_[order[n]];
      std::vector<CommutatorConstraint> constraints;
      for (std::size_t m = 0; m < n; ++m) {
        const PartData& q = part_data_[order[m]];
        if (!spacelike(p.part, q.part)) continue;
        constraints.push_back({&q.smearing, q.part.t});
      }
      if (constraints.empty() || p.smearing.is_zero()) continue;
      SmearingFunction adjusted = decouple_smearing(spec, p.smearing, p.part.t, constraints, active);
      double diff = 0.0;
      double norm = 0.0;
      for (std::size_t j = 0; j < adjusted.samples.size(); ++j) {
        diff += std::pow(adjusted.samples[j] - p.smearing.samples[j], 2);
        norm += std::pow(p.smearing.samples[j], 2);
      }
      decoupling_change_ = std::max(decoupling_change_, std::sqrt(diff / norm));
      p.smearing = std::move(adjusted);
    }
  }

  const FieldOptions field_opts{plan_.tolerances.leakage_threshold};
  std::vector<Matrix> fields(part_data_.size());
  for (std::size_t i = 0; i < part_data_.size(); ++i) {
    PartData& p = part_data_[i];
    fields[i] = field_operator(spec, full_modes_, basis_, p.smearing, p.part.t, field_opts).matrix;
    p.sigma = p.smearing.is_zero() ? 0.0 : std::sqrt(vacuum_variance(spec, p.smearing, active));
  }

  for (std::size_t d = 0; d < devices_.size(); ++d) {
    DeviceData& dd = devices_[d];
    const DeviceSpec& dev = plan_.devices[d];
    dd.smearing = dev.smearing;
    dd.smearing.samples.assign(dev.smearing.samples.size(), 0.0);
    std::vector<Matrix> part_fields;
    for (std::size_t i : dd.parts) {
      for (std::size_t j = 0; j < dd.smearing.samples.size(); ++j) dd.smearing.samples[j] += part_data_[i].smearing.samples[j];
      part_fields.push_back(fields[i]);
    }
    dd.spectrum = std::make_shared<const Spectrum>(hermitian_part(power_of_field(dev.composition, part_fields)));
    dd.labels = dd.spectrum->labels(dev.bins);
    for (std::size_t i : dd.parts) {
      PartData& p = part_data_[i];
      if (dd.parts.size() == 1) {
        p.bins = dev.bins;
        p.spectrum = dd.spectrum;
        p.labels = dd.labels;
        continue;
      }
      p.bins = p.sigma > 0.0 ? BinPartition::symmetric(dev.part_bins.width_sigmas * p.sigma, dev.part_bins.n_bins)
                             : BinPartition::whole_line();
      p.spectrum = std::make_shared<const Spectrum>(fields[i]);
      p.labels = p.spectrum->labels(p.bins);
    }
  }

  if (plan_.excitations.empty()) {
    rho0_ = vacuum_density(basis_);
  } else {
    rho0_ = pure_density(excited_vector(basis_, plan_.excitations));
  }
}

const PartData& Arrangement::part(const std::string& part_id) const {
  for (const auto& p : part_data_) {
    if (p.part.part_id == part_id) return p;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown part '" + part_id + "'");
}

std::size_t Arrangement::device_index(const std::string& device_id) const {
  for (std::size_t i = 0; i < plan_.devices.size(); ++i) {
    if (plan_.devices[i].region.device_id == device_id) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown device '" + device_id + "'");
}

std::vector<double> Arrangement::leakage() const {
  std::vector<double> out;
  for (const auto& p : part_data_) {
    out.push_back(p.smearing.is_zero() ? 0.0 : mode_leakage(plan_.lattice, p.smearing, full_modes_, basis_));
  }
  return out;
}

double Arrangement::part_commutator(std::size_t a, std::size_t b) const {
  return max_projector_commutator(*part_data_[a].spectrum, part_data_[a].labels, *part_data_[b].spectrum,
                                  part_data_[b].labels);
}

double Arrangement::layer_residual() const {
  if (layer_residual_) return *layer_residual_;
  double best = 0.0;
  for (const auto& layer : layers_.layers) {
    for (std::size_t i = 0; i < layer.size(); ++i) {
      for (std::size_t j = i + 1; j < layer.size(); ++j) {
        const auto a = static_cast<std::size_t>(&part(layer[i]) - part_data_.data());
        const auto b = static_cast<std::size_t>(&part(layer[j]) - part_data_.data());
        best = std::max(best, part_commutator(a, b));
      }
    }
  }
  layer_residual_ = best;
  return best;
}

double Arrangement::eps_trunc() const {
  if (eps_trunc_) return *eps_trunc_;
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho0_);
  std::vector<Eigen::VectorXcd> probes;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double w = es.eigenvalues()(i);
    if (w > kPopulationFloor) probes.push_back(std::sqrt(w) * es.eigenvectors().col(i));
  }
  // Bin subspaces of each part: P_b psi = V_b (V_b^dagger psi).
  std::vector<std::vector<Matrix>> subspaces(part_data_.size());
  for (std::size_t i = 0; i < part_data_.size(); ++i) {
    const auto& p = part_data_[i];
    for (const auto& cols : columns_by_bin(p.labels, p.bins.size())) {
      subspaces[i].push_back(columns(p.spectrum->eigenvectors(), cols));
    }
  }
  double best = 0.0;
  for (std::size_t a = 0; a < part_data_.size(); ++a) {
    for (std::size_t b = a + 1; b < part_data_.size(); ++b) {
      if (!spacelike(part_data_[a].part, part_data_[b].part)) continue;
      for (const auto& psi : probes) {
        for (const auto& va : subspaces[a]) {
          if (va.cols() == 0) continue;
          const Eigen::VectorXcd pa = va * (va.adjoint() * psi);
          for (const auto& vb : subspaces[b]) {
            if (vb.cols() == 0) continue;
            const Eigen::VectorXcd qb = vb * (vb.adjoint() * psi);
            const Eigen::VectorXcd comm = va * (va.adjoint() * qb) - vb * (vb.adjoint() * pa);
            best = std::max(best, comm.norm());
          }
        }
      }
    }
  }
  eps_trunc_ = best;
  return best;
}

double Arrangement::max_spacelike_cnumber() const {
  double best = 0.0;
  for (std::size_t a = 0; a < part_data_.size(); ++a) {
    for (std::size_t b = a + 1; b < part_data_.size(); ++b) {
      const auto& pa = part_data_[a];
      const auto& pb = part_data_[b];
      if (!spacelike(pa.part, pb.part)) continue;
      best = std::max(best, std::abs(pauli_jordan(plan_.lattice, pa.smearing, pa.part.t, pb.smearing, pb.part.t,
                                                  basis_.modes())));
    }
  }
  return best;
}

const Spectrum& Arrangement::device_spectrum(std::size_t device) const { return *devices_.at(device).spectrum; }

const std::vector<std::size_t>& Arrangement::device_labels(std::size_t device) const {
  return devices_.at(device).labels;
}

Matrix Arrangement::device_observable(std::size_t device) const {
  std::vector<Matrix> fields;
  for (std::size_t i : devices_.at(device).parts) fields.push_back(part_field(i).matrix);
  return hermitian_part(power_of_field(plan_.devices[device].composition, fields));
}

OperatorMatrix Arrangement::part_field(std::size_t part_index) const {
  const auto& p = part_data_.at(part_index);
  return field_operator(plan_.lattice, full_modes_, basis_, p.smearing, p.part.t,
                        FieldOptions{plan_.tolerances.leakage_threshold});
}

namespace {

bool is_selective(const Arrangement& arr, std::size_t device, const TableOptions& options) {
  const auto& id = arr.plan().devices[device].region.device_id;
  if (options.selective_devices) return contains(*options.selective_devices, id);
  return arr.plan().devices[device].selective;
}

bool is_skipped(const Arrangement& arr, std::size_t device, const TableOptions& options) {
  return contains(options.skip_devices, arr.plan().devices[device].region.device_id);
}

}  // namespace

OutcomeTable standard_rule_table(const Arrangement& arr, const TableOptions& options) {
  const auto& plan = arr.plan();
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < plan.devices.size(); ++d) {
    if (!is_skipped(arr, d, options)) order.push_back(d);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return plan.devices[a].region.t < plan.devices[b].region.t; });

  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size() && plan.devices[order[j]].region.t == plan.devices[order[i]].region.t;
         ++j) {
      const double t = plan.devices[order[i]].region.t;
      const double c = std::abs(pauli_jordan(plan.lattice, arr.device_smearing(order[i]), t,
                                             arr.device_smearing(order[j]), t, arr.basis().modes()));
      if (c > plan.tolerances.tie_commutator_max) {
        throw Error(ErrorCode::TieGroupNotCommuting, "devices '" + plan.devices[order[i]].region.device_id +
                                                         "' and '" + plan.devices[order[j]].region.device_id +
                                                         "' share a time but do not commute");
      }
    }
  }

  OutcomeTable table;
  table.rule = Rule::Standard;
  std::vector<SequenceStep> steps;
  std::vector<std::size_t> recorded_devices;
  for (std::size_t d : order) {
    const bool sel = is_selective(arr, d, options);
    steps.push_back({&arr.device_spectrum(d), &arr.device_labels(d), plan.devices[d].bins.size(), sel});
    table.layer_order.push_back(plan.devices[d].region.device_id);
    if (sel) recorded_devices.push_back(d);
  }
  const Distribution joint = run_sequence(arr.initial_density(), steps, options.sequence);

  // Sequence keys follow time order; table keys follow plan order.
  std::vector<std::size_t> plan_order = recorded_devices;
  std::sort(plan_order.begin(), plan_order.end());
  for (std::size_t d : plan_order) table.devices.push_back(plan.devices[d].region.device_id);
  for (const auto& [key, p] : joint) {
    Key out(plan_order.size(), 0);
    for (std::size_t i = 0; i < key.size(); ++i) {
      const auto pos = std::find(plan_order.begin(), plan_order.end(), recorded_devices[i]) - plan_order.begin();
      out[static_cast<std::size_t>(pos)] = key[i];
    }
    table.probabilities[out] += p;
  }
  table.layer_residual = arr.layer_residual();
  table.eps_trunc = arr.eps_trunc();
  return table;
}

OutcomeTable intrinsic_rule_table(const Arrangement& arr, const TableOptions& options) {
  const auto& plan = arr.plan();
  const auto& pdata = arr.part_data();
  if (arr.layer_residual() > plan.tolerances.layer_commutator_max) {
    throw Error(ErrorCode::LayerCommutationViolation,
                "within-layer commutator " + std::to_string(arr.layer_residual()) + " exceeds the configured limit");
  }

  auto index_of_part = [&](const std::string& id) {
    return static_cast<std::size_t>(&arr.part(id) - pdata.data());
  };

  OutcomeTable table;
  table.rule = Rule::Intrinsic;
  std::vector<SequenceStep> steps;
  std::vector<std::size_t> recorded_parts;
  const auto& layers = arr.layers().layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<std::string> ids = layers[l];
    if (auto it = options.layer_orders.find(l); it != options.layer_orders.end()) {
      std::vector<std::string> a = it->second;
      std::vector<std::string> b = ids;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) throw Error(ErrorCode::InvalidArgument, "layer order " + std::to_string(l) + " is not a permutation");
      ids = it->second;
    }
    for (const auto& id : ids) {
      const std::size_t i = index_of_part(id);
      const PartData& p = pdata[i];
      if (is_skipped(arr, p.device, options)) continue;
      const bool sel = is_selective(arr, p.device, options);
      steps.push_back({p.spectrum.get(), &p.labels, p.bins.size(), sel});
      table.layer_order.push_back(id);
      if (sel) recorded_parts.push_back(i);
    }
  }
  const Distribution joint = run_sequence(arr.initial_density(), steps, options.sequence);

  std::vector<std::size_t> devices;
  for (std::size_t d = 0; d < plan.devices.size(); ++d) {
    if (!is_skipped(arr, d, options) && is_selective(arr, d, options)) {
      devices.push_back(d);
      table.devices.push_back(plan.devices[d].region.device_id);
    }
  }
  for (const auto& [key, p] : joint) {
    Key out;
    for (std::size_t d : devices) {
      if (!arr.is_split(d)) {
        const auto pos = std::find(recorded_parts.begin(), recorded_parts.end(), arr.device_parts(d)[0]);
        out.push_back(key[static_cast<std::size_t>(pos - recorded_parts.begin())]);
        continue;
      }
      std::vector<const BinPartition*> bins;
      std::vector<std::size_t> idx;
      for (std::size_t i : arr.device_parts(d)) {
        const auto pos = std::find(recorded_parts.begin(), recorded_parts.end(), i);
        bins.push_back(&pdata[i].bins);
        idx.push_back(key[static_cast<std::size_t>(pos - recorded_parts.begin())]);
      }
      out.push_back(compose_outcomes(plan.devices[d].composition, bins, idx, plan.devices[d].bins));
    }
    table.probabilities[out] += p;
  }
  table.layer_residual = arr.layer_residual();
  table.eps_trunc = arr.eps_trunc();
  return table;
}

OutcomeTable rule_table(const Arrangement& arr, Rule rule, const TableOptions& options) {
  return rule == Rule::Standard ? standard_rule_table(arr, options) : intrinsic_rule_table(arr, options);
}

std::size_t compose_outcomes(Composition c, std::span<const BinPartition* const> part_bins,
                             std::span<const std::size_t> part_bin_indices, const BinPartition& device_bins) {
  if (part_bins.size() != part_bin_indices.size() || part_bins.empty()) {
    throw Error(ErrorCode::InvalidArgument, "every part needs exactly one resolved bin");
  }
  std::vector<double> values;
  for (std::size_t i = 0; i < part_bins.size(); ++i) values.push_back(part_bins[i]->representative(part_bin_indices[i]));
  const double v = compose(c, values);
  if (!std::isfinite(v)) throw Error(ErrorCode::CompositionBinMismatch, "composed value is not finite");
  return device_bins.locate(v);
}

double part_factorization_residual(const Spectrum& device, const BinPartition& device_bins,
                                   std::span<const Spectrum* const> parts, std::span<const BinPartition* const> part_bins) {
  if (parts.size() != part_bins.size() || parts.empty()) {
    throw Error(ErrorCode::InvalidArgument, "every part needs a bin partition");
  }
  const auto dim = static_cast<Eigen::Index>(device.dimension());
  std::vector<Matrix> sums(device_bins.size(), Matrix::Zero(dim, dim));
  std::vector<std::vector<Matrix>> part_projectors(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t b = 0; b < part_bins[p]->size(); ++b) part_projectors[p].push_back(parts[p]->projector(*part_bins[p], b));
  }
  std::vector<std::size_t> idx(parts.size(), 0);
  bool done = false;
  while (!done) {
    Matrix product = part_projectors[0][idx[0]];
    for (std::size_t p = 1; p < parts.size(); ++p) product = product * part_projectors[p][idx[p]];
    sums[compose_outcomes(Composition::Linear, part_bins, idx, device_bins)] += product;
    done = true;
    for (std::size_t p = parts.size(); p-- > 0;) {
      if (++idx[p] < part_bins[p]->size()) {
        done = false;
        break;
      }
      idx[p] = 0;
    }
  }
  double best = 0.0;
  for (std::size_t b = 0; b < device_bins.size(); ++b) {
    const Matrix diff = device.projector(device_bins, b) - sums[b];
    Eigen::JacobiSVD<Matrix> svd(diff);
    best = std::max(best, svd.singularValues()(0));
  }
  return best;
}

double part_factorization_check(const Arrangement& arr, std::size_t device) {
  const auto& dev = arr.plan().devices.at(device);
  if (dev.composition != Composition::Linear) {
    throw Error(ErrorCode::InvalidArgument, "factorization check needs linear composition");
  }
  std::vector<const Spectrum*> spectra;
  std::vector<const BinPartition*> bins;
  for (std::size_t i : arr.device_parts(device)) {
    spectra.push_back(arr.part_data()[i].spectrum.get());
    bins.push_back(&arr.part_data()[i].bins);
  }
  return part_factorization_residual(arr.device_spectrum(device), dev.bins, spectra, bins);
}

double linear_binning_bound(const Arrangement& arr, std::size_t device) {
  if (!arr.is_split(device)) return 0.0;
  const auto& plan = arr.plan();
  const auto& edges = plan.devices.at(device).bins.edges();
  double half_width = 0.0;
  double tails = 0.0;
  for (std::size_t i : arr.device_parts(device)) {
    const auto& p = arr.part_data()[i];
    if (p.sigma == 0.0 || p.bins.size() < 3) continue;
    half_width += 0.5 * (p.bins.upper(1) - p.bins.lower(1));
    tails += gaussian_mass(p.sigma * p.sigma, -INFINITY, p.bins.upper(0)) +
             gaussian_mass(p.sigma * p.sigma, p.bins.lower(p.bins.size() - 1), INFINITY);
  }
  const double var = vacuum_variance(plan.lattice, arr.device_smearing(device), arr.basis().modes());
  double band = 0.0;
  for (double e : edges) band += gaussian_mass(var, e - half_width, e + half_width);
  return std::min(1.0, band + tails);
}

SignalingReport signaling_audit(const Arrangement& arr, const std::string& source, const std::string& target,
                                Rule rule, const TableOptions& options) {
  const std::size_t x = arr.device_index(source);
  const std::size_t y = arr.device_index(target);
  if (x == y) throw Error(ErrorCode::NotSpacelike, "source and target are the same device");
  for (std::size_t i : arr.device_parts(x)) {
    for (std::size_t j : arr.device_parts(y)) {
      if (!spacelike(arr.part_data()[i].part, arr.part_data()[j].part)) {
        throw Error(ErrorCode::NotSpacelike, "'" + source + "' and '" + target + "' are causally connected");
      }
    }
  }
  TableOptions with = options;
  with.selective_devices = std::vector<std::string>{target};
  TableOptions without = with;
  without.skip_devices.push_back(source);

  const std::size_t n_bins = arr.plan().devices[y].bins.size();
  SignalingReport report;
  report.source = source;
  report.target = target;
  report.rule = rule;
  report.with_source = rule_table(arr, rule, with).marginal(target, n_bins);
  report.without_source = rule_table(arr, rule, without).marginal(target, n_bins);
  report.tv = total_variation(report.with_source, report.without_source);
  report.eps_trunc = arr.eps_trunc();
  return report;
}

}  // namespace covmeas
