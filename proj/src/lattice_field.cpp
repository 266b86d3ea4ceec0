#include "covmeas/lattice_field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "covmeas/error.hpp"

namespace covmeas {

namespace {

constexpr double kSiteTol = 1e-9;

std::complex<double> phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

void check_samples(const LatticeSpec& spec, const SmearingFunction& f) {
  if (static_cast<int>(f.samples.size()) != spec.n_sites) {
    throw Error(ErrorCode::SupportOutsideLattice, "smearing '" + f.device_id + "' has " +
                                                      std::to_string(f.samples.size()) + " samples for " +
                                                      std::to_string(spec.n_sites) + " sites");
  }
}

SmearingFunction normalised(SmearingFunction f, double spacing) {
  double integral = 0.0;
  for (double v : f.samples) integral += spacing * v;
  if (integral > 0.0) {
    for (double& v : f.samples) v /= integral;
  }
  return f;
}

}  // namespace

void LatticeSpec::validate() const {
  if (n_sites <= 0 || n_sites % 2 != 0) throw Error(ErrorCode::InvalidArgument, "n_sites must be positive and even");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error(ErrorCode::InvalidArgument, "spacing must be > 0");
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::InvalidArgument, "mass must be >= 0");
}

ModeTable::ModeTable(std::vector<Mode> modes, double box_length)
    : modes_(std::move(modes)), box_length_(box_length) {}

std::size_t ModeTable::index_of(int n) const {
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].n == n) return i;
  }
  throw Error(ErrorCode::UnknownMode, "mode " + std::to_string(n) + " is not in the table");
}

bool ModeTable::has(int n) const {
  return std::any_of(modes_.begin(), modes_.end(), [n](const Mode& m) { return m.n == n; });
}

ModeTable ModeTable::restrict_to(std::span<const int> mode_numbers) const {
  std::vector<Mode> out;
  out.reserve(mode_numbers.size());
  for (int n : mode_numbers) {
    const Mode& m = modes_[index_of(n)];
    if (std::any_of(out.begin(), out.end(), [n](const Mode& o) { return o.n == n; })) {
      throw Error(ErrorCode::InvalidArgument, "mode " + std::to_string(n) + " listed twice");
    }
    out.push_back(m);
  }
  return ModeTable(std::move(out), box_length_);
}

bool ModeTable::closed_under_negation(int n_sites) const {
  for (const auto& m : modes_) {
    const int partner = (m.n == -n_sites / 2) ? m.n : -m.n;
    if (!has(partner)) return false;
  }
  return true;
}

ModeTable build_mode_table(const LatticeSpec& spec, ZeroModePolicy policy) {
  spec.validate();
  const double L = spec.box_length();
  std::vector<Mode> modes;
  modes.reserve(spec.n_sites);
  for (int n = -spec.n_sites / 2; n < spec.n_sites / 2; ++n) {
    const double k = 2.0 * std::numbers::pi * n / L;
    const double omega = std::sqrt(k * k + spec.mass * spec.mass);
    if (n == 0 && spec.mass == 0.0) {
      if (policy == ZeroModePolicy::Reject) {
        throw Error(ErrorCode::MasslessZeroMode, "massless lattice: omega_0 = 0; exclude the zero mode explicitly");
      }
      continue;
    }
    modes.push_back({n, k, omega});
  }
  return ModeTable(std::move(modes), L);
}

std::pair<int, int> SmearingFunction::support() const {
  int begin = static_cast<int>(samples.size());
  int end = 0;
  for (int j = 0; j < static_cast<int>(samples.size()); ++j) {
    if (samples[j] != 0.0) {
      begin = std::min(begin, j);
      end = j + 1;
    }
  }
  if (end == 0) return {0, 0};
  return {begin, end};
}

bool SmearingFunction::is_zero() const {
  return std::all_of(samples.begin(), samples.end(), [](double v) { return v == 0.0; });
}

std::pair<int, int> sites_in(const LatticeSpec& spec, double x_lo, double x_hi) {
  spec.validate();
  const double left = spec.site_position(0);
  const double right = spec.site_position(spec.n_sites - 1);
  if (x_lo < left - kSiteTol || x_hi > right + kSiteTol) {
    throw Error(ErrorCode::SupportOutsideLattice, "interval [" + std::to_string(x_lo) + ", " +
                                                      std::to_string(x_hi) + "] leaves the lattice");
  }
  const int begin = static_cast<int>(std::ceil((x_lo - left) / spec.spacing - kSiteTol));
  const int last = static_cast<int>(std::floor((x_hi - left) / spec.spacing + kSiteTol));
  if (last < begin) {
    throw Error(ErrorCode::SupportOutsideLattice, "interval [" + std::to_string(x_lo) + ", " +
                                                      std::to_string(x_hi) + "] holds no lattice site");
  }
  return {begin, last + 1};
}

SmearingFunction bump_profile(const LatticeSpec& spec, const std::string& device_id, double center,
                              double width) {
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump width must be > 0");
  const auto [begin, end] = sites_in(spec, center - 0.5 * width, center + 0.5 * width);
  SmearingFunction f{device_id, std::vector<double>(spec.n_sites, 0.0)};
  for (int j = begin; j < end; ++j) {
    const double c = std::cos(std::numbers::pi * (spec.site_position(j) - center) / width);
    f.samples[j] = c * c;
  }
  if (f.is_zero()) {
    throw Error(ErrorCode::SupportOutsideLattice, "bump for '" + device_id + "' vanishes on every site");
  }
  return normalised(std::move(f), spec.spacing);
}

SmearingFunction uniform_profile(const LatticeSpec& spec, const std::string& device_id, double x_lo,
                                 double x_hi) {
  const auto [begin, end] = sites_in(spec, x_lo, x_hi);
  SmearingFunction f{device_id, std::vector<double>(spec.n_sites, 0.0)};
  for (int j = begin; j < end; ++j) f.samples[j] = 1.0;
  return normalised(std::move(f), spec.spacing);
}

SmearingFunction sampled_profile(const LatticeSpec& spec, const std::string& device_id, double x_lo,
                                 double x_hi, std::span<const double> values) {
  const auto [begin, end] = sites_in(spec, x_lo, x_hi);
  if (static_cast<int>(values.size()) != end - begin) {
    throw Error(ErrorCode::SupportOutsideLattice, "'" + device_id + "' lists " + std::to_string(values.size()) +
                                                      " samples but its region holds " +
                                                      std::to_string(end - begin) + " sites");
  }
  SmearingFunction f{device_id, std::vector<double>(spec.n_sites, 0.0)};
  std::copy(values.begin(), values.end(), f.samples.begin() + begin);
  return f;
}

SmearingFunction restrict_to_part(const LatticeSpec& spec, const SmearingFunction& f, const DevicePart& part) {
  check_samples(spec, f);
  SmearingFunction out{part.part_id, std::vector<double>(spec.n_sites, 0.0)};
  for (int j = 0; j < spec.n_sites; ++j) {
    if (part.contains_point(spec.site_position(j), kSiteTol * spec.spacing)) out.samples[j] = f.samples[j];
  }
  return out;
}

std::vector<std::complex<double>> smear_transform(const LatticeSpec& spec, const SmearingFunction& f,
                                                  const ModeTable& modes) {
  check_samples(spec, f);
  const auto [begin, end] = f.support();
  std::vector<std::complex<double>> out(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    std::complex<double> acc{0.0, 0.0};
    for (int j = begin; j < end; ++j) acc += f.samples[j] * phase(-modes[i].k * spec.site_position(j));
    out[i] = spec.spacing * acc;
  }
  return out;
}

double parseval_weight(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes) {
  double acc = 0.0;
  for (const auto& a : smear_transform(spec, f, modes)) acc += std::norm(a);
  return acc / modes.box_length();
}

double high_frequency_fraction(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes) {
  const auto amps = smear_transform(spec, f, modes);
  double k_max = 0.0;
  for (const auto& m : modes.modes()) k_max = std::max(k_max, std::abs(m.k));
  double total = 0.0;
  double high = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double w = std::norm(amps[i]);
    total += w;
    if (std::abs(modes[i].k) > (2.0 / 3.0) * k_max) high += w;
  }
  return total > 0.0 ? high / total : 0.0;
}

double pauli_jordan(const LatticeSpec& spec, const SmearingFunction& f, double t_f, const SmearingFunction& g,
                    double t_g, const ModeTable& modes) {
  const auto ft = smear_transform(spec, f, modes);
  const auto gt = smear_transform(spec, g, modes);
  const double dt = t_f - t_g;
  double c = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double w = modes[i].omega;
    c += (std::conj(ft[i]) * gt[i] * phase(-w * dt)).imag() / w;
  }
  return c / modes.box_length();
}

double vacuum_variance(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes) {
  const auto ft = smear_transform(spec, f, modes);
  double acc = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) acc += std::norm(ft[i]) / modes[i].omega;
  return acc / (2.0 * modes.box_length());
}

double vacuum_energy(const ModeTable& modes) {
  double acc = 0.0;
  for (const auto& m : modes.modes()) acc += m.omega;
  return 0.5 * acc;
}

SmearingFunction decouple_smearing(const LatticeSpec& spec, const SmearingFunction& f, double t_f,
                                   std::span<const CommutatorConstraint> constraints, const ModeTable& modes) {
  check_samples(spec, f);
  if (constraints.empty()) return f;
  const auto [begin, end] = f.support();
  const int n_free = end - begin;
  const int n_con = static_cast<int>(constraints.size());
  if (n_free <= n_con) {
    throw Error(ErrorCode::InvalidArgument, "'" + f.device_id + "' has " + std::to_string(n_free) +
                                                " support sites for " + std::to_string(n_con) + " constraints");
  }
  const double L = modes.box_length();

  // Row c holds d pauli_jordan(f, partner_c) / d f_j over the support sites.
  Eigen::MatrixXd rows(n_con, n_free);
  for (int c = 0; c < n_con; ++c) {
    const auto gt = smear_transform(spec, *constraints[c].partner, modes);
    const double dt = t_f - constraints[c].t_partner;
    for (int s = 0; s < n_free; ++s) {
      const double x = spec.site_position(begin + s);
      double acc = 0.0;
      for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto fj = spec.spacing * phase(-modes[i].k * x);
        acc += (std::conj(fj) * gt[i] * phase(-modes[i].omega * dt)).imag() / modes[i].omega;
      }
      rows(c, s) = acc / L;
    }
  }
  Eigen::VectorXd v(n_free);
  for (int s = 0; s < n_free; ++s) v(s) = f.samples[begin + s];
  const Eigen::VectorXd lambda = (rows * rows.transpose()).completeOrthogonalDecomposition().solve(rows * v);
  v -= rows.transpose() * lambda;

  SmearingFunction out = f;
  for (int s = 0; s < n_free; ++s) out.samples[begin + s] = v(s);
  return out;
}

}  // namespace covmeas
