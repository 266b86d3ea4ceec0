#include "covmeas/gaussian_analytic.hpp"

#include <cmath>
#include <numbers>

#include "covmeas/error.hpp"

namespace covmeas {

namespace {

constexpr double kCausticTol = 1e-9;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// z * phi(z), which vanishes at both infinities.
double z_pdf(double z) { return std::isinf(z) ? 0.0 : z * normal_pdf(z); }

}  // namespace

KernelPair kernels(double omega, double t) {
  if (!(omega > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel frequency must be > 0");
  const double s = std::sin(omega * t);
  if (std::abs(s) < kCausticTol) {
    throw Error(ErrorCode::CausticSingularity, "sin(omega t) vanishes at omega=" + std::to_string(omega) +
                                                   ", t=" + std::to_string(t));
  }
  const double c = std::cos(omega * t);
  return {omega * c / s, omega / s, std::sqrt(omega / (2.0 * std::numbers::pi * std::abs(s)))};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double gaussian_mass(double variance, double lo, double hi) {
  if (!(variance > 0.0)) throw Error(ErrorCode::InvalidArgument, "variance must be > 0");
  if (!(lo < hi)) return 0.0;
  const double s = std::sqrt(variance);
  // Upper tails for positive bins keep precision far from the mean.
  if (lo >= 0.0) return 0.5 * (std::erfc(lo / (s * std::numbers::sqrt2)) - std::erfc(hi / (s * std::numbers::sqrt2)));
  return normal_cdf(hi / s) - normal_cdf(lo / s);
}

double vacuum_projector_expectation(const LatticeSpec& spec, const SmearingFunction& f, double lo, double hi,
                                    const ModeTable& modes) {
  if (f.is_zero()) throw Error(ErrorCode::InvalidArgument, "vacuum expectation needs a nonzero smearing");
  return gaussian_mass(vacuum_variance(spec, f, modes), lo, hi);
}

double OneParticleDensity::density(double x) const {
  const double s = total_variance;
  const double z = x / std::sqrt(s);
  return normal_pdf(z) / std::sqrt(s) * ((s - mode_weight) / s + mode_weight * x * x / (s * s));
}

double OneParticleDensity::mass(double lo, double hi) const {
  if (!(lo < hi)) return 0.0;
  const double s = std::sqrt(total_variance);
  const double zl = lo / s;
  const double zh = hi / s;
  const double r = mode_weight / total_variance;
  // Integral of z^2 phi(z) is Phi(z) - z phi(z).
  return gaussian_mass(total_variance, lo, hi) - r * (z_pdf(zh) - z_pdf(zl));
}

OneParticleDensity one_particle_density(const LatticeSpec& spec, const SmearingFunction& f, int mode,
                                        const ModeTable& modes) {
  if (f.is_zero()) throw Error(ErrorCode::InvalidArgument, "one-particle expectation needs a nonzero smearing");
  const std::size_t q = modes.index_of(mode);
  const auto amps = smear_transform(spec, f, modes);
  const double v = std::norm(amps[q]) / (2.0 * modes[q].omega * modes.box_length());
  return {vacuum_variance(spec, f, modes), v};
}

double one_particle_projector_expectation(const LatticeSpec& spec, const SmearingFunction& f, double lo, double hi,
                                          int mode, const ModeTable& modes) {
  return one_particle_density(spec, f, mode, modes).mass(lo, hi);
}

std::complex<double> evolved_vacuum_amplitude(double omega, double t, double x) {
  using namespace std::complex_literals;
  const KernelPair k = kernels(omega, t);
  const std::complex<double> c = std::sqrt(omega / (2.0 * std::numbers::pi * 1i * std::sin(omega * t)));
  const std::complex<double> width = omega - 1i * k.a;
  const std::complex<double> gauss = std::sqrt(2.0 * std::numbers::pi / width);
  return c * std::pow(omega / std::numbers::pi, 0.25) * std::exp(0.5i * k.a * x * x) * gauss *
         std::exp(-k.b * k.b * x * x / (2.0 * width));
}

}  // namespace covmeas
