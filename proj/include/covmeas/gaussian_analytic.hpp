#pragma once

// Closed-form vacuum and one-particle outcome distributions of a smeared field,
// and the harmonic eigenstate kernels they are built from. Used as oracles for
// the truncated Fock engine.

#include <complex>

#include "covmeas/lattice_field.hpp"

namespace covmeas {

/// Per-mode kernels of the evolved field eigenstate:
/// A = omega / tan(omega t), B = omega / sin(omega t), |C| = sqrt(omega / (2 pi |sin(omega t)|)).
struct KernelPair {
  double a = 0.0;
  double b = 0.0;
  double c_abs = 0.0;
};

/// Throws CausticSingularity when |sin(omega t)| < 1e-9, InvalidArgument unless omega > 0.
KernelPair kernels(double omega, double t);

/// Standard normal cumulative distribution.
double normal_cdf(double z);

/// Mass of N(0, variance) over [lo, hi); infinite endpoints allowed.
double gaussian_mass(double variance, double lo, double hi);

/// <0| P_[lo,hi)(Phi(f)) |0> = mass of N(0, sigma^2) with sigma^2 = vacuum_variance(f).
/// No time argument: the vacuum outcome distribution is stationary.
double vacuum_projector_expectation(const LatticeSpec& spec, const SmearingFunction& f, double lo, double hi,
                                    const ModeTable& modes);

/// Outcome density of Phi(f) in the one-particle state a_k^dagger |0>:
///   p(x) = N(x; 0, S) [ (S - v)/S + v x^2 / S^2 ],
/// S = sigma^2, v = |f~_k|^2 / (2 omega_k L). It follows from the first
/// J-derivative of the Gaussian generating functional: mode k contributes a
/// squared first Hermite function convolved with the Gaussian of the others.
/// The second moment is S + 2v.
struct OneParticleDensity {
  double total_variance = 0.0;  // S, the vacuum variance
  double mode_weight = 0.0;     // v

  double density(double x) const;
  double mass(double lo, double hi) const;
};

/// Density parameters for mode number `mode` of `modes`; throws UnknownMode.
OneParticleDensity one_particle_density(const LatticeSpec& spec, const SmearingFunction& f, int mode,
                                        const ModeTable& modes);

/// <1_k| P_[lo,hi)(Phi(f)) |1_k>.
double one_particle_projector_expectation(const LatticeSpec& spec, const SmearingFunction& f, double lo, double hi,
                                          int mode, const ModeTable& modes);

/// Amplitude at field value x of the single-oscillator vacuum evolved for time t
/// with the kernel C exp(i/2 [A (x^2 + y^2) - 2 B x y]), the y-integral done in
/// closed form. |amplitude|^2 = sqrt(omega/pi) exp(-omega x^2): the determinant
/// prefactors of the kernel and of the Gaussian integral cancel.
std::complex<double> evolved_vacuum_amplitude(double omega, double t, double x);

}  // namespace covmeas
