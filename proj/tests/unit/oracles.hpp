#pragma once

// Reference computations that share no code with the library: site-space
// double sums instead of mode transforms, explicit Kronecker products instead
// of stride arithmetic, Eigen's own eigensolver, and quadrature.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXcd;

inline double site(int j, int n_sites, double spacing) { return (j - n_sites / 2) * spacing; }

inline double omega(int n, double box, double mass) {
  const double k = 2.0 * std::numbers::pi * n / box;
  return std::sqrt(k * k + mass * mass);
}

// c in [Phi(f, tf), Phi(g, tg)] = i c as a double sum over sites of the mode-summed kernel
// sum_k sin(k (x_i - x_j) - omega dt) / (omega L).
inline double pauli_jordan(const std::vector<double>& f, double tf, const std::vector<double>& g, double tg,
                           int n_sites, double spacing, double mass, const std::vector<int>& modes) {
  const double box = n_sites * spacing;
  const double dt = tf - tg;
  double c = 0.0;
  for (int i = 0; i < n_sites; ++i) {
    if (f[i] == 0.0) continue;
    for (int j = 0; j < n_sites; ++j) {
      if (g[j] == 0.0) continue;
      double kernel = 0.0;
      for (int n : modes) {
        const double k = 2.0 * std::numbers::pi * n / box;
        const double w = omega(n, box, mass);
        kernel += std::sin(k * (site(i, n_sites, spacing) - site(j, n_sites, spacing)) - w * dt) / (w * box);
      }
      c += spacing * spacing * f[i] * g[j] * kernel;
    }
  }
  return c;
}

// sigma^2 = a^2 sum_ij f_i f_j W(x_i - x_j), W(x) = sum_k cos(k x) / (2 omega L).
inline double vacuum_variance(const std::vector<double>& f, int n_sites, double spacing, double mass,
                              const std::vector<int>& modes) {
  const double box = n_sites * spacing;
  double s = 0.0;
  for (int i = 0; i < n_sites; ++i) {
    for (int j = 0; j < n_sites; ++j) {
      double w = 0.0;
      for (int n : modes) {
        const double k = 2.0 * std::numbers::pi * n / box;
        w += std::cos(k * (site(i, n_sites, spacing) - site(j, n_sites, spacing))) / (2.0 * omega(n, box, mass) * box);
      }
      s += spacing * spacing * f[i] * f[j] * w;
    }
  }
  return s;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

// Truncated annihilator on n_max + 1 levels.
inline Matrix annihilator(int n_max) {
  Matrix a = Matrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

// Annihilator of mode `slot` among `n_modes`, first mode most significant.
inline Matrix mode_annihilator(int slot, int n_modes, int n_max) {
  const Matrix id = Matrix::Identity(n_max + 1, n_max + 1);
  Matrix out = Matrix::Identity(1, 1);
  for (int s = 0; s < n_modes; ++s) out = kron(out, s == slot ? annihilator(n_max) : id);
  return out;
}

// Spectral projector onto eigenvalues in [lo, hi) using Eigen's solver.
inline Matrix projector(const Matrix& h, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Matrix p = Matrix::Zero(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const double v = es.eigenvalues()(i);
    if (v >= lo && v < hi) p += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  }
  return p;
}

inline double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

// Composite Simpson rule on [lo, hi] with n (even) panels.
inline double simpson(const std::function<double(double)>& fn, double lo, double hi, int n = 4000) {
  const double h = (hi - lo) / n;
  double s = fn(lo) + fn(hi);
  for (int i = 1; i < n; ++i) s += fn(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_density(double x, double variance) {
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

// Outcome density of X + Y with X ~ N(0, rest) and Y distributed as the field
// quadrature of one excited oscillator of vacuum variance v: y^2/v N(y; 0, v).
inline double one_particle_density(double x, double rest, double v) {
  const double span = 12.0 * std::sqrt(v);
  return simpson([&](double y) { return y * y / v * normal_density(y, v) * normal_density(x - y, rest); }, -span, span,
                 2000);
}

}  // namespace oracle
