#include "covmeas/fock_engine.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "covmeas/error.hpp"

namespace covmeas {

namespace {

std::complex<double> phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Columns of the eigenvector matrix grouped by bin label.
std::vector<std::vector<Eigen::Index>> group_by_label(std::span<const std::size_t> labels, std::size_t n_bins) {
  std::vector<std::vector<Eigen::Index>> groups(n_bins);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_bins) throw Error(ErrorCode::InvalidArgument, "bin label out of range");
    groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  return groups;
}

Matrix gather_columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]);
  return out;
}

// Sum over active modes of coeff_q * a_q + h.c., with coeff_q supplied per slot.
OperatorMatrix linear_in_ladders(const FockBasis& basis, const std::vector<std::complex<double>>& coeff) {
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  Matrix lower = Matrix::Zero(dim, dim);
  for (std::size_t idx = 0; idx < basis.dimension(); ++idx) {
    for (std::size_t q = 0; q < basis.num_modes(); ++q) {
      const int n = basis.occupancy(idx, q);
      if (n == 0) continue;
      const auto target = static_cast<Eigen::Index>(idx - basis.stride(q));
      lower(target, static_cast<Eigen::Index>(idx)) += coeff[q] * std::sqrt(static_cast<double>(n));
    }
  }
  OperatorMatrix out;
  out.matrix = lower + lower.adjoint();
  out.hermitian = true;
  return out;
}

void check_leakage(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& full_modes,
                   const FockBasis& basis, const FieldOptions& options) {
  const double leak = mode_leakage(spec, f, full_modes, basis);
  if (leak > options.leakage_threshold) {
    std::ostringstream msg;
    msg << "smearing '" << f.device_id << "' puts " << leak << " of its Parseval weight outside the active modes"
        << " (threshold " << options.leakage_threshold << ")";
    throw Error(ErrorCode::ModeLeakage, msg.str());
  }
}

std::vector<std::complex<double>> field_coefficients(const LatticeSpec& spec, const FockBasis& basis,
                                                     const SmearingFunction& f, double t) {
  const ModeTable& modes = basis.modes();
  const auto amps = smear_transform(spec, f, modes);
  std::vector<std::complex<double>> coeff(modes.size());
  for (std::size_t q = 0; q < modes.size(); ++q) {
    const double w = modes[q].omega;
    coeff[q] = std::conj(amps[q]) * phase(-w * t) / std::sqrt(2.0 * w * modes.box_length());
  }
  return coeff;
}

}  // namespace

FockBasis::FockBasis(ModeTable active, int n_max, std::size_t dimension_cap)
    : active_(std::move(active)), n_max_(n_max), dimension_(1) {
  if (n_max < 0) throw Error(ErrorCode::InvalidArgument, "n_max must be >= 0");
  const std::size_t radix = static_cast<std::size_t>(n_max) + 1;
  for (std::size_t i = 0; i < active_.size(); ++i) {
    if (dimension_ > dimension_cap / radix) {
      throw Error(ErrorCode::DimensionCap, "(" + std::to_string(radix) + ")^" + std::to_string(active_.size()) +
                                               " exceeds the dimension cap " + std::to_string(dimension_cap));
    }
    dimension_ *= radix;
  }
  if (dimension_ > dimension_cap) {
    throw Error(ErrorCode::DimensionCap, "dimension exceeds cap " + std::to_string(dimension_cap));
  }
  strides_.assign(active_.size(), 1);
  for (std::size_t i = active_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * radix;
}

std::size_t FockBasis::encode(std::span<const int> occupancy) const {
  if (occupancy.size() != active_.size()) throw Error(ErrorCode::InvalidArgument, "occupancy tuple has wrong length");
  std::size_t idx = 0;
  for (std::size_t q = 0; q < occupancy.size(); ++q) {
    if (occupancy[q] < 0 || occupancy[q] > n_max_) throw Error(ErrorCode::InvalidArgument, "occupancy out of range");
    idx += static_cast<std::size_t>(occupancy[q]) * strides_[q];
  }
  return idx;
}

std::vector<int> FockBasis::decode(std::size_t index) const {
  if (index >= dimension_) throw Error(ErrorCode::InvalidArgument, "basis index out of range");
  std::vector<int> occ(active_.size());
  for (std::size_t q = 0; q < occ.size(); ++q) occ[q] = occupancy(index, q);
  return occ;
}

int FockBasis::occupancy(std::size_t index, std::size_t slot) const {
  return static_cast<int>((index / strides_[slot]) % (static_cast<std::size_t>(n_max_) + 1));
}

FockBasis build_basis(const ModeTable& modes, std::span<const int> active_modes, int n_max,
                      std::size_t dimension_cap) {
  return FockBasis(modes.restrict_to(active_modes), n_max, dimension_cap);
}

double OperatorMatrix::hermiticity_residual() const {
  if (matrix.size() == 0) return 0.0;
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
}

std::pair<Matrix, Matrix> ladder_matrices(const FockBasis& basis, int mode) {
  const std::size_t q = basis.slot_of(mode);
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  Matrix a = Matrix::Zero(dim, dim);
  for (std::size_t idx = 0; idx < basis.dimension(); ++idx) {
    const int n = basis.occupancy(idx, q);
    if (n > 0) a(static_cast<Eigen::Index>(idx - basis.stride(q)), static_cast<Eigen::Index>(idx)) = std::sqrt(double(n));
  }
  Matrix a_dag = a.adjoint();
  return {std::move(a), std::move(a_dag)};
}

double mode_leakage(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& full_modes,
                    const FockBasis& basis) {
  const auto amps = smear_transform(spec, f, full_modes);
  double total = 0.0;
  double kept = 0.0;
  for (std::size_t i = 0; i < full_modes.size(); ++i) {
    const double w = std::norm(amps[i]);
    total += w;
    if (basis.modes().has(full_modes[i].n)) kept += w;
  }
  return total > 0.0 ? std::max(0.0, 1.0 - kept / total) : 0.0;
}

OperatorMatrix field_operator(const LatticeSpec& spec, const ModeTable& full_modes, const FockBasis& basis,
                              const SmearingFunction& f, double t, const FieldOptions& options) {
  check_leakage(spec, f, full_modes, basis, options);
  return linear_in_ladders(basis, field_coefficients(spec, basis, f, t));
}

OperatorMatrix momentum_operator(const LatticeSpec& spec, const ModeTable& full_modes, const FockBasis& basis,
                                 const SmearingFunction& f, double t, const FieldOptions& options) {
  check_leakage(spec, f, full_modes, basis, options);
  auto coeff = field_coefficients(spec, basis, f, t);
  for (std::size_t q = 0; q < coeff.size(); ++q) coeff[q] *= std::complex<double>(0.0, -basis.modes()[q].omega);
  return linear_in_ladders(basis, coeff);
}

Eigen::VectorXd free_hamiltonian_diagonal(const FockBasis& basis) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t idx = 0; idx < basis.dimension(); ++idx) {
    double e = 0.0;
    for (std::size_t q = 0; q < basis.num_modes(); ++q) e += basis.modes()[q].omega * basis.occupancy(idx, q);
    h(static_cast<Eigen::Index>(idx)) = e;
  }
  return h;
}

BinPartition BinPartition::symmetric(double delta_max, int n_bins) {
  if (!(delta_max > 0.0) || !std::isfinite(delta_max)) throw Error(ErrorCode::InvalidArgument, "delta_max must be > 0");
  return uniform(-delta_max, delta_max, n_bins);
}

BinPartition BinPartition::uniform(double lo, double hi, int n_bins) {
  if (n_bins < 1) throw Error(ErrorCode::InvalidArgument, "n_bins must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidArgument, "bin range needs finite lo < hi");
  }
  std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) edges[i] = lo + (hi - lo) * i / n_bins;
  edges.back() = hi;
  return BinPartition(std::move(edges));
}

BinPartition BinPartition::from_edges(std::vector<double> edges) {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i]) || (i > 0 && !(edges[i - 1] < edges[i]))) {
      throw Error(ErrorCode::InvalidArgument, "bin edges must be finite and strictly increasing");
    }
  }
  return BinPartition(std::move(edges));
}

double BinPartition::lower(std::size_t bin) const {
  if (bin >= size()) throw Error(ErrorCode::InvalidArgument, "bin index out of range");
  return bin == 0 ? -std::numeric_limits<double>::infinity() : edges_[bin - 1];
}

double BinPartition::upper(std::size_t bin) const {
  if (bin >= size()) throw Error(ErrorCode::InvalidArgument, "bin index out of range");
  return bin == edges_.size() ? std::numeric_limits<double>::infinity() : edges_[bin];
}

std::size_t BinPartition::locate(double x) const {
  return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), x) - edges_.begin());
}

double BinPartition::representative(std::size_t bin) const {
  if (bin >= size()) throw Error(ErrorCode::InvalidArgument, "bin index out of range");
  if (edges_.empty()) return 0.0;
  const double width = edges_.size() >= 2 ? edges_[1] - edges_[0] : 1.0;
  if (bin == 0) return edges_.front() - 0.5 * width;
  if (bin == edges_.size()) return edges_.back() + 0.5 * width;
  return 0.5 * (edges_[bin - 1] + edges_[bin]);
}

Spectrum::Spectrum(const Matrix& hermitian) {
  if (hermitian.rows() != hermitian.cols()) throw Error(ErrorCode::InvalidArgument, "observable is not square");
  const auto n = static_cast<lapack_int>(hermitian.rows());
  vectors_ = hermitian;
  values_.resize(n);
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, vectors_.data(), std::max<lapack_int>(1, n),
                                         values_.data());
  if (info != 0) throw Error(ErrorCode::InvalidArgument, "eigendecomposition failed (info " + std::to_string(info) + ")");
}

std::vector<std::size_t> Spectrum::labels(const BinPartition& bins) const {
  std::vector<std::size_t> out(dimension());
  for (Eigen::Index i = 0; i < values_.size(); ++i) out[static_cast<std::size_t>(i)] = bins.locate(values_(i));
  return out;
}

Matrix Spectrum::projector(double lo, double hi) const {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (values_(i) >= lo && values_(i) < hi) cols.push_back(i);
  }
  const Matrix v = gather_columns(vectors_, cols);
  return v * v.adjoint();
}

Matrix Spectrum::projector(const BinPartition& bins, std::size_t bin) const {
  return projector(bins.lower(bin), bins.upper(bin));
}

Matrix interval_projector(const OperatorMatrix& op, double lo, double hi) {
  if (op.hermiticity_residual() > 1e-12) throw Error(ErrorCode::InvalidArgument, "interval_projector needs a Hermitian operator");
  return Spectrum(op.matrix).projector(lo, hi);
}

Matrix pure_density(const Eigen::VectorXcd& psi) { return psi * psi.adjoint(); }

Eigen::VectorXcd vacuum_vector(const FockBasis& basis) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.dimension()));
  psi(0) = 1.0;
  return psi;
}

Matrix vacuum_density(const FockBasis& basis) { return pure_density(vacuum_vector(basis)); }

Eigen::VectorXcd excited_vector(const FockBasis& basis, std::span<const int> modes) {
  // a^dagger maps number states to number states, so the normalised result is
  // the number state with the listed occupancies.
  std::vector<int> occ(basis.num_modes(), 0);
  for (int n : modes) {
    const std::size_t q = basis.slot_of(n);
    if (++occ[q] > basis.n_max()) {
      throw Error(ErrorCode::InvalidArgument, "excitation of mode " + std::to_string(n) + " exceeds n_max");
    }
  }
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.dimension()));
  psi(static_cast<Eigen::Index>(basis.encode(occ))) = 1.0;
  return psi;
}

std::string density_violation(const Matrix& rho, double tol) {
  if (rho.rows() != rho.cols()) return "not square";
  const auto tr = rho.trace();
  if (std::abs(tr.real() - 1.0) > tol || std::abs(tr.imag()) > tol) return "trace differs from 1";
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return "not Hermitian";
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tol) return "negative eigenvalue";
  return {};
}

Matrix lueders_channel(const Matrix& rho, std::span<const Matrix> projectors) {
  if (projectors.empty()) throw Error(ErrorCode::IncompleteFamily, "empty projector family");
  Matrix sum = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& p : projectors) sum += p;
  const double miss = (sum - Matrix::Identity(rho.rows(), rho.cols())).cwiseAbs().maxCoeff();
  if (miss > 1e-8) {
    throw Error(ErrorCode::IncompleteFamily, "projectors sum to identity only within " + std::to_string(miss));
  }
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& p : projectors) out.noalias() += p * rho * p;
  return out;
}

Matrix dephase(const Matrix& rho, const Spectrum& spectrum, std::span<const std::size_t> labels) {
  const Matrix& v = spectrum.eigenvectors();
  Matrix x = v.adjoint() * rho * v;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]) x(i, j) = 0.0;
    }
  }
  return v * x * v.adjoint();
}

std::vector<Matrix> project_each(const Matrix& rho, const Spectrum& spectrum, std::span<const std::size_t> labels,
                                 std::size_t n_bins) {
  const Matrix& v = spectrum.eigenvectors();
  const Matrix x = v.adjoint() * rho * v;
  const auto groups = group_by_label(labels, n_bins);
  std::vector<Matrix> out;
  out.reserve(n_bins);
  for (const auto& cols : groups) {
    if (cols.empty()) {
      out.push_back(Matrix::Zero(rho.rows(), rho.cols()));
      continue;
    }
    const Matrix vb = gather_columns(v, cols);
    Matrix xb(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (std::size_t i = 0; i < cols.size(); ++i) xb(Eigen::Index(i), Eigen::Index(j)) = x(cols[i], cols[j]);
    }
    out.push_back(vb * xb * vb.adjoint());
  }
  return out;
}

std::vector<double> bin_probabilities(const Matrix& rho, const Spectrum& spectrum,
                                      std::span<const std::size_t> labels, std::size_t n_bins) {
  const Matrix& v = spectrum.eigenvectors();
  const Matrix rv = rho * v;
  std::vector<double> out(n_bins, 0.0);
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    out[labels[static_cast<std::size_t>(i)]] += v.col(i).dot(rv.col(i)).real();
  }
  return out;
}

double max_projector_commutator(const Spectrum& a, std::span<const std::size_t> labels_a, const Spectrum& b,
                                std::span<const std::size_t> labels_b) {
  std::size_t bins_a = 0;
  std::size_t bins_b = 0;
  for (auto l : labels_a) bins_a = std::max(bins_a, l + 1);
  for (auto l : labels_b) bins_b = std::max(bins_b, l + 1);
  const auto groups_a = group_by_label(labels_a, bins_a);
  const auto groups_b = group_by_label(labels_b, bins_b);
  const Matrix overlap = a.eigenvectors().adjoint() * b.eigenvectors();
  double best = 0.0;
  for (const auto& ra : groups_a) {
    if (ra.empty()) continue;
    for (const auto& cb : groups_b) {
      if (cb.empty()) continue;
      Matrix block(static_cast<Eigen::Index>(ra.size()), static_cast<Eigen::Index>(cb.size()));
      for (std::size_t j = 0; j < cb.size(); ++j) {
        for (std::size_t i = 0; i < ra.size(); ++i) block(Eigen::Index(i), Eigen::Index(j)) = overlap(ra[i], cb[j]);
      }
      Eigen::BDCSVD<Matrix> svd(block);
      for (Eigen::Index s = 0; s < svd.singularValues().size(); ++s) {
        const double c = std::min(1.0, svd.singularValues()(s));
        best = std::max(best, c * std::sqrt(std::max(0.0, 1.0 - c * c)));
      }
    }
  }
  return best;
}

}  // namespace covmeas
