#pragma once

// Truncated multimode Fock space: ladder operators, Heisenberg-picture smeared
// field and momentum operators as dense Hermitian matrices, spectral interval
// projectors and the Lueders (non-selective) state update.

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "covmeas/lattice_field.hpp"

namespace covmeas {

using Matrix = Eigen::MatrixXcd;

inline constexpr std::size_t kDefaultDimensionCap = 16384;

/// Product basis over the active modes with occupancies 0..n_max per mode.
/// Flat index = sum_i n_i (n_max+1)^(K-1-i), so the vacuum is index 0 and the
/// first active mode is the most significant digit.
class FockBasis {
 public:
  FockBasis(ModeTable active, int n_max, std::size_t dimension_cap = kDefaultDimensionCap);

  std::size_t dimension() const { return dimension_; }
  std::size_t num_modes() const { return active_.size(); }
  int n_max() const { return n_max_; }
  const ModeTable& modes() const { return active_; }

  /// Slot of mode number `n` among the active modes; throws UnknownMode.
  std::size_t slot_of(int n) const { return active_.index_of(n); }
  std::size_t stride(std::size_t slot) const { return strides_[slot]; }

  std::size_t encode(std::span<const int> occupancy) const;
  std::vector<int> decode(std::size_t index) const;
  int occupancy(std::size_t index, std::size_t slot) const;

 private:
  ModeTable active_;
  int n_max_;
  std::size_t dimension_;
  std::vector<std::size_t> strides_;
};

/// Basis over `active_modes` (mode numbers in `modes`). Throws DimensionCap if
/// (n_max+1)^K exceeds the cap.
FockBasis build_basis(const ModeTable& modes, std::span<const int> active_modes, int n_max,
                      std::size_t dimension_cap = kDefaultDimensionCap);

struct OperatorMatrix {
  Matrix matrix;
  bool hermitian = false;

  /// Largest |M - M^dagger| entry.
  double hermiticity_residual() const;
};

/// Truncated (a, a^dagger) for mode number `mode`; throws UnknownMode.
std::pair<Matrix, Matrix> ladder_matrices(const FockBasis& basis, int mode);

/// Share of f's Parseval weight (over the full table) that lies outside the active modes.
double mode_leakage(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& full_modes,
                    const FockBasis& basis);

struct FieldOptions {
  double leakage_threshold = 0.01;
};

/// Phi(f, t) = sum_{k active} (2 omega_k L)^(-1/2) [conj(f~_k) a_k e^{-i omega_k t} + h.c.].
/// Throws ModeLeakage if mode_leakage exceeds the threshold.
OperatorMatrix field_operator(const LatticeSpec& spec, const ModeTable& full_modes, const FockBasis& basis,
                              const SmearingFunction& f, double t, const FieldOptions& options = {});

/// Pi(f, t) = d Phi(f, t) / dt, built from the same mode sum.
OperatorMatrix momentum_operator(const LatticeSpec& spec, const ModeTable& full_modes, const FockBasis& basis,
                                 const SmearingFunction& f, double t, const FieldOptions& options = {});

/// Normal-ordered free Hamiltonian sum_k omega_k a_k^dagger a_k (diagonal).
Eigen::VectorXd free_hamiltonian_diagonal(const FockBasis& basis);

/// Half-open outcome bins: (-inf, e_0), [e_0, e_1), ..., [e_n, +inf). With no
/// finite edges there is a single bin, the whole line.
class BinPartition {
 public:
  BinPartition() = default;

  /// n_bins uniform interior bins over [-delta_max, delta_max) plus the two end bins.
  static BinPartition symmetric(double delta_max, int n_bins);
  /// n_bins uniform interior bins over [lo, hi) plus the two end bins.
  static BinPartition uniform(double lo, double hi, int n_bins);
  static BinPartition whole_line() { return {}; }
  static BinPartition from_edges(std::vector<double> edges);

  std::size_t size() const { return edges_.size() + 1; }
  double lower(std::size_t bin) const;
  double upper(std::size_t bin) const;
  const std::vector<double>& edges() const { return edges_; }

  /// Bin holding x; a value on an edge belongs to the bin that starts there.
  std::size_t locate(double x) const;

  /// Midpoint of an interior bin. The end bins use the point half an interior
  /// width beyond their finite edge; the whole line uses 0.
  double representative(std::size_t bin) const;

  bool operator==(const BinPartition&) const = default;

 private:
  explicit BinPartition(std::vector<double> edges) : edges_(std::move(edges)) {}
  std::vector<double> edges_;
};

/// Spectral partition helper from the spec's bin_partition(delta_max, n_bins).
inline BinPartition bin_partition(double delta_max, int n_bins) { return BinPartition::symmetric(delta_max, n_bins); }

/// Eigen-decomposition of a Hermitian matrix, reused for every bin projector.
class Spectrum {
 public:
  explicit Spectrum(const Matrix& hermitian);

  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Matrix& eigenvectors() const { return vectors_; }
  std::size_t dimension() const { return static_cast<std::size_t>(values_.size()); }

  /// Bin index of every eigenvalue.
  std::vector<std::size_t> labels(const BinPartition& bins) const;

  /// Sum of eigenprojectors with eigenvalue in [lo, hi).
  Matrix projector(double lo, double hi) const;
  Matrix projector(const BinPartition& bins, std::size_t bin) const;

 private:
  Eigen::VectorXd values_;
  Matrix vectors_;
};

/// Projector onto the spectral subspace of `op` for eigenvalues in [lo, hi).
Matrix interval_projector(const OperatorMatrix& op, double lo, double hi);

/// Density matrix of a pure state.
Matrix pure_density(const Eigen::VectorXcd& psi);

Eigen::VectorXcd vacuum_vector(const FockBasis& basis);

/// |0...0><0...0|.
Matrix vacuum_density(const FockBasis& basis);

/// Normalised a^dagger_{k1} ... a^dagger_{kn} |0>; repeated modes allowed.
Eigen::VectorXcd excited_vector(const FockBasis& basis, std::span<const int> modes);

/// Trace, Hermiticity and positivity checks for a density matrix; returns a
/// description of the first violation, or an empty string.
std::string density_violation(const Matrix& rho, double tol = 1e-10);

/// rho -> sum_b P_b rho P_b. Throws IncompleteFamily unless sum_b P_b = Id to 1e-8.
Matrix lueders_channel(const Matrix& rho, std::span<const Matrix> projectors);

/// Same channel for the spectral family of `spectrum` over `labels`: dephasing
/// between eigenvectors in different bins, done in the eigenbasis.
Matrix dephase(const Matrix& rho, const Spectrum& spectrum, std::span<const std::size_t> labels);

/// P_b rho P_b for every bin b (entries for empty bins are zero matrices).
std::vector<Matrix> project_each(const Matrix& rho, const Spectrum& spectrum, std::span<const std::size_t> labels,
                                 std::size_t n_bins);

/// Tr[P_b rho] for every bin b.
std::vector<double> bin_probabilities(const Matrix& rho, const Spectrum& spectrum,
                                      std::span<const std::size_t> labels, std::size_t n_bins);

/// max over bin pairs of ||[P_a, Q_b]||, evaluated through the principal angles
/// between the two spectral subspaces: ||[P, Q]|| = max_i cos(theta_i) sin(theta_i).
double max_projector_commutator(const Spectrum& a, std::span<const std::size_t> labels_a, const Spectrum& b,
                                std::span<const std::size_t> labels_b);

}  // namespace covmeas
