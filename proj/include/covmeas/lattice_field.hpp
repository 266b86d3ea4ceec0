#pragma once

// Periodic-lattice regularisation of the free Klein-Gordon field in 1+1D.
//
// Sites sit at x_j = (j - n_sites/2) * spacing, j = 0 .. n_sites-1, so the box
// [-L/2, L/2) is centred on the origin. Mode n has momentum k_n = 2 pi n / L
// for n = -n_sites/2 .. n_sites/2 - 1 and the continuum frequency
// omega_n = sqrt(k_n^2 + m^2).

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "covmeas/causal_geometry.hpp"

namespace covmeas {

struct LatticeSpec {
  int n_sites = 64;
  double spacing = 1.0;
  double mass = 1.0;

  double box_length() const { return n_sites * spacing; }
  double site_position(int j) const { return (j - n_sites / 2) * spacing; }
  /// Throws InvalidArgument unless n_sites is positive and even, spacing > 0, mass >= 0.
  void validate() const;
};

struct Mode {
  int n = 0;
  double k = 0.0;
  double omega = 0.0;
};

class ModeTable {
 public:
  ModeTable() = default;
  ModeTable(std::vector<Mode> modes, double box_length);

  const std::vector<Mode>& modes() const { return modes_; }
  std::size_t size() const { return modes_.size(); }
  const Mode& operator[](std::size_t i) const { return modes_[i]; }
  double box_length() const { return box_length_; }

  /// Position of mode number `n` in the table; throws UnknownMode.
  std::size_t index_of(int n) const;
  bool has(int n) const;

  /// Sub-table holding the listed mode numbers, in the order given.
  ModeTable restrict_to(std::span<const int> mode_numbers) const;

  /// True if every mode's partner -n (mod the Nyquist identification) is present.
  bool closed_under_negation(int n_sites) const;

 private:
  std::vector<Mode> modes_;
  double box_length_ = 0.0;
};

enum class ZeroModePolicy { Reject, Exclude };

/// Mode table ordered by mode number. A massless lattice has omega_0 = 0, so
/// the zero mode must be explicitly excluded, otherwise MasslessZeroMode.
ModeTable build_mode_table(const LatticeSpec& spec, ZeroModePolicy policy = ZeroModePolicy::Reject);

/// Real site samples of a test function, one per lattice site.
struct SmearingFunction {
  std::string device_id;
  std::vector<double> samples;

  /// Half-open site range [begin, end) outside which all samples vanish.
  std::pair<int, int> support() const;
  bool is_zero() const;
};

/// Cosine-squared bump filling [center - width/2, center + width/2], scaled so
/// that spacing * sum_j f_j = 1.
SmearingFunction bump_profile(const LatticeSpec& spec, const std::string& device_id, double center,
                              double width);

/// Constant over the sites inside [x_lo, x_hi], scaled so that spacing * sum_j f_j = 1.
SmearingFunction uniform_profile(const LatticeSpec& spec, const std::string& device_id, double x_lo,
                                 double x_hi);

/// Explicit samples for the sites inside [x_lo, x_hi], left to right.
SmearingFunction sampled_profile(const LatticeSpec& spec, const std::string& device_id, double x_lo,
                                 double x_hi, std::span<const double> values);

/// Sites of the lattice lying in [x_lo, x_hi]; throws SupportOutsideLattice if
/// the interval leaves the box or holds no site.
std::pair<int, int> sites_in(const LatticeSpec& spec, double x_lo, double x_hi);

/// Restriction of `f` to the sites owned by `part` (cut points go to the side
/// whose interval is closed there).
SmearingFunction restrict_to_part(const LatticeSpec& spec, const SmearingFunction& f, const DevicePart& part);

/// f~(k) = a * sum_j f_j exp(-i k x_j) for each mode of the table.
std::vector<std::complex<double>> smear_transform(const LatticeSpec& spec, const SmearingFunction& f,
                                                  const ModeTable& modes);

/// (1/L) sum_k |f~(k)|^2 over the table; equals a * sum_j f_j^2 for the full table.
double parseval_weight(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes);

/// Share of the Parseval weight carried by the top third of |k| in the table.
double high_frequency_fraction(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes);

/// c with [Phi(f, t_f), Phi(g, t_g)] = i c, summed over the modes of the table:
///   c = sum_k Im( conj(f~_k) g~_k exp(-i omega_k (t_f - t_g)) ) / (omega_k L).
/// For a table closed under k -> -k this is -sum_k Re(conj(f~_k) g~_k) sin(omega_k dt) / (omega_k L).
double pauli_jordan(const LatticeSpec& spec, const SmearingFunction& f, double t_f, const SmearingFunction& g,
                    double t_g, const ModeTable& modes);

/// sigma^2 = (1/(2L)) sum_k |f~_k|^2 / omega_k, the vacuum variance of Phi(f, t) for any t.
double vacuum_variance(const LatticeSpec& spec, const SmearingFunction& f, const ModeTable& modes);

/// E_0 = (1/2) sum_k omega_k.
double vacuum_energy(const ModeTable& modes);

/// Spacelike partner of a smearing adjustment: zero the commutator with g at time t_g.
struct CommutatorConstraint {
  const SmearingFunction* partner = nullptr;
  double t_partner = 0.0;
};

/// Minimal-norm change of f on its own support so that pauli_jordan(f, t_f,
/// partner, t_partner, modes) vanishes for every constraint. Used to build
/// smearings whose commutators vanish exactly inside a restricted mode set.
/// Throws InvalidArgument if the support has no more sites than constraints.
SmearingFunction decouple_smearing(const LatticeSpec& spec, const SmearingFunction& f, double t_f,
                                   std::span<const CommutatorConstraint> constraints, const ModeTable& modes);

}  // namespace covmeas
