#pragma once

// Joint outcome probabilities for an arrangement of field measurements under
// two sequencing rules, and the no-signaling audit between them.
//
//  * Standard: devices in lab-time order, each measured through one projector
//    family of its whole observable (Wigner's formula with Lueders updates).
//  * Intrinsic: devices split into causally homogeneous parts, parts applied
//    layer by layer (S^1, S^2, ...), and each device's reading composed from
//    its parts' readings.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covmeas/causal_geometry.hpp"
#include "covmeas/fock_engine.hpp"
#include "covmeas/lattice_field.hpp"

namespace covmeas {

enum class Composition { Linear, Product, SumOfSquares };
enum class Rule { Standard, Intrinsic };

const char* to_string(Composition c);
const char* to_string(Rule r);
std::optional<Composition> parse_composition(std::string_view name);
std::optional<Rule> parse_rule(std::string_view name);

/// Device reading from its part readings: sum, product or sum of squares.
double compose(Composition c, std::span<const double> part_values);

/// Uniform part partition: n_bins interior bins over +-width_sigmas * sigma_part.
struct PartBinning {
  double width_sigmas = 3.0;
  int n_bins = 6;
};

struct DeviceSpec {
  Region region;
  SmearingFunction smearing;
  BinPartition bins;
  PartBinning part_bins;
  bool selective = true;
  Composition composition = Composition::Linear;
};

struct Tolerances {
  double leakage_threshold = 0.01;
  /// LayerCommutationViolation above this within-layer projector commutator norm.
  double layer_commutator_max = 0.5;
  /// TieGroupNotCommuting above this |c-number commutator| between tied devices.
  double tie_commutator_max = 1e-9;
};

struct MeasurementPlan {
  LatticeSpec lattice;
  ZeroModePolicy zero_mode = ZeroModePolicy::Reject;
  std::vector<int> active_modes;
  int n_max = 3;
  std::size_t dimension_cap = kDefaultDimensionCap;
  std::vector<DeviceSpec> devices;
  /// Mode numbers raised on the vacuum; empty means the vacuum itself.
  std::vector<int> excitations;
  Rule rule = Rule::Intrinsic;
  Tolerances tolerances;
  /// Adjust part smearings so spacelike parts have vanishing c-number
  /// commutators within the active modes (see decouple_smearing).
  bool decouple_spacelike = false;
};

/// Tr[P_n ... P_1 rho P_1 ... P_n]. Throws NotAProjector if any P_i is not
/// idempotent and Hermitian to 1e-8.
double wigner_probability(const Matrix& rho, std::span<const Matrix> projectors);

/// One measurement in a sequence: a spectral family and whether its bin is recorded.
struct SequenceStep {
  const Spectrum* spectrum = nullptr;
  const std::vector<std::size_t>* labels = nullptr;
  std::size_t n_bins = 1;
  bool selective = true;
};

enum class NonselectiveMode {
  Channel,     // apply the Lueders channel to the state
  ExplicitSum  // branch on every bin and sum the branches at the end
};

struct SequenceOptions {
  NonselectiveMode nonselective = NonselectiveMode::Channel;
  unsigned threads = 1;
  /// Branches with smaller weight are dropped.
  double prune_below = 1e-16;
};

/// Joint distribution of the recorded bins (in step order) for the sequence
/// applied to rho. Unrecorded steps after the last recorded one are skipped.
std::map<std::vector<std::size_t>, double> run_sequence(const Matrix& rho, std::span<const SequenceStep> steps,
                                                        const SequenceOptions& options = {});

struct OutcomeTable {
  Rule rule = Rule::Intrinsic;
  /// Selective device ids, in plan order; keys of `probabilities` follow it.
  std::vector<std::string> devices;
  std::map<std::vector<std::size_t>, double> probabilities;
  /// Largest projector commutator between parts that share a layer.
  double layer_residual = 0.0;
  /// Truncation residual bound; see Arrangement::eps_trunc.
  double eps_trunc = 0.0;
  std::vector<std::string> layer_order;

  double total() const;
  /// Marginal over the bins of one selective device.
  std::vector<double> marginal(const std::string& device_id, std::size_t n_bins) const;
};

/// Total-variation distance: half the L1 distance.
double total_variation(std::span<const double> p, std::span<const double> q);

struct PartData {
  DevicePart part;
  std::size_t device = 0;
  SmearingFunction smearing;
  double sigma = 0.0;
  BinPartition bins;
  std::shared_ptr<const Spectrum> spectrum;
  std::vector<std::size_t> labels;
};

struct DeviceData {
  SmearingFunction smearing;  // sum of the part smearings
  std::vector<std::size_t> parts;
  std::shared_ptr<const Spectrum> spectrum;  // standard-rule observable
  std::vector<std::size_t> labels;
};

struct TableOptions {
  SequenceOptions sequence;
  /// Devices left out of the sequence (their geometry still shapes the parts).
  std::vector<std::string> skip_devices;
  /// Replacement order of the parts inside each layer, keyed by layer index.
  std::map<std::size_t, std::vector<std::string>> layer_orders;
  /// When set, only these devices are recorded; the rest are non-selective.
  std::optional<std::vector<std::string>> selective_devices;
};

/// A plan with its geometry resolved and its operators diagonalised.
class Arrangement {
 public:
  explicit Arrangement(MeasurementPlan plan);

  const MeasurementPlan& plan() const { return plan_; }
  const ModeTable& full_modes() const { return full_modes_; }
  const FockBasis& basis() const { return basis_; }
  const std::vector<DevicePart>& parts() const { return parts_; }
  const CausalLayers& layers() const { return layers_; }
  const std::vector<PartData>& part_data() const { return part_data_; }
  const PartData& part(const std::string& part_id) const;
  std::size_t device_index(const std::string& device_id) const;
  /// Parts of device `device` in causal order.
  const std::vector<std::size_t>& device_parts(std::size_t device) const { return devices_[device].parts; }
  const SmearingFunction& device_smearing(std::size_t device) const { return devices_[device].smearing; }
  bool is_split(std::size_t device) const { return devices_[device].parts.size() > 1; }

  const Matrix& initial_density() const { return rho0_; }

  /// Share of each part's Parseval weight outside the active modes.
  std::vector<double> leakage() const;
  /// Largest relative L2 change made by decoupling (0 when disabled).
  double decoupling_change() const { return decoupling_change_; }

  /// Largest within-layer projector commutator norm ||[P_a, Q_b]||.
  double layer_residual() const;
  /// Same norm for one pair of parts.
  double part_commutator(std::size_t a, std::size_t b) const;

  /// Truncation residual: the largest ||[P_a, Q_b] psi|| over spacelike part
  /// pairs, their bins, and the eigenvectors psi of the initial state weighted
  /// by sqrt of their populations. An untruncated field would give zero.
  double eps_trunc() const;

  /// Largest |c-number commutator| over spacelike part pairs in the active modes.
  double max_spacelike_cnumber() const;

  /// Standard-rule observable of a device. A device that is not split is
  /// measured through this same spectrum under the intrinsic rule too.
  const Spectrum& device_spectrum(std::size_t device) const;
  const std::vector<std::size_t>& device_labels(std::size_t device) const;
  /// Observable matrix f(Phi_parts) of a device.
  Matrix device_observable(std::size_t device) const;
  /// Field operator of a part.
  OperatorMatrix part_field(std::size_t part_index) const;

 private:
  MeasurementPlan plan_;
  ModeTable full_modes_;
  FockBasis basis_;
  std::vector<DevicePart> parts_;
  CausalLayers layers_;
  std::vector<PartData> part_data_;
  std::vector<DeviceData> devices_;
  Matrix rho0_;
  double decoupling_change_ = 0.0;
  mutable std::optional<double> eps_trunc_;
  mutable std::optional<double> layer_residual_;
};

OutcomeTable standard_rule_table(const Arrangement& arrangement, const TableOptions& options = {});
OutcomeTable intrinsic_rule_table(const Arrangement& arrangement, const TableOptions& options = {});
/// Dispatches on plan().rule.
OutcomeTable rule_table(const Arrangement& arrangement, Rule rule, const TableOptions& options = {});

/// Device bin from the part bins: compose the part representatives and locate
/// the result among the device bins.
std::size_t compose_outcomes(Composition c, std::span<const BinPartition* const> part_bins,
                             std::span<const std::size_t> part_bin_indices, const BinPartition& device_bins);

/// ||P_c - sum_{c_1 + ... in c} P_{c_1} P_{c_2} ...|| (largest over device bins,
/// spectral norm) for a Linear device split into parts.
double part_factorization_check(const Arrangement& arrangement, std::size_t device);

/// Same check on explicit inputs: the device observable's spectrum and bins
/// against part spectra and part bins.
double part_factorization_residual(const Spectrum& device, const BinPartition& device_bins,
                                   std::span<const Spectrum* const> parts, std::span<const BinPartition* const> part_bins);

/// Estimated probability that composing part-bin representatives places a
/// Linear device reading in a different bin than the device observable would:
/// the vacuum mass within half the summed interior part-bin widths of each
/// device edge, plus the vacuum mass of every part's end bins. Zero for a
/// device that is not split.
double linear_binning_bound(const Arrangement& arrangement, std::size_t device);

struct SignalingReport {
  std::string source;
  std::string target;
  Rule rule = Rule::Intrinsic;
  std::vector<double> with_source;
  std::vector<double> without_source;
  double tv = 0.0;
  double eps_trunc = 0.0;
};

/// TV distance between the target's marginal with the source measured
/// non-selectively and with the source skipped; every other device is
/// non-selective. The parts keep the full arrangement's geometry. Throws
/// NotSpacelike unless source and target are causally unrelated.
SignalingReport signaling_audit(const Arrangement& arrangement, const std::string& source, const std::string& target,
                                Rule rule, const TableOptions& options = {});

}  // namespace covmeas
