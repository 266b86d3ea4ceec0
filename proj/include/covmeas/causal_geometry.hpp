#pragma once

// Light-cone precedence between instantaneous 1+1D device regions, splitting of
// partially connected devices into causally homogeneous parts, and layering of
// the parts into the sequence of option sets S^1, S^2, ...
//
// Units are natural (c = 1). Forward cones are closed: a point on the null
// boundary counts as causally connected.

#include <optional>
#include <string>
#include <vector>

namespace covmeas {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
  bool operator==(const Interval&) const = default;
};

/// A device's spacetime extent: a spatial interval at a single lab time.
struct Region {
  std::string device_id;
  double t = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;

  Interval interval() const { return {x_lo, x_hi}; }
};

/// Throws DegenerateRegion unless x_lo < x_hi and all coordinates are finite.
void check_region(const Region& r);

/// Section of the closed forward cone of `r` at `t_query`; empty unless t_query > r.t.
std::optional<Interval> forward_cone_section(const Region& r, double t_query);

enum class Precedence { None, Partial, Full };

const char* to_string(Precedence p);

/// How `a` precedes `b`: Full if b's interval lies inside a's cone section at
/// b.t, Partial if the two overlap without containment, None otherwise.
Precedence precedes(const Region& a, const Region& b);

/// A causally homogeneous fragment of a device.
///
/// Endpoint closure flags tell which side owns a cut point; a lattice site
/// exactly on a cut belongs to the part whose interval is closed there.
struct DevicePart {
  std::string part_id;
  std::string parent;
  double t = 0.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = true;
  std::vector<std::string> predecessors;

  Region region() const { return {part_id, t, x_lo, x_hi}; }
  bool contains_point(double x, double tol = 1e-12) const;
};

/// Split every device along the cone-section endpoints of all parts of strictly
/// earlier devices. Devices are processed in time order, so the already-split
/// earlier parts make one pass sufficient. Parts of a multi-part device are
/// named `<device><k>` with k ordered by causal depth then position, e.g. the
/// part not connected to anything earlier gets suffix 1.
std::vector<DevicePart> split_devices(const std::vector<Region>& regions);

struct CausalLayers {
  std::vector<std::vector<std::string>> layers;

  /// 0-based index of the layer holding `part_id`; throws InvalidArgument if absent.
  std::size_t layer_of(const std::string& part_id) const;
};

/// Longest-path layering: a part with no predecessors sits in S^1; otherwise
/// one layer after its deepest predecessor. Within each layer the parts are
/// sorted by (t, x_lo) and checked to be pairwise spacelike.
CausalLayers layer_parts(const std::vector<DevicePart>& parts);

/// True if neither of the two parts can influence the other.
bool spacelike(const DevicePart& p, const DevicePart& q);

struct ArrangementDiagnostics {
  std::vector<std::string> warnings;
  double time_span = 0.0;
  double max_cone_width = 0.0;

  bool ok() const { return warnings.empty(); }
};

/// Warn when a cone section over the scenario's time span is wider than half
/// the periodic box; the causal geometry is computed on the infinite line.
ArrangementDiagnostics validate_arrangement(const std::vector<Region>& regions, double box_length);

}  // namespace covmeas
