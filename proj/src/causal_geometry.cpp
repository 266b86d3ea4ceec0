#include "covmeas/causal_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "covmeas/error.hpp"

namespace covmeas {

namespace {

constexpr double kGeomTol = 1e-12;

bool near(double a, double b) { return std::abs(a - b) <= kGeomTol * std::max(1.0, std::abs(a) + std::abs(b)); }

// Closed-interval containment with tolerance.
bool covers(const Interval& outer, const Interval& inner) {
  return outer.lo <= inner.lo + kGeomTol && inner.hi <= outer.hi + kGeomTol;
}

}  // namespace

void check_region(const Region& r) {
  if (!std::isfinite(r.t) || !std::isfinite(r.x_lo) || !std::isfinite(r.x_hi)) {
    throw Error(ErrorCode::DegenerateRegion, "region '" + r.device_id + "' has non-finite coordinates");
  }
  if (!(r.x_lo < r.x_hi)) {
    throw Error(ErrorCode::DegenerateRegion, "region '" + r.device_id + "' needs x_lo < x_hi");
  }
}

std::optional<Interval> forward_cone_section(const Region& r, double t_query) {
  if (!(t_query > r.t)) return std::nullopt;
  const double dt = t_query - r.t;
  return Interval{r.x_lo - dt, r.x_hi + dt};
}

const char* to_string(Precedence p) {
  switch (p) {
    case Precedence::Full: return "Full";
    case Precedence::Partial: return "Partial";
    case Precedence::None: return "None";
  }
  return "None";
}

Precedence precedes(const Region& a, const Region& b) {
  const auto section = forward_cone_section(a, b.t);
  if (!section) return Precedence::None;
  if (covers(*section, b.interval())) return Precedence::Full;
  if (section->lo <= b.x_hi + kGeomTol && b.x_lo <= section->hi + kGeomTol) return Precedence::Partial;
  return Precedence::None;
}

bool DevicePart::contains_point(double x, double tol) const {
  const bool above_lo = lo_closed ? x >= x_lo - tol : x > x_lo + tol;
  const bool below_hi = hi_closed ? x <= x_hi + tol : x < x_hi - tol;
  return above_lo && below_hi;
}

bool spacelike(const DevicePart& p, const DevicePart& q) {
  if (near(p.t, q.t)) return true;
  const double dt = std::abs(p.t - q.t);
  // Signed gap between the intervals and whether the closest endpoints are both owned.
  double gap;
  bool both_closed;
  if (p.x_hi <= q.x_lo) {
    gap = q.x_lo - p.x_hi;
    both_closed = p.hi_closed && q.lo_closed;
  } else if (q.x_hi <= p.x_lo) {
    gap = p.x_lo - q.x_hi;
    both_closed = q.hi_closed && p.lo_closed;
  } else {
    return false;
  }
  if (near(gap, dt)) return !both_closed;
  return gap > dt;
}

std::vector<DevicePart> split_devices(const std::vector<Region>& regions) {
  std::set<std::string> ids;
  for (const auto& r : regions) {
    check_region(r);
    if (!ids.insert(r.device_id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate device id '" + r.device_id + "'");
    }
  }

  std::vector<std::size_t> order(regions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return regions[a].t < regions[b].t; });

  std::vector<DevicePart> parts;
  std::map<std::string, int> depth;

  for (std::size_t idx : order) {
    const Region& dev = regions[idx];
    // Parts of strictly earlier devices; equal-time devices have no cone at dev.t.
    std::vector<std::pair<const DevicePart*, Interval>> cones;
    for (const auto& q : parts) {
      if (auto s = forward_cone_section(q.region(), dev.t)) cones.emplace_back(&q, *s);
    }

    std::vector<double> cuts{dev.x_lo};
    for (const auto& [q, s] : cones) {
      for (double e : {s.lo, s.hi}) {
        if (e > dev.x_lo + kGeomTol && e < dev.x_hi - kGeomTol) cuts.push_back(e);
      }
    }
    cuts.push_back(dev.x_hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), near), cuts.end());

    struct Piece {
      DevicePart part;
      int depth = 0;
    };
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Piece piece;
      piece.part.parent = dev.device_id;
      piece.part.t = dev.t;
      piece.part.x_lo = cuts[i];
      piece.part.x_hi = cuts[i + 1];
      const Interval span{cuts[i], cuts[i + 1]};
      for (const auto& [q, s] : cones) {
        if (covers(s, span)) {
          piece.part.predecessors.push_back(q->part_id);
          piece.depth = std::max(piece.depth, depth.at(q->part_id) + 1);
        }
      }
      std::sort(piece.part.predecessors.begin(), piece.part.predecessors.end());
      pieces.push_back(std::move(piece));
    }

    // The cut point lies on a closed cone boundary: give it to the side inside
    // more cones; on a tie it goes right so no zero-width part is ever formed.
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
      auto& left = pieces[i].part;
      auto& right = pieces[i + 1].part;
      if (left.predecessors.size() > right.predecessors.size()) {
        left.hi_closed = true;
        right.lo_closed = false;
      } else {
        left.hi_closed = false;
        right.lo_closed = true;
      }
    }

    std::vector<std::size_t> naming(pieces.size());
    for (std::size_t i = 0; i < naming.size(); ++i) naming[i] = i;
    std::stable_sort(naming.begin(), naming.end(), [&](std::size_t a, std::size_t b) {
      if (pieces[a].depth != pieces[b].depth) return pieces[a].depth < pieces[b].depth;
      return pieces[a].part.x_lo < pieces[b].part.x_lo;
    });
    for (std::size_t rank = 0; rank < naming.size(); ++rank) {
      auto& piece = pieces[naming[rank]];
      piece.part.part_id =
          pieces.size() == 1 ? dev.device_id : dev.device_id + std::to_string(rank + 1);
    }
    for (auto& piece : pieces) {
      depth[piece.part.part_id] = piece.depth;
      parts.push_back(std::move(piece.part));
    }
  }
  return parts;
}

std::size_t CausalLayers::layer_of(const std::string& part_id) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::find(layers[i].begin(), layers[i].end(), part_id) != layers[i].end()) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "part '" + part_id + "' is not layered");
}

CausalLayers layer_parts(const std::vector<DevicePart>& parts) {
  std::map<std::string, const DevicePart*> by_id;
  for (const auto& p : parts) {
    if (!by_id.emplace(p.part_id, &p).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate part id '" + p.part_id + "'");
    }
  }
  for (const auto& p : parts) {
    for (const auto& pred : p.predecessors) {
      if (!by_id.count(pred)) {
        throw Error(ErrorCode::InvalidArgument, "part '" + p.part_id + "' has unknown predecessor '" + pred + "'");
      }
    }
  }

  // Longest path from a source, with an explicit colouring to catch cycles.
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> mark;
  std::map<std::string, std::size_t> level;
  auto visit = [&](auto&& self, const DevicePart& p) -> std::size_t {
    auto& m = mark[p.part_id];
    if (m == Mark::Black) return level[p.part_id];
    if (m == Mark::Grey) throw Error(ErrorCode::CycleDetected, "precedence cycle through '" + p.part_id + "'");
    m = Mark::Grey;
    std::size_t lv = 0;
    for (const auto& pred : p.predecessors) lv = std::max(lv, self(self, *by_id.at(pred)) + 1);
    mark[p.part_id] = Mark::Black;
    level[p.part_id] = lv;
    return lv;
  };
  std::size_t n_layers = 0;
  for (const auto& p : parts) n_layers = std::max(n_layers, visit(visit, p) + 1);

  CausalLayers out;
  out.layers.resize(n_layers);
  std::vector<std::vector<const DevicePart*>> members(n_layers);
  for (const auto& p : parts) members[level.at(p.part_id)].push_back(&p);
  for (std::size_t i = 0; i < n_layers; ++i) {
    auto& layer = members[i];
    std::sort(layer.begin(), layer.end(), [](const DevicePart* a, const DevicePart* b) {
      if (a->t != b->t) return a->t < b->t;
      if (a->x_lo != b->x_lo) return a->x_lo < b->x_lo;
      return a->part_id < b->part_id;
    });
    for (std::size_t a = 0; a < layer.size(); ++a) {
      for (std::size_t b = a + 1; b < layer.size(); ++b) {
        if (!spacelike(*layer[a], *layer[b])) {
          throw Error(ErrorCode::LayerNotSpacelike,
                      "parts '" + layer[a]->part_id + "' and '" + layer[b]->part_id + "' share layer " +
                          std::to_string(i + 1) + " but are causally connected");
        }
      }
    }
    for (const auto* p : layer) out.layers[i].push_back(p->part_id);
  }
  return out;
}

ArrangementDiagnostics validate_arrangement(const std::vector<Region>& regions, double box_length) {
  ArrangementDiagnostics diag;
  if (regions.empty()) return diag;
  double t_min = regions.front().t;
  double t_max = regions.front().t;
  for (const auto& r : regions) {
    t_min = std::min(t_min, r.t);
    t_max = std::max(t_max, r.t);
  }
  diag.time_span = t_max - t_min;
  for (const auto& r : regions) {
    const double width = (r.x_hi - r.x_lo) + 2.0 * (t_max - r.t);
    diag.max_cone_width = std::max(diag.max_cone_width, width);
    if (width > 0.5 * box_length) {
      std::ostringstream msg;
      msg << "cone of '" << r.device_id << "' reaches width " << width << " by t=" << t_max
          << ", more than half the periodic box (" << 0.5 * box_length << ")";
      diag.warnings.push_back(msg.str());
    }
  }
  return diag;
}

}  // namespace covmeas
