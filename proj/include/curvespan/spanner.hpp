#pragma once

#include <memory>
#include <string>
#include <vector>

#include "curvespan/dyn_order.hpp"
#include "curvespan/graph.hpp"

namespace curvespan {

// Strict mode keeps the source inner-epsilon formula eps' = eps/(c+3) and
// conservative sampling densities; empirical mode (the default) uses
// eps' = eps/8 with calibrated constants and is validated end to end by the
// exact stretch oracle in the test suite.
enum class BuildMode : uint8_t { Empirical, Strict };

BuildMode build_mode_from_string(const std::string& s);
const char* build_mode_name(BuildMode m);

// Resolved construction constants for one (space, d, eps, mode) tuple.
// sep drives the first-separation rule for cell-pair bridges; eps_grid is
// the detour budget spent by a bridge's transverse Steiner grid; eps_inner
// drives covering densities of the adjacency-anchored Steiner sets.
struct G1Params {
  double eps = 0.25;
  double eps_inner = 0.03125;
  double eps_grid = 0.1375;
  double sep = 3.0;
  double grid_extent = 1.15;
  double tube_mult = 2.5;
  int max_qual_cells = 3;
  int max_grid_k = 8;
  double window_mult = 2.05;  // partner window, in units of (sep+1)*diam
  double cap_colat = 0.75;    // spherical polar-cap threshold (radians)
  double cap_region = 0.85;   // net pick radius around a cap point's anchor

  static G1Params resolve(Space space, int d, double eps, BuildMode mode);
};

// Steiner (1+eps)-spanner of the point set under the family's geometry.
// Requires eps in (0, 1/2]. Hyperbolic inputs must fit inside one level-4
// tile of some shift (small-diameter regime); larger spreads belong to the
// dedicated hyperbolic builders. Output is bipartite: every edge joins an
// input vertex to a Steiner vertex.
SpannerGraph build_g1(const std::vector<Point>& pts, double eps,
                      const ShiftFamily& family,
                      BuildMode mode = BuildMode::Empirical);

// Removes Steiner vertices, connecting the input neighbours of each Steiner
// point pairwise. Two-hop input-Steiner-input paths become single edges, so
// the stretch of input pairs never grows. Requires a bipartite graph.
SpannerGraph steiner_to_plain(const SpannerGraph& g);

// Removes Steiner vertices by rerouting: each Steiner vertex s picks its
// closest input neighbour s' (ties to the lowest id) and every other
// neighbour p gains the edge (p, s'). At most one output edge per input
// edge; stretch at most doubles plus O(eps). A Steiner vertex without input
// neighbours is a structural error.
SpannerGraph collapse_bipartite(const SpannerGraph& g);

// Incrementally maintained build_g1. Feeding the same points in any
// insert/erase history yields the same edge set as a from-scratch build of
// the surviving set: every Steiner vertex and edge is a pure function of
// the current point set, refcounted across its generating mechanisms.
// The hyperbolic small-diameter precondition is the caller's obligation
// here; only the static entry point checks it.
class DynamicG1 {
 public:
  DynamicG1(const ShiftFamily& family, double eps,
            BuildMode mode = BuildMode::Empirical);
  ~DynamicG1();
  DynamicG1(const DynamicG1&) = delete;
  DynamicG1& operator=(const DynamicG1&) = delete;

  AdjacencyDelta insert(int id, const Point& p);
  AdjacencyDelta erase(int id);

  int point_count() const;
  // Inputs in ascending id order, Steiner vertices in provenance order,
  // edges canonicalized; repeated calls with equal state give equal bytes.
  SpannerGraph graph() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace curvespan
