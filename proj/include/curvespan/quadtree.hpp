#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "curvespan/geometry.hpp"

namespace curvespan {

// Cell indices use 128-bit integers: hyperbolic x-tile indices scale like
// e^{2 diam}, which overflows 64 bits already at instance diameter ~45.
using ixty = __int128;
using uixty = unsigned __int128;

enum class Order { Less, Equal, Greater };

// Identity of a quadtree cell. Euclidean/spherical cells are identified by
// their per-axis stored indices at `level` (the stored index fixes the box
// together with the shift's level residue). Hyperbolic cells of level >= 0
// are identified by the z-band index zb plus per-axis x-tile indices; levels
// below 0 keep the host level-0 tile in (zb, ix) and add per-axis sub-box
// paths of |level| bits.
struct Cell {
  Space space = Space::Euclidean;
  int chart = 0;  // spherical: 0 = Plus, 1 = Minus, 2 = whole-sphere sentinel
  int shift = 0;
  int level = 0;
  int d = 0;
  // Spherical: the whole-sphere sentinel. Hyperbolic: marks the "no common
  // cell" result of smallest_common_cell / tile_lca; the half-space tiling is
  // a forest, so pairs straddling a shift's z or x boundary plane never meet.
  bool top = false;
  ixty zb = 0;
  std::array<ixty, 3> ix{};
  std::array<int64_t, 3> subx{};
  int64_t subz = 0;

  bool operator==(const Cell& o) const {
    return space == o.space && chart == o.chart && shift == o.shift &&
           level == o.level && d == o.d && top == o.top && zb == o.zb &&
           ix == o.ix && subx == o.subx && subz == o.subz;
  }
  bool operator!=(const Cell& o) const { return !(*this == o); }
};

struct CellHash {
  size_t operator()(const Cell& c) const;
};

// Arbitrary strict total order usable as a std::map key.
struct CellKeyLess {
  bool operator()(const Cell& a, const Cell& b) const;
};

// Axis-aligned extent of a cell in its working chart: Euclidean point
// coordinates, spherical chart coordinates, or hyperbolic x plus [zlo, zhi).
struct CellBox {
  int d = 0;
  Space space = Space::Euclidean;
  int chart = 0;
  std::array<double, 3> xlo{}, xhi{};
  double zlo = 0, zhi = 0;  // hyperbolic only
};

std::string ixty_to_string(ixty v);

class ShiftFamily {
 public:
  static ShiftFamily make(Space space, int d, double delta_cap);

  Space space() const { return space_; }
  int dim() const { return d_; }
  double delta_cap() const { return delta_; }
  int num_shifts() const { return (int)shifts_.size(); }
  int min_level() const;
  int top_level() const;

  // Resolved constants; where the underlying argument gives an explicit
  // value it is used, otherwise these start from generous defaults that the
  // measurement suites validate.
  double c_shift() const { return c_shift_; }
  double c_diam() const { return c_diam_; }
  double c_cover() const { return c_cover_; }
  double c_growth() const { return c_growth_; }

  struct ShiftDesc {
    int i = 0;      // Euclidean/spherical translation index, hyperbolic sigma index
    int j = 0;      // hyperbolic tau index
    int chart = 0;  // spherical working chart; 2 = whole-sphere pseudo-shift
  };
  const ShiftDesc& shift_desc(int s) const { return shifts_[s]; }

  Cell cell_of(const Point& p, int shift, int level) const;
  std::vector<Cell> children(const Cell& c) const;
  // False only for the spherical whole-sphere sentinel, whose "children"
  // (the two chart roots) do not partition it.
  bool children_partition(const Cell& c) const;
  Cell parent(const Cell& c) const;
  Cell smallest_common_cell(const Point& p, const Point& q, int shift) const;
  Order order_compare(const Point& p, const Point& q, int shift) const;
  std::vector<Point> boundary_covering(const Cell& c, double eps) const;
  std::vector<Point> region_covering(const Cell& c, double frac,
                                     double eps_abs) const;
  std::vector<Cell> desc(const Cell& c, double a) const;

  // Hyperbolic same-level tiling tree: the parent of a tile is the tile one
  // z-band up whose x-range contains it.
  Cell tile_parent(const Cell& c) const;
  Cell tile_lca(const Point& p, const Point& q, int shift, int level) const;
  bool tile_contains(const Cell& anc, const Cell& c) const;

  CellBox cell_box(const Cell& c) const;
  bool cell_contains(const Cell& c, const Point& p) const;
  Point cell_center(const Cell& c) const;
  double cell_diam_ub(const Cell& c) const;
  double cell_diam_lb(const Cell& c) const;
  std::string descriptor(const Cell& c) const;

 private:
  Space space_ = Space::Euclidean;
  int d_ = 0;
  double delta_ = 0;
  double c_shift_ = 0, c_diam_ = 0, c_cover_ = 0, c_growth_ = 0;
  std::vector<ShiftDesc> shifts_;

  // Euclidean/spherical grid machinery.
  int D_ = 0;          // residue modulus minus one: shifts are i/(D+1)
  int le_ = 0;         // level where the residue equals the shift index
  int base_level_ = 0; // finest representable level
  std::vector<ixty> w_word_;  // per shift: child-offset bits from base_level up

  // Hyperbolic machinery.
  int Dh_ = 0;
  int mh_ = 0;        // sigma_i shifts log2 z by 2^mh * i / 3
  int ltop_h_ = 0;
  static constexpr int kSubDepth = 62;

  struct Loc;  // per (point, shift) location data
  Loc locate(const Point& p, int shift) const;
  int rho_grid(int level, int shift) const;
  int rho_x(ixty eint, int shift) const;
  ixty grid_index(ixty n, int level, int shift) const;
  ixty eint_cell(int level, ixty zb, int shift) const;
  ixty coarsen_x(ixty a, ixty e_child, ixty e_par, int shift) const;
  int cbit(int level, int shift) const;
  Cell sphere_sentinel(int shift) const;
  Cell hyper_none(int shift) const;
  Cell euclid_like_cell(const Loc& loc, int shift, int level) const;
  Cell hyper_cell(const Loc& loc, int shift, int level) const;
  friend struct ShiftFamilyTestAccess;
};

}  // namespace curvespan
