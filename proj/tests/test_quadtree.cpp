#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "curvespan/errors.hpp"
#include "curvespan/geometry.hpp"
#include "curvespan/quadtree.hpp"
#include "support/oracles.hpp"

using namespace curvespan;
using curvespan::testing::golden_min;
using curvespan::testing::rand_euclid;
using curvespan::testing::rand_hyper;
using curvespan::testing::rand_sphere;
using curvespan::testing::Rng;

namespace {

const ShiftFamily& fam(Space s, int d) {
  static std::map<std::pair<int, int>, ShiftFamily> cache;
  auto key = std::make_pair((int)s, d);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, ShiftFamily::make(s, d, std::exp2(40))).first;
  return it->second;
}

Point ept(std::vector<double> v) {
  return make_point(Space::Euclidean, (int)v.size(), v.data());
}
Point hpt(std::vector<double> xz) {
  return make_point(Space::Hyperbolic, (int)xz.size(), xz.data());
}

bool lex_less(const Point& a, const Point& b) {
  for (int j = 0; j < a.ambient(); ++j) {
    if (a.c[j] < b.c[j]) return true;
    if (a.c[j] > b.c[j]) return false;
  }
  return false;
}

bool sphere_outside(const ShiftFamily& F, const Point& p, int shift) {
  return F.cell_of(p, shift, F.min_level()).top;
}

// Box membership in the cell's working chart, with a relative tolerance per
// axis. Chart roots fall back to cell_contains.
bool in_box(const ShiftFamily& F, const Cell& c, const Point& p,
            double rtol = 1e-9) {
  if (F.space() == Space::Spherical && c.shift == F.num_shifts() - 1)
    return F.cell_contains(c, p);
  CellBox b = F.cell_box(c);
  int d = F.dim();
  double a[3] = {0, 0, 0};
  int nax = d;
  if (F.space() == Space::Euclidean) {
    for (int j = 0; j < d; ++j) a[j] = p.c[j];
  } else if (F.space() == Space::Spherical) {
    stereo_project(p, c.chart == 1 ? Chart::Minus : Chart::Plus, a);
  } else {
    nax = d - 1;
    for (int j = 0; j < nax; ++j) a[j] = p.c[j];
    double zs = std::max(std::abs(b.zlo), std::abs(b.zhi));
    double tz = rtol * zs + 4e-15 * zs;
    if (p.z() < b.zlo - tz || p.z() > b.zhi + tz) return false;
  }
  for (int j = 0; j < nax; ++j) {
    // Box edges are only as precise as a few ulps of their own magnitude,
    // which dominates the box width once cells get tiny at deep levels.
    double t = rtol * (b.xhi[j] - b.xlo[j]) +
               4e-15 * (std::abs(b.xlo[j]) + std::abs(b.xhi[j]));
    if (a[j] < b.xlo[j] - t || a[j] > b.xhi[j] + t) return false;
  }
  return true;
}

Point from_chart(const ShiftFamily& F, const Cell& c, const double* a,
                 double z) {
  int d = F.dim();
  if (F.space() == Space::Euclidean) return make_point(Space::Euclidean, d, a);
  if (F.space() == Space::Spherical)
    return stereo_unproject(d, c.chart == 1 ? Chart::Minus : Chart::Plus, a);
  double v[4];
  for (int j = 0; j < d - 1; ++j) v[j] = a[j];
  v[d - 1] = z;
  return make_point(Space::Hyperbolic, d, v);
}

// Max pairwise distance over box corners plus random interior samples.
// Euclidean and hyperbolic box corners attain the true diameter; spherical
// corners attain it up to the chart distortion the bounds already budget for.
double empirical_diam(const ShiftFamily& F, const Cell& c, Rng& rng,
                      int extra = 40) {
  CellBox b = F.cell_box(c);
  int d = F.dim();
  int nax = F.space() == Space::Hyperbolic ? d - 1 : d;
  std::vector<Point> pts;
  int corners = 1 << nax;
  int zsides = F.space() == Space::Hyperbolic ? 2 : 1;
  for (int zs = 0; zs < zsides; ++zs) {
    double z = zs ? b.zhi : b.zlo;
    for (int r = 0; r < corners; ++r) {
      double a[3] = {0, 0, 0};
      for (int j = 0; j < nax; ++j)
        a[j] = ((r >> j) & 1) ? b.xhi[j] : b.xlo[j];
      pts.push_back(from_chart(F, c, a, z));
    }
  }
  for (int r = 0; r < extra; ++r) {
    double a[3] = {0, 0, 0};
    for (int j = 0; j < nax; ++j) a[j] = rng.uniform(b.xlo[j], b.xhi[j]);
    double z = 1.0;
    if (F.space() == Space::Hyperbolic)
      z = std::exp2(rng.uniform(std::log2(b.zlo), std::log2(b.zhi)));
    pts.push_back(from_chart(F, c, a, z));
  }
  double best = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, dist(pts[i], pts[j]));
  return best;
}

Cell climb(const ShiftFamily& F, Cell c, int k) {
  for (int i = 0; i < k; ++i) c = F.parent(c);
  return c;
}

// Explicit-tree walk: descend from a root cell, ordering sibling groups by
// their position in children(); coincident leaves break ties by coordinate
// then by index. For hyperbolic splits too coarse to enumerate, siblings are
// ordered bottoms-then-top and by x index (exact for one x axis; for two the
// representative comparison is counted as a fallback).
struct DfsOracle {
  const ShiftFamily& F;
  int shift;
  const std::vector<Point>& pts;
  std::vector<int> order;
  int fallbacks = 0;

  void run(std::vector<int> idxs, const Cell& cell) {
    if ((int)idxs.size() <= 1 || cell.level == F.min_level()) {
      std::stable_sort(idxs.begin(), idxs.end(), [&](int x, int y) {
        return lex_less(pts[x], pts[y]);
      });
      for (int i : idxs) order.push_back(i);
      return;
    }
    int cl = cell.level - 1;
    std::map<Cell, std::vector<int>, CellKeyLess> groups;
    for (int i : idxs) groups[F.cell_of(pts[i], shift, cl)].push_back(i);
    if (groups.size() == 1) {
      run(std::move(idxs), groups.begin()->first);
      return;
    }
    std::vector<std::pair<Cell, std::vector<int>>> gs(groups.begin(),
                                                      groups.end());
    auto xorder = [&](const Cell& a, const Cell& b) {
      if (a.zb != b.zb) return a.zb < b.zb;
      for (int j = 0; j < F.dim() - 1; ++j)
        if (a.ix[j] != b.ix[j]) return a.ix[j] < b.ix[j];
      if (a.subz != b.subz) return a.subz < b.subz;
      for (int j = 0; j < F.dim() - 1; ++j)
        if (a.subx[j] != b.subx[j]) return a.subx[j] < b.subx[j];
      return false;
    };
    bool enumerable = true;
    std::vector<Cell> kids;
    try {
      kids = F.children(cell);
    } catch (const UsageError&) {
      enumerable = false;
    }
    if (enumerable) {
      std::map<Cell, int, CellKeyLess> pos;
      for (size_t i = 0; i < kids.size(); ++i) pos[kids[i]] = (int)i;
      for (auto& g : gs) REQUIRE(pos.count(g.first) == 1);
      std::sort(gs.begin(), gs.end(),
                [&](const auto& a, const auto& b) {
                  return pos[a.first] < pos[b.first];
                });
      if (F.space() == Space::Hyperbolic && F.dim() == 2 && cell.level >= 1) {
        // The deep-split sibling rule must agree with enumeration order.
        for (size_t i = 1; i < gs.size(); ++i)
          REQUIRE(xorder(gs[i - 1].first, gs[i].first));
      }
    } else {
      std::sort(gs.begin(), gs.end(), [&](const auto& a, const auto& b) {
        if (a.first.zb != b.first.zb) return a.first.zb < b.first.zb;
        if (F.dim() == 2) return a.first.ix[0] < b.first.ix[0];
        ++fallbacks;
        return F.order_compare(pts[a.second.front()], pts[b.second.front()],
                               shift) == Order::Less;
      });
    }
    for (auto& g : gs) run(std::move(g.second), g.first);
  }
};

std::vector<int> oracle_order(const ShiftFamily& F, int shift,
                              const std::vector<Point>& pts, int* fallbacks) {
  DfsOracle dfs{F, shift, pts};
  std::vector<int> inside, outside;
  for (int i = 0; i < (int)pts.size(); ++i) {
    if (F.space() == Space::Spherical && sphere_outside(F, pts[i], shift))
      outside.push_back(i);
    else
      inside.push_back(i);
  }
  if (!inside.empty()) {
    if (F.space() == Space::Hyperbolic) {
      // The tiling is a forest; group points by tree (any two points of a
      // tree share their level-58 cell) and order trees by band then x.
      std::map<Cell, std::vector<int>, CellKeyLess> trees;
      for (int i : inside) trees[F.cell_of(pts[i], shift, 58)].push_back(i);
      std::vector<std::pair<Cell, std::vector<int>>> ts(trees.begin(),
                                                        trees.end());
      std::sort(ts.begin(), ts.end(), [&](const auto& a, const auto& b) {
        if (a.first.zb != b.first.zb) return a.first.zb < b.first.zb;
        for (int j = 0; j < F.dim() - 1; ++j)
          if (a.first.ix[j] != b.first.ix[j])
            return a.first.ix[j] < b.first.ix[j];
        return false;
      });
      for (auto& t : ts) dfs.run(t.second, t.first);
    } else {
      // Unshifted grids keep the origin lines forever, so these hierarchies
      // are forests as well: trees collect points sharing a level-58 cell
      // and are separated by coordinate sign, which the comparator orders
      // consistently for every cross-tree pair.
      std::map<Cell, std::vector<int>, CellKeyLess> trees;
      for (int i : inside) trees[F.cell_of(pts[i], shift, 58)].push_back(i);
      std::vector<std::pair<Cell, std::vector<int>>> ts(trees.begin(),
                                                        trees.end());
      std::sort(ts.begin(), ts.end(), [&](const auto& a, const auto& b) {
        return F.order_compare(pts[a.second.front()], pts[b.second.front()],
                               shift) == Order::Less;
      });
      for (auto& t : ts) dfs.run(t.second, t.first);
    }
  }
  std::stable_sort(outside.begin(), outside.end(),
                   [&](int a, int b) { return lex_less(pts[a], pts[b]); });
  for (int i : outside) dfs.order.push_back(i);
  if (fallbacks) *fallbacks = dfs.fallbacks;
  return dfs.order;
}

std::vector<int> sorted_order(const ShiftFamily& F, int shift,
                              const std::vector<Point>& pts) {
  std::vector<int> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    Order o = F.order_compare(pts[a], pts[b], shift);
    if (o == Order::Equal) return a < b;
    return o == Order::Less;
  });
  return idx;
}

void check_contiguous(const ShiftFamily& F, int shift,
                      const std::vector<Point>& pts,
                      const std::vector<int>& order,
                      const std::vector<int>& levels) {
  for (int L : levels) {
    std::unordered_map<std::string, int> last;
    for (int pos = 0; pos < (int)order.size(); ++pos) {
      std::string key = F.descriptor(F.cell_of(pts[order[pos]], shift, L));
      auto it = last.find(key);
      if (it != last.end()) REQUIRE(it->second == pos - 1);
      last[key] = pos;
    }
  }
}

Point rand_point(const ShiftFamily& F, Rng& rng) {
  if (F.space() == Space::Euclidean) return rand_euclid(rng, F.dim(), 100.0);
  if (F.space() == Space::Spherical) return rand_sphere(rng, F.dim());
  return rand_hyper(rng, F.dim(), 40.0, 3.0);
}

}  // namespace

TEST_CASE("shift families expose the promised shift counts") {
  for (int d = 1; d <= 3; ++d) {
    const ShiftFamily& F = fam(Space::Euclidean, d);
    int D = 2 * ((d + 1) / 2);
    CHECK(F.num_shifts() == D + 1);
    for (int s = 0; s < F.num_shifts(); ++s) CHECK(F.shift_desc(s).i == s);
  }
  for (int d = 2; d <= 3; ++d) {
    const ShiftFamily& F = fam(Space::Spherical, d);
    CHECK(F.num_shifts() <= 2 * (d + 2) + 1);
    CHECK(F.shift_desc(F.num_shifts() - 1).chart == 2);
    int per_chart[2] = {0, 0};
    for (int s = 0; s + 1 < F.num_shifts(); ++s)
      ++per_chart[F.shift_desc(s).chart];
    CHECK(per_chart[0] == per_chart[1]);
  }
  for (int d = 2; d <= 3; ++d) {
    const ShiftFamily& F = fam(Space::Hyperbolic, d);
    CHECK(F.num_shifts() == 9);
    CHECK(F.num_shifts() <= 3 * d + 3);
    std::set<std::pair<int, int>> seen;
    for (int s = 0; s < F.num_shifts(); ++s)
      seen.insert({F.shift_desc(s).i, F.shift_desc(s).j});
    CHECK((int)seen.size() == 9);
  }
  CHECK(fam(Space::Spherical, 2).delta_cap() <= 3.1504);
  CHECK(fam(Space::Hyperbolic, 2).delta_cap() <= 65536.0);
  CHECK_THROWS_AS(ShiftFamily::make(Space::Euclidean, 2, std::exp2(42)),
                  UsageError);
}

TEST_CASE("euclidean translates form thirds of the cell width") {
  const ShiftFamily& F = fam(Space::Euclidean, 2);
  std::set<int> fracs;
  Point o = ept({0.0, 0.0});
  for (int s = 0; s < F.num_shifts(); ++s) {
    CellBox b = F.cell_box(F.cell_of(o, s, 0));
    double u = b.xlo[0] * std::sqrt(2.0);
    double f = u - std::floor(u);
    int third = (int)std::lround(f * 3.0);
    CHECK(std::abs(f * 3.0 - third) < 1e-9);
    fracs.insert(third % 3);
  }
  CHECK(fracs == std::set<int>({0, 1, 2}));
}

TEST_CASE("euclidean cells anchor at the origin and quarter cleanly") {
  const ShiftFamily& F = fam(Space::Euclidean, 2);
  Point o = ept({0.0, 0.0});
  for (int L : {0, 3, -5, 20}) {
    Cell c = F.cell_of(o, 0, L);
    CellBox b = F.cell_box(c);
    double side = std::ldexp(1.0, L) / std::sqrt(2.0);
    for (int j = 0; j < 2; ++j) {
      CHECK(b.xlo[j] == 0.0);
      CHECK(b.xhi[j] == doctest::Approx(side).epsilon(1e-13));
    }
  }
  Cell c = F.cell_of(ept({0.3, 0.9}), 1, 2);
  std::vector<Cell> kids = F.children(c);
  REQUIRE(kids.size() == 4);
  CellBox pb = F.cell_box(c);
  double half = 0.5 * (pb.xhi[0] - pb.xlo[0]);
  std::set<std::pair<int, int>> quadrants;
  for (const Cell& k : kids) {
    CHECK(F.parent(k) == c);
    CellBox kb = F.cell_box(k);
    int qx = (int)std::lround((kb.xlo[0] - pb.xlo[0]) / half);
    int qy = (int)std::lround((kb.xlo[1] - pb.xlo[1]) / half);
    CHECK(std::abs(kb.xlo[0] - (pb.xlo[0] + qx * half)) < 1e-12 * half);
    CHECK(std::abs(kb.xhi[1] - kb.xlo[1] - half) < 1e-12 * half);
    quadrants.insert({qx, qy});
  }
  CHECK(quadrants.size() == 4);
}

TEST_CASE("one dimensional pair splits at the first level that separates") {
  const ShiftFamily& F = fam(Space::Euclidean, 1);
  Point p = ept({0.2}), q = ept({0.7});
  Cell c = F.smallest_common_cell(p, q, 0);
  REQUIRE(c.level == 0);
  CellBox b = F.cell_box(c);
  CHECK(b.xlo[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.xhi[0] == doctest::Approx(1.0).epsilon(1e-12));
  CellBox rb = F.cell_box(F.parent(c));
  CHECK(rb.xlo[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rb.xhi[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(F.order_compare(p, q, 0) == Order::Less);
  CHECK(F.order_compare(q, p, 0) == Order::Greater);
}

TEST_CASE("whole sphere cell splits into chart roots only") {
  const ShiftFamily& F = fam(Space::Spherical, 2);
  int pseudo = F.num_shifts() - 1;
  double up[3] = {0.0, 0.0, 1.0}, dn[3] = {0.0, 0.0, -1.0};
  Point north = make_point(Space::Spherical, 2, up);
  Point south = make_point(Space::Spherical, 2, dn);
  Cell whole = F.cell_of(north, pseudo, 0);
  REQUIRE(whole.top);
  CHECK(F.cell_of(south, pseudo, -9) == whole);
  CHECK(F.cell_diam_ub(whole) == doctest::Approx(M_PI));
  CHECK_FALSE(F.children_partition(whole));

  std::vector<Cell> roots = F.children(whole);
  REQUIRE(roots.size() == 2);
  CHECK(roots[0].chart == 0);
  CHECK(roots[1].chart == 1);
  // Canonical chart splits by hemisphere; each point lands in exactly one.
  CHECK(F.cell_contains(roots[0], south));
  CHECK_FALSE(F.cell_contains(roots[0], north));
  CHECK(F.cell_contains(roots[1], north));
  CHECK(F.parent(roots[0]) == whole);
  CHECK(F.cell_diam_ub(roots[0]) == doctest::Approx(M_PI));
  CHECK(F.cell_diam_lb(roots[0]) >= 1.0);
  CHECK_THROWS_AS(F.children(roots[0]), UsageError);
  CHECK_THROWS_AS(F.boundary_covering(roots[0], 0.5), UsageError);
  CHECK_THROWS_AS(F.desc(roots[0], 0.5), UsageError);

  // Points outside a regular shift's chart map to the one whole-sphere cell,
  // so every "outside" marker is the same cell and splits into the roots.
  for (int s = 0; s + 1 < F.num_shifts(); ++s) {
    Point pole = F.shift_desc(s).chart == 0 ? north : south;
    Cell sent = F.cell_of(pole, s, 0);
    REQUIRE(sent.top);
    CHECK(sent == whole);
    CHECK(F.cell_diam_ub(sent) == doctest::Approx(M_PI));
  }
}

TEST_CASE("hyperbolic unit tiles sit where stated") {
  const ShiftFamily& F = fam(Space::Hyperbolic, 2);
  Cell c0 = F.cell_of(hpt({0.1, 1.5}), 0, 0);
  CellBox b0 = F.cell_box(c0);
  CHECK(b0.xlo[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b0.xhi[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b0.zlo == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b0.zhi == doctest::Approx(2.0).epsilon(1e-12));

  Cell c1 = F.cell_of(hpt({0.5, 2.5}), 0, 1);
  CellBox b1 = F.cell_box(c1);
  CHECK(b1.xlo[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b1.xhi[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(b1.zlo == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b1.zhi == doctest::Approx(4.0).epsilon(1e-12));

  std::vector<Cell> kids = F.children(c1);
  REQUIRE(kids.size() == 3);
  CellBox kb0 = F.cell_box(kids[0]), kb1 = F.cell_box(kids[1]),
          kb2 = F.cell_box(kids[2]);
  CHECK(kb0.zlo == doctest::Approx(1.0));
  CHECK(kb0.zhi == doctest::Approx(2.0));
  CHECK(kb0.xlo[0] == doctest::Approx(0.0));
  CHECK(kb0.xhi[0] == doctest::Approx(1.0));
  CHECK(kb1.zlo == doctest::Approx(1.0));
  CHECK(kb1.xlo[0] == doctest::Approx(1.0));
  CHECK(kb1.xhi[0] == doctest::Approx(2.0));
  CHECK(kb2.zlo == doctest::Approx(2.0));
  CHECK(kb2.zhi == doctest::Approx(4.0));
  CHECK(kb2.xlo[0] == doctest::Approx(0.0));
  CHECK(kb2.xhi[0] == doctest::Approx(2.0));
  for (const Cell& k : kids) CHECK(F.parent(k) == c1);
}

TEST_CASE("hyperbolic child counts follow the tile doubling rule") {
  const ShiftFamily& F = fam(Space::Hyperbolic, 3);
  Point p = hpt({0.1, 0.2, 1.3});
  for (int L = 1; L <= 4; ++L) {
    Cell c = F.cell_of(p, 0, L);
    int64_t expect = ((int64_t)1 << ((F.dim() - 1) * (1 << (L - 1)))) + 1;
    std::vector<Cell> kids = F.children(c);
    CHECK((int64_t)kids.size() == expect);
  }
  // Sub-tile levels quarter (d=2) or eighth (d=3) the box.
  const ShiftFamily& F2 = fam(Space::Hyperbolic, 2);
  Cell s = F2.cell_of(hpt({0.3, 1.2}), 0, -3);
  std::vector<Cell> kids = F2.children(s);
  REQUIRE(kids.size() == 4);
  CellBox pb = F2.cell_box(s);
  int low_z = 0;
  for (const Cell& k : kids) {
    CHECK(F2.parent(k) == s);
    CellBox kb = F2.cell_box(k);
    CHECK(kb.zlo >= pb.zlo * (1 - 1e-12));
    CHECK(kb.zhi <= pb.zhi * (1 + 1e-12));
    if (kb.zhi < pb.zhi * (1 - 1e-12)) ++low_z;
  }
  CHECK(low_z == 2);
}

TEST_CASE("hyperbolic tiles have the stated normalized shape") {
  const ShiftFamily& F2 = fam(Space::Hyperbolic, 2);
  const ShiftFamily& F3 = fam(Space::Hyperbolic, 3);
  Rng rng(11);
  for (const ShiftFamily* Fp : {&F2, &F3}) {
    const ShiftFamily& F = *Fp;
    for (int L = 0; L <= 6; ++L) {
      for (int rep = 0; rep < 4; ++rep) {
        Point p = rand_hyper(rng, F.dim(), 20.0, 2.5);
        int s = rng.integer(0, F.num_shifts() - 1);
        CellBox b = F.cell_box(F.cell_of(p, s, L));
        double h = std::log2(b.zhi / b.zlo);
        CHECK(h == doctest::Approx(std::ldexp(1.0, L)).epsilon(1e-9));
        double w = (b.xhi[0] - b.xlo[0]) * std::sqrt((double)(F.dim() - 1)) /
                   b.zlo;
        CHECK(w ==
              doctest::Approx(std::ldexp(1.0, (1 << L) - 1)).epsilon(1e-9));
        if (F.dim() == 3)
          CHECK(b.xhi[1] - b.xlo[1] ==
                doctest::Approx(b.xhi[0] - b.xlo[0]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identical points share the finest cell and compare equal") {
  Rng rng(13);
  for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
    for (int d = (sp == Space::Euclidean ? 1 : 2); d <= 3; ++d) {
      const ShiftFamily& F = fam(sp, d);
      for (int rep = 0; rep < 8; ++rep) {
        Point p = rand_point(F, rng);
        int s = rng.integer(0, F.num_shifts() - 1);
        if (sp == Space::Spherical && sphere_outside(F, p, s)) continue;
        Cell c = F.smallest_common_cell(p, p, s);
        CHECK(c.level == F.min_level());
        CHECK(F.cell_contains(c, p));
        CHECK(F.order_compare(p, p, s) == Order::Equal);
      }
    }
  }
}

TEST_CASE("cell_of agrees with parent, children, and containment") {
  Rng rng(17);
  for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
    for (int d = (sp == Space::Euclidean ? 1 : 2); d <= 3; ++d) {
      const ShiftFamily& F = fam(sp, d);
      // Below roughly -34 the box edges round to a handful of coordinate
      // ulps, so double-precision membership stops being meaningful.
      int lo = std::max(F.min_level() + 1, -34);
      int hi = sp == Space::Hyperbolic ? 4 : std::min(F.top_level(), 8);
      for (int rep = 0; rep < 400; ++rep) {
        Point p = rand_point(F, rng);
        int s = rng.integer(0, F.num_shifts() - 1);
        if (sp == Space::Spherical) {
          if (s == F.num_shifts() - 1) s = 0;
          if (sphere_outside(F, p, s)) continue;
        }
        int L = rng.integer(lo, hi);
        Cell c = F.cell_of(p, s, L);
        REQUIRE(c.level == L);
        CHECK(F.cell_contains(c, p));
        CHECK(in_box(F, c, p));
        CHECK(F.parent(c) == F.cell_of(p, s, L + 1));
        if (!(sp == Space::Hyperbolic && d == 3 && L + 1 > 4)) {
          std::vector<Cell> kids = F.children(F.cell_of(p, s, L + 1));
          int matches = 0;
          for (const Cell& k : kids) matches += (k == c);
          CHECK(matches == 1);
        }
        Point mid = F.cell_center(c);
        // Boxes that poke past the chart window can center outside it.
        if (!(sp == Space::Spherical && sphere_outside(F, mid, s)))
          CHECK(F.cell_contains(c, mid));
      }
    }
  }
  const ShiftFamily& FE = fam(Space::Euclidean, 2);
  CHECK_THROWS_AS(FE.cell_of(hpt({0.1, 1.0}), 0, 0), UsageError);
}

TEST_CASE("every point lands in exactly one child") {
  Rng rng(19);
  struct Cfg {
    Space sp;
    int d, n, lo, hi;
  };
  std::vector<Cfg> cfgs = {{Space::Euclidean, 1, 8000, -40, 8},
                           {Space::Euclidean, 2, 16000, -40, 8},
                           {Space::Euclidean, 3, 8000, -40, 8},
                           {Space::Spherical, 2, 12000, -40, 4},
                           {Space::Spherical, 3, 8000, -40, 4},
                           {Space::Hyperbolic, 2, 16000, -40, 4},
                           {Space::Hyperbolic, 3, 12000, -40, 3}};
  for (const Cfg& cf : cfgs) {
    const ShiftFamily& F = fam(cf.sp, cf.d);
    for (int rep = 0; rep < cf.n; ++rep) {
      Point p = rand_point(F, rng);
      int s = rng.integer(0, F.num_shifts() - 1);
      if (cf.sp == Space::Spherical) {
        if (s == F.num_shifts() - 1) s = 0;
        if (sphere_outside(F, p, s)) continue;
      }
      int L = rng.integer(cf.lo, cf.hi);
      Cell par = F.cell_of(p, s, L + 1);
      Cell mine = F.cell_of(p, s, L);
      std::vector<Cell> kids = F.children(par);
      int matches = 0, containing = 0;
      int probe = 0;
      for (const Cell& k : kids) {
        matches += (k == mine);
        if ((int)kids.size() <= 8 || probe++ < 3 || k == mine)
          containing += F.cell_contains(k, p);
      }
      REQUIRE(matches == 1);
      REQUIRE(containing == 1);
    }
  }
}

TEST_CASE("cell diameters obey the level sandwich") {
  Rng rng(23);
  for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
    for (int d = (sp == Space::Euclidean ? 1 : 2); d <= 3; ++d) {
      const ShiftFamily& F = fam(sp, d);
      double cd = std::sqrt(F.c_diam() * d);
      int hi = sp == Space::Euclidean ? 44 : (sp == Space::Spherical ? 5 : 19);
      for (int L = -20; L <= hi; L += (L < 6 ? 2 : 5)) {
        for (int rep = 0; rep < 3; ++rep) {
          Point p = rand_point(F, rng);
          int s = rng.integer(0, F.num_shifts() - 1);
          if (sp == Space::Spherical) {
            if (s == F.num_shifts() - 1) s = 0;
            if (sphere_outside(F, p, s)) continue;
          }
          Cell c = F.cell_of(p, s, L);
          double lower = std::ldexp(1.0, L) / cd;
          double upper = std::ldexp(1.0, L) * cd;
          if (sp == Space::Spherical) {
            lower = std::min(lower, M_PI);
            upper = std::min(upper, M_PI * cd);
          }
          double diam;
          if (sp == Space::Hyperbolic && L >= 10) {
            diam = F.cell_diam_ub(c);
          } else {
            diam = empirical_diam(F, c, rng);
            // Corner coordinates round at their own magnitude, which costs
            // up to ~1e-5 relative on the smallest sampled boxes.
            CHECK(diam <= F.cell_diam_ub(c) * (1 + 1e-4));
            CHECK(F.cell_diam_lb(c) <= diam * (1 + 1e-4));
            if (sp == Space::Euclidean)
              CHECK(diam ==
                    doctest::Approx(std::ldexp(1.0, L)).epsilon(1e-6));
          }
          CHECK(diam >= lower * (1 - 1e-6));
          CHECK(diam <= upper * (1 + 1e-6));
        }
      }
    }
  }
}

TEST_CASE("some shift places every nearby pair in a small cell") {
  Rng rng(29);
  struct Run {
    Space sp;
    int d, pairs;
    double scale_a, scale_b;
  };
  std::vector<Run> runs = {{Space::Euclidean, 2, 10000, 100.0, 0},
                           {Space::Euclidean, 1, 3000, 50.0, 0},
                           {Space::Euclidean, 3, 3000, 50.0, 0},
                           {Space::Euclidean, 2, 2000, std::exp2(37), 0},
                           {Space::Spherical, 2, 10000, 0, 0},
                           {Space::Spherical, 3, 3000, 0, 0},
                           {Space::Hyperbolic, 2, 10000, 40.0, 3.5},
                           {Space::Hyperbolic, 3, 3000, 20.0, 2.5},
                           {Space::Hyperbolic, 2, 300, 1e17, 1.0}};
  for (const Run& run : runs) {
    const ShiftFamily& F = fam(run.sp, run.d);
    int nshift = F.num_shifts() - (run.sp == Space::Spherical ? 1 : 0);
    for (int rep = 0; rep < run.pairs; ++rep) {
      Point p, q;
      if (run.sp == Space::Euclidean) {
        p = rand_euclid(rng, run.d, run.scale_a);
        q = rand_euclid(rng, run.d, run.scale_a);
      } else if (run.sp == Space::Spherical) {
        p = rand_sphere(rng, run.d);
        q = rand_sphere(rng, run.d);
      } else {
        p = rand_hyper(rng, run.d, run.scale_a, run.scale_b);
        q = rand_hyper(rng, run.d, run.scale_a, run.scale_b);
      }
      double dpq = dist(p, q);
      if (!(dpq > 0) || dpq > F.delta_cap()) continue;
      CAPTURE(p.c[0]);
      CAPTURE(p.c[1]);
      CAPTURE(p.c[2]);
      CAPTURE(q.c[0]);
      CAPTURE(q.c[1]);
      CAPTURE(q.c[2]);
      CAPTURE(dpq);
      double best = std::numeric_limits<double>::infinity();
      for (int s = 0; s < nshift; ++s) {
        Cell c = F.smallest_common_cell(p, q, s);
        if (c.top) continue;
        if (run.sp == Space::Spherical && c.level > F.top_level()) continue;
        best = std::min(best, F.cell_diam_ub(c));
        REQUIRE(F.cell_contains(c, p));
        REQUIRE(F.cell_contains(c, q));
        // Minimality: one level down the two points part ways.
        if (c.level > F.min_level())
          REQUIRE(F.cell_of(p, s, c.level - 1) !=
                  F.cell_of(q, s, c.level - 1));
      }
      REQUIRE(best <= F.c_shift() * dpq * (1 + 1e-9));
    }
  }
}

TEST_CASE("smallest common cell equals level-by-level descent") {
  Rng rng(31);
  for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
    const ShiftFamily& F = fam(sp, 2);
    int found_none = 0;
    for (int rep = 0; rep < 2000; ++rep) {
      Point p = rand_point(F, rng), q = rand_point(F, rng);
      int s = rng.integer(0, F.num_shifts() - 1);
      if (sp == Space::Spherical) {
        if (s == F.num_shifts() - 1) s = 0;
        if (sphere_outside(F, p, s) || sphere_outside(F, q, s)) continue;
      }
      Cell got = F.smallest_common_cell(p, q, s);
      if (F.cell_of(p, s, 58) != F.cell_of(q, s, 58)) {
        REQUIRE(got.top);
        ++found_none;
        continue;
      }
      int lo = F.min_level(), hi = 58;
      while (lo < hi) {
        int mid = lo + (hi - lo) / 2;
        if (F.cell_of(p, s, mid) == F.cell_of(q, s, mid))
          hi = mid;
        else
          lo = mid + 1;
      }
      REQUIRE_FALSE(got.top);
      REQUIRE(got.level == lo);
      REQUIRE(got == F.cell_of(p, s, lo));
    }
    if (sp == Space::Hyperbolic) CHECK(found_none > 0);
  }
}

TEST_CASE("pair separation predicts when no common cell exists") {
  const ShiftFamily& F = fam(Space::Hyperbolic, 2);
  Rng rng(37);
  // Above z = 2 every band index is on the wide side for every lift, so the
  // only unkillable divider is the x = 0 line of the unshifted x family.
  int nones = 0;
  for (int rep = 0; rep < 3000; ++rep) {
    double xa = rng.uniform(0.3, 30.0) * (rng.integer(0, 1) ? 1 : -1);
    double xb = rng.uniform(0.3, 30.0) * (rng.integer(0, 1) ? 1 : -1);
    Point p = hpt({xa, std::exp(rng.uniform(1.0, 4.0))});
    Point q = hpt({xb, std::exp(rng.uniform(1.0, 4.0))});
    int s = rng.integer(0, F.num_shifts() - 1);
    Cell got = F.smallest_common_cell(p, q, s);
    bool xsplit = F.shift_desc(s).j == 0 && ((xa < 0) != (xb < 0));
    REQUIRE(got.top == xsplit);
    nones += got.top;
  }
  CHECK(nones > 0);

  // Below z = 1 the unlifted bands keep tile widths under one, so wide pairs
  // never merge without a lift; the lifted copies merge as usual.
  int lownones = 0;
  for (int rep = 0; rep < 600; ++rep) {
    double sign = rng.integer(0, 1) ? 1.0 : -1.0;
    double xa = sign * rng.uniform(2.0, 20.0);
    double xb = xa + sign * rng.uniform(3.0, 10.0);
    Point p = hpt({xa, std::exp(rng.uniform(-3.0, -1.2))});
    Point q = hpt({xb, std::exp(rng.uniform(-3.0, -1.2))});
    for (int s = 0; s < F.num_shifts(); ++s) {
      Cell got = F.smallest_common_cell(p, q, s);
      REQUIRE(got.top == (F.cell_of(p, s, 58) != F.cell_of(q, s, 58)));
      if (F.shift_desc(s).i == 0) {
        CHECK(got.top);
        ++lownones;
      } else {
        CHECK_FALSE(got.top);
      }
    }
  }
  CHECK(lownones > 0);

  // Pairs split by z = 1 sit in opposite-side bands exactly when unlifted.
  int mixed = 0;
  for (int rep = 0; rep < 200; ++rep) {
    double sgn = rng.integer(0, 1) ? 1.0 : -1.0;
    double x0 = sgn * rng.uniform(0.5, 10.0);
    Point p = hpt({x0, std::exp(rng.uniform(-3.0, -1.0))});
    Point q = hpt({x0 + sgn * 0.1, std::exp(rng.uniform(1.0, 3.0))});
    for (int s = 0; s < F.num_shifts(); ++s) {
      Cell got = F.smallest_common_cell(p, q, s);
      if (F.shift_desc(s).i == 0) {
        CHECK(got.top);
        ++mixed;
      } else {
        CHECK_FALSE(got.top);
      }
    }
  }
  CHECK(mixed > 0);
}

TEST_CASE("sibling order follows the explicit tree walk") {
  Rng rng(41);

  auto with_clusters = [&](std::vector<Point> base, auto jitter) {
    std::vector<Point> pts = std::move(base);
    size_t n = pts.size();
    for (size_t c = 0; c < std::min<size_t>(20, n / 8); ++c) {
      Point b = pts[rng.integer(0, (int)n - 1)];
      for (int k = 0; k < 3; ++k) pts.push_back(jitter(b));
      pts.push_back(b);  // exact duplicate
    }
    return pts;
  };

  SUBCASE("euclidean") {
    for (int d : {1, 2, 3}) {
      const ShiftFamily& F = fam(Space::Euclidean, d);
      std::vector<Point> base;
      int n = d == 2 ? 700 : 300;
      for (int i = 0; i < n; ++i) base.push_back(rand_euclid(rng, d, 120.0));
      std::vector<Point> pts =
          with_clusters(std::move(base), [&](Point b) {
            for (int j = 0; j < d; ++j) b.c[j] += rng.uniform(-1e-12, 1e-12);
            return b;
          });
      for (int s = 0; s < F.num_shifts(); ++s) {
        int fb = 0;
        REQUIRE(oracle_order(F, s, pts, &fb) == sorted_order(F, s, pts));
        CHECK(fb == 0);
      }
    }
  }

  SUBCASE("spherical") {
    for (int d : {2, 3}) {
      const ShiftFamily& F = fam(Space::Spherical, d);
      std::vector<Point> base;
      int n = d == 2 ? 600 : 350;
      for (int i = 0; i < n; ++i) base.push_back(rand_sphere(rng, d));
      std::vector<Point> pts =
          with_clusters(std::move(base), [&](Point b) {
            for (int j = 0; j <= d; ++j) b.c[j] += rng.uniform(-1e-13, 1e-13);
            double nn = 0;
            for (int j = 0; j <= d; ++j) nn += b.c[j] * b.c[j];
            nn = std::sqrt(nn);
            for (int j = 0; j <= d; ++j) b.c[j] /= nn;
            return b;
          });
      for (int s = 0; s < F.num_shifts(); ++s) {
        int fb = 0;
        std::vector<int> got = oracle_order(F, s, pts, &fb);
        REQUIRE(got == sorted_order(F, s, pts));
        CHECK(fb == 0);
      }
    }
  }

  SUBCASE("hyperbolic plane, one thousand points") {
    const ShiftFamily& F = fam(Space::Hyperbolic, 2);
    std::vector<Point> pts;
    for (int i = 0; i < 600; ++i) pts.push_back(rand_hyper(rng, 2, 150.0, 3.2));
    for (int i = 0; i < 300; ++i) {
      double v[2] = {rng.uniform(0.0, 3.0), std::exp(rng.uniform(0.1, 2.0))};
      pts.push_back(hpt({v[0], v[1]}));
    }
    for (int c = 0; c < 25; ++c) {
      Point b = pts[rng.integer(0, 899)];
      for (int k = 0; k < 3; ++k) {
        Point j = b;
        j.c[0] += rng.uniform(-1e-13, 1e-13);
        j.c[1] *= 1.0 + rng.uniform(-1e-13, 1e-13);
        pts.push_back(j);
      }
      pts.push_back(b);
    }
    REQUIRE(pts.size() == 1000);
    for (int s = 0; s < F.num_shifts(); ++s) {
      int fb = 0;
      REQUIRE(oracle_order(F, s, pts, &fb) == sorted_order(F, s, pts));
      CHECK(fb == 0);  // one x axis: deep splits order exactly
    }
  }

  SUBCASE("hyperbolic three dimensional") {
    const ShiftFamily& F = fam(Space::Hyperbolic, 3);
    std::vector<Point> base;
    for (int i = 0; i < 250; ++i) base.push_back(rand_hyper(rng, 3, 0.4, 2.0));
    std::vector<Point> pts =
        with_clusters(std::move(base), [&](Point b) {
          b.c[0] += rng.uniform(-1e-13, 1e-13);
          b.c[1] += rng.uniform(-1e-13, 1e-13);
          b.c[2] *= 1.0 + rng.uniform(-1e-13, 1e-13);
          return b;
        });
    for (int s = 0; s < F.num_shifts(); ++s) {
      int fb = 0;
      REQUIRE(oracle_order(F, s, pts, &fb) == sorted_order(F, s, pts));
      CHECK(fb <= (int)pts.size() / 10);
    }
  }

  SUBCASE("whole sphere pseudo shift orders by raw coordinates") {
    const ShiftFamily& F = fam(Space::Spherical, 2);
    int pseudo = F.num_shifts() - 1;
    std::vector<Point> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(rand_sphere(rng, 2));
    std::vector<int> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return lex_less(pts[a], pts[b]); });
    REQUIRE(sorted_order(F, pseudo, pts) == idx);
  }

  SUBCASE("comparisons are antisymmetric and transitive") {
    for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
      const ShiftFamily& F = fam(sp, 2);
      for (int rep = 0; rep < 300; ++rep) {
        Point a = rand_point(F, rng), b = rand_point(F, rng),
              c = rand_point(F, rng);
        int s = rng.integer(0, F.num_shifts() - 1);
        Order ab = F.order_compare(a, b, s), ba = F.order_compare(b, a, s);
        if (ab == Order::Less) REQUIRE(ba == Order::Greater);
        if (ab == Order::Equal) REQUIRE(ba == Order::Equal);
        Order bc = F.order_compare(b, c, s);
        if (ab == Order::Less && bc == Order::Less)
          REQUIRE(F.order_compare(a, c, s) == Order::Less);
      }
    }
  }
}

TEST_CASE("sorted order keeps every cell contiguous at every level") {
  Rng rng(43);
  struct Cfg {
    Space sp;
    int d;
    std::vector<int> levels;
  };
  std::vector<Cfg> cfgs = {
      {Space::Euclidean, 2, {-45, -20, -8, -2, 0, 3, 10, 25, 40}},
      {Space::Spherical, 2, {-50, -20, -6, -1, 1, 3, 5}},
      {Space::Hyperbolic, 2, {-40, -10, -3, 0, 1, 2, 5, 9, 17}},
      {Space::Hyperbolic, 3, {-40, -10, -3, 0, 1, 2, 5, 9}}};
  for (const Cfg& cf : cfgs) {
    const ShiftFamily& F = fam(cf.sp, cf.d);
    std::vector<Point> pts;
    for (int i = 0; i < 800; ++i) pts.push_back(rand_point(F, rng));
    for (int s = 0; s < F.num_shifts(); ++s) {
      if (cf.sp == Space::Spherical && s == F.num_shifts() - 1) continue;
      std::vector<int> order = sorted_order(F, s, pts);
      check_contiguous(F, s, pts, order, cf.levels);
    }
  }
}

TEST_CASE("tile parents stack bands and nest x ranges") {
  Rng rng(47);
  for (int d : {2, 3}) {
    const ShiftFamily& F = fam(Space::Hyperbolic, d);
    for (int rep = 0; rep < 300; ++rep) {
      Point p = rand_hyper(rng, d, 20.0, 2.5);
      int s = rng.integer(0, F.num_shifts() - 1);
      int L = rng.integer(0, 4);
      Cell t = F.cell_of(p, s, L);
      Cell up = F.tile_parent(t);
      CHECK(up.level == L);
      CHECK(up.zb == t.zb + 1);
      CellBox tb = F.cell_box(t), ub = F.cell_box(up);
      CHECK(ub.zlo == doctest::Approx(tb.zhi).epsilon(1e-12));
      for (int j = 0; j < d - 1; ++j) {
        CHECK(ub.xlo[j] <= tb.xlo[j] + 1e-9 * (tb.xhi[j] - tb.xlo[j]));
        CHECK(ub.xhi[j] >= tb.xhi[j] - 1e-9 * (tb.xhi[j] - tb.xlo[j]));
      }
      Cell anc = t;
      for (int k = 0; k < 6; ++k) {
        CHECK(F.tile_contains(anc, t));
        anc = F.tile_parent(anc);
      }
      CHECK(F.tile_contains(anc, t));
      CHECK_FALSE(F.tile_contains(t, anc));
    }
  }
}

TEST_CASE("tile lca contains both endpoints or correctly reports none") {
  const ShiftFamily& F = fam(Space::Hyperbolic, 2);
  Rng rng(53);
  int merged = 0, none = 0;
  for (int rep = 0; rep < 2500; ++rep) {
    Point p = rand_hyper(rng, 2, 25.0, 2.5), q = rand_hyper(rng, 2, 25.0, 2.5);
    int s = rng.integer(0, F.num_shifts() - 1);
    int L = rng.integer(0, 4);
    Cell tp = F.cell_of(p, s, L), tq = F.cell_of(q, s, L);
    Cell lca = F.tile_lca(p, q, s, L);
    if (lca.top) {
      ++none;
      // Only an unshifted x family pins a permanent dividing line (x = 0).
      REQUIRE(F.shift_desc(s).j == 0);
      REQUIRE((p.c[0] < 0) != (q.c[0] < 0));
      continue;
    }
    ++merged;
    REQUIRE(lca.level == L);
    REQUIRE(F.tile_contains(lca, tp));
    REQUIRE(F.tile_contains(lca, tq));
    if (lca.zb > tp.zb && lca.zb > tq.zb) {
      // Minimality: one band below the lca the chains are still apart.
      Cell cp = tp, cq = tq;
      while (cp.zb < lca.zb - 1) cp = F.tile_parent(cp);
      while (cq.zb < lca.zb - 1) cq = F.tile_parent(cq);
      REQUIRE(cp != cq);
    }
  }
  CHECK(merged > 0);
  CHECK(none > 0);
}

TEST_CASE("a shifted tile catches each geodesic in its upper slice") {
  const ShiftFamily& F = fam(Space::Hyperbolic, 2);
  Rng rng(59);
  const int level = 4;
  auto hits_slice = [&](const Point& p, const Point& q, int samples) {
    Segment seg = make_segment(p, q);
    for (int s = 0; s < F.num_shifts(); ++s) {
      Cell lca = F.tile_lca(p, q, s, level);
      if (lca.top) continue;
      CellBox b = F.cell_box(lca);
      double l2lo = std::log2(b.zlo), l2hi = std::log2(b.zhi);
      double zthr = std::exp2(l2lo + (l2hi - l2lo) / 3.0);
      for (int k = 0; k <= samples; ++k) {
        Point g = geodesic_point(seg, (double)k / samples);
        if (g.z() < zthr * (1 - 1e-12) || g.z() > b.zhi) continue;
        double tol = 1e-9 * (b.xhi[0] - b.xlo[0]);
        if (g.c[0] >= b.xlo[0] - tol && g.c[0] <= b.xhi[0] + tol) return true;
      }
    }
    return false;
  };
  for (int rep = 0; rep < 4000; ++rep) {
    Point p = rand_hyper(rng, 2, 15.0, 2.0), q = rand_hyper(rng, 2, 15.0, 2.0);
    bool ok = hits_slice(p, q, 160) || hits_slice(p, q, 2000);
    REQUIRE(ok);
  }
}

TEST_CASE("the tile under a geodesic top spans a quarter of the x gap") {
  Rng rng(61);
  for (int d : {2, 3}) {
    const ShiftFamily& F = fam(Space::Hyperbolic, d);
    int reps = d == 2 ? 6000 : 1500;
    for (int rep = 0; rep < reps; ++rep) {
      Point p = rand_hyper(rng, d, 30.0, 3.0), q = rand_hyper(rng, d, 30.0, 3.0);
      double xgap = 0;
      for (int j = 0; j < d - 1; ++j)
        xgap += (p.c[j] - q.c[j]) * (p.c[j] - q.c[j]);
      xgap = std::sqrt(xgap);
      if (xgap == 0) continue;
      Segment seg = make_segment(p, q);
      double targ = 0.5;
      golden_min([&](double t) { return -geodesic_point(seg, t).z(); }, 0.0,
                 1.0, 200, &targ);
      Point top = geodesic_point(seg, targ);
      CellBox b = F.cell_box(F.cell_of(top, 0, 0));
      double w = 0;
      for (int j = 0; j < d - 1; ++j)
        w += (b.xhi[j] - b.xlo[j]) * (b.xhi[j] - b.xlo[j]);
      w = std::sqrt(w);
      REQUIRE(w >= 0.25 * xgap * (1 - 1e-6));
    }
  }
}

TEST_CASE("boundary coverings are dense on the boundary and small") {
  Rng rng(67);

  auto boundary_sample = [&](const ShiftFamily& F, const Cell& c) -> Point {
    CellBox b = F.cell_box(c);
    int d = F.dim();
    if (F.space() != Space::Hyperbolic) {
      double a[3] = {0, 0, 0};
      for (int j = 0; j < d; ++j) a[j] = rng.uniform(b.xlo[j], b.xhi[j]);
      int ax = rng.integer(0, d - 1);
      a[ax] = rng.integer(0, 1) ? b.xhi[ax] : b.xlo[ax];
      return from_chart(F, c, a, 1.0);
    }
    double a[3] = {0, 0, 0};
    for (int j = 0; j < d - 1; ++j) a[j] = rng.uniform(b.xlo[j], b.xhi[j]);
    double z = std::exp2(rng.uniform(std::log2(b.zlo), std::log2(b.zhi)));
    int facet = rng.integer(0, d);  // 0..d-2 walls, d-1 bottom, d top
    if (facet < d - 1)
      a[facet] = rng.integer(0, 1) ? b.xhi[facet] : b.xlo[facet];
    else
      z = facet == d - 1 ? b.zlo : b.zhi;
    return from_chart(F, c, a, z);
  };

  auto run_case = [&](const ShiftFamily& F, const Cell& c, double eps,
                      int samples) {
    std::vector<Point> cov = F.boundary_covering(c, eps);
    REQUIRE(!cov.empty());
    if (F.dim() >= 2) {
      double bound = std::pow((double)F.dim(), F.c_cover() * F.dim()) /
                     std::pow(eps, F.dim() - 1);
      REQUIRE((double)cov.size() <= bound);
    }
    double r = eps * F.cell_diam_lb(c);
    for (int k = 0; k < samples; ++k) {
      Point bp = boundary_sample(F, c);
      double best = std::numeric_limits<double>::infinity();
      for (const Point& cp : cov) best = std::min(best, dist(bp, cp));
      REQUIRE(best <= r * 1.05);
    }
  };

  const ShiftFamily& FE2 = fam(Space::Euclidean, 2);
  run_case(FE2, FE2.cell_of(ept({0.4, 0.6}), 0, 0), 0.25, 10000);
  run_case(FE2, FE2.cell_of(ept({-3.0, 7.5}), 1, 2), 0.5, 1500);
  const ShiftFamily& FE1 = fam(Space::Euclidean, 1);
  {
    Cell c = FE1.cell_of(ept({2.5}), 0, 1);
    std::vector<Point> cov = FE1.boundary_covering(c, 0.5);
    CellBox b = FE1.cell_box(c);
    REQUIRE(cov.size() == 2);
    for (const Point& cp : cov)
      CHECK((std::abs(cp.c[0] - b.xlo[0]) < 1e-12 ||
             std::abs(cp.c[0] - b.xhi[0]) < 1e-12));
  }
  const ShiftFamily& FE3 = fam(Space::Euclidean, 3);
  run_case(FE3, FE3.cell_of(ept({0.2, -1.0, 4.0}), 2, 1), 0.3, 1500);

  for (int d : {2, 3}) {
    const ShiftFamily& FS = fam(Space::Spherical, d);
    Point p = rand_sphere(rng, d);
    int s = 0;
    while (sphere_outside(FS, p, s)) p = rand_sphere(rng, d);
    run_case(FS, FS.cell_of(p, s, -2), 0.5, 1500);
    run_case(FS, FS.cell_of(p, s, -1), 0.25, 1500);
  }

  const ShiftFamily& FH2 = fam(Space::Hyperbolic, 2);
  run_case(FH2, FH2.cell_of(hpt({0.3, 1.4}), 0, 2), 0.5, 1500);
  run_case(FH2, FH2.cell_of(hpt({-5.0, 3.0}), 4, 3), 0.5, 1500);
  run_case(FH2, FH2.cell_of(hpt({2.0, 0.7}), 2, 4), 1.0, 1500);
  run_case(FH2, FH2.cell_of(hpt({0.3, 1.4}), 0, -2), 0.5, 1000);
  const ShiftFamily& FH3 = fam(Space::Hyperbolic, 3);
  run_case(FH3, FH3.cell_of(hpt({0.1, 0.4, 1.2}), 0, 1), 0.25, 1200);

  // Domain guards.
  Cell hc = FH2.cell_of(hpt({0.3, 1.4}), 0, 5);
  CHECK_THROWS_AS(FH2.boundary_covering(hc, 0.5), UsageError);
  Cell ec = FE2.cell_of(ept({0.0, 0.0}), 0, 0);
  CHECK_THROWS_AS(FE2.boundary_covering(ec, 0.0), UsageError);
  CHECK_THROWS_AS(FE2.boundary_covering(ec, 1.5), UsageError);
}

TEST_CASE("interior slice coverings are dense on their slice") {
  Rng rng(71);
  for (int d : {2, 3}) {
    const ShiftFamily& F = fam(Space::Hyperbolic, d);
    for (int rep = 0; rep < 24; ++rep) {
      Point p = rand_hyper(rng, d, 10.0, 2.0);
      int s = rng.integer(0, F.num_shifts() - 1);
      int L = rng.integer(0, d == 2 ? 4 : 3);
      Cell c = F.cell_of(p, s, L);
      double diam = F.cell_diam_ub(c);
      double frac = rep % 2 ? 1.0 / 6.0 : 1.0 / 3.0;
      double eps_abs = std::sqrt(0.1 * diam);
      std::vector<Point> cov = F.region_covering(c, frac, eps_abs);
      REQUIRE(!cov.empty());
      double bound = std::pow((double)d, F.c_cover() * d) *
                     std::pow(eps_abs, 1 - d);
      REQUIRE((double)cov.size() <= std::max(bound, 1.0));
      CellBox b = F.cell_box(c);
      double l2lo = std::log2(b.zlo), l2hi = std::log2(b.zhi);
      double zs = std::exp2(l2lo + frac * (l2hi - l2lo));
      for (int k = 0; k < 300; ++k) {
        double a[4] = {0, 0, 0, 0};
        for (int j = 0; j < d - 1; ++j) a[j] = rng.uniform(b.xlo[j], b.xhi[j]);
        a[d - 1] = zs;
        Point sp = make_point(Space::Hyperbolic, d, a);
        double best = std::numeric_limits<double>::infinity();
        for (const Point& cp : cov) best = std::min(best, dist(sp, cp));
        REQUIRE(best <= eps_abs * 1.05);
      }
      // A coarse request collapses to very few points.
      std::vector<Point> coarse = F.region_covering(c, frac, 2.0 * diam);
      CHECK(coarse.size() >= 1);
      CHECK(coarse.size() <= 4);
    }
  }
  const ShiftFamily& FE = fam(Space::Euclidean, 2);
  CHECK_THROWS_AS(FE.region_covering(FE.cell_of(ept({0, 0}), 0, 0), 0.5, 0.1),
                  UsageError);
}

TEST_CASE("descendant covers meet their size and diameter contract") {
  Rng rng(73);

  auto run_case = [&](const ShiftFamily& F, const Cell& c, double a) {
    std::vector<Cell> ds = F.desc(c, a);
    REQUIRE(!ds.empty());
    int level = ds[0].level;
    int k = c.level - level;
    REQUIRE(k >= 0);
    double bound = std::ldexp(1.0, F.dim() * k) *
                   std::pow((double)F.dim(), F.c_growth() * F.dim());
    REQUIRE((double)ds.size() <= bound);
    double cap = a * F.cell_diam_lb(c) * (1 + 1e-9);
    for (const Cell& x : ds) {
      REQUIRE(x.level == level);
      REQUIRE(F.cell_diam_ub(x) <= cap);
      REQUIRE(climb(F, x, k) == c);
    }
    // Coverage: random points of c land in exactly one descendant.
    CellBox b = F.cell_box(c);
    for (int rep = 0; rep < 150; ++rep) {
      double ax[3] = {0, 0, 0};
      int nax = F.space() == Space::Hyperbolic ? F.dim() - 1 : F.dim();
      for (int j = 0; j < nax; ++j) ax[j] = rng.uniform(b.xlo[j], b.xhi[j]);
      double z = 1.0;
      if (F.space() == Space::Hyperbolic)
        z = std::exp2(rng.uniform(std::log2(b.zlo), std::log2(b.zhi)));
      Point p = from_chart(F, c, ax, z);
      if (!F.cell_contains(c, p)) continue;  // box edge roundoff
      Cell mine = F.cell_of(p, c.shift, level);
      int hits = 0;
      for (const Cell& x : ds) hits += (x == mine);
      REQUIRE(hits == 1);
    }
  };

  const ShiftFamily& FE = fam(Space::Euclidean, 2);
  Cell e = FE.cell_of(ept({1.0, 2.0}), 1, 3);
  std::vector<Cell> same = FE.desc(e, 1.0);
  REQUIRE(same.size() == 1);
  REQUIRE(same[0] == e);
  std::vector<Cell> quads = FE.desc(e, 0.5);
  REQUIRE(quads.size() == 4);
  REQUIRE(quads[0].level == e.level - 1);
  REQUIRE(FE.desc(e, 0.26).size() == 16);
  run_case(FE, e, 0.5);
  run_case(FE, e, 0.13);
  const ShiftFamily& FE3 = fam(Space::Euclidean, 3);
  run_case(FE3, FE3.cell_of(ept({0.1, 0.2, 0.3}), 0, 1), 0.3);

  Rng srng(79);
  for (int d : {2, 3}) {
    const ShiftFamily& FS = fam(Space::Spherical, d);
    Point p = rand_sphere(srng, d);
    while (sphere_outside(FS, p, 0)) p = rand_sphere(srng, d);
    Cell c = FS.cell_of(p, 0, -1);
    run_case(FS, c, 0.8);
    CHECK_THROWS_AS(FS.desc(c, 1e-4), UsageError);
  }

  for (int d : {2, 3}) {
    const ShiftFamily& FH = fam(Space::Hyperbolic, d);
    Cell c = FH.cell_of(rand_hyper(srng, d, 5.0, 1.5), 1, 2);
    run_case(FH, c, 0.45);
    run_case(FH, c, 0.3);
    Cell s = FH.cell_of(rand_hyper(srng, d, 5.0, 1.5), 0, -2);
    run_case(FH, s, 0.5);
  }

  // Below the finest level there is nothing to materialize.
  Cell tiny = FE.cell_of(ept({0.0, 0.0}), 0, FE.min_level());
  CHECK_THROWS_AS(FE.desc(tiny, 0.4), UsageError);
}

TEST_CASE("descriptors name cells uniquely") {
  Rng rng(83);
  std::unordered_map<std::string, Cell> seen;
  auto note = [&](const ShiftFamily& F, const Cell& c) {
    std::string key = F.descriptor(c);
    auto it = seen.find(key);
    if (it != seen.end())
      REQUIRE(it->second == c);
    else
      seen.emplace(key, c);
  };
  for (Space sp : {Space::Euclidean, Space::Spherical, Space::Hyperbolic}) {
    for (int d = (sp == Space::Euclidean ? 1 : 2); d <= 3; ++d) {
      const ShiftFamily& F = fam(sp, d);
      for (int rep = 0; rep < 900; ++rep) {
        Point p = rand_point(F, rng);
        int s = rng.integer(0, F.num_shifts() - 1);
        int L = rng.integer(-20, 4);
        Cell c = F.cell_of(p, s, L);
        note(F, c);
        std::string key = F.descriptor(c);
        CHECK(key[0] == space_char(sp));
        CHECK(key[1] == ':');
      }
    }
  }
  const ShiftFamily& FS = fam(Space::Spherical, 2);
  int pseudo = FS.num_shifts() - 1;
  double up[3] = {0, 0, 1};
  Cell whole = FS.cell_of(make_point(Space::Spherical, 2, up), pseudo, 0);
  CHECK(FS.descriptor(whole) == "S:" + std::to_string(pseudo) + ":top");
  std::vector<Cell> roots = FS.children(whole);
  CHECK(FS.descriptor(roots[0]) ==
        "S:" + std::to_string(pseudo) + ":root:0");
  note(FS, whole);
  note(FS, roots[0]);
  note(FS, roots[1]);
  CHECK(seen.size() > 4000);

  // Hash and key order agree with equality on the sampled cells.
  std::vector<Cell> cells;
  for (auto& kv : seen) cells.push_back(kv.second);
  CellHash hash;
  CellKeyLess less;
  for (size_t i = 0; i < std::min<size_t>(cells.size(), 300); ++i) {
    size_t j = (i * 7919) % cells.size();
    bool eq = cells[i] == cells[j];
    CHECK(eq == (!less(cells[i], cells[j]) && !less(cells[j], cells[i])));
    if (eq) CHECK(hash(cells[i]) == hash(cells[j]));
  }

  CHECK(ixty_to_string(0) == "0");
  CHECK(ixty_to_string(-1) == "-1");
  CHECK(ixty_to_string((ixty)1 << 100) == "1267650600228229401496703205376");
  CHECK(ixty_to_string(-((ixty)1 << 100)) ==
        "-1267650600228229401496703205376");
}

TEST_CASE("windows and level caps are enforced") {
  const ShiftFamily& FE = fam(Space::Euclidean, 2);
  CHECK_THROWS_AS(FE.cell_of(ept({std::exp2(45), 0.0}), 0, 0), UsageError);
  const ShiftFamily& FH = fam(Space::Hyperbolic, 2);
  CHECK_THROWS_AS(FH.cell_of(hpt({1e300, 1.0}), 0, 0), UsageError);
  Cell base = FE.cell_of(ept({0, 0}), 0, FE.min_level());
  CHECK_THROWS_AS(FE.children(base), UsageError);
  CHECK_THROWS_AS(FE.parent(FE.cell_of(ept({0, 0}), 0, 60)), UsageError);
  CHECK_THROWS_AS(FH.children(FH.cell_of(hpt({0.2, 1.1}), 0, 6)), UsageError);
  CHECK_THROWS_AS(FH.tile_parent(FH.cell_of(hpt({0.2, 1.1}), 0, -1)),
                  UsageError);
  CHECK_THROWS_AS(FE.tile_parent(FE.cell_of(ept({0, 0}), 0, 0)), UsageError);
  CHECK_THROWS_AS(FH.tile_lca(hpt({0.1, 1.0}), hpt({0.2, 1.0}), 0, -1),
                  UsageError);
  Cell none = FH.smallest_common_cell(hpt({-1.0, 1.0}), hpt({1.0, 1.0}), 0);
  REQUIRE(none.top);
  CHECK(FH.cell_diam_ub(none) == std::numeric_limits<double>::infinity());
  CHECK_FALSE(FH.cell_contains(none, hpt({-1.0, 1.0})));
  CHECK_THROWS_AS(FH.children(none), UsageError);
  CHECK(FH.descriptor(none) == "H:0:none");
}
