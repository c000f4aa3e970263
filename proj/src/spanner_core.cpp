#include "curvespan/spanner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "curvespan/errors.hpp"

namespace curvespan {

namespace {

std::string hexd(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return std::string(buf);
}

// Coordinate-derived Steiner key: equal keys imply bit-equal points, so
// vertices regenerated by independent mechanisms merge without a registry.
std::string point_key(const Point& p) {
  std::string s;
  for (int i = 0; i < p.ambient(); ++i) {
    if (i) s += ',';
    s += hexd(p.c[i]);
  }
  return s;
}

double dot_n(const double* a, const double* b, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Deterministic orthonormal completion: extends the k given unit vectors to
// a basis of R^n by Gram-Schmidt over the canonical axes in index order.
// out receives n-k rows.
int ortho_complement(int n, int k, const double given[][4], double out[][4]) {
  double base[6][4];
  int nb = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) base[nb][j] = given[i][j];
    ++nb;
  }
  int got = 0;
  for (int ax = 0; ax < n && got < n - k; ++ax) {
    double v[4];
    for (int j = 0; j < n; ++j) v[j] = (j == ax) ? 1.0 : 0.0;
    for (int b = 0; b < nb; ++b) {
      double c = dot_n(v, base[b], n);
      for (int j = 0; j < n; ++j) v[j] -= c * base[b][j];
    }
    double nn = std::sqrt(dot_n(v, v, n));
    if (nn < 1e-6) continue;
    for (int j = 0; j < n; ++j) v[j] /= nn;
    for (int j = 0; j < n; ++j) {
      base[nb][j] = v[j];
      out[got][j] = v[j];
    }
    ++nb;
    ++got;
  }
  return got;
}

// Directions orthogonal to the geodesic a->b at its midpoint, one per
// transverse dimension, plus the data needed to realize metric offsets.
struct TransFrame {
  int nt = 0;           // transverse directions (d-1)
  double v[3][4];       // direction rows
  Point mid;
  // hyperbolic: mid recentered to (0,1) by sigma/tau below
  double sigma = 1.0;
  double tau[3] = {0, 0, 0};
};

TransFrame transverse_frame(const Segment& seg) {
  TransFrame f;
  const Point& a = seg.a;
  const Point& b = seg.b;
  int d = a.d;
  f.mid = geodesic_point(seg, 0.5);
  if (a.space == Space::Euclidean) {
    double t[1][4] = {{0, 0, 0, 0}};
    double nn = 0;
    for (int i = 0; i < d; ++i) {
      t[0][i] = b.c[i] - a.c[i];
      nn += t[0][i] * t[0][i];
    }
    nn = std::sqrt(nn);
    if (nn == 0) return f;
    for (int i = 0; i < d; ++i) t[0][i] /= nn;
    f.nt = ortho_complement(d, 1, t, f.v);
  } else if (a.space == Space::Spherical) {
    int n = d + 1;
    double given[2][4];
    for (int i = 0; i < n; ++i) given[0][i] = f.mid.c[i];
    // great-circle tangent at mid, toward b
    double cmb = dot_n(b.c.data(), f.mid.c.data(), n);
    double nn = 0;
    for (int i = 0; i < n; ++i) {
      given[1][i] = b.c[i] - cmb * f.mid.c[i];
      nn += given[1][i] * given[1][i];
    }
    nn = std::sqrt(nn);
    if (nn < 1e-9) {
      // degenerate (antipodal-midpoint); transverse = complement of mid only
      f.nt = ortho_complement(n, 1, given, f.v);
      if (f.nt > d - 1) f.nt = d - 1;
      return f;
    }
    for (int i = 0; i < n; ++i) given[1][i] /= nn;
    f.nt = ortho_complement(n, 2, given, f.v);
  } else {
    // recenter mid to (0,1): x -> (x - mx)/mz, z -> z/mz
    f.sigma = f.mid.z();
    for (int i = 0; i + 1 < d; ++i) f.tau[i] = f.mid.c[i] / f.mid.z();
    double bx[4];
    for (int i = 0; i + 1 < d; ++i) bx[i] = (b.c[i] - f.mid.c[i]) / f.mid.z();
    double bz = b.z() / f.mid.z();
    // geodesic through (0,1) and (bx,bz): tangent at (0,1)
    double t[1][4] = {{0, 0, 0, 0}};
    double un = 0;
    for (int i = 0; i + 1 < d; ++i) un += bx[i] * bx[i];
    un = std::sqrt(un);
    if (un < 1e-14) {
      t[0][d - 1] = 1.0;  // vertical line
    } else {
      // circle center a*u on the floor: |a|^2+1 = r^2 = |bx-a u|^2+bz^2
      double xb2 = un * un, a = (xb2 + bz * bz - 1.0) / (2.0 * un);
      double tn = std::sqrt(1.0 + a * a);
      for (int i = 0; i + 1 < d; ++i) t[0][i] = (bx[i] / un) / tn;
      t[0][d - 1] = a / tn;
    }
    f.nt = ortho_complement(d, 1, t, f.v);
  }
  return f;
}

// Point at metric distance r from the frame's midpoint along the unit
// combination w (length r) of transverse directions.
Point offset_point(const TransFrame& f, const double* w, double r, int d,
                   Space space) {
  if (r == 0) return f.mid;
  if (space == Space::Euclidean) {
    double c[4];
    for (int i = 0; i < d; ++i) c[i] = f.mid.c[i] + w[i];
    return make_point(space, d, c);
  }
  if (space == Space::Spherical) {
    double c[4];
    double cr = std::cos(r), sr = std::sin(r);
    for (int i = 0; i < d + 1; ++i) c[i] = cr * f.mid.c[i] + sr * (w[i] / r);
    return make_point(space, d, c);
  }
  // half-space exponential map at (0,1), then un-recenter
  double ux[4], uz = w[d - 1] / r;
  for (int i = 0; i + 1 < d; ++i) ux[i] = w[i] / r;
  double ch = std::cosh(r), sh = std::sinh(r);
  double den = ch - sh * uz;
  double c[4];
  for (int i = 0; i + 1 < d; ++i)
    c[i] = (sh * ux[i] / den + f.tau[i]) * f.sigma;
  c[d - 1] = (1.0 / den) * f.sigma;
  return make_point(space, d, c);
}

struct ProvPt {
  std::string prov;
  Point p;
};

// Transverse Steiner grid of one cell-pair bridge. Pure in its arguments:
// rep points in CellKeyLess order of their cells, cell diameters, params.
std::vector<ProvPt> bridge_grid(const Point& ra, const Point& rb, double da,
                                double db, const G1Params& prm) {
  std::vector<ProvPt> out;
  Segment seg = make_segment(ra, rb);
  double L = seg.length;
  if (!(L > 0)) return out;
  TransFrame f = transverse_frame(seg);
  double delta = std::max(da, db);
  double extent = prm.grid_extent * delta;
  // worst on-segment foot of a grid point, for the detour denominator
  double amin = std::max(0.06 * L, 0.5 * L - 1.2 * extent);
  double inv = 1.0 / amin + 1.0 / (L - amin);
  double tau2 = prm.eps_grid * L * 2.0 / inv;
  if (ra.space == Space::Hyperbolic)
    tau2 = std::min(tau2, prm.eps_grid * L);  // detour ~ tau^2 per bridge leg
  double tau = std::sqrt(tau2);
  int nt = f.nt;
  double g = (nt > 0) ? 2.0 * tau / std::sqrt((double)nt) : 1.0;
  int K = 0;
  if (nt > 0 && g > 0)
    K = std::min(prm.max_grid_k, (int)std::ceil(extent / g - 1e-9));
  int k[3] = {0, 0, 0};
  int lo = -K;
  double ballK = (double)K + 0.25;
  auto emit = [&](const int* kk) {
    double w[4] = {0, 0, 0, 0}, n2 = 0;
    for (int i = 0; i < nt; ++i) n2 += (double)kk[i] * kk[i];
    if (std::sqrt(n2) > ballK && K > 0) return;
    int amb = (ra.space == Space::Spherical) ? ra.d + 1 : ra.d;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < amb; ++j) w[j] += kk[i] * g * f.v[i][j];
    double r = std::sqrt(dot_n(w, w, amb));
    Point s = offset_point(f, w, r, ra.d, ra.space);
    out.push_back({"m:" + point_key(s), s});
  };
  if (nt == 0) {
    emit(k);
  } else if (nt == 1) {
    for (k[0] = lo; k[0] <= K; ++k[0]) emit(k);
  } else {
    for (k[0] = lo; k[0] <= K; ++k[0])
      for (k[1] = lo; k[1] <= K; ++k[1]) emit(k);
  }
  std::sort(out.begin(), out.end(),
            [](const ProvPt& x, const ProvPt& y) { return x.prov < y.prov; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const ProvPt& x, const ProvPt& y) {
                          return x.prov == y.prov;
                        }),
            out.end());
  return out;
}

constexpr int kHyperCoarseCap = 5;   // coarsest hyperbolic bridge level
constexpr int kHyperSmallLevel = 4;  // small-diameter containment level

struct CellRec {
  std::set<int> members;
  Point center;
  double diam = 0;
  Point pcenter;
  double pdiam = 0;
  Cell pcell;
  std::vector<Cell> partners;
};

using CellMap = std::map<Cell, CellRec, CellKeyLess>;

struct LevelState {
  CellMap cells;
  std::multimap<ixty, Cell> byix;    // Euclidean/spherical window index
  std::multimap<double, Cell> byxd;  // hyperbolic window index
  std::multiset<double> diams, zs;   // hyperbolic reach bookkeeping
};

struct Contribution {
  std::vector<ProvPt> steiner;                      // owned vertex refs
  std::vector<std::pair<int, std::string>> edges;   // (input id, steiner key)
};

struct BKeyLess {
  CellKeyLess cl;
  using K = std::tuple<int, int, Cell, Cell>;
  bool cless(const Cell& a, const Cell& b) const { return cl(a, b); }
  bool operator()(const K& x, const K& y) const {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
    if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) < std::get<1>(y);
    if (cless(std::get<2>(x), std::get<2>(y))) return true;
    if (cless(std::get<2>(y), std::get<2>(x))) return false;
    return cless(std::get<3>(x), std::get<3>(y));
  }
};

}  // namespace

BuildMode build_mode_from_string(const std::string& s) {
  if (s == "empirical") return BuildMode::Empirical;
  if (s == "strict") return BuildMode::Strict;
  throw UsageError("unknown build mode: " + s);
}

const char* build_mode_name(BuildMode m) {
  return m == BuildMode::Strict ? "strict" : "empirical";
}

G1Params G1Params::resolve(Space space, int d, double eps, BuildMode mode) {
  G1Params p;
  p.eps = eps;
  if (mode == BuildMode::Empirical) {
    p.eps_inner = eps / 8.0;
    p.eps_grid = 0.55 * eps;
    p.sep = std::max(3.0, 1.1 / std::sqrt(eps));
    p.grid_extent = 1.15;
    p.tube_mult = 2.5;
    p.max_qual_cells = 3;
    p.window_mult = 2.05;
    p.cap_colat = 0.75;
    p.cap_region = 0.85;
  } else {
    double c = (space == Space::Hyperbolic) ? std::pow((double)d, 16.0) : 1.0;
    p.eps_inner = eps / (c + 3.0);
    p.eps_grid = 0.3 * eps;
    p.sep = std::max(4.0, 1.6 / std::sqrt(eps));
    p.grid_extent = 1.3;
    p.tube_mult = 4.0;
    p.max_qual_cells = 6;
    p.window_mult = 2.3;
    p.cap_colat = 0.75;
    p.cap_region = 0.95;
  }
  return p;
}

// ---------------------------------------------------------------------------

struct DynamicG1::Impl {
  const ShiftFamily* F;
  G1Params prm;
  OrderStore store;
  std::vector<int> cshifts;  // bridge-carrying shifts (one per chart)
  int lev_lo = 0, lev_hi = 0;
  ixty wix = 0;  // Euclidean/spherical partner window in index units

  std::vector<std::vector<LevelState>> occ;  // [cshift idx][level idx]
  std::map<BKeyLess::K, std::vector<ProvPt>, BKeyLess> bridges;
  std::map<std::tuple<int, int, int>, Contribution> adj_contribs;
  std::map<int, Contribution> cap_contribs;
  std::map<std::pair<int, std::string>, int> edge_rc;
  std::map<std::string, std::pair<Point, int>> steiner_rc;
  std::vector<ProvPt> band_net;  // spherical far-pair net, built lazily
  bool band_ready = false;

  Impl(const ShiftFamily& family, double eps, BuildMode mode)
      : F(&family),
        prm(G1Params::resolve(family.space(), family.dim(), eps, mode)),
        store(family) {
    if (!(eps > 0.0) || eps > 0.5) throw UsageError("eps out of range");
    Space sp = F->space();
    if (sp == Space::Spherical) {
      int want[2] = {0, 1};
      for (int chart : want)
        for (int s = 0; s < F->num_shifts(); ++s)
          if (F->shift_desc(s).chart == chart) {
            cshifts.push_back(s);
            break;
          }
    } else {
      cshifts.push_back(0);
    }
    if (sp == Space::Euclidean) {
      lev_lo = F->min_level() + 1;
      lev_hi = std::min(F->top_level() - 2,
                        (int)std::floor(std::log2(F->delta_cap())) + 2);
    } else if (sp == Space::Spherical) {
      lev_lo = F->min_level() + 1;
      lev_hi = std::min(F->top_level() - 1,
                        (int)std::floor(std::log2(M_PI / prm.sep)) + 2);
    } else {
      lev_lo = F->min_level() + 1;
      lev_hi = kHyperCoarseCap;
    }
    occ.assign(cshifts.size(),
               std::vector<LevelState>(lev_hi - lev_lo + 1));
    double wm = prm.window_mult * (prm.sep + 1.0) * std::sqrt((double)F->dim());
    if (sp == Space::Spherical) wm *= 13.0;  // chart-vs-metric distortion
    wix = (ixty)std::ceil(wm) + 1;
  }

  // ---- edge/vertex refcounts ----

  void reg_edge(int x, const std::string& prov, const Point& pt) {
    int& rc = edge_rc[{x, prov}];
    if (++rc == 1) {
      auto& sr = steiner_rc[prov];
      if (++sr.second == 1) sr.first = pt;
    }
  }
  void unreg_edge(int x, const std::string& prov) {
    auto it = edge_rc.find({x, prov});
    if (--it->second == 0) {
      edge_rc.erase(it);
      auto st = steiner_rc.find(prov);
      if (--st->second.second == 0) steiner_rc.erase(st);
    }
  }
  void reg_contrib(const Contribution& c) {
    std::map<std::string, const Point*> pts;
    for (const auto& s : c.steiner) pts[s.prov] = &s.p;
    for (const auto& e : c.edges) reg_edge(e.first, e.second, *pts[e.second]);
  }
  void unreg_contrib(const Contribution& c) {
    for (const auto& e : c.edges) unreg_edge(e.first, e.second);
  }

  // ---- adjacency-consuming mechanism ----

  // Steiner set of one order-adjacent pair in one shift: the exact geodesic
  // midpoint relay, plus tube-filtered boundary coverings of the midpoint's
  // descendant cell for each qualifying ancestor scale.
  Contribution adjacent_pair_contribution(int shift, int a, int b) {
    Contribution c;
    const Point& pa = store.point(a);
    const Point& pb = store.point(b);
    Segment seg = make_segment(pa, pb);
    double len = seg.length;
    if (!(len > 0)) return c;
    Point mid = geodesic_point(seg, 0.5);
    c.steiner.push_back({"m:" + point_key(mid), mid});
    c.edges.push_back({a, c.steiner.back().prov});
    c.edges.push_back({b, c.steiner.back().prov});

    Cell C = F->smallest_common_cell(pa, pb, shift);
    if (C.top) return c;
    double rel = std::min(1.0, std::sqrt(prm.eps_inner));
    double rt = prm.tube_mult * std::sqrt(prm.eps_inner) * len;
    int quals = 0;
    while (quals < prm.max_qual_cells) {
      double dc = F->cell_diam_ub(C);
      if (dc <= len / prm.eps) {
        Cell W = F->cell_of(mid, shift, C.level);
        if (!W.top) {
          double target = std::max(dc / 6.0, len / 6.0);
          int guard = 0;
          while (W.level > lev_lo &&
                 (F->cell_diam_ub(W) > target ||
                  (F->space() == Space::Hyperbolic &&
                   W.level > kHyperSmallLevel)) &&
                 ++guard < 120)
            W = F->cell_of(mid, shift, W.level - 1);
          if (!(F->space() == Space::Hyperbolic &&
                W.level > kHyperSmallLevel)) {
            std::vector<Point> cov;
            try {
              cov = F->boundary_covering(W, rel);
            } catch (const UsageError&) {
              cov.clear();
            }
            std::string base = F->descriptor(W) + "#";
            int best = -1, idx = 0;
            double bestd = 0;
            std::vector<int> keep;
            for (const Point& s : cov) {
              double ds = closest_point_on_segment(s, seg).d;
              if (ds <= rt) keep.push_back(idx);
              if (best < 0 || ds < bestd) {
                best = idx;
                bestd = ds;
              }
              ++idx;
            }
            if (keep.empty() && best >= 0) keep.push_back(best);
            for (int i : keep) {
              c.steiner.push_back({base + std::to_string(i), cov[i]});
              c.edges.push_back({a, c.steiner.back().prov});
              c.edges.push_back({b, c.steiner.back().prov});
            }
          }
        }
        ++quals;
      }
      if (dc > len / prm.eps) break;
      Cell P = F->parent(C);
      if (P == C) break;
      C = P;
      if (C.top) break;
    }
    return c;
  }

  void apply_adjacency(const AdjacencyDelta& dd) {
    for (int s = 0; s < (int)dd.per_shift.size(); ++s) {
      for (const NeighbourPair& np : dd.per_shift[s].destroyed) {
        auto key = std::make_tuple(s, np.a, np.b);
        auto it = adj_contribs.find(key);
        if (it != adj_contribs.end()) {
          unreg_contrib(it->second);
          adj_contribs.erase(it);
        }
      }
      for (const NeighbourPair& np : dd.per_shift[s].created) {
        auto key = std::make_tuple(s, np.a, np.b);
        Contribution c = adjacent_pair_contribution(s, np.a, np.b);
        reg_contrib(c);
        adj_contribs[key] = std::move(c);
      }
    }
  }

  // ---- spherical far-pair band net ----

  void build_band_net() {
    band_ready = true;
    int d = F->dim();
    double lmin = M_PI - 2.0 * prm.cap_colat;
    double tau = lmin * std::sqrt(prm.eps_grid / 3.6);
    double h = 2.0 * tau / std::sqrt((double)d);
    h = std::min(h, 0.45);
    double half = prm.cap_region + 0.12;
    int nb = (int)std::ceil(2.0 * half / h);
    for (int i = 0; i < nb; ++i) {
      double th = M_PI / 2 - half + (i + 0.5) * (2.0 * half / nb);
      double sth = std::sin(th), cth = std::cos(th);
      if (d == 2) {
        int na = std::max(4, (int)std::ceil(2.0 * M_PI * sth / h));
        for (int j = 0; j < na; ++j) {
          double ph = (j + 0.5) * 2.0 * M_PI / na;
          double c[3] = {sth * std::cos(ph), sth * std::sin(ph), cth};
          Point p = make_point(Space::Spherical, 2, c);
          band_net.push_back({"c:" + point_key(p), p});
        }
      } else {
        int nal = std::max(3, (int)std::ceil(M_PI * sth / h));
        for (int ja = 0; ja < nal; ++ja) {
          double al = (ja + 0.5) * M_PI / nal;
          double sal = std::sin(al), cal = std::cos(al);
          int na = std::max(4, (int)std::ceil(2.0 * M_PI * sth * sal / h));
          for (int j = 0; j < na; ++j) {
            double ph = (j + 0.5) * 2.0 * M_PI / na;
            double c[4] = {sth * sal * std::cos(ph), sth * sal * std::sin(ph),
                           sth * cal, cth};
            Point p = make_point(Space::Spherical, 3, c);
            band_net.push_back({"c:" + point_key(p), p});
          }
        }
      }
    }
  }

  Contribution cap_contribution(int id, const Point& p) {
    Contribution c;
    int d = F->dim();
    double last = p.c[d];  // component along the chart axis
    double colat_n = std::acos(std::min(1.0, std::max(-1.0, last)));
    double colat_s = M_PI - colat_n;
    if (std::min(colat_n, colat_s) > prm.cap_colat) return c;
    if (!band_ready) build_band_net();
    double pole[4] = {0, 0, 0, 0};
    pole[d] = (colat_n <= prm.cap_colat) ? -1.0 : 1.0;  // far pole
    Point far = make_point(Space::Spherical, d, pole);
    Point anchor = geodesic_point(make_segment(p, far), 0.5);
    for (const ProvPt& s : band_net) {
      if (dist(s.p, anchor) <= prm.cap_region) {
        c.steiner.push_back(s);
        c.edges.push_back({id, s.prov});
      }
    }
    return c;
  }

  // ---- cell-pair bridges ----

  LevelState& ls(int k, int lev) { return occ[k][lev - lev_lo]; }

  static double center_x(const Point& p) { return p.c[0]; }

  bool canonical(const CellRec& ra, const CellRec& rb) const {
    double cd = dist(ra.center, rb.center);
    double m = std::max(ra.diam, rb.diam);
    if (cd < prm.sep * m) return false;
    if (ra.pcell == rb.pcell) return true;
    double pd = dist(ra.pcenter, rb.pcenter);
    return pd < prm.sep * std::max(ra.pdiam, rb.pdiam);
  }

  std::vector<ProvPt> make_grid(const Cell& a, const CellRec& ra,
                                const Cell& b, const CellRec& rb) const {
    CellKeyLess cl;
    const CellRec& lo = cl(a, b) ? ra : rb;
    const CellRec& hi = cl(a, b) ? rb : ra;
    const Point& pl = store.point(*lo.members.begin());
    const Point& ph = store.point(*hi.members.begin());
    return bridge_grid(pl, ph, lo.diam, hi.diam, prm);
  }

  BKeyLess::K bkey(int k, int lev, const Cell& a, const Cell& b) const {
    CellKeyLess cl;
    if (cl(a, b)) return {k, lev, a, b};
    return {k, lev, b, a};
  }

  void reg_bridge_edges(const CellRec& ra, const CellRec& rb,
                        const std::vector<ProvPt>& grid, bool add) {
    for (const std::set<int>* ms : {&ra.members, &rb.members})
      for (int x : *ms)
        for (const ProvPt& s : grid) {
          if (add)
            reg_edge(x, s.prov, s.p);
          else
            unreg_edge(x, s.prov);
        }
  }

  void activate(int k, int lev, const Cell& a, CellRec& ra, const Cell& b,
                CellRec& rb) {
    auto grid = make_grid(a, ra, b, rb);
    reg_bridge_edges(ra, rb, grid, true);
    ra.partners.push_back(b);
    rb.partners.push_back(a);
    bridges[bkey(k, lev, a, b)] = std::move(grid);
  }

  void deactivate(int k, int lev, const Cell& a, CellRec& ra, const Cell& b,
                  CellRec& rb) {
    auto it = bridges.find(bkey(k, lev, a, b));
    reg_bridge_edges(ra, rb, it->second, false);
    bridges.erase(it);
    auto drop = [](std::vector<Cell>& v, const Cell& c) {
      v.erase(std::find(v.begin(), v.end(), c));
    };
    drop(ra.partners, b);
    drop(rb.partners, a);
  }

  void refresh_bridges(int k, int lev, const Cell& a, CellRec& ra) {
    for (const Cell& b : ra.partners) {
      CellRec& rb = ls(k, lev).cells.at(b);
      auto it = bridges.find(bkey(k, lev, a, b));
      reg_bridge_edges(ra, rb, it->second, false);
      it->second = make_grid(a, ra, b, rb);
      reg_bridge_edges(ra, rb, it->second, true);
    }
  }

  // window scan over same-level occupied cells near a newly occupied one
  void scan_partners(int k, int lev, const Cell& a, CellRec& ra) {
    LevelState& st = ls(k, lev);
    std::vector<Cell> cand;
    if (F->space() == Space::Hyperbolic) {
      double reach =
          (prm.sep + 1.0) * (F->c_growth() + 0.5) * (*st.diams.rbegin());
      double xw;
      if (reach > 120.0)
        xw = std::numeric_limits<double>::infinity();
      else
        xw = 2.0 * (*st.zs.rbegin()) * std::sinh(reach / 2.0) * 1.1;
      double x0 = center_x(ra.center);
      auto it = st.byxd.lower_bound(x0 - xw);
      auto end = st.byxd.upper_bound(x0 + xw);
      for (; it != end; ++it)
        if (!(it->second == a)) cand.push_back(it->second);
    } else {
      ixty x0 = a.ix[0];
      auto it = st.byix.lower_bound(x0 - wix);
      auto end = st.byix.upper_bound(x0 + wix);
      for (; it != end; ++it)
        if (!(it->second == a)) cand.push_back(it->second);
    }
    for (const Cell& b : cand) {
      CellRec& rb = st.cells.at(b);
      if (canonical(ra, rb)) activate(k, lev, a, ra, b, rb);
    }
  }

  void occupy(int k, int lev, const Cell& a, int id) {
    LevelState& st = ls(k, lev);
    auto [it, fresh] = st.cells.try_emplace(a);
    CellRec& r = it->second;
    if (fresh) {
      r.center = F->cell_center(a);
      r.diam = F->cell_diam_ub(a);
      r.pcell = F->parent(a);
      r.pcenter = F->cell_center(r.pcell);
      r.pdiam = F->cell_diam_ub(r.pcell);
      r.members.insert(id);
      if (F->space() == Space::Hyperbolic) {
        st.byxd.insert({center_x(r.center), a});
        st.diams.insert(r.diam);
        st.zs.insert(r.center.z());
      } else {
        st.byix.insert({a.ix[0], a});
      }
      scan_partners(k, lev, a, r);
      return;
    }
    int old_rep = *r.members.begin();
    r.members.insert(id);
    if (id < old_rep) {
      refresh_bridges(k, lev, a, r);
    } else {
      for (const Cell& b : r.partners) {
        const auto& grid = bridges.at(bkey(k, lev, a, b));
        for (const ProvPt& s : grid) reg_edge(id, s.prov, s.p);
      }
    }
  }

  void vacate(int k, int lev, const Cell& a, int id) {
    LevelState& st = ls(k, lev);
    auto it = st.cells.find(a);
    CellRec& r = it->second;
    bool was_rep = (*r.members.begin() == id);
    for (const Cell& b : r.partners) {
      const auto& grid = bridges.at(bkey(k, lev, a, b));
      for (const ProvPt& s : grid) unreg_edge(id, s.prov);
    }
    r.members.erase(id);
    if (r.members.empty()) {
      while (!r.partners.empty()) {
        Cell b = r.partners.back();
        deactivate(k, lev, a, r, b, st.cells.at(b));
      }
      if (F->space() == Space::Hyperbolic) {
        double x0 = center_x(r.center);
        auto rng = st.byxd.equal_range(x0);
        for (auto i = rng.first; i != rng.second; ++i)
          if (i->second == a) {
            st.byxd.erase(i);
            break;
          }
        st.diams.erase(st.diams.find(r.diam));
        st.zs.erase(st.zs.find(r.center.z()));
      } else {
        auto rng = st.byix.equal_range(a.ix[0]);
        for (auto i = rng.first; i != rng.second; ++i)
          if (i->second == a) {
            st.byix.erase(i);
            break;
          }
      }
      st.cells.erase(it);
    } else if (was_rep) {
      refresh_bridges(k, lev, a, r);
    }
  }

  void cells_of_point(int id, const Point& p, bool add) {
    for (int k = 0; k < (int)cshifts.size(); ++k) {
      for (int lev = lev_lo; lev <= lev_hi; ++lev) {
        Cell a = F->cell_of(p, cshifts[k], lev);
        if (a.top) {
          if (F->space() == Space::Spherical) break;  // outside this chart
          continue;
        }
        if (add)
          occupy(k, lev, a, id);
        else
          vacate(k, lev, a, id);
      }
    }
  }

  // ---- ops ----

  AdjacencyDelta insert(int id, const Point& p) {
    AdjacencyDelta dd = store.insert(id, p);
    cells_of_point(id, p, true);
    apply_adjacency(dd);
    if (F->space() == Space::Spherical) {
      Contribution c = cap_contribution(id, p);
      if (!c.edges.empty()) {
        reg_contrib(c);
        cap_contribs[id] = std::move(c);
      }
    }
    return dd;
  }

  AdjacencyDelta erase(int id) {
    Point p = store.point(id);
    AdjacencyDelta dd = store.erase(id);
    cells_of_point(id, p, false);
    apply_adjacency(dd);
    auto it = cap_contribs.find(id);
    if (it != cap_contribs.end()) {
      unreg_contrib(it->second);
      cap_contribs.erase(it);
    }
    return dd;
  }

  SpannerGraph graph() const {
    SpannerGraph g(F->space(), F->dim());
    std::map<int, int> in_id;
    std::vector<int> ids = store.ids();
    std::sort(ids.begin(), ids.end());
    for (int id : ids) in_id[id] = g.add_input(store.point(id));
    std::map<std::string, int> st_id;
    for (const auto& [prov, pr] : steiner_rc)
      st_id[prov] = g.add_steiner(pr.first, prov);
    for (const auto& [key, rc] : edge_rc)
      g.add_edge(in_id.at(key.first), st_id.at(key.second));
    g.canonicalize();
    return g;
  }
};

DynamicG1::DynamicG1(const ShiftFamily& family, double eps, BuildMode mode)
    : impl_(new Impl(family, eps, mode)) {}
DynamicG1::~DynamicG1() = default;

AdjacencyDelta DynamicG1::insert(int id, const Point& p) {
  return impl_->insert(id, p);
}
AdjacencyDelta DynamicG1::erase(int id) { return impl_->erase(id); }
int DynamicG1::point_count() const { return impl_->store.size(); }
SpannerGraph DynamicG1::graph() const { return impl_->graph(); }

// ---------------------------------------------------------------------------

SpannerGraph build_g1(const std::vector<Point>& pts, double eps,
                      const ShiftFamily& family, BuildMode mode) {
  if (!(eps > 0.0) || eps > 0.5) throw UsageError("eps out of range");
  if (family.space() == Space::Hyperbolic && pts.size() > 1) {
    bool ok = false;
    for (int s = 0; s < family.num_shifts() && !ok; ++s) {
      Cell c0 = family.cell_of(pts[0], s, kHyperSmallLevel);
      bool all = true;
      for (size_t i = 1; i < pts.size() && all; ++i)
        all = (family.cell_of(pts[i], s, kHyperSmallLevel) == c0);
      ok = all;
    }
    if (!ok) throw UsageError("hyperbolic diameter precondition violated");
  }
  DynamicG1 dyn(family, eps, mode);
  for (size_t i = 0; i < pts.size(); ++i) dyn.insert((int)i, pts[i]);
  return dyn.graph();
}

SpannerGraph steiner_to_plain(const SpannerGraph& g) {
  if (!g.is_bipartite())
    throw UsageError("steiner_to_plain requires a bipartite graph");
  SpannerGraph out(g.space(), g.dim());
  std::vector<int> idmap(g.num_vertices(), -1);
  for (int v = 0; v < g.num_vertices(); ++v)
    if (g.vertex(v).kind == VertexKind::Input)
      idmap[v] = out.add_input(g.vertex(v).p);
  for (const auto& e : g.edges()) {
    if (g.vertex(e.u).kind == VertexKind::Input &&
        g.vertex(e.v).kind == VertexKind::Input)
      out.add_edge(idmap[e.u], idmap[e.v]);
  }
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (g.vertex(v).kind != VertexKind::Steiner) continue;
    const auto& nb = g.neighbours(v);
    for (size_t i = 0; i < nb.size(); ++i)
      for (size_t j = i + 1; j < nb.size(); ++j)
        out.add_edge(idmap[nb[i].first], idmap[nb[j].first]);
  }
  out.canonicalize();
  return out;
}

SpannerGraph collapse_bipartite(const SpannerGraph& g) {
  if (!g.is_bipartite())
    throw UsageError("collapse_bipartite requires a bipartite graph");
  SpannerGraph out(g.space(), g.dim());
  std::vector<int> idmap(g.num_vertices(), -1);
  for (int v = 0; v < g.num_vertices(); ++v)
    if (g.vertex(v).kind == VertexKind::Input)
      idmap[v] = out.add_input(g.vertex(v).p);
  for (const auto& e : g.edges())
    if (g.vertex(e.u).kind == VertexKind::Input &&
        g.vertex(e.v).kind == VertexKind::Input)
      out.add_edge(idmap[e.u], idmap[e.v]);
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (g.vertex(v).kind != VertexKind::Steiner) continue;
    const auto& nb = g.neighbours(v);
    if (nb.empty())
      throw UsageError("steiner vertex has no input neighbour");
    int best = -1;
    double bd = 0;
    for (const auto& [u, w] : nb)
      if (best < 0 || w < bd || (w == bd && u < best)) {
        best = u;
        bd = w;
      }
    for (const auto& [u, w] : nb)
      if (u != best) out.add_edge(idmap[u], idmap[best]);
  }
  out.canonicalize();
  return out;
}

}  // namespace curvespan
