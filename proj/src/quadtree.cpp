#include "curvespan/quadtree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace curvespan {

namespace {

constexpr ixty kOne = 1;
constexpr int64_t kMaxCoverPoints = 1 << 21;
constexpr double kChartWindow = 6.9282032302755091741;  // 4*sqrt(3)

// floor(a / b) for b > 0.
ixty fdiv(ixty a, ixty b) {
  ixty q = a / b;
  if (a % b != 0 && a < 0) --q;
  return q;
}

// floor(a / 2^k) for k >= 0; beyond the word width only the sign survives.
ixty shr_floor(ixty a, ixty k) {
  if (k >= 127) return a < 0 ? -1 : 0;
  return a >> (int)k;
}

int msb_u128(uixty v) {
  uint64_t hi = (uint64_t)(v >> 64);
  if (hi) return 127 - __builtin_clzll(hi);
  return 63 - __builtin_clzll((uint64_t)v);
}

double to_double(ixty v) { return (double)v; }

ixty floor_to_ixty(double x, const char* what) {
  if (!(std::fabs(x) < 0x1p126)) {
    throw UsageError(std::string(what) +
                     ": coordinate outside the representable window");
  }
  return (ixty)std::floor(x);
}

// Multiplicative order of 2 modulo m (m odd, small).
int pow2_order(int m) {
  int t = 1, v = 2 % m;
  while (v != 1) {
    v = (v * 2) % m;
    ++t;
  }
  return t;
}

// 2^e mod m for any (possibly huge or negative) exponent, via the order.
int pow2mod(ixty e, int m) {
  int t = pow2_order(m);
  int r = (int)(((e % t) + t) % t);
  int v = 1;
  while (r--) v = (v * 2) % m;
  return v;
}

// 2 * asinh(2^l2y), stable across the whole exponent range.
double asinh2_log2(double l2y) {
  if (l2y > 60.0) return 2.0 * M_LN2 * (l2y + 1.0);
  if (l2y < -60.0) return 2.0 * std::exp2(l2y);
  return 2.0 * std::asinh(std::exp2(l2y));
}

// log2(sqrt(4^a + 4^b)) from log2 inputs.
double log2_hypot(double la, double lb) {
  double m = std::max(la, lb), n = std::min(la, lb);
  return m + 0.5 * std::log1p(std::exp2(2.0 * (n - m))) / M_LN2;
}

int small_boundary_level_for(int d) {
  double ll = std::log2(std::max(1.0, std::log2((double)d)));
  return (int)std::floor(4.0 + ll);
}

int lex_coord_count(const Point& p) { return p.ambient(); }

Order lex_order(const Point& p, const Point& q) {
  int n = lex_coord_count(p);
  for (int j = 0; j < n; ++j) {
    if (p.c[j] < q.c[j]) return Order::Less;
    if (p.c[j] > q.c[j]) return Order::Greater;
  }
  return Order::Equal;
}

size_t mix_hash(size_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

size_t CellHash::operator()(const Cell& c) const {
  size_t h = 0x1234fedcULL;
  h = mix_hash(h, (uint64_t)c.space * 131 + c.chart * 7 + (c.top ? 3 : 0));
  h = mix_hash(h, ((uint64_t)(uint32_t)c.shift << 32) | (uint32_t)c.level);
  h = mix_hash(h, (uint64_t)c.zb);
  h = mix_hash(h, (uint64_t)((uixty)c.zb >> 64));
  for (int j = 0; j < 3; ++j) {
    h = mix_hash(h, (uint64_t)c.ix[j]);
    h = mix_hash(h, (uint64_t)((uixty)c.ix[j] >> 64));
    h = mix_hash(h, (uint64_t)c.subx[j]);
  }
  h = mix_hash(h, (uint64_t)c.subz);
  return h;
}

bool CellKeyLess::operator()(const Cell& a, const Cell& b) const {
  if (a.space != b.space) return a.space < b.space;
  if (a.top != b.top) return a.top < b.top;
  if (a.chart != b.chart) return a.chart < b.chart;
  if (a.shift != b.shift) return a.shift < b.shift;
  if (a.level != b.level) return a.level < b.level;
  if (a.zb != b.zb) return a.zb < b.zb;
  for (int j = 0; j < 3; ++j)
    if (a.ix[j] != b.ix[j]) return a.ix[j] < b.ix[j];
  for (int j = 0; j < 3; ++j)
    if (a.subx[j] != b.subx[j]) return a.subx[j] < b.subx[j];
  return a.subz < b.subz;
}

std::string ixty_to_string(ixty v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  uixty u = neg ? (uixty)0 - (uixty)v : (uixty)v;
  std::string s;
  while (u) {
    s.push_back((char)('0' + (int)(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

struct ShiftFamily::Loc {
  bool outside = false;
  std::array<ixty, 3> n{};       // Euclidean/spherical base-level coordinates
  long long beta0 = 0;           // hyperbolic level-0 band
  ixty eint0 = 0;                // pitch exponent of the point's own band
  std::array<ixty, 2> nx{};      // hyperbolic base x-grid coordinates
  std::array<int64_t, 2> ivx{};  // in-tile x position, 62-bit fixed point
  int64_t ivz = 0;               // in-tile log-z position, 62-bit fixed point
};

int ShiftFamily::min_level() const {
  return space_ == Space::Hyperbolic ? -kSubDepth : base_level_;
}

int ShiftFamily::top_level() const {
  return space_ == Space::Hyperbolic ? ltop_h_ : le_;
}

int ShiftFamily::rho_grid(int level, int shift) const {
  int i = shifts_[shift].i;
  return (i * pow2mod((ixty)le_ - level, D_ + 1)) % (D_ + 1);
}

int ShiftFamily::rho_x(ixty eint, int shift) const {
  int j = shifts_[shift].j;
  ixty mx = kOne << 40;
  return (j * pow2mod(mx - eint, Dh_ + 1)) % (Dh_ + 1);
}

// Child-offset bit between `level` and `level + 1`: the two residues satisfy
// 2*rho(level+1) = rho(level) + cbit*(D+1).
int ShiftFamily::cbit(int level, int shift) const {
  int v = 2 * rho_grid(level + 1, shift) - rho_grid(level, shift);
  return v / (D_ + 1);
}

ixty ShiftFamily::grid_index(ixty n, int level, int shift) const {
  ixty m = shr_floor(n, (ixty)level - base_level_);
  return fdiv(m - rho_grid(level, shift), D_ + 1);
}

// Pitch exponent (integer part, in width = 2^{e + efrac/3} form) of the
// x-grid of a hyperbolic band at `level`.
ixty ShiftFamily::eint_cell(int level, ixty zb, int shift) const {
  ixty zi = (ixty)shifts_[shift].i << mh_;
  ixty s3 = 3 * (((zb + 1) << level) - 1) + zi;
  ixty efrac = ((s3 % 3) + 3) % 3;
  return (s3 - efrac) / 3;
}

// x-index at pitch e_par of the tile that contains index a at pitch e_child.
// floor((a - t) / 2^dk) with t = (2^dk rp - rc)/(Dh+1) rewritten so it stays
// exact for arbitrarily large dk: floor over 2^dk first, then over Dh+1.
ixty ShiftFamily::coarsen_x(ixty a, ixty e_child, ixty e_par, int shift) const {
  ixty dk = e_par - e_child;
  int rp = rho_x(e_par, shift), rc = rho_x(e_child, shift);
  if (a > (kOne << 125) || a < -(kOne << 125))
    throw UsageError("coarsen: index outside the representable window");
  return fdiv(shr_floor((Dh_ + 1) * a + rc, dk) - rp, Dh_ + 1);
}

Cell ShiftFamily::sphere_sentinel(int shift) const {
  (void)shift;
  Cell c;
  c.space = Space::Spherical;
  c.chart = 2;
  c.top = true;
  c.shift = (int)shifts_.size() - 1;
  c.level = le_ + 2;
  c.d = d_;
  return c;
}

Cell ShiftFamily::hyper_none(int shift) const {
  Cell c;
  c.space = Space::Hyperbolic;
  c.top = true;
  c.shift = shift;
  c.level = 63;
  c.d = d_;
  return c;
}

ShiftFamily::Loc ShiftFamily::locate(const Point& p, int shift) const {
  if (p.space != space_ || p.d != d_)
    throw UsageError("point does not match the shift family's space");
  Loc loc;
  const ShiftDesc& sd = shifts_[shift];
  if (space_ == Space::Euclidean) {
    double sq = std::sqrt((double)d_);
    for (int j = 0; j < d_; ++j) {
      double u = p.c[j] * sq;
      if (!(std::fabs(u) <= 0x1p44))
        throw UsageError("point outside the Euclidean coordinate window");
      loc.n[j] = floor_to_ixty(std::ldexp(u * (D_ + 1), -base_level_), "cell_of");
    }
    return loc;
  }
  if (space_ == Space::Spherical) {
    if (sd.chart == 2) {
      loc.outside = true;
      return loc;
    }
    double w = p.c[d_];
    double denom = sd.chart == 0 ? 1.0 - w : 1.0 + w;
    if (denom < 1e-7) {
      loc.outside = true;
      return loc;
    }
    double a[3];
    stereo_project(p, sd.chart == 0 ? Chart::Plus : Chart::Minus, a);
    double sq = std::sqrt((double)d_);
    for (int j = 0; j < d_; ++j) {
      if (!(std::fabs(a[j]) <= kChartWindow)) {
        loc.outside = true;
        return loc;
      }
      loc.n[j] = floor_to_ixty(std::ldexp(a[j] * sq * (D_ + 1), -base_level_),
                               "cell_of");
    }
    return loc;
  }
  // Hyperbolic.
  double z = p.c[d_ - 1];
  double zt = std::log2(z);
  if (!(std::fabs(zt) <= 65536.0))
    throw UsageError("point outside the hyperbolic z window");
  long long zi = (long long)sd.i << mh_;
  int r0 = (int)(zi % 3);
  loc.beta0 = (long long)std::floor(zt - r0 / 3.0) - (zi - r0) / 3;
  long long s30 = 3 * loc.beta0 + zi;
  int efrac = (int)(((s30 % 3) + 3) % 3);
  loc.eint0 = (s30 - efrac) / 3;
  static const double tab3[3] = {1.0, std::exp2(-1.0 / 3.0),
                                 std::exp2(-2.0 / 3.0)};
  double sq = d_ >= 3 ? std::sqrt((double)(d_ - 1)) : 1.0;
  int rx0 = rho_x(loc.eint0, shift);
  double vz = (zt - r0 / 3.0) - std::floor(zt - r0 / 3.0);
  loc.ivz = std::clamp((int64_t)(vz * 0x1p62), (int64_t)0,
                       (int64_t)((kOne << 62) - 1));
  for (int j = 0; j < d_ - 1; ++j) {
    double xt = p.c[j] * sq;
    double uraw = std::ldexp(xt, (int)std::max<ixty>(
                                     std::min<ixty>(-loc.eint0, 300000),
                                     -300000)) *
                  tab3[efrac];
    double unn = uraw * (Dh_ + 1);
    if (!(std::fabs(unn) < 0x1p126))
      throw UsageError("point outside the hyperbolic x window");
    loc.nx[j] = floor_to_ixty(unn, "cell_of");
    ixty a0 = fdiv(loc.nx[j] - rx0, Dh_ + 1);
    double v = (unn - to_double(a0 * (Dh_ + 1) + rx0)) / (Dh_ + 1);
    loc.ivx[j] = std::clamp((int64_t)(v * 0x1p62), (int64_t)0,
                            (int64_t)((kOne << 62) - 1));
  }
  return loc;
}

Cell ShiftFamily::euclid_like_cell(const Loc& loc, int shift, int level) const {
  if (loc.outside) return sphere_sentinel(shift);
  Cell c;
  c.space = space_;
  c.chart = shifts_[shift].chart;
  c.shift = shift;
  c.level = level;
  c.d = d_;
  for (int j = 0; j < d_; ++j) c.ix[j] = grid_index(loc.n[j], level, shift);
  return c;
}

Cell ShiftFamily::hyper_cell(const Loc& loc, int shift, int level) const {
  Cell c;
  c.space = Space::Hyperbolic;
  c.shift = shift;
  c.d = d_;
  if (level >= 0) {
    c.level = level;
    long long betaL = loc.beta0 >> level;
    c.zb = betaL;
    ixty k = (((ixty)betaL + 1) << level) - 1 - loc.beta0;
    ixty eint = loc.eint0 + k;
    int r = rho_x(eint, shift);
    for (int j = 0; j < d_ - 1; ++j)
      c.ix[j] = fdiv(shr_floor(loc.nx[j], k) - r, Dh_ + 1);
    return c;
  }
  c = hyper_cell(loc, shift, 0);
  int kk = -level;
  c.level = level;
  c.subz = loc.ivz >> (62 - kk);
  for (int j = 0; j < d_ - 1; ++j) c.subx[j] = loc.ivx[j] >> (62 - kk);
  return c;
}

Cell ShiftFamily::cell_of(const Point& p, int shift, int level) const {
  if (shift < 0 || shift >= (int)shifts_.size())
    throw UsageError("shift index out of range");
  if (space_ == Space::Hyperbolic) {
    // Band merges can reach level 62, so lookups must accept those cells.
    if (level < -kSubDepth || level > 62)
      throw UsageError("cell_of: level out of range");
    return hyper_cell(locate(p, shift), shift, level);
  }
  if (level < base_level_ || level > 60)
    throw UsageError("cell_of: level out of range");
  return euclid_like_cell(locate(p, shift), shift, level);
}

bool ShiftFamily::children_partition(const Cell& c) const { return !c.top; }

std::vector<Cell> ShiftFamily::children(const Cell& c) const {
  std::vector<Cell> out;
  if (c.space != space_) throw UsageError("cell from a different family");
  if (c.top) {
    // Only the whole-sphere pseudo-shift cell descends into chart roots;
    // sentinels on regular shifts are bare "outside the chart" markers.
    if (space_ != Space::Spherical || c.shift != (int)shifts_.size() - 1)
      throw UsageError("this cell does not partition");
    for (int chart = 0; chart < 2; ++chart) {
      Cell r;
      r.space = space_;
      r.chart = chart;
      r.shift = c.shift;
      r.level = le_ + 1;
      r.d = d_;
      out.push_back(r);
    }
    return out;
  }
  if (space_ != Space::Hyperbolic) {
    if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1)
      throw UsageError("chart roots of the whole-sphere cell do not split");
    int child_level = c.level - 1;
    if (child_level < base_level_)
      throw UsageError("children: below the finest representable level");
    int cb = cbit(child_level, c.shift);
    int n = 1 << d_;
    for (int r = 0; r < n; ++r) {
      Cell ch = c;
      ch.level = child_level;
      for (int j = 0; j < d_; ++j)
        ch.ix[j] = 2 * c.ix[j] + cb + ((r >> (d_ - 1 - j)) & 1);
      out.push_back(ch);
    }
    return out;
  }
  // Hyperbolic.
  if (c.level > 0) {
    int lc = c.level - 1;
    ixty zb_bot = 2 * c.zb;
    ixty e_par = eint_cell(c.level, c.zb, c.shift);
    ixty e_bot = eint_cell(lc, zb_bot, c.shift);
    ixty dk = e_par - e_bot;
    int nax = d_ - 1;
    if (dk * nax > 17)
      throw UsageError("children: cell too coarse to enumerate; use desc");
    int rp = rho_x(e_par, c.shift), rc = rho_x(e_bot, c.shift);
    ixty t = ((kOne << (int)dk) * rp - rc) / (Dh_ + 1);
    int64_t total = (int64_t)1 << (int)(dk * nax);
    for (int64_t r = 0; r < total; ++r) {
      Cell ch = c;
      ch.level = lc;
      ch.zb = zb_bot;
      for (int j = 0; j < nax; ++j) {
        ixty off = 0;
        for (int b = 0; b < (int)dk; ++b) {
          int bit = (int)((r >> (b * nax + (nax - 1 - j))) & 1);
          off |= (ixty)bit << b;
        }
        ch.ix[j] = (c.ix[j] << (int)dk) + t + off;
      }
      out.push_back(ch);
    }
    Cell top = c;
    top.level = lc;
    top.zb = 2 * c.zb + 1;
    out.push_back(top);
    return out;
  }
  // Sub-box levels: 2^d children, z bit most significant in the rank.
  int kk = -c.level;
  if (kk + 1 > kSubDepth)
    throw UsageError("children: below the finest representable level");
  int n = 1 << d_;
  for (int r = 0; r < n; ++r) {
    Cell ch = c;
    ch.level = c.level - 1;
    int zbit = (r >> (d_ - 1)) & 1;
    ch.subz = (c.subz << 1) | zbit;
    for (int j = 0; j < d_ - 1; ++j)
      ch.subx[j] = (c.subx[j] << 1) | ((r >> (d_ - 2 - j)) & 1);
    out.push_back(ch);
  }
  return out;
}

Cell ShiftFamily::parent(const Cell& c) const {
  if (c.space != space_) throw UsageError("cell from a different family");
  if (c.top) throw UsageError("parent: cell has no parent");
  if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1)
    return sphere_sentinel(c.shift);  // chart root
  if (space_ != Space::Hyperbolic) {
    if (c.level >= 60) throw UsageError("parent: level cap reached");
    Cell pa = c;
    pa.level = c.level + 1;
    int cb = cbit(c.level, c.shift);
    for (int j = 0; j < d_; ++j) pa.ix[j] = fdiv(c.ix[j] - cb, 2);
    return pa;
  }
  if (c.level >= 0) {
    if (c.level >= 62) throw UsageError("parent: level cap reached");
    Cell pa = c;
    pa.level = c.level + 1;
    pa.zb = c.zb >> 1;
    ixty e_par = eint_cell(pa.level, pa.zb, c.shift);
    ixty e_ch = eint_cell(c.level, c.zb, c.shift);
    for (int j = 0; j < d_ - 1; ++j)
      pa.ix[j] = coarsen_x(c.ix[j], e_ch, e_par, c.shift);
    return pa;
  }
  Cell pa = c;
  pa.level = c.level + 1;
  pa.subz = c.subz >> 1;
  for (int j = 0; j < d_ - 1; ++j) pa.subx[j] = c.subx[j] >> 1;
  if (pa.level == 0) {
    pa.subz = 0;
    for (int j = 0; j < 3; ++j) pa.subx[j] = 0;
  }
  return pa;
}

Cell ShiftFamily::smallest_common_cell(const Point& p, const Point& q,
                                       int shift) const {
  if (shift < 0 || shift >= (int)shifts_.size())
    throw UsageError("shift index out of range");
  if (space_ != Space::Hyperbolic) {
    Loc lp = locate(p, shift), lq = locate(q, shift);
    if (lp.outside || lq.outside) return sphere_sentinel(shift);
    ixty rb = rho_grid(base_level_, shift);
    int kk = 0;
    for (int j = 0; j < d_; ++j) {
      ixty x = fdiv(lp.n[j] - rb, D_ + 1) - w_word_[shift];
      ixty y = fdiv(lq.n[j] - rb, D_ + 1) - w_word_[shift];
      if (x != y) kk = std::max(kk, msb_u128((uixty)(x ^ y)) + 1);
    }
    if (base_level_ + kk > 60) {
      // A grid line through the origin survives every coarsening when the
      // shift leaves it fixed, so pairs straddling it share no cell.
      if (space_ == Space::Spherical) return sphere_sentinel(shift);
      Cell none;
      none.space = space_;
      none.top = true;
      none.shift = shift;
      none.level = 61;
      none.d = d_;
      return none;
    }
    return euclid_like_cell(lp, shift, base_level_ + kk);
  }
  Loc lp = locate(p, shift), lq = locate(q, shift);
  Cell cp0 = hyper_cell(lp, shift, 0), cq0 = hyper_cell(lq, shift, 0);
  if (cp0 == cq0) {
    int prefix = kSubDepth;
    int64_t xz = lp.ivz ^ lq.ivz;
    if (xz) prefix = std::min(prefix, 62 - (64 - __builtin_clzll((uint64_t)xz)));
    for (int j = 0; j < d_ - 1; ++j) {
      int64_t xx = lp.ivx[j] ^ lq.ivx[j];
      if (xx)
        prefix = std::min(prefix, 62 - (64 - __builtin_clzll((uint64_t)xx)));
    }
    return hyper_cell(lp, shift, -prefix);
  }
  if ((lp.beta0 >= 0) != (lq.beta0 >= 0)) return hyper_none(shift);
  if (hyper_cell(lp, shift, 62) != hyper_cell(lq, shift, 62))
    return hyper_none(shift);
  int lo = 1, hi = 62;  // equality is monotone in the level
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (hyper_cell(lp, shift, mid) == hyper_cell(lq, shift, mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  return hyper_cell(lp, shift, lo);
}

Order ShiftFamily::order_compare(const Point& p, const Point& q,
                                 int shift) const {
  if (shift < 0 || shift >= (int)shifts_.size())
    throw UsageError("shift index out of range");
  if (space_ != Space::Hyperbolic) {
    Loc lp = locate(p, shift), lq = locate(q, shift);
    if (lp.outside != lq.outside) return lp.outside ? Order::Greater : Order::Less;
    if (!lp.outside) {
      ixty rb = rho_grid(base_level_, shift);
      int best_axis = -1, best_bit = -1;
      ixty xs[3] = {0, 0, 0}, ys[3] = {0, 0, 0};
      for (int j = 0; j < d_; ++j) {
        xs[j] = fdiv(lp.n[j] - rb, D_ + 1) - w_word_[shift];
        ys[j] = fdiv(lq.n[j] - rb, D_ + 1) - w_word_[shift];
        if (xs[j] != ys[j]) {
          int b = msb_u128((uixty)(xs[j] ^ ys[j]));
          if (b > best_bit) {
            best_bit = b;
            best_axis = j;
          }
        }
      }
      if (best_axis >= 0) {
        uixty bx = (uixty)xs[best_axis] ^ ((uixty)1 << 127);
        uixty by = (uixty)ys[best_axis] ^ ((uixty)1 << 127);
        return bx < by ? Order::Less : Order::Greater;
      }
    }
    return lex_order(p, q);
  }
  // Hyperbolic.
  Loc lp = locate(p, shift), lq = locate(q, shift);
  Cell cp0 = hyper_cell(lp, shift, 0), cq0 = hyper_cell(lq, shift, 0);
  if (cp0 == cq0) {
    // Sub-box Morton order, z axis most significant.
    int best_axis = -2, best_bit = -1;  // -1 encodes the z axis
    int64_t xz = lp.ivz ^ lq.ivz;
    if (xz) {
      best_bit = 63 - __builtin_clzll((uint64_t)xz);
      best_axis = -1;
    }
    for (int j = 0; j < d_ - 1; ++j) {
      int64_t xx = lp.ivx[j] ^ lq.ivx[j];
      if (xx) {
        int b = 63 - __builtin_clzll((uint64_t)xx);
        if (b > best_bit) {
          best_bit = b;
          best_axis = j;
        }
      }
    }
    if (best_axis == -2) return lex_order(p, q);
    if (best_axis == -1) return lp.ivz < lq.ivz ? Order::Less : Order::Greater;
    return lp.ivx[best_axis] < lq.ivx[best_axis] ? Order::Less : Order::Greater;
  }
  if ((lp.beta0 >= 0) != (lq.beta0 >= 0))
    return lp.beta0 < lq.beta0 ? Order::Less : Order::Greater;
  if (hyper_cell(lp, shift, 62) != hyper_cell(lq, shift, 62)) {
    // x-chains split by a shift plane never merge; z-collapsed indices give
    // the forest order directly.
    Cell a = hyper_cell(lp, shift, 62), b = hyper_cell(lq, shift, 62);
    if (a.zb != b.zb) return a.zb < b.zb ? Order::Less : Order::Greater;
    for (int j = 0; j < d_ - 1; ++j)
      if (a.ix[j] != b.ix[j])
        return a.ix[j] < b.ix[j] ? Order::Less : Order::Greater;
    return lex_order(p, q);
  }
  int lo = 1, hi = 62;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (hyper_cell(lp, shift, mid) == hyper_cell(lq, shift, mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  Cell cp = hyper_cell(lp, shift, lo - 1), cq = hyper_cell(lq, shift, lo - 1);
  if (cp.zb != cq.zb) return cp.zb < cq.zb ? Order::Less : Order::Greater;
  // Same band below the join: Morton on the x offsets. Per axis, find the
  // coarsest pitch where the two indices still differ; axis 0 wins ties.
  ixty e_child = eint_cell(lo - 1, cp.zb, shift);
  ixty e_par = eint_cell(lo, hyper_cell(lp, shift, lo).zb, shift);
  auto x_at = [&](const Loc& l, ixty e, int j) {
    ixty k = e - l.eint0;
    return fdiv(shr_floor(l.nx[j], k) - rho_x(e, shift), Dh_ + 1);
  };
  ixty best_b = -2;
  int best_axis = -1;
  for (int j = 0; j < d_ - 1; ++j) {
    if (cp.ix[j] == cq.ix[j]) continue;
    ixty elo = e_child, ehi = e_par;  // differ at elo, equal at ehi
    while (ehi - elo > 1) {
      ixty mid = elo + (ehi - elo) / 2;
      if (x_at(lp, mid, j) == x_at(lq, mid, j))
        ehi = mid;
      else
        elo = mid;
    }
    ixty b = elo - e_child;  // divergence bit position for this axis
    if (b > best_b) {
      best_b = b;
      best_axis = j;
    }
  }
  ixty ediv = e_child + best_b;
  ixty ap = x_at(lp, ediv, best_axis), aq = x_at(lq, ediv, best_axis);
  return ap < aq ? Order::Less : Order::Greater;
}

Cell ShiftFamily::tile_parent(const Cell& c) const {
  if (space_ != Space::Hyperbolic || c.space != space_ || c.top || c.level < 0)
    throw UsageError("tile_parent: expects a hyperbolic cell of level >= 0");
  Cell pa = c;
  pa.zb = c.zb + 1;
  ixty e_par = eint_cell(c.level, pa.zb, c.shift);
  ixty e_ch = eint_cell(c.level, c.zb, c.shift);
  for (int j = 0; j < d_ - 1; ++j)
    pa.ix[j] = coarsen_x(c.ix[j], e_ch, e_par, c.shift);
  return pa;
}

Cell ShiftFamily::tile_lca(const Point& p, const Point& q, int shift,
                           int level) const {
  if (space_ != Space::Hyperbolic) throw UsageError("tile_lca: hyperbolic only");
  if (level < 0 || level > 60) throw UsageError("tile_lca: level out of range");
  Cell a = cell_of(p, shift, level), b = cell_of(q, shift, level);
  // Align bands first; representable points sit at most ~2100 level-0 bands
  // apart, so the band gap at any level is well under the guard.
  for (int64_t it = 0; a.zb != b.zb; ++it) {
    if (it > 4200) return hyper_none(shift);
    if (a.zb < b.zb)
      a = tile_parent(a);
    else
      b = tile_parent(b);
  }
  // Once bands agree, the x-index gap at least halves per joint climb and a
  // surviving dividing grid line loses one survival bit per climb, so any
  // pair that merges at all merges within ~260 joint climbs. Only the
  // unshifted-x family has a permanent dividing line (x = 0).
  for (int it = 0; it < 300; ++it) {
    if (a == b) return a;
    a = tile_parent(a);
    b = tile_parent(b);
  }
  return hyper_none(shift);
}

bool ShiftFamily::tile_contains(const Cell& anc, const Cell& c) const {
  if (space_ != Space::Hyperbolic || anc.level != c.level || anc.top || c.top)
    return false;
  if (anc.shift != c.shift) return false;
  if (anc.zb - c.zb > (ixty)3 * (kOne << 21)) return false;
  Cell cur = c;
  while (cur.zb < anc.zb) cur = tile_parent(cur);
  return cur == anc;
}

CellBox ShiftFamily::cell_box(const Cell& c) const {
  if (c.top) throw UsageError("cell_box: cell has no box");
  CellBox b;
  b.d = d_;
  b.space = space_;
  b.chart = c.chart;
  if (space_ != Space::Hyperbolic) {
    double sq = std::sqrt((double)d_);
    bool chart_root =
        space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1;
    for (int j = 0; j < d_; ++j) {
      if (chart_root) {
        b.xlo[j] = -kChartWindow;
        b.xhi[j] = kChartWindow;
        continue;
      }
      double side = std::ldexp(1.0, c.level);
      double lo =
          (to_double(c.ix[j]) + rho_grid(c.level, c.shift) / (D_ + 1.0)) * side;
      b.xlo[j] = lo / sq;
      b.xhi[j] = (lo + side) / sq;
    }
    return b;
  }
  long long zi = (long long)shifts_[c.shift].i << mh_;
  double sq = d_ >= 3 ? std::sqrt((double)(d_ - 1)) : 1.0;
  if (c.level >= 0) {
    ixty nlo = 3 * (c.zb << c.level) + zi;
    ixty nhi = 3 * ((c.zb + 1) << c.level) + zi;
    b.zlo = std::exp2(to_double(nlo) / 3.0);
    b.zhi = std::exp2(to_double(nhi) / 3.0);
    ixty e = eint_cell(c.level, c.zb, c.shift);
    ixty s3 = 3 * (((c.zb + 1) << c.level) - 1) + zi;
    double w = std::exp2(to_double(s3) / 3.0);
    int r = rho_x(e, c.shift);
    for (int j = 0; j < d_ - 1; ++j) {
      double lo = (to_double(c.ix[j]) + r / (Dh_ + 1.0)) * w;
      b.xlo[j] = lo / sq;
      b.xhi[j] = (lo + w) / sq;
    }
    if (!std::isfinite(b.zlo) || !std::isfinite(b.zhi))
      throw UsageError("cell_box: cell outside the floating-point range");
    return b;
  }
  Cell host = c;
  host.level = 0;
  host.subz = 0;
  for (int j = 0; j < 3; ++j) host.subx[j] = 0;
  CellBox hb = cell_box(host);
  int kk = -c.level;
  double frac = std::ldexp(1.0, -kk);
  double l2lo = std::log2(hb.zlo);
  b.zlo = std::exp2(l2lo + c.subz * frac);
  b.zhi = std::exp2(l2lo + (c.subz + 1) * frac);
  for (int j = 0; j < d_ - 1; ++j) {
    double w = hb.xhi[j] - hb.xlo[j];
    b.xlo[j] = hb.xlo[j] + c.subx[j] * frac * w;
    b.xhi[j] = hb.xlo[j] + (c.subx[j] + 1) * frac * w;
  }
  return b;
}

bool ShiftFamily::cell_contains(const Cell& c, const Point& p) const {
  if (c.top) {
    if (space_ == Space::Spherical) return true;
    return false;
  }
  if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1) {
    // Chart roots split the sphere by canonical chart.
    return (p.c[d_] <= 0.0) == (c.chart == 0);
  }
  return cell_of(p, c.shift, c.level) == c;
}

Point ShiftFamily::cell_center(const Cell& c) const {
  CellBox b = cell_box(c);
  Point p;
  p.space = space_;
  p.d = d_;
  if (space_ == Space::Euclidean) {
    for (int j = 0; j < d_; ++j) p.c[j] = 0.5 * (b.xlo[j] + b.xhi[j]);
    return p;
  }
  if (space_ == Space::Spherical) {
    double a[3];
    for (int j = 0; j < d_; ++j) a[j] = 0.5 * (b.xlo[j] + b.xhi[j]);
    return stereo_unproject(d_, c.chart == 1 ? Chart::Minus : Chart::Plus, a);
  }
  for (int j = 0; j < d_ - 1; ++j) p.c[j] = 0.5 * (b.xlo[j] + b.xhi[j]);
  double zc = std::sqrt(b.zlo) * std::sqrt(b.zhi);
  if (!std::isfinite(zc) || zc <= 0)
    throw UsageError("cell_center: cell outside the floating-point range");
  p.c[d_ - 1] = zc;
  return p;
}

double ShiftFamily::cell_diam_ub(const Cell& c) const {
  if (c.top) {
    if (space_ == Space::Spherical) return M_PI;
    return std::numeric_limits<double>::infinity();
  }
  if (space_ == Space::Euclidean) return std::ldexp(1.0, c.level);
  if (space_ == Space::Spherical) {
    if (c.shift == (int)shifts_.size() - 1) return M_PI;  // chart root
    return std::min(M_PI, std::ldexp(1.0, c.level));
  }
  long long zi = (long long)shifts_[c.shift].i << mh_;
  if (c.level >= 0) {
    ixty nlo = 3 * (c.zb << c.level) + zi;
    ixty nhi = 3 * ((c.zb + 1) << c.level) + zi;
    ixty s3 = 3 * (((c.zb + 1) << c.level) - 1) + zi;
    double l2zlo = to_double(nlo) / 3.0, l2zhi = to_double(nhi) / 3.0;
    double l2w = to_double(s3) / 3.0;
    double vert = (l2zhi - l2zlo) * M_LN2;
    double bottom = asinh2_log2(l2w - l2zlo - 1.0);
    double l2dz = l2zhi + std::log1p(-std::exp2(l2zlo - l2zhi)) / M_LN2;
    double diag = asinh2_log2(log2_hypot(l2w, l2dz) - 0.5 * (l2zlo + l2zhi) - 1.0);
    return std::max({vert, bottom, diag}) * (1.0 + 1e-12);
  }
  CellBox b = cell_box(c);
  Point lo, hi, mix;
  lo.space = hi.space = mix.space = Space::Hyperbolic;
  lo.d = hi.d = mix.d = d_;
  for (int j = 0; j < d_ - 1; ++j) {
    lo.c[j] = b.xlo[j];
    hi.c[j] = b.xhi[j];
    mix.c[j] = b.xhi[j];
  }
  lo.c[d_ - 1] = b.zlo;
  hi.c[d_ - 1] = b.zlo;
  mix.c[d_ - 1] = b.zhi;
  double bottom = dist(lo, hi);
  double diag = dist(lo, mix);
  double vert = std::log(b.zhi / b.zlo);
  return std::max({vert, bottom, diag}) * (1.0 + 1e-12);
}

double ShiftFamily::cell_diam_lb(const Cell& c) const {
  if (c.top) {
    if (space_ == Space::Spherical) return M_PI;
    return std::numeric_limits<double>::infinity();
  }
  if (space_ == Space::Euclidean) return std::ldexp(1.0, c.level);
  if (space_ == Space::Spherical) {
    if (c.shift == (int)shifts_.size() - 1) return 1.0;
    return std::min(3.0, std::ldexp(1.0, c.level) / (1.0 + 12.0 * d_));
  }
  return cell_diam_ub(c) / (1.0 + 1e-9);
}

std::vector<Point> ShiftFamily::boundary_covering(const Cell& c,
                                                  double eps) const {
  if (!(eps > 0.0) || !(eps <= 1.0))
    throw UsageError("boundary_covering: eps must be in (0, 1]");
  if (c.top) throw UsageError("boundary_covering: unsupported cell");
  if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1)
    throw UsageError("boundary_covering: unsupported cell");
  if (space_ == Space::Hyperbolic && c.level > small_boundary_level_for(d_))
    throw UsageError("boundary_covering: cell boundary is not small");
  double r = eps * cell_diam_lb(c);
  CellBox b = cell_box(c);
  std::vector<Point> out;
  int64_t budget = kMaxCoverPoints;
  auto spend = [&budget](int64_t n) {
    budget -= n;
    if (budget < 0)
      throw UsageError("boundary_covering: covering too large to materialize");
  };
  if (space_ != Space::Hyperbolic) {
    // Chart-space facet grids; metric distance never exceeds chart distance
    // on either chart, so a chart-space net of radius r is a metric one too.
    int nvary = d_ - 1;
    for (int f = 0; f < d_; ++f) {
      for (int side = 0; side < 2; ++side) {
        int64_t counts[3] = {1, 1, 1};
        int64_t total = 1;
        for (int j = 0; j < d_; ++j) {
          if (j == f) continue;
          double len = b.xhi[j] - b.xlo[j];
          counts[j] = std::max<int64_t>(
              1, (int64_t)std::ceil(len * std::sqrt(std::max(1, nvary)) / (2 * r)));
          total *= counts[j];
        }
        spend(total);
        for (int64_t t = 0; t < total; ++t) {
          int64_t rem = t;
          double a[3];
          for (int j = 0; j < d_; ++j) {
            if (j == f) {
              a[j] = side ? b.xhi[j] : b.xlo[j];
              continue;
            }
            int64_t v = rem % counts[j];
            rem /= counts[j];
            double len = b.xhi[j] - b.xlo[j];
            a[j] = b.xlo[j] + (v + 0.5) * len / counts[j];
          }
          if (space_ == Space::Euclidean) {
            Point p;
            p.space = space_;
            p.d = d_;
            for (int j = 0; j < d_; ++j) p.c[j] = a[j];
            out.push_back(p);
          } else {
            out.push_back(stereo_unproject(
                d_, c.chart == 1 ? Chart::Minus : Chart::Plus, a));
          }
        }
      }
    }
    return out;
  }
  // Hyperbolic horobox: top and bottom horospherical facets plus the
  // vertical sides.
  int nx = d_ - 1;
  auto emit = [&](const double* x, double z) {
    Point p;
    p.space = Space::Hyperbolic;
    p.d = d_;
    for (int j = 0; j < nx; ++j) p.c[j] = x[j];
    p.c[d_ - 1] = z;
    out.push_back(p);
  };
  for (int side = 0; side < 2; ++side) {
    double z = side ? b.zhi : b.zlo;
    int64_t counts[2] = {1, 1};
    int64_t total = 1;
    for (int j = 0; j < nx; ++j) {
      double len = b.xhi[j] - b.xlo[j];
      counts[j] = std::max<int64_t>(
          1, (int64_t)std::ceil(len * std::sqrt((double)nx) / (2 * r * z)));
      total *= counts[j];
    }
    spend(total);
    for (int64_t t = 0; t < total; ++t) {
      int64_t rem = t;
      double x[2];
      for (int j = 0; j < nx; ++j) {
        int64_t v = rem % counts[j];
        rem /= counts[j];
        double len = b.xhi[j] - b.xlo[j];
        x[j] = b.xlo[j] + (v + 0.5) * len / counts[j];
      }
      emit(x, z);
    }
  }
  double hspan = std::log(b.zhi / b.zlo);
  for (int f = 0; f < nx; ++f) {
    for (int side = 0; side < 2; ++side) {
      int64_t nz = std::max<int64_t>(1, (int64_t)std::ceil(hspan / r));
      for (int64_t tz = 0; tz < nz; ++tz) {
        double z = b.zlo * std::exp((tz + 0.5) * hspan / nz);
        int64_t counts = 1;
        if (nx >= 2) {
          int jo = 1 - f;  // the one remaining x axis in d = 3
          double len = b.xhi[jo] - b.xlo[jo];
          counts = std::max<int64_t>(1, (int64_t)std::ceil(len / (r * z)));
          spend(counts);
          for (int64_t t = 0; t < counts; ++t) {
            double x[2];
            x[f] = side ? b.xhi[f] : b.xlo[f];
            x[jo] = b.xlo[jo] + (t + 0.5) * len / counts;
            emit(x, z);
          }
        } else {
          spend(1);
          double x[2];
          x[f] = side ? b.xhi[f] : b.xlo[f];
          emit(x, z);
        }
      }
    }
  }
  return out;
}

std::vector<Point> ShiftFamily::region_covering(const Cell& c, double frac,
                                                double eps_abs) const {
  if (space_ != Space::Hyperbolic)
    throw UsageError("region_covering: hyperbolic cells only");
  if (c.top) throw UsageError("region_covering: unsupported cell");
  if (!(frac >= 0.0 && frac <= 1.0))
    throw UsageError("region_covering: frac must be in [0, 1]");
  if (!(eps_abs > 0.0)) throw UsageError("region_covering: eps must be > 0");
  CellBox b = cell_box(c);
  double zs = std::exp2(std::log2(b.zlo) +
                        frac * (std::log2(b.zhi) - std::log2(b.zlo)));
  int nx = d_ - 1;
  int64_t counts[2] = {1, 1};
  int64_t total = 1;
  // Points on the slice sit at equal height, where dist = 2 asinh(|dx| / 2z);
  // a grid step of 4 z sinh(eps/2) / sqrt(nx) per axis is exactly enough.
  double reach = 4.0 * std::sinh(0.5 * eps_abs) * zs;
  for (int j = 0; j < nx; ++j) {
    double len = b.xhi[j] - b.xlo[j];
    double want = std::ceil(len * std::sqrt((double)nx) / reach);
    counts[j] = std::isfinite(want) && want > 1
                    ? (int64_t)std::min(want, 4.0e18)
                    : 1;
    total *= counts[j];
  }
  if (total > kMaxCoverPoints)
    throw UsageError("region_covering: covering too large to materialize");
  std::vector<Point> out;
  out.reserve(total);
  for (int64_t t = 0; t < total; ++t) {
    int64_t rem = t;
    Point p;
    p.space = Space::Hyperbolic;
    p.d = d_;
    for (int j = 0; j < nx; ++j) {
      int64_t v = rem % counts[j];
      rem /= counts[j];
      double len = b.xhi[j] - b.xlo[j];
      p.c[j] = b.xlo[j] + (v + 0.5) * len / counts[j];
    }
    p.c[d_ - 1] = zs;
    out.push_back(p);
  }
  return out;
}

std::vector<Cell> ShiftFamily::desc(const Cell& c, double a) const {
  if (!(a > 0.0) || !(a <= 1.0)) throw UsageError("desc: a must be in (0, 1]");
  if (c.top) throw UsageError("desc: unsupported cell");
  if (space_ != Space::Hyperbolic) {
    if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1)
      throw UsageError("desc: unsupported cell");
    double extra = space_ == Space::Spherical ? 1.0 + 12.0 * d_ : 1.0;
    int k = (int)std::ceil(std::log2(extra / a));
    k = std::max(k, 0);
    if ((int64_t)d_ * k > 21)
      throw UsageError("desc: too many descendants to materialize");
    if (c.level - k < base_level_)
      throw UsageError("desc: below the finest representable level");
    std::vector<Cell> cur{c};
    for (int round = 0; round < k; ++round) {
      std::vector<Cell> next;
      next.reserve(cur.size() << d_);
      for (const Cell& cc : cur) {
        std::vector<Cell> ch = children(cc);
        next.insert(next.end(), ch.begin(), ch.end());
      }
      cur.swap(next);
    }
    return cur;
  }
  double target = a * cell_diam_lb(c);
  std::vector<Cell> cur{c};
  for (int round = 0; round < 80; ++round) {
    double worst = 0.0;
    for (const Cell& cc : cur) worst = std::max(worst, cell_diam_ub(cc));
    if (worst <= target) return cur;
    std::vector<Cell> next;
    for (const Cell& cc : cur) {
      std::vector<Cell> ch = children(cc);
      next.insert(next.end(), ch.begin(), ch.end());
      if ((int64_t)next.size() > kMaxCoverPoints)
        throw UsageError("desc: too many descendants to materialize");
    }
    cur.swap(next);
  }
  throw UsageError("desc: did not converge");
}

std::string ShiftFamily::descriptor(const Cell& c) const {
  std::string s(1, space_char(c.space));
  s += ':';
  s += std::to_string(c.shift);
  s += ':';
  if (c.top) {
    s += space_ == Space::Spherical ? "top" : "none";
    return s;
  }
  if (space_ == Space::Spherical && c.shift == (int)shifts_.size() - 1) {
    s += "root:";
    s += std::to_string(c.chart);
    return s;
  }
  s += std::to_string(c.level);
  s += ':';
  if (space_ == Space::Spherical) {
    s += std::to_string(c.chart);
    s += ':';
  }
  if (space_ == Space::Hyperbolic) {
    s += ixty_to_string(c.zb);
    s += ':';
  }
  int nax = space_ == Space::Hyperbolic ? d_ - 1 : d_;
  for (int j = 0; j < nax; ++j) {
    if (j) s += ',';
    s += ixty_to_string(c.ix[j]);
  }
  if (space_ == Space::Hyperbolic && c.level < 0) {
    s += ':';
    s += std::to_string(c.subz);
    s += ':';
    for (int j = 0; j < d_ - 1; ++j) {
      if (j) s += ',';
      s += std::to_string(c.subx[j]);
    }
  }
  return s;
}

ShiftFamily ShiftFamily::make(Space space, int d, double delta_cap) {
  if (!(delta_cap > 0.0) || !std::isfinite(delta_cap))
    throw UsageError("make_shift_family: delta_cap must be positive");
  ShiftFamily f;
  f.space_ = space;
  f.d_ = d;
  f.delta_ = delta_cap;
  if (space == Space::Euclidean) {
    if (d < 1 || d > 3) throw UsageError("make_shift_family: d must be 1..3");
    if (delta_cap > 0x1p41)
      throw UsageError("make_shift_family: delta_cap above the window");
    f.D_ = 2 * ((d + 1) / 2);
    f.base_level_ = -50;
    f.le_ = (int)std::ceil(std::log2(std::max(2.0, delta_cap))) + 6;
    for (int i = 0; i <= f.D_; ++i) f.shifts_.push_back({i, 0, 0});
    f.c_shift_ = 2.0 * (f.D_ + 1) * std::sqrt((double)d);
    f.c_diam_ = 1.0;
    f.c_cover_ = 2.0;
    f.c_growth_ = 1.0;
  } else if (space == Space::Spherical) {
    if (d < 2 || d > 3) throw UsageError("make_shift_family: d must be 2..3");
    // The chart window keeps a polar cap of ~0.56 rad out of each chart, so
    // a pair can straddle both caps once it is ~2.02 apart; only below 2.0
    // is a shared chart guaranteed.
    f.delta_ = std::min(delta_cap, 2.0);
    f.D_ = 2 * ((d + 1) / 2);
    f.base_level_ = -57;
    f.le_ = 5;
    for (int chart = 0; chart < 2; ++chart)
      for (int i = 0; i <= f.D_; ++i) f.shifts_.push_back({i, 0, chart});
    f.shifts_.push_back({0, 0, 2});
    f.c_shift_ = 8.0 * (f.D_ + 1) * std::sqrt((double)d);
    f.c_diam_ = (1.0 + 12.0 * d) * (1.0 + 12.0 * d) / d;
    f.c_cover_ = 3.0;
    f.c_growth_ = 7.0;
  } else {
    if (d < 2 || d > 3) throw UsageError("make_shift_family: d must be 2..3");
    f.delta_ = std::min(delta_cap, 65536.0);
    f.Dh_ = 2 * (d / 2);
    f.ltop_h_ = (int)std::ceil(std::log2(std::max(8.0, 4.33 * f.delta_)));
    f.mh_ = f.ltop_h_ + 2;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j <= f.Dh_; ++j) f.shifts_.push_back({i, j, 0});
    f.c_shift_ = 64.0 * d;
    f.c_cover_ = 6.0;
    f.c_growth_ = 5.0;
  }
  if (space != Space::Hyperbolic) {
    f.w_word_.assign(f.shifts_.size(), 0);
    for (int s = 0; s < (int)f.shifts_.size(); ++s) {
      if (f.shifts_[s].chart == 2) continue;
      ixty w = 0;
      for (int k = 0; k < 120; ++k)
        w |= (ixty)f.cbit(f.base_level_ + k, s) << k;
      f.w_word_[s] = w;
    }
  } else {
    // Record the measured level-to-diameter spread so the sandwich bound
    // diam in [2^l / sqrt(c d), 2^l sqrt(c d)] holds for every level. The
    // ratio depends only on the level and, below level 0, on the sub-band's
    // z position, so a small synthetic sample pins it down; levels >= 0 are
    // evaluated in the log domain and tolerate the huge sigma-shifted bands,
    // negative levels need a finite box and use the unshifted family.
    double worst = 1.0;
    auto note = [&worst, &f](const Cell& c, int lv) {
      double ratio = f.cell_diam_ub(c) / std::ldexp(1.0, lv);
      worst = std::max({worst, ratio * ratio, 1.0 / (ratio * ratio)});
    };
    for (int s : {0, f.Dh_ + 1}) {
      for (int lv = 0; lv <= std::min(f.ltop_h_ + 2, 25); ++lv) {
        for (long long zb : {-2LL, -1LL, 0LL, 1LL, 7LL}) {
          Cell c;
          c.space = Space::Hyperbolic;
          c.shift = s;
          c.d = d;
          c.level = lv;
          c.zb = zb;
          note(c, lv);
        }
      }
    }
    for (int lv = -20; lv <= -1; ++lv) {
      int kk = -lv;
      for (long long zb : {-1LL, 0LL, 3LL}) {
        for (int hiz : {0, 1}) {
          Cell c;
          c.space = Space::Hyperbolic;
          c.shift = 0;
          c.d = d;
          c.level = lv;
          c.zb = zb;
          c.subz = hiz ? (((int64_t)1 << kk) - 1) : 0;
          note(c, lv);
        }
      }
    }
    f.c_diam_ = 1.2 * worst / d;
  }
  return f;
}

}  // namespace curvespan
