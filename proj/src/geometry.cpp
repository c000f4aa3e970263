#include "curvespan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace curvespan {

char space_char(Space s) {
  switch (s) {
    case Space::Euclidean: return 'E';
    case Space::Spherical: return 'S';
    default: return 'H';
  }
}

Space space_from_char(char c) {
  if (c == 'E') return Space::Euclidean;
  if (c == 'S') return Space::Spherical;
  if (c == 'H') return Space::Hyperbolic;
  throw ParseError(std::string("unknown space tag '") + c + "'");
}

Point make_point(Space space, int d, const double* coords) {
  if (d < 1 || d > kMaxAmbient - 1)
    throw UsageError("dimension out of supported range");
  if (space == Space::Hyperbolic && d < 2)
    throw UsageError("hyperbolic space needs dimension >= 2");
  Point p;
  p.space = space;
  p.d = d;
  int amb = p.ambient();
  for (int i = 0; i < amb; ++i) {
    if (!std::isfinite(coords[i])) throw UsageError("non-finite coordinate");
    p.c[i] = coords[i];
  }
  if (space == Space::Spherical) {
    double n2 = 0;
    for (int i = 0; i < amb; ++i) n2 += p.c[i] * p.c[i];
    double n = std::sqrt(n2);
    if (std::abs(n - 1.0) > 1e-6)
      throw UsageError("spherical point is not a unit vector");
    for (int i = 0; i < amb; ++i) p.c[i] /= n;
  }
  if (space == Space::Hyperbolic && !(p.z() > 0))
    throw UsageError("hyperbolic z coordinate must be positive");
  return p;
}

static void require_compatible(const Point& p, const Point& q) {
  if (p.space != q.space || p.d != q.d)
    throw UsageError("points from different spaces or dimensions");
}

static double euclid_dist(const Point& p, const Point& q) {
  double s = 0;
  for (int i = 0; i < p.d; ++i) {
    double t = p.c[i] - q.c[i];
    s += t * t;
  }
  return std::sqrt(s);
}

static double sphere_dist(const Point& p, const Point& q) {
  int amb = p.ambient();
  double dm = 0, dp = 0;
  for (int i = 0; i < amb; ++i) {
    double a = p.c[i] - q.c[i], b = p.c[i] + q.c[i];
    dm += a * a;
    dp += b * b;
  }
  double chord = std::sqrt(dm);
  // Near-antipodal pairs lose precision in the chord; switch to the
  // complementary form there.
  if (chord <= 1.0) return 2.0 * std::asin(0.5 * chord);
  return M_PI - 2.0 * std::asin(0.5 * std::min(2.0, std::sqrt(dp)));
}

static double hyper_dist(const Point& p, const Point& q) {
  double zp = p.z(), zq = q.z();
  double xs = 0, scale = std::max(zp, zq);
  for (int i = 0; i < p.d - 1; ++i) xs = std::max(xs, std::abs(p.c[i] - q.c[i]));
  if (xs <= 1e-14 * std::max(zp, zq)) return std::abs(std::log(zp / zq));
  scale = std::max(scale, xs);
  // Scaling all coordinates is an isometry; it keeps the squares finite.
  double num = 0;
  for (int i = 0; i < p.d - 1; ++i) {
    double t = (p.c[i] - q.c[i]) / scale;
    num += t * t;
  }
  double dz = (zp - zq) / scale;
  num += dz * dz;
  return 2.0 * std::asinh(0.5 * std::sqrt(num / ((zp / scale) * (zq / scale))));
}

double dist(const Point& p, const Point& q) {
  require_compatible(p, q);
  switch (p.space) {
    case Space::Euclidean: return euclid_dist(p, q);
    case Space::Spherical: return sphere_dist(p, q);
    default: return hyper_dist(p, q);
  }
}

Segment make_segment(const Point& a, const Point& b) {
  require_compatible(a, b);
  return Segment{a, b, dist(a, b)};
}

// ---------------------------------------------------------------------------
// Spherical geodesic frame: gamma(theta) = cos(theta) u + sin(theta) w with
// u = a and w a unit vector toward b orthogonal to a.

struct SphereFrame {
  int amb;
  std::array<double, kMaxAmbient> u{}, w{};
  double theta = 0;  // angle of b
};

static SphereFrame sphere_frame(const Segment& s) {
  SphereFrame f;
  f.amb = s.a.ambient();
  double dot = 0;
  for (int i = 0; i < f.amb; ++i) dot += s.a.c[i] * s.b.c[i];
  dot = std::clamp(dot, -1.0, 1.0);
  f.theta = sphere_dist(s.a, s.b);
  for (int i = 0; i < f.amb; ++i) f.u[i] = s.a.c[i];
  double n2 = 0;
  for (int i = 0; i < f.amb; ++i) {
    f.w[i] = s.b.c[i] - dot * s.a.c[i];
    n2 += f.w[i] * f.w[i];
  }
  double n = std::sqrt(n2);
  if (n < 1e-15) {
    // Degenerate (b = a or b = -a): any direction orthogonal to a works and
    // the choice is deterministic.
    int k = 0;
    for (int i = 1; i < f.amb; ++i)
      if (std::abs(s.a.c[i]) < std::abs(s.a.c[k])) k = i;
    n2 = 0;
    for (int i = 0; i < f.amb; ++i) {
      f.w[i] = (i == k ? 1.0 : 0.0) - s.a.c[k] * s.a.c[i];
      n2 += f.w[i] * f.w[i];
    }
    n = std::sqrt(n2);
  }
  for (int i = 0; i < f.amb; ++i) f.w[i] /= n;
  return f;
}

// ---------------------------------------------------------------------------
// Hyperbolic geodesic frame. Vertical segments are the degenerate case;
// otherwise the geodesic is the half circle with center (xc, 0) and radius r
// inside the 2-plane spanned by the z axis and unit x-direction e. Points on
// the circle are addressed by m = log tan(theta/2), which is also arc length:
// theta-based formulas lose all precision near the rim (long segments have
// endpoints within ~1e-16 radians of 0 or pi), while m stays well scaled.

struct HyperFrame {
  bool vertical = false;
  int dx = 0;  // number of x coordinates (d-1)
  std::array<double, kMaxAmbient - 1> e{};
  double r = 0;
  // r + c0 and r - c0 where c0 is the signed center offset from endpoint a.
  // One of them is tiny when the endpoint sits near the rim; both are kept in
  // product form so neither ever comes out of a subtraction of near-equals.
  double rpc = 0, rmc = 0;
  double m_a = 0, m_b = 0;  // endpoint arc positions, m_b < m_a
};

static double hyper_xgap(const Segment& s) {
  double g = 0;
  for (int i = 0; i < s.a.d - 1; ++i)
    g = std::max(g, std::abs(s.a.c[i] - s.b.c[i]));
  return g;
}

static HyperFrame hyper_frame(const Segment& s) {
  HyperFrame f;
  f.dx = s.a.d - 1;
  double za = s.a.z(), zb = s.b.z();
  if (hyper_xgap(s) <= 1e-14 * std::max(za, zb)) {
    f.vertical = true;
    return f;
  }
  double L2 = 0;
  for (int i = 0; i < f.dx; ++i) {
    double t = s.b.c[i] - s.a.c[i];
    f.e[i] = t;
    L2 += t * t;
  }
  double L = std::sqrt(L2);
  for (int i = 0; i < f.dx; ++i) f.e[i] /= L;
  double c0 = 0.5 * (L + (zb - za) * (zb + za) / L);  // center offset from a
  f.r = std::hypot(c0, za);
  // rpc * rmc = za^2 exactly, which recovers whichever difference cancels.
  if (c0 >= 0) {
    f.rpc = f.r + c0;
    f.rmc = za * za / f.rpc;
    f.m_a = std::log(f.rpc / za);
  } else {
    f.rmc = f.r - c0;
    f.rpc = za * za / f.rmc;
    f.m_a = std::log(za / f.rmc);
  }
  double c0b = c0 - L;  // center offset from endpoint b
  f.m_b = c0b >= 0 ? std::log((f.r + c0b) / zb) : std::log(zb / (f.r - c0b));
  return f;
}

static Point hyper_frame_point(const Segment& s, const HyperFrame& f,
                               double m) {
  // tan(theta/2) = e^m. Work with whichever of e^m, e^-m is <= 1 so the
  // intermediates never overflow, and fold cos(theta) into the stable
  // endpoint offsets rpc/rmc instead of evaluating c0 + r cos(theta).
  double off, si;  // x offset from endpoint a along e, and sin(theta)
  if (m <= 0) {
    double t = std::exp(m), n = 1.0 + t * t;
    off = f.rpc - f.r * (2.0 * t * t / n);
    si = 2.0 * t / n;
  } else {
    double u = std::exp(-m), n = 1.0 + u * u;
    off = f.r * (2.0 * u * u / n) - f.rmc;
    si = 2.0 * u / n;
  }
  Point p = s.a;
  for (int i = 0; i < f.dx; ++i) p.c[i] = s.a.c[i] + off * f.e[i];
  p.c[f.dx] = std::max(f.r * si, std::numeric_limits<double>::min());
  return p;
}

Point geodesic_point(const Segment& s, double t) {
  switch (s.a.space) {
    case Space::Euclidean: {
      Point p = s.a;
      for (int i = 0; i < p.d; ++i) p.c[i] += t * (s.b.c[i] - s.a.c[i]);
      return p;
    }
    case Space::Spherical: {
      SphereFrame f = sphere_frame(s);
      double th = t * f.theta;
      Point p = s.a;
      for (int i = 0; i < f.amb; ++i)
        p.c[i] = std::cos(th) * f.u[i] + std::sin(th) * f.w[i];
      return p;
    }
    default: {
      HyperFrame f = hyper_frame(s);
      if (f.vertical) {
        Point p = s.a;
        p.c[p.d - 1] = std::pow(s.a.z(), 1.0 - t) * std::pow(s.b.z(), t);
        return p;
      }
      return hyper_frame_point(s, f, f.m_a + t * (f.m_b - f.m_a));
    }
  }
}

static ClosestPt closest_euclid(const Point& x, const Segment& s) {
  double num = 0, den = 0;
  for (int i = 0; i < x.d; ++i) {
    double ab = s.b.c[i] - s.a.c[i];
    num += (x.c[i] - s.a.c[i]) * ab;
    den += ab * ab;
  }
  double t = den > 0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
  ClosestPt r;
  r.t = t;
  r.y = geodesic_point(s, t);
  r.d = dist(x, r.y);
  return r;
}

static ClosestPt closest_sphere(const Point& x, const Segment& s) {
  SphereFrame f = sphere_frame(s);
  double cu = 0, cw = 0;
  for (int i = 0; i < f.amb; ++i) {
    cu += x.c[i] * f.u[i];
    cw += x.c[i] * f.w[i];
  }
  // dist(x, gamma(theta)) is minimized where cos distance = cu cos + cw sin
  // peaks, i.e. at atan2(cw, cu); off-interval the best point is an endpoint.
  double best_th = 0;
  double star = std::atan2(cw, cu);
  if (star >= 0 && star <= f.theta) best_th = star;
  ClosestPt r;
  Point cand = s.a;
  double best = 1e300;
  for (double th : {best_th, 0.0, f.theta}) {
    Point y = s.a;
    for (int i = 0; i < f.amb; ++i)
      y.c[i] = std::cos(th) * f.u[i] + std::sin(th) * f.w[i];
    double dd = dist(x, y);
    if (dd < best) {
      best = dd;
      cand = y;
      r.t = f.theta > 0 ? th / f.theta : 0.0;
    }
  }
  r.y = cand;
  r.d = best;
  return r;
}

static ClosestPt closest_hyper(const Point& x, const Segment& s) {
  // Rescaling by 1/s is an isometry; it protects the squared terms below.
  double sc = std::max({s.a.z(), s.b.z(), x.z(), 1e-300});
  for (int i = 0; i < x.d - 1; ++i)
    sc = std::max({sc, std::abs(x.c[i] - s.a.c[i]), std::abs(s.b.c[i] - s.a.c[i])});
  Point xs = x, as = s.a, bs = s.b;
  for (int i = 0; i < x.d; ++i) {
    xs.c[i] = (x.c[i] - (i < x.d - 1 ? s.a.c[i] : 0.0)) / sc;
    as.c[i] = (s.a.c[i] - (i < x.d - 1 ? s.a.c[i] : 0.0)) / sc;
    bs.c[i] = (s.b.c[i] - (i < x.d - 1 ? s.a.c[i] : 0.0)) / sc;
  }
  Segment ss = make_segment(as, bs);
  HyperFrame f = hyper_frame(ss);
  ClosestPt r;
  if (f.vertical) {
    double B = 0;
    for (int i = 0; i < x.d - 1; ++i) {
      double t = xs.c[i] - as.c[i];
      B += t * t;
    }
    double zeta = xs.z();
    double zstar = std::sqrt(B + zeta * zeta);
    double zlo = std::min(as.z(), bs.z()), zhi = std::max(as.z(), bs.z());
    zstar = std::clamp(zstar, zlo, zhi);
    Point y = as;
    y.c[x.d - 1] = zstar;
    r.y = y;
    r.d = dist(xs, y);
    double span = std::log(bs.z() / as.z());
    r.t = span != 0 ? std::log(zstar / as.z()) / span : 0.0;
  } else {
    // Query offset relative to endpoint a: the circle center differs from a
    // only along e, so the perpendicular part b2 can be taken against a
    // directly, with no large intermediates.
    double g = 0;
    std::array<double, kMaxAmbient - 1> w{};
    for (int i = 0; i < x.d - 1; ++i) {
      w[i] = xs.c[i] - as.c[i];
      g += w[i] * f.e[i];
    }
    double b2 = 0;
    for (int i = 0; i < x.d - 1; ++i) {
      double t = w[i] - g * f.e[i];
      b2 += t * t;
    }
    double zeta = xs.z();
    // The frame distance is unimodal on the arc with its minimum where
    // cos(theta) = 2 a r / K, K = a^2 + b^2 + zeta^2 + r^2, a the offset from
    // the circle center along e. In arc position, tan^2(theta/2) =
    // (K - 2ar)/(K + 2ar) = ((a-r)^2 + b^2 + z^2)/((a+r)^2 + b^2 + z^2), and
    // a - r = g - rpc, a + r = g + rmc keep every term cancellation-free.
    double num = (g - f.rpc) * (g - f.rpc) + b2 + zeta * zeta;
    double den = (g + f.rmc) * (g + f.rmc) + b2 + zeta * zeta;
    double star = 0.5 * (std::log(num) - std::log(den));
    double lo = std::min(f.m_a, f.m_b), hi = std::max(f.m_a, f.m_b);
    double span = f.m_b - f.m_a;
    r.d = 1e300;
    if (star > lo && star < hi) {
      Point y = hyper_frame_point(ss, f, star);
      r.d = dist(xs, y);
      r.y = y;
      r.t = span != 0 ? (star - f.m_a) / span : 0.0;
    }
    // Endpoints are evaluated with their exact coordinates, not the frame
    // reconstruction.
    double da = dist(xs, as), db = dist(xs, bs);
    if (da < r.d) {
      r.d = da;
      r.y = as;
      r.t = 0.0;
    }
    if (db < r.d) {
      r.d = db;
      r.y = bs;
      r.t = 1.0;
    }
  }
  // Undo the normalizing isometry.
  for (int i = 0; i < x.d; ++i)
    r.y.c[i] = r.y.c[i] * sc + (i < x.d - 1 ? s.a.c[i] : 0.0);
  r.t = std::clamp(r.t, 0.0, 1.0);
  return r;
}

ClosestPt closest_point_on_segment(const Point& x, const Segment& s) {
  require_compatible(x, s.a);
  if (s.length == 0.0) {
    ClosestPt r;
    r.y = s.a;
    r.d = dist(x, s.a);
    r.t = 0.0;
    return r;
  }
  switch (x.space) {
    case Space::Euclidean: return closest_euclid(x, s);
    case Space::Spherical: return closest_sphere(x, s);
    default: return closest_hyper(x, s);
  }
}

void stereo_project(const Point& p, Chart chart, double* out) {
  if (p.space != Space::Spherical) throw UsageError("stereo_project: spherical point required");
  double last = p.c[p.d];
  double w = chart == Chart::Plus ? last : -last;
  // Pole of chart Plus is (0,..,0,+1); within 1e-12 of it the projection
  // blows up.
  double pole_gap2 = 0;
  for (int i = 0; i < p.d; ++i) pole_gap2 += p.c[i] * p.c[i];
  pole_gap2 += (1.0 - w) * (1.0 - w);
  if (std::sqrt(pole_gap2) <= 1e-12)
    throw UsageError("stereo_project: point at the projection pole");
  for (int i = 0; i < p.d; ++i) out[i] = 2.0 * p.c[i] / (1.0 - w);
}

Point stereo_unproject(int d, Chart chart, const double* a) {
  double n2 = 0;
  for (int i = 0; i < d; ++i) n2 += a[i] * a[i];
  double f = 4.0 / (n2 + 4.0);
  std::array<double, kMaxAmbient> c{};
  for (int i = 0; i < d; ++i) c[i] = f * a[i];
  double last = f * (0.25 * n2 - 1.0);
  c[d] = chart == Chart::Plus ? last : -last;
  return make_point(Space::Spherical, d, c.data());
}

Point apply_horoshift(const HoroShift& t, const Point& p) {
  if (p.space != Space::Hyperbolic) throw UsageError("apply_horoshift: hyperbolic point required");
  if (!(t.sigma > 0)) throw UsageError("horoshift sigma must be positive");
  Point q = p;
  for (int i = 0; i < p.d - 1; ++i) q.c[i] = t.sigma * (p.c[i] + t.tau[i]);
  q.c[p.d - 1] = t.sigma * p.z();
  return q;
}

double dist_to_vertical_plane(const Point& p, const double* n, double off) {
  if (p.space != Space::Hyperbolic) throw UsageError("vertical planes exist in hyperbolic space only");
  double dot = 0;
  for (int i = 0; i < p.d - 1; ++i) dot += p.c[i] * n[i];
  return std::asinh(std::abs(dot - off) / p.z());
}

bool check_split(const Point& p, const Point& q, const Point& x, double eps,
                 double delta_cap, SplitReport* rep) {
  require_compatible(p, q);
  require_compatible(p, x);
  Segment s = make_segment(p, q);
  if (p.space == Space::Hyperbolic && s.length > delta_cap)
    throw UsageError("check_split: hyperbolic segment longer than delta_cap");
  ClosestPt cp = closest_point_on_segment(x, s);
  double lim = std::sqrt(eps) * std::min(dist(p, cp.y), dist(q, cp.y));
  bool pre = cp.d <= lim;
  double factor =
      p.space == Space::Hyperbolic ? 1.0 + std::exp(delta_cap) * eps : 1.0 + eps;
  SplitReport r;
  r.precondition = pre;
  r.lhs = dist(p, x) + dist(x, q);
  r.rhs = factor * s.length;
  r.violated = pre && r.lhs > r.rhs * (1.0 + 1e-9) + 1e-12;
  if (rep) *rep = r;
  return pre;
}

bool check_hsplit(const Point& p, const Point& q, const Point& x, double delta,
                  SplitReport* rep) {
  require_compatible(p, q);
  require_compatible(p, x);
  if (p.space != Space::Hyperbolic) throw UsageError("check_hsplit: hyperbolic points required");
  // Separating witness: the vertical hyperplane through x normal to the
  // x-displacement from p to q must be >= 2 away from both endpoints.
  double n[kMaxAmbient - 1];
  double L2 = 0;
  for (int i = 0; i < p.d - 1; ++i) {
    n[i] = q.c[i] - p.c[i];
    L2 += n[i] * n[i];
  }
  bool pre = L2 > 0;
  double off = 0;
  if (pre) {
    double L = std::sqrt(L2);
    for (int i = 0; i < p.d - 1; ++i) n[i] /= L;
    for (int i = 0; i < p.d - 1; ++i) off += x.c[i] * n[i];
    pre = dist_to_vertical_plane(p, n, off) >= 2.0 &&
          dist_to_vertical_plane(q, n, off) >= 2.0;
    double sp = 0, sq = 0;
    for (int i = 0; i < p.d - 1; ++i) {
      sp += p.c[i] * n[i];
      sq += q.c[i] * n[i];
    }
    pre = pre && (sp - off) * (sq - off) < 0;
  }
  SplitReport r;
  r.precondition = pre;
  r.lhs = dist(p, x) + dist(x, q);
  // The detour bound is additive: each leg of the detour through x costs at
  // most delta^2 over its projection onto the geodesic (via the hyperbolic
  // Pythagorean theorem and cosh t <= exp(t^2/2)), so the total is 2 delta^2.
  r.rhs = dist(p, q) + 2.0 * delta * delta;
  r.violated = pre && r.lhs > r.rhs * (1.0 + 1e-9) + 1e-12;
  if (rep) *rep = r;
  return pre;
}

}  // namespace curvespan
