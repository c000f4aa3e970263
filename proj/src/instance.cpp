#include "curvespan/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "curvespan/errors.hpp"

namespace curvespan {

namespace {

// Generation must be reproducible across platforms, so the raw engine output
// is mapped to doubles here instead of through std:: distributions.
struct GenRng {
  std::mt19937_64 eng;
  explicit GenRng(uint64_t seed) : eng(seed) {}
  double uniform(double a, double b) {
    return a + (b - a) * ((eng() >> 11) * 0x1.0p-53);
  }
  double normal() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_ = true;
    return u * m;
  }

 private:
  bool have_ = false;
  double spare_ = 0.0;
};

// Unit vector uniform on the sphere in R^k.
void rand_dir(GenRng& rng, int k, double* out) {
  double norm = 0;
  do {
    norm = 0;
    for (int i = 0; i < k; ++i) {
      out[i] = rng.normal();
      norm += out[i] * out[i];
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (int i = 0; i < k; ++i) out[i] /= norm;
}

// Point at hyperbolic distance t from (0,..,0,1) in unit direction u (u_x in
// the first d-1 slots, u_z last). Computed through the disk model around the
// base point; the 1-rho cancellation is avoided by carrying 1-rho directly.
Point hyper_exp(int d, const double* u, double t) {
  double ux = 0;
  for (int i = 0; i + 1 < d; ++i) ux += u[i] * u[i];
  ux = std::sqrt(ux);
  double theta = std::atan2(ux, u[d - 1]);
  double one_minus_rho = 2.0 / (std::exp(t) + 1.0);
  double rho = 1.0 - one_minus_rho;
  double sh = std::sin(theta / 2);
  double denom = one_minus_rho * one_minus_rho + 4.0 * rho * sh * sh;
  double xr = 2.0 * rho * std::sin(theta) / denom;
  double z = one_minus_rho * (2.0 - one_minus_rho) / denom;
  double c[kMaxAmbient] = {0, 0, 0, 0};
  if (ux > 0)
    for (int i = 0; i + 1 < d; ++i) c[i] = xr * (u[i] / ux);
  c[d - 1] = z;
  return make_point(Space::Hyperbolic, d, c);
}

// Radius with density sinh^{d-1} on [0, r]: closed form for d = 2, monotone
// bisection on the integrated density for d = 3.
double hyper_radius(GenRng& rng, int d, double r) {
  double uu = rng.uniform(0.0, 1.0);
  if (d == 2) return std::acosh(1.0 + uu * (std::cosh(r) - 1.0));
  auto cdf = [](double t) { return (std::sinh(t) * std::cosh(t) - t) / 2; };
  double target = uu * cdf(r);
  double lo = 0, hi = r;
  for (int it = 0; it < 200; ++it) {
    double mid = (lo + hi) / 2;
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

// Colatitude with density sin^{d-1} on [0, r]: i.e. uniform on the cap.
double sphere_colat(GenRng& rng, int d, double r) {
  double uu = rng.uniform(0.0, 1.0);
  if (d == 1) return uu * r;
  if (d == 2) return std::acos(1.0 - uu * (1.0 - std::cos(r)));
  auto cdf = [](double t) { return (t - std::sin(t) * std::cos(t)) / 2; };
  double target = uu * cdf(r);
  double lo = 0, hi = r;
  for (int it = 0; it < 200; ++it) {
    double mid = (lo + hi) / 2;
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

Point sphere_from_pole(int d, double theta, const double* equat) {
  double c[kMaxAmbient] = {0, 0, 0, 0};
  for (int i = 0; i < d; ++i) c[i] = std::sin(theta) * equat[i];
  c[d] = std::cos(theta);
  return make_point(Space::Spherical, d, c);
}

Point rand_in_ball(GenRng& rng, Space space, int d, double r) {
  if (space == Space::Euclidean) {
    double u[kMaxAmbient];
    rand_dir(rng, d, u);
    double rad = r * std::pow(rng.uniform(0.0, 1.0), 1.0 / d);
    double c[kMaxAmbient] = {0, 0, 0, 0};
    for (int i = 0; i < d; ++i) c[i] = rad * u[i];
    return make_point(Space::Euclidean, d, c);
  }
  if (space == Space::Spherical) {
    if (r >= 3.14159265358979) {
      double c[kMaxAmbient];
      rand_dir(rng, d + 1, c);
      return make_point(Space::Spherical, d, c);
    }
    double equat[kMaxAmbient];
    rand_dir(rng, d, equat);  // equatorial direction, last ambient slot 0
    return sphere_from_pole(d, sphere_colat(rng, d, r), equat);
  }
  double u[kMaxAmbient];
  rand_dir(rng, d, u);
  return hyper_exp(d, u, hyper_radius(rng, d, r));
}

// Hyperbolic isometry sending (0,..,0,1) to c.
Point recenter_hyper(const Point& base, const Point& c) {
  HoroShift t;
  t.sigma = c.z();
  for (int i = 0; i + 1 < c.d; ++i) t.tau[i] = c.c[i] / c.z();
  return apply_horoshift(t, base);
}

Point step_from(GenRng& rng, const Point& center, double t) {
  int d = center.d;
  if (center.space == Space::Euclidean) {
    double u[kMaxAmbient];
    rand_dir(rng, d, u);
    double c[kMaxAmbient] = {0, 0, 0, 0};
    for (int i = 0; i < d; ++i) c[i] = center.c[i] + t * u[i];
    return make_point(Space::Euclidean, d, c);
  }
  if (center.space == Space::Spherical) {
    double v[kMaxAmbient];
    double dot;
    do {
      rand_dir(rng, d + 1, v);
      dot = 0;
      for (int i = 0; i <= d; ++i) dot -= v[i] * center.c[i];
      for (int i = 0; i <= d; ++i) v[i] += dot * center.c[i];
      dot = 0;
      for (int i = 0; i <= d; ++i) dot += v[i] * v[i];
    } while (dot < 1e-12);
    double nrm = std::sqrt(dot);
    double ang = std::min(t, 3.14159);
    double c[kMaxAmbient];
    for (int i = 0; i <= d; ++i)
      c[i] = std::cos(ang) * center.c[i] + std::sin(ang) * v[i] / nrm;
    return make_point(Space::Spherical, d, c);
  }
  double u[kMaxAmbient];
  rand_dir(rng, d, u);
  return recenter_hyper(hyper_exp(d, u, t), center);
}

void check_geom(Space space, int d) {
  int lo = space == Space::Hyperbolic ? 2 : 1;
  if (d < lo || d > 3)
    throw UsageError("generator: dimension out of the supported range");
}

}  // namespace

Instance gen_uniform_ball(Space space, int d, int n, double r,
                          uint64_t seed) {
  check_geom(space, d);
  if (n < 1) throw UsageError("generator: n must be positive");
  if (!(r > 0)) throw UsageError("generator: ball radius must be positive");
  Instance inst;
  inst.space = space;
  inst.d = d;
  std::ostringstream tag;
  tag << "uniform-ball r=" << r << " seed=" << seed;
  inst.generator = tag.str();
  GenRng rng(seed);
  inst.points.reserve(n);
  for (int i = 0; i < n; ++i)
    inst.points.push_back(rand_in_ball(rng, space, d, r));
  return inst;
}

Instance gen_clustered(Space space, int d, int n, int k, double sigma,
                       uint64_t seed) {
  check_geom(space, d);
  if (n < 1) throw UsageError("generator: n must be positive");
  if (k < 1 || k > n) throw UsageError("generator: cluster count out of range");
  if (!(sigma > 0)) throw UsageError("generator: sigma must be positive");
  Instance inst;
  inst.space = space;
  inst.d = d;
  std::ostringstream tag;
  tag << "clustered k=" << k << " sigma=" << sigma << " seed=" << seed;
  inst.generator = tag.str();
  GenRng rng(seed);
  std::vector<Point> centers;
  centers.reserve(k);
  for (int i = 0; i < k; ++i)
    centers.push_back(rand_in_ball(rng, space, d, 1.0));
  inst.points.reserve(n);
  for (int i = 0; i < n; ++i)
    inst.points.push_back(
        step_from(rng, centers[i % k], std::abs(rng.normal()) * sigma));
  return inst;
}

Instance gen_circle_lb(int n) {
  if (n < 1) throw UsageError("generator: n must be positive");
  Instance inst;
  inst.space = Space::Hyperbolic;
  inst.d = 2;
  std::ostringstream tag;
  tag << "circle-lb n=" << n;
  inst.generator = tag.str();
  double t = 3.0 * std::log((double)n);
  inst.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    double theta = 2.0 * M_PI * i / n;
    double u[2] = {std::sin(theta), std::cos(theta)};
    if (t <= 0) {
      double c[2] = {0.0, 1.0};
      inst.points.push_back(make_point(Space::Hyperbolic, 2, c));
    } else {
      inst.points.push_back(hyper_exp(2, u, t));
    }
  }
  return inst;
}

Instance gen_far_separated(Space space, int d, int n, double minsep,
                           uint64_t seed) {
  check_geom(space, d);
  if (n < 1) throw UsageError("generator: n must be positive");
  if (!(minsep > 0))
    throw UsageError("generator: separation must be positive");
  Instance inst;
  inst.space = space;
  inst.d = d;
  std::ostringstream tag;
  tag << "far-separated minsep=" << minsep << " seed=" << seed;
  inst.generator = tag.str();
  GenRng rng(seed);
  inst.points.reserve(n);
  if (space == Space::Spherical) {
    if (n > 1 && minsep > 2.0 * M_PI / n)
      throw UsageError(
          "generator: the sphere cannot hold that many separated points");
    for (int i = 0; i < n; ++i) {
      double theta = 2.0 * M_PI * i / n;
      double c[kMaxAmbient] = {0, 0, 0, 0};
      c[0] = std::sin(theta);
      c[d] = std::cos(theta);
      inst.points.push_back(make_point(Space::Spherical, d, c));
    }
    return inst;
  }
  double gap = 1.05 * minsep;
  for (int i = 0; i < n; ++i) {
    double s = i * gap + rng.uniform(0.0, 0.02 * minsep);
    double c[kMaxAmbient] = {0, 0, 0, 0};
    if (space == Space::Euclidean)
      c[0] = s;
    else
      c[d - 1] = std::exp(s);  // on the z-axis, distance is the log ratio
    inst.points.push_back(make_point(space, d, c));
  }
  return inst;
}

namespace {

void write_double(std::ostream& out, double v, bool hexfloat) {
  char buf[64];
  if (hexfloat)
    std::snprintf(buf, sizeof buf, "%a", v);
  else
    std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

double parse_double(const std::string& tok, int lineno) {
  const char* s = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ParseError("line " + std::to_string(lineno) +
                     ": bad number '" + tok + "'");
  return v;
}

long parse_int(const std::string& tok, int lineno) {
  const char* s = tok.c_str();
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0')
    throw ParseError("line " + std::to_string(lineno) +
                     ": bad integer '" + tok + "'");
  return v;
}

}  // namespace

void write_instance(const Instance& inst, std::ostream& out, bool hexfloat) {
  out << "GEOM " << space_char(inst.space) << ' ' << inst.d << ' ' << inst.n()
      << '\n';
  if (!inst.generator.empty()) out << "# gen: " << inst.generator << '\n';
  int ambient = inst.space == Space::Spherical ? inst.d + 1 : inst.d;
  for (const Point& p : inst.points) {
    for (int j = 0; j < ambient; ++j) {
      if (j) out << ' ';
      write_double(out, p.c[j], hexfloat);
    }
    out << '\n';
  }
}

Instance read_instance(std::istream& in) {
  std::string line;
  int lineno = 0;
  Instance inst;
  long want = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "#") {
      std::string key;
      if (want >= 0 && ls >> key && key == "gen:") {
        std::string rest;
        std::getline(ls, rest);
        size_t at = rest.find_first_not_of(' ');
        if (at != std::string::npos) inst.generator = rest.substr(at);
      }
      continue;
    }
    if (want < 0) {
      if (head != "GEOM")
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected GEOM header");
      std::string g, dd, nn;
      if (!(ls >> g >> dd >> nn) || g.size() != 1)
        throw ParseError("line " + std::to_string(lineno) +
                         ": malformed GEOM header");
      inst.space = space_from_char(g[0]);
      inst.d = (int)parse_int(dd, lineno);
      want = parse_int(nn, lineno);
      int dmin = inst.space == Space::Hyperbolic ? 2 : 1;
      if (inst.d < dmin || inst.d > 3 || want < 0)
        throw ParseError("line " + std::to_string(lineno) +
                         ": GEOM header out of range");
      continue;
    }
    int ambient = inst.space == Space::Spherical ? inst.d + 1 : inst.d;
    double c[kMaxAmbient] = {0, 0, 0, 0};
    std::string tok = head;
    for (int j = 0; j < ambient; ++j) {
      if (j > 0 && !(ls >> tok))
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected " + std::to_string(ambient) +
                         " coordinates");
      c[j] = parse_double(tok, lineno);
    }
    if (ls >> tok)
      throw ParseError("line " + std::to_string(lineno) +
                       ": trailing data after coordinates");
    inst.points.push_back(make_point(inst.space, inst.d, c));
  }
  if (want < 0) throw ParseError("line 1: missing GEOM header");
  if ((long)inst.points.size() != want)
    throw ParseError("line " + std::to_string(lineno) + ": expected " +
                     std::to_string(want) + " points, found " +
                     std::to_string(inst.points.size()));
  return inst;
}

void write_graph(const SpannerGraph& g, std::ostream& out, bool hexfloat) {
  out << "GRAPH " << g.num_vertices() << ' ' << g.num_edges() << '\n';
  out << "GEOM " << space_char(g.space()) << ' ' << g.dim() << '\n';
  int ambient = g.space() == Space::Spherical ? g.dim() + 1 : g.dim();
  for (int v = 0; v < g.num_vertices(); ++v) {
    const SpannerGraph::Vertex& vx = g.vertex(v);
    out << "V " << v << ' '
        << (vx.kind == VertexKind::Input ? "input" : "steiner");
    for (int j = 0; j < ambient; ++j) {
      out << ' ';
      write_double(out, vx.p.c[j], hexfloat);
    }
    if (!vx.provenance.empty()) out << ' ' << vx.provenance;
    out << '\n';
  }
  for (const SpannerGraph::Edge& e : g.edges()) {
    out << "E " << e.u << ' ' << e.v << ' ';
    write_double(out, e.w, hexfloat);
    out << '\n';
  }
}

SpannerGraph read_graph(std::istream& in) {
  std::string line;
  int lineno = 0;
  long nv = -1, ne = -1;
  bool have_geom = false;
  SpannerGraph g;
  long seen_v = 0, seen_e = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "#") continue;
    if (nv < 0) {
      std::string a, b;
      if (head != "GRAPH" || !(ls >> a >> b))
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected GRAPH header");
      nv = parse_int(a, lineno);
      ne = parse_int(b, lineno);
      if (nv < 0 || ne < 0)
        throw ParseError("line " + std::to_string(lineno) +
                         ": GRAPH header out of range");
      continue;
    }
    if (!have_geom) {
      std::string gch, dd;
      if (head != "GEOM" || !(ls >> gch >> dd) || gch.size() != 1)
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected GEOM line after GRAPH header");
      int d = (int)parse_int(dd, lineno);
      if (d < 1 || d > 3)
        throw ParseError("line " + std::to_string(lineno) +
                         ": dimension out of range");
      g = SpannerGraph(space_from_char(gch[0]), d);
      have_geom = true;
      continue;
    }
    if (head == "V") {
      std::string idtok, kind;
      if (!(ls >> idtok >> kind))
        throw ParseError("line " + std::to_string(lineno) +
                         ": malformed vertex line");
      long id = parse_int(idtok, lineno);
      if (id != seen_v)
        throw ParseError("line " + std::to_string(lineno) +
                         ": vertex ids must be consecutive from 0");
      int ambient = g.space() == Space::Spherical ? g.dim() + 1 : g.dim();
      double c[kMaxAmbient] = {0, 0, 0, 0};
      std::string tok;
      for (int j = 0; j < ambient; ++j) {
        if (!(ls >> tok))
          throw ParseError("line " + std::to_string(lineno) +
                           ": expected " + std::to_string(ambient) +
                           " coordinates");
        c[j] = parse_double(tok, lineno);
      }
      Point p = make_point(g.space(), g.dim(), c);
      if (kind == "input") {
        if (ls >> tok)
          throw ParseError("line " + std::to_string(lineno) +
                           ": input vertices carry no provenance");
        g.add_input(p);
      } else if (kind == "steiner") {
        std::string prov;
        if (!(ls >> prov))
          throw ParseError("line " + std::to_string(lineno) +
                           ": steiner vertex needs a provenance token");
        if (ls >> tok)
          throw ParseError("line " + std::to_string(lineno) +
                           ": trailing data on vertex line");
        if (g.add_steiner(p, prov) != seen_v)
          throw ParseError("line " + std::to_string(lineno) +
                           ": duplicate steiner provenance");
      } else {
        throw ParseError("line " + std::to_string(lineno) +
                         ": unknown vertex kind '" + kind + "'");
      }
      ++seen_v;
      continue;
    }
    if (head == "E") {
      if (seen_v != nv)
        throw ParseError("line " + std::to_string(lineno) +
                         ": edges before all vertices");
      std::string a, b, w;
      if (!(ls >> a >> b >> w))
        throw ParseError("line " + std::to_string(lineno) +
                         ": malformed edge line");
      std::string extra;
      if (ls >> extra)
        throw ParseError("line " + std::to_string(lineno) +
                         ": trailing data on edge line");
      long u = parse_int(a, lineno), v = parse_int(b, lineno);
      if (u < 0 || v < 0 || u >= nv || v >= nv)
        throw ParseError("line " + std::to_string(lineno) +
                         ": edge endpoint out of range");
      if (!g.add_edge_raw((int)u, (int)v, parse_double(w, lineno)))
        throw ParseError("line " + std::to_string(lineno) +
                         ": duplicate or degenerate edge");
      ++seen_e;
      continue;
    }
    throw ParseError("line " + std::to_string(lineno) +
                     ": unknown record '" + head + "'");
  }
  if (nv < 0) throw ParseError("line 1: missing GRAPH header");
  if (!have_geom && nv > 0)
    throw ParseError("line " + std::to_string(lineno) + ": missing GEOM line");
  if (seen_v != nv || seen_e != ne)
    throw ParseError("line " + std::to_string(lineno) +
                     ": header promised " + std::to_string(nv) +
                     " vertices and " + std::to_string(ne) + " edges");
  return g;
}

}  // namespace curvespan
