#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>

#include "curvespan/errors.hpp"

namespace curvespan {

enum class Space : uint8_t { Euclidean, Spherical, Hyperbolic };

char space_char(Space s);
Space space_from_char(char c);

// Supported geometric dimensions are 1..3 (2..3 for hyperbolic), so the
// ambient coordinate count is at most 4 (spherical d=3 lives in R^4).
inline constexpr int kMaxAmbient = 4;

struct Point {
  Space space = Space::Euclidean;
  int d = 0;  // geometric dimension
  std::array<double, kMaxAmbient> c{};

  // Number of stored coordinates: d for Euclidean, d+1 for spherical,
  // d for hyperbolic (x_1..x_{d-1}, then z > 0 last).
  int ambient() const { return space == Space::Spherical ? d + 1 : d; }
  double z() const { return c[d - 1]; }
};

// Validates (and for spherical, renormalizes) coordinates.
Point make_point(Space space, int d, const double* coords);

double dist(const Point& p, const Point& q);

struct Segment {
  Point a, b;
  double length = 0.0;
};

Segment make_segment(const Point& a, const Point& b);

// Point at arc-length fraction t in [0,1] along the geodesic a->b.
Point geodesic_point(const Segment& s, double t);

struct ClosestPt {
  Point y;
  double d = 0.0;
  double t = 0.0;  // arc-length fraction of y along the segment
};

// Closed-form minimizer of dist(x, .) over the segment, every geometry.
ClosestPt closest_point_on_segment(const Point& x, const Segment& s);

enum class Chart : uint8_t { Plus, Minus };

// Chart Plus is centered at (0,..,0,-1) with projection pole (0,..,0,+1);
// chart Minus mirrors the last coordinate. out receives d chart coordinates.
void stereo_project(const Point& p, Chart chart, double* out);
Point stereo_unproject(int d, Chart chart, const double* a);

// Half-space isometry (x, z) -> (sigma * (x + tau), sigma * z).
struct HoroShift {
  double sigma = 1.0;
  std::array<double, kMaxAmbient - 1> tau{};
};

Point apply_horoshift(const HoroShift& t, const Point& p);

// Hyperbolic distance from p to the vertical hyperplane {x . n = off},
// n a unit vector in the x-coordinates.
double dist_to_vertical_plane(const Point& p, const double* n, double off);

struct SplitReport {
  bool precondition = false;
  double lhs = 0.0;  // |px| + |xq|
  double rhs = 0.0;  // allowed bound
  bool violated = false;
};

// Detour bound oracle: if x sits close to the segment pq relative to its
// distance from the endpoints (|xy| <= sqrt(eps) * min(|py|, |qy|) for y the
// closest segment point), then |px| + |xq| <= (1 + eps)|pq| in Euclidean and
// spherical space, and <= (1 + e^delta_cap * eps)|pq| in hyperbolic space.
// Returns whether the precondition held; rep reports the inequality sides.
bool check_split(const Point& p, const Point& q, const Point& x, double eps,
                 double delta_cap, SplitReport* rep = nullptr);

// Hyperbolic detour bound for far-separated points: when a vertical
// hyperplane through x keeps distance >= 2 from both p and q, a detour via x
// at distance delta from the segment costs at most delta^2 per leg:
// |px| + |xq| <= |pq| + 2 delta^2. Returns whether the precondition held.
bool check_hsplit(const Point& p, const Point& q, const Point& x, double delta,
                  SplitReport* rep = nullptr);

}  // namespace curvespan
