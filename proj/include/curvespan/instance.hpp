#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "curvespan/geometry.hpp"
#include "curvespan/graph.hpp"

namespace curvespan {

struct Instance {
  Space space = Space::Euclidean;
  int d = 0;
  std::string generator;  // tag plus parameters, kept through file round trips
  std::vector<Point> points;
  int n() const { return (int)points.size(); }
};

// All generators are deterministic under their seed.
Instance gen_uniform_ball(Space space, int d, int n, double r, uint64_t seed);
Instance gen_clustered(Space space, int d, int n, int k, double sigma,
                       uint64_t seed);
// n points equally spaced around a hyperbolic circle of radius 3 ln n.
Instance gen_circle_lb(int n);
Instance gen_far_separated(Space space, int d, int n, double minsep,
                           uint64_t seed);

// Instance files: `GEOM <E|S|H> <d> <n>` header, optional `# gen: ...`
// comment, then n coordinate lines. Graph files: `GRAPH <nv> <ne>` and
// `GEOM <E|S|H> <d>` headers, vertex lines `V <id> <kind> <coords...>
// [provenance]`, edge lines `E <u> <v> <weight>`. Decimal output uses 17
// significant digits; hexfloat gives bit-exact text either way.
void write_instance(const Instance& inst, std::ostream& out,
                    bool hexfloat = false);
Instance read_instance(std::istream& in);
void write_graph(const SpannerGraph& g, std::ostream& out,
                 bool hexfloat = false);
SpannerGraph read_graph(std::istream& in);

}  // namespace curvespan
