#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "curvespan/geometry.hpp"

namespace curvespan {

enum class VertexKind : uint8_t { Input, Steiner };

// Geometric graph on input points plus optional Steiner points. Vertices
// get dense ids in insertion order; every edge weight is the geometric
// distance between its endpoints. Steiner vertices carry a provenance key
// (originating cell descriptor plus covering index) and are deduplicated by
// it, so re-deriving the same covering point lands on the same vertex.
class SpannerGraph {
 public:
  struct Vertex {
    Point p;
    VertexKind kind = VertexKind::Input;
    std::string provenance;
  };
  struct Edge {
    int u = -1, v = -1;
    double w = 0.0;
  };

  SpannerGraph() = default;
  SpannerGraph(Space space, int d) : space_(space), d_(d) {}

  Space space() const { return space_; }
  int dim() const { return d_; }

  int add_input(const Point& p);
  int add_steiner(const Point& p, const std::string& provenance);
  // Connects u and v at their distance. Loops and repeats are dropped;
  // returns whether a new edge appeared.
  bool add_edge(int u, int v);
  // Trusted variant for file import; skips the distance recomputation.
  bool add_edge_raw(int u, int v, double w);

  int num_vertices() const { return (int)vx_.size(); }
  int num_edges() const { return (int)edges_.size(); }
  int num_inputs() const { return n_inputs_; }
  int num_steiner() const { return (int)vx_.size() - n_inputs_; }
  const Vertex& vertex(int v) const { return vx_[v]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::pair<int, double>>& neighbours(int v) const {
    return adj_[v];
  }
  int degree(int v) const { return (int)adj_[v].size(); }
  // True when no edge joins two vertices of the same kind.
  bool is_bipartite() const;
  // Sorts edges and adjacency lists by endpoint ids for stable output.
  void canonicalize();

 private:
  Space space_ = Space::Euclidean;
  int d_ = 0;
  int n_inputs_ = 0;
  std::vector<Vertex> vx_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<int, double>>> adj_;
  std::map<std::string, int> steiner_ids_;
  std::unordered_set<uint64_t> edge_keys_;
};

}  // namespace curvespan
