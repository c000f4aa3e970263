#include "curvespan/graph.hpp"

#include <algorithm>

#include "curvespan/errors.hpp"

namespace curvespan {

int SpannerGraph::add_input(const Point& p) {
  if (p.space != space_ || p.d != d_)
    throw UsageError("graph: point does not match the graph's geometry");
  int id = (int)vx_.size();
  vx_.push_back(Vertex{p, VertexKind::Input, std::string()});
  adj_.emplace_back();
  n_inputs_ += 1;
  return id;
}

int SpannerGraph::add_steiner(const Point& p, const std::string& provenance) {
  if (p.space != space_ || p.d != d_)
    throw UsageError("graph: point does not match the graph's geometry");
  if (provenance.empty())
    throw UsageError("graph: steiner vertex needs a provenance key");
  auto it = steiner_ids_.find(provenance);
  if (it != steiner_ids_.end()) return it->second;
  int id = (int)vx_.size();
  vx_.push_back(Vertex{p, VertexKind::Steiner, provenance});
  adj_.emplace_back();
  steiner_ids_.emplace(provenance, id);
  return id;
}

bool SpannerGraph::add_edge(int u, int v) {
  if (u < 0 || v < 0 || u >= (int)vx_.size() || v >= (int)vx_.size())
    throw UsageError("graph: edge endpoint out of range");
  if (u == v) return false;
  return add_edge_raw(u, v, dist(vx_[u].p, vx_[v].p));
}

bool SpannerGraph::add_edge_raw(int u, int v, double w) {
  if (u < 0 || v < 0 || u >= (int)vx_.size() || v >= (int)vx_.size())
    throw UsageError("graph: edge endpoint out of range");
  if (u == v) return false;
  int a = std::min(u, v), b = std::max(u, v);
  uint64_t key = ((uint64_t)(uint32_t)a << 32) | (uint32_t)b;
  if (!edge_keys_.insert(key).second) return false;
  edges_.push_back(Edge{a, b, w});
  adj_[a].push_back({b, w});
  adj_[b].push_back({a, w});
  return true;
}

bool SpannerGraph::is_bipartite() const {
  for (const Edge& e : edges_)
    if (vx_[e.u].kind == vx_[e.v].kind) return false;
  return true;
}

void SpannerGraph::canonicalize() {
  std::sort(edges_.begin(), edges_.end(), [](const Edge& x, const Edge& y) {
    return x.u != y.u ? x.u < y.u : x.v < y.v;
  });
  for (auto& lst : adj_) std::sort(lst.begin(), lst.end());
}

}  // namespace curvespan
