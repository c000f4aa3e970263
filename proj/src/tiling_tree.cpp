#include <algorithm>

#include "curvespan/dyn_order.hpp"
#include "curvespan/errors.hpp"

namespace curvespan {

namespace {

Cell none_cell(const ShiftFamily& fam, int shift) {
  Cell c;
  c.space = Space::Hyperbolic;
  c.top = true;
  c.shift = shift;
  c.level = 63;
  c.d = fam.dim();
  return c;
}

}  // namespace

TilingTree::TilingTree(const ShiftFamily& family, int shift, int level)
    : fam_(&family),
      shift_(shift),
      level_(level),
      leaves_(TileLess{this}) {
  if (family.space() != Space::Hyperbolic)
    throw UsageError("tiling tree: hyperbolic geometry only");
  if (shift < 0 || shift >= family.num_shifts())
    throw UsageError("tiling tree: shift out of range");
  if (level < 0 || level > family.top_level())
    throw UsageError("tiling tree: level out of range");
}

// Lowest common tile of two same-level tiles. Bands align first; once they
// agree, an x-index gap at least halves per joint climb and only the
// unshifted-x family keeps a permanent dividing line, so pairs that merge at
// all merge within ~260 joint climbs.
TilingTree::Meet TilingTree::meet(Cell a, Cell b) const {
  Meet m;
  for (int64_t it = 0; a.zb != b.zb; ++it) {
    if (it > 4200) return m;
    if (a.zb < b.zb) {
      Cell pa = fam_->tile_parent(a);
      if (pa == b) {
        m.none = false;
        m.at = b;
        m.below_a = a;
        m.below_b = b;
        return m;
      }
      a = pa;
    } else {
      Cell pb = fam_->tile_parent(b);
      if (pb == a) {
        m.none = false;
        m.at = a;
        m.below_a = a;
        m.below_b = b;
        return m;
      }
      b = pb;
    }
  }
  if (a == b) {
    m.none = false;
    m.at = a;
    m.below_a = a;
    m.below_b = b;
    return m;
  }
  for (int it = 0; it < 300; ++it) {
    Cell pa = fam_->tile_parent(a);
    Cell pb = fam_->tile_parent(b);
    if (pa == pb) {
      m.none = false;
      m.at = pa;
      m.below_a = a;
      m.below_b = b;
      return m;
    }
    a = pa;
    b = pb;
  }
  return m;
}

// Leaf traversal order: ancestors first, then by the child the chains take
// under the meet. Tiles in different trees of the forest order by their side
// of each x = 0 plane, which is climb-invariant on the unshifted-x family
// (the only one whose forest is disconnected).
bool TilingTree::TileLess::operator()(const Cell& a, const Cell& b) const {
  if (a == b) return false;
  Meet m = t->meet(a, b);
  if (m.none) {
    for (int k = 0; k + 1 < t->fam_->dim(); ++k) {
      bool na = a.ix[k] < 0, nb = b.ix[k] < 0;
      if (na != nb) return na;
    }
    return CellKeyLess{}(a, b);
  }
  if (m.at == a) return true;
  if (m.at == b) return false;
  for (int k = 0; k + 1 < t->fam_->dim(); ++k) {
    if (m.below_a.ix[k] != m.below_b.ix[k])
      return m.below_a.ix[k] < m.below_b.ix[k];
  }
  return false;
}

TilingTree::Node& TilingTree::node_at(const Cell& c) {
  auto it = vx_.find(c);
  if (it == vx_.end()) {
    it = vx_.emplace(c, Node{}).first;
    zbs_.insert(c.zb);
  }
  return it->second;
}

void TilingTree::ref_lca(const Cell& a, const Cell& b) {
  Meet m = meet(a, b);
  if (m.none) return;
  node_at(m.at).lca_refs += 1;
}

void TilingTree::unref_lca(const Cell& a, const Cell& b) {
  Meet m = meet(a, b);
  if (m.none) return;
  auto it = vx_.find(m.at);
  if (it == vx_.end() || it->second.lca_refs <= 0)
    throw UsageError("tiling tree: reference counts corrupted");
  it->second.lca_refs -= 1;
  drop_if_dead(m.at);
}

void TilingTree::drop_if_dead(const Cell& c) {
  auto it = vx_.find(c);
  if (it == vx_.end()) return;
  if (it->second.leaf_pts == 0 && it->second.lca_refs == 0) {
    vx_.erase(it);
    zbs_.erase(zbs_.find(c.zb));
  }
}

void TilingTree::insert(int id, const Point& p) {
  if (id2leaf_.count(id)) throw UsageError("tiling tree: duplicate id");
  if (p.space != Space::Hyperbolic)
    throw UsageError("tiling tree: point in the wrong geometry");
  Cell leaf = fam_->cell_of(p, shift_, level_);
  Node& node = node_at(leaf);
  node.ids.push_back(id);
  node.leaf_pts += 1;
  id2leaf_.emplace(id, leaf);
  if (node.leaf_pts > 1) return;
  // The tile just became occupied: splice it into the leaf sequence and
  // re-point the adjacent-pair lca references around it.
  auto it = leaves_.insert(leaf).first;
  auto nx = std::next(it);
  std::optional<Cell> prev, next;
  if (it != leaves_.begin()) prev = *std::prev(it);
  if (nx != leaves_.end()) next = *nx;
  if (prev && next) unref_lca(*prev, *next);
  if (prev) ref_lca(*prev, leaf);
  if (next) ref_lca(leaf, *next);
}

void TilingTree::erase(int id) {
  auto pit = id2leaf_.find(id);
  if (pit == id2leaf_.end()) throw UsageError("tiling tree: unknown id");
  Cell leaf = pit->second;
  id2leaf_.erase(pit);
  Node& node = vx_.at(leaf);
  node.ids.erase(std::find(node.ids.begin(), node.ids.end(), id));
  node.leaf_pts -= 1;
  if (node.leaf_pts > 0) return;
  auto it = leaves_.find(leaf);
  std::optional<Cell> prev, next;
  if (it != leaves_.begin()) prev = *std::prev(it);
  if (std::next(it) != leaves_.end()) next = *std::next(it);
  leaves_.erase(it);
  if (prev && next) ref_lca(*prev, *next);
  if (prev) unref_lca(*prev, leaf);
  if (next) unref_lca(leaf, *next);
  drop_if_dead(leaf);
}

Cell TilingTree::leaf_of(int id) const {
  auto it = id2leaf_.find(id);
  if (it == id2leaf_.end()) throw UsageError("tiling tree: unknown id");
  return it->second;
}

Cell TilingTree::lca(int id1, int id2) const {
  Cell a = leaf_of(id1), b = leaf_of(id2);
  if (a == b) return a;
  // Vertices are closed under pairwise meets, so the meet of two occupied
  // tiles is itself stored and is the lowest common stored ancestor.
  Meet m = meet(a, b);
  if (m.none) return none_cell(*fam_, shift_);
  return m.at;
}

std::optional<Cell> TilingTree::parent_of(const Cell& v) const {
  if (v.top || v.space != Space::Hyperbolic || v.shift != shift_ ||
      v.level != level_)
    throw UsageError("tiling tree: vertex from a different tiling");
  if (zbs_.empty()) return std::nullopt;
  // No stored vertex lies above the highest stored band, so the climb stops
  // there instead of chasing an unbounded ancestor chain.
  ixty max_zb = *zbs_.rbegin();
  Cell cur = v;
  while (cur.zb < max_zb) {
    cur = fam_->tile_parent(cur);
    auto it = vx_.find(cur);
    if (it != vx_.end()) return cur;
  }
  return std::nullopt;
}

std::vector<Cell> TilingTree::vertices() const {
  std::vector<Cell> out;
  out.reserve(vx_.size());
  for (const auto& kv : vx_) out.push_back(kv.first);
  return out;
}

const std::vector<int>& TilingTree::points_at(const Cell& leaf) const {
  auto it = vx_.find(leaf);
  if (it == vx_.end() || it->second.leaf_pts == 0)
    throw UsageError("tiling tree: tile is not occupied");
  return it->second.ids;
}

}  // namespace curvespan
