#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "curvespan/quadtree.hpp"

namespace curvespan {

// An ordered neighbour pair in one shift's sequence; a precedes b.
struct NeighbourPair {
  int a = -1;
  int b = -1;
};

inline bool operator==(const NeighbourPair& x, const NeighbourPair& y) {
  return x.a == y.a && x.b == y.b;
}

struct ShiftDelta {
  std::vector<NeighbourPair> created;
  std::vector<NeighbourPair> destroyed;
};

// Per-shift adjacency changes caused by one insert or erase. An update
// touches at most one splice point per sequence, so each entry carries at
// most three pairs.
struct AdjacencyDelta {
  std::vector<ShiftDelta> per_shift;
};

// The points of the instance held once, plus one sorted sequence per shift.
// Sequences are kept sorted under order_compare (ties by id) at all times;
// every live id appears exactly once per sequence. Single writer.
class OrderStore {
 public:
  explicit OrderStore(const ShiftFamily& family);
  OrderStore(const OrderStore&) = delete;
  OrderStore& operator=(const OrderStore&) = delete;

  AdjacencyDelta insert(int id, const Point& p);
  AdjacencyDelta erase(int id);

  // Predecessor and successor of a live id in one shift's sequence.
  std::pair<std::optional<int>, std::optional<int>> neighbours(
      int id, int shift) const;

  bool contains(int id) const { return pts_.count(id) != 0; }
  const Point& point(int id) const;
  int size() const { return (int)pts_.size(); }
  std::vector<int> ids() const;
  std::vector<int> ordered_ids(int shift) const;
  const ShiftFamily& family() const { return *fam_; }

 private:
  struct Cmp {
    const OrderStore* store;
    int shift;
    bool operator()(int a, int b) const;
  };

  const ShiftFamily* fam_;
  std::map<int, Point> pts_;
  std::vector<std::set<int, Cmp>> seqs_;
  int anchor_ = -1;  // earliest-id live point; range checks measure from it
};

// One replayable mutation of a point set.
struct ScriptOp {
  bool is_insert = false;
  int id = -1;
  Point p;
};

// Text op scripts: one op per line, `ins <id> <coords...>` or `del <id>`.
std::vector<ScriptOp> parse_op_script(Space space, int d, std::istream& in);
void write_op_script(const std::vector<ScriptOp>& ops, std::ostream& out);

// Dynamic compressed tree over the level-`level` hyperbolic tiles occupied
// by the current points: vertices are the occupied tiles plus pairwise tile
// lcas, each linked to the first stored tile above it. Vertex count stays
// at most twice the number of distinct occupied tiles.
class TilingTree {
 public:
  TilingTree(const ShiftFamily& family, int shift, int level);
  TilingTree(const TilingTree&) = delete;
  TilingTree& operator=(const TilingTree&) = delete;

  void insert(int id, const Point& p);
  void erase(int id);

  Cell leaf_of(int id) const;
  // Lowest common stored ancestor of the two points' tiles; a top-marked
  // cell when they lie in different trees of the forest.
  Cell lca(int id1, int id2) const;
  // First stored cell strictly above v, or nothing for a root.
  std::optional<Cell> parent_of(const Cell& v) const;

  bool contains_vertex(const Cell& c) const { return vx_.count(c) != 0; }
  std::vector<Cell> vertices() const;
  int vertex_count() const { return (int)vx_.size(); }
  const std::vector<int>& points_at(const Cell& leaf) const;
  int shift() const { return shift_; }
  int level() const { return level_; }
  int point_count() const { return (int)id2leaf_.size(); }

 private:
  struct TileLess {
    const TilingTree* t;
    bool operator()(const Cell& a, const Cell& b) const;
  };
  struct Node {
    int leaf_pts = 0;
    int lca_refs = 0;
    std::vector<int> ids;
  };
  struct Meet {
    bool none = true;
    Cell at;      // valid when !none
    Cell below_a; // child of `at` on a's chain (== a when at == a)
    Cell below_b;
  };

  Meet meet(Cell a, Cell b) const;
  Node& node_at(const Cell& c);
  void ref_lca(const Cell& a, const Cell& b);
  void unref_lca(const Cell& a, const Cell& b);
  void drop_if_dead(const Cell& c);

  const ShiftFamily* fam_;
  int shift_;
  int level_;
  // Vertices are keyed cheaply; only the leaf sequence needs traversal
  // order, where comparisons climb the tile chains.
  std::map<Cell, Node, CellKeyLess> vx_;
  std::set<Cell, TileLess> leaves_;
  std::map<int, Cell> id2leaf_;
  std::multiset<ixty> zbs_;  // bands of stored vertices; caps parent climbs
};

}  // namespace curvespan
