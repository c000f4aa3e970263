#include "curvespan/dyn_order.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "curvespan/errors.hpp"
#include "curvespan/geometry.hpp"

namespace curvespan {

bool OrderStore::Cmp::operator()(int a, int b) const {
  if (a == b) return false;
  Order o = store->fam_->order_compare(store->pts_.at(a), store->pts_.at(b),
                                       shift);
  if (o == Order::Equal) return a < b;
  return o == Order::Less;
}

OrderStore::OrderStore(const ShiftFamily& family) : fam_(&family) {
  seqs_.reserve(fam_->num_shifts());
  for (int s = 0; s < fam_->num_shifts(); ++s)
    seqs_.emplace_back(Cmp{this, s});
}

const Point& OrderStore::point(int id) const {
  auto it = pts_.find(id);
  if (it == pts_.end()) throw UsageError("order store: unknown point id");
  return it->second;
}

std::vector<int> OrderStore::ids() const {
  std::vector<int> out;
  out.reserve(pts_.size());
  for (const auto& kv : pts_) out.push_back(kv.first);
  return out;
}

std::vector<int> OrderStore::ordered_ids(int shift) const {
  if (shift < 0 || shift >= (int)seqs_.size())
    throw UsageError("order store: shift index out of range");
  return std::vector<int>(seqs_[shift].begin(), seqs_[shift].end());
}

AdjacencyDelta OrderStore::insert(int id, const Point& p) {
  if (pts_.count(id)) throw UsageError("order store: duplicate point id");
  if (p.space != fam_->space() || p.d != fam_->dim())
    throw UsageError("order store: point does not match the family");
  if (!pts_.empty() && fam_->space() != Space::Spherical) {
    // Keep the instance inside the serving range. Measuring from the
    // earliest live point bounds the diameter by twice the cap, which the
    // shift family's window slack absorbs.
    if (dist(p, pts_.at(anchor_)) > fam_->delta_cap())
      throw UsageError("order store: point outside the supported diameter");
  }
  pts_.emplace(id, p);
  if (pts_.size() == 1 || id < anchor_) anchor_ = pts_.begin()->first;

  AdjacencyDelta delta;
  delta.per_shift.resize(seqs_.size());
  for (int s = 0; s < (int)seqs_.size(); ++s) {
    auto [it, fresh] = seqs_[s].insert(id);
    (void)fresh;
    ShiftDelta& sd = delta.per_shift[s];
    auto nx = std::next(it);
    bool has_prev = it != seqs_[s].begin();
    bool has_next = nx != seqs_[s].end();
    int prev = has_prev ? *std::prev(it) : -1;
    int next = has_next ? *nx : -1;
    if (has_prev && has_next) sd.destroyed.push_back({prev, next});
    if (has_prev) sd.created.push_back({prev, id});
    if (has_next) sd.created.push_back({id, next});
  }
  return delta;
}

AdjacencyDelta OrderStore::erase(int id) {
  if (!pts_.count(id)) throw UsageError("order store: unknown point id");
  AdjacencyDelta delta;
  delta.per_shift.resize(seqs_.size());
  for (int s = 0; s < (int)seqs_.size(); ++s) {
    auto it = seqs_[s].find(id);
    ShiftDelta& sd = delta.per_shift[s];
    auto nx = std::next(it);
    bool has_prev = it != seqs_[s].begin();
    bool has_next = nx != seqs_[s].end();
    int prev = has_prev ? *std::prev(it) : -1;
    int next = has_next ? *nx : -1;
    if (has_prev) sd.destroyed.push_back({prev, id});
    if (has_next) sd.destroyed.push_back({id, next});
    if (has_prev && has_next) sd.created.push_back({prev, next});
    seqs_[s].erase(it);
  }
  pts_.erase(id);
  if (id == anchor_) anchor_ = pts_.empty() ? -1 : pts_.begin()->first;
  return delta;
}

std::pair<std::optional<int>, std::optional<int>> OrderStore::neighbours(
    int id, int shift) const {
  if (shift < 0 || shift >= (int)seqs_.size())
    throw UsageError("order store: shift index out of range");
  // The sequence comparator dereferences ids, so reject unknowns up front.
  if (!pts_.count(id)) throw UsageError("order store: unknown point id");
  auto it = seqs_[shift].find(id);
  if (it == seqs_[shift].end())
    throw UsageError("order store: unknown point id");
  std::optional<int> prev, next;
  if (it != seqs_[shift].begin()) prev = *std::prev(it);
  auto nx = std::next(it);
  if (nx != seqs_[shift].end()) next = *nx;
  return {prev, next};
}

std::vector<ScriptOp> parse_op_script(Space space, int d, std::istream& in) {
  std::vector<ScriptOp> ops;
  std::string line;
  int lineno = 0;
  int ambient = space == Space::Spherical ? d + 1 : d;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string verb;
    if (!(ls >> verb)) continue;  // blank line
    if (verb == "#") continue;
    ScriptOp op;
    if (verb == "ins") {
      op.is_insert = true;
      if (!(ls >> op.id))
        throw ParseError("op script line " + std::to_string(lineno) +
                         ": missing id");
      double c[4] = {0, 0, 0, 0};
      for (int j = 0; j < ambient; ++j) {
        if (!(ls >> c[j]))
          throw ParseError("op script line " + std::to_string(lineno) +
                           ": expected " + std::to_string(ambient) +
                           " coordinates");
      }
      double extra;
      if (ls >> extra)
        throw ParseError("op script line " + std::to_string(lineno) +
                         ": too many coordinates");
      op.p = make_point(space, d, c);
    } else if (verb == "del") {
      op.is_insert = false;
      if (!(ls >> op.id))
        throw ParseError("op script line " + std::to_string(lineno) +
                         ": missing id");
    } else {
      throw ParseError("op script line " + std::to_string(lineno) +
                       ": unknown op '" + verb + "'");
    }
    ops.push_back(op);
  }
  return ops;
}

void write_op_script(const std::vector<ScriptOp>& ops, std::ostream& out) {
  for (const ScriptOp& op : ops) {
    if (op.is_insert) {
      out << "ins " << op.id;
      int ambient = op.p.space == Space::Spherical ? op.p.d + 1 : op.p.d;
      out.precision(17);
      for (int j = 0; j < ambient; ++j) out << ' ' << op.p.c[j];
      out << '\n';
    } else {
      out << "del " << op.id << '\n';
    }
  }
}

}  // namespace curvespan
