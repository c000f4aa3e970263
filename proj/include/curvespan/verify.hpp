#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvespan/graph.hpp"
#include "curvespan/instance.hpp"

namespace curvespan {

enum class VerifyMode { Multiplicative, Additive, Two };

VerifyMode verify_mode_from_string(const std::string& s);
std::string verify_mode_name(VerifyMode m);

struct VerifyOptions {
  bool dual_check = false;     // rerun small graphs through a dense matrix
  int all_pairs_cap = 5000;    // inputs above this switch to sampled pairs
  int64_t sample_pairs = 200000;
  int threads = 1;
  uint64_t seed = 1;
};

struct StretchReport {
  VerifyMode mode = VerifyMode::Multiplicative;
  double bound = 0.0;      // allowed ratio, or allowed absolute excess
  double worst = 0.0;      // max ratio (multiplicative/two) or max excess
  double mean = 0.0;
  bool violation = false;
  int worst_u = -1, worst_v = -1;
  double worst_metric = 0.0, worst_graph = 0.0;
  int64_t pairs_checked = 0;
  bool sampled = false;
  int64_t edge_count = 0;
  int steiner_count = 0;
  std::vector<int64_t> degree_histogram;  // input-vertex degrees
  double wall_seconds = 0.0;
  double dual_max_diff = -1.0;  // max |matrix - heap| when the recheck ran
};

// Exact stretch audit of g against the instance metric: Dijkstra from every
// input vertex (all input pairs up to the cap, sampled pairs beyond). The
// first n() graph vertices must be the instance points in order. A
// disconnected input pair counts as infinite stretch, hence a violation.
// Violations allow 1e-6 slack on top of the bound.
StretchReport verify_spanner(const SpannerGraph& g, const Instance& inst,
                             VerifyMode mode, double bound,
                             const VerifyOptions& opt = VerifyOptions());

std::string format_report(const StretchReport& rep);

}  // namespace curvespan
