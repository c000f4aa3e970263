#include "curvespan/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <thread>

#include "curvespan/errors.hpp"

namespace curvespan {

VerifyMode verify_mode_from_string(const std::string& s) {
  if (s == "multiplicative") return VerifyMode::Multiplicative;
  if (s == "additive") return VerifyMode::Additive;
  if (s == "two") return VerifyMode::Two;
  throw UsageError("verify: unknown mode '" + s + "'");
}

std::string verify_mode_name(VerifyMode m) {
  switch (m) {
    case VerifyMode::Multiplicative: return "multiplicative";
    case VerifyMode::Additive: return "additive";
    default: return "two";
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Csr {
  std::vector<int> off;
  std::vector<int> to;
  std::vector<double> w;
  explicit Csr(const SpannerGraph& g) {
    int nv = g.num_vertices();
    off.assign(nv + 1, 0);
    for (const auto& e : g.edges()) {
      off[e.u + 1]++;
      off[e.v + 1]++;
    }
    for (int v = 0; v < nv; ++v) off[v + 1] += off[v];
    to.resize(off[nv]);
    w.resize(off[nv]);
    std::vector<int> cur(off.begin(), off.end() - 1);
    for (const auto& e : g.edges()) {
      to[cur[e.u]] = e.v;
      w[cur[e.u]++] = e.w;
      to[cur[e.v]] = e.u;
      w[cur[e.v]++] = e.w;
    }
  }
};

// Single-source distances; stops once `needed` target vertices settle.
void dijkstra(const Csr& csr, int src, int needed, std::vector<double>& dist,
              std::vector<int>& touched) {
  for (int v : touched) dist[v] = kInf;
  touched.clear();
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[src] = 0.0;
  touched.push_back(src);
  pq.push({0.0, src});
  int settled_targets = 0;
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u]) continue;
    if (u < needed && ++settled_targets == needed) break;
    for (int k = csr.off[u]; k < csr.off[u + 1]; ++k) {
      int v = csr.to[k];
      double nd = du + csr.w[k];
      if (nd < dist[v]) {
        if (dist[v] == kInf) touched.push_back(v);
        dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }
}

struct PairScore {
  double value = -kInf;
  int u = -1, v = -1;
  double metric = 0.0, graph = 0.0;
  double sum = 0.0;
  int64_t count = 0;

  void take(double val, int uu, int vv, double dm, double dg) {
    sum += val;
    count += 1;
    if (val > value ||
        (val == value && std::make_pair(uu, vv) < std::make_pair(u, v))) {
      value = val;
      u = uu;
      v = vv;
      metric = dm;
      graph = dg;
    }
  }
  void merge(const PairScore& o) {
    sum += o.sum;
    count += o.count;
    if (o.value > value || (o.value == value &&
                            std::make_pair(o.u, o.v) < std::make_pair(u, v)))
      *this = PairScore{o.value, o.u, o.v, o.metric, o.graph, sum, count};
  }
};

double score_pair(VerifyMode mode, double dm, double dg) {
  if (mode == VerifyMode::Additive) return dg - dm;
  if (dg == dm) return 1.0;  // covers the 0/0 duplicate-point case
  if (dm == 0.0) return kInf;
  return dg / dm;
}

}  // namespace

StretchReport verify_spanner(const SpannerGraph& g, const Instance& inst,
                             VerifyMode mode, double bound,
                             const VerifyOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  int n = inst.n();
  int nv = g.num_vertices();
  if (n > nv) throw UsageError("verify: graph does not cover the instance");
  if (g.space() != inst.space || g.dim() != inst.d)
    throw UsageError("verify: graph and instance geometries differ");
  for (int i = 0; i < n; ++i) {
    if (g.vertex(i).kind != VertexKind::Input ||
        !(g.vertex(i).p.c == inst.points[i].c))
      throw UsageError(
          "verify: the first graph vertices must be the instance points");
  }

  StretchReport rep;
  rep.mode = mode;
  rep.bound = bound;
  rep.edge_count = g.num_edges();
  rep.steiner_count = g.num_steiner();
  for (int v = 0; v < nv; ++v) {
    if (g.vertex(v).kind != VertexKind::Input) continue;
    int deg = g.degree(v);
    if ((int)rep.degree_histogram.size() <= deg)
      rep.degree_histogram.resize(deg + 1, 0);
    rep.degree_histogram[deg] += 1;
  }
  if (n < 2) {
    rep.worst = mode == VerifyMode::Additive ? 0.0 : 1.0;
    rep.mean = rep.worst;
    auto t1 = std::chrono::steady_clock::now();
    rep.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return rep;
  }

  Csr csr(g);

  // Source -> sorted targets. All pairs (u, v > u) by default; beyond the
  // cap, a seeded sample of pairs.
  std::vector<std::vector<int>> targets(n);
  rep.sampled = n > opt.all_pairs_cap;
  if (!rep.sampled) {
    for (int u = 0; u + 1 < n; ++u) {
      targets[u].resize(n - u - 1);
      for (int v = u + 1; v < n; ++v) targets[u][v - u - 1] = v;
    }
  } else {
    std::mt19937_64 eng(opt.seed);
    auto pick = [&](int lim) { return (int)(eng() % (uint64_t)lim); };
    for (int64_t s = 0; s < opt.sample_pairs; ++s) {
      int u = pick(n), v = pick(n);
      if (u == v) continue;
      targets[std::min(u, v)].push_back(std::max(u, v));
    }
    for (auto& t : targets) {
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
    }
  }

  int threads = std::max(1, opt.threads);
  std::vector<PairScore> scores(threads);
  std::vector<int64_t> disconnected(threads, 0);
  auto worker = [&](int tid) {
    std::vector<double> dvec(nv, kInf);
    std::vector<int> touched;
    PairScore& sc = scores[tid];
    for (int u = tid; u < n; u += threads) {
      if (targets[u].empty()) continue;
      dijkstra(csr, u, n, dvec, touched);
      for (int v : targets[u]) {
        double dm = dist(inst.points[u], inst.points[v]);
        double dg = dvec[v];
        if (dg == kInf) {
          disconnected[tid] += 1;
          sc.take(kInf, u, v, dm, dg);
          continue;
        }
        sc.take(score_pair(mode, dm, dg), u, v, dm, dg);
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  PairScore total;
  for (const PairScore& sc : scores) total.merge(sc);
  rep.worst = total.value;
  rep.worst_u = total.u;
  rep.worst_v = total.v;
  rep.worst_metric = total.metric;
  rep.worst_graph = total.graph;
  rep.pairs_checked = total.count;
  rep.mean = total.count ? total.sum / (double)total.count : 0.0;
  rep.violation = !(rep.worst <= bound + 1e-6);

  // Independent dense recheck: Floyd-Warshall over the whole vertex set,
  // compared on the audited pairs. Quadratic memory, so small graphs only.
  if (opt.dual_check && nv <= 1400) {
    std::vector<double> m((size_t)nv * nv, kInf);
    for (int v = 0; v < nv; ++v) m[(size_t)v * nv + v] = 0.0;
    for (const auto& e : g.edges()) {
      size_t a = (size_t)e.u * nv + e.v, b = (size_t)e.v * nv + e.u;
      m[a] = std::min(m[a], e.w);
      m[b] = std::min(m[b], e.w);
    }
    for (int k = 0; k < nv; ++k) {
      const double* rk = &m[(size_t)k * nv];
      for (int i = 0; i < nv; ++i) {
        double dik = m[(size_t)i * nv + k];
        if (dik == kInf) continue;
        double* ri = &m[(size_t)i * nv];
        for (int j = 0; j < nv; ++j) {
          double nd = dik + rk[j];
          if (nd < ri[j]) ri[j] = nd;
        }
      }
    }
    std::vector<double> dvec(nv, kInf);
    std::vector<int> touched;
    rep.dual_max_diff = 0.0;
    for (int u = 0; u + 1 < n; ++u) {
      dijkstra(csr, u, n, dvec, touched);
      for (int v = u + 1; v < n; ++v) {
        double a = dvec[v], b = m[(size_t)u * nv + v];
        if (a == kInf && b == kInf) continue;
        double diff = (a == kInf || b == kInf) ? kInf : std::abs(a - b);
        rep.dual_max_diff = std::max(rep.dual_max_diff, diff);
      }
    }
  }

  auto t1 = std::chrono::steady_clock::now();
  rep.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return rep;
}

std::string format_report(const StretchReport& rep) {
  std::ostringstream os;
  os.precision(12);
  os << "mode " << verify_mode_name(rep.mode) << " bound " << rep.bound
     << (rep.mode == VerifyMode::Additive ? " max-excess " : " max-stretch ")
     << rep.worst << " mean " << rep.mean << " pairs " << rep.pairs_checked
     << (rep.sampled ? " (sampled)" : "") << '\n';
  os << "edges " << rep.edge_count << " steiner " << rep.steiner_count
     << " wall-s " << rep.wall_seconds << '\n';
  if (rep.worst_u >= 0)
    os << "worst-pair " << rep.worst_u << ' ' << rep.worst_v << " metric "
       << rep.worst_metric << " graph " << rep.worst_graph << '\n';
  if (rep.dual_max_diff >= 0)
    os << "dual-recheck max-diff " << rep.dual_max_diff << '\n';
  int64_t total = 0, dmax = 0;
  for (size_t d = 0; d < rep.degree_histogram.size(); ++d) {
    total += rep.degree_histogram[d];
    if (rep.degree_histogram[d]) dmax = (int64_t)d;
  }
  os << "input-degrees max " << dmax << " histogram-size " << total << '\n';
  os << (rep.violation ? "VIOLATION" : "OK") << '\n';
  return os.str();
}

}  // namespace curvespan
