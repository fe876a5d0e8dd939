#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ipsim/graph.hpp"
#include "ipsim/prng.hpp"
#include "ipsim/rules.hpp"

// Exact event-driven simulation. Site selection runs on a Fenwick tree over
// per-site total rates (log V per draw, local updates per jump), and every
// replica owns a counter-based stream keyed by (seed, replica), so results
// do not depend on scheduling or thread count.

namespace ipsim {

struct Event {
  double time = 0;
  int site = 0;
  uint8_t from = 0, to = 0;
};

struct EventLog {
  std::vector<uint8_t> initial;
  std::vector<Event> events;
  double t_end = 0;
  uint64_t seed = 0;
  uint64_t replica = 0;
};

namespace detail {

class FenwickTree {
 public:
  explicit FenwickTree(int n) : n_(n), tree_(n + 1, 0.0) {}

  void rebuild(const std::vector<double>& values) {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (int i = 0; i < n_; ++i) add(i, values[i]);
  }

  void add(int i, double delta) {
    for (int j = i + 1; j <= n_; j += j & -j) tree_[j] += delta;
  }

  double total() const {
    double acc = 0.0;
    for (int j = n_; j > 0; j -= j & -j) acc += tree_[j];
    return acc;
  }

  // smallest index with prefix sum exceeding target
  int find(double target) const {
    int pos = 0;
    int mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      int next = pos + mask;
      if (next <= n_ && tree_[next] <= target) {
        target -= tree_[next];
        pos = next;
      }
    }
    return std::min(pos, n_ - 1);
  }

 private:
  int n_;
  std::vector<double> tree_;
};

struct RateTable {
  const Graph* graph;
  const LocalRule* rule;
  std::vector<std::vector<int>> nbhd;
  std::vector<uint8_t> config;
  std::vector<double> site_rate;
  FenwickTree fenwick;
  std::vector<int> counts_scratch;
  std::vector<double> rates_scratch;

  RateTable(const Graph& g, const LocalRule& r, std::vector<uint8_t> eta0)
      : graph(&g),
        rule(&r),
        nbhd(ball_neighborhoods(g, r.range())),
        config(std::move(eta0)),
        site_rate(g.vertex_count(), 0.0),
        fenwick(g.vertex_count()),
        counts_scratch(r.num_states()),
        rates_scratch(r.num_states()) {
    if (static_cast<int>(config.size()) != g.vertex_count())
      throw std::invalid_argument("initial configuration size mismatch");
    for (int x = 0; x < g.vertex_count(); ++x) site_rate[x] = compute_rate(x);
    fenwick.rebuild(site_rate);
  }

  void fill_rates(int x, std::vector<double>& out) {
    std::fill(counts_scratch.begin(), counts_scratch.end(), 0);
    for (int y : nbhd[x]) ++counts_scratch[config[y]];
    rule->rates(config[x], counts_scratch, out);
    for (double v : out)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::runtime_error("rule produced a negative or non-finite rate");
  }

  double compute_rate(int x) {
    fill_rates(x, rates_scratch);
    double total = 0.0;
    for (double v : rates_scratch) total += v;
    return total;
  }

  void apply(int x, uint8_t to) {
    config[x] = to;
    refresh(x);
    for (int y : nbhd[x]) refresh(y);
  }

  void refresh(int x) {
    double fresh = compute_rate(x);
    fenwick.add(x, fresh - site_rate[x]);
    site_rate[x] = fresh;
  }
};

}  // namespace detail

/// One statistically exact trajectory on [0, t_end]. Identical
/// (seed, replica) always reproduces the identical log.
inline EventLog gillespie(const Graph& g, const LocalRule& rule,
                          const std::vector<uint8_t>& eta0, double t_end, uint64_t seed,
                          uint64_t replica = 0) {
  if (!(t_end > 0)) throw std::invalid_argument("t_end must be > 0");
  EventLog log;
  log.initial = eta0;
  log.t_end = t_end;
  log.seed = seed;
  log.replica = replica;

  detail::RateTable table(g, rule, eta0);
  RandomStream rng(seed, replica);
  double t = 0.0;
  uint64_t since_rebuild = 0;
  while (true) {
    double total = table.fenwick.total();
    if (total <= 0.0) break;
    t += rng.exponential(total);
    if (t > t_end) break;
    int site = table.fenwick.find(rng.uniform() * total);
    if (table.site_rate[site] <= 0.0) {
      // float drift in the tree landed on a dead site; resync and redraw
      table.fenwick.rebuild(table.site_rate);
      since_rebuild = 0;
      continue;
    }
    table.fill_rates(site, table.rates_scratch);
    double site_total = 0.0;
    for (double v : table.rates_scratch) site_total += v;
    double pick = rng.uniform() * site_total;
    int to = -1;
    double acc = 0.0;
    for (int w = 0; w < rule.num_states(); ++w) {
      if (table.rates_scratch[w] == 0.0) continue;
      to = w;
      acc += table.rates_scratch[w];
      if (pick < acc) break;
    }
    if (to < 0) continue;  // cannot happen while site_total > 0
    uint8_t from = table.config[site];
    log.events.push_back({t, site, from, static_cast<uint8_t>(to)});
    table.apply(site, static_cast<uint8_t>(to));
    if (++since_rebuild == 65536) {
      table.fenwick.rebuild(table.site_rate);
      since_rebuild = 0;
    }
  }
  return log;
}

/// Configuration at time t (right-continuous), by replay.
inline std::vector<uint8_t> state_at(const EventLog& log, double t) {
  std::vector<uint8_t> config = log.initial;
  for (const auto& ev : log.events) {
    if (ev.time > t) break;
    config[ev.site] = ev.to;
  }
  return config;
}

/// Replays the log and checks its internal invariants; throws on corruption.
inline void validate_event_log(const EventLog& log) {
  std::vector<uint8_t> config = log.initial;
  double prev = -1.0;
  for (const auto& ev : log.events) {
    if (!(ev.time > prev)) throw std::runtime_error("event times not strictly increasing");
    if (ev.time > log.t_end) throw std::runtime_error("event beyond t_end");
    if (config[ev.site] != ev.from) throw std::runtime_error("event 'from' state inconsistent");
    config[ev.site] = ev.to;
    prev = ev.time;
  }
}

struct EmpiricalSeries {
  std::string region_label;
  int region_size = 0;
  std::vector<double> grid;
  std::vector<std::vector<long long>> counts;  // [grid index][state]
  std::vector<double> degradation;             // empty unless a score map was supplied
};

/// Counts per state on the region at every grid time, in one replay pass.
/// score, when given, maps each state to a real degradation level and fixes
/// the number of count columns; otherwise pass num_states explicitly so that
/// replicas stay column-aligned even when some states never occur.
inline EmpiricalSeries observe(const EventLog& log, const Region& region,
                               const std::vector<double>& grid,
                               const std::vector<double>* score = nullptr, int num_states = 0) {
  EmpiricalSeries series;
  series.region_label = region.label;
  series.region_size = static_cast<int>(region.members.size());
  series.grid = grid;
  if (grid.empty()) return series;
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
  if (grid.front() < 0 || grid.back() > log.t_end)
    throw std::invalid_argument("grid time outside [0, t_end]");

  for (uint8_t s : log.initial) num_states = std::max(num_states, static_cast<int>(s) + 1);
  for (const auto& ev : log.events) num_states = std::max(num_states, static_cast<int>(ev.to) + 1);
  if (score) num_states = std::max(num_states, static_cast<int>(score->size()));

  std::vector<char> in_region(log.initial.size(), 0);
  for (int v : region.members) in_region[v] = 1;
  std::vector<long long> current(num_states, 0);
  for (int v : region.members) ++current[log.initial[v]];

  size_t gi = 0;
  auto capture = [&]() {
    series.counts.push_back(current);
    if (score) {
      double d = 0.0;
      for (int w = 0; w < num_states; ++w) d += (*score)[w] * static_cast<double>(current[w]);
      series.degradation.push_back(d);
    }
  };
  for (const auto& ev : log.events) {
    while (gi < grid.size() && grid[gi] < ev.time) {
      capture();
      ++gi;
    }
    if (in_region[ev.site]) {
      --current[ev.from];
      ++current[ev.to];
    }
  }
  while (gi < grid.size()) {
    capture();
    ++gi;
  }
  for (const auto& row : series.counts) {
    long long total = 0;
    for (long long c : row) total += c;
    if (total != series.region_size)
      throw std::runtime_error("count conservation violated during observation");
  }
  return series;
}

struct ReplicaRun {
  std::vector<EmpiricalSeries> series;
  std::vector<EventLog> logs;  // filled only when retain_logs
};

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Independent replicas keyed by (seed, replica id). The outcome is a pure
/// function of those keys: thread count and scheduling cannot change it.
inline ReplicaRun run_replicas(const Graph& g, const LocalRule& rule,
                               const std::vector<uint8_t>& eta0, double t_end,
                               const std::vector<double>& grid, const Region& region,
                               const std::vector<double>* score, int n_replicas, uint64_t seed,
                               int threads = 0, bool retain_logs = false) {
  if (n_replicas < 1) throw std::invalid_argument("need at least one replica");
  ReplicaRun run;
  run.series.resize(n_replicas);
  if (retain_logs) run.logs.resize(n_replicas);

  int n_workers = std::min(resolve_threads(threads), n_replicas);
  auto worker = [&](int worker_id) {
    for (int i = worker_id; i < n_replicas; i += n_workers) {
      EventLog log = gillespie(g, rule, eta0, t_end, seed, static_cast<uint64_t>(i));
      run.series[i] = observe(log, region, grid, score, rule.num_states());
      if (retain_logs) run.logs[i] = std::move(log);
    }
  };
  if (n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  return run;
}

/// Two trajectories from pointwise-ordered starts, driven by one shared
/// random stream through a uniformized clock: every site rings at the
/// coupling rate bound and both copies jump through the shared uniform via
/// the inverse transition CDF. Order is asserted at every ring; a violation
/// is a bug in the rule's certificate, not randomness.
inline std::pair<EventLog, EventLog> coupled_pair(const Graph& g, const LocalRule& rule,
                                                  const std::vector<uint8_t>& eta_low,
                                                  const std::vector<uint8_t>& eta_high,
                                                  double t_end, uint64_t seed,
                                                  uint64_t replica = 0) {
  if (!(t_end > 0)) throw std::invalid_argument("t_end must be > 0");
  const int v_count = g.vertex_count();
  if (static_cast<int>(eta_low.size()) != v_count ||
      static_cast<int>(eta_high.size()) != v_count)
    throw std::invalid_argument("initial configuration size mismatch");
  for (int x = 0; x < v_count; ++x)
    if (eta_low[x] > eta_high[x])
      throw std::invalid_argument("initial configurations are not pointwise ordered");

  auto nbhd = ball_neighborhoods(g, rule.range());
  int max_neighbors = 0;
  for (const auto& list : nbhd) max_neighbors = std::max(max_neighbors, static_cast<int>(list.size()));
  auto cert = monotonicity_certificate(rule, max_neighbors);
  if (!cert.pass)
    throw std::invalid_argument("coupled_pair requires a monotone rule; " + cert.violation);

  double site_clock = coupling_rate_bound(rule, g).value;
  EventLog low{eta_low, {}, t_end, seed, replica};
  EventLog high{eta_high, {}, t_end, seed, replica};
  if (site_clock <= 0.0) return {low, high};
  const int w = rule.num_states();
  std::vector<int> counts(w);
  std::vector<double> rates(w);
  auto jump = [&](const std::vector<uint8_t>& config, int site, double u) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int y : nbhd[site]) ++counts[config[y]];
    rule.rates(config[site], counts, rates);
    double total = 0.0;
    for (double v : rates) total += v;
    if (total > site_clock + 1e-9)
      throw std::runtime_error("site rate exceeds the coupling clock bound");
    double cum = 0.0;
    for (int target = 0; target < w; ++target) {
      cum += target == config[site] ? 1.0 - (total - rates[target]) / site_clock
                                    : rates[target] / site_clock;
      if (u < cum) return static_cast<uint8_t>(target);
    }
    return config[site];
  };

  std::vector<uint8_t> cfg_low = eta_low;
  std::vector<uint8_t> cfg_high = eta_high;
  RandomStream rng(seed ^ 0x636f75706cULL, replica);
  double t = 0.0;
  double total_clock = site_clock * v_count;
  while (true) {
    t += rng.exponential(total_clock);
    if (t > t_end) break;
    int site = std::min(static_cast<int>(rng.uniform() * v_count), v_count - 1);
    double u = rng.uniform();
    uint8_t nl = jump(cfg_low, site, u);
    uint8_t nh = jump(cfg_high, site, u);
    if (nl > nh)
      throw std::runtime_error("monotone coupling violated order at site " +
                               std::to_string(site) + ", time " + std::to_string(t));
    if (nl != cfg_low[site]) {
      low.events.push_back({t, site, cfg_low[site], nl});
      cfg_low[site] = nl;
    }
    if (nh != cfg_high[site]) {
      high.events.push_back({t, site, cfg_high[site], nh});
      cfg_high[site] = nh;
    }
  }
  return {low, high};
}

/// First time the degradation sum over the region reaches the threshold;
/// exact event time, no grid involved. nullopt if never reached by t_end.
inline std::optional<double> first_crossing(const EventLog& log, const Region& region,
                                            const std::vector<double>& score, double threshold) {
  std::vector<char> in_region(log.initial.size(), 0);
  for (int v : region.members) in_region[v] = 1;
  double d = 0.0;
  for (int v : region.members) d += score[log.initial[v]];
  if (d >= threshold) return 0.0;
  for (const auto& ev : log.events) {
    if (!in_region[ev.site]) continue;
    d += score[ev.to] - score[ev.from];
    if (d >= threshold) return ev.time;
  }
  return std::nullopt;
}

}  // namespace ipsim
