#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "ipsim/graph.hpp"
#include "ipsim/rules.hpp"

// Exact finite-state oracle. The full generator on W^V is assembled as a
// sparse matrix (feasible only for tiny systems) and transient quantities
// are computed by uniformization: P = I + Q/L with L at least the largest
// total exit rate, and S_t realized as a Poisson mixture of powers of P with
// an explicit tail-truncation tolerance.

namespace ipsim {

inline constexpr uint64_t kDefaultStateCap = uint64_t{1} << 20;

struct GeneratorMatrix {
  int num_sites = 0;
  int num_states = 0;        // per site
  uint64_t dimension = 0;    // num_states^num_sites
  std::vector<uint64_t> row_ptr;
  std::vector<uint32_t> col;
  std::vector<double> val;   // off-diagonal rates
  std::vector<double> diag;  // minus the row sums
  double uniformization_rate = 0;

  std::vector<uint8_t> decode(uint64_t idx) const {
    std::vector<uint8_t> state(num_sites);
    for (int x = 0; x < num_sites; ++x) {
      state[x] = static_cast<uint8_t>(idx % num_states);
      idx /= num_states;
    }
    return state;
  }

  uint64_t encode(const std::vector<uint8_t>& state) const {
    uint64_t idx = 0;
    for (int x = num_sites - 1; x >= 0; --x) idx = idx * num_states + state[x];
    return idx;
  }
};

inline GeneratorMatrix build_generator(const Graph& g, const LocalRule& rule,
                                       uint64_t state_cap = kDefaultStateCap) {
  const int v_count = g.vertex_count();
  const int w = rule.num_states();
  double dim_est = std::pow(static_cast<double>(w), v_count);
  if (dim_est > static_cast<double>(state_cap))
    throw std::runtime_error("state space " + std::to_string(w) + "^" +
                             std::to_string(v_count) + " exceeds the cap of " +
                             std::to_string(state_cap));

  GeneratorMatrix gen;
  gen.num_sites = v_count;
  gen.num_states = w;
  gen.dimension = 1;
  for (int i = 0; i < v_count; ++i) gen.dimension *= w;

  auto nbhd = ball_neighborhoods(g, rule.range());
  std::vector<uint64_t> stride(v_count);
  {
    uint64_t s = 1;
    for (int x = 0; x < v_count; ++x) {
      stride[x] = s;
      s *= w;
    }
  }

  gen.row_ptr.assign(gen.dimension + 1, 0);
  gen.diag.assign(gen.dimension, 0.0);
  std::vector<uint8_t> state(v_count);
  std::vector<int> counts(w);
  std::vector<double> site_rates(w);

  for (int pass = 0; pass < 2; ++pass) {
    uint64_t nnz = 0;
    for (uint64_t idx = 0; idx < gen.dimension; ++idx) {
      uint64_t rest = idx;
      for (int x = 0; x < v_count; ++x) {
        state[x] = static_cast<uint8_t>(rest % w);
        rest /= w;
      }
      double exit_rate = 0.0;
      for (int x = 0; x < v_count; ++x) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int y : nbhd[x]) ++counts[state[y]];
        rule.rates(state[x], counts, site_rates);
        for (int to = 0; to < w; ++to) {
          double rate = site_rates[to];
          if (rate == 0.0) continue;
          if (!(rate >= 0.0) || !std::isfinite(rate))
            throw std::runtime_error("rule produced a negative or non-finite rate");
          if (pass == 1) {
            int64_t delta = (static_cast<int64_t>(to) - state[x]) * static_cast<int64_t>(stride[x]);
            uint64_t target = static_cast<uint64_t>(static_cast<int64_t>(idx) + delta);
            gen.col[nnz] = static_cast<uint32_t>(target);
            gen.val[nnz] = rate;
          }
          ++nnz;
          exit_rate += rate;
        }
      }
      if (pass == 0) {
        gen.row_ptr[idx + 1] = nnz;
        gen.diag[idx] = -exit_rate;
        gen.uniformization_rate = std::max(gen.uniformization_rate, exit_rate);
      }
    }
    if (pass == 0) {
      gen.col.assign(gen.row_ptr[gen.dimension], 0);
      gen.val.assign(gen.row_ptr[gen.dimension], 0.0);
    }
  }
  return gen;
}

namespace detail {

// Poisson jump-count truncation: smallest K with P(N > K) < tol for N ~ Poisson(m).
inline int poisson_truncation(double m, double tol) {
  if (m <= 0) return 0;
  double log_term = -m;  // log pmf at 0
  double cum = std::exp(log_term);
  int k = 0;
  while (1.0 - cum >= tol) {
    ++k;
    log_term += std::log(m / k);
    cum += std::exp(log_term);
    if (k > 10'000'000) throw std::runtime_error("uniformization horizon too large");
  }
  return k;
}

// dist <- dist P  where P = I + Q/L (left action: probability flow).
inline void step_distribution(const GeneratorMatrix& gen, double L, std::vector<double>& dist,
                              std::vector<double>& scratch) {
  scratch.assign(dist.size(), 0.0);
  for (uint64_t i = 0; i < gen.dimension; ++i) {
    double mass = dist[i];
    if (mass == 0.0) continue;
    scratch[i] += mass * (1.0 + gen.diag[i] / L);
    for (uint64_t p = gen.row_ptr[i]; p < gen.row_ptr[i + 1]; ++p)
      scratch[gen.col[p]] += mass * (gen.val[p] / L);
  }
  dist.swap(scratch);
}

// f <- P f (right action: conditional expectation one uniformized step ahead).
inline void step_function(const GeneratorMatrix& gen, double L, std::vector<double>& f,
                          std::vector<double>& scratch) {
  scratch.resize(f.size());
  for (uint64_t i = 0; i < gen.dimension; ++i) {
    double acc = f[i] * (1.0 + gen.diag[i] / L);
    for (uint64_t p = gen.row_ptr[i]; p < gen.row_ptr[i + 1]; ++p)
      acc += (gen.val[p] / L) * f[gen.col[p]];
    scratch[i] = acc;
  }
  f.swap(scratch);
}

template <bool kDistribution>
std::vector<double> poisson_mixture(const GeneratorMatrix& gen, std::vector<double> vec, double t,
                                    double tol) {
  if (t < 0) throw std::invalid_argument("time must be >= 0");
  double L = gen.uniformization_rate;
  if (t == 0 || L == 0) return vec;
  double m = L * t;
  int horizon = poisson_truncation(m, tol);
  std::vector<double> result(vec.size(), 0.0);
  std::vector<double> scratch;
  double log_weight = -m;
  for (int n = 0; n <= horizon; ++n) {
    if (n > 0) {
      log_weight += std::log(m / n);
      if constexpr (kDistribution)
        step_distribution(gen, L, vec, scratch);
      else
        step_function(gen, L, vec, scratch);
    }
    double weight = std::exp(log_weight);
    for (size_t i = 0; i < vec.size(); ++i) result[i] += weight * vec[i];
  }
  return result;
}

}  // namespace detail

/// Distribution at time t started from the given distribution.
inline std::vector<double> transient_from(const GeneratorMatrix& gen, std::vector<double> dist,
                                          double t, double tol = 1e-10) {
  return detail::poisson_mixture<true>(gen, std::move(dist), t, tol);
}

/// Distribution at time t started from the point mass at eta0.
inline std::vector<double> transient(const GeneratorMatrix& gen, const std::vector<uint8_t>& eta0,
                                     double t, double tol = 1e-10) {
  std::vector<double> dist(gen.dimension, 0.0);
  dist[gen.encode(eta0)] = 1.0;
  return transient_from(gen, std::move(dist), t, tol);
}

/// S_t f as a vector over all initial states.
inline std::vector<double> semigroup_apply(const GeneratorMatrix& gen, std::vector<double> f,
                                           double t, double tol = 1e-10) {
  return detail::poisson_mixture<false>(gen, std::move(f), t, tol);
}

/// Memoized transient distributions from one initial configuration, plus
/// optionally the semigroup action S_t f on one tracked function.
class SemigroupCache {
 public:
  SemigroupCache(const GeneratorMatrix& gen, std::vector<uint8_t> eta0, double tol = 1e-10)
      : gen_(&gen), eta0_(std::move(eta0)), tol_(tol) {}

  void track_function(std::vector<double> f) {
    tracked_ = std::move(f);
    fn_cache_.clear();
  }

  const std::vector<double>& at(double t) {
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    auto dist = transient(*gen_, eta0_, t, tol_);
    double total = 0.0;
    for (double p : dist) {
      if (p < -1e-12) throw std::runtime_error("transient distribution went negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-10)
      throw std::runtime_error("transient distribution lost probability mass");
    return cache_.emplace(t, std::move(dist)).first->second;
  }

  const std::vector<double>& function_at(double t) {
    if (tracked_.empty()) throw std::logic_error("no function tracked");
    auto it = fn_cache_.find(t);
    if (it != fn_cache_.end()) return it->second;
    return fn_cache_.emplace(t, semigroup_apply(*gen_, tracked_, t, tol_)).first->second;
  }

 private:
  const GeneratorMatrix* gen_;
  std::vector<uint8_t> eta0_;
  double tol_;
  std::map<double, std::vector<double>> cache_;
  std::vector<double> tracked_;
  std::map<double, std::vector<double>> fn_cache_;
};

/// Indicator of one site holding one state, as a vector over W^V.
inline std::vector<double> site_indicator(const GeneratorMatrix& gen, int site, int state) {
  std::vector<double> f(gen.dimension, 0.0);
  uint64_t stride = 1;
  for (int x = 0; x < site; ++x) stride *= gen.num_states;
  for (uint64_t idx = 0; idx < gen.dimension; ++idx)
    if (static_cast<int>(idx / stride % gen.num_states) == state) f[idx] = 1.0;
  return f;
}

/// cov(f(eta_s), g(eta_t)) for 0 <= s <= t from the point mass at eta0,
/// via E[f(eta_s) g(eta_t)] = S_s(f . S_{t-s} g) evaluated at eta0.
inline double exact_two_time_cov(const GeneratorMatrix& gen, const std::vector<uint8_t>& eta0,
                                 const std::vector<double>& f, const std::vector<double>& g_fn,
                                 double s, double t, double tol = 1e-10) {
  if (s > t) throw std::invalid_argument("need s <= t");
  uint64_t start = gen.encode(eta0);
  auto sg = semigroup_apply(gen, g_fn, t - s, tol);
  std::vector<double> fg(gen.dimension);
  for (uint64_t i = 0; i < gen.dimension; ++i) fg[i] = f[i] * sg[i];
  double joint = semigroup_apply(gen, std::move(fg), s, tol)[start];
  double mean_f = semigroup_apply(gen, f, s, tol)[start];
  double mean_g = semigroup_apply(gen, g_fn, t, tol)[start];
  return joint - mean_f * mean_g;
}

struct CovBoundRow {
  int dist = 0;
  double s = 0, t = 0;
  double cov_abs = 0;     // sup over all initial configurations
  double bound = 0;       // rho-based
  double bound_eps = 0;   // amenable-case variant
  bool pass = false;
};

struct CovBoundReport {
  double beta = 0, rho = 0, eps = 0;
  double B = 0, M = 0, D = 0, C = 0;
  int indicator_state = 0;
  std::vector<CovBoundRow> rows;
  bool all_pass = true;
};

namespace detail {

inline double cov_bound_value(double B, double M, double rho, double beta, int k, double s,
                              double t, int dist) {
  double D = 2.0 * M * std::exp((beta + rho) * k);
  if (D == 0.0) return std::numeric_limits<double>::infinity();  // non-interacting limit
  double C = (2.0 * B * std::exp(beta * k) / D) *
             (1.0 + std::exp(rho * k) / (1.0 - std::exp(-(beta - rho))));
  return C * std::exp(D * (t + s)) * std::exp(-(beta - rho) * dist);
}

}  // namespace detail

/// Exponential covariance-decay check: for single-site indicators f at the
/// base vertex and g at distance d, the exact |cov(f(eta_s), g(eta_t))|
/// maximized over every initial configuration must stay below
/// C e^{D(t+s)} e^{-(beta-rho) d}. A second bound column replaces rho by a
/// small eps (the convention for subexponential growth); pass is judged on
/// the rho-based column.
inline CovBoundReport verify_cov_bound(const GeneratorMatrix& gen, const Graph& g,
                                       const LocalRule& rule, const std::vector<int>& distances,
                                       const std::vector<std::pair<double, double>>& times,
                                       double beta = 0, int indicator_state = -1,
                                       double eps = 0.1, double tol = 1e-10) {
  CovBoundReport report;
  report.rho = std::log(static_cast<double>(g.degree - 1));
  report.beta = beta == 0.0 ? report.rho + 1.0 : beta;
  report.eps = eps;
  if (report.beta <= report.rho)
    throw std::invalid_argument("beta must exceed rho = log(degree-1)");
  report.B = total_rate_bound(rule, g).value;
  report.M = influence_matrix(rule, g).M;
  const int k = std::max(rule.range(), 1);
  report.D = 2.0 * report.M * std::exp((report.beta + report.rho) * k);
  report.C = report.D == 0.0
                 ? std::numeric_limits<double>::infinity()
                 : (2.0 * report.B * std::exp(report.beta * k) / report.D) *
                       (1.0 + std::exp(report.rho * k) /
                                  (1.0 - std::exp(-(report.beta - report.rho))));
  report.indicator_state = indicator_state >= 0 ? indicator_state : rule.num_states() - 1;

  const int base = 0;
  auto dist_from_base = bfs_distances(g, base);
  auto f = site_indicator(gen, base, report.indicator_state);

  for (int d : distances) {
    int partner = -1;
    for (int v = 0; v < g.vertex_count(); ++v)
      if (dist_from_base[v] == d) {
        partner = v;
        break;
      }
    if (partner < 0) throw std::invalid_argument("no vertex at requested distance");
    auto g_fn = site_indicator(gen, partner, report.indicator_state);
    for (auto [s, t] : times) {
      if (s > t) std::swap(s, t);
      auto sg = semigroup_apply(gen, g_fn, t - s, tol);
      std::vector<double> fg(gen.dimension);
      for (uint64_t i = 0; i < gen.dimension; ++i) fg[i] = f[i] * sg[i];
      auto joint = semigroup_apply(gen, std::move(fg), s, tol);
      auto mean_f = semigroup_apply(gen, f, s, tol);
      auto mean_g = semigroup_apply(gen, g_fn, t, tol);
      double worst = 0.0;
      for (uint64_t i = 0; i < gen.dimension; ++i)
        worst = std::max(worst, std::abs(joint[i] - mean_f[i] * mean_g[i]));

      CovBoundRow row;
      row.dist = d;
      row.s = s;
      row.t = t;
      row.cov_abs = worst;
      row.bound = detail::cov_bound_value(report.B, report.M, report.rho, report.beta, k, s, t, d);
      row.bound_eps =
          detail::cov_bound_value(report.B, report.M, report.eps, report.beta, k, s, t, d);
      row.pass = row.cov_abs <= row.bound;
      report.all_pass = report.all_pass && row.pass;
      report.rows.push_back(row);
    }
  }
  return report;
}

struct SmoothnessRow {
  int site = 0;
  double lhs = 0;  // exact oscillation of S_t f at the site
  double rhs = 0;  // (exp(t Gamma) Delta_f)(site)
  bool pass = false;
};

struct SmoothnessReport {
  double t = 0;
  int f_site = 0, f_state = 0;
  std::vector<SmoothnessRow> rows;
  bool all_pass = true;
};

/// Oscillation-propagation check: Delta_{S_t f}(x), computed exactly by
/// maximizing |S_t f| differences over configuration pairs differing at x
/// only, must not exceed (exp(t Gamma) Delta_f)(x) within tolerance.
inline SmoothnessReport verify_smoothness_bound(const GeneratorMatrix& gen, const Graph& g,
                                                const LocalRule& rule, int f_site, int f_state,
                                                double t, double tol = 1e-10,
                                                double slack = 1e-8) {
  SmoothnessReport report;
  report.t = t;
  report.f_site = f_site;
  report.f_state = f_state;

  auto stf = semigroup_apply(gen, site_indicator(gen, f_site, f_state), t, tol);

  // exp(t Gamma) applied on the right to Delta_f = e_{f_site}
  auto inf = influence_matrix(rule, g);
  std::vector<double> rhs(g.vertex_count(), 0.0);
  rhs[f_site] = 1.0;
  std::vector<double> term = rhs;
  for (int n = 1; n <= 400; ++n) {
    term = inf.apply_transpose(term);
    double scale = t / n;
    double norm = 0.0;
    for (double& v : term) {
      v *= scale;
      norm += std::abs(v);
    }
    for (int x = 0; x < g.vertex_count(); ++x) rhs[x] += term[x];
    if (norm < 1e-16) break;
  }

  const int w = gen.num_states;
  for (int x = 0; x < g.vertex_count(); ++x) {
    uint64_t stride = 1;
    for (int i = 0; i < x; ++i) stride *= w;
    double osc = 0.0;
    for (uint64_t idx = 0; idx < gen.dimension; ++idx) {
      if (static_cast<int>(idx / stride % w) != 0) continue;  // enumerate pairs once
      for (int s1 = 0; s1 < w; ++s1)
        for (int s2 = s1 + 1; s2 < w; ++s2) {
          double diff = std::abs(stf[idx + static_cast<uint64_t>(s1) * stride] -
                                 stf[idx + static_cast<uint64_t>(s2) * stride]);
          osc = std::max(osc, diff);
        }
    }
    SmoothnessRow row;
    row.site = x;
    row.lhs = osc;
    row.rhs = rhs[x];
    row.pass = row.lhs <= row.rhs + slack;
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace ipsim
