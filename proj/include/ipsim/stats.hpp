#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsim/prng.hpp"
#include "ipsim/simulate.hpp"

// Estimators and normality tests for the empirical process. All estimators
// are plain cross-replica moments (associative merges of sums and
// cross-products). Normality is tested with the Kolmogorov-Smirnov statistic
// under estimated mean and variance, against critical values calibrated by
// Monte Carlo on synthetic normal samples (the composite-hypothesis
// adjustment); the Anderson-Darling score is reported alongside.

namespace ipsim {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

/// Inverse standard normal CDF (Acklam's rational approximation, |rel err| < 1.2e-9).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile needs p in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  return x;
}

namespace detail {

inline double sample_mean(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(xs.size() - 1);
}

inline double sample_covariance(const std::vector<double>& xs, const std::vector<double>& ys,
                                double mx, double my) {
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) acc += (xs[i] - mx) * (ys[i] - my);
  return acc / static_cast<double>(xs.size() - 1);
}

}  // namespace detail

/// Kolmogorov-Smirnov distance of the studentized sample against the
/// standard normal (mean and variance estimated from the sample).
inline double lilliefors_ks_statistic(std::vector<double> xs) {
  const size_t n = xs.size();
  if (n < 4) throw std::invalid_argument("need at least 4 samples");
  double mean = detail::sample_mean(xs);
  double sd = std::sqrt(detail::sample_variance(xs, mean));
  if (!(sd > 0)) throw std::invalid_argument("degenerate sample");
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double p = normal_cdf((xs[i] - mean) / sd);
    double hi = static_cast<double>(i + 1) / n - p;
    double lo = p - static_cast<double>(i) / n;
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

/// Anderson-Darling A^2* with estimated parameters (small-sample adjusted).
inline double anderson_darling_statistic(std::vector<double> xs) {
  const size_t n = xs.size();
  if (n < 4) throw std::invalid_argument("need at least 4 samples");
  double mean = detail::sample_mean(xs);
  double sd = std::sqrt(detail::sample_variance(xs, mean));
  if (!(sd > 0)) throw std::invalid_argument("degenerate sample");
  std::sort(xs.begin(), xs.end());
  double a2 = -static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    double p_lo = std::clamp(normal_cdf((xs[i] - mean) / sd), 1e-300, 1.0 - 1e-15);
    double p_hi = std::clamp(normal_cdf((xs[n - 1 - i] - mean) / sd), 1e-300, 1.0 - 1e-15);
    a2 -= (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n) *
          (std::log(p_lo) + std::log1p(-p_hi));
  }
  return a2 * (1.0 + 0.75 / static_cast<double>(n) + 2.25 / static_cast<double>(n * n));
}

/// Critical KS value for the composite normality test, Monte Carlo
/// calibrated (5000 synthetic normal samples of size n) on a fixed internal
/// stream so the value is a deterministic constant of the build.
inline double lilliefors_critical(int n, double alpha, int calibration_samples = 5000) {
  if (n < 4) throw std::invalid_argument("need at least 4 samples");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha in (0,1) required");

  static std::map<std::pair<int, double>, double> cache;
  static std::mutex cache_mutex;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find({n, alpha});
    if (it != cache.end()) return it->second;
  }

  std::vector<double> stats(calibration_samples);
  std::vector<double> xs(n);
  for (int rep = 0; rep < calibration_samples; ++rep) {
    RandomStream rng(0x4c494c4cU, static_cast<uint64_t>(rep) << 24 | static_cast<uint64_t>(n));
    for (int i = 0; i < n; ++i) xs[i] = rng.normal();
    stats[rep] = lilliefors_ks_statistic(xs);
  }
  std::sort(stats.begin(), stats.end());
  double pos = (1.0 - alpha) * (calibration_samples - 1);
  size_t lo = static_cast<size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  double crit = stats[lo] + (lo + 1 < stats.size() ? frac * (stats[lo + 1] - stats[lo]) : 0.0);

  std::lock_guard<std::mutex> lock(cache_mutex);
  cache[{n, alpha}] = crit;
  return crit;
}

struct GammaEntry {
  double s = 0, t = 0;
  int w = 0, wp = 0;
  double cov = 0, se = 0;
};

struct MomentEstimates {
  std::vector<double> grid;
  std::vector<double> m, se_m;  // mean per-site degradation
  std::vector<double> v, se_v;  // region-normalized variance of the degradation sum
  std::vector<GammaEntry> gamma;
  int region_size = 0;
  int replicas = 0;
};

/// Cross-replica moment estimators. score maps states to degradation levels;
/// gamma_times (a subset of the grid) selects where the count covariance
/// function is estimated.
inline MomentEstimates estimate_moments(const std::vector<EmpiricalSeries>& series,
                                        const std::vector<double>& score,
                                        const std::vector<double>& gamma_times = {}) {
  if (series.size() < 2) throw std::invalid_argument("variance estimation needs >= 2 replicas");
  const auto& grid = series.front().grid;
  const int n = static_cast<int>(series.size());
  const int region_size = series.front().region_size;
  if (region_size < 1) throw std::invalid_argument("empty observation region");
  const int w_count = static_cast<int>(series.front().counts.empty()
                                           ? score.size()
                                           : series.front().counts.front().size());
  for (const auto& s : series)
    if (s.grid != grid || s.region_size != region_size ||
        (!s.counts.empty() && static_cast<int>(s.counts.front().size()) != w_count))
      throw std::invalid_argument("replica series are not aligned");

  MomentEstimates est;
  est.grid = grid;
  est.region_size = region_size;
  est.replicas = n;

  std::vector<double> d_vals(n);
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    for (int r = 0; r < n; ++r) {
      double d = 0.0;
      for (int w = 0; w < w_count; ++w)
        d += score[w] * static_cast<double>(series[r].counts[gi][w]);
      d_vals[r] = d;
    }
    double mean = detail::sample_mean(d_vals);
    double var = detail::sample_variance(d_vals, mean);
    est.m.push_back(mean / region_size);
    est.se_m.push_back(std::sqrt(var / n) / region_size);
    est.v.push_back(var / region_size);
    est.se_v.push_back(var / region_size * std::sqrt(2.0 / (n - 1)));
  }

  auto grid_index = [&](double t) {
    for (size_t gi = 0; gi < grid.size(); ++gi)
      if (grid[gi] == t) return gi;
    throw std::invalid_argument("covariance time not on the grid");
  };
  std::vector<double> a_vals(n), b_vals(n);
  for (double s : gamma_times) {
    size_t si = grid_index(s);
    for (double t : gamma_times) {
      if (t < s) continue;
      size_t ti = grid_index(t);
      for (int w = 0; w < w_count; ++w) {
        for (int wp = 0; wp < w_count; ++wp) {
          for (int r = 0; r < n; ++r) {
            a_vals[r] = static_cast<double>(series[r].counts[si][w]);
            b_vals[r] = static_cast<double>(series[r].counts[ti][wp]);
          }
          double ma = detail::sample_mean(a_vals);
          double mb = detail::sample_mean(b_vals);
          double cov = detail::sample_covariance(a_vals, b_vals, ma, mb);
          double va = detail::sample_variance(a_vals, ma);
          double vb = detail::sample_variance(b_vals, mb);
          GammaEntry entry;
          entry.s = s;
          entry.t = t;
          entry.w = w;
          entry.wp = wp;
          entry.cov = cov / region_size;
          entry.se = std::sqrt(std::max(0.0, va * vb + cov * cov) / (n - 1)) / region_size;
          est.gamma.push_back(entry);
        }
      }
    }
  }
  return est;
}

enum class CellStatus { pass, fail, degenerate };

struct CltCell {
  double t = 0;
  int w = 0;
  double ks = 0, ad = 0, crit = 0;
  CellStatus status = CellStatus::degenerate;
  std::vector<std::pair<double, double>> qq;  // (theoretical, empirical) of the studentized counts
};

struct CltReport {
  double significance = 0.01;
  std::vector<CltCell> cells;
  bool all_pass = true;  // over non-degenerate cells
};

/// Finite-dimensional normality check of the normalized counts
/// (N_t(w) - mean)/sqrt(|R|) across replicas, one cell per (time, state).
/// Cells with degenerate variance are flagged, not failed.
inline CltReport clt_check(const std::vector<EmpiricalSeries>& series,
                           const std::vector<double>& times, const std::vector<int>& states,
                           double significance = 0.01) {
  if (series.size() < 8) throw std::invalid_argument("normality check needs more replicas");
  const auto& grid = series.front().grid;
  const int n = static_cast<int>(series.size());
  const double root_r = std::sqrt(static_cast<double>(series.front().region_size));

  CltReport report;
  report.significance = significance;
  double crit = lilliefors_critical(n, significance);

  for (double t : times) {
    size_t gi = grid.size();
    for (size_t i = 0; i < grid.size(); ++i)
      if (grid[i] == t) gi = i;
    if (gi == grid.size()) throw std::invalid_argument("tested time not on the grid");
    for (int w : states) {
      CltCell cell;
      cell.t = t;
      cell.w = w;
      cell.crit = crit;
      std::vector<double> xs(n);
      for (int r = 0; r < n; ++r)
        xs[r] = static_cast<double>(series[r].counts[gi][w]) / root_r;
      double mean = detail::sample_mean(xs);
      double sd = std::sqrt(detail::sample_variance(xs, mean));
      if (!(sd > 0)) {
        cell.status = CellStatus::degenerate;
        report.cells.push_back(std::move(cell));
        continue;
      }
      cell.ks = lilliefors_ks_statistic(xs);
      cell.ad = anderson_darling_statistic(xs);
      cell.status = cell.ks <= crit ? CellStatus::pass : CellStatus::fail;
      if (cell.status == CellStatus::fail) report.all_pass = false;
      std::vector<double> sorted(xs);
      std::sort(sorted.begin(), sorted.end());
      cell.qq.reserve(n);
      for (int i = 0; i < n; ++i)
        cell.qq.emplace_back(normal_quantile((i + 0.5) / n), (sorted[i] - mean) / sd);
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

struct VarianceRatioRow {
  std::string label;
  int region_size = 0;
  double ratio = 0, se_ratio = 0;          // Var(Z)/|B|
  double partial_sum = 0, se_partial = 0;  // sum of Cov(Y_0, Y_z) over the ell-ball
  double gap = 0, se_gap = 0;
  double boundary_frac = 0;
};

struct VarianceRatioReport {
  double t = 0;
  int ell = 0;
  int replicas = 0;
  std::vector<VarianceRatioRow> rows;
  bool slc_audit_pass = true;  // boundary fraction strictly decreasing
};

/// Variance-summation diagnostic: Var(sum of site scores over B)/|B| against
/// the covariance sum at a base vertex, truncated at distance ell, across a
/// ladder of nested regions. The base vertex is 0 and must belong to every
/// region.
inline VarianceRatioReport variance_ratio_scan(const Graph& g, const LocalRule& rule,
                                               const std::vector<uint8_t>& eta0,
                                               const std::vector<Region>& ladder, double t,
                                               int n_replicas, uint64_t seed,
                                               const std::vector<double>& score, int ell,
                                               int threads = 0) {
  if (n_replicas < 2) throw std::invalid_argument("variance scan needs >= 2 replicas");
  if (ladder.empty()) throw std::invalid_argument("empty region ladder");
  for (const auto& region : ladder)
    if (!std::binary_search(region.members.begin(), region.members.end(), 0))
      throw std::invalid_argument("every ladder region must contain the base vertex 0");

  // per-replica configuration snapshots at time t
  std::vector<std::vector<uint8_t>> snaps(n_replicas);
  int n_workers = std::min(resolve_threads(threads), n_replicas);
  auto worker = [&](int worker_id) {
    for (int i = worker_id; i < n_replicas; i += n_workers) {
      EventLog log = gillespie(g, rule, eta0, t, seed, static_cast<uint64_t>(i));
      snaps[i] = state_at(log, t);
    }
  };
  if (n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  auto ball0 = ball(g, 0, ell);
  std::vector<double> y0(n_replicas), zball(n_replicas);
  for (int r = 0; r < n_replicas; ++r) {
    y0[r] = score[snaps[r][0]];
    double acc = 0.0;
    for (int z : ball0) acc += score[snaps[r][z]];
    zball[r] = acc;
  }
  double my = detail::sample_mean(y0);
  double mz = detail::sample_mean(zball);
  double partial = detail::sample_covariance(y0, zball, my, mz);
  double se_partial = std::sqrt(
      std::max(0.0, detail::sample_variance(y0, my) * detail::sample_variance(zball, mz) +
                        partial * partial) /
      (n_replicas - 1));

  VarianceRatioReport report;
  report.t = t;
  report.ell = ell;
  report.replicas = n_replicas;
  double prev_boundary_frac = 2.0;
  std::vector<double> zr(n_replicas);
  for (const auto& region : ladder) {
    for (int r = 0; r < n_replicas; ++r) {
      double acc = 0.0;
      for (int x : region.members) acc += score[snaps[r][x]];
      zr[r] = acc;
    }
    double mean = detail::sample_mean(zr);
    double var = detail::sample_variance(zr, mean);
    VarianceRatioRow row;
    row.label = region.label;
    row.region_size = static_cast<int>(region.members.size());
    row.ratio = var / row.region_size;
    row.se_ratio = row.ratio * std::sqrt(2.0 / (n_replicas - 1));
    row.partial_sum = partial;
    row.se_partial = se_partial;
    row.gap = std::abs(row.ratio - row.partial_sum);
    row.se_gap = std::sqrt(row.se_ratio * row.se_ratio + se_partial * se_partial);
    row.boundary_frac = static_cast<double>(region_boundary(g, region).size()) /
                        static_cast<double>(row.region_size);
    if (row.boundary_frac >= prev_boundary_frac) report.slc_audit_pass = false;
    prev_boundary_frac = row.boundary_frac;
    report.rows.push_back(std::move(row));
  }
  return report;
}

struct HittingReport {
  std::vector<std::optional<double>> hit_times;  // per replica; nullopt = censored
  int censored = 0;
  int replicas = 0;
  int region_size = 0;
  double threshold = 0;
  double t_alpha = 0;
  double m_prime = 0;
  double bandwidth = 0;
  double v_at_t_alpha = 0;
  double sigma2 = 0;
  double ks = 0, crit = 0;
  bool ks_pass = false;
  bool degenerate = false;  // threshold already reached at time 0
  std::string notes;
};

/// Hitting-time analysis from exact per-replica crossing times plus the
/// moment curves: t_alpha by monotone interpolation of the mean degradation,
/// its derivative by central difference at the reported bandwidth, and the
/// standardized times sqrt(|B|)(T - t_alpha)/sigma against the normal.
inline HittingReport hitting_analysis(std::vector<std::optional<double>> hit_times,
                                      const MomentEstimates& moments, double alpha,
                                      double threshold, double significance = 0.01,
                                      double bandwidth_c = 0.5) {
  const int n = static_cast<int>(hit_times.size());
  if (n < 8) throw std::invalid_argument("hitting analysis needs more replicas");
  HittingReport report;
  report.hit_times = std::move(hit_times);
  report.replicas = n;
  report.region_size = moments.region_size;
  report.threshold = threshold;

  for (const auto& t : report.hit_times)
    if (!t) ++report.censored;
  if (report.censored > 0.01 * n)
    throw std::runtime_error(std::to_string(report.censored) + " of " + std::to_string(n) +
                             " replicas never crossed the threshold; increase t_end");

  std::vector<double> times;
  for (const auto& t : report.hit_times)
    if (t) times.push_back(*t);
  double mean_t = detail::sample_mean(times);
  double sd_t = std::sqrt(detail::sample_variance(times, mean_t));
  if (!(sd_t > 0)) {
    report.degenerate = true;
    report.notes = "degenerate: threshold reached immediately by every replica";
    return report;
  }

  const auto& grid = moments.grid;
  const auto& m = moments.m;
  double t_end = grid.back();
  if (!(m.front() < alpha && alpha < m.back()))
    throw std::invalid_argument("alpha outside the observed mean degradation range");

  size_t ci = 0;
  while (ci + 1 < grid.size() && !(m[ci] <= alpha && alpha <= m[ci + 1] && m[ci + 1] > m[ci]))
    ++ci;
  if (ci + 1 >= grid.size())
    throw std::runtime_error("mean degradation never crosses alpha on the grid");
  report.t_alpha =
      grid[ci] + (alpha - m[ci]) / (m[ci + 1] - m[ci]) * (grid[ci + 1] - grid[ci]);

  auto interp = [&](const std::vector<double>& ys, double t) {
    if (t <= grid.front()) return ys.front();
    if (t >= grid.back()) return ys.back();
    size_t i = 0;
    while (grid[i + 1] < t) ++i;
    double frac = (t - grid[i]) / (grid[i + 1] - grid[i]);
    return ys[i] + frac * (ys[i + 1] - ys[i]);
  };

  double h = bandwidth_c * t_end * std::pow(static_cast<double>(n), -0.2);
  h = std::min({h, report.t_alpha - grid.front(), grid.back() - report.t_alpha});
  if (!(h > 0))
    throw std::runtime_error("alpha crossing sits on the grid edge; widen the grid");
  report.bandwidth = h;

  double m_lo = interp(m, report.t_alpha - h);
  double m_mid = interp(m, report.t_alpha);
  double m_hi = interp(m, report.t_alpha + h);
  if (!(m_lo < m_mid && m_mid < m_hi))
    throw std::runtime_error("mean degradation is not strictly increasing near the crossing");
  report.m_prime = (m_hi - m_lo) / (2.0 * h);
  report.v_at_t_alpha = interp(moments.v, report.t_alpha);
  report.sigma2 = report.v_at_t_alpha / (report.m_prime * report.m_prime);

  double sigma = std::sqrt(report.sigma2);
  double root_r = std::sqrt(static_cast<double>(moments.region_size));
  std::vector<double> standardized;
  standardized.reserve(times.size());
  for (double t : times) standardized.push_back(root_r * (t - report.t_alpha) / sigma);
  report.ks = lilliefors_ks_statistic(standardized);
  report.crit = lilliefors_critical(static_cast<int>(standardized.size()), significance);
  report.ks_pass = report.ks <= report.crit;
  if (report.censored > 0)
    report.notes = std::to_string(report.censored) + " censored replicas excluded";
  return report;
}

struct HittingSetup {
  std::vector<double> score;  // indicator of the failed state
  double threshold = 0;
};

/// k-out-of-n wiring: binary alphabet, score = failed-state indicator,
/// threshold = ceil(alpha |B_n|).
inline HittingSetup kout_of_n(int region_size, double alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in [0,1]");
  HittingSetup setup;
  setup.score = {0.0, 1.0};
  setup.threshold = std::ceil(alpha * region_size);
  return setup;
}

}  // namespace ipsim
