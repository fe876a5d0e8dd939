#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsim/graph.hpp"
#include "ipsim/prng.hpp"

// Single-site transition-rate families over a finite ordered alphabet.
// A rule sees only the multiset of states within its range, expressed as a
// count vector, so it is invariant under any automorphism of the graph by
// construction. Only single-site updates exist: one jump changes one site.

namespace ipsim {

struct StateAlphabet {
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(labels.size()); }

  int index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (labels[i] == label) return i;
    return -1;
  }

  static StateAlphabet binary() { return {{"0", "1"}}; }

  static StateAlphabet numeric(int n) {
    StateAlphabet a;
    for (int i = 0; i < n; ++i) a.labels.push_back(std::to_string(i));
    return a;
  }
};

enum class RuleKind { independent_flip, contact, degradation_ladder, custom };

/// A local rule: rates(own, neighbor_counts, out) fills out[w'] with the rate
/// of jumping to state w' (out[own] is always 0). neighbor_counts[w] is the
/// number of sites in state w within distance `range` of the updating site.
class LocalRule {
 public:
  using Kernel =
      std::function<void(int own, std::span<const int> counts, std::span<double> out)>;

  static LocalRule independent_flip(StateAlphabet alphabet, double up_rate,
                                    double down_rate = 0.0) {
    check_rate(up_rate, "up rate");
    check_rate(down_rate, "down rate");
    LocalRule r(std::move(alphabet), 0, RuleKind::independent_flip, "independent-flip");
    r.lambda_ = up_rate;
    r.delta_ = down_rate;
    return r;
  }

  /// Contact process: a healthy site gets infected at lambda per infected
  /// neighbor, an infected site recovers at delta.
  static LocalRule contact(double lambda, double delta,
                           StateAlphabet alphabet = StateAlphabet{{"healthy", "infected"}}) {
    check_rate(lambda, "lambda");
    check_rate(delta, "delta");
    if (alphabet.size() != 2) throw std::invalid_argument("contact needs a binary alphabet");
    LocalRule r(std::move(alphabet), 1, RuleKind::contact, "contact");
    r.lambda_ = lambda;
    r.delta_ = delta;
    return r;
  }

  /// Upward ladder: state i jumps to i+1 at a[i] + b[i] * (mean neighbor
  /// state index). No downward jumps.
  static LocalRule degradation_ladder(StateAlphabet alphabet, std::vector<double> a,
                                      std::vector<double> b) {
    int w = alphabet.size();
    if (static_cast<int>(a.size()) != w - 1 || static_cast<int>(b.size()) != w - 1)
      throw std::invalid_argument("ladder: a and b need one rate per upward transition");
    for (double v : a) check_rate(v, "a");
    for (double v : b) check_rate(v, "b");
    LocalRule r(std::move(alphabet), 1, RuleKind::degradation_ladder, "degradation-ladder");
    r.a_ = std::move(a);
    r.b_ = std::move(b);
    return r;
  }

  static LocalRule custom(StateAlphabet alphabet, int range, Kernel kernel, std::string name) {
    if (range < 0) throw std::invalid_argument("rule range must be >= 0");
    LocalRule r(std::move(alphabet), range, RuleKind::custom, std::move(name));
    r.kernel_ = std::move(kernel);
    return r;
  }

  void rates(int own, std::span<const int> counts, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int w = alphabet_.size();
    switch (kind_) {
      case RuleKind::independent_flip:
        if (own + 1 < w) out[own + 1] = lambda_;
        if (own > 0) out[own - 1] = delta_;
        break;
      case RuleKind::contact:
        if (own == 0)
          out[1] = lambda_ * counts[1];
        else
          out[0] = delta_;
        break;
      case RuleKind::degradation_ladder: {
        if (own + 1 < w) {
          long long m = 0, weighted = 0;
          for (int s = 0; s < w; ++s) {
            m += counts[s];
            weighted += static_cast<long long>(s) * counts[s];
          }
          double mean = m > 0 ? static_cast<double>(weighted) / static_cast<double>(m) : 0.0;
          out[own + 1] = a_[own] + b_[own] * mean;
        }
        break;
      }
      case RuleKind::custom:
        kernel_(own, counts, out);
        out[own] = 0.0;
        break;
    }
  }

  double total_rate(int own, std::span<const int> counts) const {
    std::vector<double> out(alphabet_.size());
    rates(own, counts, out);
    return std::accumulate(out.begin(), out.end(), 0.0);
  }

  const StateAlphabet& alphabet() const { return alphabet_; }
  int num_states() const { return alphabet_.size(); }
  int range() const { return range_; }
  RuleKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double lambda() const { return lambda_; }
  double delta() const { return delta_; }
  const std::vector<double>& ladder_a() const { return a_; }
  const std::vector<double>& ladder_b() const { return b_; }

 private:
  LocalRule(StateAlphabet alphabet, int range, RuleKind kind, std::string name)
      : alphabet_(std::move(alphabet)), range_(range), kind_(kind), name_(std::move(name)) {
    if (alphabet_.size() < 2) throw std::invalid_argument("alphabet needs at least 2 states");
  }

  static void check_rate(double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("rate must be finite and >= 0: ") + what);
  }

  StateAlphabet alphabet_;
  int range_ = 1;
  RuleKind kind_ = RuleKind::custom;
  std::string name_;
  double lambda_ = 0, delta_ = 0;
  std::vector<double> a_, b_;
  Kernel kernel_;
};

namespace detail {

// Number of count vectors of total m over w states: C(m+w-1, w-1).
inline double multiset_count(int m, int w) {
  double c = 1.0;
  for (int i = 1; i <= w - 1; ++i) c *= static_cast<double>(m + i) / i;
  return c;
}

// Visit every count vector with the given total.
template <typename F>
void for_each_count_vector(int total, int num_states, F&& visit) {
  std::vector<int> counts(num_states, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == num_states - 1) {
      counts[pos] = remaining;
      visit(std::span<const int>(counts));
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  rec(rec, 0, total);
}

// Distinct neighborhood sizes realized in the graph at the rule's range.
inline std::vector<int> realized_neighborhood_sizes(const LocalRule& rule, const Graph& g) {
  if (rule.range() == 0) return {0};
  auto nbhd = ball_neighborhoods(g, rule.range());
  std::vector<int> sizes;
  for (const auto& list : nbhd) sizes.push_back(static_cast<int>(list.size()));
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

// First-order dominance of neighborhood multisets with equal size:
// p <= q iff p has at least as many sites at or below every level.
inline bool multiset_dominated(std::span<const int> p, std::span<const int> q) {
  int cum_p = 0, cum_q = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    cum_p += p[i];
    cum_q += q[i];
    if (cum_p < cum_q) return false;
  }
  return true;
}

}  // namespace detail

struct RateBound {
  double value = 0;
  bool exact = true;  // false: sampled lower bound (pattern space over cap)
};

inline constexpr uint64_t kDefaultPatternCap = 1'000'000;

/// Max total outflow rate at one site (the uniform rate bound B), by exact
/// enumeration of neighborhood count vectors, or by sampling beyond the cap.
inline RateBound total_rate_bound(const LocalRule& rule, const Graph& g,
                                  uint64_t pattern_cap = kDefaultPatternCap,
                                  uint64_t samples = 200'000) {
  const int w = rule.num_states();
  RateBound bound;
  for (int m : detail::realized_neighborhood_sizes(rule, g)) {
    if (detail::multiset_count(m, w) <= static_cast<double>(pattern_cap)) {
      detail::for_each_count_vector(m, w, [&](std::span<const int> counts) {
        for (int own = 0; own < w; ++own)
          bound.value = std::max(bound.value, rule.total_rate(own, counts));
      });
    } else {
      if (samples == 0) throw std::runtime_error("pattern space exceeds cap and sampling is off");
      bound.exact = false;
      RandomStream rng(0x9a7eb0u, static_cast<uint64_t>(m));
      std::vector<int> counts(w);
      for (uint64_t i = 0; i < samples; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int j = 0; j < m; ++j) ++counts[static_cast<int>(rng.next_u64() % w)];
        for (int own = 0; own < w; ++own)
          bound.value = std::max(bound.value, rule.total_rate(own, counts));
      }
    }
  }
  return bound;
}

/// Sparse influence matrix: gamma(x,y) is the largest total-variation change
/// of x's rate measure caused by moving one neighborhood site's state, and
/// vanishes beyond the rule's range. M = sup_x sum_y gamma(x,y).
struct InfluenceMatrix {
  std::vector<std::vector<int>> neighborhoods;  // per-vertex, within range
  std::vector<double> row_value;                // gamma(x,y) for y in neighborhoods[x]
  double M = 0;
  bool exact = true;

  int size() const { return static_cast<int>(neighborhoods.size()); }

  double gamma(int x, int y) const {
    const auto& nb = neighborhoods[x];
    return std::binary_search(nb.begin(), nb.end(), y) ? row_value[x] : 0.0;
  }

  /// v(y) = sum_x u(x) gamma(x,y)  (the matrix acting on the right).
  std::vector<double> apply_transpose(const std::vector<double>& u) const {
    std::vector<double> v(u.size(), 0.0);
    for (int x = 0; x < size(); ++x) {
      if (u[x] == 0.0) continue;
      for (int y : neighborhoods[x]) v[y] += u[x] * row_value[x];
    }
    return v;
  }
};

inline InfluenceMatrix influence_matrix(const LocalRule& rule, const Graph& g,
                                        uint64_t pattern_cap = kDefaultPatternCap,
                                        uint64_t samples = 50'000) {
  const int w = rule.num_states();
  InfluenceMatrix inf;
  inf.neighborhoods = ball_neighborhoods(g, rule.range());
  inf.row_value.assign(g.vertex_count(), 0.0);

  // gamma depends on the site only through its neighborhood size. The
  // rate-measure distance is the full absolute-difference mass (the
  // convention under which the oscillation bound Delta_{S_t f} <= exp(t
  // Gamma) Delta_f is tight at first order; halving it breaks the bound).
  std::vector<double> rates_a(w), rates_b(w);
  auto tv_after_move = [&](int own, std::span<const int> counts, std::vector<int>& moved) {
    double best = 0.0;
    rule.rates(own, counts, rates_a);
    for (int s = 0; s < w; ++s) {
      if (counts[s] == 0) continue;
      for (int s2 = 0; s2 < w; ++s2) {
        if (s2 == s) continue;
        moved.assign(counts.begin(), counts.end());
        --moved[s];
        ++moved[s2];
        rule.rates(own, moved, rates_b);
        double tv = 0.0;
        for (int t = 0; t < w; ++t) tv += std::abs(rates_a[t] - rates_b[t]);
        best = std::max(best, tv);
      }
    }
    return best;
  };

  std::map<int, double> gamma_by_size;
  for (int m : detail::realized_neighborhood_sizes(rule, g)) {
    double gamma = 0.0;
    std::vector<int> moved(w);
    if (m > 0) {
      if (detail::multiset_count(m, w) <= static_cast<double>(pattern_cap)) {
        detail::for_each_count_vector(m, w, [&](std::span<const int> counts) {
          for (int own = 0; own < w; ++own) gamma = std::max(gamma, tv_after_move(own, counts, moved));
        });
      } else {
        if (samples == 0) throw std::runtime_error("pattern space exceeds cap and sampling is off");
        inf.exact = false;
        RandomStream rng(0x1f1eUL, static_cast<uint64_t>(m));
        std::vector<int> counts(w);
        for (uint64_t i = 0; i < samples; ++i) {
          std::fill(counts.begin(), counts.end(), 0);
          for (int j = 0; j < m; ++j) ++counts[static_cast<int>(rng.next_u64() % w)];
          for (int own = 0; own < w; ++own) gamma = std::max(gamma, tv_after_move(own, counts, moved));
        }
      }
    }
    gamma_by_size[m] = gamma;
  }

  for (int x = 0; x < g.vertex_count(); ++x) {
    int m = static_cast<int>(inf.neighborhoods[x].size());
    inf.row_value[x] = gamma_by_size[m];
    inf.M = std::max(inf.M, inf.row_value[x] * m);
  }
  return inf;
}

struct MonotonicityCertificate {
  bool pass = false;
  std::string violation;  // empty when pass
};

/// Sufficient condition for the dynamics to preserve stochastic order, checked
/// over every dominance-ordered pair of (own state, neighborhood multiset) up
/// to max_neighbors sites, and every threshold level u:
///   - both own states at or below u: the total rate into {> u} must not
///     decrease when state and neighborhood grow;
///   - both own states above u: the total rate into {<= u} must not increase.
/// This is exactly what makes the shared-uniform coupling order-preserving.
inline MonotonicityCertificate monotonicity_certificate(const LocalRule& rule, int max_neighbors,
                                                        uint64_t pattern_cap = kDefaultPatternCap) {
  const int w = rule.num_states();
  MonotonicityCertificate cert;

  auto describe = [&](int w1, std::span<const int> p1, int w2, std::span<const int> p2, int u) {
    auto fmt = [&](int own, std::span<const int> p) {
      std::string s = "(own=" + rule.alphabet().labels[own] + ", counts=[";
      for (int i = 0; i < w; ++i) s += (i ? "," : "") + std::to_string(p[i]);
      return s + "])";
    };
    return "threshold " + rule.alphabet().labels[u] + ": " + fmt(w1, p1) + " vs " + fmt(w2, p2);
  };

  std::vector<double> r1(w), r2(w);
  for (int m = 0; m <= max_neighbors; ++m) {
    double n_patterns = detail::multiset_count(m, w);
    if (n_patterns * n_patterns > static_cast<double>(pattern_cap))
      throw std::runtime_error("monotonicity certificate: pattern space exceeds cap");
    std::vector<std::vector<int>> patterns;
    detail::for_each_count_vector(m, w, [&](std::span<const int> counts) {
      patterns.emplace_back(counts.begin(), counts.end());
    });
    for (const auto& p1 : patterns) {
      for (const auto& p2 : patterns) {
        if (!detail::multiset_dominated(p1, p2)) continue;
        for (int w1 = 0; w1 < w; ++w1) {
          rule.rates(w1, p1, r1);
          for (int w2 = w1; w2 < w; ++w2) {
            rule.rates(w2, p2, r2);
            for (int u = 0; u < w; ++u) {
              if (w2 <= u) {
                double up1 = 0, up2 = 0;
                for (int t = u + 1; t < w; ++t) {
                  up1 += r1[t];
                  up2 += r2[t];
                }
                if (up1 > up2 + 1e-12) {
                  cert.violation = "upward rate past " + describe(w1, p1, w2, p2, u);
                  return cert;
                }
              }
              if (w1 > u) {
                double down1 = 0, down2 = 0;
                for (int t = 0; t <= u; ++t) {
                  down1 += r1[t];
                  down2 += r2[t];
                }
                if (down1 + 1e-12 < down2) {
                  cert.violation = "downward rate below " + describe(w1, p1, w2, p2, u);
                  return cert;
                }
              }
            }
          }
        }
      }
    }
  }
  cert.pass = true;
  return cert;
}

struct PositiveCorrelationsCertificate {
  bool pass = false;
  std::string reason;
};

/// Single-site dynamics change one coordinate per jump, which makes the
/// product-rule inequality for monotone f, g automatic; what remains to
/// verify is monotonicity itself.
inline PositiveCorrelationsCertificate positive_correlations_certificate(
    const LocalRule& rule, int max_neighbors, uint64_t pattern_cap = kDefaultPatternCap) {
  PositiveCorrelationsCertificate cert;
  auto mono = monotonicity_certificate(rule, max_neighbors, pattern_cap);
  if (!mono.pass) {
    cert.reason = "not monotone: " + mono.violation;
    return cert;
  }
  cert.pass = true;
  cert.reason = "single-site updates and monotone rates";
  return cert;
}

/// Uniformization constant for the order-preserving coupling: the largest
/// upward plus the largest downward outflow over all states and patterns.
/// (The plain max total rate is not enough: in the coupled chain the lower
/// copy's upward mass and the upper copy's downward mass must fit together
/// under one clock.)
inline RateBound coupling_rate_bound(const LocalRule& rule, const Graph& g,
                                     uint64_t pattern_cap = kDefaultPatternCap,
                                     uint64_t samples = 200'000) {
  const int w = rule.num_states();
  double max_up = 0, max_down = 0;
  bool exact = true;
  std::vector<double> r(w);
  auto consider = [&](int own, std::span<const int> counts) {
    rule.rates(own, counts, r);
    double up = 0, down = 0;
    for (int t = own + 1; t < w; ++t) up += r[t];
    for (int t = 0; t < own; ++t) down += r[t];
    max_up = std::max(max_up, up);
    max_down = std::max(max_down, down);
  };
  for (int m : detail::realized_neighborhood_sizes(rule, g)) {
    if (detail::multiset_count(m, w) <= static_cast<double>(pattern_cap)) {
      detail::for_each_count_vector(m, w, [&](std::span<const int> counts) {
        for (int own = 0; own < w; ++own) consider(own, counts);
      });
    } else {
      if (samples == 0) throw std::runtime_error("pattern space exceeds cap and sampling is off");
      exact = false;
      RandomStream rng(0xc001eUL, static_cast<uint64_t>(m));
      std::vector<int> counts(w);
      for (uint64_t i = 0; i < samples; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        for (int j = 0; j < m; ++j) ++counts[static_cast<int>(rng.next_u64() % w)];
        for (int own = 0; own < w; ++own) consider(own, counts);
      }
    }
  }
  return {max_up + max_down, exact};
}

}  // namespace ipsim
