#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipsim/config.hpp"
#include "ipsim/csv.hpp"
#include "ipsim/exact.hpp"
#include "ipsim/graph.hpp"
#include "ipsim/stats.hpp"
#include "ipsim/version.hpp"

// Orchestration for the CLI subcommands: build the experiment from its
// config, produce the CSV artifacts atomically, and finish with a manifest
// recording the config hash, seed and per-file checksums. Statistical
// outcomes (a failed normality cell) exit 0 — they are results; violated
// hard bounds, order violations and cap/validation errors exit nonzero.

namespace ipsim {

struct RunOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> replicas;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<double> beta;
  int save_logs = 1;
  int max_distance = 3;
};

namespace detail {

inline void apply_overrides(ExperimentConfig& cfg, const RunOverrides& over) {
  if (over.seed) cfg.sim.seed = *over.seed;
  if (over.replicas) cfg.sim.replicas = *over.replicas;
  if (over.out_dir) cfg.output.directory = *over.out_dir;
}

/// Statistics are read where the truncation cannot bias them: the whole
/// torus, or the interior core of a tree ball at the configured (or derived)
/// margin.
inline Region observation_region(const ExperimentConfig& cfg, const Graph& g,
                                 const LocalRule& rule) {
  Region region;
  if (g.kind == GraphKind::torus) {
    region.members.resize(g.vertex_count());
    for (int v = 0; v < g.vertex_count(); ++v) region.members[v] = v;
    region.label = "torus";
    return region;
  }
  int margin = cfg.graph.interior_margin;
  if (margin < 0) {
    double b = total_rate_bound(rule, g).value;
    margin = static_cast<int>(std::ceil(cfg.sim.t_end * b * rule.range()));
    margin = std::min(margin, g.truncation_radius / 2);
  }
  region.members = interior_core(g, margin);
  region.label = "interior(margin=" + std::to_string(margin) + ")";
  if (region.members.empty())
    throw std::runtime_error("interior margin leaves no observation vertices");
  return region;
}

/// Nested observation windows containing vertex 0: centered blocks on a
/// torus (entries are block sides), balls around the root on trees
/// (entries are radii).
inline std::vector<Region> region_ladder(const Graph& g, const std::vector<int>& ladder) {
  std::vector<Region> regions;
  for (int entry : ladder) {
    Region region;
    if (g.kind == GraphKind::torus) {
      if (entry > g.side) throw std::invalid_argument("ladder block exceeds the torus side");
      int offset = (g.side - entry / 2) % g.side;
      std::vector<char> coord_in(g.side, 0);
      for (int j = 0; j < entry; ++j) coord_in[(offset + j) % g.side] = 1;
      for (int v = 0; v < g.vertex_count(); ++v) {
        int rest = v;
        bool inside = true;
        for (int i = 0; i < g.dim; ++i) {
          if (!coord_in[rest % g.side]) {
            inside = false;
            break;
          }
          rest /= g.side;
        }
        if (inside) region.members.push_back(v);
      }
      region.label = "block" + std::to_string(entry);
    } else {
      if (entry > g.interior_radius[g.root])
        throw std::invalid_argument("ladder radius exceeds the truncation radius");
      region.members = ball(g, g.root, entry);
      region.label = "ball" + std::to_string(entry);
    }
    regions.push_back(std::move(region));
  }
  return regions;
}

inline std::vector<double> state_index_score(int num_states) {
  std::vector<double> f(num_states);
  for (int w = 0; w < num_states; ++w) f[w] = w;
  return f;
}

class ArtifactSink {
 public:
  ArtifactSink(std::string dir, const ExperimentConfig& cfg)
      : dir_(std::move(dir)), cfg_hash_(hex64(fnv1a64(emit_config(cfg)))), cfg_(cfg) {}

  const std::string& config_hash() const { return cfg_hash_; }

  void write(const std::string& name, const std::string& content) {
    atomic_write_file(std::filesystem::path(dir_) / name, content);
    checksums_[name] = hex64(fnv1a64(content));
  }

  // manifest goes last so its presence certifies a complete run
  void finish() const {
    nlohmann::json manifest;
    manifest["toolkit_version"] = kVersion;
    manifest["config_hash"] = cfg_hash_;
    manifest["seed"] = cfg_.sim.seed;
    manifest["prng"] = std::string(RandomStream::algorithm());
    manifest["grid"] = cfg_.sim.grid;
    manifest["timestamp"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, checksum] : checksums_) files[name] = checksum;
    manifest["files"] = files;
    atomic_write_file(std::filesystem::path(dir_) / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string dir_;
  std::string cfg_hash_;
  const ExperimentConfig& cfg_;
  std::map<std::string, std::string> checksums_;
};

inline std::string pass_str(bool pass) { return pass ? "1" : "0"; }

}  // namespace detail

inline int run_graph_info(const ExperimentConfig& cfg, const RunOverrides& over,
                          std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  auto report = growth_report(g);
  int diam = diameter(g);

  CsvBuilder csv({"n", "sphere", "ball", "bound_s3", "bound_s7"});
  for (const auto& row : report.rows) {
    csv.cell(row.n).cell(row.sphere_size).cell(row.ball_size);
    csv.cell(row.bound_s3).cell(row.bound_s7);
    csv.end_row();
  }
  csv.comment("V=" + std::to_string(g.vertex_count()) + " r=" + std::to_string(g.degree) +
              " diameter=" + std::to_string(diam));

  out << "V=" << g.vertex_count() << " r=" << g.degree << " diameter=" << diam << "\n";
  auto witness = transitivity_witness(g);
  out << "transitivity-witness: " << (witness.pass ? "pass" : "FAIL") << " (" << witness.message
      << ")\n";
  out << csv.text();

  detail::ArtifactSink sink(merged.output.directory, merged);
  sink.write("growth.csv", csv.text());
  sink.finish();
  return witness.pass ? 0 : 1;
}

inline int run_simulate(const ExperimentConfig& cfg, const RunOverrides& over,
                        std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  LocalRule rule = build_rule(merged.model);
  Region region = detail::observation_region(merged, g, rule);
  std::vector<uint8_t> eta0(g.vertex_count(), static_cast<uint8_t>(init_state_index(merged)));
  auto score = detail::state_index_score(rule.num_states());

  int threads = over.threads.value_or(0);
  bool retain = over.save_logs > 0;
  auto run = run_replicas(g, rule, eta0, merged.sim.t_end, merged.sim.grid, region, &score,
                          merged.sim.replicas, merged.sim.seed, threads, retain);

  detail::ArtifactSink sink(merged.output.directory, merged);
  CsvBuilder series_csv({"replica", "t", "w", "count", "D"});
  for (int r = 0; r < merged.sim.replicas; ++r) {
    const auto& s = run.series[r];
    for (size_t gi = 0; gi < s.grid.size(); ++gi)
      for (size_t w = 0; w < s.counts[gi].size(); ++w) {
        series_csv.cell(r).cell(s.grid[gi]).cell(static_cast<int>(w));
        series_csv.cell(s.counts[gi][w]).cell(s.degradation[gi]);
        series_csv.end_row();
      }
  }
  sink.write("series.csv", series_csv.text());

  for (int r = 0; r < std::min(over.save_logs, merged.sim.replicas); ++r) {
    CsvBuilder ev({"time", "site", "from", "to"});
    for (const auto& e : run.logs[r].events) {
      ev.cell(e.time).cell(e.site).cell(static_cast<int>(e.from)).cell(static_cast<int>(e.to));
      ev.end_row();
    }
    ev.comment("seed=" + std::to_string(merged.sim.seed) + " replica=" + std::to_string(r) +
               " config=fnv1a:" + sink.config_hash() +
               " algorithm=" + std::string(RandomStream::algorithm()));
    sink.write("events_" + std::to_string(r) + ".csv", ev.text());
  }
  sink.finish();
  out << "simulate: " << merged.sim.replicas << " replicas, region " << region.label << " ("
      << region.members.size() << " sites)\n";
  return 0;
}

inline int run_exact(const ExperimentConfig& cfg, const RunOverrides& over, std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  LocalRule rule = build_rule(merged.model);
  GeneratorMatrix gen = build_generator(g, rule);

  std::vector<std::pair<double, double>> times;
  for (double s : merged.analysis.times)
    for (double t : merged.analysis.times)
      if (s <= t) times.emplace_back(s, t);
  if (times.empty()) throw std::invalid_argument("analysis.times must not be empty");

  auto base_dist = bfs_distances(g, 0);
  int max_reachable = *std::max_element(base_dist.begin(), base_dist.end());
  std::vector<int> distances;
  for (int d = 1; d <= std::min(over.max_distance, max_reachable); ++d) distances.push_back(d);

  auto cov = verify_cov_bound(gen, g, rule, distances, times, over.beta.value_or(0.0));

  detail::ArtifactSink sink(merged.output.directory, merged);
  CsvBuilder cov_csv({"d", "s", "t", "cov", "bound", "pass"});
  for (const auto& row : cov.rows) {
    cov_csv.cell(row.dist).cell(row.s).cell(row.t).cell(row.cov_abs).cell(row.bound);
    cov_csv.cell(detail::pass_str(row.pass));
    cov_csv.end_row();
  }
  cov_csv.comment("beta=" + format_double(cov.beta) + " rho=" + format_double(cov.rho) +
                  " B=" + format_double(cov.B) + " M=" + format_double(cov.M) +
                  " D=" + format_double(cov.D) + " C=" + format_double(cov.C) +
                  " eps=" + format_double(cov.eps));
  sink.write("cov_bound.csv", cov_csv.text());

  bool smooth_all_pass = true;
  CsvBuilder smooth_csv({"site", "lhs", "rhs", "pass"});
  for (double t : merged.analysis.times) {
    auto rep = verify_smoothness_bound(gen, g, rule, 0, rule.num_states() - 1, t);
    smooth_all_pass = smooth_all_pass && rep.all_pass;
    for (const auto& row : rep.rows) {
      smooth_csv.cell(row.site).cell(row.lhs).cell(row.rhs).cell(detail::pass_str(row.pass));
      smooth_csv.end_row();
    }
  }
  sink.write("smooth_bound.csv", smooth_csv.text());
  sink.finish();

  out << "exact: covariance bound " << (cov.all_pass ? "pass" : "VIOLATED") << ", smoothness "
      << (smooth_all_pass ? "pass" : "VIOLATED") << "\n";
  return cov.all_pass && smooth_all_pass ? 0 : 1;
}

inline int run_clt_check(const ExperimentConfig& cfg, const RunOverrides& over,
                         std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  LocalRule rule = build_rule(merged.model);
  Region region = detail::observation_region(merged, g, rule);
  std::vector<uint8_t> eta0(g.vertex_count(), static_cast<uint8_t>(init_state_index(merged)));
  auto score = detail::state_index_score(rule.num_states());

  auto run = run_replicas(g, rule, eta0, merged.sim.t_end, merged.sim.grid, region, &score,
                          merged.sim.replicas, merged.sim.seed, over.threads.value_or(0), false);
  auto moments = estimate_moments(run.series, score, merged.analysis.times);
  std::vector<int> states(rule.num_states());
  for (int w = 0; w < rule.num_states(); ++w) states[w] = w;
  auto report = clt_check(run.series, merged.analysis.times, states, merged.analysis.significance);

  detail::ArtifactSink sink(merged.output.directory, merged);
  CsvBuilder moments_csv({"t", "m", "se_m", "v", "se_v"});
  for (size_t gi = 0; gi < moments.grid.size(); ++gi) {
    moments_csv.cell(moments.grid[gi]).cell(moments.m[gi]).cell(moments.se_m[gi]);
    moments_csv.cell(moments.v[gi]).cell(moments.se_v[gi]);
    moments_csv.end_row();
  }
  sink.write("moments.csv", moments_csv.text());

  CsvBuilder gamma_csv({"s", "t", "w", "wp", "cov", "se"});
  for (const auto& e : moments.gamma) {
    gamma_csv.cell(e.s).cell(e.t).cell(e.w).cell(e.wp).cell(e.cov).cell(e.se);
    gamma_csv.end_row();
  }
  sink.write("gamma.csv", gamma_csv.text());

  CsvBuilder clt_csv({"t", "w", "ks", "ad", "crit", "pass"});
  CsvBuilder qq_csv({"t", "w", "theoretical", "empirical"});
  for (const auto& cell : report.cells) {
    clt_csv.cell(cell.t).cell(cell.w).cell(cell.ks).cell(cell.ad).cell(cell.crit);
    clt_csv.cell(cell.status == CellStatus::degenerate
                     ? "degenerate"
                     : detail::pass_str(cell.status == CellStatus::pass));
    clt_csv.end_row();
    for (const auto& [theo, emp] : cell.qq) {
      qq_csv.cell(cell.t).cell(cell.w).cell(theo).cell(emp);
      qq_csv.end_row();
    }
  }
  sink.write("clt.csv", clt_csv.text());
  sink.write("qq.csv", qq_csv.text());
  sink.finish();

  out << "clt-check: " << (report.all_pass ? "all cells pass" : "some cells FAIL") << " at "
      << merged.analysis.significance << "\n";
  return 0;
}

inline int run_variance_scan(const ExperimentConfig& cfg, const RunOverrides& over,
                             std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  LocalRule rule = build_rule(merged.model);
  if (merged.analysis.ladder.empty()) throw std::invalid_argument("analysis.ladder is empty");
  if (merged.analysis.times.empty()) throw std::invalid_argument("analysis.times is empty");
  auto ladder = detail::region_ladder(g, merged.analysis.ladder);
  std::vector<uint8_t> eta0(g.vertex_count(), static_cast<uint8_t>(init_state_index(merged)));
  auto score = detail::state_index_score(rule.num_states());
  int ell = merged.analysis.ell >= 0 ? merged.analysis.ell : 3 * rule.range() + 3;
  double t = merged.analysis.times.front();

  auto report = variance_ratio_scan(g, rule, eta0, ladder, t, merged.sim.replicas,
                                    merged.sim.seed, score, ell, over.threads.value_or(0));

  detail::ArtifactSink sink(merged.output.directory, merged);
  CsvBuilder csv({"Bn", "ratio", "partial_sum", "gap", "se", "boundary_frac"});
  for (const auto& row : report.rows) {
    csv.cell(row.region_size).cell(row.ratio).cell(row.partial_sum).cell(row.gap);
    csv.cell(row.se_gap).cell(row.boundary_frac);
    csv.end_row();
  }
  csv.comment("t=" + format_double(t) + " ell=" + std::to_string(ell) +
              " slc_audit=" + (report.slc_audit_pass ? "pass" : "fail"));
  sink.write("varratio.csv", csv.text());
  sink.finish();

  out << "variance-scan: " << report.rows.size() << " regions, slc audit "
      << (report.slc_audit_pass ? "pass" : "FAIL") << "\n";
  return report.slc_audit_pass ? 0 : 1;
}

inline int run_hitting(const ExperimentConfig& cfg, const RunOverrides& over, std::ostream& out) {
  ExperimentConfig merged = cfg;
  detail::apply_overrides(merged, over);
  Graph g = build_graph(merged.graph);
  LocalRule rule = build_rule(merged.model);
  Region region = detail::observation_region(merged, g, rule);
  std::vector<uint8_t> eta0(g.vertex_count(), static_cast<uint8_t>(init_state_index(merged)));
  auto score = detail::state_index_score(rule.num_states());
  double threshold = std::ceil(merged.analysis.alpha * static_cast<double>(region.members.size()));

  auto run = run_replicas(g, rule, eta0, merged.sim.t_end, merged.sim.grid, region, &score,
                          merged.sim.replicas, merged.sim.seed, over.threads.value_or(0), true);
  std::vector<std::optional<double>> hits(merged.sim.replicas);
  for (int r = 0; r < merged.sim.replicas; ++r)
    hits[r] = first_crossing(run.logs[r], region, score, threshold);
  auto moments = estimate_moments(run.series, score);
  auto report = hitting_analysis(std::move(hits), moments, merged.analysis.alpha, threshold,
                                 merged.analysis.significance, merged.analysis.bandwidth_c);

  detail::ArtifactSink sink(merged.output.directory, merged);
  CsvBuilder hit_csv({"replica", "T"});
  for (int r = 0; r < merged.sim.replicas; ++r) {
    hit_csv.cell(r);
    hit_csv.cell(report.hit_times[r] ? format_double(*report.hit_times[r]) : std::string());
    hit_csv.end_row();
  }
  sink.write("hitting.csv", hit_csv.text());

  CsvBuilder summary({"t_alpha", "m_prime", "h", "v", "sigma2", "ks", "pass"});
  summary.cell(report.t_alpha).cell(report.m_prime).cell(report.bandwidth);
  summary.cell(report.v_at_t_alpha).cell(report.sigma2).cell(report.ks);
  summary.cell(report.degenerate ? "degenerate" : detail::pass_str(report.ks_pass));
  summary.end_row();
  if (report.degenerate) summary.comment("degenerate: " + report.notes);
  sink.write("hitting_summary.csv", summary.text());

  CsvBuilder moments_csv({"t", "m", "se_m", "v", "se_v"});
  for (size_t gi = 0; gi < moments.grid.size(); ++gi) {
    moments_csv.cell(moments.grid[gi]).cell(moments.m[gi]).cell(moments.se_m[gi]);
    moments_csv.cell(moments.v[gi]).cell(moments.se_v[gi]);
    moments_csv.end_row();
  }
  sink.write("moments.csv", moments_csv.text());
  sink.finish();

  out << "hitting: t_alpha=" << format_double(report.t_alpha)
      << " sigma2=" << format_double(report.sigma2) << " ks="
      << format_double(report.ks) << (report.ks_pass ? " (pass)" : " (fail)") << "\n";
  return 0;
}

/// Dispatch a subcommand; catches domain errors into exit code 2.
inline int run_subcommand(const std::string& name, const ExperimentConfig& cfg,
                          const RunOverrides& over, std::ostream& out, std::ostream& err) {
  try {
    if (name == "graph-info") return run_graph_info(cfg, over, out);
    if (name == "simulate") return run_simulate(cfg, over, out);
    if (name == "exact") return run_exact(cfg, over, out);
    if (name == "clt-check") return run_clt_check(cfg, over, out);
    if (name == "variance-scan") return run_variance_scan(cfg, over, out);
    if (name == "hitting") return run_hitting(cfg, over, out);
    err << "unknown subcommand: " << name << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ipsim
