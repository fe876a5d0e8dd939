#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ipsim/csv.hpp"
#include "ipsim/graph.hpp"
#include "ipsim/rules.hpp"

// Experiment configuration: one file of [section] tables with key = value
// lines. Validation collects every violation instead of stopping at the
// first, and unknown keys are rejected so typos cannot silently fall back to
// defaults. parse -> emit -> parse is the identity.

namespace ipsim {

struct GraphConfig {
  std::string type = "torus";  // torus | tree | tetra-tree
  int dim = 2;
  int side = 0;
  int degree = 0;
  int radius = 0;
  int interior_margin = -1;  // -1: derived from t_end, B and range
};

struct ModelConfig {
  std::string type;  // independent-flip | contact | degradation-ladder
  double lambda = 0;
  double delta = 0;
  std::vector<std::string> states;
  std::vector<double> a, b;
  int range = 1;
};

struct InitConfig {
  std::string state;  // label, or decimal index into model.states
};

struct SimConfig {
  double t_end = 1.0;
  std::vector<double> grid;
  std::string grid_spec;  // original linspace(...) form, when used
  int replicas = 1;
  uint64_t seed = 0;
};

struct AnalysisConfig {
  std::vector<double> times;
  double alpha = 0.5;
  double significance = 0.01;
  std::vector<int> ladder;
  int ell = -1;  // -1: 3*range + 3
  double bandwidth_c = 0.5;
};

struct OutputConfig {
  std::string directory = "out";
};

struct ExperimentConfig {
  GraphConfig graph;
  ModelConfig model;
  InitConfig init;
  SimConfig sim;
  AnalysisConfig analysis;
  OutputConfig output;

  bool operator==(const ExperimentConfig&) const = default;
};

inline bool operator==(const GraphConfig& a, const GraphConfig& b) {
  return a.type == b.type && a.dim == b.dim && a.side == b.side && a.degree == b.degree &&
         a.radius == b.radius && a.interior_margin == b.interior_margin;
}
inline bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.type == b.type && a.lambda == b.lambda && a.delta == b.delta && a.states == b.states &&
         a.a == b.a && a.b == b.b && a.range == b.range;
}
inline bool operator==(const InitConfig& a, const InitConfig& b) { return a.state == b.state; }
inline bool operator==(const SimConfig& a, const SimConfig& b) {
  return a.t_end == b.t_end && a.grid == b.grid && a.grid_spec == b.grid_spec &&
         a.replicas == b.replicas && a.seed == b.seed;
}
inline bool operator==(const AnalysisConfig& a, const AnalysisConfig& b) {
  return a.times == b.times && a.alpha == b.alpha && a.significance == b.significance &&
         a.ladder == b.ladder && a.ell == b.ell && a.bandwidth_c == b.bandwidth_c;
}
inline bool operator==(const OutputConfig& a, const OutputConfig& b) {
  return a.directory == b.directory;
}

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty() && config.has_value(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_u64(std::string_view s, uint64_t& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_list(std::string_view body) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  for (size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      auto piece = trim(body.substr(start, i - start));
      if (!piece.empty()) parts.push_back(piece);
      start = i + 1;
    }
  }
  return parts;
}

inline std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    return std::string(s.substr(1, s.size() - 2));
  return std::string(s);
}

inline std::vector<double> expand_linspace(double t0, double t1, long long count) {
  std::vector<double> out;
  if (count == 1) {
    out.push_back(t0);
    return out;
  }
  for (long long i = 0; i + 1 < count; ++i)
    out.push_back(t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.push_back(t1);  // exact endpoint, immune to rounding drift
  return out;
}

}  // namespace detail

inline ParseResult parse_config(std::string_view text) {
  using detail::trim;
  ParseResult result;
  ExperimentConfig cfg;
  auto err = [&](int line_no, const std::string& message) {
    result.errors.push_back("line " + std::to_string(line_no) + ": " + message);
  };

  static const std::set<std::string> known_sections = {"graph", "model",    "init",
                                                       "sim",   "analysis", "output"};
  std::string section;
  int line_no = 0;
  std::istringstream stream{std::string(text)};
  std::string raw;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        err(line_no, "malformed section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_sections.count(section)) {
        err(line_no, "unknown section [" + section + "]");
        section.clear();
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      err(line_no, "expected key = value");
      continue;
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) {
      err(line_no, "key outside any section: " + key);
      continue;
    }

    auto want_double = [&](double& slot) {
      double v;
      if (detail::parse_double(value, v))
        slot = v;
      else
        err(line_no, key + ": expected a number, got '" + std::string(value) + "'");
    };
    auto want_int = [&](int& slot) {
      long long v;
      if (detail::parse_int(value, v))
        slot = static_cast<int>(v);
      else
        err(line_no, key + ": expected an integer, got '" + std::string(value) + "'");
    };
    auto want_double_list = [&](std::vector<double>& slot) {
      if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
        err(line_no, key + ": expected [v, v, ...]");
        return;
      }
      slot.clear();
      for (auto piece : detail::split_list(value.substr(1, value.size() - 2))) {
        double v;
        if (detail::parse_double(piece, v))
          slot.push_back(v);
        else
          err(line_no, key + ": bad number '" + std::string(piece) + "'");
      }
    };
    auto want_int_list = [&](std::vector<int>& slot) {
      std::vector<double> tmp;
      want_double_list(tmp);
      slot.assign(tmp.begin(), tmp.end());
    };
    auto want_string_list = [&](std::vector<std::string>& slot) {
      if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
        err(line_no, key + ": expected [\"a\", \"b\", ...]");
        return;
      }
      slot.clear();
      for (auto piece : detail::split_list(value.substr(1, value.size() - 2)))
        slot.push_back(detail::unquote(piece));
    };

    if (section == "graph") {
      if (key == "type")
        cfg.graph.type = detail::unquote(value);
      else if (key == "dim")
        want_int(cfg.graph.dim);
      else if (key == "side")
        want_int(cfg.graph.side);
      else if (key == "degree")
        want_int(cfg.graph.degree);
      else if (key == "radius")
        want_int(cfg.graph.radius);
      else if (key == "interior_margin")
        want_int(cfg.graph.interior_margin);
      else
        err(line_no, "unknown key graph." + key);
    } else if (section == "model") {
      if (key == "type")
        cfg.model.type = detail::unquote(value);
      else if (key == "lambda")
        want_double(cfg.model.lambda);
      else if (key == "delta")
        want_double(cfg.model.delta);
      else if (key == "states")
        want_string_list(cfg.model.states);
      else if (key == "a")
        want_double_list(cfg.model.a);
      else if (key == "b")
        want_double_list(cfg.model.b);
      else if (key == "range")
        want_int(cfg.model.range);
      else
        err(line_no, "unknown key model." + key);
    } else if (section == "init") {
      if (key == "state")
        cfg.init.state = detail::unquote(value);
      else
        err(line_no, "unknown key init." + key);
    } else if (section == "sim") {
      if (key == "t_end")
        want_double(cfg.sim.t_end);
      else if (key == "grid") {
        if (value.rfind("linspace(", 0) == 0 && value.back() == ')') {
          auto body = value.substr(9, value.size() - 10);
          auto parts = detail::split_list(body);
          double t0 = 0, t1 = 0;
          long long count = 0;
          if (parts.size() == 3 && detail::parse_double(parts[0], t0) &&
              detail::parse_double(parts[1], t1) && detail::parse_int(parts[2], count) &&
              count >= 1 && t1 >= t0) {
            cfg.sim.grid = detail::expand_linspace(t0, t1, count);
            cfg.sim.grid_spec = std::string(value);
          } else {
            err(line_no, "grid: malformed linspace(t0, t1, count)");
          }
        } else {
          want_double_list(cfg.sim.grid);
          cfg.sim.grid_spec.clear();
        }
      } else if (key == "replicas")
        want_int(cfg.sim.replicas);
      else if (key == "seed") {
        uint64_t v;
        if (detail::parse_u64(value, v))
          cfg.sim.seed = v;
        else
          err(line_no, "seed: expected an unsigned integer");
      } else
        err(line_no, "unknown key sim." + key);
    } else if (section == "analysis") {
      if (key == "times")
        want_double_list(cfg.analysis.times);
      else if (key == "alpha")
        want_double(cfg.analysis.alpha);
      else if (key == "significance")
        want_double(cfg.analysis.significance);
      else if (key == "ladder")
        want_int_list(cfg.analysis.ladder);
      else if (key == "ell")
        want_int(cfg.analysis.ell);
      else if (key == "bandwidth_c")
        want_double(cfg.analysis.bandwidth_c);
      else
        err(line_no, "unknown key analysis." + key);
    } else if (section == "output") {
      if (key == "directory")
        cfg.output.directory = detail::unquote(value);
      else
        err(line_no, "unknown key output." + key);
    }
  }

  // semantic validation (all violations reported)
  auto verr = [&](const std::string& message) { result.errors.push_back(message); };

  static const std::set<std::string> graph_types = {"torus", "tree", "tetra-tree"};
  if (!graph_types.count(cfg.graph.type))
    verr("graph.type: unknown '" + cfg.graph.type + "' (supported: torus, tree, tetra-tree)");
  if (cfg.graph.type == "torus") {
    if (cfg.graph.dim < 1) verr("graph.dim: must be >= 1");
    if (cfg.graph.side < 3) verr("graph.side: must be >= 3");
  } else {
    if (cfg.graph.radius < 1) verr("graph.radius: must be >= 1");
    if (cfg.graph.type == "tree" && cfg.graph.degree < 3) verr("graph.degree: must be >= 3");
  }

  static const std::set<std::string> model_types = {"independent-flip", "contact",
                                                    "degradation-ladder"};
  if (!model_types.count(cfg.model.type))
    verr("model.type: unknown '" + cfg.model.type +
         "' (supported: independent-flip, contact, degradation-ladder)");
  if (cfg.model.lambda < 0) verr("model.lambda: must be >= 0");
  if (cfg.model.delta < 0) verr("model.delta: must be >= 0");
  if (cfg.model.range < 0) verr("model.range: must be >= 0");
  if (cfg.model.states.empty()) {
    if (cfg.model.type == "degradation-ladder")
      verr("model.states: required for degradation-ladder");
    else
      cfg.model.states = {"0", "1"};
  }
  if (cfg.model.states.size() < 2)
    verr("model.states: need at least 2 states");
  if (cfg.model.type == "contact" && cfg.model.states.size() != 2 && !cfg.model.states.empty())
    verr("model.states: contact needs exactly 2 states");
  {
    std::set<std::string> uniq(cfg.model.states.begin(), cfg.model.states.end());
    if (uniq.size() != cfg.model.states.size()) verr("model.states: labels must be distinct");
  }
  if (cfg.model.type == "degradation-ladder") {
    size_t need = cfg.model.states.empty() ? 0 : cfg.model.states.size() - 1;
    if (cfg.model.a.size() != need) verr("model.a: need one rate per upward transition");
    if (cfg.model.b.size() != need) verr("model.b: need one rate per upward transition");
    for (double v : cfg.model.a)
      if (v < 0) verr("model.a: rates must be >= 0");
    for (double v : cfg.model.b)
      if (v < 0) verr("model.b: rates must be >= 0");
  }

  if (cfg.init.state.empty()) cfg.init.state = cfg.model.states.empty() ? "0" : cfg.model.states[0];
  {
    bool found = std::find(cfg.model.states.begin(), cfg.model.states.end(), cfg.init.state) !=
                 cfg.model.states.end();
    long long idx;
    if (!found && detail::parse_int(cfg.init.state, idx) && idx >= 0 &&
        idx < static_cast<long long>(cfg.model.states.size()))
      found = true;
    if (!found) verr("init.state: '" + cfg.init.state + "' is not a state of the model");
  }

  if (!(cfg.sim.t_end > 0)) verr("sim.t_end: must be > 0");
  if (cfg.sim.replicas < 1) verr("sim.replicas: must be >= 1");
  if (cfg.sim.grid.empty()) {
    cfg.sim.grid = detail::expand_linspace(0.0, cfg.sim.t_end, 65);
    cfg.sim.grid_spec = "linspace(0, " + format_double(cfg.sim.t_end) + ", 65)";
  }
  for (size_t i = 0; i < cfg.sim.grid.size(); ++i) {
    if (cfg.sim.grid[i] < 0 || cfg.sim.grid[i] > cfg.sim.t_end) {
      verr("sim.grid: time " + format_double(cfg.sim.grid[i]) + " outside [0, t_end]");
      break;
    }
    if (i > 0 && cfg.sim.grid[i] <= cfg.sim.grid[i - 1]) {
      verr("sim.grid: times must be strictly increasing");
      break;
    }
  }
  for (double t : cfg.analysis.times)
    if (t < 0 || t > cfg.sim.t_end) {
      verr("analysis.times: time " + format_double(t) + " outside [0, t_end]");
      break;
    }
  if (!(cfg.analysis.alpha >= 0))
    verr("analysis.alpha: must be >= 0");
  {
    static const std::set<double> sig = {0.10, 0.05, 0.025, 0.01};
    if (!sig.count(cfg.analysis.significance))
      verr("analysis.significance: supported levels are 0.10, 0.05, 0.025, 0.01");
  }
  for (size_t i = 1; i < cfg.analysis.ladder.size(); ++i)
    if (cfg.analysis.ladder[i] <= cfg.analysis.ladder[i - 1]) {
      verr("analysis.ladder: sizes must be strictly increasing");
      break;
    }
  for (int s : cfg.analysis.ladder)
    if (s < 1) {
      verr("analysis.ladder: sizes must be >= 1");
      break;
    }
  if (cfg.analysis.bandwidth_c <= 0) verr("analysis.bandwidth_c: must be > 0");
  if (cfg.output.directory.empty()) verr("output.directory: must not be empty");

  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

/// Canonical text form; parse(emit(c)) == c.
inline std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  auto kv = [&](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  auto quoted = [](const std::string& s) { return "\"" + s + "\""; };
  auto double_list = [](const std::vector<double>& vs) {
    std::string s = "[";
    for (size_t i = 0; i < vs.size(); ++i) s += (i ? ", " : "") + format_double(vs[i]);
    return s + "]";
  };
  auto int_list = [](const std::vector<int>& vs) {
    std::string s = "[";
    for (size_t i = 0; i < vs.size(); ++i) s += (i ? ", " : "") + std::to_string(vs[i]);
    return s + "]";
  };
  auto string_list = [&](const std::vector<std::string>& vs) {
    std::string s = "[";
    for (size_t i = 0; i < vs.size(); ++i) s += (i ? ", " : "") + quoted(vs[i]);
    return s + "]";
  };

  out += "[graph]\n";
  kv("type", quoted(cfg.graph.type));
  if (cfg.graph.type == "torus") {
    kv("dim", std::to_string(cfg.graph.dim));
    kv("side", std::to_string(cfg.graph.side));
  } else {
    if (cfg.graph.type == "tree") kv("degree", std::to_string(cfg.graph.degree));
    kv("radius", std::to_string(cfg.graph.radius));
  }
  kv("interior_margin", std::to_string(cfg.graph.interior_margin));

  out += "\n[model]\n";
  kv("type", quoted(cfg.model.type));
  kv("lambda", format_double(cfg.model.lambda));
  kv("delta", format_double(cfg.model.delta));
  kv("states", string_list(cfg.model.states));
  if (cfg.model.type == "degradation-ladder") {
    kv("a", double_list(cfg.model.a));
    kv("b", double_list(cfg.model.b));
  }
  kv("range", std::to_string(cfg.model.range));

  out += "\n[init]\n";
  kv("state", quoted(cfg.init.state));

  out += "\n[sim]\n";
  kv("t_end", format_double(cfg.sim.t_end));
  if (!cfg.sim.grid_spec.empty())
    kv("grid", cfg.sim.grid_spec);
  else
    kv("grid", double_list(cfg.sim.grid));
  kv("replicas", std::to_string(cfg.sim.replicas));
  kv("seed", std::to_string(cfg.sim.seed));

  out += "\n[analysis]\n";
  kv("times", double_list(cfg.analysis.times));
  kv("alpha", format_double(cfg.analysis.alpha));
  kv("significance", format_double(cfg.analysis.significance));
  kv("ladder", int_list(cfg.analysis.ladder));
  kv("ell", std::to_string(cfg.analysis.ell));
  kv("bandwidth_c", format_double(cfg.analysis.bandwidth_c));

  out += "\n[output]\n";
  kv("directory", quoted(cfg.output.directory));
  return out;
}

/// Build the graph described by the config.
inline Graph build_graph(const GraphConfig& gc) {
  if (gc.type == "torus") return build_torus(gc.dim, gc.side);
  if (gc.type == "tree") return build_tree_ball(gc.degree, gc.radius);
  return build_tetra_tree_ball(gc.radius);
}

/// Build the rule described by the config.
inline LocalRule build_rule(const ModelConfig& mc) {
  StateAlphabet alphabet{mc.states};
  if (mc.type == "independent-flip") return LocalRule::independent_flip(alphabet, mc.lambda, mc.delta);
  if (mc.type == "contact") return LocalRule::contact(mc.lambda, mc.delta, alphabet);
  return LocalRule::degradation_ladder(alphabet, mc.a, mc.b);
}

inline int init_state_index(const ExperimentConfig& cfg) {
  for (size_t i = 0; i < cfg.model.states.size(); ++i)
    if (cfg.model.states[i] == cfg.init.state) return static_cast<int>(i);
  long long idx = 0;
  detail::parse_int(cfg.init.state, idx);
  return static_cast<int>(idx);
}

}  // namespace ipsim
