#include <catch2/catch_amalgamated.hpp>

#include "ipsim/config.hpp"
#include "ipsim/csv.hpp"
#include "ipsim/runner.hpp"

#include <filesystem>
#include <fstream>
#include <string>

using namespace ipsim;

namespace {

const char* kMinimalConfig = R"(
# minimal torus + independent flips
[graph]
type = "torus"
dim = 2
side = 5

[model]
type = "independent-flip"
lambda = 1.0

[sim]
t_end = 2.0
grid = linspace(0, 2, 9)
replicas = 10
seed = 3

[analysis]
times = [1.0, 2.0]

[output]
directory = "out"
)";

}  // namespace

TEST_CASE("minimal config parses with defaults filled") {
  auto parsed = parse_config(kMinimalConfig);
  REQUIRE(parsed.ok());
  const auto& cfg = *parsed.config;
  REQUIRE(cfg.graph.side == 5);
  REQUIRE(cfg.model.states == std::vector<std::string>{"0", "1"});
  REQUIRE(cfg.init.state == "0");
  REQUIRE(cfg.sim.grid.size() == 9);
  REQUIRE(cfg.sim.grid.front() == 0.0);
  REQUIRE(cfg.sim.grid.back() == 2.0);
  REQUIRE(cfg.sim.grid_spec == "linspace(0, 2, 9)");
  REQUIRE(cfg.analysis.significance == 0.01);
}

TEST_CASE("config round-trips through emit and parse") {
  auto first = parse_config(kMinimalConfig);
  REQUIRE(first.ok());
  auto text = emit_config(*first.config);
  auto second = parse_config(text);
  REQUIRE(second.ok());
  REQUIRE(*first.config == *second.config);
  REQUIRE(emit_config(*second.config) == text);
}

TEST_CASE("all violations are reported, not just the first") {
  std::string bad = R"(
[graph]
type = "moebius"
side = 1

[model]
type = "warp-drive"

[sim]
t_end = 1.0
grid = [0.0, 2.0]
replicas = 0
)";
  auto parsed = parse_config(bad);
  REQUIRE_FALSE(parsed.ok());
  REQUIRE(parsed.errors.size() >= 4);
  bool graph_type = false, model_type = false, grid = false, replicas = false;
  for (const auto& e : parsed.errors) {
    if (e.find("graph.type") != std::string::npos) graph_type = true;
    if (e.find("model.type") != std::string::npos && e.find("supported") != std::string::npos)
      model_type = true;
    if (e.find("sim.grid") != std::string::npos) grid = true;
    if (e.find("sim.replicas") != std::string::npos) replicas = true;
  }
  REQUIRE(graph_type);
  REQUIRE(model_type);
  REQUIRE(grid);
  REQUIRE(replicas);
}

TEST_CASE("unknown keys are rejected") {
  std::string bad = std::string(kMinimalConfig) + "\n[sim]\nrelpicas = 5\n";
  auto parsed = parse_config(bad);
  REQUIRE_FALSE(parsed.ok());
  bool found = false;
  for (const auto& e : parsed.errors)
    if (e.find("relpicas") != std::string::npos) found = true;
  REQUIRE(found);
}

TEST_CASE("grid beyond t_end names the key") {
  std::string bad = R"(
[graph]
type = "torus"
dim = 1
side = 4

[model]
type = "contact"
lambda = 1.0
delta = 1.0

[sim]
t_end = 1.0
grid = [0.0, 0.5, 1.5]
)";
  auto parsed = parse_config(bad);
  REQUIRE_FALSE(parsed.ok());
  REQUIRE(parsed.errors.size() == 1);
  REQUIRE(parsed.errors[0].find("sim.grid") != std::string::npos);
}

TEST_CASE("ladder and init state validation") {
  std::string bad = R"(
[graph]
type = "torus"
dim = 2
side = 8

[model]
type = "degradation-ladder"
states = ["ok", "worn", "dead"]
a = [0.5, 0.5]
b = [0.1, 0.1]

[init]
state = "pristine"

[sim]
t_end = 1.0

[analysis]
ladder = [4, 4]
)";
  auto parsed = parse_config(bad);
  REQUIRE_FALSE(parsed.ok());
  bool init_err = false, ladder_err = false;
  for (const auto& e : parsed.errors) {
    if (e.find("init.state") != std::string::npos) init_err = true;
    if (e.find("analysis.ladder") != std::string::npos) ladder_err = true;
  }
  REQUIRE(init_err);
  REQUIRE(ladder_err);
}

TEST_CASE("builders from config") {
  auto parsed = parse_config(kMinimalConfig);
  REQUIRE(parsed.ok());
  auto g = build_graph(parsed.config->graph);
  REQUIRE(g.vertex_count() == 25);
  auto rule = build_rule(parsed.config->model);
  REQUIRE(rule.kind() == RuleKind::independent_flip);
  REQUIRE(init_state_index(*parsed.config) == 0);
}

TEST_CASE("observation region derives a truncation margin on trees") {
  std::string text = R"(
[graph]
type = "tree"
degree = 3
radius = 6

[model]
type = "contact"
lambda = 1.0
delta = 1.0

[init]
state = "1"

[sim]
t_end = 1.0

[analysis]
times = [0.5]
)";
  auto parsed = parse_config(text);
  REQUIRE(parsed.ok());
  auto g = build_graph(parsed.config->graph);
  auto rule = build_rule(parsed.config->model);
  auto region = ipsim::detail::observation_region(*parsed.config, g, rule);
  // B = max(delta, 3 lambda) = 3, margin = ceil(1 * 3 * 1) = 3 (cap 6/2 = 3)
  REQUIRE(region.label.find("margin=3") != std::string::npos);
  for (int v : region.members) REQUIRE(g.interior_radius[v] > 3);
  REQUIRE_FALSE(region.members.empty());

  // explicit margin wins over the derived one
  auto cfg2 = *parsed.config;
  cfg2.graph.interior_margin = 1;
  auto region2 = ipsim::detail::observation_region(cfg2, g, rule);
  REQUIRE(region2.members.size() > region.members.size());

  // torus: the whole vertex set
  auto torus_cfg = *parsed.config;
  torus_cfg.graph = GraphConfig{"torus", 2, 5, 0, 0, -1};
  auto torus = build_graph(torus_cfg.graph);
  auto torus_region = ipsim::detail::observation_region(torus_cfg, torus, rule);
  REQUIRE(torus_region.members.size() == 25);
}

TEST_CASE("region ladders on torus and tree") {
  auto torus = build_torus(2, 8);
  auto ladder = ipsim::detail::region_ladder(torus, {4, 8});
  REQUIRE(ladder.size() == 2);
  REQUIRE(ladder[0].members.size() == 16);
  REQUIRE(ladder[1].members.size() == 64);
  // nested and both containing the base vertex
  for (int v : ladder[0].members)
    REQUIRE(std::binary_search(ladder[1].members.begin(), ladder[1].members.end(), v));
  REQUIRE(std::binary_search(ladder[0].members.begin(), ladder[0].members.end(), 0));
  REQUIRE_THROWS_AS(ipsim::detail::region_ladder(torus, {16}), std::invalid_argument);

  auto tree = build_tree_ball(3, 4);
  auto tree_ladder = ipsim::detail::region_ladder(tree, {1, 2});
  REQUIRE(tree_ladder[0].members.size() == 4);   // root ball radius 1
  REQUIRE(tree_ladder[1].members.size() == 10);  // radius 2
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-30, 123456789.123456, -0.0, 2.5}) {
    std::string s = format_double(v);
    REQUIRE(std::stod(s) == v);
  }
}

TEST_CASE("randomized configs survive emit-parse round trips") {
  ipsim::RandomStream rng(314159, 0);
  auto pick = [&](std::initializer_list<const char*> options) {
    auto it = options.begin();
    std::advance(it, rng.next_u64() % options.size());
    return std::string(*it);
  };
  for (int trial = 0; trial < 60; ++trial) {
    ExperimentConfig cfg;
    cfg.graph.type = pick({"torus", "tree", "tetra-tree"});
    if (cfg.graph.type == "torus") {
      cfg.graph.dim = 1 + static_cast<int>(rng.next_u64() % 3);
      cfg.graph.side = 3 + static_cast<int>(rng.next_u64() % 20);
    } else {
      if (cfg.graph.type == "tree") cfg.graph.degree = 3 + static_cast<int>(rng.next_u64() % 4);
      cfg.graph.radius = 1 + static_cast<int>(rng.next_u64() % 6);
    }
    cfg.graph.interior_margin = static_cast<int>(rng.next_u64() % 4) - 1;

    int w = 2 + static_cast<int>(rng.next_u64() % 3);
    cfg.model.type = pick({"independent-flip", "contact", "degradation-ladder"});
    if (cfg.model.type == "contact") w = 2;
    for (int i = 0; i < w; ++i) cfg.model.states.push_back("s" + std::to_string(i));
    cfg.model.lambda = rng.uniform() * 3;
    cfg.model.delta = rng.uniform();
    if (cfg.model.type == "degradation-ladder")
      for (int i = 0; i + 1 < w; ++i) {
        cfg.model.a.push_back(rng.uniform());
        cfg.model.b.push_back(rng.uniform());
      }
    cfg.model.range = 1;
    cfg.init.state = cfg.model.states[rng.next_u64() % w];

    cfg.sim.t_end = 0.5 + rng.uniform() * 4;
    int grid_n = 2 + static_cast<int>(rng.next_u64() % 30);
    for (int i = 0; i < grid_n; ++i)
      cfg.sim.grid.push_back(std::min(cfg.sim.t_end * i / (grid_n - 1), cfg.sim.t_end));
    cfg.sim.replicas = 1 + static_cast<int>(rng.next_u64() % 5000);
    cfg.sim.seed = rng.next_u64();

    cfg.analysis.times = {cfg.sim.t_end};
    cfg.analysis.alpha = rng.uniform() * 2;
    cfg.analysis.significance = 0.05;
    cfg.analysis.ladder = {2, 3};
    cfg.analysis.ell = static_cast<int>(rng.next_u64() % 5) - 1;
    cfg.analysis.bandwidth_c = 0.1 + rng.uniform();
    cfg.output.directory = "out" + std::to_string(trial);

    auto text = emit_config(cfg);
    auto parsed = parse_config(text);
    INFO(text);
    REQUIRE(parsed.ok());
    REQUIRE(*parsed.config == cfg);
    REQUIRE(emit_config(*parsed.config) == text);
  }
}

TEST_CASE("fnv1a64 is stable") {
  REQUIRE(fnv1a64("") == 0xcbf29ce484222325ULL);
  REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  REQUIRE(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("atomic write leaves no partial file on injected failure") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "ipsim_atomic_test";
  fs::remove_all(dir);
  fs::path target = dir / "artifact.csv";

  atomic_write_file(target, "a,b\n1,2\n");
  REQUIRE(fs::exists(target));

  atomic_write_fault_hook() = []() { throw std::runtime_error("injected fault"); };
  REQUIRE_THROWS_WITH(atomic_write_file(target, "a,b\n3,4\n"),
                      Catch::Matchers::ContainsSubstring("injected"));
  atomic_write_fault_hook() = nullptr;

  // original content untouched, no temp litter
  std::ifstream in(target);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(content == "a,b\n1,2\n");
  size_t files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir)) ++files;
  REQUIRE(files == 1);
  fs::remove_all(dir);
}
