#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "ipsim/csv.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed binary end to end: artifact layout, config error
// reporting, cap errors, and byte-identical reruns under a fixed seed.

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* bin = std::getenv("IPSIM_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

fs::path work_dir() {
  const char* dir = std::getenv("IPSIM_WORK");
  REQUIRE(dir != nullptr);
  fs::create_directories(dir);
  return dir;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& args, const std::string& env_prefix = "") {
  fs::path capture = work_dir() / "capture.txt";
  std::string cmd = env_prefix + bin_path() + " " + args + " > " + capture.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  return result;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::path p = work_dir() / name;
  std::ofstream out(p);
  out << body;
  return p;
}

const char* kHittingConfig = R"(
[graph]
type = "torus"
dim = 2
side = 6

[model]
type = "independent-flip"
lambda = 1.0

[init]
state = "0"

[sim]
t_end = 3.0
grid = linspace(0, 3, 61)
replicas = 200
seed = 12

[analysis]
alpha = 0.5
significance = 0.01
times = [1.0]

[output]
directory = "PLACEHOLDER"
)";

std::string hitting_config_for(const fs::path& out_dir) {
  std::string text = kHittingConfig;
  auto pos = text.find("PLACEHOLDER");
  text.replace(pos, std::string("PLACEHOLDER").size(), out_dir.string());
  return text;
}

}  // namespace

TEST_CASE("graph-info prints the structure line and growth table") {
  fs::path out = work_dir() / "ginfo";
  fs::remove_all(out);
  auto cfg = write_config("ginfo.toml", R"(
[graph]
type = "torus"
dim = 2
side = 5

[model]
type = "independent-flip"
lambda = 1.0

[sim]
t_end = 1.0

[output]
directory = ")" + out.string() + "\"\n");

  auto res = run_command("graph-info --config " + cfg.string());
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("V=25 r=4 diameter=4") != std::string::npos);
  REQUIRE(res.output.find("n,sphere,ball,bound_s3,bound_s7") != std::string::npos);
  REQUIRE(fs::exists(out / "growth.csv"));
  REQUIRE(fs::exists(out / "manifest.json"));
}

TEST_CASE("config violations are listed and exit nonzero") {
  auto cfg = write_config("bad.toml", "[graph]\ntype = \"torus\"\nside = 1\n[model]\ntype = \"x\"\n");
  auto res = run_command("simulate --config " + cfg.string());
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.output.find("graph.side") != std::string::npos);
  REQUIRE(res.output.find("model.type") != std::string::npos);
}

TEST_CASE("exact refuses oversized state spaces with a clean error") {
  fs::path out = work_dir() / "cap";
  auto cfg = write_config("cap.toml", R"(
[graph]
type = "torus"
dim = 2
side = 5

[model]
type = "contact"
lambda = 1.0
delta = 1.0

[init]
state = "1"

[sim]
t_end = 0.5

[analysis]
times = [0.25]

[output]
directory = ")" + out.string() + "\"\n");
  auto res = run_command("exact --config " + cfg.string());
  REQUIRE(res.exit_code == 2);
  REQUIRE(res.output.find("cap") != std::string::npos);
}

TEST_CASE("simulate writes series, event log and manifest with checksums") {
  fs::path out = work_dir() / "sim";
  fs::remove_all(out);
  auto cfg = write_config("sim.toml", R"(
[graph]
type = "torus"
dim = 1
side = 8

[model]
type = "contact"
lambda = 1.0
delta = 0.5

[init]
state = "1"

[sim]
t_end = 1.0
grid = [0.0, 0.5, 1.0]
replicas = 5
seed = 4

[output]
directory = ")" + out.string() + "\"\n");
  auto res = run_command("simulate --config " + cfg.string());
  REQUIRE(res.exit_code == 0);

  auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  REQUIRE(manifest["prng"] == "philox4x64-10");
  for (auto& [name, checksum] : manifest["files"].items()) {
    auto content = slurp(out / name);
    REQUIRE(ipsim::hex64(ipsim::fnv1a64(content)) == checksum.get<std::string>());
  }
  auto events = slurp(out / "events_0.csv");
  REQUIRE(events.find("# seed=4 replica=0 config=fnv1a:") != std::string::npos);
  REQUIRE(events.find("time,site,from,to") != std::string::npos);
}

TEST_CASE("exact subcommand verifies bounds on a cycle") {
  fs::path out = work_dir() / "exact_ok";
  fs::remove_all(out);
  auto cfg = write_config("exact_ok.toml", R"(
[graph]
type = "torus"
dim = 1
side = 8

[model]
type = "contact"
lambda = 0.5
delta = 1.0

[init]
state = "1"

[sim]
t_end = 0.5

[analysis]
times = [0.25, 0.5]

[output]
directory = ")" + out.string() + "\"\n");
  auto res = run_command("exact --config " + cfg.string());
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.output.find("covariance bound pass") != std::string::npos);

  auto cov = slurp(out / "cov_bound.csv");
  REQUIRE(cov.find("d,s,t,cov,bound,pass") != std::string::npos);
  REQUIRE(cov.find(",0\n") == std::string::npos);  // no failing rows (pass column is last)
  auto smooth = slurp(out / "smooth_bound.csv");
  REQUIRE(smooth.find("site,lhs,rhs,pass") != std::string::npos);
}

TEST_CASE("clt-check and variance-scan produce their artifact sets") {
  fs::path out = work_dir() / "cltvs";
  fs::remove_all(out);
  auto cfg = write_config("cltvs.toml", R"(
[graph]
type = "torus"
dim = 2
side = 8

[model]
type = "independent-flip"
lambda = 1.0

[init]
state = "0"

[sim]
t_end = 1.0
grid = [0.0, 0.5, 1.0]
replicas = 120
seed = 9

[analysis]
times = [0.5, 1.0]
significance = 0.05
ladder = [4, 8]
ell = 2

[output]
directory = ")" + out.string() + "\"\n");

  auto res = run_command("clt-check --config " + cfg.string());
  REQUIRE(res.exit_code == 0);
  for (const char* name : {"moments.csv", "gamma.csv", "clt.csv", "qq.csv"})
    REQUIRE(fs::exists(out / name));
  REQUIRE(slurp(out / "clt.csv").find("t,w,ks,ad,crit,pass") != std::string::npos);
  REQUIRE(slurp(out / "gamma.csv").find("s,t,w,wp,cov,se") != std::string::npos);

  auto res2 = run_command("variance-scan --config " + cfg.string());
  REQUIRE(res2.exit_code == 0);
  auto varratio = slurp(out / "varratio.csv");
  REQUIRE(varratio.find("Bn,ratio,partial_sum,gap,se,boundary_frac") != std::string::npos);
  REQUIRE(varratio.find("slc_audit=pass") != std::string::npos);
}

TEST_CASE("hitting pipeline is byte-identical across reruns") {
  fs::path out_a = work_dir() / "hit_a";
  fs::path out_b = work_dir() / "hit_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  auto cfg_a = write_config("hit_a.toml", hitting_config_for(out_a));
  auto cfg_b = write_config("hit_b.toml", hitting_config_for(out_b));

  auto res_a = run_command("hitting --config " + cfg_a.string() + " --threads 1");
  // thread count via the environment default; must not change the bytes
  auto res_b = run_command("hitting --config " + cfg_b.string(), "IPSIM_THREADS=4 ");
  REQUIRE(res_a.exit_code == 0);
  REQUIRE(res_b.exit_code == 0);

  for (const char* name : {"hitting.csv", "hitting_summary.csv", "moments.csv"})
    REQUIRE(slurp(out_a / name) == slurp(out_b / name));

  // seed override must change the statistical artifacts
  fs::path out_c = work_dir() / "hit_c";
  fs::remove_all(out_c);
  auto res_c = run_command("hitting --config " + cfg_a.string() + " --out " + out_c.string() +
                           " --seed 999");
  REQUIRE(res_c.exit_code == 0);
  REQUIRE(slurp(out_a / "hitting.csv") != slurp(out_c / "hitting.csv"));
}
