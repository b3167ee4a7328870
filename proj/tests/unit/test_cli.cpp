#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sadl/config.hpp"
#include "sadl/error.hpp"
#include "sadl/experiment.hpp"
#include "sadl/svg.hpp"

using namespace sadl;
namespace fs = std::filesystem;

namespace {
const char* kTiny = R"(# tiny pipeline
[schedule]
A = 1.0
B = 0.0
beta = 1.0
N = 100

[model]
kind = linear_gaussian
A_mat = [[1.0]]
root = [0.0]
Sigma = [[1.0]]
theta0 = [1.0]

[sim]
n_paths = 20
T = 0.2
seed = 7
processes = [theta, U, V, X]

[parametrix]
x_min = -5
x_max = 5
n = 64
r_max = 2
n_time = 8
t = 0.2
chain = true

[metrics]
N_sweep = [100, 200, 400]
n_paths = 2000
tau_m = 2
bootstrap = 4
kde_n = 128
)";

std::string expect_error(const std::string& text) {
  try {
    load_experiment(ConfigFile::parse(text, "t.cfg"));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& a, const std::string& b) {
  const auto p = s.find(a);
  REQUIRE(p != std::string::npos);
  return s.replace(p, a.size(), b);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("config parsing") {
  auto cf = ConfigFile::parse(kTiny, "t.cfg");
  CHECK(cf.line_of("schedule.beta") == 5);
  CHECK(cf.get_double("schedule.A", 0.0) == 1.0);
  CHECK(cf.get_strings("sim.processes", {}) == std::vector<std::string>{"theta", "U", "V", "X"});
  CHECK(cf.get_matrix("model.A_mat") == std::vector<std::vector<double>>{{1.0}});
  auto c = load_experiment(cf);
  CHECK(c.N == 100);
  CHECK(c.N_sweep == std::vector<std::int64_t>{100, 200, 400});
  CHECK(c.theta0(0) == 1.0);
  CHECK(c.model().name == "linear_gaussian");
}

TEST_CASE("config errors cite the line") {
  auto e = expect_error(replace(kTiny, "beta = 1.0", "beta = 1.5"));
  CHECK(e.find("t.cfg:5:") != std::string::npos);
  CHECK(e.find("(1/2, 1]") != std::string::npos);

  e = expect_error(replace(kTiny, "N = 100", "N = 1"));
  CHECK(e.find("t.cfg:6:") != std::string::npos);

  e = expect_error(replace(kTiny, "kind = linear_gaussian", "kind = quadratic"));
  CHECK(e.find("t.cfg:9:") != std::string::npos);

  e = expect_error(replace(kTiny, "tau_m = 2", "tau_m = 2\nbogus = 3"));
  CHECK(e.find("bogus") != std::string::npos);
  CHECK(e.find("t.cfg:34:") != std::string::npos);

  e = expect_error(replace(kTiny, "seed = 7", "seed = 7\nseed = 8"));
  CHECK(e.find("t.cfg:19:") != std::string::npos);

  e = expect_error(replace(kTiny, "N_sweep = [100, 200, 400]", "N_sweep = [1, 200, 400]"));
  CHECK(e.find("N_sweep") != std::string::npos);

  e = expect_error(replace(kTiny, "A = 1.0", "A = oops"));
  CHECK(e.find("t.cfg:3:") != std::string::npos);

  e = expect_error(replace(kTiny, "Sigma = [[1.0]]", "Sigma = [[-1.0]]"));
  CHECK(e.find("t.cfg:12:") != std::string::npos);
}

TEST_CASE("config hash") {
  CHECK(config_hash(kTiny) == config_hash(kTiny));
  CHECK(config_hash(kTiny) != config_hash(std::string(kTiny) + "#"));
  CHECK(config_hash("").size() == 16);
}

TEST_CASE("unwritable output directory") {
  auto c = load_experiment(ConfigFile::parse(kTiny, "t.cfg"));
  CHECK_THROWS_AS(RunContext(c, "/proc/self/no_such_dir/x"), ValidationError);
}

TEST_CASE("svg output") {
  PlotSpec spec;
  spec.title = "t";
  spec.log_x = spec.log_y = true;
  auto s = svg_plot(spec, {{"a", {1, 10, 100}, {1, 0.1, 0.01}, false}, {"b", {1, 10}, {0.0, 2.0}, true}});
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("polyline") != std::string::npos);
}

TEST_CASE("pipeline run: manifest completeness and determinism") {
  auto c = load_experiment(ConfigFile::parse(kTiny, "t.cfg"));
  const fs::path d1 = fs::temp_directory_path() / "sadl_cli_test_1";
  const fs::path d2 = fs::temp_directory_path() / "sadl_cli_test_2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  for (const auto& d : {d1, d2}) {
    RunContext ctx(c, d.string());
    run_pipeline(ctx);
    write_manifest(ctx, "run");
  }
  auto man = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  CHECK(man["config_hash"] == config_hash(kTiny));
  std::set<std::string> listed;
  for (auto& a : man["artifacts"]) {
    listed.insert(a["file"].get<std::string>());
    CHECK_FALSE(a["stage"].get<std::string>().empty());
  }
  std::size_t csv = 0;
  for (auto& e : fs::directory_iterator(d1)) {
    const std::string name = e.path().filename().string();
    CHECK_MESSAGE(listed.count(name), name);
    if (e.path().extension() == ".csv") {
      ++csv;
      CHECK_MESSAGE(slurp(e.path()) == slurp(d2 / name), name);
    }
  }
  CHECK(csv >= 10);
  const std::string rates = slurp(d1 / "rates.csv");
  CHECK(rates.rfind("N,distance_kind,value,stderr\n", 0) == 0);
  for (const char* n : {"\n100,", "\n200,", "\n400,"}) CHECK(rates.find(n) != std::string::npos);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
