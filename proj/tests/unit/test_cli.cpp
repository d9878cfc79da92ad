#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "app/app.hpp"
#include "mombayes/stats.hpp"

using namespace mombayes;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("mombayes_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& file, const std::string& text) const {
    std::ofstream(dir / file) << text;
    return dir / file;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(MOMBAYES_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool has_tmp(const fs::path& dir) {
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ".tmp") return true;
  return false;
}

}  // namespace

TEST_CASE("csv with a response and one feature") {
  Scratch s("basic");
  const auto p = s.write("d.csv", "y,z1\n1,2\n3,4\n5,6.5\n");
  const auto raw = app::load_csv(p, "y", {"z1"});
  CHECK(raw.rows() == 3);
  CHECK(raw.features() == 1);
  CHECK(raw.columns[1][2] == 6.5);
  const Dataset d = app::to_dataset(raw);
  CHECK(d.size() == 3);
  CHECK(d.covariate_dim() == 2);
  CHECK(d[0].covariates[0] == 1.0);
  CHECK(d[2].covariates[1] == 6.5);

  const auto only = app::load_csv(p, "", {});
  CHECK(only.names == std::vector<std::string>{"y"});
  CHECK(app::to_dataset(only).covariate_dim() == 0);
}

TEST_CASE("csv errors") {
  Scratch s("errors");
  const auto bad = s.write("bad.csv", "y,z1\n1,2\n3,abc\n");
  try {
    app::load_csv(bad, "y", {"z1"});
    FAIL("expected a parse error");
  } catch (const app::ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == "z1");
  }
  const auto ragged = s.write("ragged.csv", "y,z1\n1,2\n3\n");
  CHECK_THROWS_AS(app::load_csv(ragged, "y", {"z1"}), app::ParseError);
  const auto empty = s.write("empty.csv", "y,z1\n");
  CHECK_THROWS_AS(app::load_csv(empty, "y", {}), app::ParseError);
  const auto nan = s.write("nan.csv", "y\nnan\n");
  CHECK_THROWS_AS(app::load_csv(nan, "y", {}), app::ParseError);

  CHECK_THROWS_AS(app::load_csv(bad, "y", {"z2"}), app::MissingColumn);
  CHECK_THROWS_AS(app::load_csv(s.dir / "nope.csv", "y", {}), app::FileNotFound);
  CHECK_THROWS_AS(app::load_csv(s.dir, "y", {}), app::FileNotFound);
}

TEST_CASE("semicolons and quoted headers") {
  Scratch s("semicolon");
  const auto p = s.write("w.csv",
                         "\"fixed acidity\";\"volatile acidity\";\"quality\"\n"
                         "7;0.27;6\n6.3;0.3;5\n8.1;0.28;6\n");
  const auto raw = app::load_csv(p, "quality", {"fixed.acidity", "volatile acidity"});
  CHECK(raw.names == std::vector<std::string>{"quality", "fixed.acidity", "volatile.acidity"});
  CHECK(raw.columns[0] == std::vector<double>{6, 5, 6});
  CHECK(raw.columns[1][1] == 6.3);
}

TEST_CASE("standardize") {
  app::RawData raw;
  raw.names = {"y", "a", "c"};
  raw.columns = {{1, 2, 3, 10}, {5, -1, 2, 0.5}, {4, 4, 4, 4}};
  try {
    app::standardize(raw);
    FAIL("expected zero variance");
  } catch (const app::ZeroVariance& e) {
    CHECK(e.column() == "c");
  }
  raw.names.pop_back();
  raw.columns.pop_back();
  app::Transform t;
  const auto z = app::standardize(raw, &t);
  for (const auto& col : z.columns) {
    CHECK(std::abs(mean(col)) <= 1e-12);
    CHECK(std::sqrt(variance(col)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(t.mean[0] == 4.0);
  CHECK(t.names == raw.names);
  const auto again = app::standardize(z);
  for (std::size_t j = 0; j < z.columns.size(); ++j)
    for (std::size_t i = 0; i < z.columns[j].size(); ++i)
      CHECK(std::abs(again.columns[j][i] - z.columns[j][i]) <= 1e-12);
}

TEST_CASE("draws round trip") {
  Scratch s("roundtrip");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1e3);
  std::vector<Chain> chains(3);
  for (auto& c : chains) {
    c.draws.resize(40, 2);
    c.log_density.resize(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
      c.draws(i, 0) = z(rng);
      c.draws(i, 1) = z(rng) * 1e-9;
      c.log_density(i) = -std::abs(z(rng));
    }
  }
  const auto path = s.dir / "draws.csv";
  app::write_draws_csv(path, chains);
  CHECK(slurp(path).rfind("chain,iter,theta_0,theta_1,log_kernel\n", 0) == 0);
  const auto back = app::read_draws_csv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(back[c].draws == chains[c].draws);
    CHECK(back[c].log_density == chains[c].log_density);
  }
  CHECK_FALSE(has_tmp(s.dir));
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(app::format_double(0.1) == "0.1");
  CHECK(app::format_double(-30.0) == "-30");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(app::format_double(x)) == x);
}

TEST_CASE("fit is deterministic and writes the documented files") {
  Scratch s("fit");
  app::RunConfig sim;
  sim.command = "simulate";
  sim.model_args = {{"n", 400}, {"theta", 1.0}};
  sim.seed = 3;
  sim.out = s.dir.string();
  REQUIRE(app::run(sim) == 0);
  const auto data = s.dir / "data.csv";
  REQUIRE(fs::exists(data));

  app::RunConfig fit;
  fit.command = "fit";
  fit.data = data.string();
  fit.k = 40;
  fit.seed = 7;
  fit.sampler.chains = 2;
  fit.sampler.draws = 400;
  fit.sampler.warmup = 200;
  fit.out = (s.dir / "a").string();
  REQUIRE(app::run(fit) == 0);
  fit.out = (s.dir / "b").string();
  fit.sampler.threads = 1;
  REQUIRE(app::run(fit) == 0);
  CHECK(slurp(s.dir / "a" / "draws.csv") == slurp(s.dir / "b" / "draws.csv"));
  CHECK(slurp(s.dir / "a" / "summary.txt") == slurp(s.dir / "b" / "summary.txt"));
  CHECK(fs::exists(s.dir / "a" / "hist_theta_0.csv"));
  const std::string summary = slurp(s.dir / "a" / "summary.txt");
  for (const char* key : {"theta_0.map = ", "theta_0.mean = ", "theta_0.sd = ", "theta_0.ci_low = ",
                          "theta_0.ci_high = ", "theta_0.ess = ", "theta_0.rhat = ", "k = 40\n"})
    CHECK(summary.find(key) != std::string::npos);
  CHECK(app::read_draws_csv(s.dir / "a" / "draws.csv").size() == 2);
  CHECK_FALSE(has_tmp(s.dir));

  // Errors leave no output behind.
  const auto bad = s.write("bad.csv", "x\n1\noops\n");
  fit.data = bad.string();
  fit.out = (s.dir / "c").string();
  CHECK(app::run(fit) == 1);
  CHECK_FALSE(fs::exists(s.dir / "c"));
}

TEST_CASE("command-line exit codes and config files") {
  Scratch s("exe");
  CHECK(cli("--help") == 0);
  CHECK(cli("fit --model gaussian-location") == 2);
  CHECK(cli("experiment wine") == 2);
  CHECK(cli("experiment nonsense") == 2);
  CHECK(cli("fit --data " + (s.dir / "missing.csv").string() + " --out " + s.dir.string()) == 1);

  const std::string out = (s.dir / "sim").string();
  REQUIRE(cli("simulate --model-arg n=300 --seed 2 --out " + out) == 0);
  const std::string data = out + "/data.csv";
  const auto cfg = s.write("run.cfg", "k = 20\ndraws = 300\nwarmup = 200\nchains = 2\n");
  const std::string base = "fit --data " + data + " --config " + cfg.string();
  REQUIRE(cli(base + " --out " + (s.dir / "one").string()) == 0);
  CHECK(slurp(s.dir / "one" / "summary.txt").find("k = 20\n") != std::string::npos);
  REQUIRE(cli(base + " --k 25 --out " + (s.dir / "two").string()) == 0);
  CHECK(slurp(s.dir / "two" / "summary.txt").find("k = 25\n") != std::string::npos);
  CHECK(slurp(s.dir / "two" / "summary.txt").find("draws = 600\n") != std::string::npos);
}
