#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <unistd.h>
#include <sstream>

#include <json.hpp>

#include "arff/cli.hpp"

using namespace arff;
using namespace arff::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("arff_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

const char* kMinimal = R"([target]
kind = bump
dimension = 1
sharpness = 0.5
period = 6
samples = 100

[train]
algorithm = alg2
K = 16
iterations = 2
seed = 4
record_timing = false

[walk]
delta = 0.5

[solver]
lambda1 = 0.01
)";

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
  args.insert(args.begin(), "arff");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int rc = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

}  // namespace

TEST_CASE("edit distance and suggestions") {
  CHECK(edit_distance("lamda1", "lambda1") == 1);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  std::vector<std::string> keys{"lambda1", "lambda2", "cg_rel_tol"};
  CHECK(nearest_key("lamda1", keys) == "lambda1");
}

TEST_CASE("config parse and write round trip") {
  std::istringstream in(kMinimal);
  auto spec = parse_config(in);
  CHECK(spec.kind == TargetKind::Bump);
  CHECK(spec.period.has_value());
  CHECK(spec.train.K == 16);
  CHECK(spec.train.solver.lambda1 == 0.01);
  CHECK(spec.train.algorithm == Algorithm::LatticeWalk);

  spec.train.solver.lambda2 = 1.0 / 3.0;
  spec.sharpness = 0.1 + 0.2;
  std::ostringstream out;
  write_config(spec, out);
  std::istringstream back_in(out.str());
  auto back = parse_config(back_in);
  std::ostringstream again;
  write_config(back, again);
  CHECK(out.str() == again.str());
  CHECK(back.train.solver.lambda2 == spec.train.solver.lambda2);
  CHECK(back.sharpness == spec.sharpness);
}

TEST_CASE("inline comments after values are ignored") {
  std::string text = kMinimal;
  text.replace(text.find("K = 16"), 6, "K = 16   ; frequencies");
  text.replace(text.find("delta = 0.5"), 11, "delta = 0.5 # step");
  std::istringstream in(text);
  auto spec = parse_config(in);
  CHECK(spec.train.K == 16);
  CHECK(spec.train.walk.delta == 0.5);
}

TEST_CASE("config errors are collected with suggestions") {
  std::string text = std::string(kMinimal) + "lamda1 = 2\n\n[wlak]\ndelta = 1\n";
  text.replace(text.find("K = 16"), 6, "K = many");
  std::istringstream in(text);
  try {
    parse_config(in);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lamda1") != std::string::npos);
    CHECK(msg.find("lambda1") != std::string::npos);
    CHECK(msg.find("wlak") != std::string::npos);
    CHECK(msg.find("K") != std::string::npos);
  }
  TempDir t;
  write_text(t.path / "bad.ini", text);
  std::string err;
  CHECK(run_cli({"train", "-c", (t.path / "bad.ini").string(), "-o", (t.path / "o").string()},
                nullptr, &err) == kExitConfig);
  CHECK(err.find("lambda1") != std::string::npos);
  CHECK(run_cli({"train", "-c", (t.path / "none.ini").string(), "-o", (t.path / "o").string()}) ==
        kExitIo);
}

TEST_CASE("exit codes follow the error type") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(SolverError("x", 1, 0.5)) == kExitSolver);
  CHECK(exit_code_for(IoError("x")) == kExitIo);
}

TEST_CASE("minimal train run writes its files and is reproducible") {
  TempDir t;
  write_text(t.path / "c.ini", kMinimal);
  const auto start = std::chrono::steady_clock::now();
  CHECK(run_cli({"train", "-c", (t.path / "c.ini").string(), "-o", (t.path / "a").string()}) == kExitOk);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 5.0);
  for (const char* f : {"history.csv", "model.csv", "metadata.json"}) CHECK(fs::exists(t.path / "a" / f));

  CHECK(run_cli({"train", "-c", (t.path / "c.ini").string(), "-o", (t.path / "b").string()}) == kExitOk);
  CHECK(slurp(t.path / "a" / "history.csv") == slurp(t.path / "b" / "history.csv"));
  CHECK(slurp(t.path / "a" / "model.csv") == slurp(t.path / "b" / "model.csv"));

  std::istringstream hist(slurp(t.path / "a" / "history.csv"));
  CHECK_FALSE(read_history_csv(hist).empty());
  std::istringstream model(slurp(t.path / "a" / "model.csv"));
  CHECK(read_model_csv(model).frequencies.size() == 16);

  auto meta = nlohmann::json::parse(slurp(t.path / "a" / "metadata.json"));
  CHECK(meta["seed"] == 4);
  CHECK(meta.contains("config"));

  // seed override changes the run
  CHECK(run_cli({"train", "-c", (t.path / "c.ini").string(), "-o", (t.path / "s").string(), "--seed",
                 "99"}) == kExitOk);
  CHECK(slurp(t.path / "a" / "history.csv") != slurp(t.path / "s" / "history.csv"));
  CHECK(nlohmann::json::parse(slurp(t.path / "s" / "metadata.json"))["seed"] == 99);
}

TEST_CASE("metadata config replays the run") {
  TempDir t;
  write_text(t.path / "c.ini", kMinimal);
  REQUIRE(run_cli({"train", "-c", (t.path / "c.ini").string(), "-o", (t.path / "a").string()}) == kExitOk);
  auto meta = nlohmann::json::parse(slurp(t.path / "a" / "metadata.json"));
  write_text(t.path / "replay.ini", meta["config"].get<std::string>());
  REQUIRE(run_cli({"train", "-c", (t.path / "replay.ini").string(), "-o", (t.path / "r").string()}) ==
          kExitOk);
  CHECK(slurp(t.path / "a" / "history.csv") == slurp(t.path / "r" / "history.csv"));
}

TEST_CASE("presets") {
  auto names = preset_names();
  for (const char* n : {"test1", "test2", "test5", "test8", "fig_f29", "fig_f27", "fig_alg3"}) {
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }
  CHECK_THROWS_AS(make_preset("test99", Scale::Desk), ConfigError);
  CHECK(parse_scale("desk") == Scale::Desk);
  CHECK_THROWS_AS(parse_scale("huge"), ConfigError);

  auto t2 = make_preset("test2", Scale::Full);
  std::vector<Index> ks;
  for (const auto& p : t2.points)
    if (p.spec.train.algorithm == Algorithm::LatticeWalk) ks.push_back(p.spec.train.K);
  CHECK(ks == std::vector<Index>{312, 625, 1250, 2500, 5000, 10000});
  auto d2 = make_preset("test2", Scale::Desk);
  CHECK(d2.points.size() == 4);

  auto t5 = make_preset("test5", Scale::Desk);
  bool has_zero = false;
  for (const auto& p : t5.points) has_zero |= p.spec.train.cutoff.epsilon == 0.0;
  CHECK(has_zero);

  auto t1 = make_preset("test1", Scale::Full);
  const auto& s = t1.points.front().spec;
  CHECK(s.train.K == 2500);
  CHECK(s.samples == 8000);
  CHECK(s.train.cutoff.epsilon == doctest::Approx(1.0 / 200 / std::sqrt(2500.0)));
  CHECK(s.train.solver.lambda2 == 0.0);
  CHECK(s.noise_std == 0.0);

  // every preset point resolves to a valid training config
  for (const auto& n : names) {
    if (n == "mnist") continue;
    for (const auto& p : make_preset(n, Scale::Desk).points) {
      auto d = prepare_data(p.spec);
      CHECK_NOTHROW(resolve_train_config(p.spec, d.target));
    }
  }
  auto m = mnist_preset(Scale::Desk);
  CHECK(m.delta == 0.005);
}

TEST_CASE("sweep csv round trip and ordering") {
  ExperimentPreset p;
  p.name = "tiny";
  std::istringstream in(kMinimal);
  auto base = parse_config(in);
  for (Index k : {8, 16, 24}) {
    auto s = base;
    s.train.K = k;
    p.points.push_back({"K" + std::to_string(k), s});
  }
  auto serial = run_sweep(p, 1);
  auto parallel = run_sweep(p, 3);
  REQUIRE(serial.size() == 3);
  std::ostringstream a, b;
  write_sweep_csv(serial, a);
  write_sweep_csv(parallel, b);
  CHECK(a.str() == b.str());
  CHECK(serial[1].label == "K16");
  std::istringstream back_in(a.str());
  auto back = read_sweep_csv(back_in);
  std::ostringstream c;
  write_sweep_csv(back, c);
  CHECK(c.str() == a.str());

  std::vector<IterationMetrics> metrics(2);
  metrics[0] = {1, 0.5, 0.25, 3, 0.125, std::nullopt};
  metrics[1] = {2, 0.1, 0.2, 4, std::nullopt, std::nullopt};
  std::ostringstream mo;
  write_metrics_csv(metrics, mo);
  std::istringstream mi(mo.str());
  auto mb = read_metrics_csv(mi);
  REQUIRE(mb.size() == 2);
  CHECK(*mb[0].tv_to_reference == 0.125);
  CHECK_FALSE(mb[1].tv_to_reference.has_value());
}

TEST_CASE("experiment command writes per point files and replays") {
  TempDir t;
  std::string out;
  REQUIRE(run_cli({"experiment", "test5", "--scale", "desk", "-o", (t.path / "e").string(),
                   "--deterministic"},
                  &out) == kExitOk);
  REQUIRE(fs::exists(t.path / "e" / "sweep.csv"));
  std::istringstream sw(slurp(t.path / "e" / "sweep.csv"));
  auto rows = read_sweep_csv(sw);
  REQUIRE(rows.size() == 4);
  const auto dir = t.path / "e" / rows[2].label;
  for (const char* f : {"config.ini", "history.csv", "metrics.csv", "model.csv"}) CHECK(fs::exists(dir / f));
  // replay one point from its config
  REQUIRE(run_cli({"train", "-c", (dir / "config.ini").string(), "-o", (t.path / "r").string(),
                   "--deterministic"}) == kExitOk);
  CHECK(slurp(dir / "history.csv") == slurp(t.path / "r" / "history.csv"));
  CHECK(run_cli({"experiment", "nope", "-o", (t.path / "x").string()}) == kExitConfig);
}

TEST_CASE("oracle summary") {
  RunSpec spec;
  spec.kind = TargetKind::Cosine;
  spec.dimension = 1;
  spec.period = 4.0;
  spec.mode = RealVector::Constant(1, kPi / 2.0 * 3.0);
  FourierCoefficientTable tab;
  auto s = run_oracle(spec, 5, true, &tab);
  std::int64_t n = 3, m = -3;
  CHECK(std::abs(tab.at(std::span(&n, 1)) - Complex(0.5)) < 1e-12);
  CHECK(std::abs(tab.at(std::span(&m, 1)) - Complex(0.5)) < 1e-12);
  CHECK(s.c_pstar == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(s.refine_delta.has_value());
  CHECK(*s.refine_delta < 1e-8);

  spec.kind = TargetKind::Bump;
  spec.direction_mode = RunSpec::Direction::Axis;
  spec.sharpness = 0.5;
  auto b = run_oracle(spec, 20, false, &tab);
  CHECK(std::abs(b.c_pstar - rate_constant(tab, optimal_distribution(tab))) <= 1e-12 * b.c_pstar);
  double l1 = 0.0;
  for (Index i = 0; i < tab.size(); ++i) l1 += std::abs(tab.coefficients(i));
  CHECK(b.c_pstar == doctest::Approx(l1 * l1).epsilon(1e-12));
  CHECK(b.line().find("C_pstar=") != std::string::npos);

  TempDir t;
  std::ostringstream cfg;
  write_config(spec, cfg);
  write_text(t.path / "o.ini", cfg.str());
  std::string out;
  CHECK(run_cli({"oracle", "-c", (t.path / "o.ini").string(), "--nmax", "8", "-o",
                 (t.path / "tab.csv").string()},
                &out) == kExitOk);
  std::istringstream csv(slurp(t.path / "tab.csv"));
  CHECK(read_table_csv(csv, 2.0).size() == 17);
  CHECK(out.find("C_pstar=") != std::string::npos);
}

TEST_CASE("seed from environment") {
  ::setenv("ARFF_SEED", "123", 1);
  CHECK(seed_from_env() == std::optional<std::uint64_t>(123));
  ::setenv("ARFF_SEED", "abc", 1);
  CHECK_THROWS_AS(seed_from_env(), ConfigError);
  ::unsetenv("ARFF_SEED");
  CHECK_FALSE(seed_from_env().has_value());
}
