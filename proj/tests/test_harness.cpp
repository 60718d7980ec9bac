#include "doctest.h"

#include "bcr/errors.hpp"
#include "bcr/harness/config.hpp"
#include "bcr/harness/harness.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace bcr;
using namespace bcr::harness;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& preset_name) {
  auto c = preset(preset_name);
  c.env.horizon = 30;
  c.training.max_steps_per_episode = 30;
  c.training.epochs = 3;
  c.training.minibatch_size = 16;
  c.training.hidden = {16};
  c.training.checkpoint_interval = 0;
  c.eval_episodes = 5;
  c.seeds = {1, 2};
  return c;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("bcr_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// First index whose trailing mean reaches the level, by direct summation.
int scan_oracle(const std::vector<double>& c, int window, double threshold) {
  std::vector<double> ma;
  for (std::size_t i = window - 1; i < c.size(); ++i) {
    double s = 0;
    for (int k = 0; k < window; ++k) s += c[i - k];
    ma.push_back(s / window);
  }
  double peak = *std::max_element(ma.begin(), ma.end());
  double level = peak - (1 - threshold) * std::abs(peak);
  for (std::size_t i = 0; i < ma.size(); ++i)
    if (ma[i] >= level) return static_cast<int>(i) + window - 1;
  return -1;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config json round trip and strictness") {
  for (const auto& name : preset_names()) {
    auto c = preset(name);
    CHECK_NOTHROW(c.validate());
    auto back = from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(to_json(back).dump() == to_json(c).dump());
    CHECK(config_hash(back) == config_hash(c));
  }
  auto j = nlohmann::json::parse(to_json(preset("exploration_bcr")).dump());
  j["training"]["epochz"] = 4;
  CHECK_THROWS_WITH_AS(from_json(j), doctest::Contains("training.epochz"), ConfigError);
  auto k = nlohmann::json::parse(to_json(preset("exploration_bcr")).dump());
  k["training"]["epochs"] = "many";
  CHECK_THROWS_AS(from_json(k), ConfigError);
  CHECK_THROWS_AS(preset("exploration_dqn"), ConfigError);
}

TEST_CASE("overrides") {
  auto c = preset("exploration_bcr");
  apply_override(c, "training.epochs=12");
  CHECK(c.training.epochs == 12);
  apply_override(c, "bcr.fade.mode=exponential");
  CHECK(c.bcr.fade.mode == reward::FadeMode::kExponential);
  apply_override(c, "seeds=[7,8]");
  CHECK(c.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK_THROWS_WITH_AS(apply_override(c, "training.nope=1"), doctest::Contains("training.nope"),
                       ConfigError);
  CHECK_THROWS_AS(apply_override(c, "training.epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "training.epochs=-3"), ConfigError);
}

TEST_CASE("config hash follows every field") {
  const auto base = preset("exploration_bcr");
  const auto h = config_hash(base);
  CHECK(h.size() == 16);
  std::vector<std::string> edits = {"training.epochs=301",  "bcr.lambda_human=0.03",
                                    "env.horizon=401",      "human.period=9",
                                    "report.window=11",     "seeds=[1,2,3]",
                                    "env.exploration.revisit=-0.25", "name=\"other\""};
  for (const auto& e : edits) {
    auto c = base;
    apply_override(c, e);
    CHECK_MESSAGE(config_hash(c) != h, e);
  }
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("presets") {
  auto e = preset("exploration_bcr-no-intrinsic");
  CHECK(e.env.id == "exploration");
  CHECK(e.algorithm == ppo::Algorithm::kBcrNoIntrinsic);
  CHECK(reward_plan(e).bcr.lambda_ai == 0.0);
  CHECK(reward_plan(e).bcr.lambda_human == 0.0);
  auto k = preset("kitchen_causal");
  CHECK(k.env.id == "mini-kitchen");
  CHECK(k.human.kind == human::HumanKind::kKitchenScripted);
  auto b = preset("exploration_bcr");
  CHECK(b.bcr.lambda_ai == 1.0);
  CHECK(b.bcr.lambda_human == 0.02);
  CHECK(b.bcr.lambda_softmax == 3.0);
  CHECK(b.human.period == 10);
  auto r = resolve_for_seed(b, 4);
  CHECK(r.seeds == std::vector<std::uint64_t>{4});
  CHECK(r.bcr.fade.horizon_steps == double(b.training.epochs) * b.training.steps_per_epoch());
}

TEST_CASE("aggregate") {
  auto two = aggregate("x", std::vector<std::vector<double>>{{10, 10, 10}, {20, 20, 20}});
  for (int i = 0; i < 3; ++i) {
    CHECK(two.mean[i] == 15.0);
    CHECK(two.std[i] == Approx(7.0710678).epsilon(1e-7));
  }
  auto one = aggregate("x", std::vector<std::vector<double>>{{1, 2, 3}});
  CHECK(one.std == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(aggregate("x", std::vector<std::vector<double>>{}), ContractError);
  CHECK_THROWS_AS(aggregate("x", std::vector<std::vector<double>>{{1, 2}, {1}}), ContractError);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(5, 4);
  std::vector<std::vector<double>> curves(5, std::vector<double>(40));
  for (auto& c : curves)
    for (double& v : c) v = nd(rng);
  auto agg = aggregate("x", curves);
  for (int e = 0; e < 40; ++e) {
    double mean = 0, m2 = 0;
    int n = 0;
    for (const auto& c : curves) {
      ++n;
      double d = c[e] - mean;
      mean += d / n;
      m2 += d * (c[e] - mean);
    }
    CHECK(std::abs(agg.mean[e] - mean) < 1e-9);
    CHECK(std::abs(agg.std[e] - std::sqrt(m2 / (n - 1))) < 1e-9);
  }
}

TEST_CASE("convergence detection") {
  std::vector<double> flat(30, 4.0);
  CHECK(detect_convergence(flat) == 9);
  std::vector<double> ramp(100);
  for (int i = 0; i < 100; ++i) ramp[i] = i * 100.0 / 99.0;
  CHECK(detect_convergence(ramp) == scan_oracle(ramp, 10, 0.9));
  std::vector<double> dip(60, 0.0);
  for (int i = 20; i < 35; ++i) dip[i] = 50.0;
  for (int i = 35; i < 60; ++i) dip[i] = 5.0;
  CHECK(detect_convergence(dip) == scan_oracle(dip, 10, 0.9));
  CHECK(detect_convergence(dip) == 28);
  std::vector<double> neg(40);
  for (int i = 0; i < 40; ++i) neg[i] = -40.0 + i;
  CHECK(detect_convergence(neg) == scan_oracle(neg, 10, 0.9));
  CHECK_THROWS_AS(detect_convergence(std::vector<double>(5, 1.0)), ContractError);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 30);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> c(80);
    for (double& v : c) v = u(rng);
    CHECK(detect_convergence(c) == scan_oracle(c, 10, 0.9));
  }
  // Running maximum: the first defined moving average is its own reference.
  CHECK(detect_convergence(ramp, 10, 0.9, ConvergenceReference::kRunningMax) == 9);
  CHECK(final_window_length(300, 0.1) == 30);
  CHECK(final_window_length(5, 0.1) == 1);
  auto ma = moving_average(std::vector<double>{1, 2, 3, 4}, 2);
  CHECK(ma[1] == 1.5);
  CHECK(ma[3] == 3.5);
}

TEST_CASE("uplift and efficiency") {
  CHECK(*uplift_percent(12, 10) == Approx(20.0));
  CHECK(*efficiency_gain_percent(130, 210) == Approx(38.095).epsilon(1e-4));
  CHECK(*uplift_percent(7, 7) == 0.0);
  CHECK(*efficiency_gain_percent(50, 50) == 0.0);
  CHECK_FALSE(uplift_percent(3, 0).has_value());

  ReportSettings rs;
  std::vector<double> c(50);
  for (int i = 0; i < 50; ++i) c[i] = std::min(i, 20);
  auto a = aggregate("bcr", std::vector<std::vector<double>>{c, c});
  auto b = aggregate("ppo-baseline", std::vector<std::vector<double>>{c, c});
  auto rep = compare_report({a, b}, "bcr", rs);
  REQUIRE(rep.find("ppo-baseline"));
  CHECK(*rep.find("ppo-baseline")->uplift_pct == 0.0);
  CHECK(*rep.find("ppo-baseline")->efficiency_gain_pct == 0.0);
  CHECK(rep.find("bcr")->final_mean == 20.0);
  CHECK(rep.find("bcr")->final_per_seed == std::vector<double>{20.0, 20.0});
  CHECK(rep.find("nope") == nullptr);
}

TEST_CASE("run matrix, determinism, artifacts and report idempotence") {
  auto root = scratch("matrix");
  RunOptions opts;
  opts.output_root = root;
  std::vector<ExperimentConfig> cfgs = {tiny("exploration_bcr"), tiny("exploration_ppo-baseline")};
  auto arts = run_matrix(cfgs, opts, 2);
  REQUIRE(arts.size() == 4);
  for (const auto& a : arts) {
    CHECK(a.ok);
    CHECK(a.metrics.size() == 3);
    REQUIRE(a.eval.has_value());
    CHECK(a.eval->episodes == 5);
    CHECK(a.eval->per_episode.size() == 5);
    CHECK(fs::exists(a.dir / "checkpoints/final.ckpt"));
    CHECK(fs::exists(a.dir / "config.json"));
  }
  CHECK(arts[0].name == "exploration_bcr");
  CHECK(arts[0].seed == 1);
  CHECK(arts[3].name == "exploration_ppo-baseline");
  CHECK(arts[3].seed == 2);
  CHECK(arts[0].config_hash == config_hash(resolve_for_seed(cfgs[0], 1)));

  auto again = run_matrix(cfgs, RunOptions{scratch("matrix2"), nullptr, {}, true}, 1);
  for (std::size_t i = 0; i < arts.size(); ++i) {
    CHECK(slurp(again[i].dir / "metrics.jsonl").size() > 0);
    auto x = arts[i].metrics, y = again[i].metrics;
    REQUIRE(x.size() == y.size());
    for (std::size_t e = 0; e < x.size(); ++e) {
      x[e].wall_ms = y[e].wall_ms = 0;
      CHECK(ppo::metrics_to_json_line(x[e]) == ppo::metrics_to_json_line(y[e]));
    }
    CHECK(again[i].eval->per_episode == arts[i].eval->per_episode);
  }

  auto loaded = load_artifacts(root);
  REQUIRE(loaded.size() == 4);
  ReportSettings rs;
  rs.window = 2;
  auto rep = compare_artifacts(loaded, "bcr", rs);
  CHECK(rep.rows.front().algorithm == "bcr");
  auto out1 = root / "r1", out2 = root / "r2";
  write_report(rep, out1);
  write_report(compare_artifacts(load_artifacts(root), "bcr", rs), out2);
  for (const char* f : {"report.csv", "report.txt", "plot_data.csv"}) {
    CHECK(slurp(out1 / f) == slurp(out2 / f));
    CHECK(!slurp(out1 / f).empty());
  }
  auto header = slurp(out1 / "plot_data.csv").substr(0, 40);
  CHECK(header.rfind("epoch,bcr_mean,bcr_std", 0) == 0);
  fs::remove_all(root);
  fs::remove_all(fs::temp_directory_path() / "bcr_harness_matrix2");
}

TEST_CASE("a failing run is recorded and the matrix continues") {
  auto root = scratch("fail");
  auto bad = tiny("exploration_bcr");
  bad.name = "broken";
  bad.env.exploration.obstacle_density = 0.6;  // cannot generate a connected layout
  bad.seeds = {1};
  auto good = tiny("exploration_ppo-baseline");
  good.seeds = {1};
  auto arts = run_matrix({bad, good}, RunOptions{root, nullptr, {}, false}, 1);
  REQUIRE(arts.size() == 2);
  CHECK_FALSE(arts[0].ok);
  CHECK(!arts[0].error_kind.empty());
  CHECK(arts[1].ok);
  auto status = nlohmann::json::parse(slurp(arts[0].dir / "run.json"));
  CHECK(status["status"] == "failed");
  fs::remove_all(root);
}

}  // TEST_SUITE
