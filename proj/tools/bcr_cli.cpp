// bcr: train, evaluate, run benchmark matrices and report.
//
// Exit codes: 0 success, 1 other failure, 2 bad configuration or usage,
// 3 training divergence. Failures print one line:
//   error: kind=<kind> message="<text>"

#include "bcr/errors.hpp"
#include "bcr/harness/config.hpp"
#include "bcr/harness/harness.hpp"
#include "bcr/harness/selftest.hpp"
#include "bcr/nn/checkpoint.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << "error: kind=" << kind << " message=\"" << escape(message) << "\"\n";
  if (kind == "config" || kind == "usage") return 2;
  if (kind == "divergence") return 3;
  return 1;
}

std::filesystem::path output_root(const std::string& flag, const bcr::harness::ExperimentConfig& c) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BCR_OUTPUT_ROOT"); env && *env) return env;
  return c.output_dir;
}

bcr::harness::ExperimentConfig build_config(const std::string& name,
                                            const std::vector<std::string>& overrides,
                                            const std::vector<std::uint64_t>& seeds) {
  auto c = bcr::harness::load_config(name);
  for (const auto& o : overrides) bcr::harness::apply_override(c, o);
  if (!seeds.empty()) c.seeds = seeds;
  c.validate();
  return c;
}

void print_breadcrumb(const bcr::harness::ExperimentConfig& c) {
  for (auto s : c.seeds) {
    std::cout << "run " << c.name << " config_hash="
              << bcr::harness::config_hash(bcr::harness::resolve_for_seed(c, s)) << " seed=" << s
              << '\n';
  }
  std::cout.flush();
}

int report_failures(const std::vector<bcr::harness::RunArtifact>& runs) {
  int code = 0;
  for (const auto& r : runs) {
    if (r.ok) continue;
    int c = fail(r.error_kind.empty() ? "internal" : r.error_kind,
                 r.name + " seed " + std::to_string(r.seed) + ": " + r.error);
    if (code == 0 || c == 3) code = c;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"Behavior- and context-aware reward PPO workbench"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::string out;
  int workers = 0;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd, bool many_configs) {
    if (many_configs) cmd->add_option("--config", configs, "Config files or preset names")->required();
    else cmd->add_option("--config", configs, "Config file or preset name")->required()->expected(1);
    cmd->add_option("--seed,--seeds", seeds, "Seed(s); overrides the config")->delimiter(',');
    cmd->add_option("--override", overrides, "key.path=value (repeatable)");
    cmd->add_option("--out", out, "Output root (default: $BCR_OUTPUT_ROOT or config output_dir)");
    cmd->add_flag("-q,--quiet", quiet, "No per-epoch progress");
  };

  auto* train = app.add_subcommand("train", "Train one config for its seeds");
  add_common(train, false);
  train->add_option("--workers", workers, "Parallel runs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, false);
  std::string checkpoint;
  int episodes = 0;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes (default: config eval.episodes)");

  auto* matrix = app.add_subcommand("matrix", "Run several configs x seeds and report");
  add_common(matrix, true);
  matrix->add_option("--workers", workers, "Parallel runs");
  std::string reference = "bcr";
  matrix->add_option("--reference", reference, "Algorithm the others are compared against");

  auto* report = app.add_subcommand("report", "Aggregate run artifacts into a comparison report");
  std::string in_dir;
  report->add_option("--in", in_dir, "Directory holding run artifacts")->required();
  report->add_option("--out", out, "Where to write the report (default: --in)");
  report->add_option("--reference", reference, "Reference algorithm");
  int window = 10;
  double threshold = 0.9;
  double final_fraction = 0.1;
  std::string conv_reference = "full-curve";
  report->add_option("--window", window, "Moving-average window");
  report->add_option("--threshold", threshold, "Plateau threshold");
  report->add_option("--final-fraction", final_fraction, "Trailing fraction of epochs");
  report->add_option("--convergence-reference", conv_reference, "full-curve | running-max");

  auto* selftest = app.add_subcommand("selftest", "Check the intrinsic-reward worked example and properties");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (selftest->parsed()) {
      bool all = true;
      for (const auto& c : bcr::harness::run_selftest()) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        all = all && c.pass;
      }
      std::cout << (all ? "PASS" : "FAIL") << '\n';
      return all ? 0 : 1;
    }

    auto progress = [&](const std::string& run, const bcr::ppo::EpochMetrics& m) {
      if (quiet) return;
      std::fprintf(stderr, "%s epoch %d sparse %.2f stage %.2f k=(%.3f, %.3f, %.3f)\n", run.c_str(),
                   m.epoch, m.mean_sparse, m.mean_stage, m.k_ext, m.k_ai, m.k_human);
    };

    if (train->parsed()) {
      auto c = build_config(configs.front(), overrides, seeds);
      print_breadcrumb(c);
      bcr::harness::RunOptions opts;
      opts.output_root = output_root(out, c);
      opts.stop = &g_stop;
      opts.on_epoch = progress;
      auto runs = bcr::harness::run_matrix({c}, opts, workers > 0 ? workers : c.workers);
      for (const auto& r : runs) {
        if (!r.ok) continue;
        std::cout << "done " << r.name << " seed=" << r.seed << " epochs=" << r.metrics.size();
        if (r.eval) std::cout << " eval_mean_sparse=" << r.eval->mean_sparse;
        if (r.interrupted) std::cout << " (interrupted)";
        std::cout << " dir=" << r.dir.string() << '\n';
      }
      return report_failures(runs);
    }

    if (eval->parsed()) {
      auto c = build_config(configs.front(), overrides, seeds);
      print_breadcrumb(c);
      auto params = bcr::nn::read_checkpoint(checkpoint);
      const int n = episodes > 0 ? episodes : c.eval_episodes;
      for (auto s : c.seeds) {
        auto resolved = bcr::harness::resolve_for_seed(c, s);
        auto environment = bcr::harness::make_environment(resolved, s);
        auto human = bcr::harness::make_human(resolved, *environment, s);
        auto r = bcr::ppo::evaluate(*environment, human, params, n, s, resolved.bcr.lambda_sparse);
        std::printf("{\"seed\":%llu,\"episodes\":%d,\"mean_sparse\":%.6f,\"std_sparse\":%.6f}\n",
                    static_cast<unsigned long long>(s), r.episodes, r.mean_sparse, r.std_sparse);
      }
      return 0;
    }

    if (matrix->parsed()) {
      std::vector<bcr::harness::ExperimentConfig> cs;
      for (const auto& name : configs) cs.push_back(build_config(name, overrides, seeds));
      for (const auto& c : cs) print_breadcrumb(c);
      bcr::harness::RunOptions opts;
      opts.output_root = output_root(out, cs.front());
      opts.stop = &g_stop;
      opts.on_epoch = progress;
      auto runs = bcr::harness::run_matrix(cs, opts, workers > 0 ? workers : cs.front().workers);
      auto rep = bcr::harness::compare_artifacts(runs, reference, cs.front().report);
      bcr::harness::write_report(rep, opts.output_root);
      std::cout << bcr::harness::report_text(rep);
      return report_failures(runs);
    }

    if (report->parsed()) {
      bcr::harness::ReportSettings settings;
      settings.window = window;
      settings.threshold = threshold;
      settings.final_fraction = final_fraction;
      settings.reference = bcr::harness::convergence_reference_from_string(conv_reference);
      auto runs = bcr::harness::load_artifacts(in_dir);
      auto rep = bcr::harness::compare_artifacts(runs, reference, settings);
      bcr::harness::write_report(rep, out.empty() ? in_dir : out);
      std::cout << bcr::harness::report_text(rep);
      return 0;
    }
  } catch (const bcr::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
