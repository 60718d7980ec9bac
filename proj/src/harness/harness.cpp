#include "bcr/harness/harness.hpp"

#include "bcr/env/exploration.hpp"
#include "bcr/env/kitchen.hpp"
#include "bcr/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace bcr::harness {

using nlohmann::json;
using nlohmann::ordered_json;

std::unique_ptr<env::Environment> make_environment(const ExperimentConfig& config,
                                                   std::uint64_t seed) {
  if (config.env.id == "exploration") {
    const auto& s = config.env.exploration;
    env::ExplorationConfig c;
    c.width = s.width;
    c.height = s.height;
    c.obstacle_density = s.obstacle_density;
    c.horizon = config.env.horizon;
    if (!s.layout_file.empty()) c.layout = env::load_layout(s.layout_file);
    else if (s.fixed_layout) c.layout = env::generate_layout(seed, s.width, s.height, s.obstacle_density);
    c.rewards.new_cell = s.new_cell;
    c.rewards.revisit = s.revisit;
    c.rewards.invalid = s.invalid;
    return std::make_unique<env::ExplorationEnv>(std::move(c));
  }
  if (config.env.id == "mini-kitchen") {
    const auto& s = config.env.kitchen;
    env::KitchenConfig c;
    if (!s.layout_file.empty()) c.layout = env::load_kitchen_layout(s.layout_file);
    c.horizon = config.env.horizon;
    c.rewards.stage.onion_into_pot = s.onion_into_pot;
    c.rewards.stage.dish_pickup = s.dish_pickup;
    c.rewards.stage.soup_pickup = s.soup_pickup;
    return std::make_unique<env::KitchenEnv>(std::move(c));
  }
  throw ConfigError("unknown environment: " + config.env.id);
}

human::HumanModel make_human(const ExperimentConfig& config, const env::Environment& environment,
                             std::uint64_t seed) {
  human::EnvGeometry g;
  g.env_id = environment.id();
  g.action_count = environment.action_count();
  g.stay_action = environment.stay_action();
  g.observation_size = environment.observation_size();
  if (const auto* e = dynamic_cast<const env::ExplorationEnv*>(&environment)) {
    g.width = e->config().layout ? e->config().layout->width : e->config().width;
    g.height = e->config().layout ? e->config().layout->height : e->config().height;
  } else if (const auto* k = dynamic_cast<const env::KitchenEnv*>(&environment)) {
    g.width = k->config().layout.width;
    g.height = k->config().layout.height;
  }
  human::HumanModelSpec spec = config.human;
  spec.seed = seed;
  return human::HumanModel(spec, g);
}

std::filesystem::path run_directory(const std::filesystem::path& root, const ExperimentConfig& config,
                                    std::uint64_t seed) {
  return root / config.name / ("seed_" + std::to_string(seed));
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string status_of(const RunArtifact& a) {
  if (!a.ok) return a.error_kind.empty() ? "running" : "failed";
  return a.interrupted ? "interrupted" : "ok";
}

void write_run_json(const RunArtifact& a) {
  if (a.dir.empty()) return;
  ordered_json j;
  j["name"] = a.name;
  j["algorithm"] = a.algorithm;
  j["seed"] = a.seed;
  j["config_hash"] = a.config_hash;
  j["status"] = status_of(a);
  j["epochs"] = a.metrics.size();
  if (!a.error_kind.empty()) {
    j["error_kind"] = a.error_kind;
    j["error"] = a.error;
  }
  if (a.eval) {
    j["eval"] = {{"episodes", a.eval->episodes},
                 {"mean_sparse", a.eval->mean_sparse},
                 {"std_sparse", a.eval->std_sparse}};
  }
  write_text(a.dir / "run.json", j.dump(2) + "\n");
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

RunArtifact run_single(const ExperimentConfig& config, std::uint64_t seed,
                       const RunOptions& options) {
  ExperimentConfig resolved = resolve_for_seed(config, seed);
  RunArtifact art;
  art.name = config.name;
  art.algorithm = ppo::to_string(config.algorithm);
  art.seed = seed;
  art.config_hash = config_hash(resolved);
  if (!options.output_root.empty()) {
    art.dir = run_directory(options.output_root, config, seed);
    std::filesystem::create_directories(art.dir);
    save_config(resolved, art.dir / "config.json");
    write_run_json(art);
  }

  try {
    auto environment = make_environment(resolved, seed);
    auto human = make_human(resolved, *environment, seed);
    ppo::TrainOptions topts;
    topts.output_dir = art.dir;
    topts.stop = options.stop;
    if (options.on_epoch) {
      std::string label = config.name + "/seed_" + std::to_string(seed);
      topts.on_epoch = [&options, label](const ppo::EpochMetrics& m) { options.on_epoch(label, m); };
    }
    auto result = ppo::train(*environment, human, training_config(resolved, seed),
                             reward_plan(resolved), topts);
    art.metrics = std::move(result.metrics);
    art.interrupted = result.interrupted;
    if (options.evaluate && resolved.eval_episodes > 0 && !art.interrupted) {
      auto eval_env = make_environment(resolved, seed);
      auto eval_human = make_human(resolved, *eval_env, seed);
      art.eval = ppo::evaluate(*eval_env, eval_human, result.params, resolved.eval_episodes, seed,
                               resolved.bcr.lambda_sparse);
    }
    art.ok = true;
  } catch (const Error& e) {
    art.error_kind = e.kind();
    art.error = e.what();
    if (!art.dir.empty() && std::filesystem::exists(art.dir / "metrics.jsonl")) {
      std::istringstream lines(read_text(art.dir / "metrics.jsonl"));
      std::string line;
      art.metrics.clear();
      while (std::getline(lines, line))
        if (!line.empty()) art.metrics.push_back(ppo::metrics_from_json_line(line));
    }
    write_run_json(art);
    throw;
  }
  write_run_json(art);
  return art;
}

std::vector<RunArtifact> run_matrix(const std::vector<ExperimentConfig>& configs,
                                    const RunOptions& options, int workers) {
  struct Job {
    const ExperimentConfig* config;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : configs)
    for (auto s : c.seeds) jobs.push_back({&c, s});

  std::vector<RunArtifact> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& job = jobs[i];
      RunArtifact& art = out[i];
      art.name = job.config->name;
      art.algorithm = ppo::to_string(job.config->algorithm);
      art.seed = job.seed;
      if (options.stop && options.stop->load()) {
        art.interrupted = true;
        art.error_kind = "interrupted";
        art.error = "not started";
        continue;
      }
      try {
        art = run_single(*job.config, job.seed, options);
      } catch (const Error& e) {
        art.error_kind = e.kind();
        art.error = e.what();
        if (!options.output_root.empty()) {
          art.dir = run_directory(options.output_root, *job.config, job.seed);
          art.config_hash = config_hash(resolve_for_seed(*job.config, job.seed));
        }
      } catch (const std::exception& e) {
        art.error_kind = "internal";
        art.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<RunArtifact> load_artifacts(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    throw ConfigError("artifact directory not found: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "run.json")
      dirs.push_back(entry.path().parent_path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<RunArtifact> out;
  for (const auto& dir : dirs) {
    json j;
    try {
      j = json::parse(read_text(dir / "run.json"));
    } catch (const json::exception& e) {
      throw FormatError("bad run.json in " + dir.string() + ": " + e.what());
    }
    RunArtifact a;
    a.dir = dir;
    a.name = j.value("name", "");
    a.algorithm = j.value("algorithm", "");
    a.seed = j.value("seed", std::uint64_t{0});
    a.config_hash = j.value("config_hash", "");
    std::string status = j.value("status", "");
    a.ok = status == "ok" || status == "interrupted";
    a.interrupted = status == "interrupted";
    a.error_kind = j.value("error_kind", "");
    a.error = j.value("error", "");
    if (j.contains("eval")) {
      ppo::EvalResult ev;
      ev.episodes = j["eval"].value("episodes", 0);
      ev.mean_sparse = j["eval"].value("mean_sparse", 0.0);
      ev.std_sparse = j["eval"].value("std_sparse", 0.0);
      a.eval = ev;
    }
    if (std::filesystem::exists(dir / "metrics.jsonl")) {
      std::istringstream lines(read_text(dir / "metrics.jsonl"));
      std::string line;
      while (std::getline(lines, line))
        if (!line.empty()) a.metrics.push_back(ppo::metrics_from_json_line(line));
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<double> sparse_curve(const RunArtifact& artifact) {
  std::vector<double> c;
  c.reserve(artifact.metrics.size());
  for (const auto& m : artifact.metrics) c.push_back(m.mean_sparse);
  return c;
}

Aggregate aggregate(const std::string& algorithm, const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw ContractError("aggregate needs at least one curve");
  const std::size_t n = curves.front().size();
  for (const auto& c : curves)
    if (c.size() != n) throw ContractError("aggregate: curves differ in epoch count");
  Aggregate a;
  a.algorithm = algorithm;
  a.runs = static_cast<int>(curves.size());
  a.curves = curves;
  a.mean.assign(n, 0.0);
  a.std.assign(n, 0.0);
  std::vector<double> column(curves.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < curves.size(); ++r) column[r] = curves[r][i];
    a.mean[i] = mean_of(column);
    a.std[i] = sample_std(column);
  }
  return a;
}

Aggregate aggregate(const std::string& algorithm, const std::vector<RunArtifact>& artifacts) {
  std::vector<std::vector<double>> curves;
  for (const auto& a : artifacts) curves.push_back(sparse_curve(a));
  return aggregate(algorithm, curves);
}

std::vector<double> moving_average(std::span<const double> curve, int window) {
  if (window < 1) throw ContractError("window must be >= 1");
  std::vector<double> out(curve.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    acc += curve[i];
    if (i >= static_cast<std::size_t>(window)) acc -= curve[i - static_cast<std::size_t>(window)];
    std::size_t count = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = acc / static_cast<double>(count);
  }
  return out;
}

int detect_convergence(std::span<const double> curve, int window, double threshold,
                       ConvergenceReference reference) {
  if (window < 1) throw ContractError("window must be >= 1");
  if (curve.size() < static_cast<std::size_t>(window))
    throw ContractError("curve shorter than the convergence window");
  const std::size_t first = static_cast<std::size_t>(window) - 1;
  std::vector<double> ma(curve.size(), 0.0);
  for (std::size_t i = first; i < curve.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = i + 1 - static_cast<std::size_t>(window); k <= i; ++k) s += curve[k];
    ma[i] = s / window;
  }
  auto level = [threshold](double peak) { return peak - (1.0 - threshold) * std::abs(peak); };
  if (reference == ConvergenceReference::kFullCurve) {
    double peak = *std::max_element(ma.begin() + static_cast<std::ptrdiff_t>(first), ma.end());
    const double target = level(peak);
    for (std::size_t i = first; i < ma.size(); ++i)
      if (ma[i] >= target) return static_cast<int>(i);
    return static_cast<int>(ma.size()) - 1;
  }
  double peak = ma[first];
  for (std::size_t i = first; i < ma.size(); ++i) {
    peak = std::max(peak, ma[i]);
    if (ma[i] >= level(peak)) return static_cast<int>(i);
  }
  return static_cast<int>(ma.size()) - 1;
}

int final_window_length(int epochs, double fraction) {
  if (epochs <= 0) return 0;
  int n = static_cast<int>(std::ceil(fraction * epochs - 1e-9));
  return std::clamp(n, 1, epochs);
}

const AlgorithmSummary* ComparisonReport::find(const std::string& algorithm) const {
  for (const auto& r : rows)
    if (r.algorithm == algorithm) return &r;
  return nullptr;
}

std::optional<double> uplift_percent(double value, double base) {
  if (base == 0.0) return std::nullopt;
  return 100.0 * (value - base) / std::abs(base);
}

std::optional<double> efficiency_gain_percent(double epochs_ref, double epochs_base) {
  if (epochs_base <= 0.0) return std::nullopt;
  return 100.0 * (1.0 - epochs_ref / epochs_base);
}

ComparisonReport compare_report(const std::vector<Aggregate>& aggregates,
                                const std::string& reference, const ReportSettings& settings,
                                const std::vector<std::optional<double>>& evals) {
  ComparisonReport report;
  report.reference = reference;
  report.aggregates = aggregates;
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const auto& agg = aggregates[i];
    AlgorithmSummary s;
    s.algorithm = agg.algorithm;
    s.runs = agg.runs;
    const int n = static_cast<int>(agg.mean.size());
    const int len = final_window_length(n, settings.final_fraction);
    std::vector<double> pooled;
    for (const auto& curve : agg.curves) {
      std::span<const double> tail(curve.data() + (n - len), static_cast<std::size_t>(len));
      s.final_per_seed.push_back(len > 0 ? mean_of(tail) : 0.0);
      pooled.insert(pooled.end(), tail.begin(), tail.end());
    }
    if (!s.final_per_seed.empty()) {
      s.final_mean = mean_of(s.final_per_seed);
      s.final_seed_std = sample_std(s.final_per_seed);
      s.final_pooled_std = sample_std(pooled);
    }
    s.convergence_epoch = n >= settings.window
                              ? detect_convergence(agg.mean, settings.window, settings.threshold,
                                                   settings.reference)
                              : -1;
    if (i < evals.size()) s.eval_mean = evals[i];
    report.rows.push_back(std::move(s));
  }
  const AlgorithmSummary* ref = report.find(reference);
  if (ref) {
    const double ref_final = ref->final_mean;
    const int ref_conv = ref->convergence_epoch;
    for (auto& row : report.rows) {
      if (row.algorithm == reference) continue;
      row.uplift_pct = uplift_percent(ref_final, row.final_mean);
      if (ref_conv >= 0 && row.convergence_epoch >= 0)
        row.efficiency_gain_pct = efficiency_gain_percent(ref_conv, row.convergence_epoch);
    }
  }
  return report;
}

ComparisonReport compare_artifacts(const std::vector<RunArtifact>& artifacts,
                                   const std::string& reference, const ReportSettings& settings) {
  std::map<std::string, std::vector<const RunArtifact*>> groups;
  for (const auto& a : artifacts)
    if (a.ok && !a.metrics.empty()) groups[a.algorithm].push_back(&a);
  std::vector<std::string> order;
  if (groups.count(reference)) order.push_back(reference);
  for (const auto& [name, _] : groups)
    if (name != reference) order.push_back(name);

  std::vector<Aggregate> aggs;
  std::vector<std::optional<double>> evals;
  for (const auto& name : order) {
    auto runs = groups[name];
    std::sort(runs.begin(), runs.end(),
              [](const RunArtifact* a, const RunArtifact* b) { return a->seed < b->seed; });
    std::vector<std::vector<double>> curves;
    std::vector<double> ev;
    for (const auto* r : runs) {
      curves.push_back(sparse_curve(*r));
      if (r->eval) ev.push_back(r->eval->mean_sparse);
    }
    aggs.push_back(aggregate(name, curves));
    evals.push_back(ev.size() == runs.size() && !ev.empty() ? std::optional<double>(mean_of(ev))
                                                            : std::nullopt);
  }
  return compare_report(aggs, reference, settings, evals);
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

std::string report_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "algorithm,runs,final_mean,final_seed_std,final_pooled_std,convergence_epoch,eval_mean,"
         "uplift_pct,efficiency_gain_pct,final_per_seed\n";
  for (const auto& r : report.rows) {
    out << r.algorithm << ',' << r.runs << ',' << num(r.final_mean) << ',' << num(r.final_seed_std)
        << ',' << num(r.final_pooled_std) << ',' << r.convergence_epoch << ','
        << opt_num(r.eval_mean) << ',' << opt_num(r.uplift_pct) << ','
        << opt_num(r.efficiency_gain_pct) << ',';
    for (std::size_t i = 0; i < r.final_per_seed.size(); ++i)
      out << (i ? ";" : "") << num(r.final_per_seed[i]);
    out << '\n';
  }
  return out.str();
}

std::string report_text(const ComparisonReport& report) {
  std::ostringstream out;
  char line[256];
  out << "reference: " << report.reference << '\n';
  std::snprintf(line, sizeof(line), "%-18s %4s %12s %10s %10s %6s %12s %10s %10s\n", "algorithm",
                "runs", "final_mean", "seed_std", "pooled_std", "conv", "eval_mean", "uplift%",
                "effgain%");
  out << line;
  auto cell = [](const std::optional<double>& v, int prec) {
    if (!v) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof(b), "%.*f", prec, *v);
    return std::string(b);
  };
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof(line), "%-18s %4d %12.4f %10.4f %10.4f %6d %12s %10s %10s\n",
                  r.algorithm.c_str(), r.runs, r.final_mean, r.final_seed_std, r.final_pooled_std,
                  r.convergence_epoch, cell(r.eval_mean, 4).c_str(), cell(r.uplift_pct, 2).c_str(),
                  cell(r.efficiency_gain_pct, 2).c_str());
    out << line;
  }
  return out.str();
}

std::string plot_data_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "epoch";
  std::size_t n = 0;
  for (const auto& a : report.aggregates) {
    out << ',' << a.algorithm << "_mean," << a.algorithm << "_std";
    n = std::max(n, a.mean.size());
  }
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& a : report.aggregates) {
      if (i < a.mean.size()) out << ',' << num(a.mean[i]) << ',' << num(a.std[i]);
      else out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

void write_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "report.txt", report_text(report));
  write_text(dir / "plot_data.csv", plot_data_csv(report));
}

}  // namespace bcr::harness
