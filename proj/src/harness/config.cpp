#include "bcr/harness/config.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bcr::harness {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ConvergenceReference ref) {
  return ref == ConvergenceReference::kFullCurve ? "full-curve" : "running-max";
}

ConvergenceReference convergence_reference_from_string(const std::string& name) {
  if (name == "full-curve") return ConvergenceReference::kFullCurve;
  if (name == "running-max") return ConvergenceReference::kRunningMax;
  throw ConfigError("unknown convergence reference: " + name);
}

namespace {

std::string counterfactual_name(reward::CounterfactualAction a) {
  return a == reward::CounterfactualAction::kSameAction ? "same" : "sampled";
}

reward::CounterfactualAction counterfactual_from_name(const std::string& s) {
  if (s == "same") return reward::CounterfactualAction::kSameAction;
  if (s == "sampled") return reward::CounterfactualAction::kSampled;
  throw ConfigError("unknown counterfactual action mode: " + s);
}

// Copies j[key] into field when present; the dotted path is used in errors.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + where() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + child(key) + "' has the wrong type");
    }
  }

  template <typename Fn>
  void section(const char* key, Fn fn) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(*it, child(key));
    fn(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ConfigError("unknown config key '" + child(it.key()) + "'");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

}  // namespace

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["algorithm"] = ppo::to_string(c.algorithm);

  ordered_json ex;
  ex["width"] = c.env.exploration.width;
  ex["height"] = c.env.exploration.height;
  ex["obstacle_density"] = c.env.exploration.obstacle_density;
  ex["fixed_layout"] = c.env.exploration.fixed_layout;
  ex["layout_file"] = c.env.exploration.layout_file;
  ex["new_cell"] = c.env.exploration.new_cell;
  ex["revisit"] = c.env.exploration.revisit;
  ex["invalid"] = c.env.exploration.invalid;
  ordered_json ki;
  ki["layout_file"] = c.env.kitchen.layout_file;
  ki["onion_into_pot"] = c.env.kitchen.onion_into_pot;
  ki["dish_pickup"] = c.env.kitchen.dish_pickup;
  ki["soup_pickup"] = c.env.kitchen.soup_pickup;
  j["env"] = {{"id", c.env.id}, {"horizon", c.env.horizon}, {"exploration", ex}, {"kitchen", ki}};

  j["seeds"] = c.seeds;

  const auto& t = c.training;
  ordered_json tr;
  tr["episodes_per_epoch"] = t.episodes_per_epoch;
  tr["max_steps_per_episode"] = t.max_steps_per_episode;
  tr["epochs"] = t.epochs;
  tr["discount"] = t.discount;
  tr["gae_smoothing"] = t.gae_smoothing;
  tr["clip"] = t.clip;
  tr["minibatch_size"] = t.minibatch_size;
  tr["sgd_passes"] = t.sgd_passes;
  tr["learning_rate"] = t.learning_rate;
  tr["value_coef"] = t.value_coef;
  tr["max_grad_norm"] = t.max_grad_norm;
  tr["hidden"] = t.hidden;
  tr["checkpoint_interval"] = t.checkpoint_interval;
  j["training"] = tr;

  const auto& b = c.bcr;
  ordered_json bc;
  bc["lambda_sparse"] = b.lambda_sparse;
  bc["lambda_ai"] = b.lambda_ai;
  bc["lambda_human"] = b.lambda_human;
  bc["lambda_softmax"] = b.lambda_softmax;
  bc["n_threshold"] = b.n_threshold;
  bc["fade"] = {{"mode", reward::to_string(b.fade.mode)},
                {"horizon_steps", b.fade.horizon_steps},
                {"decay_steps", b.fade.decay_steps}};
  bc["delta_mode"] = b.delta_mode;
  bc["ratio_cap"] = b.ratio_cap;
  bc["prob_floor"] = b.prob_floor;
  bc["denominator_floor"] = b.denominator_floor;
  bc["counterfactual_action"] = counterfactual_name(b.counterfactual_action);
  j["bcr"] = bc;

  j["causal"] = {{"coefficient", c.causal_coefficient}};

  ordered_json hu;
  hu["kind"] = human::to_string(c.human.kind);
  hu["period"] = c.human.period;
  hu["temperature"] = c.human.temperature;
  hu["epsilon"] = c.human.epsilon;
  j["human"] = hu;

  j["eval"] = {{"episodes", c.eval_episodes}};
  ordered_json rp;
  rp["window"] = c.report.window;
  rp["threshold"] = c.report.threshold;
  rp["reference"] = to_string(c.report.reference);
  rp["final_fraction"] = c.report.final_fraction;
  j["report"] = rp;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(c.schema_version));
  root.get("name", c.name);
  std::string algorithm = ppo::to_string(c.algorithm);
  root.get("algorithm", algorithm);
  c.algorithm = ppo::algorithm_from_string(algorithm);

  root.section("env", [&](Reader& r) {
    r.get("id", c.env.id);
    r.get("horizon", c.env.horizon);
    r.section("exploration", [&](Reader& e) {
      auto& x = c.env.exploration;
      e.get("width", x.width);
      e.get("height", x.height);
      e.get("obstacle_density", x.obstacle_density);
      e.get("fixed_layout", x.fixed_layout);
      e.get("layout_file", x.layout_file);
      e.get("new_cell", x.new_cell);
      e.get("revisit", x.revisit);
      e.get("invalid", x.invalid);
    });
    r.section("kitchen", [&](Reader& k) {
      auto& x = c.env.kitchen;
      k.get("layout_file", x.layout_file);
      k.get("onion_into_pot", x.onion_into_pot);
      k.get("dish_pickup", x.dish_pickup);
      k.get("soup_pickup", x.soup_pickup);
    });
  });

  root.get("seeds", c.seeds);

  root.section("training", [&](Reader& r) {
    auto& t = c.training;
    r.get("episodes_per_epoch", t.episodes_per_epoch);
    r.get("max_steps_per_episode", t.max_steps_per_episode);
    r.get("epochs", t.epochs);
    r.get("discount", t.discount);
    r.get("gae_smoothing", t.gae_smoothing);
    r.get("clip", t.clip);
    r.get("minibatch_size", t.minibatch_size);
    r.get("sgd_passes", t.sgd_passes);
    r.get("learning_rate", t.learning_rate);
    r.get("value_coef", t.value_coef);
    r.get("max_grad_norm", t.max_grad_norm);
    r.get("hidden", t.hidden);
    r.get("checkpoint_interval", t.checkpoint_interval);
  });

  root.section("bcr", [&](Reader& r) {
    auto& b = c.bcr;
    r.get("lambda_sparse", b.lambda_sparse);
    r.get("lambda_ai", b.lambda_ai);
    r.get("lambda_human", b.lambda_human);
    r.get("lambda_softmax", b.lambda_softmax);
    r.get("n_threshold", b.n_threshold);
    r.section("fade", [&](Reader& f) {
      std::string mode = reward::to_string(b.fade.mode);
      f.get("mode", mode);
      b.fade.mode = reward::fade_mode_from_string(mode);
      f.get("horizon_steps", b.fade.horizon_steps);
      f.get("decay_steps", b.fade.decay_steps);
    });
    r.get("delta_mode", b.delta_mode);
    r.get("ratio_cap", b.ratio_cap);
    r.get("prob_floor", b.prob_floor);
    r.get("denominator_floor", b.denominator_floor);
    std::string cf = counterfactual_name(b.counterfactual_action);
    r.get("counterfactual_action", cf);
    b.counterfactual_action = counterfactual_from_name(cf);
  });

  root.section("causal", [&](Reader& r) { r.get("coefficient", c.causal_coefficient); });

  root.section("human", [&](Reader& r) {
    std::string kind = human::to_string(c.human.kind);
    r.get("kind", kind);
    c.human.kind = human::human_kind_from_string(kind);
    r.get("period", c.human.period);
    r.get("temperature", c.human.temperature);
    r.get("epsilon", c.human.epsilon);
  });

  root.section("eval", [&](Reader& r) { r.get("episodes", c.eval_episodes); });
  root.section("report", [&](Reader& r) {
    r.get("window", c.report.window);
    r.get("threshold", c.report.threshold);
    std::string ref = to_string(c.report.reference);
    r.get("reference", ref);
    c.report.reference = convergence_reference_from_string(ref);
    r.get("final_fraction", c.report.final_fraction);
  });
  root.get("output_dir", c.output_dir);
  root.get("workers", c.workers);
  root.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (env.id != "exploration" && env.id != "mini-kitchen")
    throw ConfigError("env.id must be 'exploration' or 'mini-kitchen'");
  if (env.horizon < 1) throw ConfigError("env.horizon must be >= 1");
  const auto& x = env.exploration;
  if (x.width < 1 || x.height < 1) throw ConfigError("exploration grid must be at least 1x1");
  if (!(x.obstacle_density >= 0.0 && x.obstacle_density <= 0.3))
    throw ConfigError("env.exploration.obstacle_density must lie in [0, 0.3]");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  training.validate();
  reward::BcrConfig b = bcr;
  if (b.fade.horizon_steps == 0.0) b.fade.horizon_steps = 1.0;
  if (b.fade.decay_steps == 0.0) b.fade.decay_steps = 1.0;
  b.validate();
  if (!(causal_coefficient >= 0.0)) throw ConfigError("causal.coefficient must be >= 0");
  if (human.period < 1) throw ConfigError("human.period must be >= 1");
  if (!(human.temperature > 0.0)) throw ConfigError("human.temperature must be > 0");
  if (!(human.epsilon >= 0.0 && human.epsilon <= 1.0))
    throw ConfigError("human.epsilon must lie in [0, 1]");
  if (eval_episodes < 0) throw ConfigError("eval.episodes must be >= 0");
  if (report.window < 1) throw ConfigError("report.window must be >= 1");
  if (!(report.final_fraction > 0.0 && report.final_fraction <= 1.0))
    throw ConfigError("report.final_fraction must lie in (0, 1]");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  json canonical = to_json(config);  // nlohmann::json sorts keys
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

namespace {

const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = {"bcr", "ppo-baseline", "causal",
                                                 "bcr-no-intrinsic", "bcr-no-weights"};
  return names;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* env : {"exploration", "kitchen"})
    for (const auto& a : algorithm_names()) out.push_back(std::string(env) + "_" + a);
  return out;
}

ExperimentConfig preset(const std::string& name) {
  auto sep = name.find('_');
  if (sep == std::string::npos) throw ConfigError("unknown config or preset: " + name);
  std::string env = name.substr(0, sep);
  std::string algo = name.substr(sep + 1);
  if (env != "exploration" && env != "kitchen") throw ConfigError("unknown config or preset: " + name);

  ExperimentConfig c;
  c.name = name;
  c.algorithm = ppo::algorithm_from_string(algo);
  if (env == "exploration") {
    c.env.id = "exploration";
    c.human.kind = human::HumanKind::kExplorationStochastic;
    c.human.period = 10;
    c.bcr.n_threshold = 100;
  } else {
    c.env.id = "mini-kitchen";
    c.human.kind = human::HumanKind::kKitchenScripted;
    c.human.period = 1;
    c.bcr.n_threshold = 150;
  }
  c.training.minibatch_size = 64;
  c.training.learning_rate = 1e-3;
  c.training.checkpoint_interval = 50;
  c.bcr.fade.horizon_steps = 0.0;
  c.bcr.fade.decay_steps = 0.0;
  if (c.algorithm == ppo::Algorithm::kBcrNoIntrinsic) {
    c.bcr.lambda_ai = 0.0;
    c.bcr.lambda_human = 0.0;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::is_regular_file(p)) {
    std::ifstream in(p);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + p.string() + ": " + e.what());
    }
    return from_json(j);
  }
  if (p.has_extension() || name_or_path.find('/') != std::string::npos)
    throw ConfigError("config file not found: " + name_or_path);
  return preset(name_or_path);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + assignment);
  std::string key = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);

  json tree = to_json(config);
  json* node = &tree;
  std::stringstream ks(key);
  std::string part;
  while (std::getline(ks, part, '.')) {
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ConfigError("config key '" + key + "' is a section, not a value");

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  // Strings that happen to parse as numbers stay strings.
  if (node->is_string() && !value.is_string()) value = raw;
  *node = value;
  config = from_json(tree);
}

ExperimentConfig resolve_for_seed(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig c = config;
  c.seeds = {seed};
  const double budget = std::max(1.0, static_cast<double>(c.training.epochs) *
                                          static_cast<double>(c.training.steps_per_epoch()));
  if (c.bcr.fade.horizon_steps == 0.0) c.bcr.fade.horizon_steps = budget;
  if (c.bcr.fade.decay_steps == 0.0) c.bcr.fade.decay_steps = budget / 5.0;
  return c;
}

ppo::RewardPlan reward_plan(const ExperimentConfig& config) {
  ppo::RewardPlan plan;
  plan.algorithm = config.algorithm;
  plan.bcr = config.bcr;
  plan.causal_coefficient = config.causal_coefficient;
  const double budget = std::max(1.0, static_cast<double>(config.training.epochs) *
                                          static_cast<double>(config.training.steps_per_epoch()));
  if (plan.bcr.fade.horizon_steps == 0.0) plan.bcr.fade.horizon_steps = budget;
  if (plan.bcr.fade.decay_steps == 0.0) plan.bcr.fade.decay_steps = budget / 5.0;
  if (plan.algorithm == ppo::Algorithm::kBcrNoIntrinsic) {
    plan.bcr.lambda_ai = 0.0;
    plan.bcr.lambda_human = 0.0;
  }
  return plan;
}

ppo::TrainingConfig training_config(const ExperimentConfig& config, std::uint64_t seed) {
  ppo::TrainingConfig t = config.training;
  t.seed = seed;
  return t;
}

}  // namespace bcr::harness
