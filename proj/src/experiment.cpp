#include "txp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "csv.hpp"
#include "txp/baselines.hpp"
#include "txp/evaluation.hpp"
#include "txp/kernels.hpp"
#include "txp/policies_indirect.hpp"

namespace txp {
namespace fs = std::filesystem;

namespace {

// Independent random streams fanned out from the master seed.
enum Stream : std::uint64_t {
  kTuningStream = 1,
  kBootstrapStream = 2,
  kDirectStream = 3,
  kSynthTrainStream = 4,
  kSynthTestStream = 5,
  kClinicianTrainStream = 6,
  kClinicianTestStream = 7,
  kDirectSplitStream = 8,
};

std::uint64_t stream_seed(const ExperimentConfig& cfg, std::uint64_t stream,
                          std::uint64_t sub = 0) {
  return kernels::derive_seed(kernels::derive_seed(cfg.seed, stream), sub);
}

const char* method_name(OptimMethod m) { return m == OptimMethod::kAdam ? "adam" : "gradient"; }

Json optimizer_to_json(const OptimizerConfig& o) {
  return Json{{"method", method_name(o.method)},  {"learning_rate", o.learning_rate},
              {"l2_penalty", o.l2_penalty},       {"l1_penalty", o.l1_penalty},
              {"max_epochs", o.max_epochs},       {"batch_size", o.batch_size}};
}

OptimizerConfig optimizer_from_json(const Json& j, OptimizerConfig o) {
  if (j.contains("method")) {
    const auto m = j.at("method").get<std::string>();
    if (m == "adam" || m == "adaptive-moment") {
      o.method = OptimMethod::kAdam;
    } else if (m == "gradient" || m == "plain-gradient" || m == "sgd") {
      o.method = OptimMethod::kGradient;
    } else {
      throw ConfigError("unknown optimizer method " + m);
    }
  }
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.l2_penalty = j.value("l2_penalty", o.l2_penalty);
  o.l1_penalty = j.value("l1_penalty", o.l1_penalty);
  o.max_epochs = j.value("max_epochs", o.max_epochs);
  o.batch_size = j.value("batch_size", o.batch_size);
  o.validate();
  return o;
}

Json spec_to_json(const SyntheticSpec& s) {
  Json quad = Json::array();
  for (const auto& q : s.quadratic) quad.push_back({{"feature", q.feature}, {"alpha", q.alpha}});
  Json inter = Json::array();
  for (const auto& t : s.interactions) inter.push_back({{"i", t.i}, {"j", t.j}, {"beta", t.beta}});
  return Json{{"m", s.m},
              {"k", s.k},
              {"quadratic", quad},
              {"interactions", inter},
              {"intercepts", s.intercepts},
              {"target_means", s.target_means},
              {"allow_weak_coefficients", s.allow_weak_coefficients}};
}

SyntheticSpec spec_from_json(const Json& j) {
  SyntheticSpec s = SyntheticSpec::default_environment();
  s.m = j.value("m", s.m);
  s.k = j.value("k", s.k);
  if (j.contains("quadratic")) {
    s.quadratic.clear();
    for (const auto& q : j.at("quadratic")) {
      s.quadratic.push_back({q.at("feature").get<std::size_t>(), q.at("alpha").get<double>()});
    }
  }
  if (j.contains("interactions")) {
    s.interactions.clear();
    for (const auto& t : j.at("interactions")) {
      s.interactions.push_back({t.at("i").get<std::size_t>(), t.at("j").get<std::size_t>(),
                                t.at("beta").get<double>()});
    }
  }
  s.intercepts = j.value("intercepts", s.intercepts);
  s.target_means = j.value("target_means", s.target_means);
  s.allow_weak_coefficients = j.value("allow_weak_coefficients", s.allow_weak_coefficients);
  s.validate();
  return s;
}

Json clinician_to_json(const ClinicianSim& c) {
  return Json{{"rule", c.rule == ClinicianSim::Rule::kConstant ? "constant" : "argmax-features"},
              {"constant_action", c.constant_action},
              {"bias", c.bias},
              {"noise_rate", c.noise_rate}};
}

ClinicianSim clinician_from_json(const Json& j) {
  ClinicianSim c;
  const auto rule = j.value("rule", std::string("argmax-features"));
  if (rule == "constant") {
    c.rule = ClinicianSim::Rule::kConstant;
  } else if (rule == "argmax-features") {
    c.rule = ClinicianSim::Rule::kArgmaxFeatures;
  } else {
    throw ConfigError("unknown clinician rule " + rule);
  }
  c.constant_action = j.value("constant_action", c.constant_action);
  c.bias = j.value("bias", c.bias);
  c.noise_rate = j.value("noise_rate", c.noise_rate);
  return c;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return out.str();
}

// <out>/<command>-<utc stamp>-<hash prefix>[-N]
fs::path make_run_dir(const ExperimentConfig& cfg, const std::string& command) {
  const fs::path base = cfg.out_dir.empty() ? fs::path("runs") : fs::path(cfg.out_dir);
  const std::string stem = command + "-" + utc_stamp() + "-" + config_hash(cfg).substr(0, 8);
  fs::path dir = base / stem;
  for (int suffix = 2; fs::exists(dir); ++suffix) dir = base / (stem + "-" + std::to_string(suffix));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string hash_comment(const ExperimentConfig& cfg) {
  return "# config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed) + "\n";
}

Json manifest(const ExperimentConfig& cfg, const std::string& command) {
  return Json{{"command", command},
              {"version", kVersion},
              {"config_hash", config_hash(cfg)},
              {"seed", cfg.seed},
              {"config", to_json(cfg)}};
}

const ActionSet& require_actions(const ExperimentConfig& cfg) {
  if (!cfg.actions) throw ConfigError("config has no action set (\"actions\")");
  return *cfg.actions;
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("config is missing the ") + what + " path");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " file does not exist: " + path);
}

Cohort load_checked(const std::string& path, const ActionSet& actions) {
  Cohort c = load_cohort(path, actions);
  c.validate(actions);
  return c;
}

std::size_t default_action_index(const ExperimentConfig& cfg, const ActionSet& actions) {
  if (!cfg.default_action.empty()) return actions.index_of(cfg.default_action);
  auto a = actions.first_zero_cost();
  if (!a) throw ConfigError("thresholding needs a zero-cost default action");
  return *a;
}

ThresholdGrid make_grid(const ExperimentConfig& cfg, const ActionSet& actions) {
  ThresholdGrid grid;
  grid.fnr_levels = cfg.fnr_levels;
  for (const auto& group : cfg.tie_groups) {
    std::vector<std::size_t> g;
    for (const auto& label : group) g.push_back(actions.index_of(label));
    grid.tie_groups.push_back(std::move(g));
  }
  return grid;
}

TuningPlan tuning_plan(const ExperimentConfig& cfg) {
  TuningPlan plan = cfg.tuning;
  plan.seed = stream_seed(cfg, kTuningStream);
  return plan;
}

// Trains one direct policy; with early stopping the training cohort is split
// into a fit part and a validation part.
LinearPolicy train_direct_for(const ExperimentConfig& cfg, const Cohort& train,
                              const ActionSet& actions, const RewardSpec& spec,
                              std::uint64_t sub_seed) {
  OptimizerConfig opt = cfg.direct_optimizer;
  opt.seed = stream_seed(cfg, kDirectStream, sub_seed);
  if (!cfg.early_stop) {
    return train_direct(train, actions, spec, opt, std::nullopt, nullptr, cfg.reward_transform).policy;
  }
  TuningPlan split_plan;
  split_plan.n_splits = 1;
  split_plan.val_fraction = cfg.direct_val_fraction;
  split_plan.seed = stream_seed(cfg, kDirectSplitStream, sub_seed);
  const auto split = make_splits(train.n(), split_plan).front();
  const Cohort fit = train.subset(split.train);
  const Cohort val = train.subset(split.validation);
  return train_direct(fit, actions, spec, opt, cfg.early_stop, &val, cfg.reward_transform).policy;
}

PolicyEval average_evals(const std::vector<PolicyEval>& evals) {
  if (evals.size() == 1) return evals.front();
  PolicyEval out = evals.front();
  const double t = static_cast<double>(evals.size());
  out.iat_rate = out.cost_rate = out.defer_rate = 0.0;
  out.n_decided = 0;
  BootstrapSummary boot{};
  bool have_boot = evals.front().bootstrap.has_value();
  for (const auto& e : evals) {
    out.iat_rate += e.iat_rate / t;
    out.cost_rate += e.cost_rate / t;
    out.defer_rate += e.defer_rate / t;
    out.n_decided += e.n_decided;
    if (have_boot) {
      boot.resamples = e.bootstrap->resamples;
      boot.iat.mean += e.bootstrap->iat.mean / t;
      boot.iat.sd += e.bootstrap->iat.sd / t;
      boot.cost.mean += e.bootstrap->cost.mean / t;
      boot.cost.sd += e.bootstrap->cost.sd / t;
      boot.defer.mean += e.bootstrap->defer.mean / t;
      boot.defer.sd += e.bootstrap->defer.sd / t;
    }
  }
  out.n_decided /= evals.size();
  if (have_boot) out.bootstrap = boot;
  return out;
}

std::string param_ref(const std::string& method, const char* name, double value) {
  return method + "@" + name + "=" + csv::format_double(value);
}

}  // namespace

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 200.0);
  return grid;
}

ExperimentConfig::ExperimentConfig()
    : omegas(default_omega_grid()),
      budgets(BudgetGrid::default_grid().budgets),
      lambda_defer(default_lambda_grid()),
      fnr_levels(ThresholdGrid::default_levels()) {}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["actions"] = cfg.actions ? to_json(*cfg.actions)["actions"] : Json(nullptr);
  j["train"] = cfg.train_path;
  j["test"] = cfg.test_path;
  j["methods"] = cfg.methods;
  Json grid = Json::array();
  for (const auto& p : cfg.tuning.penalty_grid) {
    grid.push_back({{"type", p.kind == PenaltyKind::kL2 ? "l2" : "l1"},
                    {"inverse_strength", p.inverse_strength}});
  }
  j["tuning"] = {{"n_splits", cfg.tuning.n_splits},
                 {"val_fraction", cfg.tuning.val_fraction},
                 {"penalty_grid", grid}};
  j["outcome_optimizer"] = optimizer_to_json(cfg.outcome_optimizer);
  j["direct_optimizer"] = optimizer_to_json(cfg.direct_optimizer);
  if (cfg.early_stop) {
    j["early_stop"] = {
        {"metric", cfg.early_stop->metric == StopMetric::kValidationReward ? "validation-mean-reward"
                                                                          : "validation-loss"},
        {"patience", cfg.early_stop->patience},
        {"mode", cfg.early_stop->mode == StopMode::kMaximize ? "maximize" : "minimize"}};
  } else {
    j["early_stop"] = nullptr;
  }
  j["direct_val_fraction"] = cfg.direct_val_fraction;
  j["reward_transform"] = cfg.reward_transform == RewardTransform::kRegret ? "regret" : "none";
  j["omegas"] = cfg.omegas;
  j["budgets"] = cfg.budgets;
  j["lambda_defer"] = cfg.lambda_defer;
  j["defer_omega"] = cfg.defer_omega;
  j["fnr_levels"] = cfg.fnr_levels;
  j["tie_groups"] = cfg.tie_groups;
  j["default_action"] = cfg.default_action;
  j["n_bootstrap"] = cfg.n_bootstrap;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["method"] = cfg.method;
  j["omega"] = cfg.omega;
  j["budget"] = cfg.budget;
  j["lambda"] = cfg.lambda;
  j["policy"] = cfg.policy_path;
  j["calibration"] = {{"alpha", cfg.calib_alpha},
                      {"max_iters", cfg.calib_max_iters},
                      {"tolerance", cfg.calib_tolerance ? Json(*cfg.calib_tolerance) : Json(nullptr)}};
  j["synth"] = {{"spec", spec_to_json(cfg.synth.spec)},
                {"n_train", cfg.synth.n_train},
                {"n_test", cfg.synth.n_test},
                {"clinician", cfg.synth.clinician ? clinician_to_json(*cfg.synth.clinician)
                                                  : Json(nullptr)}};
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig cfg;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("actions") && !j.at("actions").is_null()) {
      const auto& a = j.at("actions");
      cfg.actions = a.is_string() ? load_action_set(a.get<std::string>())
                                  : action_set_from_json(Json{{"actions", a}});
    }
    cfg.train_path = j.value("train", cfg.train_path);
    cfg.test_path = j.value("test", cfg.test_path);
    cfg.methods = j.value("methods", cfg.methods);
    if (j.contains("tuning")) {
      const auto& t = j.at("tuning");
      cfg.tuning.n_splits = t.value("n_splits", cfg.tuning.n_splits);
      cfg.tuning.val_fraction = t.value("val_fraction", cfg.tuning.val_fraction);
      if (t.contains("penalty_grid")) {
        cfg.tuning.penalty_grid.clear();
        for (const auto& p : t.at("penalty_grid")) {
          const auto type = p.at("type").get<std::string>();
          if (type != "l1" && type != "l2") throw ConfigError("unknown penalty type " + type);
          cfg.tuning.penalty_grid.push_back(
              {type == "l2" ? PenaltyKind::kL2 : PenaltyKind::kL1, p.at("inverse_strength").get<double>()});
        }
      }
    }
    if (j.contains("outcome_optimizer")) {
      cfg.outcome_optimizer = optimizer_from_json(j.at("outcome_optimizer"), cfg.outcome_optimizer);
    }
    if (j.contains("direct_optimizer")) {
      cfg.direct_optimizer = optimizer_from_json(j.at("direct_optimizer"), cfg.direct_optimizer);
    }
    if (j.contains("early_stop")) {
      const auto& e = j.at("early_stop");
      if (e.is_null()) {
        cfg.early_stop.reset();
      } else {
        EarlyStopRule rule;
        const auto metric = e.value("metric", std::string("validation-mean-reward"));
        if (metric == "validation-mean-reward") {
          rule.metric = StopMetric::kValidationReward;
        } else if (metric == "validation-loss") {
          rule.metric = StopMetric::kValidationLoss;
        } else {
          throw ConfigError("unknown early-stop metric " + metric);
        }
        rule.patience = e.value("patience", rule.patience);
        const auto mode = e.value("mode", std::string("maximize"));
        if (mode != "maximize" && mode != "minimize") throw ConfigError("unknown early-stop mode " + mode);
        rule.mode = mode == "maximize" ? StopMode::kMaximize : StopMode::kMinimize;
        cfg.early_stop = rule;
      }
    }
    cfg.direct_val_fraction = j.value("direct_val_fraction", cfg.direct_val_fraction);
    const auto transform = j.value("reward_transform", std::string("none"));
    if (transform != "none" && transform != "regret") throw ConfigError("unknown reward_transform " + transform);
    cfg.reward_transform = transform == "regret" ? RewardTransform::kRegret : RewardTransform::kNone;
    cfg.omegas = j.value("omegas", cfg.omegas);
    cfg.budgets = j.value("budgets", cfg.budgets);
    cfg.lambda_defer = j.value("lambda_defer", cfg.lambda_defer);
    cfg.defer_omega = j.value("defer_omega", cfg.defer_omega);
    cfg.fnr_levels = j.value("fnr_levels", cfg.fnr_levels);
    cfg.tie_groups = j.value("tie_groups", cfg.tie_groups);
    cfg.default_action = j.value("default_action", cfg.default_action);
    cfg.n_bootstrap = j.value("n_bootstrap", cfg.n_bootstrap);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.method = j.value("method", cfg.method);
    cfg.omega = j.value("omega", cfg.omega);
    cfg.budget = j.value("budget", cfg.budget);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.policy_path = j.value("policy", cfg.policy_path);
    if (j.contains("calibration")) {
      const auto& c = j.at("calibration");
      cfg.calib_alpha = c.value("alpha", cfg.calib_alpha);
      cfg.calib_max_iters = c.value("max_iters", cfg.calib_max_iters);
      if (c.contains("tolerance") && !c.at("tolerance").is_null()) {
        cfg.calib_tolerance = c.at("tolerance").get<std::size_t>();
      }
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      if (s.contains("spec")) cfg.synth.spec = spec_from_json(s.at("spec"));
      cfg.synth.n_train = s.value("n_train", cfg.synth.n_train);
      cfg.synth.n_test = s.value("n_test", cfg.synth.n_test);
      if (s.contains("clinician") && !s.at("clinician").is_null()) {
        cfg.synth.clinician = clinician_from_json(s.at("clinician"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (cfg.trials == 0) throw ConfigError("trials must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // The output directory does not affect results.
  Json j = to_json(cfg);
  j.erase("out");
  const std::string text = nlohmann::json(j).dump();  // sorted keys
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

CommandResult cmd_synth_gen(const ExperimentConfig& cfg) {
  const auto& sg = cfg.synth;
  sg.spec.validate();
  ActionSet actions;
  if (cfg.actions) {
    if (cfg.actions->size() != sg.spec.k) throw ConfigError("action set size differs from synth.spec.k");
    actions = *cfg.actions;
  } else {
    std::vector<ActionSet::Action> list;
    for (std::size_t a = 0; a < sg.spec.k; ++a) list.push_back({"A" + std::to_string(a + 1), 0.0});
    actions = ActionSet(std::move(list));
  }
  if (sg.n_train == 0) throw ConfigError("synth.n_train must be positive");
  CommandResult result;
  result.run_dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(result.run_dir, ec);
  if (ec || !fs::is_directory(result.run_dir)) {
    throw ConfigError("cannot create output directory " + result.run_dir.string());
  }

  const ProbeStats probe = check_marginals(sg.spec);
  auto emit = [&](const std::string& name, std::size_t n, std::uint64_t data_stream,
                  std::uint64_t clinician_stream) {
    SyntheticSpec spec = sg.spec;
    spec.seed = stream_seed(cfg, data_stream);
    Cohort cohort = generate(spec, n);
    if (sg.clinician) {
      ClinicianSim sim = *sg.clinician;
      sim.seed = stream_seed(cfg, clinician_stream);
      cohort = simulate_clinician(sim, std::move(cohort), actions.size());
    }
    const fs::path csv_path = result.run_dir / (name + ".csv");
    write_cohort(csv_path, cohort, actions);
    Json side{{"config_hash", config_hash(cfg)},
              {"version", kVersion},
              {"n", n},
              {"data_seed", spec.seed},
              {"spec", spec_to_json(spec)},
              {"probe", {{"samples", probe.samples}, {"marginal_means", probe.marginal_means}}},
              {"actions", to_json(actions)["actions"]}};
    if (sg.clinician) side["clinician"] = clinician_to_json(*sg.clinician);
    const fs::path json_path = result.run_dir / (name + ".json");
    write_json(json_path, side);
    result.files.push_back(csv_path);
    result.files.push_back(json_path);
  };
  emit("train", sg.n_train, kSynthTrainStream, kClinicianTrainStream);
  if (sg.n_test > 0) emit("test", sg.n_test, kSynthTestStream, kClinicianTestStream);
  return result;
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  const ActionSet& actions = require_actions(cfg);
  require_path(cfg.train_path, "train");
  if (cfg.method.empty()) throw ConfigError("train needs \"method\"");
  const Cohort train = load_checked(cfg.train_path, actions);

  Json policy_json;
  if (cfg.method == "direct") {
    RewardSpec spec{cfg.omega, cfg.lambda};
    spec.validate();
    policy_json = to_json(train_direct_for(cfg, train, actions, spec, 0));
  } else if (cfg.method == "reward-max" || cfg.method == "thresholding" ||
             cfg.method == "baseline-unconstrained" || cfg.method == "baseline-constrained") {
    const auto plan = tuning_plan(cfg);
    const auto models = fit_outcome_models(train, actions, plan, cfg.outcome_optimizer);
    if (cfg.method == "reward-max") {
      policy_json = to_json(RewardMaxPolicy(models, cfg.omega, actions));
    } else if (cfg.method == "thresholding") {
      const auto def = default_action_index(cfg, actions);
      const ThresholdGrid grid = make_grid(cfg, actions);
      std::vector<Cohort> val;
      for (const auto& s : make_splits(train.n(), plan)) val.push_back(train.subset(s.validation));
      const auto table = threshold_table(models, train, grid.fnr_levels);
      const auto choices = search_thresholds(models, actions, grid, table, val, BudgetGrid{{cfg.budget}}, def);
      policy_json = to_json(make_threshold_policy(models, actions, choices.front(), def));
    } else if (cfg.method == "baseline-unconstrained") {
      policy_json = to_json(UnconstrainedPolicy(models), actions);
    } else {
      const auto targets = doctor_counts(train, actions);
      const double alpha = cfg.calib_alpha > 0 ? cfg.calib_alpha : default_calibration_step(train.n());
      const auto costs = calibrate_costs(models, train, targets, alpha, cfg.calib_max_iters,
                                         cfg.calib_tolerance.value_or(default_count_tolerance(train.n())));
      policy_json = to_json(ConstrainedPolicy(models, costs.c), actions);
    }
  } else {
    throw ConfigError("unknown method '" + cfg.method + "'");
  }
  policy_json["config_hash"] = config_hash(cfg);
  CommandResult result;
  result.run_dir = make_run_dir(cfg, "train");
  const fs::path path = result.run_dir / "policy.json";
  write_json(path, policy_json);
  write_json(result.run_dir / "manifest.json", manifest(cfg, "train"));
  result.files = {path, result.run_dir / "manifest.json"};
  return result;
}

CommandResult cmd_eval(const ExperimentConfig& cfg) {
  const ActionSet& actions = require_actions(cfg);
  require_path(cfg.test_path, "test");
  require_path(cfg.policy_path, "policy");
  std::ifstream in(cfg.policy_path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("policy file is not valid JSON: " + std::string(e.what()));
  }
  const auto policy = policy_from_json(doc, actions);
  const Cohort test = load_checked(cfg.test_path, actions);
  const PolicyEval eval =
      evaluate_policy(*policy, test, actions, cfg.n_bootstrap, stream_seed(cfg, kBootstrapStream));
  Json out{{"config_hash", config_hash(cfg)},
           {"policy", cfg.policy_path},
           {"iat", eval.iat_rate},
           {"cost", eval.cost_rate},
           {"defer_rate", eval.defer_rate},
           {"n", eval.n},
           {"n_decided", eval.n_decided}};
  if (eval.bootstrap) {
    out["bootstrap"] = {{"resamples", eval.bootstrap->resamples},
                        {"iat_mean", eval.bootstrap->iat.mean},
                        {"iat_sd", eval.bootstrap->iat.sd},
                        {"cost_mean", eval.bootstrap->cost.mean},
                        {"cost_sd", eval.bootstrap->cost.sd},
                        {"defer_mean", eval.bootstrap->defer.mean},
                        {"defer_sd", eval.bootstrap->defer.sd}};
  }
  CommandResult result;
  result.run_dir = make_run_dir(cfg, "eval");
  write_json(result.run_dir / "eval.json", out);
  result.files = {result.run_dir / "eval.json"};
  return result;
}

CommandResult cmd_frontier(const ExperimentConfig& cfg) {
  const ActionSet& actions = require_actions(cfg);
  if (cfg.methods.empty()) throw ConfigError("frontier needs a non-empty \"methods\" list");
  static const std::vector<std::string> known = {"thresholding", "reward-max", "direct",
                                                 "baseline-unconstrained", "baseline-constrained"};
  for (const auto& m : cfg.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw ConfigError("unknown method '" + m + "'");
    }
  }
  auto uses = [&](const std::string& m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  if (uses("reward-max") || uses("direct")) {
    if (cfg.omegas.empty()) throw ConfigError("omega grid is empty");
  }
  if (uses("thresholding")) {
    if (cfg.budgets.empty() || cfg.fnr_levels.empty()) throw ConfigError("threshold grids are empty");
  }
  require_path(cfg.train_path, "train");
  require_path(cfg.test_path, "test");
  const Cohort train = load_checked(cfg.train_path, actions);
  const Cohort test = load_checked(cfg.test_path, actions);
  const std::uint64_t boot_seed = stream_seed(cfg, kBootstrapStream);
  auto eval_of = [&](const Policy& p) { return evaluate_policy(p, test, actions, cfg.n_bootstrap, boot_seed); };

  std::vector<FrontierPoint> points;
  const bool indirect = uses("thresholding") || uses("reward-max") ||
                        uses("baseline-unconstrained") || uses("baseline-constrained");
  std::vector<LogisticModel> models;
  const TuningPlan plan = tuning_plan(cfg);
  if (indirect) models = fit_outcome_models(train, actions, plan, cfg.outcome_optimizer);

  for (const auto& method : cfg.methods) {
    if (method == "thresholding") {
      const auto def = default_action_index(cfg, actions);
      const ThresholdGrid grid = make_grid(cfg, actions);
      std::vector<Cohort> val;
      for (const auto& s : make_splits(train.n(), plan)) val.push_back(train.subset(s.validation));
      const auto table = threshold_table(models, train, grid.fnr_levels);
      BudgetGrid budgets{dedupe_grid(cfg.budgets)};
      for (const auto& choice : search_thresholds(models, actions, grid, table, val, budgets, def)) {
        const auto policy = make_threshold_policy(models, actions, choice, def);
        points.push_back({method, choice.budget, eval_of(policy), param_ref(method, "budget", choice.budget)});
      }
    } else if (method == "reward-max") {
      for (const auto& policy : sweep_omega(models, cfg.omegas, actions)) {
        points.push_back({method, policy.omega(), eval_of(policy), param_ref(method, "omega", policy.omega())});
      }
    } else if (method == "direct") {
      const auto omegas = dedupe_grid(cfg.omegas);
      for (std::size_t w = 0; w < omegas.size(); ++w) {
        std::vector<PolicyEval> evals;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
          const auto policy = train_direct_for(cfg, train, actions, RewardSpec{omegas[w], 0.0},
                                               w * 1000003ULL + t);
          evals.push_back(eval_of(policy));
        }
        points.push_back({method, omegas[w], average_evals(evals), param_ref(method, "omega", omegas[w])});
      }
    } else if (method == "baseline-unconstrained") {
      points.push_back({method, 0.0, eval_of(UnconstrainedPolicy(models)), method});
    } else if (method == "baseline-constrained") {
      const auto targets = doctor_counts(train, actions);
      const double alpha = cfg.calib_alpha > 0 ? cfg.calib_alpha : default_calibration_step(train.n());
      const auto costs = calibrate_costs(models, train, targets, alpha, cfg.calib_max_iters,
                                         cfg.calib_tolerance.value_or(default_count_tolerance(train.n())));
      if (!costs.converged) {
        std::cerr << "warning: constrained baseline calibration did not converge; using best-seen costs\n";
      }
      points.push_back({method, 0.0, eval_of(ConstrainedPolicy(models, costs.c)), method});
    }
  }
  if (test.has_doctor()) {
    points.push_back({"doctor", 0.0, doctor_eval(test, actions, cfg.n_bootstrap, boot_seed), "doctor"});
  }
  points = assemble_frontier(std::move(points));

  CommandResult result;
  result.run_dir = make_run_dir(cfg, "frontier");
  const fs::path csv_path = result.run_dir / "frontier.csv";
  const fs::path json_path = result.run_dir / "frontier.json";
  const fs::path manifest_path = result.run_dir / "manifest.json";
  write_text(csv_path, hash_comment(cfg) + frontier_csv(points));
  Json report = manifest(cfg, "frontier");
  report["points"] = Json::parse(frontier_json(points));
  write_json(json_path, report);
  write_json(manifest_path, manifest(cfg, "frontier"));
  result.files = {csv_path, json_path, manifest_path};
  return result;
}

CommandResult cmd_defer_sweep(const ExperimentConfig& cfg) {
  const ActionSet& actions = require_actions(cfg);
  if (cfg.lambda_defer.empty()) throw ConfigError("lambda_defer grid is empty");
  require_path(cfg.train_path, "train");
  require_path(cfg.test_path, "test");
  const Cohort train = load_checked(cfg.train_path, actions);
  const Cohort test = load_checked(cfg.test_path, actions);
  if (!train.has_doctor() || !test.has_doctor()) {
    throw ConfigError("defer-sweep needs doctor_action in both train and test cohorts");
  }
  const auto lambdas = dedupe_grid(cfg.lambda_defer);
  for (double l : lambdas) {
    if (l < 0.0) throw ConfigError("lambda_defer values must be nonnegative");
  }

  struct Row {
    double lambda;
    double defer_rate = 0.0;
    double n_decided = 0.0;
    double doctor_iat = 0.0, policy_iat = 0.0, doctor_cost = 0.0, policy_cost = 0.0;
    std::size_t decided_trials = 0;
    double overall_iat = 0.0, overall_cost = 0.0;
  };
  std::vector<Row> rows;
  const double trials = static_cast<double>(cfg.trials);
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    Row row{lambdas[li]};
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      // Trial t uses the same seeds for every lambda.
      const auto policy = train_direct_for(cfg, train, actions, RewardSpec{cfg.defer_omega, lambdas[li]}, t);
      const PolicyEval overall = evaluate_policy(policy, test, actions, 0, 0);
      row.overall_iat += overall.iat_rate / trials;
      row.overall_cost += overall.cost_rate / trials;
      if (!policy.can_defer()) {
        row.n_decided += static_cast<double>(test.n()) / trials;
        const PolicyEval doc = doctor_eval(test, actions);
        row.doctor_iat += doc.iat_rate;
        row.policy_iat += overall.iat_rate;
        row.doctor_cost += doc.cost_rate;
        row.policy_cost += overall.cost_rate;
        ++row.decided_trials;
        continue;
      }
      const auto report = decision_cohort_analysis(policy, test, actions);
      row.defer_rate += report.defer_rate / trials;
      row.n_decided += static_cast<double>(report.n_decided) / trials;
      if (!report.empty) {
        row.doctor_iat += report.doctor.iat_rate;
        row.policy_iat += report.policy.iat_rate;
        row.doctor_cost += report.doctor.cost_rate;
        row.policy_cost += report.policy.cost_rate;
        ++row.decided_trials;
      }
    }
    if (row.decided_trials > 0) {
      const double d = static_cast<double>(row.decided_trials);
      row.doctor_iat /= d;
      row.policy_iat /= d;
      row.doctor_cost /= d;
      row.policy_cost /= d;
    }
    rows.push_back(row);
  }
  bool monotone = true;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].defer_rate + 1e-12 < rows[r - 1].defer_rate) monotone = false;
  }
  if (!monotone) std::cerr << "warning: defer rate is not monotone in lambda_defer\n";

  std::ostringstream csv_out;
  csv_out << hash_comment(cfg)
          << "lambda,defer_rate,n_decided,doctor_iat,policy_iat,doctor_cost,policy_cost,"
             "overall_iat,overall_cost,trials\n";
  Json json_rows = Json::array();
  for (const auto& r : rows) {
    const bool has = r.decided_trials > 0;
    auto cell = [&](double v) { return has ? csv::format_double(v) : std::string(); };
    csv_out << csv::format_double(r.lambda) << ',' << csv::format_double(r.defer_rate) << ','
            << csv::format_double(r.n_decided) << ',' << cell(r.doctor_iat) << ','
            << cell(r.policy_iat) << ',' << cell(r.doctor_cost) << ',' << cell(r.policy_cost)
            << ',' << csv::format_double(r.overall_iat) << ',' << csv::format_double(r.overall_cost)
            << ',' << cfg.trials << '\n';
    json_rows.push_back({{"lambda", r.lambda},
                         {"defer_rate", r.defer_rate},
                         {"n_decided", r.n_decided},
                         {"decision_cohort_empty", !has},
                         {"doctor_iat", has ? Json(r.doctor_iat) : Json(nullptr)},
                         {"policy_iat", has ? Json(r.policy_iat) : Json(nullptr)},
                         {"doctor_cost", has ? Json(r.doctor_cost) : Json(nullptr)},
                         {"policy_cost", has ? Json(r.policy_cost) : Json(nullptr)},
                         {"overall_iat", r.overall_iat},
                         {"overall_cost", r.overall_cost}});
  }
  CommandResult result;
  result.run_dir = make_run_dir(cfg, "defer-sweep");
  write_text(result.run_dir / "defer_sweep.csv", csv_out.str());
  Json report = manifest(cfg, "defer-sweep");
  report["defer_rate_monotone"] = monotone;
  report["rows"] = json_rows;
  write_json(result.run_dir / "defer_sweep.json", report);
  result.files = {result.run_dir / "defer_sweep.csv", result.run_dir / "defer_sweep.json"};
  return result;
}

CommandResult cmd_baseline(const ExperimentConfig& cfg) {
  const ActionSet& actions = require_actions(cfg);
  require_path(cfg.train_path, "train");
  const Cohort train = load_checked(cfg.train_path, actions);
  const auto models = fit_outcome_models(train, actions, tuning_plan(cfg), cfg.outcome_optimizer);
  const auto targets = doctor_counts(train, actions);
  const double alpha = cfg.calib_alpha > 0 ? cfg.calib_alpha : default_calibration_step(train.n());
  const auto costs = calibrate_costs(models, train, targets, alpha, cfg.calib_max_iters,
                                     cfg.calib_tolerance.value_or(default_count_tolerance(train.n())));
  CommandResult result;
  result.run_dir = make_run_dir(cfg, "baseline");
  Json costs_json = to_json(costs);
  costs_json["config_hash"] = config_hash(cfg);
  costs_json["actions"] = to_json(actions)["actions"];
  write_json(result.run_dir / "costs.json", costs_json);
  Json unc = to_json(UnconstrainedPolicy(models), actions);
  unc["config_hash"] = config_hash(cfg);
  Json con = to_json(ConstrainedPolicy(models, costs.c), actions);
  con["config_hash"] = config_hash(cfg);
  write_json(result.run_dir / "policy_unconstrained.json", unc);
  write_json(result.run_dir / "policy_constrained.json", con);
  result.files = {result.run_dir / "costs.json", result.run_dir / "policy_unconstrained.json",
                  result.run_dir / "policy_constrained.json"};
  if (!cfg.test_path.empty()) {
    require_path(cfg.test_path, "test");
    const Cohort test = load_checked(cfg.test_path, actions);
    const auto seed = stream_seed(cfg, kBootstrapStream);
    std::vector<FrontierPoint> points = {
        {"baseline-unconstrained", 0.0, evaluate_policy(UnconstrainedPolicy(models), test, actions, cfg.n_bootstrap, seed), "policy_unconstrained.json"},
        {"baseline-constrained", 0.0, evaluate_policy(ConstrainedPolicy(models, costs.c), test, actions, cfg.n_bootstrap, seed), "policy_constrained.json"}};
    if (test.has_doctor()) {
      points.push_back({"doctor", 0.0, doctor_eval(test, actions, cfg.n_bootstrap, seed), "doctor"});
    }
    points = assemble_frontier(std::move(points));
    write_text(result.run_dir / "baseline.csv", hash_comment(cfg) + frontier_csv(points));
    result.files.push_back(result.run_dir / "baseline.csv");
  }
  if (!costs.converged) {
    std::cerr << "warning: cost calibration did not converge within " << cfg.calib_max_iters
              << " iterations; best-seen costs written\n";
  }
  return result;
}

}  // namespace txp
