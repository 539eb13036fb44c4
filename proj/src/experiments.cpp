#include "predplan/experiments.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "predplan/acc_env.hpp"
#include "predplan/csv.hpp"
#include "predplan/dataset.hpp"
#include "predplan/gradcheck.hpp"
#include "predplan/line_env.hpp"
#include "predplan/roundabout_env.hpp"
#include "predplan/train.hpp"

namespace predplan {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------- schemas ----

struct KeyDef {
    const char* key;
    const char* default_value;  // nullptr = required
};

const std::vector<KeyDef> kCommonKeys = {
    {"experiment", nullptr},
    {"seed", "1"},
    {"out", "out"},
    {"trajectory.episodes", "10"},
    {"policy.hidden", nullptr},
    {"policy.out_scale", ""},  // empty = per-environment default
    {"train.episodes", nullptr},
    {"train.lr", nullptr},
    {"train.momentum", "0.9"},
    {"train.clip", "1.0"},
    {"train.eval_every", nullptr},
    {"train.eval_episodes", "20"},
    {"eval.final_episodes", nullptr},
    {"env.horizon", nullptr},
    {"gradcheck.horizon", "10"},
    {"gradcheck.samples", "20"},
    {"gradcheck.fd_eps", "1e-6"},
    {"gradcheck.tolerance", "1e-4"},
    {"gradcheck.policy_hidden", "16"},
    {"gradcheck.model_hidden", "16"},
};

const std::vector<KeyDef> kCollectKeys = {
    {"collect.steps", nullptr},
    {"collect.epsilon", "0.2"},
    {"collect.sigma", "1.0"},
    {"collect.action_lo", "-3"},
    {"collect.action_hi", "3"},
};

const std::vector<KeyDef> kModelNKeys = {
    {"model_n.hidden", "64,64"},
    {"model_n.lr", "0.02"},
    {"model_n.batch", "64"},
    {"model_n.epochs", "20"},
};

const std::vector<KeyDef> kModelRKeys = {
    {"model_r.hidden", "64,64"},
    {"model_r.lr", "0.02"},
    {"model_r.batch", "64"},
    {"model_r.epochs", "20"},
};

const std::vector<KeyDef> kRoundaboutKeys = {
    {"env.n_targets", "3"},
    {"env.p_aggressive", "0.5"},
    {"gradcheck.n_targets", "2"},
};

const std::vector<KeyDef> kJointKeys = {
    {"train.lambda_n", "1.0"},
    {"train.lambda_r", "1.0"},
};

std::map<std::string, const char*> schema_for(const std::string& experiment,
                                              const std::string& source, int line) {
    std::map<std::string, const char*> schema;
    auto extend = [&](const std::vector<KeyDef>& defs) {
        for (const auto& d : defs) schema[d.key] = d.default_value;
    };
    extend(kCommonKeys);
    if (experiment == "acc-analytic" || experiment == "line-adversarial") {
        // analytic models only
    } else if (experiment == "acc-learned") {
        extend(kCollectKeys);
        extend(kModelNKeys);
        extend(kModelRKeys);
    } else if (experiment == "roundabout-given-dynamics") {
        extend(kCollectKeys);
        extend(kModelRKeys);
        extend(kRoundaboutKeys);
    } else if (experiment == "roundabout-joint") {
        extend(kCollectKeys);
        extend(kModelNKeys);
        extend(kModelRKeys);
        extend(kRoundaboutKeys);
        extend(kJointKeys);
    } else {
        throw ConfigError(source, line,
                          "unknown experiment '" + experiment +
                              "' (expected acc-analytic, acc-learned, line-adversarial, "
                              "roundabout-given-dynamics or roundabout-joint)");
    }
    return schema;
}

void validate_ranges(const Config& c) {
    auto positive = [&](const char* key) {
        if (c.has(key) && c.get_double(key) <= 0.0) c.fail(key, "must be > 0");
    };
    auto at_least = [&](const char* key, int bound) {
        if (c.has(key) && c.get_int(key) < bound) {
            c.fail(key, "must be >= " + std::to_string(bound));
        }
    };
    auto unit_range = [&](const char* key) {
        if (c.has(key)) {
            const double v = c.get_double(key);
            if (v < 0.0 || v > 1.0) c.fail(key, "must be in [0, 1]");
        }
    };
    positive("train.lr");
    positive("train.clip");
    positive("model_n.lr");
    positive("model_r.lr");
    unit_range("train.momentum");
    unit_range("env.p_aggressive");
    unit_range("collect.epsilon");
    at_least("train.episodes", 1);
    at_least("train.eval_every", 1);
    at_least("train.eval_episodes", 1);
    at_least("eval.final_episodes", 1);
    at_least("env.horizon", 1);
    at_least("env.n_targets", 0);
    at_least("collect.steps", 1);
    at_least("model_n.batch", 1);
    at_least("model_r.batch", 1);
    at_least("model_n.epochs", 0);
    at_least("model_r.epochs", 0);
    at_least("trajectory.episodes", 0);
    at_least("gradcheck.samples", 1);
    at_least("gradcheck.n_targets", 0);
    positive("gradcheck.fd_eps");
    positive("gradcheck.tolerance");
    if (c.has("collect.sigma") && c.get_double("collect.sigma") < 0.0) {
        c.fail("collect.sigma", "must be >= 0");
    }
    if (c.has("train.lambda_n") && c.get_double("train.lambda_n") < 0.0) {
        c.fail("train.lambda_n", "must be >= 0");
    }
    if (c.has("train.lambda_r") && c.get_double("train.lambda_r") < 0.0) {
        c.fail("train.lambda_r", "must be >= 0");
    }
    const int gh = c.get_int("gradcheck.horizon");
    if (gh < 1 || gh > 20) c.fail("gradcheck.horizon", "must be in [1, 20]");
}

// ------------------------------------------------------ spec assembly ----

std::vector<int> hidden_list(const Config& c, const std::string& key) {
    return c.get_int_list(key);
}

struct StateNorm {
    std::vector<double> shift, scale;
};

StateNorm state_norm_for(EnvKind kind, int n_targets) {
    StateNorm n;
    switch (kind) {
        case EnvKind::kAcc:
            n.shift = {15.0, 15.0, 40.0};
            n.scale = {15.0, 15.0, 40.0};
            break;
        case EnvKind::kLine:
            n.shift = {0.0};
            n.scale = {3.0};
            break;
        case EnvKind::kRoundabout:
            n.shift = {5.0, 6.0};
            n.scale = {40.0, 6.0};
            for (int i = 0; i < n_targets; ++i) {
                n.shift.insert(n.shift.end(), {0.0, 6.0, 0.0});
                n.scale.insert(n.scale.end(), {50.0, 6.0, 3.0});
            }
            break;
    }
    return n;
}

constexpr double kActionScale = 3.0;

// Policy heads emit O(1) values internally; the output scale maps them onto
// each environment's useful action range (ACC needs hard corrective
// accelerations, the others are clamped to +-3 m/s^2 anyway).
double policy_action_scale(EnvKind kind) {
    return kind == EnvKind::kAcc ? 15.0 : 3.0;
}

}  // namespace

MlpSpec make_policy_spec(EnvKind kind, int n_targets, const std::vector<int>& hidden) {
    const StateNorm n = state_norm_for(kind, n_targets);
    MlpSpec spec;
    spec.in_dim = static_cast<int>(n.shift.size());
    spec.hidden = hidden;
    spec.out_dim = 1;
    spec.in_shift = n.shift;
    spec.in_scale = n.scale;
    spec.out_shift = {0.0};
    spec.out_scale = {policy_action_scale(kind)};
    return spec;
}

MlpSpec make_model_spec(EnvKind kind, int n_targets, const std::vector<int>& hidden,
                        bool next_state) {
    const StateNorm n = state_norm_for(kind, n_targets);
    MlpSpec spec;
    spec.in_dim = static_cast<int>(n.shift.size()) + 1;
    spec.hidden = hidden;
    spec.in_shift = n.shift;
    spec.in_scale = n.scale;
    spec.in_shift.push_back(0.0);
    spec.in_scale.push_back(kActionScale);
    if (next_state) {
        spec.out_dim = static_cast<int>(n.shift.size());
        spec.out_shift = n.shift;
        spec.out_scale = n.scale;
    } else {
        spec.out_dim = 1;
    }
    return spec;
}

Config resolve_experiment_config(const Config& raw) {
    if (!raw.has("experiment")) {
        throw ConfigError(raw.source(), 0, "missing required key 'experiment'");
    }
    const std::string experiment = raw.get_string("experiment");
    const auto schema = schema_for(experiment, raw.source(), raw.line_of("experiment"));

    for (const auto& [key, value] : raw.items()) {
        if (!schema.count(key)) {
            throw ConfigError(raw.source(), raw.line_of(key), "unknown key '" + key + "'");
        }
        (void)value;
    }

    Config resolved = raw;
    for (const auto& [key, def] : schema) {
        if (resolved.has(key)) continue;
        if (def == nullptr) {
            throw ConfigError(raw.source(), 0, "missing required key '" + key + "'");
        }
        resolved.set(key, def);
    }
    validate_ranges(resolved);
    return resolved;
}

std::unique_ptr<Env> make_experiment_env(const Config& c) {
    const std::string experiment = c.get_string("experiment");
    if (experiment == "acc-analytic" || experiment == "acc-learned") {
        AccConfig cfg;
        cfg.horizon = c.get_int("env.horizon");
        return std::make_unique<AccEnv>(cfg);
    }
    if (experiment == "line-adversarial") {
        LineConfig cfg;
        cfg.horizon = c.get_int("env.horizon");
        return std::make_unique<LineEnv>(cfg);
    }
    RoundaboutConfig cfg;
    cfg.horizon = c.get_int("env.horizon");
    cfg.n_targets = c.get_int("env.n_targets");
    cfg.p_aggressive = c.get_double("env.p_aggressive");
    return std::make_unique<RoundaboutEnv>(cfg);
}

namespace {

// --------------------------------------------------- artifact writers ----

void write_manifest(const fs::path& dir, const Config& resolved) {
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw std::runtime_error("cannot write manifest");
    for (const auto& [k, v] : resolved.items()) out << k << " = " << v << "\n";
}

void write_curve_csv(const fs::path& dir, const TrainResult& r) {
    CsvWriter csv((dir / "curve.csv").string(),
                  {"episode", "objective", "supervised_next", "supervised_reward"});
    for (const auto& p : r.curve) {
        csv.row({std::to_string(p.episode), fmt_double(p.objective),
                 fmt_double(p.supervised_next), fmt_double(p.supervised_reward)});
    }
}

std::vector<std::string> eval_extra_keys(EnvKind kind) {
    switch (kind) {
        case EnvKind::kAcc: return {"in_band", "mean_abs_a"};
        case EnvKind::kLine: return {"mean_loss"};
        case EnvKind::kRoundabout: return {"success_rate", "violation_rate", "mean_steps"};
    }
    return {};
}

void write_eval_csv(const fs::path& dir, EnvKind kind, const std::vector<EvalPoint>& evals) {
    std::vector<std::string> header = {"episode", "mean_return"};
    const auto extras = eval_extra_keys(kind);
    header.insert(header.end(), extras.begin(), extras.end());
    CsvWriter csv((dir / "eval.csv").string(), header);
    for (const auto& p : evals) {
        std::vector<std::string> row = {std::to_string(p.episode),
                                        fmt_double(p.metrics.mean_return)};
        for (const auto& k : extras) row.push_back(fmt_double(p.metrics.extra.at(k)));
        csv.row(row);
    }
}

void write_trajectories(const fs::path& dir, Env& env, const MlpSpec& policy_spec,
                        const ParamVector& policy, int episodes, Seed seed) {
    const int d = env.state_dim();
    std::vector<std::string> header = {"episode", "t"};
    for (int i = 0; i < d; ++i) header.push_back("s" + std::to_string(i));
    header.push_back("a");
    header.push_back("r");
    for (int i = 0; i < d; ++i) header.push_back("shat" + std::to_string(i));
    for (int i = 0; i < d; ++i) header.push_back("nu" + std::to_string(i));
    header.push_back("done");
    CsvWriter csv((dir / "trajectory.csv").string(), header);

    for (int e = 0; e < episodes; ++e) {
        env.reset(derive_seed(seed, "trajectory", static_cast<std::uint64_t>(e)));
        bool done = false;
        int t = 0;
        while (!done && t < env.horizon()) {
            const std::vector<double> s = env.state();
            const double a = mlp_apply(policy_spec, policy, s)[0];
            const StepOut out = env.step(a);
            std::vector<std::string> row = {std::to_string(e), std::to_string(t)};
            for (double v : s) row.push_back(fmt_double(v));
            row.push_back(fmt_double(a));
            row.push_back(fmt_double(out.reward));
            for (double v : out.predicted) row.push_back(fmt_double(v));
            for (double v : out.residual) row.push_back(fmt_double(v));
            row.push_back(out.done ? "1" : "0");
            csv.row(row);
            done = out.done;
            ++t;
        }
    }
}

EvalCallback checkpoint_callback(const fs::path& dir, const MlpSpec& spec) {
    const fs::path ckpt_dir = dir / "checkpoints";
    fs::create_directories(ckpt_dir);
    return [ckpt_dir, &spec](int episode, const ParamVector& policy, const EvalMetrics&) {
        save_mlp((ckpt_dir / ("policy_ep" + std::to_string(episode) + ".txt")).string(), spec,
                 policy);
    };
}

// ------------------------------------------------------ rollout helpers ----

using ActionFn = std::function<double(std::span<const double>)>;

struct RolloutStats {
    double mean_return = 0.0;
    double mean_per_step_loss = 0.0;  // line
    double success_rate = 0.0;        // roundabout
    double violation_rate = 0.0;
};

RolloutStats run_rollouts(Env& env, const ActionFn& act, int episodes, Seed seed) {
    RolloutStats st;
    long steps = 0;
    double sum_return = 0.0, sum_loss = 0.0;
    int successes = 0, violations = 0;
    for (int e = 0; e < episodes; ++e) {
        env.reset(derive_seed(seed, "eval.episode", static_cast<std::uint64_t>(e)));
        bool done = false;
        int t = 0;
        while (!done && t < env.horizon()) {
            const double a = act(env.state());
            const StepOut out = env.step(a);
            sum_return += out.reward;
            sum_loss += -out.reward;
            if (out.success) ++successes;
            if (out.violation) ++violations;
            done = out.done;
            ++t;
            ++steps;
        }
    }
    st.mean_return = sum_return / episodes;
    st.mean_per_step_loss = sum_loss / static_cast<double>(steps);
    st.success_rate = static_cast<double>(successes) / episodes;
    st.violation_rate = static_cast<double>(violations) / episodes;
    return st;
}

// Scripted single-target probe: does the trained host cross the merge point
// before or after the target, and does it stay safe doing so?
struct ScenarioResult {
    int host_cross = -1;
    int target_cross = -1;
    bool violation = false;
};

ScenarioResult run_scenario(const RoundaboutConfig& base, DriverType type,
                            const MlpSpec& policy_spec, const ParamVector& policy) {
    RoundaboutConfig cfg = base;
    cfg.n_targets = 1;
    RoundaboutEnv env(cfg);
    env.reset_scripted(7.0, {{-35.0, 8.0, type}});
    ScenarioResult res;
    double host_prev = env.state()[0];
    double target_prev = env.state()[2];
    bool done = false;
    int t = 0;
    while (!done && t < cfg.horizon) {
        const double a = mlp_apply(policy_spec, policy, env.state())[0];
        const StepOut out = env.step(a);
        if (res.host_cross < 0 && host_prev < 0.0 && out.next[0] >= 0.0) res.host_cross = t;
        if (res.target_cross < 0 && target_prev < 0.0 && out.next[2] >= 0.0) res.target_cross = t;
        host_prev = out.next[0];
        target_prev = out.next[2];
        res.violation = res.violation || out.violation;
        done = out.done;
        ++t;
    }
    return res;
}

void write_scenarios(const fs::path& dir, const RoundaboutConfig& cfg, const MlpSpec& policy_spec,
                     const ParamVector& policy) {
    CsvWriter csv((dir / "scenarios.csv").string(),
                  {"scenario", "host_cross_step", "target_cross_step", "violation", "ok"});
    const ScenarioResult agg = run_scenario(cfg, DriverType::kAggressive, policy_spec, policy);
    const bool agg_ok = !agg.violation && agg.host_cross >= 0 && agg.target_cross >= 0 &&
                        agg.host_cross > agg.target_cross;
    csv.row({"aggressive", std::to_string(agg.host_cross), std::to_string(agg.target_cross),
             agg.violation ? "1" : "0", agg_ok ? "1" : "0"});
    const ScenarioResult def = run_scenario(cfg, DriverType::kDefensive, policy_spec, policy);
    const bool def_ok = !def.violation && def.host_cross >= 0 &&
                        (def.target_cross < 0 || def.host_cross < def.target_cross);
    csv.row({"defensive", std::to_string(def.host_cross), std::to_string(def.target_cross),
             def.violation ? "1" : "0", def_ok ? "1" : "0"});
}

// ------------------------------------------------------------- pipelines ----

struct FittedModels {
    MlpSpec spec_n, spec_r;
    ParamVector theta_n, theta_r;
    FitReport report_n, report_r;
    bool has_n = false, has_r = false;
};

FittedModels collect_and_fit(const Config& c, Env& env, EnvKind kind, int n_targets, bool fit_n,
                             bool fit_r, std::ostream& log) {
    const Seed seed = c.get_u64("seed");
    ExploreParams explore;
    explore.epsilon = c.get_double("collect.epsilon");
    explore.sigma = c.get_double("collect.sigma");
    explore.action_lo = c.get_double("collect.action_lo");
    explore.action_hi = c.get_double("collect.action_hi");
    const BehaviorFn coast = [](std::span<const double>) { return 0.0; };
    log << "collecting " << c.get_int("collect.steps") << " exploration tuples\n";
    const Dataset data = collect(env, coast, "coast", explore, c.get_int("collect.steps"),
                                 derive_seed(seed, "collect"));

    FittedModels m;
    if (fit_n) {
        m.spec_n = make_model_spec(kind, n_targets, hidden_list(c, "model_n.hidden"), true);
        m.theta_n = mlp_init(m.spec_n, derive_seed(seed, "init.model_n"));
        FitHyper hyper{c.get_double("model_n.lr"), c.get_int("model_n.batch"),
                       c.get_int("model_n.epochs")};
        m.report_n = fit_regression(data, FitTarget::kNextState, m.spec_n, m.theta_n, hyper,
                                    derive_seed(seed, "fit.model_n"));
        m.has_n = true;
        log << "model_n heldout mse " << m.report_n.heldout_mse << "\n";
    }
    if (fit_r) {
        m.spec_r = make_model_spec(kind, n_targets, hidden_list(c, "model_r.hidden"), false);
        m.theta_r = mlp_init(m.spec_r, derive_seed(seed, "init.model_r"));
        FitHyper hyper{c.get_double("model_r.lr"), c.get_int("model_r.batch"),
                       c.get_int("model_r.epochs")};
        m.report_r = fit_regression(data, FitTarget::kReward, m.spec_r, m.theta_r, hyper,
                                    derive_seed(seed, "fit.model_r"));
        m.has_r = true;
        log << "model_r heldout mse " << m.report_r.heldout_mse << "\n";
    }
    return m;
}

void write_predictors_csv(const fs::path& dir, const FittedModels& m) {
    CsvWriter csv((dir / "predictors.csv").string(), {"model", "train_mse", "heldout_mse"});
    if (m.has_n) {
        csv.row({"model_n", fmt_double(m.report_n.train_mse), fmt_double(m.report_n.heldout_mse)});
    }
    if (m.has_r) {
        csv.row({"model_r", fmt_double(m.report_r.train_mse), fmt_double(m.report_r.heldout_mse)});
    }
}

TrainConfig train_config_from(const Config& c) {
    TrainConfig t;
    t.episodes = c.get_int("train.episodes");
    t.lr = c.get_double("train.lr");
    t.momentum = c.get_double("train.momentum");
    t.clip = c.get_double("train.clip");
    t.eval_every = c.get_int("train.eval_every");
    t.eval_episodes = c.get_int("train.eval_episodes");
    t.seed = c.get_u64("seed");
    if (c.has("train.lambda_n")) t.lambda_n = c.get_double("train.lambda_n");
    if (c.has("train.lambda_r")) t.lambda_r = c.get_double("train.lambda_r");
    return t;
}

}  // namespace

void run_experiment(const Config& c, std::ostream& log) {
    const std::string experiment = c.get_string("experiment");
    const Seed seed = c.get_u64("seed");
    const fs::path dir = c.get_string("out");
    fs::create_directories(dir);
    write_manifest(dir, c);

    auto env = make_experiment_env(c);
    const EnvKind kind = env->kind();
    const int n_targets = c.has("env.n_targets") ? c.get_int("env.n_targets") : 0;

    MlpSpec policy_spec = make_policy_spec(kind, n_targets, hidden_list(c, "policy.hidden"));
    if (!c.get_string("policy.out_scale").empty()) {
        policy_spec.out_scale = {c.get_double("policy.out_scale")};
    }
    ParamVector policy_init = mlp_init(policy_spec, derive_seed(seed, "init.policy"));

    UnrollConfig ucfg;
    ucfg.horizon = c.get_int("env.horizon");
    const TrainConfig tcfg = train_config_from(c);

    FittedModels models;
    TrainResult result;

    if (experiment == "acc-analytic" || experiment == "line-adversarial") {
        log << "training policy (" << experiment << ")\n";
        result = train_policy(*env, ucfg, tcfg, policy_spec, std::move(policy_init), nullptr,
                              nullptr, nullptr, nullptr, checkpoint_callback(dir, policy_spec));
    } else if (experiment == "acc-learned") {
        models = collect_and_fit(c, *env, kind, n_targets, true, true, log);
        write_predictors_csv(dir, models);
        ucfg.next_model = ModelKind::kLearned;
        ucfg.reward_model = ModelKind::kLearned;
        log << "training policy against learned models\n";
        result = train_policy(*env, ucfg, tcfg, policy_spec, std::move(policy_init),
                              &models.spec_n, &models.theta_n, &models.spec_r, &models.theta_r,
                              checkpoint_callback(dir, policy_spec));
    } else if (experiment == "roundabout-given-dynamics") {
        models = collect_and_fit(c, *env, kind, n_targets, false, true, log);
        write_predictors_csv(dir, models);
        ucfg.next_model = ModelKind::kAnalytic;
        ucfg.reward_model = ModelKind::kLearned;
        log << "training policy with given dynamics and learned reward\n";
        result = train_policy(*env, ucfg, tcfg, policy_spec, std::move(policy_init), nullptr,
                              nullptr, &models.spec_r, &models.theta_r,
                              checkpoint_callback(dir, policy_spec));
    } else {  // roundabout-joint
        models = collect_and_fit(c, *env, kind, n_targets, false, true, log);
        write_predictors_csv(dir, models);
        const MlpSpec spec_n =
            make_model_spec(kind, n_targets, hidden_list(c, "model_n.hidden"), true);
        ParamVector theta_n = mlp_init(spec_n, derive_seed(seed, "init.model_n"));
        models.spec_n = spec_n;
        log << "joint training of policy, next-state model and reward model\n";
        result = train_joint(*env, ucfg, tcfg, policy_spec, std::move(policy_init), models.spec_n,
                             std::move(theta_n), models.spec_r, models.theta_r,
                             checkpoint_callback(dir, policy_spec));
    }

    write_curve_csv(dir, result);
    write_eval_csv(dir, kind, result.evals);
    write_trajectories(dir, *env, policy_spec, result.policy,
                       c.get_int("trajectory.episodes"), derive_seed(seed, "trajectory.root"));

    const fs::path ckpt_dir = dir / "checkpoints";
    fs::create_directories(ckpt_dir);
    save_mlp((ckpt_dir / "policy_final.txt").string(), policy_spec, result.policy);
    if (result.next_params) {
        save_mlp((ckpt_dir / "model_n_final.txt").string(), models.spec_n, *result.next_params);
    }
    if (result.reward_params) {
        save_mlp((ckpt_dir / "model_r_final.txt").string(), models.spec_r, *result.reward_params);
    }

    const int final_episodes = c.get_int("eval.final_episodes");
    if (experiment == "line-adversarial") {
        LineEnv line_env(LineEnv(LineConfig{c.get_int("env.horizon")}).config());
        const auto trained = run_rollouts(
            line_env,
            [&](std::span<const double> s) { return mlp_apply(policy_spec, result.policy, s)[0]; },
            final_episodes, derive_seed(seed, "final.trained"));
        const auto optimal = run_rollouts(
            line_env, [](std::span<const double> s) { return line_optimal_action(s[0]); },
            final_episodes, derive_seed(seed, "final.trained"));
        const auto zero = run_rollouts(
            line_env, [](std::span<const double>) { return 0.0; }, final_episodes,
            derive_seed(seed, "final.trained"));
        CsvWriter csv((dir / "comparison.csv").string(), {"policy", "mean_per_step_loss"});
        csv.row({"trained", fmt_double(trained.mean_per_step_loss)});
        csv.row({"optimal", fmt_double(optimal.mean_per_step_loss)});
        csv.row({"zero", fmt_double(zero.mean_per_step_loss)});
        log << "line mean per-step loss: trained " << trained.mean_per_step_loss << ", optimal "
            << optimal.mean_per_step_loss << ", zero " << zero.mean_per_step_loss << "\n";
    } else if (kind == EnvKind::kRoundabout) {
        const auto* renv = static_cast<RoundaboutEnv*>(env.get());
        const auto trained = run_rollouts(
            *env,
            [&](std::span<const double> s) { return mlp_apply(policy_spec, result.policy, s)[0]; },
            final_episodes, derive_seed(seed, "final.trained"));
        Rng baseline_rng(derive_seed(seed, "final.baseline"));
        const auto baseline = run_rollouts(
            *env, [&](std::span<const double>) { return baseline_rng.uniform(-3.0, 3.0); },
            final_episodes, derive_seed(seed, "final.trained"));
        CsvWriter csv((dir / "baseline.csv").string(),
                      {"policy", "success_rate", "violation_rate", "mean_return"});
        csv.row({"trained", fmt_double(trained.success_rate), fmt_double(trained.violation_rate),
                 fmt_double(trained.mean_return)});
        csv.row({"random", fmt_double(baseline.success_rate), fmt_double(baseline.violation_rate),
                 fmt_double(baseline.mean_return)});
        write_scenarios(dir, renv->config(), policy_spec, result.policy);
        log << "roundabout success rate: trained " << trained.success_rate << ", random "
            << baseline.success_rate << "\n";
    } else {
        const EvalMetrics final_metrics =
            evaluate(*env, policy_spec, result.policy, final_episodes, derive_seed(seed, "final"));
        CsvWriter csv((dir / "final_eval.csv").string(), {"metric", "value"});
        csv.row({"mean_return", fmt_double(final_metrics.mean_return)});
        for (const auto& [k, v] : final_metrics.extra) csv.row({k, fmt_double(v)});
        log << "final mean return " << final_metrics.mean_return << "\n";
    }
    log << "artifacts written to " << dir.string() << "\n";
}

int run_gradcheck(const Config& c, double perturb, std::ostream& log) {
    const std::string experiment = c.get_string("experiment");
    const fs::path dir = c.get_string("out");
    fs::create_directories(dir);

    Config env_cfg = c;
    env_cfg.set("env.horizon", std::to_string(c.get_int("gradcheck.horizon")));
    if (c.has("gradcheck.n_targets")) {
        env_cfg.set("env.n_targets", c.get_string("gradcheck.n_targets"));
    }
    auto env = make_experiment_env(env_cfg);
    const EnvKind kind = env->kind();
    const int n_targets =
        env_cfg.has("env.n_targets") ? env_cfg.get_int("env.n_targets") : 0;

    UnrollConfig ucfg;
    ucfg.horizon = c.get_int("gradcheck.horizon");
    MlpSpec policy_spec =
        make_policy_spec(kind, n_targets, hidden_list(c, "gradcheck.policy_hidden"));
    std::optional<MlpSpec> spec_n, spec_r;
    if (experiment == "acc-learned" || experiment == "roundabout-joint") {
        ucfg.next_model = ModelKind::kLearned;
        spec_n = make_model_spec(kind, n_targets, hidden_list(c, "gradcheck.model_hidden"), true);
    }
    if (experiment != "acc-analytic" && experiment != "line-adversarial") {
        ucfg.reward_model = ModelKind::kLearned;
        spec_r = make_model_spec(kind, n_targets, hidden_list(c, "gradcheck.model_hidden"), false);
    }
    if (experiment == "roundabout-joint") ucfg.joint = true;

    GradCheckConfig gcfg;
    gcfg.samples = c.get_int("gradcheck.samples");
    gcfg.fd_eps = c.get_double("gradcheck.fd_eps");
    gcfg.tolerance = c.get_double("gradcheck.tolerance");
    gcfg.seed = c.get_u64("seed");
    gcfg.perturb = perturb;

    const GradCheckResult res = gradcheck_unroll(*env, ucfg, gcfg, policy_spec,
                                                 spec_n ? &*spec_n : nullptr,
                                                 spec_r ? &*spec_r : nullptr);
    CsvWriter csv((dir / "gradcheck.csv").string(),
                  {"experiment", "samples", "coords", "max_rel_err", "seconds"});
    csv.row({experiment, std::to_string(gcfg.samples), std::to_string(res.coords_checked),
             fmt_double(res.max_rel_err), fmt_double(res.seconds)});

    log << experiment << ": max rel err " << res.max_rel_err << " over " << res.coords_checked
        << " coordinates in " << res.seconds << " s\n";
    if (!res.pass(gcfg.tolerance)) {
        log << "gradcheck FAILED (tolerance " << gcfg.tolerance << ")\n";
        return kExitNumerical;
    }
    log << "gradcheck passed (tolerance " << gcfg.tolerance << ")\n";
    return kExitOk;
}

}  // namespace predplan
