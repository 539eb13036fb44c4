#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "predplan/unroll.hpp"

namespace predplan {

struct TrainConfig {
    int episodes = 1000;
    double lr = 1e-3;
    double momentum = 0.9;
    double clip = 1.0;  // gradient-norm clip per parameter set
    double lambda_n = 1.0;
    double lambda_r = 1.0;
    int eval_every = 200;
    int eval_episodes = 20;
    Seed seed = 1;
};

struct EvalMetrics {
    double mean_return = 0.0;
    std::map<std::string, double> extra;  // fixed keys per environment kind
};

struct EpisodePoint {
    int episode = 0;
    double objective = 0.0;
    double supervised_next = 0.0;
    double supervised_reward = 0.0;
};

struct EvalPoint {
    int episode = 0;
    EvalMetrics metrics;
};

struct TrainResult {
    ParamVector policy;
    std::optional<ParamVector> next_params;
    std::optional<ParamVector> reward_params;
    std::vector<EpisodePoint> curve;
    std::vector<EvalPoint> evals;
};

using EvalCallback =
    std::function<void(int episode, const ParamVector& policy, const EvalMetrics& metrics)>;

// Deterministic rollouts with the true simulator rewards (never the model's).
EvalMetrics evaluate(Env& env, const MlpSpec& policy_spec, const ParamVector& policy,
                     int episodes, Seed seed);

// Single-episode SGD ascent with momentum and per-set gradient clipping.
// Evaluates at episode 0, every eval_every episodes, and after the last one.
TrainResult train_policy(Env& env, const UnrollConfig& unroll_cfg, const TrainConfig& cfg,
                         const MlpSpec& policy_spec, ParamVector policy_init,
                         const MlpSpec* next_spec = nullptr,
                         const ParamVector* next_params = nullptr,
                         const MlpSpec* reward_spec = nullptr,
                         const ParamVector* reward_params = nullptr,
                         const EvalCallback& on_eval = {});

// Joint ascent of the policy together with both predictors; the unroll adds
// the supervised losses with the given lambda weights.
TrainResult train_joint(Env& env, const UnrollConfig& unroll_cfg, const TrainConfig& cfg,
                        const MlpSpec& policy_spec, ParamVector policy_init,
                        const MlpSpec& next_spec, ParamVector next_init,
                        const MlpSpec& reward_spec, ParamVector reward_init,
                        const EvalCallback& on_eval = {});

}  // namespace predplan
