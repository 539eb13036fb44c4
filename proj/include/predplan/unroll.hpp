#pragma once

#include <optional>
#include <vector>

#include "predplan/env.hpp"
#include "predplan/mlp.hpp"

namespace predplan {

enum class ModelKind { kAnalytic, kLearned };

struct UnrollConfig {
    int horizon = 1;
    ModelKind next_model = ModelKind::kAnalytic;
    ModelKind reward_model = ModelKind::kAnalytic;
    bool joint = false;      // add supervised prediction losses to the objective
    double lambda_n = 1.0;
    double lambda_r = 1.0;
};

// Everything needed to re-evaluate the unrolled objective as a pure function
// of the parameters: the realized initial state, residuals, and supervised
// targets, with the episode length pinned to what actually happened.
struct ReplayStep {
    std::vector<double> nu;
    std::vector<double> s_next;
    double r_true = 0.0;
};

struct ReplayData {
    std::vector<double> s1;
    std::vector<ReplayStep> steps;
};

struct UnrollResult {
    Tape tape;
    NodeId objective = -1;
    NodeId sum_rewards = -1;
    NodeId supervised_next = -1;    // -1 unless joint
    NodeId supervised_reward = -1;  // -1 unless joint
    std::vector<StepRecord> trace;
    double true_return = 0.0;
    ReplayData replay;
    MlpOnTape policy;
    std::optional<MlpOnTape> next_model;
    std::optional<MlpOnTape> reward_model;
    // simulator outputs enter the tape through these gradient-blocked leaves
    NodeId initial_state_node = -1;
    std::vector<NodeId> residual_nodes;
    std::vector<NodeId> target_nodes;
    std::vector<std::size_t> step_first_node;
};

// Rolls the policy against the live simulator for up to cfg.horizon steps and
// records the whole episode as one differentiable tape. Per step the policy
// action and the model prediction are differentiable; the simulator's residual
// is added through a blocked leaf, so the forward state stays exactly the
// simulated one while gradients only flow through the predictable part.
UnrollResult unroll_episode(Env& env, const UnrollConfig& cfg, const MlpSpec& policy_spec,
                            const ParamVector& policy, const MlpSpec* next_spec,
                            const ParamVector* next_params, const MlpSpec* reward_spec,
                            const ParamVector* reward_params, Seed seed);

struct EpisodeGradients {
    double objective = 0.0;
    std::vector<double> policy;
    std::vector<double> next;
    std::vector<double> reward;
};

// BPTT over the recorded tape. Throws NumericalError (with the step index of
// the first non-finite adjoint) if the backward pass blows up.
EpisodeGradients episode_gradients(UnrollResult& u);

// The unrolled objective for fixed residuals; the finite-difference oracle
// evaluates this while perturbing parameters.
double replay_objective(const ReplayData& replay, const UnrollConfig& cfg, const Env& env,
                        const MlpSpec& policy_spec, const ParamVector& policy,
                        const MlpSpec* next_spec, const ParamVector* next_params,
                        const MlpSpec* reward_spec, const ParamVector* reward_params);

}  // namespace predplan
