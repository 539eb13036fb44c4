#include "predplan/unroll.hpp"

#include <cmath>
#include <string>

namespace predplan {

namespace {

void check_model_args(const UnrollConfig& cfg, const MlpSpec* next_spec,
                      const ParamVector* next_params, const MlpSpec* reward_spec,
                      const ParamVector* reward_params) {
    if (cfg.horizon < 1) throw TapeError("unroll: horizon must be >= 1");
    if (cfg.next_model == ModelKind::kLearned && (!next_spec || !next_params)) {
        throw TapeError("unroll: learned next-state model requires spec and parameters");
    }
    if (cfg.reward_model == ModelKind::kLearned && (!reward_spec || !reward_params)) {
        throw TapeError("unroll: learned reward model requires spec and parameters");
    }
    if (cfg.joint && (cfg.next_model != ModelKind::kLearned ||
                      cfg.reward_model != ModelKind::kLearned)) {
        throw TapeError("unroll: joint training requires learned models");
    }
}

}  // namespace

UnrollResult unroll_episode(Env& env, const UnrollConfig& cfg, const MlpSpec& policy_spec,
                            const ParamVector& policy, const MlpSpec* next_spec,
                            const ParamVector* next_params, const MlpSpec* reward_spec,
                            const ParamVector* reward_params, Seed seed) {
    check_model_args(cfg, next_spec, next_params, reward_spec, reward_params);
    if (cfg.reward_model == ModelKind::kAnalytic && !env.has_analytic_reward()) {
        throw TapeError(std::string("unroll: ") + env.name() + " has no analytic reward");
    }

    env.reset(seed);

    UnrollResult u;
    Tape& tape = u.tape;
    u.policy = attach_mlp(tape, policy_spec, policy);
    if (cfg.next_model == ModelKind::kLearned) {
        u.next_model = attach_mlp(tape, *next_spec, *next_params);
    }
    if (cfg.reward_model == ModelKind::kLearned) {
        u.reward_model = attach_mlp(tape, *reward_spec, *reward_params);
    }

    u.replay.s1 = env.state();
    NodeId s_node = tape.constant(u.replay.s1);
    u.initial_state_node = s_node;

    NodeId sum_r = -1, sum_n = -1, sum_rr = -1;
    for (int t = 0; t < cfg.horizon; ++t) {
        u.step_first_node.push_back(tape.size());

        const NodeId a_node = u.policy.forward(tape, s_node);
        if (tape.value(a_node).size() != 1) throw TapeError("unroll: policy output must be scalar");
        const double a_val = tape.scalar(a_node);

        const NodeId model_inputs[2] = {s_node, a_node};
        const NodeId s_hat_node =
            cfg.next_model == ModelKind::kAnalytic
                ? env.predictable_node(tape, s_node, a_node)
                : u.next_model->forward(tape, std::span<const NodeId>(model_inputs));
        const NodeId r_hat_node =
            cfg.reward_model == ModelKind::kAnalytic
                ? env.reward_node(tape, s_node, a_node)
                : u.reward_model->forward(tape, std::span<const NodeId>(model_inputs));

        const StepOut out = env.step(a_val);

        // residual against whatever prediction is on the tape
        std::vector<double> nu;
        if (cfg.next_model == ModelKind::kAnalytic) {
            const auto hat = tape.value(s_hat_node);
            for (std::size_t i = 0; i < hat.size(); ++i) {
                if (hat[i] != out.predicted[i]) {
                    throw TapeError("unroll: analytic prediction diverged from simulator at step " +
                                    std::to_string(t));
                }
            }
            nu = out.residual;
        } else {
            const auto hat = tape.value(s_hat_node);
            nu.resize(hat.size());
            for (std::size_t i = 0; i < hat.size(); ++i) nu[i] = out.next[i] - hat[i];
        }
        const NodeId nu_node = tape.constant(nu);
        u.residual_nodes.push_back(nu_node);
        const NodeId s_next_node = tape.add(s_hat_node, nu_node);

        if (cfg.joint) {
            const NodeId target_n = tape.constant(mlp_normalize_out(*next_spec, out.next));
            u.target_nodes.push_back(target_n);
            const NodeId term_n =
                tape.sq_diff(u.next_model->normalize_out(tape, s_hat_node), target_n);
            sum_n = sum_n == -1 ? term_n : tape.add(sum_n, term_n);

            const NodeId target_r =
                tape.constant(mlp_normalize_out(*reward_spec, std::vector<double>{out.reward}));
            u.target_nodes.push_back(target_r);
            const NodeId term_r =
                tape.sq_diff(u.reward_model->normalize_out(tape, r_hat_node), target_r);
            sum_rr = sum_rr == -1 ? term_r : tape.add(sum_rr, term_r);
        }

        StepRecord rec;
        rec.s = std::vector<double>(tape.value(s_node).begin(), tape.value(s_node).end());
        rec.a = a_val;
        rec.r = out.reward;
        rec.s_next = std::vector<double>(tape.value(s_next_node).begin(),
                                         tape.value(s_next_node).end());
        rec.s_hat = std::vector<double>(tape.value(s_hat_node).begin(),
                                        tape.value(s_hat_node).end());
        rec.nu = nu;
        rec.done = out.done;
        u.trace.push_back(std::move(rec));
        u.replay.steps.push_back({nu, out.next, out.reward});
        u.true_return += out.reward;

        sum_r = sum_r == -1 ? r_hat_node : tape.add(sum_r, r_hat_node);
        s_node = s_next_node;
        if (out.done) break;
    }

    u.sum_rewards = sum_r;
    NodeId objective = sum_r;
    if (cfg.joint) {
        u.supervised_next = sum_n;
        u.supervised_reward = sum_rr;
        objective = tape.sub(objective, tape.scale(cfg.lambda_n, sum_n));
        objective = tape.sub(objective, tape.scale(cfg.lambda_r, sum_rr));
    }
    u.objective = objective;
    return u;
}

EpisodeGradients episode_gradients(UnrollResult& u) {
    EpisodeGradients g;
    g.objective = u.tape.scalar(u.objective);
    const auto grads = u.tape.backward(u.objective);

    auto flatten = [&](const MlpOnTape& m) {
        std::vector<double> flat;
        for (NodeId id : m.binding.nodes) {
            auto it = grads.find(id);
            if (it == grads.end()) throw TapeError("unroll: missing gradient for bound slice");
            flat.insert(flat.end(), it->second.begin(), it->second.end());
        }
        return flat;
    };
    g.policy = flatten(u.policy);
    if (u.next_model) g.next = flatten(*u.next_model);
    if (u.reward_model) g.reward = flatten(*u.reward_model);

    auto finite = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    if (!finite(g.policy) || !finite(g.next) || !finite(g.reward)) {
        // locate the earliest step whose adjoints went non-finite
        for (std::size_t id = 0; id < u.tape.size(); ++id) {
            for (double adj : u.tape.node(static_cast<NodeId>(id)).adjoint) {
                if (!std::isfinite(adj)) {
                    std::size_t step = 0;
                    for (std::size_t s = 0; s < u.step_first_node.size(); ++s) {
                        if (u.step_first_node[s] <= id) step = s;
                    }
                    throw NumericalError("non-finite adjoint at step " + std::to_string(step));
                }
            }
        }
        throw NumericalError("non-finite gradient");
    }
    return g;
}

double replay_objective(const ReplayData& replay, const UnrollConfig& cfg, const Env& env,
                        const MlpSpec& policy_spec, const ParamVector& policy,
                        const MlpSpec* next_spec, const ParamVector* next_params,
                        const MlpSpec* reward_spec, const ParamVector* reward_params) {
    check_model_args(cfg, next_spec, next_params, reward_spec, reward_params);
    Tape tape;
    const MlpOnTape pol = attach_mlp(tape, policy_spec, policy);
    std::optional<MlpOnTape> nm, rm;
    if (cfg.next_model == ModelKind::kLearned) nm = attach_mlp(tape, *next_spec, *next_params);
    if (cfg.reward_model == ModelKind::kLearned) rm = attach_mlp(tape, *reward_spec, *reward_params);

    NodeId s_node = tape.constant(replay.s1);
    NodeId sum_r = -1, sum_n = -1, sum_rr = -1;
    for (const ReplayStep& step : replay.steps) {
        const NodeId a_node = pol.forward(tape, s_node);
        const NodeId model_inputs[2] = {s_node, a_node};
        const NodeId s_hat_node = cfg.next_model == ModelKind::kAnalytic
                                      ? env.predictable_node(tape, s_node, a_node)
                                      : nm->forward(tape, std::span<const NodeId>(model_inputs));
        const NodeId r_hat_node = cfg.reward_model == ModelKind::kAnalytic
                                      ? env.reward_node(tape, s_node, a_node)
                                      : rm->forward(tape, std::span<const NodeId>(model_inputs));
        const NodeId s_next_node = tape.add(s_hat_node, tape.constant(step.nu));

        if (cfg.joint) {
            const NodeId target_n = tape.constant(mlp_normalize_out(*next_spec, step.s_next));
            const NodeId term_n = tape.sq_diff(nm->normalize_out(tape, s_hat_node), target_n);
            sum_n = sum_n == -1 ? term_n : tape.add(sum_n, term_n);
            const NodeId target_r =
                tape.constant(mlp_normalize_out(*reward_spec, std::vector<double>{step.r_true}));
            const NodeId term_r = tape.sq_diff(rm->normalize_out(tape, r_hat_node), target_r);
            sum_rr = sum_rr == -1 ? term_r : tape.add(sum_rr, term_r);
        }

        sum_r = sum_r == -1 ? r_hat_node : tape.add(sum_r, r_hat_node);
        s_node = s_next_node;
    }
    NodeId objective = sum_r;
    if (cfg.joint) {
        objective = tape.sub(objective, tape.scale(cfg.lambda_n, sum_n));
        objective = tape.sub(objective, tape.scale(cfg.lambda_r, sum_rr));
    }
    return tape.scalar(objective);
}

}  // namespace predplan
