#include "predplan/train.hpp"

#include <cmath>

#include "predplan/acc_env.hpp"

namespace predplan {

namespace {

void clip_to_norm(std::vector<double>& g, double clip) {
    if (clip <= 0.0) return;
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    if (norm > clip) {
        const double f = clip / norm;
        for (double& v : g) v *= f;
    }
}

struct Momentum {
    std::vector<double> velocity;

    void ascend(ParamVector& theta, std::vector<double> grad, double lr, double mu, double clip) {
        clip_to_norm(grad, clip);
        if (velocity.empty()) velocity.assign(grad.size(), 0.0);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            velocity[i] = mu * velocity[i] + grad[i];
            theta.values()[i] += lr * velocity[i];
        }
    }
};

}  // namespace

EvalMetrics evaluate(Env& env, const MlpSpec& policy_spec, const ParamVector& policy,
                     int episodes, Seed seed) {
    if (episodes < 1) throw TapeError("evaluate: episodes must be >= 1");
    EvalMetrics m;
    double sum_return = 0.0;
    long steps = 0, in_band = 0, successes = 0, violations = 0;
    double sum_abs_a = 0.0, sum_loss = 0.0, sum_steps = 0.0;

    for (int e = 0; e < episodes; ++e) {
        env.reset(derive_seed(seed, "eval.episode", static_cast<std::uint64_t>(e)));
        double ep_return = 0.0;
        bool done = false;
        int t = 0;
        bool success = false, violation = false;
        while (!done && t < env.horizon()) {
            const std::vector<double> s = env.state();
            const double a = mlp_apply(policy_spec, policy, s)[0];
            if (env.kind() == EnvKind::kAcc) {
                const double xstar = 1.0 + pospart_k(1.5 * s[1] - 1.0);
                if (std::fabs(s[2] / xstar - 1.0) <= 0.3) ++in_band;
                sum_abs_a += std::fabs(a);
            }
            const StepOut out = env.step(a);
            ep_return += out.reward;
            if (env.kind() == EnvKind::kLine) sum_loss += -out.reward;
            success = success || out.success;
            violation = violation || out.violation;
            done = out.done;
            ++t;
            ++steps;
        }
        sum_return += ep_return;
        sum_steps += t;
        if (success) ++successes;
        if (violation) ++violations;
    }

    m.mean_return = sum_return / episodes;
    switch (env.kind()) {
        case EnvKind::kAcc:
            m.extra["in_band"] = static_cast<double>(in_band) / static_cast<double>(steps);
            m.extra["mean_abs_a"] = sum_abs_a / static_cast<double>(steps);
            break;
        case EnvKind::kLine:
            m.extra["mean_loss"] = sum_loss / static_cast<double>(steps);
            break;
        case EnvKind::kRoundabout:
            m.extra["success_rate"] = static_cast<double>(successes) / episodes;
            m.extra["violation_rate"] = static_cast<double>(violations) / episodes;
            m.extra["mean_steps"] = sum_steps / episodes;
            break;
    }
    return m;
}

namespace {

TrainResult train_impl(Env& env, UnrollConfig unroll_cfg, const TrainConfig& cfg,
                       const MlpSpec& policy_spec, ParamVector policy,
                       const MlpSpec* next_spec, ParamVector* next_params, bool learn_next,
                       const MlpSpec* reward_spec, ParamVector* reward_params, bool learn_reward,
                       const EvalCallback& on_eval) {
    if (cfg.lr < 0.0) throw TapeError("train: negative learning rate");
    if (cfg.episodes < 0) throw TapeError("train: negative episode count");
    unroll_cfg.lambda_n = cfg.lambda_n;
    unroll_cfg.lambda_r = cfg.lambda_r;

    TrainResult result;
    Momentum m_pi, m_n, m_r;

    auto run_eval = [&](int episode) {
        const EvalMetrics metrics = evaluate(env, policy_spec, policy, cfg.eval_episodes,
                                             derive_seed(cfg.seed, "train.eval"));
        result.evals.push_back({episode, metrics});
        if (on_eval) on_eval(episode, policy, metrics);
    };

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        if (ep % cfg.eval_every == 0) run_eval(ep);
        UnrollResult u = unroll_episode(
            env, unroll_cfg, policy_spec, policy, next_spec, next_params, reward_spec,
            reward_params, derive_seed(cfg.seed, "train.episode", static_cast<std::uint64_t>(ep)));
        EpisodeGradients g = episode_gradients(u);
        if (!std::isfinite(g.objective)) {
            throw NumericalError("train: objective diverged at episode " + std::to_string(ep));
        }
        EpisodePoint p;
        p.episode = ep;
        p.objective = g.objective;
        if (unroll_cfg.joint) {
            p.supervised_next = u.tape.scalar(u.supervised_next);
            p.supervised_reward = u.tape.scalar(u.supervised_reward);
        }
        result.curve.push_back(p);

        m_pi.ascend(policy, std::move(g.policy), cfg.lr, cfg.momentum, cfg.clip);
        if (learn_next) m_n.ascend(*next_params, std::move(g.next), cfg.lr, cfg.momentum, cfg.clip);
        if (learn_reward) {
            m_r.ascend(*reward_params, std::move(g.reward), cfg.lr, cfg.momentum, cfg.clip);
        }
    }
    run_eval(cfg.episodes);

    result.policy = std::move(policy);
    if (next_params) result.next_params = *next_params;
    if (reward_params) result.reward_params = *reward_params;
    return result;
}

}  // namespace

TrainResult train_policy(Env& env, const UnrollConfig& unroll_cfg, const TrainConfig& cfg,
                         const MlpSpec& policy_spec, ParamVector policy_init,
                         const MlpSpec* next_spec, const ParamVector* next_params,
                         const MlpSpec* reward_spec, const ParamVector* reward_params,
                         const EvalCallback& on_eval) {
    ParamVector next_copy, reward_copy;
    ParamVector* np = nullptr;
    ParamVector* rp = nullptr;
    if (next_params) {
        next_copy = *next_params;
        np = &next_copy;
    }
    if (reward_params) {
        reward_copy = *reward_params;
        rp = &reward_copy;
    }
    return train_impl(env, unroll_cfg, cfg, policy_spec, std::move(policy_init), next_spec, np,
                      /*learn_next=*/false, reward_spec, rp, /*learn_reward=*/false, on_eval);
}

TrainResult train_joint(Env& env, const UnrollConfig& unroll_cfg, const TrainConfig& cfg,
                        const MlpSpec& policy_spec, ParamVector policy_init,
                        const MlpSpec& next_spec, ParamVector next_init,
                        const MlpSpec& reward_spec, ParamVector reward_init,
                        const EvalCallback& on_eval) {
    UnrollConfig u = unroll_cfg;
    u.next_model = ModelKind::kLearned;
    u.reward_model = ModelKind::kLearned;
    u.joint = true;
    return train_impl(env, u, cfg, policy_spec, std::move(policy_init), &next_spec, &next_init,
                      /*learn_next=*/true, &reward_spec, &reward_init, /*learn_reward=*/true,
                      on_eval);
}

}  // namespace predplan
