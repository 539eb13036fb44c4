#include "predplan/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "predplan/finite_diff.hpp"

namespace predplan {

namespace {

double compare(const std::vector<double>& bptt, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < bptt.size(); ++i) {
        const double denom = std::max({std::fabs(bptt[i]), std::fabs(fd[i]), 1e-6});
        worst = std::max(worst, std::fabs(bptt[i] - fd[i]) / denom);
    }
    return worst;
}

}  // namespace

GradCheckResult gradcheck_unroll(Env& env, const UnrollConfig& unroll_cfg,
                                 const GradCheckConfig& cfg, const MlpSpec& policy_spec,
                                 const MlpSpec* next_spec, const MlpSpec* reward_spec) {
    const auto start = std::chrono::steady_clock::now();
    GradCheckResult result;

    for (int k = 0; k < cfg.samples; ++k) {
        const std::uint64_t kk = static_cast<std::uint64_t>(k);
        ParamVector policy = mlp_init(policy_spec, derive_seed(cfg.seed, "gradcheck.policy", kk));
        ParamVector next_params, reward_params;
        if (unroll_cfg.next_model == ModelKind::kLearned) {
            next_params = mlp_init(*next_spec, derive_seed(cfg.seed, "gradcheck.next", kk));
        }
        if (unroll_cfg.reward_model == ModelKind::kLearned) {
            reward_params = mlp_init(*reward_spec, derive_seed(cfg.seed, "gradcheck.reward", kk));
        }
        const ParamVector* np =
            unroll_cfg.next_model == ModelKind::kLearned ? &next_params : nullptr;
        const ParamVector* rp =
            unroll_cfg.reward_model == ModelKind::kLearned ? &reward_params : nullptr;

        UnrollResult u =
            unroll_episode(env, unroll_cfg, policy_spec, policy, next_spec, np, reward_spec, rp,
                           derive_seed(cfg.seed, "gradcheck.episode", kk));
        EpisodeGradients g = episode_gradients(u);
        if (cfg.perturb != 0.0 && !g.policy.empty()) g.policy[0] += cfg.perturb;

        const ReplayData& replay = u.replay;
        auto check_set = [&](const std::vector<double>& bptt, ParamVector& varying,
                             auto make_args) {
            const auto f = [&](const std::vector<double>& flat) {
                varying.values() = flat;
                auto [pol, nxt, rew] = make_args();
                return replay_objective(replay, unroll_cfg, env, policy_spec, *pol, next_spec, nxt,
                                        reward_spec, rew);
            };
            const std::vector<double> at = varying.values();
            const std::vector<double> fd = finite_diff_grad_flat(f, at, cfg.fd_eps);
            varying.values() = at;
            result.max_rel_err = std::max(result.max_rel_err, compare(bptt, fd));
            result.coords_checked += static_cast<long>(bptt.size());
        };

        check_set(g.policy, policy, [&] { return std::make_tuple(&policy, np, rp); });
        if (np) {
            check_set(g.next, next_params, [&] { return std::make_tuple(&policy, np, rp); });
        }
        if (rp) {
            check_set(g.reward, reward_params, [&] { return std::make_tuple(&policy, np, rp); });
        }
    }

    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace predplan
