#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "predplan/acc_env.hpp"
#include "predplan/gradcheck.hpp"
#include "predplan/line_env.hpp"
#include "predplan/roundabout_env.hpp"
#include "predplan/unroll.hpp"

using namespace predplan;

namespace {

MlpSpec policy_spec_1d() {
    MlpSpec s;
    s.in_dim = 1;
    s.hidden = {4};
    s.out_dim = 1;
    s.in_shift = {0.0};
    s.in_scale = {3.0};
    return s;
}

MlpSpec policy_spec_acc() {
    MlpSpec s;
    s.in_dim = 3;
    s.hidden = {8};
    s.out_dim = 1;
    s.in_shift = {15.0, 15.0, 40.0};
    s.in_scale = {15.0, 15.0, 40.0};
    return s;
}

MlpSpec policy_spec_round(int n_targets) {
    MlpSpec s;
    s.in_dim = 2 + 3 * n_targets;
    s.hidden = {16};
    s.out_dim = 1;
    return s;
}

MlpSpec model_spec_round(int n_targets, bool next_state) {
    MlpSpec s;
    s.in_dim = 3 + 3 * n_targets;
    s.hidden = {16};
    s.out_dim = next_state ? 2 + 3 * n_targets : 1;
    return s;
}

}  // namespace

TEST_CASE("horizon-1 objective equals the single reward value") {
    LineEnv env;
    const MlpSpec spec = policy_spec_1d();
    const ParamVector pv = mlp_init(spec, 2);
    UnrollConfig cfg;
    cfg.horizon = 1;
    UnrollResult u =
        unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 3);
    REQUIRE(u.trace.size() == 1);
    CHECK(u.tape.scalar(u.objective) == u.trace[0].r);
    CHECK(u.true_return == u.trace[0].r);
}

TEST_CASE("analytic ACC unroll carries the simulator state bitwise") {
    AccEnv env;
    const MlpSpec spec = policy_spec_acc();
    const ParamVector pv = mlp_init(spec, 5);
    UnrollConfig cfg;
    cfg.horizon = 25;
    UnrollResult u =
        unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 11);
    REQUIRE(u.trace.size() == 25);

    // independent raw rollout replaying the recorded actions
    AccEnv env2;
    env2.reset(11);
    for (const StepRecord& rec : u.trace) {
        CHECK(env2.state() == rec.s);
        const StepOut out = env2.step(rec.a);
        CHECK(out.next == rec.s_next);
        CHECK(out.reward == rec.r);
        for (std::size_t i = 0; i < rec.s_next.size(); ++i) {
            CHECK(rec.s_next[i] == rec.s_hat[i] + rec.nu[i]);
        }
    }
    // with analytic rewards the unroll objective is the true return, exactly
    CHECK(u.tape.scalar(u.objective) == u.true_return);
}

TEST_CASE("simulator outputs enter only through blocked leaves") {
    AccEnv env;
    const MlpSpec spec = policy_spec_acc();
    const ParamVector pv = mlp_init(spec, 5);
    UnrollConfig cfg;
    cfg.horizon = 10;
    UnrollResult u =
        unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 4);

    CHECK(u.tape.node(u.initial_state_node).kind == OpKind::kLeafConst);
    REQUIRE(u.residual_nodes.size() == 10);
    const auto grads = u.tape.backward(u.objective);
    for (NodeId nu : u.residual_nodes) {
        CHECK(u.tape.node(nu).kind == OpKind::kLeafConst);
        CHECK(u.tape.node(nu).inputs.empty());  // a source: nothing flows through it
        CHECK(grads.count(nu) == 0);            // and it is never reported
    }
}

TEST_CASE("two-step line game gradient sees the future through the state chain") {
    // J = loss(s1, a1) + loss(s2, a2), s2 = s1 + a1 + nu, s1 = 1.8, a2 = 0.
    // With a1 = -0.2 the adversary pushes s2 to 2.1: dJ/da1 = -0.1 + 1 = 0.9.
    // With a1 = -0.5 it lands at 1.8 (no future penalty): dJ/da1 = -0.1.
    auto grad_a1 = [](double a1_val) {
        LineEnv env;
        Tape t;
        const NodeId a1 = t.param({a1_val});
        const NodeId a2 = t.param({0.0});
        const NodeId s1 = t.constant(1.8);
        const NodeId r1 = env.reward_node(t, s1, a1);
        const LineStepOut k = line_step_kernel(1.8, a1_val);
        const NodeId s2 = t.add(env.predictable_node(t, s1, a1), t.constant(k.nu));
        const NodeId r2 = env.reward_node(t, s2, a2);
        const NodeId loss = t.scale(-1.0, t.add(r1, r2));
        return t.backward(loss).at(a1)[0];
    };
    CHECK(grad_a1(-0.2) == 0.9);
    CHECK(grad_a1(-0.5) == -0.1);
}

TEST_CASE("BPTT matches finite differences with frozen residuals") {
    GradCheckConfig gc;
    gc.samples = 3;
    gc.fd_eps = 1e-6;
    gc.seed = 31;

    SUBCASE("line, analytic models") {
        LineEnv env;
        UnrollConfig cfg;
        cfg.horizon = 5;
        const MlpSpec spec = policy_spec_1d();
        const auto res = gradcheck_unroll(env, cfg, gc, spec, nullptr, nullptr);
        CHECK(res.max_rel_err <= 1e-4);
    }
    SUBCASE("acc, analytic models") {
        AccEnv env;
        UnrollConfig cfg;
        cfg.horizon = 10;
        const MlpSpec spec = policy_spec_acc();
        const auto res = gradcheck_unroll(env, cfg, gc, spec, nullptr, nullptr);
        CHECK(res.max_rel_err <= 1e-4);
    }
    SUBCASE("roundabout, analytic dynamics + learned reward") {
        RoundaboutConfig rc;
        rc.n_targets = 2;
        RoundaboutEnv env(rc);
        UnrollConfig cfg;
        cfg.horizon = 10;
        cfg.reward_model = ModelKind::kLearned;
        const MlpSpec spec = policy_spec_round(2);
        const MlpSpec rspec = model_spec_round(2, false);
        const auto res = gradcheck_unroll(env, cfg, gc, spec, nullptr, &rspec);
        CHECK(res.max_rel_err <= 1e-4);
    }
    SUBCASE("roundabout, joint objective with learned models") {
        RoundaboutConfig rc;
        rc.n_targets = 2;
        RoundaboutEnv env(rc);
        UnrollConfig cfg;
        cfg.horizon = 8;
        cfg.next_model = ModelKind::kLearned;
        cfg.reward_model = ModelKind::kLearned;
        cfg.joint = true;
        cfg.lambda_n = 0.7;
        cfg.lambda_r = 1.3;
        const MlpSpec spec = policy_spec_round(2);
        const MlpSpec nspec = model_spec_round(2, true);
        const MlpSpec rspec = model_spec_round(2, false);
        const auto res = gradcheck_unroll(env, cfg, gc, spec, &nspec, &rspec);
        CHECK(res.max_rel_err <= 1e-4);
    }
    SUBCASE("a corrupted gradient is caught") {
        LineEnv env;
        UnrollConfig cfg;
        cfg.horizon = 5;
        gc.perturb = 1e-2;
        const MlpSpec spec = policy_spec_1d();
        const auto res = gradcheck_unroll(env, cfg, gc, spec, nullptr, nullptr);
        CHECK(res.max_rel_err > 1e-4);
    }
}

TEST_CASE("zero-weight ACC policy: gradient finite and deterministic") {
    AccEnv env;
    const MlpSpec spec = policy_spec_acc();
    ParamVector pv = mlp_init(spec, 5);
    for (double& v : pv.values()) v = 0.0;
    UnrollConfig cfg;
    cfg.horizon = 20;

    UnrollResult u1 = unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 6);
    const EpisodeGradients g1 = episode_gradients(u1);
    UnrollResult u2 = unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 6);
    const EpisodeGradients g2 = episode_gradients(u2);

    CHECK(g1.objective == g2.objective);
    CHECK(g1.policy == g2.policy);
    for (double v : g1.policy) CHECK(std::isfinite(v));
}

TEST_CASE("residual replay is bitwise reproducible and matches the live tape") {
    AccEnv env;
    const MlpSpec spec = policy_spec_acc();
    const ParamVector pv = mlp_init(spec, 8);
    UnrollConfig cfg;
    cfg.horizon = 15;

    UnrollResult u1 = unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 9);
    UnrollResult u2 = unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 9);
    REQUIRE(u1.replay.steps.size() == u2.replay.steps.size());
    for (std::size_t i = 0; i < u1.replay.steps.size(); ++i) {
        CHECK(u1.replay.steps[i].nu == u2.replay.steps[i].nu);
    }
    CHECK(u1.tape.scalar(u1.objective) == u2.tape.scalar(u2.objective));
    const EpisodeGradients g1 = episode_gradients(u1);
    const EpisodeGradients g2 = episode_gradients(u2);
    CHECK(g1.policy == g2.policy);

    const double replayed = replay_objective(u1.replay, cfg, env, spec, pv, nullptr, nullptr,
                                             nullptr, nullptr);
    CHECK(replayed == u1.tape.scalar(u1.objective));
}

TEST_CASE("unroll truncates when the episode ends early") {
    RoundaboutConfig rc;
    rc.n_targets = 1;
    rc.horizon = 200;
    RoundaboutEnv env(rc);
    const MlpSpec spec = policy_spec_round(1);
    ParamVector pv = mlp_init(spec, 3);
    for (double& v : pv.values()) v = 0.0;  // coasting host

    MlpSpec rspec = model_spec_round(1, false);
    ParamVector rtheta = mlp_init(rspec, 4);
    UnrollConfig cfg;
    cfg.horizon = 200;
    cfg.reward_model = ModelKind::kLearned;

    // find a seed whose coasting episode ends before the horizon
    bool found = false;
    for (Seed seed = 1; seed < 60 && !found; ++seed) {
        UnrollResult u =
            unroll_episode(env, cfg, spec, pv, nullptr, nullptr, &rspec, &rtheta, seed);
        if (u.trace.size() < 200) {
            found = true;
            CHECK(u.trace.back().done);
            CHECK(u.replay.steps.size() == u.trace.size());
        }
    }
    CHECK(found);
}

TEST_CASE("joint objective with zero lambdas gives the plain policy gradient") {
    RoundaboutConfig rc;
    rc.n_targets = 1;
    RoundaboutEnv env(rc);
    const MlpSpec spec = policy_spec_round(1);
    const ParamVector pv = mlp_init(spec, 13);
    const MlpSpec nspec = model_spec_round(1, true);
    const ParamVector ntheta = mlp_init(nspec, 14);
    const MlpSpec rspec = model_spec_round(1, false);
    const ParamVector rtheta = mlp_init(rspec, 15);

    UnrollConfig plain;
    plain.horizon = 12;
    plain.next_model = ModelKind::kLearned;
    plain.reward_model = ModelKind::kLearned;
    UnrollConfig joint = plain;
    joint.joint = true;
    joint.lambda_n = 0.0;
    joint.lambda_r = 0.0;

    UnrollResult up = unroll_episode(env, plain, spec, pv, &nspec, &ntheta, &rspec, &rtheta, 21);
    UnrollResult uj = unroll_episode(env, joint, spec, pv, &nspec, &ntheta, &rspec, &rtheta, 21);
    const EpisodeGradients gp = episode_gradients(up);
    const EpisodeGradients gj = episode_gradients(uj);
    CHECK(gp.policy == gj.policy);

    // supervised terms are sums of squares
    CHECK(uj.tape.scalar(uj.supervised_next) >= 0.0);
    CHECK(uj.tape.scalar(uj.supervised_reward) >= 0.0);
}

TEST_CASE("diverging forward values raise NumericalError with a step index") {
    LineEnv env;
    const MlpSpec spec = policy_spec_1d();
    ParamVector pv = mlp_init(spec, 2);
    for (double& v : pv.values()) v = 1e200;  // guaranteed overflow in a few steps
    UnrollConfig cfg;
    cfg.horizon = 30;
    UnrollResult u = unroll_episode(env, cfg, spec, pv, nullptr, nullptr, nullptr, nullptr, 1);
    CHECK_THROWS_AS(episode_gradients(u), NumericalError);
}
