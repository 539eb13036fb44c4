#include "predplan/acc_env.hpp"

#include <algorithm>
#include <cmath>

namespace predplan {

double acc_reward_kernel(double v_host, double gap, double a) {
    const double xstar = 1.0 + pospart_k(1.5 * v_host - 1.0);  // max{1, 1.5 v_host}
    const double ratio = gap / xstar;
    const double pen = pospart_k(std::fabs(ratio - 1.0) - 0.3);
    const double cost = 0.1 * std::fabs(a) + pen;
    return -cost;
}

AccState acc_predictable_kernel(const AccState& s, double a, double tau) {
    AccState out;
    out.v_target = s.v_target;
    out.v_host = pospart_k(s.v_host + tau * a);
    out.gap = pospart_k(s.gap + tau * (s.v_target - s.v_host));
    return out;
}

double acc_residual_v(double v_target, double a_target, double tau) {
    return pospart_k(v_target + tau * a_target) - v_target;
}

AccStepOut acc_step_kernel(const AccState& s, double a, double a_target, double tau) {
    AccStepOut out;
    out.reward = acc_reward_kernel(s.v_host, s.gap, a);
    const AccState hat = acc_predictable_kernel(s, a, tau);
    const double nu = acc_residual_v(s.v_target, a_target, tau);
    out.next.v_target = hat.v_target + nu;
    out.next.v_host = hat.v_host + 0.0;
    out.next.gap = hat.gap + 0.0;
    return out;
}

void AccEnv::reset(Seed seed) {
    rng_ = Rng(derive_seed(seed, "acc.env"));
    s_.v_target = rng_.uniform(cfg_.v_target_min, cfg_.v_target_max);
    s_.v_host = rng_.uniform(cfg_.v_host_min, cfg_.v_host_max);
    s_.gap = rng_.uniform(cfg_.gap_min, cfg_.gap_max);
    a_target_ = rng_.uniform(-1.5, 1.5);
    t_ = 0;
}

std::vector<double> AccEnv::state() const { return {s_.v_target, s_.v_host, s_.gap}; }

StepOut AccEnv::step(double action) {
    StepOut out;
    out.reward = acc_reward_kernel(s_.v_host, s_.gap, action);
    const AccState hat = acc_predictable_kernel(s_, action, cfg_.tau);
    const double nu_v = acc_residual_v(s_.v_target, a_target_, cfg_.tau);
    out.predicted = {hat.v_target, hat.v_host, hat.gap};
    out.residual = {nu_v, 0.0, 0.0};
    out.next.resize(3);
    for (int i = 0; i < 3; ++i) out.next[i] = out.predicted[i] + out.residual[i];
    s_ = {out.next[0], out.next[1], out.next[2]};

    // hidden lead acceleration: bounded mean-reverting random walk
    a_target_ = std::clamp(cfg_.a_target_persistence * a_target_ + rng_.uniform(-0.5, 0.5),
                           -cfg_.a_max_target, cfg_.a_max_target);
    ++t_;
    out.done = t_ >= cfg_.horizon;
    return out;
}

std::vector<double> AccEnv::predictable(std::span<const double> s, double a) const {
    const AccState hat = acc_predictable_kernel({s[0], s[1], s[2]}, a, cfg_.tau);
    return {hat.v_target, hat.v_host, hat.gap};
}

NodeId AccEnv::predictable_node(Tape& tape, NodeId s, NodeId a) const {
    const NodeId vt = tape.select(s, 0, 1);
    const NodeId vh = tape.select(s, 1, 2);
    const NodeId x = tape.select(s, 2, 3);
    const NodeId vh_next = tape.pospart(tape.add(vh, tape.scale(cfg_.tau, a)));
    const NodeId x_next = tape.pospart(tape.add(x, tape.scale(cfg_.tau, tape.sub(vt, vh))));
    const NodeId parts[3] = {vt, vh_next, x_next};
    return tape.concat(parts);
}

double AccEnv::reward(std::span<const double> s, double a) const {
    return acc_reward_kernel(s[1], s[2], a);
}

NodeId AccEnv::reward_node(Tape& tape, NodeId s, NodeId a) const {
    const NodeId vh = tape.select(s, 1, 2);
    const NodeId x = tape.select(s, 2, 3);
    const NodeId one = tape.constant(1.0);
    const NodeId xstar = tape.add(one, tape.pospart(tape.sub(tape.scale(1.5, vh), one)));
    const NodeId ratio = tape.div(x, xstar);
    const NodeId pen = tape.pospart(tape.sub(tape.abs(tape.sub(ratio, one)), tape.constant(0.3)));
    const NodeId cost = tape.add(tape.scale(0.1, tape.abs(a)), pen);
    return tape.scale(-1.0, cost);
}

}  // namespace predplan
