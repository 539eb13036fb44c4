#include "predplan/line_env.hpp"

#include <cmath>

namespace predplan {

LineStepOut line_step_kernel(double s, double a, double nu_bound) {
    LineStepOut out;
    out.loss = 0.1 * std::fabs(a) + pospart_k(std::fabs(s) - 2.0);
    const double s_hat = s + a;
    out.nu = s_hat >= 0.0 ? nu_bound : -nu_bound;
    out.s_next = s_hat + out.nu;
    return out;
}

double line_optimal_action(double s) {
    return -pospart_k(s - 1.5) + pospart_k(-s - 1.5);
}

void LineEnv::reset(Seed seed) {
    Rng rng(derive_seed(seed, "line.env"));
    s_ = rng.uniform(cfg_.s0_min, cfg_.s0_max);
    t_ = 0;
}

StepOut LineEnv::step(double action) {
    const LineStepOut k = line_step_kernel(s_, action, cfg_.nu_bound);
    StepOut out;
    out.reward = -k.loss;
    out.predicted = {s_ + action};
    out.residual = {k.nu};
    out.next = {out.predicted[0] + out.residual[0]};
    s_ = out.next[0];
    ++t_;
    out.done = t_ >= cfg_.horizon;
    return out;
}

std::vector<double> LineEnv::predictable(std::span<const double> s, double a) const {
    return {s[0] + a};
}

NodeId LineEnv::predictable_node(Tape& tape, NodeId s, NodeId a) const {
    return tape.add(s, a);
}

double LineEnv::reward(std::span<const double> s, double a) const {
    const double loss = 0.1 * std::fabs(a) + pospart_k(std::fabs(s[0]) - 2.0);
    return -loss;
}

NodeId LineEnv::reward_node(Tape& tape, NodeId s, NodeId a) const {
    const NodeId pen = tape.pospart(tape.sub(tape.abs(s), tape.constant(2.0)));
    const NodeId loss = tape.add(tape.scale(0.1, tape.abs(a)), pen);
    return tape.scale(-1.0, loss);
}

}  // namespace predplan
