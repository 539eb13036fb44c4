#pragma once

#include "predplan/env.hpp"

namespace predplan {

// Scalar game against an adversarial environment. Per-step loss
// 0.1 |a| + [|s| - 2]_+; next state s + a + nu with |nu| <= 0.5 chosen by a
// greedy adversary that maximizes |s'| (ties resolved to +0.5).
struct LineConfig {
    int horizon = 50;
    double s0_min = -3.0, s0_max = 3.0;
    double nu_bound = 0.5;
};

struct LineStepOut {
    double loss;
    double s_next;
    double nu;
};

LineStepOut line_step_kernel(double s, double a, double nu_bound = 0.5);

// optimal policy:  a = -[s - 1.5]_+ + [-s - 1.5]_+
double line_optimal_action(double s);

class LineEnv final : public Env {
public:
    explicit LineEnv(LineConfig cfg = {}) : cfg_(cfg) {}

    EnvKind kind() const override { return EnvKind::kLine; }
    const char* name() const override { return "line"; }
    int state_dim() const override { return 1; }
    int horizon() const override { return cfg_.horizon; }

    void reset(Seed seed) override;
    std::vector<double> state() const override { return {s_}; }
    StepOut step(double action) override;

    std::vector<double> predictable(std::span<const double> s, double a) const override;
    NodeId predictable_node(Tape& tape, NodeId s, NodeId a) const override;

    bool has_analytic_reward() const override { return true; }
    double reward(std::span<const double> s, double a) const override;
    NodeId reward_node(Tape& tape, NodeId s, NodeId a) const override;

    const LineConfig& config() const { return cfg_; }

private:
    LineConfig cfg_;
    double s_ = 0.0;
    int t_ = 0;
};

}  // namespace predplan
