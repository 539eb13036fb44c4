#pragma once

#include "predplan/env.hpp"

namespace predplan {

// Adaptive cruise control. State (v_target, v_host, x) with x the gap to the
// lead vehicle; action is the host acceleration. The lead vehicle's hidden
// acceleration makes v_target the only unpredictable component.
struct AccState {
    double v_target = 0.0;
    double v_host = 0.0;
    double gap = 0.0;
};

struct AccConfig {
    double tau = 0.1;           // seconds per step
    double a_max_target = 3.0;  // bound on the hidden lead acceleration, m/s^2
    // mean reversion of the hidden acceleration random walk; keeps the lead
    // car's behavior smooth while still unpredictable step to step
    double a_target_persistence = 0.9;
    int horizon = 100;
    double v_target_min = 5.0, v_target_max = 25.0;
    double v_host_min = 5.0, v_host_max = 25.0;
    double gap_min = 10.0, gap_max = 60.0;
};

// -r = 0.1 |a| + [ |x / x*  - 1| - 0.3 ]_+  with  x* = max{1, 1.5 v_host}
double acc_reward_kernel(double v_host, double gap, double a);

// (v_target, [v_host + tau a]_+, [x + tau (v_target - v_host)]_+)
AccState acc_predictable_kernel(const AccState& s, double a, double tau);

// residual in the v_target slot: [v_target + tau a_target]_+ - v_target
double acc_residual_v(double v_target, double a_target, double tau);

// Full transition for a known hidden acceleration; next = predictable + residual.
struct AccStepOut {
    double reward;
    AccState next;
};
AccStepOut acc_step_kernel(const AccState& s, double a, double a_target, double tau);

class AccEnv final : public Env {
public:
    explicit AccEnv(AccConfig cfg = {}) : cfg_(cfg) {}

    EnvKind kind() const override { return EnvKind::kAcc; }
    const char* name() const override { return "acc"; }
    int state_dim() const override { return 3; }
    int horizon() const override { return cfg_.horizon; }

    void reset(Seed seed) override;
    std::vector<double> state() const override;
    StepOut step(double action) override;

    std::vector<double> predictable(std::span<const double> s, double a) const override;
    NodeId predictable_node(Tape& tape, NodeId s, NodeId a) const override;

    bool has_analytic_reward() const override { return true; }
    double reward(std::span<const double> s, double a) const override;
    NodeId reward_node(Tape& tape, NodeId s, NodeId a) const override;

    const AccConfig& config() const { return cfg_; }
    double hidden_target_accel() const { return a_target_; }

private:
    AccConfig cfg_;
    AccState s_;
    double a_target_ = 0.0;
    int t_ = 0;
    Rng rng_{0};
};

}  // namespace predplan
