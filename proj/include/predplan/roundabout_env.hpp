#pragma once

#include <vector>

#include "predplan/env.hpp"

namespace predplan {

// Roundabout merge. The host drives on its own curve, the targets on the
// roundabout curve; both curves are arc-length parameterized with the merge
// point at the shared origin. Observable state is
//   [host_pos, host_vel, (pos_i, vel_i, acc_i) for each target]
// so the policy can only infer a driver's type from its acceleration history.
enum class DriverType { kAggressive, kDefensive };

struct RoundaboutConfig {
    double tau = 0.1;
    double a_max = 3.0;          // bound on every vehicle's acceleration
    int horizon = 250;
    int n_targets = 3;
    double p_aggressive = 0.5;
    double host_start = -30.0;
    double host_v_min = 4.0, host_v_max = 8.0;
    double exit_pos = 40.0;      // second exit, arc length past the merge
    double merge_zone = 2.0;     // both vehicles this close to the origin = violation
    double headway = 1.5;        // seconds; post-merge following rule
    double window_host = 15.0;   // host distance to merge that triggers reactions
    double window_target = 20.0; // target distance upstream that triggers reactions
    double target_pos_min = -60.0, target_pos_max = 10.0;
    double target_min_gap = 8.0;
    double v_des_min = 5.0, v_des_max = 9.0;
    double k_speed = 0.5;        // cruise-tracking proportional gain, 1/s
    double accel_cost = 0.1;
    double step_cost = 0.01;
    double crash_penalty = 10.0;
    double success_bonus = 1.0;
    int place_retries = 100;
};

struct ScriptedTarget {
    double pos;
    double vel;
    DriverType type;
};

class RoundaboutEnv final : public Env {
public:
    explicit RoundaboutEnv(RoundaboutConfig cfg = {}) : cfg_(cfg) {}

    EnvKind kind() const override { return EnvKind::kRoundabout; }
    const char* name() const override { return "roundabout"; }
    int state_dim() const override { return 2 + 3 * cfg_.n_targets; }
    int horizon() const override { return cfg_.horizon; }

    void reset(Seed seed) override;
    // Fixed single-purpose setup for behavioral probes; bypasses the RNG.
    void reset_scripted(double host_vel, const std::vector<ScriptedTarget>& targets);

    std::vector<double> state() const override { return s_; }
    StepOut step(double action) override;

    std::vector<double> predictable(std::span<const double> s, double a) const override;
    NodeId predictable_node(Tape& tape, NodeId s, NodeId a) const override;

    const RoundaboutConfig& config() const { return cfg_; }
    const std::vector<DriverType>& hidden_types() const { return types_; }
    const std::vector<double>& hidden_cruise_speeds() const { return v_des_; }

private:
    double driver_accel(int i, double target_pos, double target_vel, double host_pos) const;

    RoundaboutConfig cfg_;
    std::vector<double> s_;         // observable state vector
    std::vector<DriverType> types_; // hidden
    std::vector<double> v_des_;     // hidden
    int t_ = 0;
};

}  // namespace predplan
