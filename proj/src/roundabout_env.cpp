#include "predplan/roundabout_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace predplan {

void RoundaboutEnv::reset(Seed seed) {
    Rng rng(derive_seed(seed, "round.env"));
    const int n = cfg_.n_targets;
    s_.assign(2 + 3 * n, 0.0);
    types_.assign(n, DriverType::kDefensive);
    v_des_.assign(n, 0.0);
    s_[0] = cfg_.host_start;
    s_[1] = rng.uniform(cfg_.host_v_min, cfg_.host_v_max);

    std::vector<double> placed;
    for (int i = 0; i < n; ++i) {
        double pos = 0.0;
        bool ok = false;
        for (int attempt = 0; attempt < cfg_.place_retries; ++attempt) {
            pos = rng.uniform(cfg_.target_pos_min, cfg_.target_pos_max);
            ok = true;
            for (double p : placed) {
                if (std::fabs(pos - p) < cfg_.target_min_gap) { ok = false; break; }
            }
            if (ok) break;
        }
        if (!ok) throw std::runtime_error("roundabout reset: could not place targets without overlap");
        placed.push_back(pos);
        v_des_[i] = rng.uniform(cfg_.v_des_min, cfg_.v_des_max);
        types_[i] = rng.bernoulli(cfg_.p_aggressive) ? DriverType::kAggressive
                                                     : DriverType::kDefensive;
        s_[2 + 3 * i + 0] = pos;
        s_[2 + 3 * i + 1] = v_des_[i];
        s_[2 + 3 * i + 2] = 0.0;
    }
    t_ = 0;
}

void RoundaboutEnv::reset_scripted(double host_vel, const std::vector<ScriptedTarget>& targets) {
    const int n = static_cast<int>(targets.size());
    cfg_.n_targets = n;
    s_.assign(2 + 3 * n, 0.0);
    types_.assign(n, DriverType::kDefensive);
    v_des_.assign(n, 0.0);
    s_[0] = cfg_.host_start;
    s_[1] = host_vel;
    for (int i = 0; i < n; ++i) {
        s_[2 + 3 * i + 0] = targets[i].pos;
        s_[2 + 3 * i + 1] = targets[i].vel;
        s_[2 + 3 * i + 2] = 0.0;
        types_[i] = targets[i].type;
        v_des_[i] = targets[i].vel;
    }
    t_ = 0;
}

double RoundaboutEnv::driver_accel(int i, double target_pos, double target_vel,
                                   double host_pos) const {
    double a = cfg_.k_speed * (v_des_[i] - target_vel);
    const bool host_near = std::fabs(host_pos) <= cfg_.window_host;
    const bool target_upstream = target_pos >= -cfg_.window_target && target_pos < 0.0;
    if (host_near && target_upstream) {
        a += types_[i] == DriverType::kAggressive ? cfg_.a_max : -cfg_.a_max;
    }
    return std::clamp(a, -cfg_.a_max, cfg_.a_max);
}

std::vector<double> RoundaboutEnv::predictable(std::span<const double> s, double a) const {
    const int n = (static_cast<int>(s.size()) - 2) / 3;
    std::vector<double> out(s.size());
    out[0] = s[0] + cfg_.tau * s[1];
    out[1] = pospart_k(s[1] + cfg_.tau * clamp_pm_k(a, cfg_.a_max));
    for (int i = 0; i < n; ++i) {
        const int b = 2 + 3 * i;
        out[b + 0] = s[b + 0] + cfg_.tau * s[b + 1];
        out[b + 1] = pospart_k(s[b + 1] + cfg_.tau * s[b + 2]);
        out[b + 2] = s[b + 2];
    }
    return out;
}

NodeId RoundaboutEnv::predictable_node(Tape& tape, NodeId s, NodeId a) const {
    const int n = cfg_.n_targets;
    std::vector<NodeId> parts;
    parts.reserve(2 + 3 * n);
    const NodeId host_pos = tape.select(s, 0, 1);
    const NodeId host_vel = tape.select(s, 1, 2);
    parts.push_back(tape.add(host_pos, tape.scale(cfg_.tau, host_vel)));
    const NodeId a_clamped = clamp_pm_node(tape, a, cfg_.a_max);
    parts.push_back(tape.pospart(tape.add(host_vel, tape.scale(cfg_.tau, a_clamped))));
    for (int i = 0; i < n; ++i) {
        const int b = 2 + 3 * i;
        const NodeId pos = tape.select(s, b, b + 1);
        const NodeId vel = tape.select(s, b + 1, b + 2);
        const NodeId acc = tape.select(s, b + 2, b + 3);
        parts.push_back(tape.add(pos, tape.scale(cfg_.tau, vel)));
        parts.push_back(tape.pospart(tape.add(vel, tape.scale(cfg_.tau, acc))));
        parts.push_back(acc);
    }
    return tape.concat(parts);
}

StepOut RoundaboutEnv::step(double action) {
    const int n = cfg_.n_targets;
    StepOut out;
    out.predicted = predictable(s_, action);
    out.residual.assign(s_.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const int b = 2 + 3 * i;
        const double acc_next =
            driver_accel(i, out.predicted[b + 0], out.predicted[b + 1], out.predicted[0]);
        out.residual[b + 2] = acc_next - s_[b + 2];
    }
    out.next.resize(s_.size());
    for (std::size_t i = 0; i < s_.size(); ++i) out.next[i] = out.predicted[i] + out.residual[i];

    bool violation = false;
    const double host_pos = out.next[0];
    for (int i = 0; i < n && !violation; ++i) {
        const double tp = out.next[2 + 3 * i + 0];
        if (std::fabs(host_pos) <= cfg_.merge_zone && std::fabs(tp) <= cfg_.merge_zone) {
            violation = true;
        } else if (host_pos > 0.0 && host_pos < cfg_.exit_pos && tp > 0.0) {
            const double front = std::max(host_pos, tp);
            const double back = std::min(host_pos, tp);
            const double v_back = host_pos < tp ? out.next[1] : out.next[2 + 3 * i + 1];
            if (front - back < cfg_.headway * v_back) violation = true;
        }
    }
    const bool success = !violation && host_pos >= cfg_.exit_pos;

    const double a_exec = clamp_pm_k(action, cfg_.a_max);
    double r = -(cfg_.accel_cost * std::fabs(a_exec) + cfg_.step_cost);
    if (violation) r -= cfg_.crash_penalty;
    if (success) r += cfg_.success_bonus;

    out.reward = r;
    out.violation = violation;
    out.success = success;
    s_ = out.next;
    ++t_;
    out.done = violation || success || t_ >= cfg_.horizon;
    return out;
}

}  // namespace predplan
