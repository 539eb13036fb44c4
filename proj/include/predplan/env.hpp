#pragma once

#include <span>
#include <vector>

#include "predplan/rng.hpp"
#include "predplan/tape.hpp"

namespace predplan {

// One transition. s_next == s_hat + nu holds componentwise by construction:
// every simulator computes its predictable part first and then adds the
// residual, so the decomposition is exact, not a post-hoc subtraction.
struct StepRecord {
    std::vector<double> s;
    double a = 0.0;
    double r = 0.0;
    std::vector<double> s_next;
    std::vector<double> s_hat;
    std::vector<double> nu;
    bool done = false;
};

struct StepOut {
    double reward = 0.0;
    std::vector<double> next;
    std::vector<double> predicted;
    std::vector<double> residual;
    bool done = false;
    bool violation = false;  // roundabout safety violation
    bool success = false;    // roundabout exit reached
};

enum class EnvKind { kAcc, kLine, kRoundabout };

// [x]_+ as used everywhere in the dynamics. The tape's relu/pospart apply the
// same expression, which keeps simulator values and tape values bitwise equal.
inline double pospart_k(double x) { return x > 0.0 ? x : 0.0; }

// clamp to [-m, m] written with pospart so the tape can mirror it exactly
inline double clamp_pm_k(double x, double m) {
    const double t = x - pospart_k(x - m);
    return t + pospart_k(-x - m);
}

NodeId clamp_pm_node(Tape& tape, NodeId x, double m);

// Seeded simulator interface. A single instance is single-threaded; distinct
// instances with distinct seeds may run concurrently.
class Env {
public:
    virtual ~Env() = default;

    virtual EnvKind kind() const = 0;
    virtual const char* name() const = 0;
    virtual int state_dim() const = 0;
    virtual int horizon() const = 0;

    virtual void reset(Seed seed) = 0;
    virtual std::vector<double> state() const = 0;
    virtual StepOut step(double action) = 0;

    // Analytic predictable part of the next state, as plain numbers.
    virtual std::vector<double> predictable(std::span<const double> s, double a) const = 0;

    // The same map expressed in tape ops. Values are bitwise identical to
    // predictable() for equal inputs.
    virtual NodeId predictable_node(Tape& tape, NodeId s, NodeId a) const = 0;

    // Differentiable immediate reward r(s, a), where the formula is known.
    virtual bool has_analytic_reward() const { return false; }
    virtual double reward(std::span<const double> s, double a) const;
    virtual NodeId reward_node(Tape& tape, NodeId s, NodeId a) const;
};

}  // namespace predplan
