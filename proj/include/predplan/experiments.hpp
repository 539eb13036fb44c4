#pragma once

#include <memory>
#include <ostream>

#include "predplan/config.hpp"
#include "predplan/env.hpp"
#include "predplan/mlp.hpp"

namespace predplan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumerical = 3;

// Applies per-experiment defaults, rejects unknown keys (with the offending
// line) and validates ranges. Throws ConfigError.
Config resolve_experiment_config(const Config& raw);

// Executes the named pipeline and writes all artifacts under the resolved
// `out` directory. Throws ConfigError / NumericalError on the matching
// failure classes.
void run_experiment(const Config& resolved, std::ostream& log);

// BPTT-vs-finite-differences suite for the experiment named in the config.
// Returns kExitOk when the max relative error is within tolerance, else
// kExitNumerical. `perturb` deliberately corrupts the BPTT gradient and is a
// self-test aid.
int run_gradcheck(const Config& resolved, double perturb, std::ostream& log);

// Shared model plumbing (also used by tests and the acceptance suite).
std::unique_ptr<Env> make_experiment_env(const Config& resolved);
MlpSpec make_policy_spec(EnvKind kind, int n_targets, const std::vector<int>& hidden);
MlpSpec make_model_spec(EnvKind kind, int n_targets, const std::vector<int>& hidden,
                        bool next_state);

}  // namespace predplan
