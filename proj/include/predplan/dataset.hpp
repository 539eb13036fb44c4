#pragma once

#include <functional>
#include <string>
#include <vector>

#include "predplan/env.hpp"
#include "predplan/mlp.hpp"

namespace predplan {

using BehaviorFn = std::function<double(std::span<const double>)>;

struct ExploreParams {
    double epsilon = 0.1;   // probability of a uniform random action
    double sigma = 0.5;     // Gaussian noise around the behavior action
    double action_lo = -3.0;
    double action_hi = 3.0;
};

// (s, a, r, s') tuples plus the decomposition fields, with the generating
// behavior and exploration recorded alongside.
struct Dataset {
    int state_dim = 0;
    std::vector<StepRecord> tuples;
    std::string behavior;
    ExploreParams explore;
    Seed seed = 0;
};

Dataset collect(Env& env, const BehaviorFn& behavior, const std::string& behavior_name,
                const ExploreParams& explore, int n_steps, Seed seed);

struct FitHyper {
    double lr = 1e-2;
    int batch = 64;
    int epochs = 10;
};

struct FitReport {
    double train_mse = 0.0;
    double heldout_mse = 0.0;
};

enum class FitTarget { kNextState, kReward };

// Minibatch SGD on the mean squared error, measured in the model's
// output-normalized units. 90/10 train/held-out split by seeded shuffle.
FitReport fit_regression(const Dataset& data, FitTarget target, const MlpSpec& spec,
                         ParamVector& theta, const FitHyper& hyper, Seed seed);

// Held-out style MSE of a model over explicit pairs, normalized units.
double regression_mse(const MlpSpec& spec, const ParamVector& theta,
                      const std::vector<std::vector<double>>& inputs,
                      const std::vector<std::vector<double>>& targets);

}  // namespace predplan
