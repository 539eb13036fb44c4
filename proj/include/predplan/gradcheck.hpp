#pragma once

#include "predplan/unroll.hpp"

namespace predplan {

struct GradCheckConfig {
    int samples = 20;      // random parameter draws per environment
    double fd_eps = 1e-6;
    double tolerance = 1e-4;
    Seed seed = 1;
    double perturb = 0.0;  // test aid: offsets one BPTT gradient coordinate
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    long coords_checked = 0;
    double seconds = 0.0;

    bool pass(double tol) const { return coords_checked > 0 && max_rel_err <= tol; }
};

// BPTT gradients of the unrolled objective against central finite differences
// of the frozen-residual replay, over `samples` random parameter draws.
GradCheckResult gradcheck_unroll(Env& env, const UnrollConfig& unroll_cfg,
                                 const GradCheckConfig& cfg, const MlpSpec& policy_spec,
                                 const MlpSpec* next_spec, const MlpSpec* reward_spec);

}  // namespace predplan
