// scratch: per-episode in-band breakdown for a trained ACC checkpoint
#include <cmath>
#include <cstdio>

#include "predplan/acc_env.hpp"
#include "predplan/experiments.hpp"
#include "predplan/mlp.hpp"

using namespace predplan;

int main(int argc, char** argv) {
    auto [raw_spec, theta] = load_mlp(argv[1]);
    MlpSpec spec = make_policy_spec(EnvKind::kAcc, 0, raw_spec.hidden);

    AccEnv env;
    const Seed seed = derive_seed(1, "final");
    double worst = 1.0;
    double total_in = 0, total = 0;
    for (int e = 0; e < 100; ++e) {
        env.reset(derive_seed(seed, "eval.episode", e));
        long in_band = 0;
        double min_vt = 1e9;
        bool done = false;
        while (!done) {
            const auto s = env.state();
            min_vt = std::min(min_vt, s[0]);
            const double ratio = s[2] / (1.0 + pospart_k(1.5 * s[1] - 1.0));
            if (std::fabs(ratio - 1.0) <= 0.3) ++in_band;
            done = env.step(mlp_apply(spec, theta, s)[0]).done;
        }
        total_in += in_band;
        total += 100;
        if (in_band < 70) {
            env.reset(derive_seed(seed, "eval.episode", e));
            const auto s0 = env.state();
            std::printf("ep %3d: in_band %3ld  s0=(%.1f, %.1f, %.1f) min_vt %.2f\n", e, in_band,
                        s0[0], s0[1], s0[2], min_vt);
        }
        worst = std::min(worst, in_band / 100.0);
    }
    std::printf("overall in_band %.4f, worst episode %.2f\n", total_in / total, worst);
    return 0;
}
