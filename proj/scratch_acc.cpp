// scratch: measure in-band fraction vs mean|a| tradeoff for hand controllers
#include <cmath>
#include <cstdio>
#include <functional>

#include "predplan/acc_env.hpp"
#include "predplan/env.hpp"

using namespace predplan;

int main() {
    using Controller = std::function<double(const std::vector<double>&)>;

    auto measure = [](const Controller& ctrl, const char* name) {
        AccEnv env;
        long steps = 0, in_band = 0;
        double sum_abs_a = 0.0, sum_r = 0.0;
        for (int e = 0; e < 100; ++e) {
            env.reset(derive_seed(1, "eval.episode", e));
            bool done = false;
            while (!done) {
                const auto s = env.state();
                const double xstar = 1.0 + pospart_k(1.5 * s[1] - 1.0);
                if (std::fabs(s[2] / xstar - 1.0) <= 0.3) ++in_band;
                const double a = ctrl(s);
                sum_abs_a += std::fabs(a);
                const StepOut out = env.step(a);
                sum_r += out.reward;
                done = out.done;
                ++steps;
            }
        }
        std::printf("%-28s in_band %.3f  mean|a| %.3f  return %.2f\n", name,
                    (double)in_band / steps, sum_abs_a / steps, sum_r / 100.0);
    };

    // constant-headway spacing law: a = k1 (x - 1.5 v_h) + k2 (v_t - v_h)
    for (double k1 : {0.1, 0.2, 0.4, 0.8}) {
        for (double k2 : {0.5, 1.0, 2.0}) {
            char name[64];
            std::snprintf(name, sizeof(name), "headway k1=%.1f k2=%.1f", k1, k2);
            measure([k1, k2](const std::vector<double>& s) {
                return k1 * (s[2] - 1.5 * s[1]) + k2 * (s[0] - s[1]);
            }, name);
        }
    }
    measure([](const std::vector<double>&) { return 0.0; }, "zero action");
    return 0;
}
