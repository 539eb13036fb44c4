#include "predplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace predplan {

Dataset collect(Env& env, const BehaviorFn& behavior, const std::string& behavior_name,
                const ExploreParams& explore, int n_steps, Seed seed) {
    if (n_steps <= 0) throw TapeError("collect: n_steps must be positive");
    Dataset data;
    data.state_dim = env.state_dim();
    data.behavior = behavior_name;
    data.explore = explore;
    data.seed = seed;
    data.tuples.reserve(static_cast<std::size_t>(n_steps));

    Rng explore_rng(derive_seed(seed, "collect.explore"));
    std::uint64_t episode = 0;
    while (static_cast<int>(data.tuples.size()) < n_steps) {
        env.reset(derive_seed(seed, "collect.episode", episode++));
        bool done = false;
        while (!done && static_cast<int>(data.tuples.size()) < n_steps) {
            const std::vector<double> s = env.state();
            double a;
            if (explore_rng.uniform01() < explore.epsilon) {
                a = explore_rng.uniform(explore.action_lo, explore.action_hi);
            } else {
                a = behavior(s) + explore.sigma * explore_rng.gaussian();
            }
            const StepOut out = env.step(a);
            StepRecord rec;
            rec.s = s;
            rec.a = a;
            rec.r = out.reward;
            rec.s_next = out.next;
            rec.s_hat = out.predicted;
            rec.nu = out.residual;
            rec.done = out.done;
            data.tuples.push_back(std::move(rec));
            done = out.done;
        }
    }
    return data;
}

namespace {

std::vector<double> make_input(const StepRecord& t) {
    std::vector<double> x = t.s;
    x.push_back(t.a);
    return x;
}

std::vector<double> make_target(const StepRecord& t, FitTarget target) {
    if (target == FitTarget::kReward) return {t.r};
    return t.s_next;
}

}  // namespace

double regression_mse(const MlpSpec& spec, const ParamVector& theta,
                      const std::vector<std::vector<double>>& inputs,
                      const std::vector<std::vector<double>>& targets) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto pred = mlp_apply(spec, theta, inputs[i]);
        const auto np = mlp_normalize_out(spec, pred);
        const auto ny = mlp_normalize_out(spec, targets[i]);
        for (std::size_t j = 0; j < np.size(); ++j) {
            const double d = np[j] - ny[j];
            acc += d * d;
        }
    }
    const double denom = static_cast<double>(inputs.size()) * spec.out_dim;
    return inputs.empty() ? 0.0 : acc / denom;
}

FitReport fit_regression(const Dataset& data, FitTarget target, const MlpSpec& spec,
                         ParamVector& theta, const FitHyper& hyper, Seed seed) {
    if (data.tuples.empty()) throw TapeError("fit_regression: empty dataset");
    if (hyper.batch <= 0) throw TapeError("fit_regression: batch must be positive");
    spec.validate();

    const std::size_t n = data.tuples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(seed, "fit.split"));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[split_rng.uniform_int(i)]);
    }
    const std::size_t n_held = std::max<std::size_t>(1, n / 10);
    const std::size_t n_train = n - n_held;

    std::vector<std::vector<double>> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = make_input(data.tuples[order[i]]);
        y[i] = make_target(data.tuples[order[i]], target);
    }

    std::vector<std::size_t> idx(n_train);
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, "fit.shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_train; i > 1; --i) {
            std::swap(idx[i - 1], idx[shuffle_rng.uniform_int(i)]);
        }
        for (std::size_t start = 0; start < n_train; start += hyper.batch) {
            const std::size_t stop = std::min(n_train, start + hyper.batch);
            Tape tape;
            const MlpOnTape model = attach_mlp(tape, spec, theta);
            NodeId total = -1;
            for (std::size_t k = start; k < stop; ++k) {
                const NodeId input = tape.constant(x[idx[k]]);
                const NodeId pred = model.forward(tape, input);
                const NodeId np = model.normalize_out(tape, pred);
                const NodeId ny = tape.constant(mlp_normalize_out(spec, y[idx[k]]));
                const NodeId term = tape.sq_diff(np, ny);
                total = total == -1 ? term : tape.add(total, term);
            }
            const NodeId loss =
                tape.scale(1.0 / (static_cast<double>(stop - start) * spec.out_dim), total);
            if (!std::isfinite(tape.scalar(loss))) {
                throw NumericalError("fit_regression: non-finite loss at epoch " +
                                     std::to_string(epoch));
            }
            const auto grads = tape.backward(loss);
            const auto flat = flatten_grads(theta, model.binding, grads);
            for (std::size_t i = 0; i < flat.size(); ++i) {
                theta.values()[i] -= hyper.lr * flat[i];
            }
        }
    }

    FitReport report;
    std::vector<std::vector<double>> xt(x.begin(), x.begin() + n_train);
    std::vector<std::vector<double>> yt(y.begin(), y.begin() + n_train);
    std::vector<std::vector<double>> xh(x.begin() + n_train, x.end());
    std::vector<std::vector<double>> yh(y.begin() + n_train, y.end());
    report.train_mse = regression_mse(spec, theta, xt, yt);
    report.heldout_mse = regression_mse(spec, theta, xh, yh);
    return report;
}

}  // namespace predplan
