#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "predplan/finite_diff.hpp"
#include "predplan/param.hpp"
#include "predplan/rng.hpp"
#include "predplan/tape.hpp"

using namespace predplan;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return {v}; }

double rel_err(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom;
}

}  // namespace

TEST_CASE("param leaves store values and report gradients") {
    Tape t;
    const NodeId zero = t.param(vec({0.0}));
    CHECK(t.value(zero)[0] == 0.0);

    const NodeId leaf = t.param(vec({1.5, -2.0}));
    CHECK(t.value(leaf)[0] == 1.5);
    CHECK(t.value(leaf)[1] == -2.0);

    const NodeId root = t.sum(leaf);
    const auto grads = t.backward(root);
    REQUIRE(grads.count(leaf) == 1);
    CHECK(grads.at(leaf) == vec({1.0, 1.0}));
    CHECK(grads.at(zero) == vec({0.0}));  // unconnected param still reported, zero
}

TEST_CASE("blocked leaves are constants and never reported") {
    Tape t;
    const NodeId s_hat = t.param(vec({9.9, 8.1, 20.2}));
    const NodeId nu = t.constant(vec({-0.2, 0.0, 0.0}));
    CHECK(t.node(nu).inputs.empty());

    const NodeId s_next = t.add(s_hat, nu);
    const NodeId root = t.sum(s_next);
    const auto grads = t.backward(root);
    CHECK(grads.count(nu) == 0);       // omitted from the gradient report
    REQUIRE(grads.count(s_hat) == 1);

    // gradient w.r.t. s_hat is the same as if nu were literal numbers
    Tape t2;
    const NodeId s_hat2 = t2.param(vec({9.9, 8.1, 20.2}));
    const NodeId shifted = t2.add(s_hat2, t2.constant(vec({-0.2, 0.0, 0.0})));
    const auto grads2 = t2.backward(t2.sum(shifted));
    CHECK(grads.at(s_hat) == grads2.at(s_hat2));
}

TEST_CASE("elementwise op values") {
    Tape t;
    CHECK(t.value(t.relu(t.constant(vec({-1.0, 2.0}))))[0] == 0.0);
    CHECK(t.value(t.relu(t.constant(vec({-1.0, 2.0}))))[1] == 2.0);

    const NodeId a = t.param(vec({-3.0}));
    const NodeId absa = t.abs(a);
    CHECK(t.value(absa)[0] == 3.0);
    const auto grads = t.backward(t.sum(absa));
    CHECK(grads.at(a)[0] == -1.0);  // subgradient sign(-3)

    // the line-game state penalty at s = 2.5, a = 0
    const NodeId s = t.constant(vec({2.5}));
    const NodeId pen = t.pospart(t.sub(t.abs(s), t.constant(2.0)));
    CHECK(t.value(pen)[0] == 0.5);
}

TEST_CASE("backward of sq_diff") {
    Tape t;
    const NodeId x = t.param(vec({1.0}));
    const NodeId y = t.param(vec({0.0}));
    const NodeId root = t.sq_diff(x, y);
    CHECK(t.scalar(root) == 1.0);
    const auto grads = t.backward(root);
    CHECK(grads.at(x)[0] == 2.0);
    CHECK(grads.at(y)[0] == -2.0);
}

TEST_CASE("line-game per-step loss derivatives") {
    // loss = 0.1 |a| + [|s| - 2]_+ ; d/da = 0.1 sign(a), d/ds = 1[|s|>2] sign(s)
    auto loss_grads = [](double s_val, double a_val) {
        Tape t;
        const NodeId s = t.param(vec({s_val}));
        const NodeId a = t.param(vec({a_val}));
        const NodeId loss =
            t.add(t.scale(0.1, t.abs(a)), t.pospart(t.sub(t.abs(s), t.constant(2.0))));
        auto grads = t.backward(t.sum(loss));
        return std::pair{grads.at(s)[0], grads.at(a)[0]};
    };

    auto [ds1, da1] = loss_grads(2.5, -0.4);
    CHECK(ds1 == 1.0);
    CHECK(da1 == -0.1);
    auto [ds2, da2] = loss_grads(-3.0, 0.7);
    CHECK(ds2 == -1.0);
    CHECK(da2 == 0.1);
    auto [ds3, da3] = loss_grads(1.0, 0.7);
    CHECK(ds3 == 0.0);  // inside the flat region
    CHECK(da3 == 0.1);
}

TEST_CASE("affine forward and backward") {
    Tape t;
    const NodeId w = t.param(vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));  // 2x3
    const NodeId b = t.param(vec({0.5, -0.5}));
    const NodeId x = t.param(vec({1.0, -1.0, 2.0}));
    const NodeId y = t.affine(w, b, x);
    CHECK(t.value(y)[0] == doctest::Approx(0.5 + 1.0 - 2.0 + 6.0));
    CHECK(t.value(y)[1] == doctest::Approx(-0.5 + 4.0 - 5.0 + 12.0));

    const auto grads = t.backward(t.sum(y));
    CHECK(grads.at(b) == vec({1.0, 1.0}));
    CHECK(grads.at(x) == vec({1.0 + 4.0, 2.0 + 5.0, 3.0 + 6.0}));
    CHECK(grads.at(w) == vec({1.0, -1.0, 2.0, 1.0, -1.0, 2.0}));
}

TEST_CASE("affine over multiple inputs concatenates") {
    Tape t;
    const NodeId w = t.param(vec({1.0, 2.0, 3.0}));
    const NodeId b = t.param(vec({0.0}));
    const NodeId s = t.constant(vec({1.0, 1.0}));
    const NodeId a = t.constant(vec({1.0}));
    const NodeId ins[2] = {s, a};
    const NodeId y = t.affine(w, b, std::span<const NodeId>(ins));
    CHECK(t.scalar(y) == 6.0);
}

TEST_CASE("construction errors name the op and dims") {
    Tape t;
    const NodeId x = t.param(vec({1.0, 2.0}));
    const NodeId y = t.param(vec({1.0, 2.0, 3.0}));
    CHECK_THROWS_WITH_AS(t.add(x, y), "add: operand lengths differ (2 vs 3)", TapeError);
    CHECK_THROWS_AS(t.affine(x, x, y), TapeError);
    CHECK_THROWS_AS(t.select(x, 1, 5), TapeError);
    CHECK_THROWS_AS(t.backward(x), TapeError);  // non-scalar root
}

TEST_CASE("finite_diff_grad basics") {
    ParamVector pv;
    pv.add_slice("x", 1, 3.0);
    const auto square = [](const ParamVector& p) {
        return p.values()[0] * p.values()[0];
    };
    const auto g = finite_diff_grad(square, pv, 1e-4);
    CHECK(std::fabs(g[0] - 6.0) < 1e-6);

    const auto constant_f = [](const ParamVector&) { return 2.5; };
    const auto gz = finite_diff_grad(constant_f, pv, 1e-4);
    CHECK(gz[0] == 0.0);
}

// --------------------------------------------------------------------------
// Random graphs: backward vs central finite differences, and the structural
// guarantee that blocked leaves do not alter any other gradient.
// --------------------------------------------------------------------------

namespace {

struct Instr {
    char tag;  // see execute()
    int a = -1, b = -1;
    double c = 0.0;
    int begin = 0, end = 0;
};

struct GraphProgram {
    std::vector<int> param_lens;
    std::vector<std::vector<double>> consts;
    std::vector<Instr> instrs;

    ParamVector init_params(Rng& rng) const {
        ParamVector pv;
        for (std::size_t i = 0; i < param_lens.size(); ++i) {
            const std::size_t si = pv.add_slice("p" + std::to_string(i), param_lens[i]);
            for (double& v : pv.slice(si)) v = rng.uniform(-2.0, 2.0);
        }
        return pv;
    }

    // Builds the graph for the given parameter values. When consts_as_params
    // is set, blocked leaves are turned into param leaves (same values).
    NodeId execute(Tape& t, const ParamVector& pv, TapeBinding& binding,
                   bool consts_as_params = false) const {
        binding = bind_params(t, pv);
        std::vector<NodeId> pool;
        for (NodeId id : binding.nodes) pool.push_back(id);
        for (const auto& cv : consts) {
            pool.push_back(consts_as_params ? t.param(cv) : t.constant(cv));
        }
        for (const auto& in : instrs) {
            switch (in.tag) {
                case 'r': pool.push_back(t.relu(pool[in.a])); break;
                case 'p': pool.push_back(t.pospart(pool[in.a])); break;
                case 'A': pool.push_back(t.abs(pool[in.a])); break;
                case '+': pool.push_back(t.add(pool[in.a], pool[in.b])); break;
                case '-': pool.push_back(t.sub(pool[in.a], pool[in.b])); break;
                case '*': pool.push_back(t.scale(in.c, pool[in.a])); break;
                case 's': pool.push_back(t.sum(pool[in.a])); break;
                case 'q': pool.push_back(t.sq_diff(pool[in.a], pool[in.b])); break;
                case 'S': pool.push_back(t.select(pool[in.a], in.begin, in.end)); break;
                case 'c': {
                    const NodeId xs[2] = {pool[in.a], pool[in.b]};
                    pool.push_back(t.concat(std::span<const NodeId>(xs)));
                    break;
                }
                case '/': pool.push_back(t.div(pool[in.a], pool[in.b])); break;
                case 'f': {
                    // affine: weights = pool[a], bias = pool[b], input = pool[begin]
                    pool.push_back(t.affine(pool[in.a], pool[in.b], pool[in.begin]));
                    break;
                }
                default: REQUIRE(false);
            }
        }
        return pool.back();
    }
};

GraphProgram random_program(Seed seed) {
    Rng rng(seed);
    GraphProgram prog;
    std::vector<int> lens;  // length of every pool entry, in order

    const int n_params = 2 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_params; ++i) {
        prog.param_lens.push_back(1 + static_cast<int>(rng.uniform_int(4)));
        lens.push_back(prog.param_lens.back());
    }
    const int n_consts = 1 + static_cast<int>(rng.uniform_int(2));
    for (int i = 0; i < n_consts; ++i) {
        std::vector<double> cv(1 + rng.uniform_int(4));
        for (double& v : cv) v = rng.uniform(-2.0, 2.0);
        prog.consts.push_back(cv);
        lens.push_back(static_cast<int>(cv.size()));
    }

    auto pick_of_len = [&](int len) {
        std::vector<int> ids;
        for (std::size_t i = 0; i < lens.size(); ++i) {
            if (lens[i] == len) ids.push_back(static_cast<int>(i));
        }
        if (ids.empty()) return -1;
        return ids[rng.uniform_int(ids.size())];
    };

    const int n_ops = 4 + static_cast<int>(rng.uniform_int(7));
    for (int k = 0; k < n_ops; ++k) {
        const int any = static_cast<int>(rng.uniform_int(lens.size()));
        switch (rng.uniform_int(10)) {
            case 0: prog.instrs.push_back({'r', any}); lens.push_back(lens[any]); break;
            case 1: prog.instrs.push_back({'p', any}); lens.push_back(lens[any]); break;
            case 2: prog.instrs.push_back({'A', any}); lens.push_back(lens[any]); break;
            case 3: {
                const int other = pick_of_len(lens[any]);
                prog.instrs.push_back({'+', any, other});
                lens.push_back(lens[any]);
                break;
            }
            case 4: {
                const int other = pick_of_len(lens[any]);
                prog.instrs.push_back({'-', any, other});
                lens.push_back(lens[any]);
                break;
            }
            case 5: {
                Instr in{'*', any};
                in.c = rng.uniform(-2.0, 2.0);
                prog.instrs.push_back(in);
                lens.push_back(lens[any]);
                break;
            }
            case 6: {
                const int other = pick_of_len(lens[any]);
                prog.instrs.push_back({'q', any, other});
                lens.push_back(1);
                break;
            }
            case 7: {
                if (lens[any] < 2) { prog.instrs.push_back({'A', any}); lens.push_back(lens[any]); break; }
                Instr in{'S', any};
                in.begin = static_cast<int>(rng.uniform_int(lens[any] - 1));
                in.end = in.begin + 1 +
                         static_cast<int>(rng.uniform_int(lens[any] - in.begin));
                prog.instrs.push_back(in);
                lens.push_back(in.end - in.begin);
                break;
            }
            case 8: {
                const int other = static_cast<int>(rng.uniform_int(lens.size()));
                prog.instrs.push_back({'c', any, other});
                lens.push_back(lens[any] + lens[other]);
                break;
            }
            case 9: {
                // divide by |y|; well_conditioned() rejects near-zero denominators
                const int other = pick_of_len(lens[any]);
                prog.instrs.push_back({'A', other});
                lens.push_back(lens[other]);
                prog.instrs.push_back({'/', any, static_cast<int>(lens.size()) - 1});
                lens.push_back(lens[any]);
                break;
            }
        }
    }
    // scalar root
    prog.instrs.push_back({'s', static_cast<int>(lens.size()) - 1});
    lens.push_back(1);
    return prog;
}

// reject graphs with kink-adjacent inputs or tiny denominators
bool well_conditioned(const Tape& t, NodeId root, double margin) {
    for (NodeId id = 0; id <= root; ++id) {
        const Node& n = t.node(id);
        if (n.kind == OpKind::kRelu || n.kind == OpKind::kPosPart || n.kind == OpKind::kAbs) {
            for (double v : t.value(n.inputs[0])) {
                if (std::fabs(v) <= margin) return false;
            }
        }
        if (n.kind == OpKind::kDiv) {
            for (double v : t.value(n.inputs[1])) {
                if (std::fabs(v) <= 0.3) return false;
            }
        }
        for (double v : n.value) {
            if (!std::isfinite(v) || std::fabs(v) > 1e6) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("backward matches finite differences on random graphs") {
    const double eps = 1e-5;
    int accepted = 0;
    double worst = 0.0;
    for (Seed seed = 1; accepted < 100 && seed < 4000; ++seed) {
        const GraphProgram prog = random_program(seed);
        Rng rng(derive_seed(seed, "values"));
        const ParamVector pv = prog.init_params(rng);

        Tape t;
        TapeBinding binding;
        const NodeId root = prog.execute(t, pv, binding);
        if (!well_conditioned(t, root, 10.0 * eps)) continue;
        ++accepted;

        const auto grads = t.backward(root);
        const auto flat = flatten_grads(pv, binding, grads);

        const auto f = [&](const ParamVector& p) {
            Tape t2;
            TapeBinding b2;
            return t2.scalar(prog.execute(t2, p, b2));
        };
        const auto fd = finite_diff_grad(f, pv, eps);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            worst = std::max(worst, rel_err(flat[i], fd[i]));
        }
    }
    REQUIRE(accepted == 100);
    CHECK(worst <= 1e-4);
}

TEST_CASE("turning blocked leaves into params changes no other gradient") {
    int accepted = 0;
    for (Seed seed = 1; accepted < 50 && seed < 2000; ++seed) {
        const GraphProgram prog = random_program(seed);
        Rng rng(derive_seed(seed, "values"));
        const ParamVector pv = prog.init_params(rng);

        Tape t1, t2;
        TapeBinding b1, b2;
        const NodeId r1 = prog.execute(t1, pv, b1, false);
        const NodeId r2 = prog.execute(t2, pv, b2, true);
        if (!well_conditioned(t1, r1, 1e-9)) continue;
        ++accepted;

        const auto g1 = flatten_grads(pv, b1, t1.backward(r1));
        const auto g2 = flatten_grads(pv, b2, t2.backward(r2));
        CHECK(g1 == g2);  // bitwise
    }
    REQUIRE(accepted == 50);
}

TEST_CASE("forward evaluation is deterministic") {
    const GraphProgram prog = random_program(7);
    Rng rng(derive_seed(7, "values"));
    const ParamVector pv = prog.init_params(rng);
    Tape t1, t2;
    TapeBinding b1, b2;
    const NodeId r1 = prog.execute(t1, pv, b1);
    const NodeId r2 = prog.execute(t2, pv, b2);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1.node(static_cast<NodeId>(i)).value == t2.node(static_cast<NodeId>(i)).value);
    }
    CHECK(t1.scalar(r1) == t2.scalar(r2));
}
