#include "predplan/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace predplan {

std::vector<std::pair<int, int>> MlpSpec::layer_dims() const {
    std::vector<std::pair<int, int>> dims;
    int in = in_dim;
    for (int h : hidden) {
        dims.emplace_back(in, h);
        in = h;
    }
    dims.emplace_back(in, out_dim);
    return dims;
}

void MlpSpec::validate() const {
    if (in_dim <= 0 || out_dim <= 0) throw TapeError("mlp spec: dims must be positive");
    for (int h : hidden) {
        if (h <= 0) throw TapeError("mlp spec: hidden widths must be positive");
    }
    auto check_norm = [](const std::vector<double>& shift, const std::vector<double>& scale,
                         int dim, const char* what) {
        if (shift.empty() && scale.empty()) return;
        if (static_cast<int>(shift.size()) != dim || static_cast<int>(scale.size()) != dim) {
            throw TapeError(std::string("mlp spec: ") + what + " normalization length mismatch");
        }
        for (double s : scale) {
            if (s == 0.0) throw TapeError(std::string("mlp spec: ") + what + " scale of zero");
        }
    };
    check_norm(in_shift, in_scale, in_dim, "input");
    check_norm(out_shift, out_scale, out_dim, "output");
}

ParamVector mlp_init(const MlpSpec& spec, Seed seed) {
    spec.validate();
    ParamVector pv;
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        const std::size_t wi =
            pv.add_slice("l" + std::to_string(l) + ".w", static_cast<std::size_t>(fan_in) * fan_out);
        pv.add_slice("l" + std::to_string(l) + ".b", static_cast<std::size_t>(fan_out));
        Rng rng(derive_seed(seed, "mlp.init", l));
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : pv.slice(wi)) w = rng.uniform(-bound, bound);
    }
    return pv;
}

namespace {

// y = W x + b with the exact accumulation order of Tape::affine
void apply_affine(std::span<const double> w, std::span<const double> b,
                  std::span<const double> x, std::vector<double>& out) {
    const std::size_t rows = b.size();
    const std::size_t cols = x.size();
    out.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < cols; ++j) acc += w[i * cols + j] * x[j];
        out[i] = acc;
    }
}

struct AffineConsts {
    std::vector<double> w, b;
};

// (x - shift) / scale as a dense affine map
AffineConsts norm_consts(const std::vector<double>& shift, const std::vector<double>& scale) {
    const std::size_t d = shift.size();
    AffineConsts c;
    c.w.assign(d * d, 0.0);
    c.b.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        c.w[i * d + i] = 1.0 / scale[i];
        c.b[i] = -shift[i] / scale[i];
    }
    return c;
}

// shift + scale * x
AffineConsts denorm_consts(const std::vector<double>& shift, const std::vector<double>& scale) {
    const std::size_t d = shift.size();
    AffineConsts c;
    c.w.assign(d * d, 0.0);
    c.b = shift;
    for (std::size_t i = 0; i < d; ++i) c.w[i * d + i] = scale[i];
    return c;
}

}  // namespace

MlpOnTape attach_mlp(Tape& tape, const MlpSpec& spec, const ParamVector& params) {
    spec.validate();
    MlpOnTape m;
    m.spec = &spec;
    m.binding = bind_params(tape, params);
    if (spec.has_in_norm()) {
        auto c = norm_consts(spec.in_shift, spec.in_scale);
        m.in_w = tape.constant(c.w);
        m.in_b = tape.constant(c.b);
    }
    if (spec.has_out_norm()) {
        auto d = denorm_consts(spec.out_shift, spec.out_scale);
        m.out_w = tape.constant(d.w);
        m.out_b = tape.constant(d.b);
        auto n = norm_consts(spec.out_shift, spec.out_scale);
        m.norm_w = tape.constant(n.w);
        m.norm_b = tape.constant(n.b);
    }
    return m;
}

NodeId MlpOnTape::forward(Tape& tape, std::span<const NodeId> inputs) const {
    NodeId x = inputs.size() == 1 ? inputs[0] : tape.concat(inputs);
    std::size_t got = tape.value(x).size();
    if (static_cast<int>(got) != spec->in_dim) {
        throw TapeError("mlp forward: input length " + std::to_string(got) + ", spec wants " +
                        std::to_string(spec->in_dim));
    }
    if (in_w != -1) x = tape.affine(in_w, in_b, x);
    const int layers = spec->n_layers();
    for (int l = 0; l < layers; ++l) {
        x = tape.affine(binding.nodes[2 * l], binding.nodes[2 * l + 1], x);
        if (l + 1 < layers) x = tape.relu(x);
    }
    if (out_w != -1) x = tape.affine(out_w, out_b, x);
    return x;
}

NodeId MlpOnTape::forward(Tape& tape, NodeId input) const {
    NodeId xs[1] = {input};
    return forward(tape, std::span<const NodeId>(xs));
}

NodeId MlpOnTape::normalize_out(Tape& tape, NodeId y) const {
    if (norm_w == -1) return y;
    return tape.affine(norm_w, norm_b, y);
}

std::vector<double> mlp_apply(const MlpSpec& spec, const ParamVector& params,
                              std::span<const double> input) {
    if (static_cast<int>(input.size()) != spec.in_dim) {
        throw TapeError("mlp apply: input length " + std::to_string(input.size()) +
                        ", spec wants " + std::to_string(spec.in_dim));
    }
    std::vector<double> x(input.begin(), input.end());
    std::vector<double> y;
    if (spec.has_in_norm()) {
        auto c = norm_consts(spec.in_shift, spec.in_scale);
        apply_affine(c.w, c.b, x, y);
        x.swap(y);
    }
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l < dims.size(); ++l) {
        apply_affine(params.slice(2 * l), params.slice(2 * l + 1), x, y);
        x.swap(y);
        if (l + 1 < dims.size()) {
            for (double& v : x) v = v > 0.0 ? v : 0.0;
        }
    }
    if (spec.has_out_norm()) {
        auto d = denorm_consts(spec.out_shift, spec.out_scale);
        apply_affine(d.w, d.b, x, y);
        x.swap(y);
    }
    return x;
}

std::vector<double> mlp_normalize_out(const MlpSpec& spec, std::span<const double> y) {
    if (!spec.has_out_norm()) return {y.begin(), y.end()};
    auto c = norm_consts(spec.out_shift, spec.out_scale);
    std::vector<double> out;
    apply_affine(c.w, c.b, y, out);
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_mlp(const std::string& path, const MlpSpec& spec, const ParamVector& params) {
    spec.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    const auto dims = spec.layer_dims();
    out << "mlp " << dims.size() << "\n";
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [in, w] = dims[l];
        out << "layer " << in << " " << w << " "
            << (l + 1 < dims.size() ? "relu" : "identity") << "\n";
        auto ws = params.slice(2 * l);
        for (int r = 0; r < w; ++r) {
            for (int c = 0; c < in; ++c) {
                if (c) out << " ";
                out << fmt17(ws[static_cast<std::size_t>(r) * in + c]);
            }
            out << "\n";
        }
        auto bs = params.slice(2 * l + 1);
        for (int r = 0; r < w; ++r) {
            if (r) out << " ";
            out << fmt17(bs[r]);
        }
        out << "\n";
    }
}

std::pair<MlpSpec, ParamVector> load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path);
    std::string tag;
    std::size_t layers = 0;
    if (!(in >> tag >> layers) || tag != "mlp" || layers == 0) {
        throw std::runtime_error(path + ": not an mlp checkpoint");
    }
    MlpSpec spec;
    ParamVector pv;
    int prev_out = -1;
    for (std::size_t l = 0; l < layers; ++l) {
        int ind = 0, outd = 0;
        std::string act;
        if (!(in >> tag >> ind >> outd >> act) || tag != "layer" || ind <= 0 || outd <= 0) {
            throw std::runtime_error(path + ": malformed layer header");
        }
        const bool last = l + 1 == layers;
        if ((last && act != "identity") || (!last && act != "relu")) {
            throw std::runtime_error(path + ": unexpected activation '" + act + "'");
        }
        if (l == 0) spec.in_dim = ind;
        else if (ind != prev_out) throw std::runtime_error(path + ": layer dims do not chain");
        if (last) spec.out_dim = outd;
        else spec.hidden.push_back(outd);
        prev_out = outd;

        const std::size_t wi =
            pv.add_slice("l" + std::to_string(l) + ".w", static_cast<std::size_t>(ind) * outd);
        const std::size_t bi = pv.add_slice("l" + std::to_string(l) + ".b", outd);
        for (double& v : pv.slice(wi)) {
            if (!(in >> v)) throw std::runtime_error(path + ": truncated weights");
        }
        for (double& v : pv.slice(bi)) {
            if (!(in >> v)) throw std::runtime_error(path + ": truncated biases");
        }
    }
    spec.validate();
    return {std::move(spec), std::move(pv)};
}

}  // namespace predplan
