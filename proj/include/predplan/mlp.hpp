#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "predplan/param.hpp"
#include "predplan/rng.hpp"
#include "predplan/tape.hpp"

namespace predplan {

// Fully connected ReLU network with identity output. Optional fixed affine
// input/output scaling is part of the spec, not of the trainable weights:
// inputs are mapped through (x - in_shift) / in_scale and the raw network
// output through out_shift + out_scale * y. Kept deterministic and baked in
// so checkpoints stay pure weight dumps.
struct MlpSpec {
    int in_dim = 0;
    std::vector<int> hidden;
    int out_dim = 1;
    std::vector<double> in_shift, in_scale;
    std::vector<double> out_shift, out_scale;

    int n_layers() const { return static_cast<int>(hidden.size()) + 1; }
    std::vector<std::pair<int, int>> layer_dims() const;
    bool has_in_norm() const { return !in_shift.empty(); }
    bool has_out_norm() const { return !out_shift.empty(); }
    void validate() const;
};

// Glorot-uniform weights, zero biases. Slice layout: l0.w, l0.b, l1.w, ...
ParamVector mlp_init(const MlpSpec& spec, Seed seed);

// A network attached to one tape: param leaves plus the constant
// normalization nodes, created once so repeated forwards share them.
struct MlpOnTape {
    const MlpSpec* spec = nullptr;
    TapeBinding binding;
    NodeId in_w = -1, in_b = -1;      // input normalization
    NodeId out_w = -1, out_b = -1;    // output de-normalization
    NodeId norm_w = -1, norm_b = -1;  // output normalization (for losses)

    NodeId forward(Tape& tape, std::span<const NodeId> inputs) const;
    NodeId forward(Tape& tape, NodeId input) const;
    // (y - out_shift) / out_scale, or y itself when no output scaling is set
    NodeId normalize_out(Tape& tape, NodeId y) const;
};

MlpOnTape attach_mlp(Tape& tape, const MlpSpec& spec, const ParamVector& params);

// Plain numeric forward; bitwise identical to the tape forward for equal inputs.
std::vector<double> mlp_apply(const MlpSpec& spec, const ParamVector& params,
                              std::span<const double> input);

std::vector<double> mlp_normalize_out(const MlpSpec& spec, std::span<const double> y);

// Text checkpoint: "mlp <L>" then per layer "layer <in> <out> <activation>",
// weight rows, then the bias row, 17 significant digits (value-exact).
void save_mlp(const std::string& path, const MlpSpec& spec, const ParamVector& params);
std::pair<MlpSpec, ParamVector> load_mlp(const std::string& path);

}  // namespace predplan
