#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predplan/tape.hpp"

namespace predplan {

struct ParamSlice {
    std::string name;
    std::size_t offset;
    std::size_t len;
};

// Flat trainable weight vector with a named-slice layout. Slices tile the
// vector exactly by construction (each one starts where the previous ended).
class ParamVector {
public:
    std::size_t add_slice(std::string name, std::size_t len, double fill = 0.0);

    std::span<double> slice(std::size_t index);
    std::span<const double> slice(std::size_t index) const;
    std::span<double> slice(std::string_view name);
    std::span<const double> slice(std::string_view name) const;

    const std::vector<ParamSlice>& layout() const { return layout_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    std::size_t find(std::string_view name) const;

    std::vector<double> values_;
    std::vector<ParamSlice> layout_;
};

// Param leaves for every slice of a ParamVector, in layout order.
struct TapeBinding {
    std::vector<NodeId> nodes;
};

TapeBinding bind_params(Tape& tape, const ParamVector& params);

// Reassembles backward()'s per-leaf gradients into a flat vector aligned
// with the ParamVector layout. Slices whose leaves were never touched by the
// objective come back as zeros.
std::vector<double> flatten_grads(const ParamVector& params, const TapeBinding& binding,
                                  const std::map<NodeId, std::vector<double>>& grads);

}  // namespace predplan
