#include "predplan/param.hpp"

#include <stdexcept>

namespace predplan {

std::size_t ParamVector::add_slice(std::string name, std::size_t len, double fill) {
    for (const auto& s : layout_) {
        if (s.name == name) throw TapeError("duplicate parameter slice '" + name + "'");
    }
    ParamSlice s;
    s.name = std::move(name);
    s.offset = values_.size();
    s.len = len;
    layout_.push_back(std::move(s));
    values_.resize(values_.size() + len, fill);
    return layout_.size() - 1;
}

std::span<double> ParamVector::slice(std::size_t index) {
    const auto& s = layout_.at(index);
    return {values_.data() + s.offset, s.len};
}

std::span<const double> ParamVector::slice(std::size_t index) const {
    const auto& s = layout_.at(index);
    return {values_.data() + s.offset, s.len};
}

std::size_t ParamVector::find(std::string_view name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        if (layout_[i].name == name) return i;
    }
    throw TapeError("no parameter slice named '" + std::string(name) + "'");
}

std::span<double> ParamVector::slice(std::string_view name) { return slice(find(name)); }

std::span<const double> ParamVector::slice(std::string_view name) const { return slice(find(name)); }

TapeBinding bind_params(Tape& tape, const ParamVector& params) {
    TapeBinding b;
    b.nodes.reserve(params.layout().size());
    for (std::size_t i = 0; i < params.layout().size(); ++i) {
        auto s = params.slice(i);
        b.nodes.push_back(tape.param(std::vector<double>(s.begin(), s.end())));
    }
    return b;
}

std::vector<double> flatten_grads(const ParamVector& params, const TapeBinding& binding,
                                  const std::map<NodeId, std::vector<double>>& grads) {
    std::vector<double> flat(params.size(), 0.0);
    const auto& layout = params.layout();
    if (binding.nodes.size() != layout.size()) {
        throw TapeError("binding does not match parameter layout");
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        auto it = grads.find(binding.nodes[i]);
        if (it == grads.end()) continue;
        if (it->second.size() != layout[i].len) {
            throw TapeError("gradient length mismatch for slice '" + layout[i].name + "'");
        }
        std::copy(it->second.begin(), it->second.end(), flat.begin() + layout[i].offset);
    }
    return flat;
}

}  // namespace predplan
