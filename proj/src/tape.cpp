#include "predplan/tape.hpp"

#include <algorithm>
#include <cmath>

namespace predplan {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::kLeafParam: return "leaf_param";
        case OpKind::kLeafConst: return "leaf_const";
        case OpKind::kAffine: return "affine";
        case OpKind::kRelu: return "relu";
        case OpKind::kPosPart: return "pospart";
        case OpKind::kAbs: return "abs";
        case OpKind::kAdd: return "add";
        case OpKind::kSub: return "sub";
        case OpKind::kScale: return "scale";
        case OpKind::kSum: return "sum";
        case OpKind::kSqDiff: return "sq_diff";
        case OpKind::kSelect: return "select";
        case OpKind::kConcat: return "concat";
        case OpKind::kDiv: return "div";
    }
    return "?";
}

namespace {

[[noreturn]] void dim_error(OpKind op, const std::string& detail) {
    throw TapeError(std::string(op_name(op)) + ": " + detail);
}

void require_same_length(OpKind op, const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        dim_error(op, "operand lengths differ (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    }
}

}  // namespace

std::size_t Tape::check_id(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw TapeError("node id " + std::to_string(id) + " out of range");
    }
    return static_cast<std::size_t>(id);
}

NodeId Tape::push(Node n) {
    n.adjoint.assign(n.value.size(), 0.0);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::param(std::vector<double> init) {
    Node n;
    n.kind = OpKind::kLeafParam;
    n.value = std::move(init);
    return push(std::move(n));
}

NodeId Tape::constant(std::vector<double> value) {
    Node n;
    n.kind = OpKind::kLeafConst;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::affine(NodeId weights, NodeId bias, std::span<const NodeId> xs) {
    const auto& w = val(weights);
    const auto& b = val(bias);
    std::size_t cols = 0;
    for (NodeId x : xs) cols += val(x).size();
    const std::size_t rows = b.size();
    if (xs.empty()) dim_error(OpKind::kAffine, "no inputs");
    if (w.size() != rows * cols) {
        dim_error(OpKind::kAffine, "weight length " + std::to_string(w.size()) +
                                       " does not tile " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
    }
    Node n;
    n.kind = OpKind::kAffine;
    n.rows = static_cast<int>(rows);
    n.cols = static_cast<int>(cols);
    n.inputs.push_back(weights);
    n.inputs.push_back(bias);
    for (NodeId x : xs) n.inputs.push_back(x);
    n.value.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = b[i];
        std::size_t j = 0;
        for (NodeId x : xs) {
            const auto& xv = val(x);
            for (double v : xv) acc += w[i * cols + j++] * v;
        }
        n.value[i] = acc;
    }
    return push(std::move(n));
}

NodeId Tape::affine(NodeId weights, NodeId bias, NodeId x) {
    NodeId xs[1] = {x};
    return affine(weights, bias, std::span<const NodeId>(xs));
}

NodeId Tape::relu(NodeId x) {
    Node n;
    n.kind = OpKind::kRelu;
    n.inputs = {x};
    n.value = val(x);
    for (double& v : n.value) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

NodeId Tape::pospart(NodeId x) {
    Node n;
    n.kind = OpKind::kPosPart;
    n.inputs = {x};
    n.value = val(x);
    for (double& v : n.value) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

NodeId Tape::abs(NodeId x) {
    Node n;
    n.kind = OpKind::kAbs;
    n.inputs = {x};
    n.value = val(x);
    for (double& v : n.value) v = std::fabs(v);
    return push(std::move(n));
}

NodeId Tape::add(NodeId x, NodeId y) {
    require_same_length(OpKind::kAdd, val(x), val(y));
    Node n;
    n.kind = OpKind::kAdd;
    n.inputs = {x, y};
    n.value = val(x);
    const auto& yv = val(y);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += yv[i];
    return push(std::move(n));
}

NodeId Tape::sub(NodeId x, NodeId y) {
    require_same_length(OpKind::kSub, val(x), val(y));
    Node n;
    n.kind = OpKind::kSub;
    n.inputs = {x, y};
    n.value = val(x);
    const auto& yv = val(y);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= yv[i];
    return push(std::move(n));
}

NodeId Tape::scale(double c, NodeId x) {
    Node n;
    n.kind = OpKind::kScale;
    n.coeff = c;
    n.inputs = {x};
    n.value = val(x);
    for (double& v : n.value) v = c * v;
    return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
    Node n;
    n.kind = OpKind::kSum;
    n.inputs = {x};
    double acc = 0.0;
    for (double v : val(x)) acc += v;
    n.value = {acc};
    return push(std::move(n));
}

NodeId Tape::sq_diff(NodeId x, NodeId y) {
    require_same_length(OpKind::kSqDiff, val(x), val(y));
    Node n;
    n.kind = OpKind::kSqDiff;
    n.inputs = {x, y};
    const auto& xv = val(x);
    const auto& yv = val(y);
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double d = xv[i] - yv[i];
        acc += d * d;
    }
    n.value = {acc};
    return push(std::move(n));
}

NodeId Tape::select(NodeId x, int begin, int end) {
    const auto& xv = val(x);
    if (begin < 0 || end > static_cast<int>(xv.size()) || begin >= end) {
        dim_error(OpKind::kSelect, "range [" + std::to_string(begin) + ", " +
                                       std::to_string(end) + ") invalid for length " +
                                       std::to_string(xv.size()));
    }
    Node n;
    n.kind = OpKind::kSelect;
    n.begin = begin;
    n.end = end;
    n.inputs = {x};
    n.value.assign(xv.begin() + begin, xv.begin() + end);
    return push(std::move(n));
}

NodeId Tape::concat(std::span<const NodeId> xs) {
    if (xs.empty()) dim_error(OpKind::kConcat, "no inputs");
    Node n;
    n.kind = OpKind::kConcat;
    for (NodeId x : xs) {
        n.inputs.push_back(x);
        const auto& xv = val(x);
        n.value.insert(n.value.end(), xv.begin(), xv.end());
    }
    return push(std::move(n));
}

NodeId Tape::div(NodeId x, NodeId y) {
    require_same_length(OpKind::kDiv, val(x), val(y));
    Node n;
    n.kind = OpKind::kDiv;
    n.inputs = {x, y};
    n.value = val(x);
    const auto& yv = val(y);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] /= yv[i];
    return push(std::move(n));
}

NodeId Tape::apply(OpKind op, std::span<const NodeId> inputs) {
    auto need = [&](std::size_t k) {
        if (inputs.size() != k) {
            dim_error(op, "expected " + std::to_string(k) + " inputs, got " +
                              std::to_string(inputs.size()));
        }
    };
    switch (op) {
        case OpKind::kRelu: need(1); return relu(inputs[0]);
        case OpKind::kPosPart: need(1); return pospart(inputs[0]);
        case OpKind::kAbs: need(1); return abs(inputs[0]);
        case OpKind::kAdd: need(2); return add(inputs[0], inputs[1]);
        case OpKind::kSub: need(2); return sub(inputs[0], inputs[1]);
        case OpKind::kSum: need(1); return sum(inputs[0]);
        case OpKind::kSqDiff: need(2); return sq_diff(inputs[0], inputs[1]);
        case OpKind::kConcat: return concat(inputs);
        case OpKind::kDiv: need(2); return div(inputs[0], inputs[1]);
        case OpKind::kAffine:
            if (inputs.size() < 3) dim_error(op, "needs weights, bias and at least one input");
            return affine(inputs[0], inputs[1], inputs.subspan(2));
        default:
            dim_error(op, "not constructible through apply()");
    }
}

std::span<const double> Tape::value(NodeId id) const {
    const auto& v = val(id);
    return {v.data(), v.size()};
}

double Tape::scalar(NodeId id) const {
    const auto& v = val(id);
    if (v.size() != 1) {
        throw TapeError("node " + std::to_string(id) + " is not scalar (length " +
                        std::to_string(v.size()) + ")");
    }
    return v[0];
}

std::map<NodeId, std::vector<double>> Tape::backward(NodeId root) {
    const std::size_t r = check_id(root);
    if (nodes_[r].value.size() != 1) {
        throw TapeError("backward: root must be scalar, node " + std::to_string(root) +
                        " has length " + std::to_string(nodes_[r].value.size()));
    }
    for (auto& n : nodes_) std::fill(n.adjoint.begin(), n.adjoint.end(), 0.0);
    nodes_[r].adjoint[0] = 1.0;

    for (NodeId id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        bool live = false;
        for (double g : n.adjoint) {
            if (g != 0.0) { live = true; break; }
        }
        if (!live) continue;
        const auto& g = n.adjoint;
        switch (n.kind) {
            case OpKind::kLeafParam:
            case OpKind::kLeafConst:
                break;
            case OpKind::kAffine: {
                auto& w = nodes_[check_id(n.inputs[0])];
                auto& b = nodes_[check_id(n.inputs[1])];
                const std::size_t rows = static_cast<std::size_t>(n.rows);
                const std::size_t cols = static_cast<std::size_t>(n.cols);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    b.adjoint[i] += gi;
                    std::size_t j = 0;
                    for (std::size_t k = 2; k < n.inputs.size(); ++k) {
                        auto& x = nodes_[check_id(n.inputs[k])];
                        for (std::size_t jj = 0; jj < x.value.size(); ++jj, ++j) {
                            w.adjoint[i * cols + j] += gi * x.value[jj];
                            x.adjoint[jj] += w.value[i * cols + j] * gi;
                        }
                    }
                }
                break;
            }
            case OpKind::kRelu:
            case OpKind::kPosPart: {
                auto& x = nodes_[check_id(n.inputs[0])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x.value[i] > 0.0) x.adjoint[i] += g[i];
                }
                break;
            }
            case OpKind::kAbs: {
                auto& x = nodes_[check_id(n.inputs[0])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double v = x.value[i];
                    if (v > 0.0) x.adjoint[i] += g[i];
                    else if (v < 0.0) x.adjoint[i] -= g[i];
                }
                break;
            }
            case OpKind::kAdd: {
                auto& x = nodes_[check_id(n.inputs[0])];
                auto& y = nodes_[check_id(n.inputs[1])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    x.adjoint[i] += g[i];
                    y.adjoint[i] += g[i];
                }
                break;
            }
            case OpKind::kSub: {
                auto& x = nodes_[check_id(n.inputs[0])];
                auto& y = nodes_[check_id(n.inputs[1])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    x.adjoint[i] += g[i];
                    y.adjoint[i] -= g[i];
                }
                break;
            }
            case OpKind::kScale: {
                auto& x = nodes_[check_id(n.inputs[0])];
                for (std::size_t i = 0; i < g.size(); ++i) x.adjoint[i] += n.coeff * g[i];
                break;
            }
            case OpKind::kSum: {
                auto& x = nodes_[check_id(n.inputs[0])];
                for (double& a : x.adjoint) a += g[0];
                break;
            }
            case OpKind::kSqDiff: {
                auto& x = nodes_[check_id(n.inputs[0])];
                auto& y = nodes_[check_id(n.inputs[1])];
                for (std::size_t i = 0; i < x.value.size(); ++i) {
                    const double d = 2.0 * (x.value[i] - y.value[i]) * g[0];
                    x.adjoint[i] += d;
                    y.adjoint[i] -= d;
                }
                break;
            }
            case OpKind::kSelect: {
                auto& x = nodes_[check_id(n.inputs[0])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    x.adjoint[static_cast<std::size_t>(n.begin) + i] += g[i];
                }
                break;
            }
            case OpKind::kConcat: {
                std::size_t off = 0;
                for (NodeId in : n.inputs) {
                    auto& x = nodes_[check_id(in)];
                    for (std::size_t i = 0; i < x.value.size(); ++i) x.adjoint[i] += g[off + i];
                    off += x.value.size();
                }
                break;
            }
            case OpKind::kDiv: {
                auto& x = nodes_[check_id(n.inputs[0])];
                auto& y = nodes_[check_id(n.inputs[1])];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    x.adjoint[i] += g[i] / y.value[i];
                    y.adjoint[i] -= g[i] * n.value[i] / y.value[i];
                }
                break;
            }
        }
    }

    std::map<NodeId, std::vector<double>> grads;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].kind == OpKind::kLeafParam) {
            grads.emplace(static_cast<NodeId>(i), nodes_[i].adjoint);
        }
    }
    return grads;
}

}  // namespace predplan
