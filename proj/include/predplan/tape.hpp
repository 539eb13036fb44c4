#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace predplan {

using NodeId = std::int32_t;

// Thrown for malformed graph construction (dimension mismatches etc).
struct TapeError : std::runtime_error {
    explicit TapeError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a computation produces non-finite values where finiteness is required.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

enum class OpKind : std::uint8_t {
    kLeafParam,  // trainable leaf; participates in gradient reports
    kLeafConst,  // gradient-blocked leaf; simulator outputs enter here
    kAffine,     // W x + b, with x the concatenation of one or more inputs
    kRelu,
    kPosPart,    // [x]_+ elementwise; same map as kRelu, kept as a distinct kind
    kAbs,
    kAdd,
    kSub,
    kScale,      // c * x for a constant c
    kSum,        // scalar sum of components
    kSqDiff,     // scalar ||x - y||^2
    kSelect,     // contiguous slice [begin, end)
    kConcat,
    kDiv,        // elementwise x / y
};

const char* op_name(OpKind k);

struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    std::vector<double> value;
    std::vector<double> adjoint;  // same length as value
    double coeff = 0.0;           // kScale
    int begin = 0;                // kSelect
    int end = 0;                  // kSelect
    int rows = 0;                 // kAffine
    int cols = 0;                 // kAffine
};

// Append-only reverse-mode record. Nodes always reference earlier nodes, so
// ids are a topological order and the backward sweep is a single reverse pass.
// Values are computed eagerly at construction. Single-threaded by design;
// independent tapes may be used concurrently.
class Tape {
public:
    // Trainable leaf. Its adjoint is reported by backward().
    NodeId param(std::vector<double> init);

    // Gradient-blocked leaf. It has no inputs, so nothing can flow through it,
    // and backward() never reports it.
    NodeId constant(std::vector<double> value);
    NodeId constant(double value) { return constant(std::vector<double>{value}); }

    // y = W x + b where x is the concatenation of xs, W is rows x cols
    // row-major (rows = len(b), cols = sum of input lengths).
    NodeId affine(NodeId weights, NodeId bias, std::span<const NodeId> xs);
    NodeId affine(NodeId weights, NodeId bias, NodeId x);

    NodeId relu(NodeId x);
    NodeId pospart(NodeId x);
    NodeId abs(NodeId x);
    NodeId add(NodeId x, NodeId y);
    NodeId sub(NodeId x, NodeId y);
    NodeId scale(double c, NodeId x);
    NodeId sum(NodeId x);
    NodeId sq_diff(NodeId x, NodeId y);
    NodeId select(NodeId x, int begin, int end);
    NodeId concat(std::span<const NodeId> xs);
    NodeId div(NodeId x, NodeId y);

    // Generic dispatch for ops that carry no extra attributes.
    NodeId apply(OpKind op, std::span<const NodeId> inputs);

    std::span<const double> value(NodeId id) const;
    double scalar(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_[check_id(id)]; }

    // Reverse sweep from a scalar root. Fills adjoints and returns the
    // gradients of every param leaf (blocked leaves are excluded).
    std::map<NodeId, std::vector<double>> backward(NodeId root);

private:
    NodeId push(Node n);
    std::size_t check_id(NodeId id) const;
    const std::vector<double>& val(NodeId id) const { return nodes_[check_id(id)].value; }

    std::vector<Node> nodes_;
};

}  // namespace predplan
