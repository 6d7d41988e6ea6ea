#pragma once

#include <string>
#include <vector>

#include "seqdesign/tensor.hpp"

namespace seqdesign {

// Trainable tensor with a persistent gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Handle to a node on a tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. A tape records one forward pass and is rebuilt
// per pass; backward() walks the nodes once in reverse. Gradients are kept
// for every node, so any intermediate (hidden states in particular) can be
// read back after backward. Every op output is checked for NaN/Inf.
//
// Only training tapes write into Parameter::grad; inference tapes treat
// parameters as frozen leaves, so parallel sampling chains can share one
// model without racing on the accumulators.
class Tape {
public:
    explicit Tape(bool training = false) : training_(training) {}

    Var leaf(Tensor value);
    Var param(const Parameter& p);

    Var add(Var a, Var b);          // same shape
    Var add_rowvec(Var a, Var v);   // a: [m,n], v: [n] or [1,n]
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var scale(Var a, double c);
    Var matmul(Var a, Var b);       // [m,k] x [k,n]
    Var conv1d(Var x, Var w);       // x: [len,cin], w: [cout,cin,kw], same padding
    Var layer_norm(Var x, Var gamma, Var beta);  // row-wise, eps 1e-5
    Var softmax(Var a);             // row-wise
    Var log_softmax(Var a);         // row-wise
    Var relu(Var a);
    Var gather_rows(Var table, const std::vector<int>& ids);
    Var sum_all(Var a);             // -> scalar
    Var mean_all(Var a);            // -> scalar
    Var mean_axis0(Var a);          // [m,n] -> [1,n]
    Var concat(Var a, Var b, int axis);  // 2-D, axis 0 or 1
    Var reshape(Var a, std::vector<int> shape);

    // Propagates from a scalar output; accumulates into Parameter::grad for
    // every param node on the tape.
    void backward(Var output);

    const Tensor& value(Var v) const { return node(v.id).value; }
    const Tensor& grad(Var v) const;
    double scalar(Var v) const;
    size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        leaf, add, add_rowvec, sub, mul, scale, matmul, conv1d, layer_norm,
        softmax, log_softmax, relu, gather_rows, sum_all, mean_all, mean_axis0,
        concat0, concat1, reshape,
    };

    struct Node {
        Op op = Op::leaf;
        Tensor value;
        Tensor grad;
        int parents[2] = {-1, -1};
        Parameter* parameter = nullptr;
        std::vector<int> iargs;
        std::vector<double> saved;
    };

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    Var push(Node n, const char* op_name);
    void backward_node(int id);

    std::vector<Node> nodes_;
    bool training_ = false;
    bool ran_backward_ = false;
};

} // namespace seqdesign
