#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqdesign/rng.hpp"

namespace seqdesign {

// Dense row-major tensor of 64-bit floats. Most of the codebase works with
// scalars, vectors, and 2-D matrices; conv weights are 3-D.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> s);
    static Tensor full(std::vector<int> s, double v);
    static Tensor randn(std::vector<int> s, Rng& rng, double stddev = 1.0);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }
    int rows() const;  // 2-D only
    int cols() const;

    double& at(int r, int c);
    double at(int r, int c) const;
    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

int64_t shape_size(const std::vector<int>& shape);

// Throws if the tensor contains NaN or Inf; `where` names the producing op.
void check_finite(const Tensor& t, const char* where);

// Raw (tape-free) helpers used by samplers where no gradient is needed.
// Numerically stable row softmax for a 2-D tensor.
Tensor row_softmax(const Tensor& logits);
Tensor row_log_softmax(const Tensor& logits);

} // namespace seqdesign
