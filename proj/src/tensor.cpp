#include "seqdesign/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(shape_size(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_size(shape)) {
        throw std::invalid_argument("tensor: data length does not match shape");
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

Tensor Tensor::randn(std::vector<int> s, Rng& rng, double stddev) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = stddev * rng.normal();
    return t;
}

int Tensor::rows() const {
    if (ndim() != 2) throw std::logic_error("tensor: rows() on non-matrix " + shape_str());
    return shape[0];
}

int Tensor::cols() const {
    if (ndim() != 2) throw std::logic_error("tensor: cols() on non-matrix " + shape_str());
    return shape[1];
}

double& Tensor::at(int r, int c) {
    return data[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

double Tensor::at(int r, int c) const {
    return data[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

bool Tensor::all_finite() const {
    for (double x : data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) {
        throw std::runtime_error(std::string("non-finite value produced by ") + where);
    }
}

Tensor row_softmax(const Tensor& logits) {
    Tensor out = logits;
    const int r = logits.rows();
    const int c = logits.cols();
    for (int i = 0; i < r; ++i) {
        double mx = -1e300;
        for (int j = 0; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(logits.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < c; ++j) out.at(i, j) /= z;
    }
    return out;
}

Tensor row_log_softmax(const Tensor& logits) {
    Tensor out = logits;
    const int r = logits.rows();
    const int c = logits.cols();
    for (int i = 0; i < r; ++i) {
        double mx = -1e300;
        for (int j = 0; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
        const double lz = mx + std::log(z);
        for (int j = 0; j < c; ++j) out.at(i, j) = logits.at(i, j) - lz;
    }
    return out;
}

} // namespace seqdesign
