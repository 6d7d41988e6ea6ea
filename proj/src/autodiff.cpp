#include "seqdesign/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "seqdesign/kernels.hpp"

namespace seqdesign {

namespace {

constexpr double kLayerNormEps = 1e-5;

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

std::string shapes(const Tensor& a, const Tensor& b) {
    return a.shape_str() + " vs " + b.shape_str();
}

Tensor transposed(const Tensor& m) {
    const int r = m.rows();
    const int c = m.cols();
    Tensor out({c, r});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
    }
    return out;
}

} // namespace

Var Tape::push(Node n, const char* op_name) {
    check_finite(n.value, op_name);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return push(std::move(n), "leaf");
}

Var Tape::param(const Parameter& p) {
    Node n;
    n.op = Op::leaf;
    n.value = p.value;
    n.parameter = training_ ? const_cast<Parameter*>(&p) : nullptr;
    return push(std::move(n), "param");
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "add: shape mismatch " + shapes(ta, tb));
    Node n;
    n.op = Op::add;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    n.value = ta;
    for (size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] += tb.data[i];
    return push(std::move(n), "add");
}

Var Tape::add_rowvec(Var a, Var v) {
    const Tensor& ta = value(a);
    const Tensor& tv = value(v);
    const int cols = ta.cols();
    require(static_cast<int64_t>(cols) == tv.size(),
            "add_rowvec: shape mismatch " + shapes(ta, tv));
    Node n;
    n.op = Op::add_rowvec;
    n.parents[0] = a.id;
    n.parents[1] = v.id;
    n.value = ta;
    for (int i = 0; i < ta.rows(); ++i) {
        for (int j = 0; j < cols; ++j) n.value.at(i, j) += tv.data[static_cast<size_t>(j)];
    }
    return push(std::move(n), "add_rowvec");
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "sub: shape mismatch " + shapes(ta, tb));
    Node n;
    n.op = Op::sub;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    n.value = ta;
    for (size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] -= tb.data[i];
    return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.same_shape(tb), "mul: shape mismatch " + shapes(ta, tb));
    Node n;
    n.op = Op::mul;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    n.value = ta;
    for (size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] *= tb.data[i];
    return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double c) {
    Node n;
    n.op = Op::scale;
    n.parents[0] = a.id;
    n.value = value(a);
    for (double& x : n.value.data) x *= c;
    n.saved.push_back(c);
    return push(std::move(n), "scale");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.ndim() == 2 && tb.ndim() == 2 && ta.cols() == tb.rows(),
            "matmul: incompatible shapes " + shapes(ta, tb));
    Node n;
    n.op = Op::matmul;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    n.value = Tensor({ta.rows(), tb.cols()});
    kernels::matmul(ta.data.data(), tb.data.data(), n.value.data.data(),
                    ta.rows(), ta.cols(), tb.cols());
    return push(std::move(n), "matmul");
}

Var Tape::conv1d(Var x, Var w) {
    const Tensor& tx = value(x);
    const Tensor& tw = value(w);
    require(tx.ndim() == 2 && tw.ndim() == 3, "conv1d: expects [len,cin] and [cout,cin,kw]");
    require(tw.dim(1) == tx.cols(), "conv1d: channel mismatch " + shapes(tx, tw));
    require(tw.dim(2) % 2 == 1, "conv1d: kernel width must be odd");
    Node n;
    n.op = Op::conv1d;
    n.parents[0] = x.id;
    n.parents[1] = w.id;
    n.value = Tensor({tx.rows(), tw.dim(0)});
    kernels::conv1d(tx.data.data(), tw.data.data(), n.value.data.data(),
                    tx.rows(), tx.cols(), tw.dim(0), tw.dim(2));
    return push(std::move(n), "conv1d");
}

Var Tape::layer_norm(Var x, Var gamma, Var beta) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gamma);
    const Tensor& tb = value(beta);
    const int cols = tx.cols();
    require(tg.size() == cols && tb.size() == cols,
            "layer_norm: affine shape mismatch " + shapes(tg, tb));
    Node n;
    n.op = Op::layer_norm;
    n.parents[0] = x.id;
    n.parents[1] = gamma.id;
    n.iargs.push_back(beta.id);
    n.value = tx;
    n.saved.resize(static_cast<size_t>(2 * tx.rows()));
    for (int i = 0; i < tx.rows(); ++i) {
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += tx.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double d = tx.at(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        n.saved[static_cast<size_t>(2 * i)] = mean;
        n.saved[static_cast<size_t>(2 * i + 1)] = inv;
        for (int j = 0; j < cols; ++j) {
            const double xhat = (tx.at(i, j) - mean) * inv;
            n.value.at(i, j) = tg.data[static_cast<size_t>(j)] * xhat +
                               tb.data[static_cast<size_t>(j)];
        }
    }
    return push(std::move(n), "layer_norm");
}

Var Tape::softmax(Var a) {
    Node n;
    n.op = Op::softmax;
    n.parents[0] = a.id;
    n.value = row_softmax(value(a));
    return push(std::move(n), "softmax");
}

Var Tape::log_softmax(Var a) {
    Node n;
    n.op = Op::log_softmax;
    n.parents[0] = a.id;
    n.value = row_log_softmax(value(a));
    return push(std::move(n), "log_softmax");
}

Var Tape::relu(Var a) {
    Node n;
    n.op = Op::relu;
    n.parents[0] = a.id;
    n.value = value(a);
    for (double& x : n.value.data) x = x > 0.0 ? x : 0.0;
    return push(std::move(n), "relu");
}

Var Tape::gather_rows(Var table, const std::vector<int>& ids) {
    const Tensor& tt = value(table);
    require(tt.ndim() == 2, "gather_rows: table must be 2-D, got " + tt.shape_str());
    Node n;
    n.op = Op::gather_rows;
    n.parents[0] = table.id;
    n.iargs = ids;
    n.value = Tensor({static_cast<int>(ids.size()), tt.cols()});
    for (size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < tt.rows(), "gather_rows: id out of range");
        for (int j = 0; j < tt.cols(); ++j) {
            n.value.at(static_cast<int>(i), j) = tt.at(ids[i], j);
        }
    }
    return push(std::move(n), "gather_rows");
}

Var Tape::sum_all(Var a) {
    Node n;
    n.op = Op::sum_all;
    n.parents[0] = a.id;
    double s = 0.0;
    for (double x : value(a).data) s += x;
    n.value = Tensor::scalar(s);
    return push(std::move(n), "sum_all");
}

Var Tape::mean_all(Var a) {
    Node n;
    n.op = Op::mean_all;
    n.parents[0] = a.id;
    const Tensor& ta = value(a);
    require(ta.size() > 0, "mean_all: empty tensor");
    double s = 0.0;
    for (double x : ta.data) s += x;
    n.value = Tensor::scalar(s / static_cast<double>(ta.size()));
    return push(std::move(n), "mean_all");
}

Var Tape::mean_axis0(Var a) {
    const Tensor& ta = value(a);
    const int rows = ta.rows();
    const int cols = ta.cols();
    require(rows > 0, "mean_axis0: empty tensor");
    Node n;
    n.op = Op::mean_axis0;
    n.parents[0] = a.id;
    n.value = Tensor({1, cols});
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) n.value.at(0, j) += ta.at(i, j);
    }
    for (int j = 0; j < cols; ++j) n.value.at(0, j) /= rows;
    return push(std::move(n), "mean_axis0");
}

Var Tape::concat(Var a, Var b, int axis) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require(ta.ndim() == 2 && tb.ndim() == 2, "concat: 2-D tensors only");
    require(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
    Node n;
    n.parents[0] = a.id;
    n.parents[1] = b.id;
    if (axis == 0) {
        require(ta.cols() == tb.cols(), "concat: column mismatch " + shapes(ta, tb));
        n.op = Op::concat0;
        n.value = Tensor({ta.rows() + tb.rows(), ta.cols()});
        std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin());
        std::copy(tb.data.begin(), tb.data.end(), n.value.data.begin() + ta.size());
    } else {
        require(ta.rows() == tb.rows(), "concat: row mismatch " + shapes(ta, tb));
        n.op = Op::concat1;
        n.value = Tensor({ta.rows(), ta.cols() + tb.cols()});
        for (int i = 0; i < ta.rows(); ++i) {
            for (int j = 0; j < ta.cols(); ++j) n.value.at(i, j) = ta.at(i, j);
            for (int j = 0; j < tb.cols(); ++j) n.value.at(i, ta.cols() + j) = tb.at(i, j);
        }
    }
    return push(std::move(n), "concat");
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    const Tensor& ta = value(a);
    require(shape_size(shape) == ta.size(),
            "reshape: size mismatch " + ta.shape_str());
    Node n;
    n.op = Op::reshape;
    n.parents[0] = a.id;
    n.value = Tensor(std::move(shape), ta.data);
    return push(std::move(n), "reshape");
}

const Tensor& Tape::grad(Var v) const {
    if (!ran_backward_) throw std::logic_error("tape: grad read before backward");
    return node(v.id).grad;
}

double Tape::scalar(Var v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw std::logic_error("tape: scalar() on tensor " + t.shape_str());
    return t.data[0];
}

void Tape::backward(Var output) {
    const Tensor& out = value(output);
    if (out.size() != 1) {
        throw std::logic_error("backward: output must be scalar, got " + out.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
    node(output.id).grad.data[0] = 1.0;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        backward_node(id);
    }
    for (Node& n : nodes_) {
        if (n.parameter != nullptr) {
            for (size_t i = 0; i < n.grad.data.size(); ++i) {
                n.parameter->grad.data[i] += n.grad.data[i];
            }
        }
    }
    ran_backward_ = true;
}

void Tape::backward_node(int id) {
    Node& n = node(id);
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::leaf:
            break;
        case Op::add: {
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            for (size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] += g.data[i];
                gb.data[i] += g.data[i];
            }
            break;
        }
        case Op::add_rowvec: {
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gv = node(n.parents[1]).grad;
            const int cols = n.value.cols();
            for (int i = 0; i < n.value.rows(); ++i) {
                for (int j = 0; j < cols; ++j) {
                    ga.at(i, j) += g.at(i, j);
                    gv.data[static_cast<size_t>(j)] += g.at(i, j);
                }
            }
            break;
        }
        case Op::sub: {
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            for (size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] += g.data[i];
                gb.data[i] -= g.data[i];
            }
            break;
        }
        case Op::mul: {
            const Tensor& va = node(n.parents[0]).value;
            const Tensor& vb = node(n.parents[1]).value;
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            for (size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] += g.data[i] * vb.data[i];
                gb.data[i] += g.data[i] * va.data[i];
            }
            break;
        }
        case Op::scale: {
            Tensor& ga = node(n.parents[0]).grad;
            const double c = n.saved[0];
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
            break;
        }
        case Op::matmul: {
            const Tensor& va = node(n.parents[0]).value;
            const Tensor& vb = node(n.parents[1]).value;
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            const Tensor bt = transposed(vb);
            kernels::matmul_acc(g.data.data(), bt.data.data(), ga.data.data(),
                                va.rows(), vb.cols(), va.cols());
            const Tensor at = transposed(va);
            kernels::matmul_acc(at.data.data(), g.data.data(), gb.data.data(),
                                vb.rows(), va.rows(), vb.cols());
            break;
        }
        case Op::conv1d: {
            const Tensor& vx = node(n.parents[0]).value;
            const Tensor& vw = node(n.parents[1]).value;
            Tensor& gx = node(n.parents[0]).grad;
            Tensor& gw = node(n.parents[1]).grad;
            kernels::conv1d_grad_input(g.data.data(), vw.data.data(), gx.data.data(),
                                       vx.rows(), vx.cols(), vw.dim(0), vw.dim(2));
            kernels::conv1d_grad_weight(vx.data.data(), g.data.data(), gw.data.data(),
                                        vx.rows(), vx.cols(), vw.dim(0), vw.dim(2));
            break;
        }
        case Op::layer_norm: {
            const Tensor& vx = node(n.parents[0]).value;
            const Tensor& vg = node(n.parents[1]).value;
            Tensor& gx = node(n.parents[0]).grad;
            Tensor& ggamma = node(n.parents[1]).grad;
            Tensor& gbeta = node(n.iargs[0]).grad;
            const int cols = vx.cols();
            for (int i = 0; i < vx.rows(); ++i) {
                const double mean = n.saved[static_cast<size_t>(2 * i)];
                const double inv = n.saved[static_cast<size_t>(2 * i + 1)];
                double sum_dxhat = 0.0;
                double sum_dxhat_xhat = 0.0;
                for (int j = 0; j < cols; ++j) {
                    const double xhat = (vx.at(i, j) - mean) * inv;
                    const double dxhat = g.at(i, j) * vg.data[static_cast<size_t>(j)];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    ggamma.data[static_cast<size_t>(j)] += g.at(i, j) * xhat;
                    gbeta.data[static_cast<size_t>(j)] += g.at(i, j);
                }
                for (int j = 0; j < cols; ++j) {
                    const double xhat = (vx.at(i, j) - mean) * inv;
                    const double dxhat = g.at(i, j) * vg.data[static_cast<size_t>(j)];
                    gx.at(i, j) += inv * (dxhat - sum_dxhat / cols -
                                          xhat * sum_dxhat_xhat / cols);
                }
            }
            break;
        }
        case Op::softmax: {
            Tensor& ga = node(n.parents[0]).grad;
            const Tensor& y = n.value;
            const int cols = y.cols();
            for (int i = 0; i < y.rows(); ++i) {
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += g.at(i, j) * y.at(i, j);
                for (int j = 0; j < cols; ++j) {
                    ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                }
            }
            break;
        }
        case Op::log_softmax: {
            Tensor& ga = node(n.parents[0]).grad;
            const Tensor& y = n.value;
            const int cols = y.cols();
            for (int i = 0; i < y.rows(); ++i) {
                double sum_g = 0.0;
                for (int j = 0; j < cols; ++j) sum_g += g.at(i, j);
                for (int j = 0; j < cols; ++j) {
                    ga.at(i, j) += g.at(i, j) - std::exp(y.at(i, j)) * sum_g;
                }
            }
            break;
        }
        case Op::relu: {
            const Tensor& vx = node(n.parents[0]).value;
            Tensor& ga = node(n.parents[0]).grad;
            for (size_t i = 0; i < g.data.size(); ++i) {
                if (vx.data[i] > 0.0) ga.data[i] += g.data[i];
            }
            break;
        }
        case Op::gather_rows: {
            Tensor& gt = node(n.parents[0]).grad;
            const int cols = n.value.cols();
            for (size_t i = 0; i < n.iargs.size(); ++i) {
                for (int j = 0; j < cols; ++j) {
                    gt.at(n.iargs[i], j) += g.at(static_cast<int>(i), j);
                }
            }
            break;
        }
        case Op::sum_all: {
            Tensor& ga = node(n.parents[0]).grad;
            const double gs = g.data[0];
            for (double& x : ga.data) x += gs;
            break;
        }
        case Op::mean_all: {
            Tensor& ga = node(n.parents[0]).grad;
            const double gs = g.data[0] / static_cast<double>(ga.size());
            for (double& x : ga.data) x += gs;
            break;
        }
        case Op::mean_axis0: {
            Tensor& ga = node(n.parents[0]).grad;
            const int rows = ga.rows();
            const int cols = ga.cols();
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < cols; ++j) ga.at(i, j) += g.at(0, j) / rows;
            }
            break;
        }
        case Op::concat0: {
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            for (int64_t i = 0; i < ga.size(); ++i) ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
            for (int64_t i = 0; i < gb.size(); ++i) {
                gb.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(ga.size() + i)];
            }
            break;
        }
        case Op::concat1: {
            Tensor& ga = node(n.parents[0]).grad;
            Tensor& gb = node(n.parents[1]).grad;
            for (int i = 0; i < ga.rows(); ++i) {
                for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(i, j);
                for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ga.cols() + j);
            }
            break;
        }
        case Op::reshape: {
            Tensor& ga = node(n.parents[0]).grad;
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
            break;
        }
    }
}

} // namespace seqdesign
