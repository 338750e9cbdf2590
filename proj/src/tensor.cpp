#include "humid/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "humid/kernels.hpp"

namespace humid {

namespace {

std::int64_t product(const std::vector<int>& shape) {
    std::int64_t p = 1;
    for (int s : shape) p *= s;
    return p;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

void check_finite(const Tensor& t) {
#ifndef NDEBUG
    assert(t.all_finite() && "forward value contains NaN/Inf");
#else
    (void)t;
#endif
}

}  // namespace

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (product(shape) != static_cast<std::int64_t>(data.size()))
        throw std::invalid_argument("Tensor: shape " + shape_str(shape) +
                                    " does not match data length " +
                                    std::to_string(data.size()));
}

Tensor Tensor::zeros(std::vector<int> shape) {
    std::vector<double> d(static_cast<std::size_t>(product(shape)), 0.0);
    return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    std::vector<double> d(static_cast<std::size_t>(product(shape)), v);
    return Tensor(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::from(std::vector<int> shape, std::initializer_list<double> d) {
    return Tensor(std::move(shape), std::vector<double>(d));
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(data.size()); }

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(),
                       [](double v) { return std::isfinite(v); });
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// ---- Tape ----

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Tensor value, const std::vector<Var>& inputs,
               std::function<void(Tape&, int)> backward) {
    check_finite(value);
    Node n;
    n.value = std::move(value);
    n.inputs = inputs;
    n.backward = std::move(backward);
    for (Var in : inputs)
        if (nodes_[static_cast<std::size_t>(in.id)].requires_grad) n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

const Tensor& Tape::grad_of(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].grad;
}

void Tape::backward(Var loss) {
    const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    shape_str(ln.value.shape));
    grad(loss).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || !n.backward || n.grad.data.empty()) continue;
        n.backward(*this, i);
    }
}

// ---- ops ----

Var matmul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.cols() != bv.rows())
        shape_error("matmul", av, bv);
    const int m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
    return t.emit(std::move(out), {a, b}, [a, b, m, k, n](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(a)) {
            Tensor da = Tensor::zeros({m, k});
            kernels::matmul_a_bt(g.data.data(), tp.value(b).data.data(),
                                 da.data.data(), m, k, n);
            Tensor& ga = tp.grad(a);
            for (std::int64_t i = 0; i < da.size(); ++i) ga.data[i] += da.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor db = Tensor::zeros({k, n});
            kernels::matmul_at_b(tp.value(a).data.data(), g.data.data(),
                                 db.data.data(), m, k, n);
            Tensor& gb = tp.grad(b);
            for (std::int64_t i = 0; i < db.size(); ++i) gb.data[i] += db.data[i];
        }
    });
}

Var transpose(Tape& t, Var a) {
    const Tensor& av = t.value(a);
    if (av.shape.size() != 2)
        throw std::invalid_argument("transpose: need 2-D tensor, got " + shape_str(av.shape));
    const int r = av.rows(), c = av.cols();
    Tensor out = Tensor::zeros({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
    return t.emit(std::move(out), {a}, [a, r, c](Tape& tp, int self) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_of(Var{self});
        Tensor& ga = tp.grad(a);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
    });
}

Var masked_softmax(Tape& t, Var logits, const std::vector<bool>& mask) {
    const Tensor& lv = t.value(logits);
    const int L = lv.shape.back();
    if (static_cast<int>(mask.size()) != L)
        throw std::invalid_argument("masked_softmax: mask length " +
                                    std::to_string(mask.size()) + " vs row length " +
                                    std::to_string(L));
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw std::invalid_argument("masked_softmax: no valid time steps (all positions masked)");
    const int rows = static_cast<int>(lv.size() / L);
    Tensor out = Tensor::zeros(lv.shape);
    for (int r = 0; r < rows; ++r) {
        const double* row = lv.data.data() + static_cast<std::int64_t>(r) * L;
        double* o = out.data.data() + static_cast<std::int64_t>(r) * L;
        double mx = -1e308;
        for (int j = 0; j < L; ++j)
            if (mask[j]) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < L; ++j) {
            if (mask[j]) {
                o[j] = std::exp(row[j] - mx);
                sum += o[j];
            }
        }
        for (int j = 0; j < L; ++j)
            if (mask[j]) o[j] /= sum;
    }
    return t.emit(std::move(out), {logits}, [logits, mask, rows, L](Tape& tp, int self) {
        if (!tp.requires_grad(logits)) return;
        const Tensor& g = tp.grad_of(Var{self});
        const Tensor& y = tp.value(Var{self});
        Tensor& gl = tp.grad(logits);
        for (int r = 0; r < rows; ++r) {
            const double* yr = y.data.data() + static_cast<std::int64_t>(r) * L;
            const double* gr = g.data.data() + static_cast<std::int64_t>(r) * L;
            double dot = 0.0;
            for (int j = 0; j < L; ++j)
                if (mask[j]) dot += yr[j] * gr[j];
            double* gd = gl.data.data() + static_cast<std::int64_t>(r) * L;
            for (int j = 0; j < L; ++j)
                if (mask[j]) gd[j] += yr[j] * (gr[j] - dot);
        }
    });
}

Var depthwise_causal_conv1d(Tape& t, Var x, Var kernels_v, int dilation) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(kernels_v);
    if (dilation < 1) throw std::invalid_argument("depthwise_causal_conv1d: dilation must be >= 1");
    if (xv.shape.size() != 2 || wv.shape.size() != 2 || xv.rows() != wv.rows())
        shape_error("depthwise_causal_conv1d", xv, wv);
    const int d = xv.rows(), L = xv.cols(), K = wv.cols();
    Tensor out = Tensor::zeros({d, L});
    kernels::depthwise_causal_conv1d(xv.data.data(), wv.data.data(), out.data.data(),
                                     d, L, K, dilation);
    return t.emit(std::move(out), {x, kernels_v},
                  [x, kernels_v, d, L, K, dilation](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad(x);
            const Tensor& w = tp.value(kernels_v);
            for (int c = 0; c < d; ++c)
                for (int tt = 0; tt < L; ++tt) {
                    const double gv = g.at(c, tt);
                    if (gv == 0.0) continue;
                    for (int k = 0; k < K; ++k) {
                        const int src = tt - k * dilation;
                        if (src >= 0) gx.at(c, src) += w.at(c, k) * gv;
                    }
                }
        }
        if (tp.requires_grad(kernels_v)) {
            Tensor& gw = tp.grad(kernels_v);
            const Tensor& xin = tp.value(x);
            for (int c = 0; c < d; ++c)
                for (int k = 0; k < K; ++k) {
                    double s = 0.0;
                    for (int tt = k * dilation; tt < L; ++tt)
                        s += g.at(c, tt) * xin.at(c, tt - k * dilation);
                    gw.at(c, k) += s;
                }
        }
    });
}

Var pointwise_conv(Tape& t, Var x, Var w, Var b) {
    const Tensor& xv = t.value(x);
    const Tensor& wv = t.value(w);
    const Tensor& bv = t.value(b);
    if (wv.cols() != xv.rows()) shape_error("pointwise_conv", wv, xv);
    if (bv.size() != wv.rows()) shape_error("pointwise_conv bias", bv, wv);
    Var y = matmul(t, w, x);
    return add_col_bias(t, y, b);
}

namespace {

Var unary(Tape& t, Var x, double (*f)(double), double (*df)(double, double),
          const char* /*name*/) {
    const Tensor& xv = t.value(x);
    Tensor out = Tensor::zeros(xv.shape);
    for (std::int64_t i = 0; i < xv.size(); ++i) out.data[i] = f(xv.data[i]);
    return t.emit(std::move(out), {x}, [x, df](Tape& tp, int self) {
        if (!tp.requires_grad(x)) return;
        const Tensor& g = tp.grad_of(Var{self});
        const Tensor& xin = tp.value(x);
        const Tensor& y = tp.value(Var{self});
        Tensor& gx = tp.grad(x);
        for (std::int64_t i = 0; i < xin.size(); ++i)
            gx.data[i] += df(xin.data[i], y.data[i]) * g.data[i];
    });
}

double f_tanh(double v) { return std::tanh(v); }
double df_tanh(double, double y) { return 1.0 - y * y; }
double f_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double df_sigmoid(double, double y) { return y * (1.0 - y); }
double f_relu(double v) { return v > 0.0 ? v : 0.0; }
double df_relu(double v, double) { return v > 0.0 ? 1.0 : 0.0; }

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
// exact (erf) GELU
double f_gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }
double df_gelu(double v, double) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return cdf + v * pdf;
}

}  // namespace

Var tanh_op(Tape& t, Var x) { return unary(t, x, f_tanh, df_tanh, "tanh"); }
Var sigmoid(Tape& t, Var x) { return unary(t, x, f_sigmoid, df_sigmoid, "sigmoid"); }
Var gelu(Tape& t, Var x) { return unary(t, x, f_gelu, df_gelu, "gelu"); }
Var relu(Tape& t, Var x) { return unary(t, x, f_relu, df_relu, "relu"); }

Var add(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_error("add", av, bv);
    Tensor out = av;
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
    return t.emit(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        for (Var v : {a, b}) {
            if (!tp.requires_grad(v)) continue;
            Tensor& gv = tp.grad(v);
            for (std::int64_t i = 0; i < g.size(); ++i) gv.data[i] += g.data[i];
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_error("mul", av, bv);
    Tensor out = av;
    for (std::int64_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
    return t.emit(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad(a);
            const Tensor& bvv = tp.value(b);
            for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bvv.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            const Tensor& avv = tp.value(a);
            for (std::int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * avv.data[i];
        }
    });
}

Var scale(Tape& t, Var a, double c) {
    const Tensor& av = t.value(a);
    Tensor out = av;
    for (double& v : out.data) v *= c;
    return t.emit(std::move(out), {a}, [a, c](Tape& tp, int self) {
        if (!tp.requires_grad(a)) return;
        const Tensor& g = tp.grad_of(Var{self});
        Tensor& ga = tp.grad(a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
    });
}

Var add_col_bias(Tape& t, Var x, Var b) {
    const Tensor& xv = t.value(x);
    const Tensor& bv = t.value(b);
    if (bv.size() != xv.rows()) shape_error("add_col_bias", xv, bv);
    const int d = xv.rows(), L = xv.cols();
    Tensor out = xv;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < L; ++j) out.at(i, j) += bv.at(i);
    return t.emit(std::move(out), {x, b}, [x, b, d, L](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad(x);
            for (std::int64_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (int i = 0; i < d; ++i) {
                double s = 0.0;
                for (int j = 0; j < L; ++j) s += g.at(i, j);
                gb.at(i) += s;
            }
        }
    });
}

Var add_row_bias(Tape& t, Var x, Var b) {
    const Tensor& xv = t.value(x);
    const Tensor& bv = t.value(b);
    if (bv.size() != xv.cols()) shape_error("add_row_bias", xv, bv);
    const int L = xv.rows(), d = xv.cols();
    Tensor out = xv;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) += bv.at(j);
    return t.emit(std::move(out), {x, b}, [x, b, L, d](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad(x);
            for (std::int64_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            for (int i = 0; i < L; ++i)
                for (int j = 0; j < d; ++j) gb.at(j) += g.at(i, j);
        }
    });
}

Var scale_rows(Tape& t, Var x, Var g) {
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(g);
    if (gv.size() != xv.rows()) shape_error("scale_rows", xv, gv);
    const int d = xv.rows(), L = xv.cols();
    Tensor out = xv;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < L; ++j) out.at(i, j) *= gv.at(i);
    return t.emit(std::move(out), {x, g}, [x, g, d, L](Tape& tp, int self) {
        const Tensor& gr = tp.grad_of(Var{self});
        if (tp.requires_grad(x)) {
            Tensor& gx = tp.grad(x);
            const Tensor& gate = tp.value(g);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < L; ++j) gx.at(i, j) += gr.at(i, j) * gate.at(i);
        }
        if (tp.requires_grad(g)) {
            Tensor& gg = tp.grad(g);
            const Tensor& xin = tp.value(x);
            for (int i = 0; i < d; ++i) {
                double s = 0.0;
                for (int j = 0; j < L; ++j) s += gr.at(i, j) * xin.at(i, j);
                gg.at(i) += s;
            }
        }
    });
}

Var gather_rows(Tape& t, Var table, const std::vector<int>& indices) {
    const Tensor& tv = t.value(table);
    const int V = tv.rows(), e = tv.cols();
    for (int idx : indices)
        if (idx < 0 || idx >= V)
            throw std::out_of_range("gather_rows: index " + std::to_string(idx) +
                                    " out of range [0," + std::to_string(V) + ")");
    const int L = static_cast<int>(indices.size());
    Tensor out = Tensor::zeros({L, e});
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < e; ++j) out.at(i, j) = tv.at(indices[i], j);
    return t.emit(std::move(out), {table}, [table, indices, e](Tape& tp, int self) {
        if (!tp.requires_grad(table)) return;
        const Tensor& g = tp.grad_of(Var{self});
        Tensor& gt = tp.grad(table);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (int j = 0; j < e; ++j)
                gt.at(indices[i], j) += g.at(static_cast<int>(i), j);
    });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int R = t.value(parts[0]).rows();
    int C = 0;
    std::vector<int> widths;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        if (pv.rows() != R)
            throw std::invalid_argument("concat_cols: row mismatch " + shape_str(pv.shape));
        widths.push_back(pv.cols());
        C += pv.cols();
    }
    Tensor out = Tensor::zeros({R, C});
    int off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& pv = t.value(parts[pi]);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < widths[pi]; ++j) out.at(i, off + j) = pv.at(i, j);
        off += widths[pi];
    }
    return t.emit(std::move(out), parts, [parts, widths, R](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        int off = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            if (tp.requires_grad(parts[pi])) {
                Tensor& gp = tp.grad(parts[pi]);
                for (int i = 0; i < R; ++i)
                    for (int j = 0; j < widths[pi]; ++j) gp.at(i, j) += g.at(i, off + j);
            }
            off += widths[pi];
        }
    });
}

Var concat_rows(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const int C = t.value(parts[0]).cols();
    int R = 0;
    std::vector<int> heights;
    for (Var p : parts) {
        const Tensor& pv = t.value(p);
        if (pv.cols() != C)
            throw std::invalid_argument("concat_rows: column mismatch " + shape_str(pv.shape));
        heights.push_back(pv.rows());
        R += pv.rows();
    }
    Tensor out = Tensor::zeros({R, C});
    int off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& pv = t.value(parts[pi]);
        for (int i = 0; i < heights[pi]; ++i)
            for (int j = 0; j < C; ++j) out.at(off + i, j) = pv.at(i, j);
        off += heights[pi];
    }
    return t.emit(std::move(out), parts, [parts, heights, C](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        int off = 0;
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            if (tp.requires_grad(parts[pi])) {
                Tensor& gp = tp.grad(parts[pi]);
                for (int i = 0; i < heights[pi]; ++i)
                    for (int j = 0; j < C; ++j) gp.at(i, j) += g.at(off + i, j);
            }
            off += heights[pi];
        }
    });
}

Var masked_mean_cols(Tape& t, Var x, const std::vector<bool>& mask) {
    const Tensor& xv = t.value(x);
    const int d = xv.rows(), L = xv.cols();
    if (static_cast<int>(mask.size()) != L)
        throw std::invalid_argument("masked_mean_cols: mask length mismatch");
    int m = 0;
    for (bool b : mask) m += b ? 1 : 0;
    if (m == 0) throw std::invalid_argument("masked_mean_cols: all positions masked");
    Tensor out = Tensor::zeros({d, 1});
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < L; ++j)
            if (mask[j]) s += xv.at(i, j);
        out.at(i, 0) = s / m;
    }
    return t.emit(std::move(out), {x}, [x, mask, d, L, m](Tape& tp, int self) {
        if (!tp.requires_grad(x)) return;
        const Tensor& g = tp.grad_of(Var{self});
        Tensor& gx = tp.grad(x);
        for (int i = 0; i < d; ++i) {
            const double gi = g.at(i, 0) / m;
            for (int j = 0; j < L; ++j)
                if (mask[j]) gx.at(i, j) += gi;
        }
    });
}

Var matmul_masked_rows(Tape& t, Var a, Var b, const std::vector<bool>& mask) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (av.cols() != bv.rows()) shape_error("matmul_masked_rows", av, bv);
    if (static_cast<int>(mask.size()) != bv.rows())
        throw std::invalid_argument("matmul_masked_rows: mask length mismatch");
    const int m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            if (!mask[static_cast<std::size_t>(p)]) continue;
            const double aip = av.at(i, p);
            for (int j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
        }
    return t.emit(std::move(out), {a, b}, [a, b, mask, m, k, n](Tape& tp, int self) {
        const Tensor& g = tp.grad_of(Var{self});
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad(a);
            const Tensor& bvv = tp.value(b);
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    if (!mask[static_cast<std::size_t>(p)]) continue;
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += g.at(i, j) * bvv.at(p, j);
                    ga.at(i, p) += s;
                }
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad(b);
            const Tensor& avv = tp.value(a);
            for (int p = 0; p < k; ++p) {
                if (!mask[static_cast<std::size_t>(p)]) continue;
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) s += avv.at(i, p) * g.at(i, j);
                    gb.at(p, j) += s;
                }
            }
        }
    });
}

Var bce_with_logit(Tape& t, Var logit, double y) {
    const Tensor& lv = t.value(logit);
    if (lv.size() != 1)
        throw std::invalid_argument("bce_with_logit: logit must be scalar");
    if (y != 0.0 && y != 1.0)
        throw std::invalid_argument("bce_with_logit: label must be 0 or 1");
    const double z = lv.data[0];
    // softplus(z) = log(1+exp(z)), computed without overflow
    auto softplus = [](double v) {
        return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    };
    const double loss = y * softplus(-z) + (1.0 - y) * softplus(z);
    return t.emit(Tensor::scalar(loss), {logit}, [logit, y](Tape& tp, int self) {
        if (!tp.requires_grad(logit)) return;
        const double g = tp.grad_of(Var{self}).data[0];
        const double z = tp.value(logit).data[0];
        const double s = 1.0 / (1.0 + std::exp(-z));
        tp.grad(logit).data[0] += (s - y) * g;
    });
}

Var mean_all(Tape& t, const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_all: no inputs");
    double s = 0.0;
    for (Var x : xs) {
        if (t.value(x).size() != 1)
            throw std::invalid_argument("mean_all: inputs must be scalar");
        s += t.value(x).data[0];
    }
    const double n = static_cast<double>(xs.size());
    return t.emit(Tensor::scalar(s / n), xs, [xs, n](Tape& tp, int self) {
        const double g = tp.grad_of(Var{self}).data[0] / n;
        for (Var x : xs)
            if (tp.requires_grad(x)) tp.grad(x).data[0] += g;
    });
}

}  // namespace humid
