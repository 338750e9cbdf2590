#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace humid {

// Dense row-major tensor of doubles.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor scalar(double v);
    static Tensor from(std::vector<int> shape, std::initializer_list<double> d);

    std::int64_t size() const;
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

std::string shape_str(const std::vector<int>& shape);

// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Records forward operations so one reverse sweep yields gradients for
// every requires-grad leaf. Nodes are appended in evaluation order, so
// topological order holds by construction.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad);

    // Records a computed node. `backward` receives the tape and the node's
    // own id and must accumulate into the gradients of its inputs.
    Var emit(Tensor value, const std::vector<Var>& inputs,
             std::function<void(Tape&, int)> backward);

    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    // Gradient buffer of a node; allocated lazily as zeros.
    Tensor& grad(Var v);
    const Tensor& grad_of(Var v) const;

    // Runs the reverse sweep from a scalar loss. Throws if loss is not scalar.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;   // empty until touched by backward
        bool requires_grad = false;
        std::vector<Var> inputs;
        std::function<void(Tape&, int)> backward;
    };
    std::vector<Node> nodes_;
};

// ---- operations (all record gradients on the tape) ----

Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);

// Softmax over the last axis of a [R x L] tensor. `mask[j]==false` forces
// weight exactly 0 at column j; each row must have at least one true entry.
Var masked_softmax(Tape& t, Var logits, const std::vector<bool>& mask);

// Per-channel causal convolution, left zero-padded so length is preserved.
// x is [d x L], kernels [d x K]; tap k reads position t - k*dilation.
Var depthwise_causal_conv1d(Tape& t, Var x, Var kernels, int dilation);

// Position-wise affine map: x [d_in x L], w [d_out x d_in], b [d_out].
Var pointwise_conv(Tape& t, Var x, Var w, Var b);

Var tanh_op(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var gelu(Tape& t, Var x);
Var relu(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);

// Adds a length-d bias vector to every column of a [d x L] tensor.
Var add_col_bias(Tape& t, Var x, Var b);
// Adds a length-d bias vector to every row of an [L x d] tensor.
Var add_row_bias(Tape& t, Var x, Var b);
// Multiplies row i of a [d x L] tensor by g[i].
Var scale_rows(Tape& t, Var x, Var g);

Var gather_rows(Tape& t, Var table, const std::vector<int>& indices);

// Concatenates along columns: inputs [R x c_i] -> [R x sum(c_i)].
Var concat_cols(Tape& t, const std::vector<Var>& parts);
// Stacks along rows: inputs [r_i x C] -> [sum(r_i) x C].
Var concat_rows(Tape& t, const std::vector<Var>& parts);

// Mean over unmasked columns per row: x [d x L] -> [d x 1].
Var masked_mean_cols(Tape& t, Var x, const std::vector<bool>& mask);

// Row product skipping masked rows of b: a [R x L] whose masked columns are
// exactly zero, b [L x C]; masked rows of b get zero gradient.
Var matmul_masked_rows(Tape& t, Var a, Var b, const std::vector<bool>& mask);

// Numerically stable binary cross entropy on the pre-sigmoid logit.
// y=1 marks the positive (different-driver) class.
Var bce_with_logit(Tape& t, Var logit, double y);

Var mean_all(Tape& t, const std::vector<Var>& xs);

}  // namespace humid
