#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "retrace/util.hpp"

namespace retrace::nn {

/// Flat parameter vector with named matrix views.
class ParamStore {
public:
    struct View {
        std::string name;
        std::size_t offset = 0;
        int rows = 0, cols = 0;
        std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
    };

    int add(const std::string& name, int rows, int cols);
    int index_of(const std::string& name) const;  // -1 when absent
    const View& view(int i) const { return views_[i]; }
    int view_count() const { return static_cast<int>(views_.size()); }

    double* data(int i) { return value_.data() + views_[i].offset; }
    const double* data(int i) const { return value_.data() + views_[i].offset; }
    double* grad(int i) { return grad_.data() + views_[i].offset; }

    std::vector<double>& values() { return value_; }
    const std::vector<double>& values() const { return value_; }
    std::vector<double>& grads() { return grad_; }
    std::size_t size() const { return value_.size(); }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

    /// Uniform(-s, s) per view with s = sqrt(1 / fan_in); biases zero.
    void init(Rng& rng);

private:
    std::vector<double> value_, grad_;
    std::vector<View> views_;
    std::map<std::string, int> by_name_;
};

/// Dynamic reverse-mode tape over row-major matrices.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

    struct Node {
        int rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> adj;
        bool track = false;
        std::function<void()> back;
        std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
    };

    int input(const double* v, int rows, int cols);
    int input(const std::vector<double>& v, int rows, int cols) {
        return input(v.data(), rows, cols);
    }
    /// Leaf bound to a parameter view; backward accumulates into ps.grad.
    int param(ParamStore& ps, int view_index);

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int hadamard(int a, int b);
    int affine(int a, double k, double c);  // k*x + c elementwise
    int sigmoid(int a);
    int tanh_(int a);
    int relu(int a);
    int concat_rows(int a, int b);          // column vectors
    int slice_rows(int a, int r0, int r1);  // column vectors
    int add_col_broadcast(int a, int bias);  // a: m x n, bias: m x 1
    int reshape(int a, int rows, int cols);
    /// a holds a CHW image as a (C*H*W) x 1 column; output (C*k*k) x P.
    int im2col(int a, int C, int H, int W, int k, int stride);
    int sum_sq(int a);                       // 1x1
    /// Numerically stable binary cross-entropy on a 1x1 logit.
    int bce_logit(int a, double label);
    int scale(int a, double s);
    int add_many(const std::vector<int>& terms);  // 1x1 accumulator

    const Node& node(int i) const { return nodes_[i]; }
    const std::vector<double>& value(int i) const { return nodes_[i].val; }

    /// Reverse pass from a scalar node.
    void backward(int loss);
    void clear();
    bool grad_enabled() const { return grad_; }

private:
    int new_node(int rows, int cols, bool track);
    std::vector<Node> nodes_;
    bool grad_;
};

/// Conv output spatial size for a given input size, kernel, and stride.
inline int conv_out(int in, int k, int stride) { return (in - k) / stride + 1; }

struct AdamState {
    std::vector<double> m, v;
    int t = 0;
};

void adam_step(ParamStore& ps, AdamState& st, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);
void sgd_momentum_step(ParamStore& ps, std::vector<double>& velocity, double lr, double momentum);

/// Scale the gradient so its global L2 norm is at most max_norm; returns the
/// pre-clip norm.
double clip_grad_norm(ParamStore& ps, double max_norm);

}  // namespace retrace::nn
