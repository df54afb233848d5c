#include "retrace/nn.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace retrace::nn {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

int ParamStore::add(const std::string& name, int rows, int cols) {
    if (by_name_.count(name)) throw std::logic_error("duplicate parameter view: " + name);
    View v;
    v.name = name;
    v.offset = value_.size();
    v.rows = rows;
    v.cols = cols;
    value_.resize(value_.size() + v.count(), 0.0);
    grad_.resize(value_.size(), 0.0);
    views_.push_back(v);
    by_name_[name] = static_cast<int>(views_.size()) - 1;
    return by_name_[name];
}

int ParamStore::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

void ParamStore::init(Rng& rng) {
    for (const auto& v : views_) {
        bool is_bias = v.cols == 1 && v.name.size() >= 2 &&
                       (v.name.substr(v.name.size() - 2) == "_b" || v.name.back() == 'b');
        double s = std::sqrt(1.0 / std::max(1, v.cols));
        for (std::size_t i = 0; i < v.count(); ++i) {
            value_[v.offset + i] = is_bias ? 0.0 : rng.uniform(-s, s);
        }
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::new_node(int rows, int cols, bool track) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.val.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    n.track = track && grad_;
    if (n.track) n.adj.assign(n.val.size(), 0.0);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(const double* v, int rows, int cols) {
    int id = new_node(rows, cols, false);
    std::copy(v, v + nodes_[id].count(), nodes_[id].val.begin());
    return id;
}

int Tape::param(ParamStore& ps, int view_index) {
    const auto& view = ps.view(view_index);
    int id = new_node(view.rows, view.cols, true);
    std::copy(ps.data(view_index), ps.data(view_index) + view.count(), nodes_[id].val.begin());
    if (nodes_[id].track) {
        ParamStore* psp = &ps;
        nodes_[id].back = [this, id, psp, view_index] {
            double* g = psp->grad(view_index);
            const auto& adj = nodes_[id].adj;
            for (std::size_t i = 0; i < adj.size(); ++i) g[i] += adj[i];
        };
    }
    return id;
}

int Tape::matmul(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.cols != nb.rows) throw std::invalid_argument("matmul shape mismatch");
    const int m = na.rows, k = na.cols, n = nb.cols;
    int id = new_node(m, n, na.track || nb.track);
    {
        const double* A = nodes_[a].val.data();
        const double* B = nodes_[b].val.data();
        double* C = nodes_[id].val.data();
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                double av = A[i * k + kk];
                if (av == 0.0) continue;
                const double* brow = B + kk * n;
                double* crow = C + i * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, b, id, m, k, n] {
            const auto& go = nodes_[id].adj;
            if (nodes_[a].track) {
                auto& ga = nodes_[a].adj;
                const auto& B = nodes_[b].val;
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) s += go[i * n + j] * B[kk * n + j];
                        ga[i * k + kk] += s;
                    }
            }
            if (nodes_[b].track) {
                auto& gb = nodes_[b].adj;
                const auto& A = nodes_[a].val;
                for (int kk = 0; kk < k; ++kk)
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int i = 0; i < m; ++i) s += A[i * k + kk] * go[i * n + j];
                        gb[kk * n + j] += s;
                    }
            }
        };
    }
    return id;
}

int Tape::add(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.rows != nb.rows || na.cols != nb.cols) throw std::invalid_argument("add shape mismatch");
    int id = new_node(na.rows, na.cols, na.track || nb.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = nodes_[a].val[i] + nodes_[b].val[i];
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, b, id] {
            const auto& go = nodes_[id].adj;
            if (nodes_[a].track)
                for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[i] += go[i];
            if (nodes_[b].track)
                for (std::size_t i = 0; i < go.size(); ++i) nodes_[b].adj[i] += go[i];
        };
    }
    return id;
}

int Tape::sub(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.rows != nb.rows || na.cols != nb.cols) throw std::invalid_argument("sub shape mismatch");
    int id = new_node(na.rows, na.cols, na.track || nb.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = nodes_[a].val[i] - nodes_[b].val[i];
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, b, id] {
            const auto& go = nodes_[id].adj;
            if (nodes_[a].track)
                for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[i] += go[i];
            if (nodes_[b].track)
                for (std::size_t i = 0; i < go.size(); ++i) nodes_[b].adj[i] -= go[i];
        };
    }
    return id;
}

int Tape::hadamard(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.rows != nb.rows || na.cols != nb.cols)
        throw std::invalid_argument("hadamard shape mismatch");
    int id = new_node(na.rows, na.cols, na.track || nb.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = nodes_[a].val[i] * nodes_[b].val[i];
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, b, id] {
            const auto& go = nodes_[id].adj;
            if (nodes_[a].track)
                for (std::size_t i = 0; i < go.size(); ++i)
                    nodes_[a].adj[i] += go[i] * nodes_[b].val[i];
            if (nodes_[b].track)
                for (std::size_t i = 0; i < go.size(); ++i)
                    nodes_[b].adj[i] += go[i] * nodes_[a].val[i];
        };
    }
    return id;
}

int Tape::affine(int a, double k, double c) {
    const Node& na = nodes_[a];
    int id = new_node(na.rows, na.cols, na.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = k * nodes_[a].val[i] + c;
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id, k] {
            const auto& go = nodes_[id].adj;
            for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[i] += k * go[i];
        };
    }
    return id;
}

int Tape::sigmoid(int a) {
    const Node& na = nodes_[a];
    int id = new_node(na.rows, na.cols, na.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = 1.0 / (1.0 + std::exp(-nodes_[a].val[i]));
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id] {
            const auto& go = nodes_[id].adj;
            const auto& y = nodes_[id].val;
            for (std::size_t i = 0; i < go.size(); ++i)
                nodes_[a].adj[i] += go[i] * y[i] * (1.0 - y[i]);
        };
    }
    return id;
}

int Tape::tanh_(int a) {
    const Node& na = nodes_[a];
    int id = new_node(na.rows, na.cols, na.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = std::tanh(nodes_[a].val[i]);
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id] {
            const auto& go = nodes_[id].adj;
            const auto& y = nodes_[id].val;
            for (std::size_t i = 0; i < go.size(); ++i)
                nodes_[a].adj[i] += go[i] * (1.0 - y[i] * y[i]);
        };
    }
    return id;
}

int Tape::relu(int a) {
    const Node& na = nodes_[a];
    int id = new_node(na.rows, na.cols, na.track);
    for (std::size_t i = 0; i < nodes_[id].count(); ++i)
        nodes_[id].val[i] = nodes_[a].val[i] > 0.0 ? nodes_[a].val[i] : 0.0;
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id] {
            const auto& go = nodes_[id].adj;
            for (std::size_t i = 0; i < go.size(); ++i)
                if (nodes_[a].val[i] > 0.0) nodes_[a].adj[i] += go[i];
        };
    }
    return id;
}

int Tape::concat_rows(int a, int b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.cols != 1 || nb.cols != 1) throw std::invalid_argument("concat_rows expects vectors");
    int id = new_node(na.rows + nb.rows, 1, na.track || nb.track);
    std::copy(na.val.begin(), na.val.end(), nodes_[id].val.begin());
    std::copy(nb.val.begin(), nb.val.end(), nodes_[id].val.begin() + na.rows);
    if (nodes_[id].track) {
        int ra = na.rows;
        nodes_[id].back = [this, a, b, id, ra] {
            const auto& go = nodes_[id].adj;
            if (nodes_[a].track)
                for (int i = 0; i < ra; ++i) nodes_[a].adj[i] += go[i];
            if (nodes_[b].track)
                for (std::size_t i = ra; i < go.size(); ++i) nodes_[b].adj[i - ra] += go[i];
        };
    }
    return id;
}

int Tape::slice_rows(int a, int r0, int r1) {
    const Node& na = nodes_[a];
    if (na.cols != 1 || r0 < 0 || r1 > na.rows || r0 >= r1)
        throw std::invalid_argument("slice_rows bounds");
    int id = new_node(r1 - r0, 1, na.track);
    std::copy(na.val.begin() + r0, na.val.begin() + r1, nodes_[id].val.begin());
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id, r0] {
            const auto& go = nodes_[id].adj;
            for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[r0 + i] += go[i];
        };
    }
    return id;
}

int Tape::add_col_broadcast(int a, int bias) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[bias];
    if (nb.cols != 1 || nb.rows != na.rows)
        throw std::invalid_argument("add_col_broadcast shape mismatch");
    int id = new_node(na.rows, na.cols, na.track || nb.track);
    for (int i = 0; i < na.rows; ++i)
        for (int j = 0; j < na.cols; ++j)
            nodes_[id].val[i * na.cols + j] = nodes_[a].val[i * na.cols + j] + nodes_[bias].val[i];
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, bias, id] {
            const auto& go = nodes_[id].adj;
            const int rows = nodes_[id].rows, cols = nodes_[id].cols;
            if (nodes_[a].track)
                for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[i] += go[i];
            if (nodes_[bias].track)
                for (int i = 0; i < rows; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < cols; ++j) s += go[i * cols + j];
                    nodes_[bias].adj[i] += s;
                }
        };
    }
    return id;
}

int Tape::reshape(int a, int rows, int cols) {
    const Node& na = nodes_[a];
    if (na.count() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("reshape count mismatch");
    int id = new_node(rows, cols, na.track);
    nodes_[id].val = nodes_[a].val;
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id] {
            const auto& go = nodes_[id].adj;
            for (std::size_t i = 0; i < go.size(); ++i) nodes_[a].adj[i] += go[i];
        };
    }
    return id;
}

int Tape::im2col(int a, int C, int H, int W, int k, int stride) {
    const Node& na = nodes_[a];
    if (na.count() != static_cast<std::size_t>(C) * H * W)
        throw std::invalid_argument("im2col input size mismatch");
    const int oh = conv_out(H, k, stride), ow = conv_out(W, k, stride);
    const int patches = oh * ow, depth = C * k * k;
    int id = new_node(depth, patches, na.track);
    auto index_of = [&](int p, int d) {
        int py = p / ow, px = p % ow;
        int c = d / (k * k);
        int dy = (d % (k * k)) / k, dx = d % k;
        return (c * H + py * stride + dy) * W + px * stride + dx;
    };
    for (int d = 0; d < depth; ++d)
        for (int p = 0; p < patches; ++p)
            nodes_[id].val[d * patches + p] = nodes_[a].val[index_of(p, d)];
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id, depth, patches, index_of] {
            const auto& go = nodes_[id].adj;
            for (int d = 0; d < depth; ++d)
                for (int p = 0; p < patches; ++p)
                    nodes_[a].adj[index_of(p, d)] += go[d * patches + p];
        };
    }
    return id;
}

int Tape::sum_sq(int a) {
    int id = new_node(1, 1, nodes_[a].track);
    double s = 0.0;
    for (double v : nodes_[a].val) s += v * v;
    nodes_[id].val[0] = s;
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id] {
            double g = nodes_[id].adj[0];
            for (std::size_t i = 0; i < nodes_[a].val.size(); ++i)
                nodes_[a].adj[i] += 2.0 * g * nodes_[a].val[i];
        };
    }
    return id;
}

int Tape::bce_logit(int a, double label) {
    if (nodes_[a].count() != 1) throw std::invalid_argument("bce_logit expects scalar");
    int id = new_node(1, 1, nodes_[a].track);
    double z = nodes_[a].val[0];
    nodes_[id].val[0] = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    if (nodes_[id].track) {
        nodes_[id].back = [this, a, id, label] {
            double z2 = nodes_[a].val[0];
            double sig = 1.0 / (1.0 + std::exp(-z2));
            nodes_[a].adj[0] += nodes_[id].adj[0] * (sig - label);
        };
    }
    return id;
}

int Tape::scale(int a, double s) { return affine(a, s, 0.0); }

int Tape::add_many(const std::vector<int>& terms) {
    if (terms.empty()) throw std::invalid_argument("add_many: empty");
    int acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

void Tape::backward(int loss) {
    if (!grad_) throw std::logic_error("backward on a no-grad tape");
    if (nodes_[loss].count() != 1) throw std::invalid_argument("backward expects scalar loss");
    if (!nodes_[loss].track) return;
    nodes_[loss].adj[0] = 1.0;
    for (int i = loss; i >= 0; --i) {
        if (nodes_[i].track && nodes_[i].back) nodes_[i].back();
    }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

void adam_step(ParamStore& ps, AdamState& st, double lr, double beta1, double beta2, double eps) {
    if (st.m.size() != ps.size()) {
        st.m.assign(ps.size(), 0.0);
        st.v.assign(ps.size(), 0.0);
        st.t = 0;
    }
    ++st.t;
    auto& w = ps.values();
    auto& g = ps.grads();
    double bc1 = 1.0 - std::pow(beta1, st.t);
    double bc2 = 1.0 - std::pow(beta2, st.t);
    for (std::size_t i = 0; i < w.size(); ++i) {
        st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
        st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
        double mh = st.m[i] / bc1;
        double vh = st.v[i] / bc2;
        w[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
}

void sgd_momentum_step(ParamStore& ps, std::vector<double>& velocity, double lr, double momentum) {
    if (velocity.size() != ps.size()) velocity.assign(ps.size(), 0.0);
    auto& w = ps.values();
    auto& g = ps.grads();
    for (std::size_t i = 0; i < w.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * g[i];
        w[i] += velocity[i];
    }
}

double clip_grad_norm(ParamStore& ps, double max_norm) {
    auto& g = ps.grads();
    double n2 = 0.0;
    for (double v : g) n2 += v * v;
    double n = std::sqrt(n2);
    if (n > max_norm && n > 0.0) {
        double s = max_norm / n;
        for (double& v : g) v *= s;
    }
    return n;
}

}  // namespace retrace::nn
