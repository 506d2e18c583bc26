#include "spot/tape.hpp"

#include <algorithm>
#include <cmath>

#include "spot/errors.hpp"

namespace spot {

Matrix& ParamStore::add(const std::string& name, Matrix value) {
    if (contains(name)) throw InputError("ParamStore: duplicate parameter '" + name + "'");
    items_.emplace_back(name, std::move(value));
    return items_.back().second;
}

Matrix& ParamStore::at(const std::string& name) {
    for (auto& [n, m] : items_)
        if (n == name) return m;
    throw IndexError("ParamStore: unknown parameter '" + name + "'");
}

const Matrix& ParamStore::at(const std::string& name) const {
    for (const auto& [n, m] : items_)
        if (n == name) return m;
    throw IndexError("ParamStore: unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& [n, m] : items_)
        if (n == name) return true;
    return false;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : items_) n += m.size();
    return n;
}

Tape::NodeId Tape::push(Matrix value, std::function<void(Tape&, NodeId)> backprop) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop)});
    return nodes_.size() - 1;
}

Tape::NodeId Tape::constant(Matrix value) { return push(std::move(value), {}); }

Tape::NodeId Tape::param(const std::string& name, const Matrix& value) {
    const NodeId id = push(value, {});
    params_.emplace_back(name, id);
    return id;
}

void Tape::register_params(const ParamStore& store) {
    for (const auto& [name, value] : store) param(name, value);
}

Tape::NodeId Tape::p(const std::string& name) const {
    for (const auto& [n, id] : params_)
        if (n == name) return id;
    throw IndexError("Tape: parameter '" + name + "' not registered");
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Matrix out = spot::matmul(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        t.grad_ref(a) = spot::add(t.grad_ref(a), spot::matmul(g, spot::transpose(t.value(b))));
        t.grad_ref(b) = spot::add(t.grad_ref(b), spot::matmul(spot::transpose(t.value(a)), g));
    });
}

Tape::NodeId Tape::transpose(NodeId a) {
    return push(spot::transpose(value(a)), [a](Tape& t, NodeId self) {
        t.grad_ref(a) = spot::add(t.grad_ref(a), spot::transpose(t.grad_ref(self)));
    });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    return push(spot::add(value(a), value(b)), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        t.grad_ref(a) = spot::add(t.grad_ref(a), g);
        t.grad_ref(b) = spot::add(t.grad_ref(b), g);
    });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    return push(spot::sub(value(a), value(b)), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        t.grad_ref(a) = spot::add(t.grad_ref(a), g);
        t.grad_ref(b) = spot::sub(t.grad_ref(b), g);
    });
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
    return push(spot::hadamard(value(a), value(b)), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        t.grad_ref(a) = spot::add(t.grad_ref(a), spot::hadamard(g, t.value(b)));
        t.grad_ref(b) = spot::add(t.grad_ref(b), spot::hadamard(g, t.value(a)));
    });
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    return push(spot::scale(value(a), c), [a, c](Tape& t, NodeId self) {
        t.grad_ref(a) = spot::add(t.grad_ref(a), spot::scale(t.grad_ref(self), c));
    });
}

Tape::NodeId Tape::add_row_vector(NodeId a, NodeId row) {
    const Matrix& x = value(a);
    const Matrix& r = value(row);
    if (r.rows != 1 || r.cols != x.cols)
        throw ShapeError("add_row_vector: " + r.shape_str() + " does not broadcast over " +
                         x.shape_str());
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += r(0, j);
    return push(std::move(out), [a, row](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        t.grad_ref(a) = spot::add(t.grad_ref(a), g);
        Matrix rsum(1, g.cols);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) rsum(0, j) += g(i, j);
        t.grad_ref(row) = spot::add(t.grad_ref(row), rsum);
    });
}

Tape::NodeId Tape::relu(NodeId a) {
    return push(spot::relu(value(a)), [a](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& x = t.value(a);
        Matrix dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x.data[i] <= 0.0) dx.data[i] = 0.0;
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
    Matrix out = spot::softmax_rows(value(a));
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& s = t.value(self);
        Matrix dx(g.rows, g.cols);
        for (std::size_t i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * s(i, j);
            for (std::size_t j = 0; j < g.cols; ++j) dx(i, j) = s(i, j) * (g(i, j) - dot);
        }
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

namespace {
constexpr double kLayerNormEps = 1e-5;
}

Tape::NodeId Tape::layer_norm_rows(NodeId a) {
    const Matrix& x = value(a);
    if (x.empty()) throw ShapeError("layer_norm_rows: empty matrix");
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
        mean /= static_cast<double>(x.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(x.cols);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = (x(i, j) - mean) * inv;
    }
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& x = t.value(a);
        const Matrix& y = t.value(self);
        const double n = static_cast<double>(x.cols);
        Matrix dx(x.rows, x.cols);
        for (std::size_t i = 0; i < x.rows; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
            mean /= n;
            double var = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double d = x(i, j) - mean;
                var += d * d;
            }
            var /= n;
            const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            double gsum = 0.0, gysum = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) {
                gsum += g(i, j);
                gysum += g(i, j) * y(i, j);
            }
            for (std::size_t j = 0; j < x.cols; ++j)
                dx(i, j) = inv * (g(i, j) - gsum / n - y(i, j) * gysum / n);
        }
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const std::size_t rows = value(parts[0]).rows;
    std::size_t cols = 0;
    for (NodeId part : parts) {
        if (value(part).rows != rows)
            throw ShapeError("concat_cols: row counts disagree");
        cols += value(part).cols;
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (NodeId part : parts) {
        const Matrix& m = value(part);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j) out(i, offset + j) = m(i, j);
        offset += m.cols;
    }
    return push(std::move(out), [parts](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        std::size_t offset = 0;
        for (NodeId part : parts) {
            const Matrix& m = t.value(part);
            Matrix gp(m.rows, m.cols);
            for (std::size_t i = 0; i < m.rows; ++i)
                for (std::size_t j = 0; j < m.cols; ++j) gp(i, j) = g(i, offset + j);
            t.grad_ref(part) = spot::add(t.grad_ref(part), gp);
            offset += m.cols;
        }
    });
}

Tape::NodeId Tape::permute_rows(NodeId a, const std::vector<std::size_t>& perm) {
    const Matrix& x = value(a);
    if (perm.size() != x.rows) throw ShapeError("permute_rows: permutation length mismatch");
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (perm[i] >= x.rows) throw IndexError("permute_rows: index out of range");
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = x(perm[i], j);
    }
    return push(std::move(out), [a, perm](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        Matrix& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < g.cols; ++j) ga(perm[i], j) += g(i, j);
    });
}

Tape::NodeId Tape::exp(NodeId a) {
    Matrix out = value(a);
    for (double& x : out.data) x = std::exp(x);
    return push(std::move(out), [a](Tape& t, NodeId self) {
        t.grad_ref(a) = spot::add(t.grad_ref(a), spot::hadamard(t.grad_ref(self), t.value(self)));
    });
}

Tape::NodeId Tape::log(NodeId a) {
    Matrix out = value(a);
    for (double& x : out.data) x = std::log(x);
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& x = t.value(a);
        Matrix dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] /= x.data[i];
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::clip(NodeId a, double lo, double hi) {
    Matrix out = value(a);
    for (double& x : out.data) x = std::clamp(x, lo, hi);
    return push(std::move(out), [a, lo, hi](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& x = t.value(a);
        Matrix dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x.data[i] <= lo || x.data[i] >= hi) dx.data[i] = 0.0;
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::minimum(NodeId a, NodeId b) {
    const Matrix& xa = value(a);
    const Matrix& xb = value(b);
    if (!xa.same_shape(xb))
        throw ShapeError("minimum: shape mismatch, " + xa.shape_str() + " vs " + xb.shape_str());
    Matrix out = xa;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(xa.data[i], xb.data[i]);
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& xa = t.value(a);
        const Matrix& xb = t.value(b);
        Matrix da = g, db = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xa.data[i] <= xb.data[i]) db.data[i] = 0.0;
            else da.data[i] = 0.0;
        }
        t.grad_ref(a) = spot::add(t.grad_ref(a), da);
        t.grad_ref(b) = spot::add(t.grad_ref(b), db);
    });
}

Tape::NodeId Tape::square(NodeId a) {
    Matrix out = value(a);
    for (double& x : out.data) x *= x;
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& x = t.value(a);
        Matrix dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= 2.0 * x.data[i];
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::mean_all(NodeId a) {
    const Matrix& x = value(a);
    if (x.empty()) throw ShapeError("mean_all: empty matrix");
    double sum = 0.0;
    for (double v : x.data) sum += v;
    Matrix out(1, 1);
    out(0, 0) = sum / static_cast<double>(x.size());
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const double g = t.grad_ref(self)(0, 0);
        const Matrix& x = t.value(a);
        const double per = g / static_cast<double>(x.size());
        Matrix dx(x.rows, x.cols, per);
        t.grad_ref(a) = spot::add(t.grad_ref(a), dx);
    });
}

Tape::NodeId Tape::pick_log(NodeId probs, const std::vector<int>& cols) {
    const Matrix& pm = value(probs);
    if (cols.size() != pm.rows) throw ShapeError("pick_log: one column index per row required");
    Matrix out(pm.rows, 1);
    for (std::size_t i = 0; i < pm.rows; ++i) {
        const int c = cols[i];
        if (c < 0 || static_cast<std::size_t>(c) >= pm.cols)
            throw IndexError("pick_log: column " + std::to_string(c) + " out of range");
        out(i, 0) = std::log(pm(i, static_cast<std::size_t>(c)));
    }
    return push(std::move(out), [probs, cols](Tape& t, NodeId self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix& pm = t.value(probs);
        Matrix dp(pm.rows, pm.cols);
        for (std::size_t i = 0; i < pm.rows; ++i) {
            const auto c = static_cast<std::size_t>(cols[i]);
            dp(i, c) = g(i, 0) / pm(i, c);
        }
        t.grad_ref(probs) = spot::add(t.grad_ref(probs), dp);
    });
}

Tape::NodeId Tape::cross_entropy(NodeId probs, const std::vector<int>& labels) {
    Matrix out(1, 1);
    out(0, 0) = spot::cross_entropy(value(probs), labels);
    return push(std::move(out), [probs, labels](Tape& t, NodeId self) {
        const double g = t.grad_ref(self)(0, 0);
        const Matrix& pm = t.value(probs);
        const double n = static_cast<double>(pm.rows);
        Matrix dp(pm.rows, pm.cols);
        for (std::size_t i = 0; i < pm.rows; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            dp(i, c) = -g / (n * pm(i, c));
        }
        t.grad_ref(probs) = spot::add(t.grad_ref(probs), dp);
    });
}

Tape::NodeId Tape::neg(NodeId a) { return scale(a, -1.0); }

void Tape::backward(NodeId root) {
    const Matrix& rv = value(root);
    if (rv.rows != 1 || rv.cols != 1)
        throw ShapeError("backward: root must be 1x1, got " + rv.shape_str());
    for (NodeId i = 0; i <= root; ++i) {
        nodes_[i].grad = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
    }
    nodes_[root].grad(0, 0) = 1.0;
    for (NodeId i = root + 1; i-- > 0;) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
    }
}

const Matrix& Tape::grad(NodeId id) const {
    if (nodes_[id].grad.empty() && !nodes_[id].value.empty())
        throw StateError("Tape::grad: backward() has not been run over this node");
    return nodes_[id].grad;
}

std::vector<std::pair<std::string, Matrix>> Tape::param_grads() const {
    std::vector<std::pair<std::string, Matrix>> out;
    out.reserve(params_.size());
    for (const auto& [name, id] : params_) out.emplace_back(name, grad(id));
    return out;
}

double grad_check(const std::function<Tape::NodeId(Tape&)>& build, const ParamStore& params,
                  double h) {
    if (h <= 0.0) throw InputError("grad_check: step must be positive");

    const auto eval = [&](const ParamStore& p) {
        Tape t;
        t.register_params(p);
        const Tape::NodeId root = build(t);
        const Matrix& v = t.value(root);
        if (v.rows != 1 || v.cols != 1)
            throw ShapeError("grad_check: function must be scalar-valued");
        const double y = v(0, 0);
        if (!std::isfinite(y)) throw NumericError("grad_check: non-finite function value");
        return y;
    };

    Tape t;
    t.register_params(params);
    const Tape::NodeId root = build(t);
    if (!std::isfinite(t.value(root)(0, 0)))
        throw NumericError("grad_check: non-finite function value");
    t.backward(root);
    const auto analytic = t.param_grads();

    double worst = 0.0;
    std::size_t param_index = 0;
    for (const auto& [name, base] : params) {
        const Matrix& g = analytic[param_index].second;
        for (std::size_t k = 0; k < base.size(); ++k) {
            ParamStore plus = params;
            ParamStore minus = params;
            plus.at(name).data[k] += h;
            minus.at(name).data[k] -= h;
            const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
            const double rel = std::abs(g.data[k] - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, rel);
        }
        ++param_index;
    }
    return worst;
}

void sgd_step(ParamStore& params, const Tape& tape, double lr) {
    for (const auto& [name, grad] : tape.param_grads()) {
        check_finite(grad, "sgd_step gradient");
        Matrix& value = params.at(name);
        if (!value.same_shape(grad))
            throw ShapeError("sgd_step: gradient shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < value.size(); ++i) value.data[i] -= lr * grad.data[i];
    }
}

}  // namespace spot
