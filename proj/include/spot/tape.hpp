#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spot/matrix.hpp"

namespace spot {

/// Ordered collection of named parameter matrices. Insertion order is the
/// canonical order used for gradient checks and SGD updates.
class ParamStore {
public:
    Matrix& add(const std::string& name, Matrix value);
    Matrix& at(const std::string& name);
    const Matrix& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    bool operator==(const ParamStore& o) const = default;

private:
    std::vector<std::pair<std::string, Matrix>> items_;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so node ids are
/// already a topological order and backward() is a single reverse sweep.
/// Parameters are leaves registered by name; after backward() their gradients
/// shape-match the parameter values.
class Tape {
public:
    using NodeId = std::size_t;

    NodeId constant(Matrix value);
    NodeId param(const std::string& name, const Matrix& value);
    void register_params(const ParamStore& store);
    NodeId p(const std::string& name) const;  // lookup of a registered parameter node

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_row_vector(NodeId a, NodeId row);  // broadcast a 1 x C row over all rows
    NodeId relu(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId layer_norm_rows(NodeId a);  // per-row standardization, no learned affine
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId permute_rows(NodeId a, const std::vector<std::size_t>& perm);  // out[i] = a[perm[i]]
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId clip(NodeId a, double lo, double hi);
    NodeId minimum(NodeId a, NodeId b);
    NodeId square(NodeId a);
    NodeId mean_all(NodeId a);  // 1 x 1
    NodeId pick_log(NodeId probs, const std::vector<int>& cols);  // N x 1 of log probs(i, cols[i])
    NodeId cross_entropy(NodeId probs, const std::vector<int>& labels);  // 1 x 1
    NodeId neg(NodeId a);

    const Matrix& value(NodeId id) const { return nodes_[id].value; }

    /// Backpropagate from a 1 x 1 root. Gradients of nodes created after the
    /// root are left empty.
    void backward(NodeId root);

    const Matrix& grad(NodeId id) const;
    std::vector<std::pair<std::string, Matrix>> param_grads() const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, NodeId)> backprop;  // empty for leaves
    };

    NodeId push(Matrix value, std::function<void(Tape&, NodeId)> backprop);
    Matrix& grad_ref(NodeId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> params_;
};

/// Max over all registered parameters of the relative error between the tape
/// gradient and a central finite difference with step h. `build` must read
/// parameters through Tape::p() so perturbed copies take effect.
double grad_check(const std::function<Tape::NodeId(Tape&)>& build, const ParamStore& params,
                  double h);

/// One SGD step: value -= lr * grad for every registered parameter.
/// Throws NumericError if any gradient entry is non-finite.
void sgd_step(ParamStore& params, const Tape& tape, double lr);

}  // namespace spot
