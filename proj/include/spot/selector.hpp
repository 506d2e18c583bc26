#pragma once

#include <cstdint>
#include <vector>

#include "spot/tape.hpp"

namespace spot {

/// Batch of synthetic features awaiting keep/discard decisions.
/// generation_index records the order in which the generator emitted each
/// candidate and must be a permutation of 0..N-1. `corrupted` is ground truth
/// kept by the toy generator for test measurement only; the selector never
/// reads it.
struct CandidatePool {
    Matrix features;                             // N x feature_dim
    std::vector<int> class_labels;               // N
    std::vector<std::size_t> generation_index;   // N, permutation of 0..N-1
    std::vector<std::uint8_t> corrupted;         // N, hidden from the selector

    std::size_t size() const { return features.rows; }
};

void validate_pool(const CandidatePool& pool);

struct SelectorConfig {
    std::size_t feature_dim = 16;
    std::size_t d_model = 64;
    std::size_t layers = 8;
    std::size_t heads = 8;
    std::size_t ff_hidden = 128;
    std::size_t ff_layers = 2;  // affine maps per feed-forward block, ReLU between

    std::size_t head_dim() const { return d_model / heads; }
};

struct SelectorParams {
    SelectorConfig cfg;
    ParamStore params;
};

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for weights, zeros for
/// biases; deterministic given the rng.
SelectorParams init_selector(const SelectorConfig& cfg, Rng& rng);

/// Sinusoidal table, n x d_model; d_model must be even.
Matrix positional_encoding(std::size_t n, std::size_t d_model);

struct AttentionResult {
    Matrix output;
    Matrix weights;  // softmax(QK^T / sqrt(d_k)), exposed for testing
};

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// Single encoder-layer sub-blocks, evaluated outside any training tape.
Matrix multi_head_attention(const Matrix& x, const SelectorParams& sp, std::size_t layer);
Matrix feed_forward(const Matrix& x, const SelectorParams& sp, std::size_t layer);

struct ForwardNodes {
    Tape::NodeId action_probs;                 // N x 2
    Tape::NodeId values;                       // N x 1
    std::vector<Tape::NodeId> attention_weights;  // one per (layer, head)
};

/// Builds the full selector graph on a tape whose parameters were registered
/// from SelectorParams::params. Rows are processed in generation order
/// internally and mapped back, so the outputs are exactly equivariant under
/// joint permutation of (feature row, label, generation_index).
ForwardNodes build_forward(Tape& tape, const CandidatePool& pool, const SelectorConfig& cfg);

struct ForwardResult {
    Matrix action_probs;              // N x 2, rows sum to 1; column 1 = select
    std::vector<double> values;       // N
    std::vector<Matrix> attention_weights;
};

ForwardResult selector_forward(const CandidatePool& pool, const SelectorParams& sp);

/// Per-candidate decisions. Column convention: 0 = discard, 1 = select.
struct ActionVector {
    std::vector<int> actions;
    std::vector<double> log_probs;  // log pi of the taken action
    std::vector<double> values;     // value-head outputs at sampling time
};

ActionVector sample_actions(const Matrix& action_probs, Rng& rng);

/// Sub-pool of candidates with action 1, original order preserved.
/// generation_index is re-ranked so the result is again a valid pool.
CandidatePool apply_selection(const CandidatePool& pool, const ActionVector& actions);

}  // namespace spot
