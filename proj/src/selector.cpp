#include "spot/selector.hpp"

#include <algorithm>
#include <cmath>

#include "spot/errors.hpp"

namespace spot {

void validate_pool(const CandidatePool& pool) {
    const std::size_t n = pool.features.rows;
    if (n == 0) throw InputError("candidate pool is empty");
    if (pool.class_labels.size() != n || pool.generation_index.size() != n)
        throw ShapeError("candidate pool: field lengths disagree");
    if (!pool.corrupted.empty() && pool.corrupted.size() != n)
        throw ShapeError("candidate pool: corruption flags length mismatch");
    std::vector<bool> seen(n, false);
    for (std::size_t g : pool.generation_index) {
        if (g >= n || seen[g])
            throw InputError("candidate pool: generation_index is not a permutation of 0..N-1");
        seen[g] = true;
    }
}

namespace {

std::string layer_key(std::size_t layer, const char* part) {
    return "l" + std::to_string(layer) + "." + part;
}

std::string head_key(std::size_t layer, const char* part, std::size_t head) {
    return "l" + std::to_string(layer) + "." + part + std::to_string(head);
}

Matrix init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Matrix::uniform(fan_in, fan_out, -bound, bound, rng);
}

}  // namespace

SelectorParams init_selector(const SelectorConfig& cfg, Rng& rng) {
    if (cfg.d_model == 0 || cfg.heads == 0 || cfg.layers == 0)
        throw ConfigError("selector: d_model, heads and layers must be positive");
    if (cfg.d_model % cfg.heads != 0)
        throw ConfigError("selector: d_model " + std::to_string(cfg.d_model) +
                          " not divisible by heads " + std::to_string(cfg.heads));
    if (cfg.d_model % 2 != 0)
        throw ConfigError("selector: d_model must be even for the positional table");
    if (cfg.ff_layers == 0)
        throw ConfigError("selector: the feed-forward chain needs at least one affine map");

    SelectorParams sp;
    sp.cfg = cfg;
    ParamStore& ps = sp.params;
    ps.add("proj", init_weight(cfg.feature_dim, cfg.d_model, rng));
    const std::size_t dk = cfg.head_dim();
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            ps.add(head_key(l, "q", h), init_weight(cfg.d_model, dk, rng));
            ps.add(head_key(l, "k", h), init_weight(cfg.d_model, dk, rng));
            ps.add(head_key(l, "v", h), init_weight(cfg.d_model, dk, rng));
        }
        ps.add(layer_key(l, "wo"), init_weight(cfg.d_model, cfg.d_model, rng));
        for (std::size_t k = 1; k <= cfg.ff_layers; ++k) {
            const std::size_t in = k == 1 ? cfg.d_model : cfg.ff_hidden;
            const std::size_t out = k == cfg.ff_layers ? cfg.d_model : cfg.ff_hidden;
            const std::string base = "ff" + std::to_string(k);
            ps.add(layer_key(l, (base + ".w").c_str()), init_weight(in, out, rng));
            ps.add(layer_key(l, (base + ".b").c_str()), Matrix(1, out));
        }
    }
    ps.add("policy.w", init_weight(cfg.d_model, 2, rng));
    ps.add("policy.b", Matrix(1, 2));
    ps.add("value.w", init_weight(cfg.d_model, 1, rng));
    ps.add("value.b", Matrix(1, 1));
    return sp;
}

Matrix positional_encoding(std::size_t n, std::size_t d_model) {
    if (d_model % 2 != 0)
        throw ConfigError("positional_encoding: d_model must be even, got " +
                          std::to_string(d_model));
    Matrix pe(n, d_model);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d_model / 2; ++i) {
            const double rate =
                std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
            const double angle = static_cast<double>(pos) / rate;
            pe(pos, 2 * i) = std::sin(angle);
            pe(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.cols != k.cols)
        throw ShapeError("attention: query dim " + q.shape_str() + " vs key dim " +
                         k.shape_str());
    if (k.rows != v.rows)
        throw ShapeError("attention: key count " + k.shape_str() + " vs value count " +
                         v.shape_str());
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols));
    const Matrix weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dk));
    return AttentionResult{matmul(weights, v), weights};
}

namespace {

struct MhaNodes {
    Tape::NodeId output;
    std::vector<Tape::NodeId> weights;
};

MhaNodes build_mha(Tape& t, Tape::NodeId x, const SelectorConfig& cfg, std::size_t layer) {
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    std::vector<Tape::NodeId> heads;
    std::vector<Tape::NodeId> weight_nodes;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const Tape::NodeId q = t.matmul(x, t.p(head_key(layer, "q", h)));
        const Tape::NodeId k = t.matmul(x, t.p(head_key(layer, "k", h)));
        const Tape::NodeId v = t.matmul(x, t.p(head_key(layer, "v", h)));
        const Tape::NodeId scores = t.scale(t.matmul(q, t.transpose(k)), inv_sqrt_dk);
        const Tape::NodeId w = t.softmax_rows(scores);
        weight_nodes.push_back(w);
        heads.push_back(t.matmul(w, v));
    }
    const Tape::NodeId concat = cfg.heads == 1 ? heads[0] : t.concat_cols(heads);
    return MhaNodes{t.matmul(concat, t.p(layer_key(layer, "wo"))), weight_nodes};
}

// Chain of affine maps with ReLU after every layer except the last.
Tape::NodeId build_ff(Tape& t, Tape::NodeId x, const SelectorConfig& cfg, std::size_t layer) {
    Tape::NodeId cur = x;
    for (std::size_t k = 1; k <= cfg.ff_layers; ++k) {
        const std::string base = "ff" + std::to_string(k);
        cur = t.add_row_vector(t.matmul(cur, t.p(layer_key(layer, (base + ".w").c_str()))),
                               t.p(layer_key(layer, (base + ".b").c_str())));
        if (k < cfg.ff_layers) cur = t.relu(cur);
    }
    return cur;
}

}  // namespace

Matrix multi_head_attention(const Matrix& x, const SelectorParams& sp, std::size_t layer) {
    if (x.cols != sp.cfg.d_model)
        throw ShapeError("multi_head_attention: input " + x.shape_str() + " vs d_model " +
                         std::to_string(sp.cfg.d_model));
    Tape t;
    t.register_params(sp.params);
    return t.value(build_mha(t, t.constant(x), sp.cfg, layer).output);
}

Matrix feed_forward(const Matrix& x, const SelectorParams& sp, std::size_t layer) {
    if (x.cols != sp.cfg.d_model)
        throw ShapeError("feed_forward: input " + x.shape_str() + " vs d_model " +
                         std::to_string(sp.cfg.d_model));
    Tape t;
    t.register_params(sp.params);
    return t.value(build_ff(t, t.constant(x), sp.cfg, layer));
}

ForwardNodes build_forward(Tape& t, const CandidatePool& pool, const SelectorConfig& cfg) {
    validate_pool(pool);
    if (pool.features.cols != cfg.feature_dim)
        throw ShapeError("selector forward: feature dim " +
                         std::to_string(pool.features.cols) + " vs configured " +
                         std::to_string(cfg.feature_dim));
    const std::size_t n = pool.size();

    // Work in generation order so the arithmetic is identical however the
    // caller ordered the rows; map back through an exact row permutation.
    std::vector<std::size_t> canon(n);  // canon[k] = input row emitted k-th
    for (std::size_t i = 0; i < n; ++i) canon[pool.generation_index[i]] = i;

    Matrix ordered(n, pool.features.cols);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < pool.features.cols; ++j)
            ordered(k, j) = pool.features(canon[k], j);

    const Tape::NodeId input = t.constant(std::move(ordered));
    Tape::NodeId x = t.add(t.matmul(input, t.p("proj")),
                           t.constant(positional_encoding(n, cfg.d_model)));

    std::vector<Tape::NodeId> weight_nodes;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const MhaNodes mha = build_mha(t, x, cfg, l);
        weight_nodes.insert(weight_nodes.end(), mha.weights.begin(), mha.weights.end());
        x = t.layer_norm_rows(t.add(x, mha.output));
        x = t.layer_norm_rows(t.add(x, build_ff(t, x, cfg, l)));
    }

    Tape::NodeId logits = t.add_row_vector(t.matmul(x, t.p("policy.w")), t.p("policy.b"));
    Tape::NodeId values = t.add_row_vector(t.matmul(x, t.p("value.w")), t.p("value.b"));

    // Back to the caller's row order.
    const std::vector<std::size_t>& back = pool.generation_index;  // out[i] = canonical[gi[i]]
    ForwardNodes out;
    out.action_probs = t.softmax_rows(t.permute_rows(logits, back));
    out.values = t.permute_rows(values, back);
    out.attention_weights = std::move(weight_nodes);
    return out;
}

ForwardResult selector_forward(const CandidatePool& pool, const SelectorParams& sp) {
    Tape t;
    t.register_params(sp.params);
    const ForwardNodes nodes = build_forward(t, pool, sp.cfg);
    ForwardResult res;
    res.action_probs = t.value(nodes.action_probs);
    check_finite(res.action_probs, "selector action probabilities");
    const Matrix& v = t.value(nodes.values);
    res.values.resize(v.rows);
    for (std::size_t i = 0; i < v.rows; ++i) res.values[i] = v(i, 0);
    res.attention_weights.reserve(nodes.attention_weights.size());
    for (Tape::NodeId w : nodes.attention_weights) res.attention_weights.push_back(t.value(w));
    return res;
}

ActionVector sample_actions(const Matrix& action_probs, Rng& rng) {
    if (action_probs.cols != 2)
        throw ShapeError("sample_actions: expected N x 2 probabilities, got " +
                         action_probs.shape_str());
    ActionVector av;
    const std::size_t n = action_probs.rows;
    av.actions.resize(n);
    av.log_probs.resize(n);
    av.values.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double p_discard = action_probs(i, 0);
        const double p_select = action_probs(i, 1);
        if (!std::isfinite(p_select) || !std::isfinite(p_discard) || p_select < 0.0 ||
            p_discard < 0.0 || std::abs(p_select + p_discard - 1.0) > 1e-6)
            throw NumericError("sample_actions: row " + std::to_string(i) +
                               " is not a probability distribution");
        const int action = rng.uniform01() < p_select ? 1 : 0;
        av.actions[i] = action;
        av.log_probs[i] = std::log(action == 1 ? p_select : p_discard);
    }
    return av;
}

CandidatePool apply_selection(const CandidatePool& pool, const ActionVector& actions) {
    const std::size_t n = pool.size();
    if (actions.actions.size() != n)
        throw ShapeError("apply_selection: " + std::to_string(actions.actions.size()) +
                         " actions for " + std::to_string(n) + " candidates");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i)
        if (actions.actions[i] == 1) kept.push_back(i);

    CandidatePool out;
    out.features = Matrix(kept.size(), pool.features.cols);
    out.class_labels.reserve(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        for (std::size_t j = 0; j < pool.features.cols; ++j)
            out.features(r, j) = pool.features(kept[r], j);
        out.class_labels.push_back(pool.class_labels[kept[r]]);
        if (!pool.corrupted.empty()) out.corrupted.push_back(pool.corrupted[kept[r]]);
    }

    // Re-rank the surviving generation indices so the sub-pool is again a
    // permutation of 0..K-1 while preserving relative emission order.
    std::vector<std::size_t> surviving;
    for (std::size_t idx : kept) surviving.push_back(pool.generation_index[idx]);
    std::vector<std::size_t> sorted = surviving;
    std::sort(sorted.begin(), sorted.end());
    out.generation_index.reserve(kept.size());
    for (std::size_t g : surviving) {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), g);
        out.generation_index.push_back(static_cast<std::size_t>(it - sorted.begin()));
    }
    return out;
}

}  // namespace spot
