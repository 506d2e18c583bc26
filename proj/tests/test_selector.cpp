#include <doctest.h>

#include <cmath>

#include "spot/errors.hpp"
#include "spot/selector.hpp"

using namespace spot;

namespace {

CandidatePool make_test_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    CandidatePool pool;
    pool.features = Matrix::uniform(n, dim, -1.0, 1.0, rng);
    pool.class_labels.assign(n, 0);
    pool.generation_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) pool.generation_index[i] = i;
    return pool;
}

SelectorConfig small_config(std::size_t feature_dim) {
    SelectorConfig cfg;
    cfg.feature_dim = feature_dim;
    cfg.d_model = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ff_hidden = 8;
    return cfg;
}

}  // namespace

TEST_CASE("positional_encoding known entries") {
    const Matrix pe = positional_encoding(4, 6);
    for (std::size_t j = 0; j < 6; j += 2) {
        CHECK(pe(0, j) == doctest::Approx(0.0));
        CHECK(pe(0, j + 1) == doctest::Approx(1.0));
    }
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(pe(1, 0) == doctest::Approx(0.8415).epsilon(1e-4));
    for (double x : pe.data) {
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
    }
    CHECK_THROWS_AS(positional_encoding(4, 7), ConfigError);
}

TEST_CASE("attention with identical keys averages the values") {
    const Matrix q = Matrix::from_rows({{0.3, -0.2}, {1.0, 0.4}});
    const Matrix k = Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    const Matrix v = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {2.0, 2.0}});
    const AttentionResult res = attention(q, k, v);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(res.output(i, 0) == doctest::Approx(1.0));
        CHECK(res.output(i, 1) == doctest::Approx(1.0));
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(res.weights(i, j) == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("attention with a single row returns the value row") {
    const Matrix q = Matrix::from_rows({{0.7, -1.2, 0.1}});
    const Matrix k = Matrix::from_rows({{0.2, 0.4, -0.9}});
    const Matrix v = Matrix::from_rows({{3.0, -5.0}});
    const AttentionResult res = attention(q, k, v);
    CHECK(res.weights(0, 0) == doctest::Approx(1.0));
    CHECK(res.output(0, 0) == doctest::Approx(3.0));
    CHECK(res.output(0, 1) == doctest::Approx(-5.0));
}

TEST_CASE("attention matches a direct softmax evaluation") {
    Rng rng(17);
    const Matrix q = Matrix::uniform(3, 4, -1.0, 1.0, rng);
    const Matrix k = Matrix::uniform(3, 4, -1.0, 1.0, rng);
    const Matrix v = Matrix::uniform(3, 2, -1.0, 1.0, rng);
    const AttentionResult res = attention(q, k, v);

    // Brute-force evaluation, scalar by scalar.
    for (std::size_t i = 0; i < 3; ++i) {
        double weights[3];
        double mx = -1e300;
        for (std::size_t j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 4; ++d) dot += q(i, d) * k(j, d);
            weights[j] = dot / std::sqrt(4.0);
            mx = std::max(mx, weights[j]);
        }
        double sum = 0.0;
        for (double& w : weights) {
            w = std::exp(w - mx);
            sum += w;
        }
        for (double& w : weights) w /= sum;
        for (std::size_t c = 0; c < 2; ++c) {
            double out = 0.0;
            for (std::size_t j = 0; j < 3; ++j) out += weights[j] * v(j, c);
            CHECK(res.output(i, c) == doctest::Approx(out).epsilon(1e-12));
        }
    }

    // Weight rows are distributions.
    for (std::size_t i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) sum += res.weights(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("multi_head_attention with one head is attention followed by the output projection") {
    Rng rng(23);
    SelectorConfig cfg = small_config(4);
    cfg.heads = 1;
    cfg.d_model = 6;
    const SelectorParams sp = init_selector(cfg, rng);
    const Matrix x = Matrix::uniform(5, 6, -1.0, 1.0, rng);

    const Matrix got = multi_head_attention(x, sp, 0);
    const Matrix q = matmul(x, sp.params.at("l0.q0"));
    const Matrix k = matmul(x, sp.params.at("l0.k0"));
    const Matrix v = matmul(x, sp.params.at("l0.v0"));
    const Matrix want = matmul(attention(q, k, v).output, sp.params.at("l0.wo"));
    CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("multi_head_attention equals the manual per-head computation") {
    Rng rng(29);
    SelectorConfig cfg = small_config(4);
    cfg.d_model = 8;
    cfg.heads = 2;
    const SelectorParams sp = init_selector(cfg, rng);
    const Matrix x = Matrix::uniform(4, 8, -1.0, 1.0, rng);

    const Matrix got = multi_head_attention(x, sp, 1);

    const auto head = [&](int h) {
        const std::string tag = std::to_string(h);
        return attention(matmul(x, sp.params.at("l1.q" + tag)),
                         matmul(x, sp.params.at("l1.k" + tag)),
                         matmul(x, sp.params.at("l1.v" + tag)))
            .output;
    };
    const Matrix h0 = head(0), h1 = head(1);
    Matrix cat(4, 8);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            cat(i, j) = h0(i, j);
            cat(i, 4 + j) = h1(i, j);
        }
    }
    CHECK(max_abs_diff(got, matmul(cat, sp.params.at("l1.wo"))) < 1e-12);
    CHECK(got.rows == 4);
    CHECK(got.cols == 8);
}

TEST_CASE("feed_forward is the two-affine relu chain") {
    Rng rng(31);
    const SelectorConfig cfg = small_config(4);
    SelectorParams sp = init_selector(cfg, rng);
    const Matrix x = Matrix::uniform(3, cfg.d_model, -1.0, 1.0, rng);

    SUBCASE("zero weights give zero output") {
        for (auto& [name, m] : sp.params)
            if (name.rfind("l0.ff", 0) == 0) m = Matrix(m.rows, m.cols);
        const Matrix out = feed_forward(x, sp, 0);
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("matches hand-composed relu(xW1+b1)W2+b2") {
        const Matrix h = relu(add(matmul(x, sp.params.at("l0.ff1.w")),
                                  matmul(Matrix(3, 1, 1.0), sp.params.at("l0.ff1.b"))));
        const Matrix want = add(matmul(h, sp.params.at("l0.ff2.w")),
                                matmul(Matrix(3, 1, 1.0), sp.params.at("l0.ff2.b")));
        CHECK(max_abs_diff(feed_forward(x, sp, 0), want) < 1e-12);
    }
}

TEST_CASE("a single identity feed-forward layer leaves the input unchanged") {
    Rng rng(33);
    SelectorConfig cfg = small_config(4);
    cfg.ff_layers = 1;
    SelectorParams sp = init_selector(cfg, rng);
    sp.params.at("l0.ff1.w") = Matrix::identity(cfg.d_model);
    sp.params.at("l0.ff1.b") = Matrix(1, cfg.d_model);
    const Matrix x = Matrix::uniform(3, cfg.d_model, -2.0, 2.0, rng);
    CHECK(feed_forward(x, sp, 0) == x);
}

TEST_CASE("selector forward yields valid distributions and values") {
    Rng rng(37);
    const SelectorConfig cfg = small_config(5);
    const SelectorParams sp = init_selector(cfg, rng);

    for (std::size_t n : {1, 4, 9}) {
        const CandidatePool pool = make_test_pool(n, 5, 101 + n);
        const ForwardResult fw = selector_forward(pool, sp);
        CHECK(fw.action_probs.rows == n);
        CHECK(fw.action_probs.cols == 2);
        CHECK(fw.values.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(fw.action_probs(i, 0) >= 0.0);
            CHECK(fw.action_probs(i, 1) >= 0.0);
            CHECK(fw.action_probs(i, 0) + fw.action_probs(i, 1) ==
                  doctest::Approx(1.0).epsilon(1e-9));
        }
        for (const Matrix& w : fw.attention_weights) {
            for (std::size_t i = 0; i < w.rows; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < w.cols; ++j) sum += w(i, j);
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("selector forward is exactly permutation equivariant") {
    Rng rng(41);
    const SelectorConfig cfg = small_config(5);
    const SelectorParams sp = init_selector(cfg, rng);
    CandidatePool pool = make_test_pool(6, 5, 202);
    const ForwardResult base = selector_forward(pool, sp);

    // Rotate rows by two while carrying labels and generation indices along.
    const std::vector<std::size_t> perm{2, 3, 4, 5, 0, 1};
    CandidatePool shuffled;
    shuffled.features = Matrix(6, 5);
    shuffled.class_labels.resize(6);
    shuffled.generation_index.resize(6);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 5; ++j)
            shuffled.features(i, j) = pool.features(perm[i], j);
        shuffled.class_labels[i] = pool.class_labels[perm[i]];
        shuffled.generation_index[i] = pool.generation_index[perm[i]];
    }
    const ForwardResult moved = selector_forward(shuffled, sp);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(moved.action_probs(i, 0) == base.action_probs(perm[i], 0));  // bitwise
        CHECK(moved.action_probs(i, 1) == base.action_probs(perm[i], 1));
        CHECK(moved.values[i] == base.values[perm[i]]);
    }
}

TEST_CASE("sample_actions honors deterministic rows and the column convention") {
    Rng rng(43);
    // Column 1 carries the select probability.
    const Matrix certain_select = Matrix::from_rows({{0.0, 1.0}});
    const ActionVector a1 = sample_actions(certain_select, rng);
    CHECK(a1.actions[0] == 1);
    CHECK(a1.log_probs[0] == doctest::Approx(0.0));

    const Matrix certain_discard = Matrix::from_rows({{1.0, 0.0}});
    const ActionVector a0 = sample_actions(certain_discard, rng);
    CHECK(a0.actions[0] == 0);
    CHECK(a0.log_probs[0] == doctest::Approx(0.0));
}

TEST_CASE("sample_actions is reproducible for a fixed seed") {
    const Matrix probs(10, 2, 0.5);
    Rng a(99), b(99);
    const ActionVector x = sample_actions(probs, a);
    const ActionVector y = sample_actions(probs, b);
    CHECK(x.actions == y.actions);
    CHECK(x.log_probs == y.log_probs);
}

TEST_CASE("sample_actions empirical select rate matches p") {
    const std::size_t n = 100000;
    Matrix probs(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        probs(i, 0) = 0.3;
        probs(i, 1) = 0.7;
    }
    Rng rng(1234);
    const ActionVector av = sample_actions(probs, rng);
    double rate = 0.0;
    for (int a : av.actions) rate += a;
    rate /= static_cast<double>(n);
    CHECK(rate == doctest::Approx(0.7).epsilon(0.015));
    for (std::size_t i = 0; i < n; ++i) CHECK(av.log_probs[i] <= 0.0);
}

TEST_CASE("sample_actions rejects malformed rows") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_actions(Matrix::from_rows({{0.9, 0.9}}), rng), NumericError);
}

TEST_CASE("apply_selection keeps order and exact rows") {
    CandidatePool pool = make_test_pool(3, 4, 55);
    pool.corrupted = {0, 1, 0};

    ActionVector all_one;
    all_one.actions = {1, 1, 1};
    CHECK(apply_selection(pool, all_one).features == pool.features);

    ActionVector none;
    none.actions = {0, 0, 0};
    CHECK(apply_selection(pool, none).size() == 0);

    ActionVector some;
    some.actions = {1, 0, 1};
    const CandidatePool sub = apply_selection(pool, some);
    REQUIRE(sub.size() == 2);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(sub.features(0, j) == pool.features(0, j));  // bitwise
        CHECK(sub.features(1, j) == pool.features(2, j));
    }
    CHECK(sub.generation_index == std::vector<std::size_t>{0, 1});
    CHECK(sub.corrupted == std::vector<std::uint8_t>{0, 0});

    ActionVector bad;
    bad.actions = {1, 0};
    CHECK_THROWS_AS(apply_selection(pool, bad), ShapeError);
}

TEST_CASE("selection count equals the number of keep actions") {
    Rng rng(77);
    CandidatePool pool = make_test_pool(20, 3, 88);
    Matrix probs(20, 2, 0.5);
    const ActionVector av = sample_actions(probs, rng);
    std::size_t ones = 0;
    for (int a : av.actions) ones += static_cast<std::size_t>(a);
    CHECK(apply_selection(pool, av).size() == ones);
}
