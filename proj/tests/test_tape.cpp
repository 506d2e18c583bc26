#include <doctest.h>

#include <cmath>

#include "spot/errors.hpp"
#include "spot/tape.hpp"

using namespace spot;

TEST_CASE("grad_check on x squared at 3") {
    ParamStore params;
    params.add("x", Matrix::from_rows({{3.0}}));
    const double err = grad_check(
        [](Tape& t) { return t.square(t.p("x")); }, params, 1e-4);
    CHECK(err < 1e-6);

    // Sanity of the analytic value itself.
    Tape t;
    t.register_params(params);
    const auto root = t.square(t.p("x"));
    t.backward(root);
    CHECK(t.param_grads()[0].second(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("grad_check is exact for a linear function") {
    ParamStore params;
    Rng rng(2);
    params.add("w", Matrix::uniform(3, 1, -1.0, 1.0, rng));
    const Matrix x = Matrix::uniform(1, 3, -1.0, 1.0, rng);
    const double err = grad_check(
        [&](Tape& t) { return t.mean_all(t.matmul(t.constant(x), t.p("w"))); }, params, 1e-4);
    CHECK(err < 1e-10);
}

TEST_CASE("op-level gradients agree with central differences") {
    Rng rng(7);
    ParamStore params;
    params.add("a", Matrix::uniform(3, 4, -1.0, 1.0, rng));
    params.add("b", Matrix::uniform(4, 3, -1.0, 1.0, rng));
    params.add("row", Matrix::uniform(1, 3, -1.0, 1.0, rng));

    SUBCASE("matmul + add_row_vector + relu") {
        const double err = grad_check(
            [](Tape& t) {
                return t.mean_all(
                    t.relu(t.add_row_vector(t.matmul(t.p("a"), t.p("b")), t.p("row"))));
            },
            params, 1e-4);
        CHECK(err < 1e-7);
    }
    SUBCASE("softmax_rows") {
        const double err = grad_check(
            [](Tape& t) {
                return t.mean_all(t.square(t.softmax_rows(t.matmul(t.p("a"), t.p("b")))));
            },
            params, 1e-4);
        CHECK(err < 1e-7);
    }
    SUBCASE("layer_norm_rows") {
        const double err = grad_check(
            [](Tape& t) {
                return t.mean_all(t.square(t.layer_norm_rows(t.matmul(t.p("a"), t.p("b")))));
            },
            params, 1e-4);
        CHECK(err < 1e-6);
    }
    SUBCASE("exp log hadamard sub") {
        const double err = grad_check(
            [](Tape& t) {
                const auto prod = t.matmul(t.p("a"), t.p("b"));
                const auto pos = t.add_row_vector(t.exp(prod), t.constant(Matrix(1, 3, 2.0)));
                return t.mean_all(t.hadamard(t.log(pos), t.sub(prod, t.scale(prod, 0.25))));
            },
            params, 1e-4);
        CHECK(err < 1e-6);
    }
    SUBCASE("transpose concat permute") {
        const double err = grad_check(
            [](Tape& t) {
                const auto prod = t.matmul(t.p("a"), t.p("b"));  // 3x3
                const auto cat = t.concat_cols({prod, t.transpose(prod)});
                return t.mean_all(t.square(t.permute_rows(cat, {2, 0, 1})));
            },
            params, 1e-4);
        CHECK(err < 1e-7);
    }
    SUBCASE("minimum and clip") {
        const double err = grad_check(
            [](Tape& t) {
                const auto prod = t.matmul(t.p("a"), t.p("b"));
                return t.mean_all(t.minimum(t.clip(prod, -0.4, 0.6), t.scale(prod, 0.3)));
            },
            params, 1e-4);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("pick_log and cross_entropy gradients") {
    Rng rng(9);
    ParamStore params;
    params.add("logits", Matrix::uniform(4, 3, -1.0, 1.0, rng));
    const std::vector<int> labels{0, 2, 1, 1};

    const double pick_err = grad_check(
        [&](Tape& t) {
            return t.mean_all(t.pick_log(t.softmax_rows(t.p("logits")), labels));
        },
        params, 1e-4);
    CHECK(pick_err < 1e-7);

    const double ce_err = grad_check(
        [&](Tape& t) { return t.cross_entropy(t.softmax_rows(t.p("logits")), labels); },
        params, 1e-4);
    CHECK(ce_err < 1e-7);
}

TEST_CASE("backward requires a scalar root") {
    Tape t;
    const auto id = t.constant(Matrix(2, 2, 1.0));
    CHECK_THROWS_AS(t.backward(id), ShapeError);
}

TEST_CASE("grad_check reports non-finite function values") {
    ParamStore params;
    params.add("x", Matrix::from_rows({{-1.0}}));
    CHECK_THROWS_AS(grad_check([](Tape& t) { return t.log(t.p("x")); }, params, 1e-4),
                    NumericError);
}

TEST_CASE("param gradients shape-match their parameters") {
    Rng rng(13);
    ParamStore params;
    params.add("w", Matrix::uniform(5, 2, -1.0, 1.0, rng));
    params.add("b", Matrix::uniform(1, 2, -1.0, 1.0, rng));
    Tape t;
    t.register_params(params);
    const auto root = t.mean_all(
        t.add_row_vector(t.matmul(t.constant(Matrix::uniform(3, 5, -1.0, 1.0, rng)), t.p("w")),
                         t.p("b")));
    t.backward(root);
    for (const auto& [name, g] : t.param_grads()) CHECK(g.same_shape(params.at(name)));
}

TEST_CASE("sgd_step applies lr times gradient") {
    ParamStore params;
    params.add("x", Matrix::from_rows({{2.0}}));
    Tape t;
    t.register_params(params);
    const auto root = t.square(t.p("x"));  // d/dx = 4
    t.backward(root);
    sgd_step(params, t, 0.5);
    CHECK(params.at("x")(0, 0) == doctest::Approx(2.0 - 0.5 * 4.0));
}
