#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spot/errors.hpp"
#include "spot/policy_opt.hpp"

using namespace spot;

namespace {

CandidatePool tiny_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    CandidatePool pool;
    pool.features = Matrix::uniform(n, dim, -1.0, 1.0, rng);
    pool.class_labels.assign(n, 0);
    pool.generation_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) pool.generation_index[i] = i;
    return pool;
}

SelectorConfig tiny_config(std::size_t dim) {
    SelectorConfig cfg;
    cfg.feature_dim = dim;
    cfg.d_model = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ff_hidden = 8;
    return cfg;
}

Trajectory sample_trajectory(const SelectorParams& sp, const CandidatePool& pool,
                             double reward, std::uint64_t seed) {
    const ForwardResult fw = selector_forward(pool, sp);
    Rng rng(seed);
    ActionVector av = sample_actions(fw.action_probs, rng);
    Trajectory traj;
    traj.old_log_probs = av.log_probs;
    traj.actions = av.actions;
    traj.values = fw.values;
    traj.reward = reward;
    return traj;
}

}  // namespace

TEST_CASE("q_value takes the max over the trailing window") {
    RewardTracker tracker;
    tracker.record_epoch(0.6);
    CHECK(q_value(tracker, 1) == doctest::Approx(0.6));

    tracker.begin_episode();
    for (double acc : {0.5, 0.7, 0.6, 0.4, 0.65, 0.62}) tracker.record_epoch(acc);
    CHECK(q_value(tracker, 2, 5) == doctest::Approx(0.7));

    tracker.begin_episode();
    for (int i = 0; i < 8; ++i) tracker.record_epoch(0.8);
    CHECK(q_value(tracker, 3) == doctest::Approx(0.8));

    RewardTracker empty;
    CHECK_THROWS_AS(q_value(empty, 1), StateError);
}

TEST_CASE("ema_reward follows the two-case recurrence") {
    RewardTracker tracker;
    tracker.alpha = 0.5;
    CHECK(ema_reward(tracker, 1, 0.8) == doctest::Approx(0.8));
    CHECK(tracker.ema_state[0] == doctest::Approx(0.8));
    CHECK(ema_reward(tracker, 2, 0.6) == doctest::Approx(0.7));

    RewardTracker constant;
    constant.alpha = 0.5;
    for (std::size_t t = 1; t <= 10; ++t)
        CHECK(ema_reward(constant, t, 0.42) == doctest::Approx(0.42));

    RewardTracker gap;
    CHECK_THROWS_AS(ema_reward(gap, 2, 0.5), StateError);
}

TEST_CASE("ema stays within the convex hull of its inputs") {
    Rng rng(5);
    RewardTracker tracker;
    tracker.alpha = 0.5;
    double lo = 1.0, hi = 0.0;
    for (std::size_t t = 1; t <= 50; ++t) {
        const double q = rng.uniform01();
        lo = std::min(lo, q);
        hi = std::max(hi, q);
        const double q_hat = ema_reward(tracker, t, q);
        CHECK(q_hat >= lo - 1e-15);
        CHECK(q_hat <= hi + 1e-15);
    }
}

TEST_CASE("advantage is q_hat minus value, elementwise") {
    CHECK(advantage(0.7, {0.5})[0] == doctest::Approx(0.2));
    const std::vector<double> values{0.3, 0.3, 0.3};
    for (double a : advantage(0.3, values)) CHECK(a == doctest::Approx(0.0));
    const std::vector<double> vs{0.1, 0.9, -0.4};
    const std::vector<double> got = advantage(0.5, vs);
    for (std::size_t i = 0; i < vs.size(); ++i)
        CHECK(got[i] == doctest::Approx(0.5 - vs[i]));
}

TEST_CASE("prob_ratio basics") {
    const std::vector<double> lp{-0.5, -1.0, -2.0};
    for (double r : prob_ratio(lp, lp)) CHECK(r == doctest::Approx(1.0));

    std::vector<double> shifted = lp;
    for (double& x : shifted) x += std::log(2.0);
    for (double r : prob_ratio(shifted, lp)) CHECK(r == doctest::Approx(2.0));

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> a{-rng.uniform01() * 5.0};
        const std::vector<double> b{-rng.uniform01() * 5.0};
        CHECK(prob_ratio(a, b)[0] > 0.0);
    }
}

TEST_CASE("clipped objective matches direct evaluations") {
    CHECK(clipped_objective_term(1.3, 1.0, 0.15) == doctest::Approx(1.15));
    CHECK(clipped_objective_term(0.5, -1.0, 0.15) == doctest::Approx(-0.85));
    // No clipping at ratio 1.
    const std::vector<double> ones{1.0, 1.0, 1.0};
    const std::vector<double> advs{0.2, -0.1, 0.5};
    const double mean_adv = (0.2 - 0.1 + 0.5) / 3.0;
    CHECK(ppo_loss(ones, advs, 0.15) == doctest::Approx(-mean_adv));
}

TEST_CASE("clipped objective equals the scalar brute force over a grid") {
    for (double gamma : {0.5, 0.85, 1.0, 1.15, 1.5}) {
        for (double adv : {-1.0, 0.0, 1.0}) {
            for (double eps : {0.15, 0.3}) {
                const double clipped = std::min(std::max(gamma, 1.0 - eps), 1.0 + eps);
                const double want = std::min(gamma * adv, clipped * adv);
                CHECK(std::abs(clipped_objective_term(gamma, adv, eps) - want) <= 1e-12);
                CHECK(std::abs(ppo_loss({gamma}, {adv}, eps) - (-want)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("ppo_update leaves parameters unchanged at zero gradient") {
    const SelectorConfig cfg = tiny_config(4);
    Rng rng(7);
    SelectorParams sp = init_selector(cfg, rng);
    const CandidatePool pool = tiny_pool(4, 4, 11);

    // Zero advantages and a value head that already matches the reward:
    // set values in the trajectory equal to the reward.
    ForwardResult fw = selector_forward(pool, sp);
    Rng srng(13);
    ActionVector av = sample_actions(fw.action_probs, srng);

    Trajectory traj;
    traj.old_log_probs = av.log_probs;
    traj.actions = av.actions;
    traj.values.assign(4, 0.55);
    traj.reward = 0.55;

    // Force the value outputs to equal the reward exactly by zeroing the
    // value head and fixing its bias.
    sp.params.at("value.w") = Matrix(cfg.d_model, 1);
    sp.params.at("value.b") = Matrix::from_rows({{0.55}});

    const ParamStore before = sp.params;
    PpoConfig pcfg;
    pcfg.update_epochs = 1;
    pcfg.learning_rate = 0.1;
    ppo_update(sp, pool, traj, pcfg);
    for (const auto& [name, m] : sp.params) {
        CHECK(max_abs_diff(m, before.at(name)) < 1e-12);
    }
}

TEST_CASE("one ppo step decreases the loss on the same trajectory") {
    const SelectorConfig cfg = tiny_config(4);
    Rng rng(19);
    SelectorParams sp = init_selector(cfg, rng);
    const CandidatePool pool = tiny_pool(6, 4, 23);
    const Trajectory traj = sample_trajectory(sp, pool, 0.9, 29);

    PpoConfig pcfg;
    pcfg.update_epochs = 4;
    pcfg.learning_rate = 0.05;
    const UpdateStats stats = ppo_update(sp, pool, traj, pcfg);
    CHECK(stats.last_loss < stats.first_loss);
}

TEST_CASE("clipped branch has zero gradient outside the trust band") {
    // Sign-consistent case: ratio > 1 + eps with positive advantage. The
    // min() selects the clipped constant, so the surrogate contributes no
    // gradient with respect to the ratio.
    ParamStore params;
    params.add("ratio", Matrix::from_rows({{1.4}}));
    const double eps = 0.15;
    Tape t;
    t.register_params(params);
    const auto adv = t.constant(Matrix::from_rows({{2.0}}));
    const auto term = t.minimum(t.hadamard(t.p("ratio"), adv),
                                t.hadamard(t.clip(t.p("ratio"), 1.0 - eps, 1.0 + eps), adv));
    t.backward(t.mean_all(term));
    CHECK(t.param_grads()[0].second(0, 0) == doctest::Approx(0.0));

    // Mirror case: ratio < 1 - eps with negative advantage.
    ParamStore params2;
    params2.add("ratio", Matrix::from_rows({{0.6}}));
    Tape t2;
    t2.register_params(params2);
    const auto adv2 = t2.constant(Matrix::from_rows({{-1.5}}));
    const auto term2 = t2.minimum(t2.hadamard(t2.p("ratio"), adv2),
                                  t2.hadamard(t2.clip(t2.p("ratio"), 1.0 - eps, 1.0 + eps), adv2));
    t2.backward(t2.mean_all(term2));
    CHECK(t2.param_grads()[0].second(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("ppo_update is deterministic") {
    const SelectorConfig cfg = tiny_config(4);
    const CandidatePool pool = tiny_pool(5, 4, 31);
    PpoConfig pcfg;
    pcfg.update_epochs = 2;
    pcfg.learning_rate = 0.01;

    Rng rng_a(37), rng_b(37);
    SelectorParams a = init_selector(cfg, rng_a);
    SelectorParams b = init_selector(cfg, rng_b);
    const Trajectory traj = sample_trajectory(a, pool, 0.7, 41);
    ppo_update(a, pool, traj, pcfg);
    ppo_update(b, pool, traj, pcfg);
    for (const auto& [name, m] : a.params) CHECK(m == b.params.at(name));
}

TEST_CASE("reinforce gradient matches central differences") {
    const SelectorConfig cfg = tiny_config(3);
    Rng rng(43);
    SelectorParams sp = init_selector(cfg, rng);
    const CandidatePool pool = tiny_pool(4, 3, 47);
    const Trajectory traj = sample_trajectory(sp, pool, 0.8, 53);

    double baseline = 0.0;
    for (double v : traj.values) baseline += v;
    baseline /= static_cast<double>(traj.values.size());
    const double coef = traj.reward - baseline;

    const double err = grad_check(
        [&](Tape& t) {
            const ForwardNodes fw = build_forward(t, pool, cfg);
            return t.scale(t.mean_all(t.pick_log(fw.action_probs, traj.actions)), -coef);
        },
        sp.params, 1e-4);
    CHECK(err < 1e-4);
}

TEST_CASE("reinforce with reward equal to baseline is a no-op") {
    const SelectorConfig cfg = tiny_config(3);
    Rng rng(59);
    SelectorParams sp = init_selector(cfg, rng);
    const CandidatePool pool = tiny_pool(4, 3, 61);

    Trajectory traj = sample_trajectory(sp, pool, 0.5, 67);
    traj.values.assign(4, 0.5);  // baseline == reward
    const ParamStore before = sp.params;
    reinforce_update(sp, pool, traj, 0.1);
    for (const auto& [name, m] : sp.params) CHECK(max_abs_diff(m, before.at(name)) < 1e-15);
}

TEST_CASE("reinforce_update is deterministic") {
    const SelectorConfig cfg = tiny_config(3);
    const CandidatePool pool = tiny_pool(4, 3, 71);
    Rng rng_a(73), rng_b(73);
    SelectorParams a = init_selector(cfg, rng_a);
    SelectorParams b = init_selector(cfg, rng_b);
    const Trajectory traj = sample_trajectory(a, pool, 0.9, 79);
    reinforce_update(a, pool, traj, 0.05);
    reinforce_update(b, pool, traj, 0.05);
    for (const auto& [name, m] : a.params) CHECK(m == b.params.at(name));
}

TEST_CASE("full selector forward plus ppo loss passes the gradient check") {
    const SelectorConfig cfg = tiny_config(4);
    Rng rng(83);
    SelectorParams sp = init_selector(cfg, rng);
    const CandidatePool pool = tiny_pool(4, 4, 89);
    const Trajectory traj = sample_trajectory(sp, pool, 0.75, 97);
    const std::vector<double> advs = advantage(traj.reward, traj.values);

    const double err = grad_check(
        [&](Tape& t) {
            const ForwardNodes fw = build_forward(t, pool, cfg);
            const auto new_lp = t.pick_log(fw.action_probs, traj.actions);
            const auto ratios = t.exp(t.sub(new_lp, t.constant(Matrix::column(traj.old_log_probs))));
            const auto adv = t.constant(Matrix::column(advs));
            const auto surrogate =
                t.minimum(t.hadamard(ratios, adv),
                          t.hadamard(t.clip(ratios, 1.0 - 0.15, 1.0 + 0.15), adv));
            const auto target = t.constant(Matrix(pool.size(), 1, traj.reward));
            const auto value_err = t.square(t.sub(target, fw.values));
            return t.add(t.neg(t.mean_all(surrogate)), t.scale(t.mean_all(value_err), 0.5));
        },
        sp.params, 1e-4);
    CHECK(err < 1e-4);
}
