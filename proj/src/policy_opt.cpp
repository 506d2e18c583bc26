#include "spot/policy_opt.hpp"

#include <algorithm>
#include <cmath>

#include "spot/errors.hpp"

namespace spot {

void RewardTracker::record_epoch(double acc) {
    if (!(acc >= 0.0 && acc <= 1.0))
        throw InputError("RewardTracker: accuracy " + std::to_string(acc) + " outside [0,1]");
    val_acc_history.push_back(acc);
}

double q_value(const RewardTracker& tracker, std::size_t t, std::size_t window) {
    (void)t;
    if (tracker.val_acc_history.empty())
        throw StateError("q_value: no validation accuracy recorded yet");
    if (window == 0) throw InputError("q_value: window must be positive");
    const std::size_t n = tracker.val_acc_history.size();
    const std::size_t take = std::min(window, n);
    double best = tracker.val_acc_history[n - take];
    for (std::size_t i = n - take; i < n; ++i)
        best = std::max(best, tracker.val_acc_history[i]);
    return best;
}

double ema_reward(RewardTracker& tracker, std::size_t t, double q_t) {
    if (t < 1) throw InputError("ema_reward: timesteps are 1-based");
    if (tracker.alpha < 0.0 || tracker.alpha > 1.0)
        throw ConfigError("ema_reward: alpha outside [0,1]");
    if (t != tracker.ema_state.size() + 1) {
        if (t > tracker.ema_state.size() + 1)
            throw StateError("ema_reward: missing predecessor for timestep " + std::to_string(t));
        throw StateError("ema_reward: timestep " + std::to_string(t) + " already recorded");
    }
    const double q_hat =
        t == 1 ? q_t : tracker.alpha * tracker.ema_state[t - 2] + (1.0 - tracker.alpha) * q_t;
    tracker.ema_state.push_back(q_hat);
    return q_hat;
}

std::vector<double> advantage(double q_hat, const std::vector<double>& values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = q_hat - values[i];
    return out;
}

std::vector<double> prob_ratio(const std::vector<double>& new_log_probs,
                               const std::vector<double>& old_log_probs) {
    if (new_log_probs.size() != old_log_probs.size())
        throw ShapeError("prob_ratio: length mismatch");
    std::vector<double> out(new_log_probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(new_log_probs[i] - old_log_probs[i]);
        if (!std::isfinite(out[i]))
            throw NumericError("prob_ratio: non-finite ratio at index " + std::to_string(i));
    }
    return out;
}

double clipped_objective_term(double ratio, double adv, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * adv, clipped * adv);
}

double ppo_loss(const std::vector<double>& ratios, const std::vector<double>& advantages,
                double epsilon) {
    if (ratios.size() != advantages.size()) throw ShapeError("ppo_loss: length mismatch");
    if (ratios.empty()) throw InputError("ppo_loss: empty trajectory");
    if (epsilon <= 0.0) throw ConfigError("ppo_loss: epsilon must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i)
        sum += clipped_objective_term(ratios[i], advantages[i], epsilon);
    return -sum / static_cast<double>(ratios.size());
}

namespace {

void check_trajectory(const Trajectory& traj, std::size_t pool_size) {
    const std::size_t n = traj.actions.size();
    if (n != pool_size || traj.old_log_probs.size() != n || traj.values.size() != n)
        throw ShapeError("trajectory fields do not match the pool size");
    if (!(traj.reward >= 0.0 && traj.reward <= 1.0))
        throw InputError("trajectory reward outside [0,1]");
}

/// Shared graph: forward, ratios against the stored actions, clipped
/// surrogate with constant advantages, plus the value regression term.
Tape::NodeId build_ppo_loss(Tape& t, const CandidatePool& pool, const SelectorConfig& cfg,
                            const Trajectory& traj, double epsilon, double value_loss_weight) {
    const ForwardNodes fw = build_forward(t, pool, cfg);
    const Tape::NodeId new_lp = t.pick_log(fw.action_probs, traj.actions);
    const Tape::NodeId old_lp = t.constant(Matrix::column(traj.old_log_probs));
    const Tape::NodeId ratios = t.exp(t.sub(new_lp, old_lp));

    const Tape::NodeId adv = t.constant(Matrix::column(advantage(traj.reward, traj.values)));
    const Tape::NodeId surrogate = t.minimum(
        t.hadamard(ratios, adv), t.hadamard(t.clip(ratios, 1.0 - epsilon, 1.0 + epsilon), adv));

    const Tape::NodeId target = t.constant(Matrix(pool.size(), 1, traj.reward));
    const Tape::NodeId value_err = t.square(t.sub(target, fw.values));

    return t.add(t.neg(t.mean_all(surrogate)),
                 t.scale(t.mean_all(value_err), value_loss_weight));
}

}  // namespace

UpdateStats ppo_update(SelectorParams& sp, const CandidatePool& pool, const Trajectory& traj,
                       const PpoConfig& cfg) {
    check_trajectory(traj, pool.size());
    if (cfg.epsilon <= 0.0) throw ConfigError("ppo_update: epsilon must be positive");
    if (cfg.update_epochs == 0) throw ConfigError("ppo_update: update_epochs must be positive");

    UpdateStats stats;
    for (std::size_t e = 0; e < cfg.update_epochs; ++e) {
        Tape t;
        t.register_params(sp.params);
        const Tape::NodeId loss =
            build_ppo_loss(t, pool, sp.cfg, traj, cfg.epsilon, cfg.value_loss_weight);
        const double loss_value = t.value(loss)(0, 0);
        if (!std::isfinite(loss_value)) throw NumericError("ppo_update: non-finite loss");
        if (e == 0) stats.first_loss = loss_value;
        stats.last_loss = loss_value;
        t.backward(loss);
        sgd_step(sp.params, t, cfg.learning_rate);
    }
    return stats;
}

UpdateStats reinforce_update(SelectorParams& sp, const CandidatePool& pool,
                             const Trajectory& traj, double learning_rate) {
    check_trajectory(traj, pool.size());

    double baseline = 0.0;
    for (double v : traj.values) baseline += v;
    baseline /= static_cast<double>(traj.values.size());
    const double coef = traj.reward - baseline;

    Tape t;
    t.register_params(sp.params);
    const ForwardNodes fw = build_forward(t, pool, sp.cfg);
    const Tape::NodeId new_lp = t.pick_log(fw.action_probs, traj.actions);
    const Tape::NodeId loss = t.scale(t.mean_all(new_lp), -coef);
    const double loss_value = t.value(loss)(0, 0);
    if (!std::isfinite(loss_value)) throw NumericError("reinforce_update: non-finite loss");
    t.backward(loss);
    sgd_step(sp.params, t, learning_rate);
    return UpdateStats{loss_value, loss_value};
}

}  // namespace spot
