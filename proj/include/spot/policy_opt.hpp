#pragma once

#include <cstdint>
#include <vector>

#include "spot/selector.hpp"

namespace spot {

/// Validation-accuracy bookkeeping for the reward signal. val_acc_history
/// holds the current episode's per-epoch classifier accuracies; ema_state
/// holds the smoothed reward indexed by policy timestep (1-based).
struct RewardTracker {
    std::vector<double> val_acc_history;
    double alpha = 0.5;
    std::vector<double> ema_state;

    void begin_episode() { val_acc_history.clear(); }
    void record_epoch(double acc);
};

/// Raw Q at timestep t: max of the last min(window, available) recorded
/// validation accuracies.
double q_value(const RewardTracker& tracker, std::size_t t, std::size_t window = 5);

/// Smoothed reward: t = 1 stores Q directly; t > 1 stores
/// alpha * ema[t-1] + (1 - alpha) * q_t. Returns the stored value.
double ema_reward(RewardTracker& tracker, std::size_t t, double q_t);

std::vector<double> advantage(double q_hat, const std::vector<double>& values);

/// exp(new - old), elementwise over log probs of the same stored actions.
std::vector<double> prob_ratio(const std::vector<double>& new_log_probs,
                               const std::vector<double>& old_log_probs);

/// Per-candidate clipped surrogate: min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv).
double clipped_objective_term(double ratio, double adv, double epsilon);

/// Negated mean of the clipped surrogate (gradient-descent form). The
/// value-head regression term is added separately inside ppo_update, where
/// the current value outputs are available.
double ppo_loss(const std::vector<double>& ratios, const std::vector<double>& advantages,
                double epsilon);

struct PpoConfig {
    double epsilon = 0.15;
    double learning_rate = 2e-4;
    std::size_t update_epochs = 4;
    std::size_t reward_window = 5;
    double alpha = 0.5;
    double value_loss_weight = 0.5;
};

struct Trajectory {
    std::vector<double> old_log_probs;
    std::vector<int> actions;
    std::vector<double> values;  // value-head outputs recorded at sampling time
    double reward = 0.0;         // smoothed Q-hat for this timestep
};

struct UpdateStats {
    double first_loss = 0.0;
    double last_loss = 0.0;
};

/// For update_epochs passes: re-run the selector on the pool, recompute the
/// log probs of the stored actions, apply one gradient-descent step on the
/// clipped surrogate plus the value regression term.
UpdateStats ppo_update(SelectorParams& sp, const CandidatePool& pool, const Trajectory& traj,
                       const PpoConfig& cfg);

/// Single step on -mean(log pi(a_i) * (reward - b)), b = mean of stored values.
UpdateStats reinforce_update(SelectorParams& sp, const CandidatePool& pool,
                             const Trajectory& traj, double learning_rate);

}  // namespace spot
