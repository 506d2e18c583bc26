#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spot/config.hpp"
#include "spot/data_io.hpp"

namespace spot {

struct EpisodeLog {
    std::size_t t = 0;
    std::size_t pool_size = 0;
    std::size_t selected_count = 0;
    double q_raw = 0.0;
    double q_hat = 0.0;
    double loss = 0.0;
    double precision = 0.0;  // kept-and-clean / kept
    double recall = 0.0;     // kept-and-clean / clean
};

/// Everything one training run owns. The master rng issues one seed per
/// episode; every stage inside an episode draws from its own derived
/// substream, so stages cannot perturb each other's randomness.
struct TrainState {
    ExperimentConfig cfg;
    GzslDataset dataset;
    SplitSpec split;
    SelectorParams selector;
    RewardTracker tracker;
    Rng master_rng{0};
    std::uint64_t t = 0;
    double best_q_hat = 0.0;
    bool has_best = false;
    std::uint64_t stale_count = 0;
    std::vector<EpisodeLog> logs;
};

TrainState make_state(const ExperimentConfig& cfg, GzslDataset dataset, std::uint64_t run_seed);

/// One pipeline cycle: generate, select, train classifier, reward, policy
/// update. Returns the episode log and advances the state.
EpisodeLog run_episode(TrainState& state);

using CheckpointHook = std::function<void(const TrainState&)>;

/// Loops run_episode until max_episodes, or until `patience` consecutive
/// episodes pass without improvement of the smoothed reward.
void run_training(TrainState& state, const CheckpointHook& on_checkpoint = {});

struct FinalMetrics {
    double zsl = 0.0;
    GzslMetrics gzsl;
    double final_q_hat = 0.0;
    double keep_rate = 0.0;  // selected / generated over both evaluation pools
    std::vector<std::string> warnings;
};

/// Freezes the selector, generates evaluation pools for seen and unseen
/// classes, selects, trains the unseen-only and the joint classifiers, and
/// scores them. An unseen class whose selection comes back empty falls back
/// to its full pool (logged as a warning).
FinalMetrics final_evaluation(TrainState& state);

Checkpoint to_checkpoint(const TrainState& state);
TrainState from_checkpoint(const Checkpoint& ckpt, GzslDataset dataset);

struct RunResult {
    std::uint64_t seed = 0;
    FinalMetrics metrics;
    std::vector<EpisodeLog> logs;
};

struct SuiteSummary {
    std::vector<RunResult> runs;
    MeanStd zsl, seen, unseen, harmonic, final_q;
};

SuiteSummary summarize_runs(std::vector<RunResult> runs);

/// Repeats the full pipeline with seeds cfg.seed + 0 .. + n_runs-1 on a
/// shared dataset. A failing run raises SuiteError carrying its seed.
SuiteSummary run_experiment_suite(const ExperimentConfig& cfg, std::size_t n_runs);

/// Dataset resolution shared by the CLI and the suite: load from
/// cfg.dataset_path when set, otherwise build the benchmark from cfg.
GzslDataset resolve_dataset(const ExperimentConfig& cfg);

std::vector<MetricRow> suite_report_rows(const ExperimentConfig& cfg, const SuiteSummary& suite,
                                         const std::string& model_name);
std::vector<MetricRow> episode_report_rows(const ExperimentConfig& cfg, const RunResult& run);

}  // namespace spot
