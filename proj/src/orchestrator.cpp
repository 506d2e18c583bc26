#include "spot/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spot/errors.hpp"

namespace spot {

namespace {

// Stage tags for per-episode substreams.
enum Stage : std::uint64_t {
    kStageGenerate = 10,
    kStageSample = 11,
    kStageClassifier = 12,
    kStageRandomKeep = 13,
    kStageEvalGenSeen = 20,
    kStageEvalGenUnseen = 21,
    kStageEvalSampleSeen = 22,
    kStageEvalSampleUnseen = 23,
    kStageEvalRandomKeep = 24,
    kStageEvalZslClassifier = 25,
    kStageEvalGzslClassifier = 26,
};

GeneratorSpec generator_spec(const ExperimentConfig& cfg, const GzslDataset& dataset) {
    GeneratorSpec spec;
    spec.feature_dim = dataset.features.cols;
    spec.noise_scale = cfg.gen_noise_scale;
    spec.corruption_rate = cfg.gen_corruption_rate;
    spec.corruption_mode = cfg.gen_corruption_mode;
    spec.seed = cfg.seed;
    spec.decoy_attributes = dataset.attributes;
    return spec;
}

std::vector<AttributeVector> attributes_for(const GzslDataset& dataset,
                                            const std::vector<int>& classes) {
    std::vector<AttributeVector> out;
    out.reserve(classes.size());
    for (int c : classes) out.push_back(dataset.attribute_for(c));
    return out;
}

ActionVector all_keep_actions(const CandidatePool& pool,
                              const ForwardResult* fw /* may be null */) {
    ActionVector av;
    const std::size_t n = pool.size();
    av.actions.assign(n, 1);
    av.log_probs.assign(n, 0.0);
    av.values.assign(n, 0.0);
    if (fw != nullptr) {
        for (std::size_t i = 0; i < n; ++i) {
            av.log_probs[i] = std::log(fw->action_probs(i, 1));
            av.values[i] = fw->values[i];
        }
    }
    return av;
}

/// Selection under the configured mode. Returns the action vector (empty for
/// bypass, where the pool passes through untouched).
std::optional<ActionVector> select_actions(const ExperimentConfig& cfg,
                                           const SelectorParams& selector,
                                           const CandidatePool& pool, Rng& sample_rng,
                                           Rng& random_rng) {
    switch (cfg.selection) {
        case SelectionMode::policy: {
            const ForwardResult fw = selector_forward(pool, selector);
            ActionVector av = sample_actions(fw.action_probs, sample_rng);
            av.values = fw.values;
            return av;
        }
        case SelectionMode::all_keep: {
            const ForwardResult fw = selector_forward(pool, selector);
            return all_keep_actions(pool, &fw);
        }
        case SelectionMode::bypass:
            return std::nullopt;
        case SelectionMode::random_rate: {
            ActionVector av;
            av.actions.resize(pool.size());
            av.log_probs.assign(pool.size(), 0.0);
            av.values.assign(pool.size(), 0.0);
            for (std::size_t i = 0; i < pool.size(); ++i)
                av.actions[i] = random_rng.uniform01() < cfg.random_keep_rate ? 1 : 0;
            return av;
        }
        case SelectionMode::oracle: {
            if (pool.corrupted.empty())
                throw InputError("oracle selection requires corruption ground truth");
            ActionVector av;
            av.actions.resize(pool.size());
            av.log_probs.assign(pool.size(), 0.0);
            av.values.assign(pool.size(), 0.0);
            for (std::size_t i = 0; i < pool.size(); ++i)
                av.actions[i] = pool.corrupted[i] ? 0 : 1;
            return av;
        }
    }
    throw StateError("invalid selection mode");
}

struct Assembled {
    Matrix features;
    std::vector<int> labels;
};

Assembled concat_training_data(const Matrix& real_features, const std::vector<int>& real_labels,
                               const std::vector<const CandidatePool*>& synthetic) {
    std::size_t rows = real_features.rows;
    std::size_t cols = real_features.cols;
    for (const CandidatePool* pool : synthetic) {
        rows += pool->features.rows;
        if (pool->features.rows > 0) cols = pool->features.cols;
    }
    Assembled out;
    out.features = Matrix(rows, cols);
    out.labels.reserve(rows);
    std::size_t row = 0;
    for (std::size_t i = 0; i < real_features.rows; ++i, ++row) {
        for (std::size_t j = 0; j < cols; ++j) out.features(row, j) = real_features(i, j);
        out.labels.push_back(real_labels[i]);
    }
    for (const CandidatePool* pool : synthetic) {
        for (std::size_t i = 0; i < pool->features.rows; ++i, ++row) {
            for (std::size_t j = 0; j < cols; ++j) out.features(row, j) = pool->features(i, j);
            out.labels.push_back(pool->class_labels[i]);
        }
    }
    return out;
}

void selection_quality(const CandidatePool& pool, const CandidatePool& selected,
                       double& precision, double& recall) {
    precision = 0.0;
    recall = 0.0;
    if (pool.corrupted.empty()) return;
    std::size_t clean_total = 0;
    for (std::uint8_t c : pool.corrupted)
        if (!c) ++clean_total;
    std::size_t clean_kept = 0;
    for (std::size_t i = 0; i < selected.size(); ++i)
        if (!selected.corrupted[i]) ++clean_kept;
    if (selected.size() > 0)
        precision = static_cast<double>(clean_kept) / static_cast<double>(selected.size());
    if (clean_total > 0)
        recall = static_cast<double>(clean_kept) / static_cast<double>(clean_total);
}

}  // namespace

GzslDataset resolve_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
    return make_benchmark(cfg.benchmark);
}

TrainState make_state(const ExperimentConfig& cfg, GzslDataset dataset, std::uint64_t run_seed) {
    validate(cfg);
    validate_dataset(dataset);

    TrainState state;
    state.cfg = cfg;
    state.cfg.seed = run_seed;
    state.dataset = std::move(dataset);

    Rng split_rng(Rng::derive(run_seed, 1));
    state.split = make_split(state.dataset, cfg.unseen_fraction, cfg.val_fraction, split_rng,
                             cfg.exclude_classes);

    SelectorConfig sel_cfg = cfg.selector;
    sel_cfg.feature_dim = state.dataset.features.cols;
    Rng init_rng(Rng::derive(run_seed, 2));
    state.selector = init_selector(sel_cfg, init_rng);

    state.tracker.alpha = cfg.ppo.alpha;
    state.master_rng = Rng(Rng::derive(run_seed, 3));
    state.best_q_hat = -std::numeric_limits<double>::infinity();
    return state;
}

EpisodeLog run_episode(TrainState& state) {
    const ExperimentConfig& cfg = state.cfg;
    const std::uint64_t episode_seed = state.master_rng.next_u64();
    state.t += 1;

    Rng gen_rng(Rng::derive(episode_seed, kStageGenerate));
    Rng sample_rng(Rng::derive(episode_seed, kStageSample));
    Rng clf_rng(Rng::derive(episode_seed, kStageClassifier));
    Rng random_rng(Rng::derive(episode_seed, kStageRandomKeep));

    const GeneratorSpec spec = generator_spec(cfg, state.dataset);
    const CandidatePool pool =
        generate_pool(spec, attributes_for(state.dataset, state.split.seen_classes),
                      state.dataset.projection, cfg.gen_per_class, gen_rng);

    const std::optional<ActionVector> actions =
        select_actions(cfg, state.selector, pool, sample_rng, random_rng);
    const CandidatePool selected = actions ? apply_selection(pool, *actions) : pool;

    const Matrix real_train = gather_rows(state.dataset.features, state.split.train_idx);
    const std::vector<int> real_train_labels =
        gather_labels(state.dataset.labels, state.split.train_idx);
    const Assembled train = concat_training_data(real_train, real_train_labels, {&selected});

    const Matrix val_features = gather_rows(state.dataset.features, state.split.val_idx);
    const std::vector<int> val_labels = gather_labels(state.dataset.labels, state.split.val_idx);

    const TrainReport report =
        train_classifier(train.features, train.labels, val_features, val_labels,
                         cfg.classifier.epochs, cfg.classifier.learning_rate, clf_rng);

    state.tracker.begin_episode();
    for (double acc : report.per_epoch_val_acc) state.tracker.record_epoch(acc);
    const double q = q_value(state.tracker, state.t, cfg.ppo.reward_window);
    const double q_hat = ema_reward(state.tracker, state.t, q);

    EpisodeLog log;
    log.t = state.t;
    log.pool_size = pool.size();
    log.selected_count = selected.size();
    log.q_raw = q;
    log.q_hat = q_hat;
    selection_quality(pool, selected, log.precision, log.recall);

    const bool trainable = actions.has_value() && (cfg.selection == SelectionMode::policy ||
                                                   cfg.selection == SelectionMode::all_keep);
    if (trainable && cfg.algorithm != RlAlgorithm::none) {
        Trajectory traj;
        traj.old_log_probs = actions->log_probs;
        traj.actions = actions->actions;
        traj.values = actions->values;
        traj.reward = q_hat;
        const UpdateStats stats =
            cfg.algorithm == RlAlgorithm::ppo
                ? ppo_update(state.selector, pool, traj, cfg.ppo)
                : reinforce_update(state.selector, pool, traj, cfg.ppo.learning_rate);
        log.loss = stats.first_loss;
    }

    state.logs.push_back(log);
    return log;
}

void run_training(TrainState& state, const CheckpointHook& on_checkpoint) {
    while (state.t < state.cfg.max_episodes) {
        const EpisodeLog log = run_episode(state);
        if (!state.has_best || log.q_hat > state.best_q_hat) {
            state.best_q_hat = log.q_hat;
            state.has_best = true;
            state.stale_count = 0;
        } else {
            state.stale_count += 1;
        }
        if (on_checkpoint && state.cfg.checkpoint_every > 0 &&
            state.t % state.cfg.checkpoint_every == 0)
            on_checkpoint(state);
        if (state.stale_count >= state.cfg.patience) break;
    }
}

FinalMetrics final_evaluation(TrainState& state) {
    const ExperimentConfig& cfg = state.cfg;
    const std::uint64_t eval_seed = state.master_rng.next_u64();

    const GeneratorSpec spec = generator_spec(cfg, state.dataset);
    FinalMetrics metrics;
    metrics.final_q_hat =
        state.tracker.ema_state.empty() ? 0.0 : state.tracker.ema_state.back();

    const auto select_pool = [&](const CandidatePool& pool, Stage sample_stage,
                                 Rng& random_rng) -> CandidatePool {
        switch (cfg.selection) {
            case SelectionMode::policy: {
                const ForwardResult fw = selector_forward(pool, state.selector);
                Rng sample_rng(Rng::derive(eval_seed, sample_stage));
                ActionVector av = sample_actions(fw.action_probs, sample_rng);
                av.values = fw.values;
                return apply_selection(pool, av);
            }
            case SelectionMode::all_keep:
            case SelectionMode::bypass:
                return pool;
            case SelectionMode::random_rate: {
                ActionVector av;
                av.actions.resize(pool.size());
                av.log_probs.assign(pool.size(), 0.0);
                av.values.assign(pool.size(), 0.0);
                for (std::size_t i = 0; i < pool.size(); ++i)
                    av.actions[i] = random_rng.uniform01() < cfg.random_keep_rate ? 1 : 0;
                return apply_selection(pool, av);
            }
            case SelectionMode::oracle: {
                ActionVector av;
                av.actions.resize(pool.size());
                av.log_probs.assign(pool.size(), 0.0);
                av.values.assign(pool.size(), 0.0);
                for (std::size_t i = 0; i < pool.size(); ++i)
                    av.actions[i] = pool.corrupted[i] ? 0 : 1;
                return apply_selection(pool, av);
            }
        }
        throw StateError("invalid selection mode");
    };

    // The empty-selection fallback carves one class's candidates out of the
    // shared pool without touching the other classes' selections.
    const auto build_selected = [&](const std::vector<int>& classes, Stage gen_stage,
                                    Stage sample_stage, bool fallback_on_empty,
                                    std::size_t& generated, std::size_t& kept) {
        Rng gen_rng(Rng::derive(eval_seed, gen_stage));
        Rng random_rng(Rng::derive(eval_seed, kStageEvalRandomKeep + 100 * gen_stage));
        const CandidatePool pool =
            generate_pool(spec, attributes_for(state.dataset, classes),
                          state.dataset.projection, cfg.gen_per_class, gen_rng);
        CandidatePool selected = select_pool(pool, sample_stage, random_rng);
        generated += pool.size();
        kept += selected.size();
        if (fallback_on_empty) {
            for (int c : classes) {
                const bool empty = std::none_of(selected.class_labels.begin(),
                                                selected.class_labels.end(),
                                                [c](int l) { return l == c; });
                if (!empty) continue;
                metrics.warnings.push_back("class " + std::to_string(c) +
                                           ": selection empty, falling back to full pool");
                ActionVector av;
                av.actions.resize(pool.size());
                av.log_probs.assign(pool.size(), 0.0);
                av.values.assign(pool.size(), 0.0);
                for (std::size_t i = 0; i < pool.size(); ++i)
                    av.actions[i] = pool.class_labels[i] == c ? 1 : 0;
                const CandidatePool cls_pool = apply_selection(pool, av);
                std::vector<const CandidatePool*> parts{&selected, &cls_pool};
                const Assembled merged = concat_training_data(Matrix(0, pool.features.cols), {},
                                                              parts);
                CandidatePool rebuilt;
                rebuilt.features = merged.features;
                rebuilt.class_labels = merged.labels;
                rebuilt.generation_index.resize(merged.labels.size());
                for (std::size_t i = 0; i < rebuilt.generation_index.size(); ++i)
                    rebuilt.generation_index[i] = i;
                selected = std::move(rebuilt);
                kept += cls_pool.size();
            }
        }
        return selected;
    };

    std::size_t generated = 0, kept = 0;
    const CandidatePool selected_seen =
        build_selected(state.split.seen_classes, kStageEvalGenSeen, kStageEvalSampleSeen,
                       false, generated, kept);
    const CandidatePool selected_unseen =
        build_selected(state.split.unseen_classes, kStageEvalGenUnseen, kStageEvalSampleUnseen,
                       true, generated, kept);
    metrics.keep_rate =
        generated == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(generated);

    // Unseen-only classifier, trained purely on selected synthetic features.
    {
        Rng clf_rng(Rng::derive(eval_seed, kStageEvalZslClassifier));
        const Assembled zsl_train = concat_training_data(
            Matrix(0, state.dataset.features.cols), {}, {&selected_unseen});
        const TrainReport report =
            train_classifier(zsl_train.features, zsl_train.labels, Matrix(), {},
                             cfg.classifier.epochs, cfg.classifier.learning_rate, clf_rng);
        metrics.zsl = evaluate_zsl(report.final_params, state.dataset, state.split);
    }

    // Joint classifier over seen and unseen classes.
    {
        Rng clf_rng(Rng::derive(eval_seed, kStageEvalGzslClassifier));
        const Matrix real_train = gather_rows(state.dataset.features, state.split.train_idx);
        const std::vector<int> real_labels =
            gather_labels(state.dataset.labels, state.split.train_idx);
        const Assembled train =
            concat_training_data(real_train, real_labels, {&selected_seen, &selected_unseen});
        const TrainReport report =
            train_classifier(train.features, train.labels, Matrix(), {}, cfg.classifier.epochs,
                             cfg.classifier.learning_rate, clf_rng);
        metrics.gzsl = evaluate_gzsl(report.final_params, state.dataset, state.split);
    }
    return metrics;
}

Checkpoint to_checkpoint(const TrainState& state) {
    Checkpoint ckpt;
    ckpt.selector_cfg = state.selector.cfg;
    ckpt.selector_params = state.selector.params;
    ckpt.alpha = state.tracker.alpha;
    ckpt.ema_state = state.tracker.ema_state;
    ckpt.episodes_done = state.t;
    ckpt.best_q_hat = state.has_best ? state.best_q_hat : 0.0;
    ckpt.stale_count = state.stale_count;
    ckpt.rng_state = state.master_rng.serialize();
    ckpt.config_snapshot = canonical_text(state.cfg);
    return ckpt;
}

TrainState from_checkpoint(const Checkpoint& ckpt, GzslDataset dataset) {
    const ExperimentConfig cfg = parse_config_text(ckpt.config_snapshot, "checkpoint config");
    TrainState state = make_state(cfg, std::move(dataset), cfg.seed);
    state.selector.cfg = ckpt.selector_cfg;
    state.selector.params = ckpt.selector_params;
    state.tracker.alpha = ckpt.alpha;
    state.tracker.ema_state = ckpt.ema_state;
    state.t = ckpt.episodes_done;
    state.best_q_hat = ckpt.best_q_hat;
    state.has_best = !ckpt.ema_state.empty();
    state.stale_count = ckpt.stale_count;
    state.master_rng = Rng::deserialize(ckpt.rng_state);
    return state;
}

SuiteSummary summarize_runs(std::vector<RunResult> runs) {
    if (runs.empty()) throw InputError("summarize_runs: no runs");
    std::vector<double> zsl, seen, unseen, harmonic, final_q;
    for (const RunResult& run : runs) {
        zsl.push_back(run.metrics.zsl);
        seen.push_back(run.metrics.gzsl.seen);
        unseen.push_back(run.metrics.gzsl.unseen);
        harmonic.push_back(run.metrics.gzsl.harmonic);
        final_q.push_back(run.metrics.final_q_hat);
    }
    SuiteSummary suite;
    suite.runs = std::move(runs);
    suite.zsl = mean_std(zsl);
    suite.seen = mean_std(seen);
    suite.unseen = mean_std(unseen);
    suite.harmonic = mean_std(harmonic);
    suite.final_q = mean_std(final_q);
    return suite;
}

SuiteSummary run_experiment_suite(const ExperimentConfig& cfg, std::size_t n_runs) {
    if (n_runs == 0) throw ConfigError("run_experiment_suite: n_runs must be positive");
    const GzslDataset dataset = resolve_dataset(cfg);

    std::vector<RunResult> runs;
    for (std::size_t r = 0; r < n_runs; ++r) {
        const std::uint64_t run_seed = cfg.seed + r;
        try {
            TrainState state = make_state(cfg, dataset, run_seed);
            run_training(state);
            RunResult result;
            result.seed = run_seed;
            result.metrics = final_evaluation(state);
            result.logs = state.logs;
            runs.push_back(std::move(result));
        } catch (const std::exception& e) {
            throw SuiteError("run with seed " + std::to_string(run_seed) + " failed: " + e.what(),
                             run_seed);
        }
    }
    return summarize_runs(std::move(runs));
}

std::vector<MetricRow> suite_report_rows(const ExperimentConfig& cfg, const SuiteSummary& suite,
                                         const std::string& model_name) {
    const std::string hash = config_hash(cfg);
    std::vector<MetricRow> rows;
    for (const RunResult& run : suite.runs) {
        MetricRow row;
        row.model = model_name;
        row.seed = run.seed;
        row.config_hash = hash;
        row.values = {{"S", run.metrics.gzsl.seen * 100.0},
                      {"U", run.metrics.gzsl.unseen * 100.0},
                      {"H", run.metrics.gzsl.harmonic * 100.0},
                      {"ZSL", run.metrics.zsl * 100.0},
                      {"Qhat", run.metrics.final_q_hat}};
        rows.push_back(std::move(row));
    }
    MetricRow mean_row;
    mean_row.model = model_name + " (mean)";
    mean_row.seed = cfg.seed;
    mean_row.config_hash = hash;
    mean_row.values = {{"S", suite.seen.mean * 100.0},      {"S_std", suite.seen.std * 100.0},
                       {"U", suite.unseen.mean * 100.0},    {"U_std", suite.unseen.std * 100.0},
                       {"H", suite.harmonic.mean * 100.0},  {"H_std", suite.harmonic.std * 100.0},
                       {"ZSL", suite.zsl.mean * 100.0},     {"ZSL_std", suite.zsl.std * 100.0},
                       {"Qhat", suite.final_q.mean},        {"Qhat_std", suite.final_q.std}};
    rows.push_back(std::move(mean_row));
    return rows;
}

std::vector<MetricRow> episode_report_rows(const ExperimentConfig& cfg, const RunResult& run) {
    const std::string hash = config_hash(cfg);
    std::vector<MetricRow> rows;
    for (const EpisodeLog& log : run.logs) {
        MetricRow row;
        row.model = "episode " + std::to_string(log.t);
        row.seed = run.seed;
        row.config_hash = hash;
        row.values = {{"pool", static_cast<double>(log.pool_size)},
                      {"selected", static_cast<double>(log.selected_count)},
                      {"Q", log.q_raw},
                      {"Qhat", log.q_hat},
                      {"loss", log.loss},
                      {"precision", log.precision},
                      {"recall", log.recall}};
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace spot
