#pragma once

#include <string>
#include <vector>

#include "spot/classifier.hpp"
#include "spot/data_io.hpp"
#include "spot/generator.hpp"
#include "spot/policy_opt.hpp"

namespace spot {

enum class SelectionMode {
    policy,       // selector decides
    all_keep,     // every candidate kept, selector still in the loop
    bypass,       // selector removed from the pipeline entirely
    random_rate,  // keep each candidate independently at random_keep_rate
    oracle,       // keep exactly the uncorrupted candidates
};

SelectionMode selection_mode_from_string(const std::string& s);
std::string to_string(SelectionMode mode);

enum class RlAlgorithm { ppo, reinforce, none };

RlAlgorithm rl_algorithm_from_string(const std::string& s);
std::string to_string(RlAlgorithm algo);

/// Flat key-value experiment configuration. Defaults reproduce the published
/// hyperparameters (epsilon 0.15, alpha 0.5, PPO lr 2e-4, 8 layers, 8 heads).
struct ExperimentConfig {
    BenchmarkSpec benchmark;

    double gen_noise_scale = 0.1;
    double gen_corruption_rate = 0.0;
    CorruptionMode gen_corruption_mode = CorruptionMode::wrong_class_mean;
    std::size_t gen_per_class = 20;

    SelectorConfig selector;  // feature_dim is synced with the dataset at run time

    PpoConfig ppo;
    ClassifierConfig classifier;

    double unseen_fraction = 0.5;
    double val_fraction = 0.2;
    std::vector<int> exclude_classes;

    std::size_t max_episodes = 40;
    std::size_t patience = 3;
    RlAlgorithm algorithm = RlAlgorithm::ppo;
    SelectionMode selection = SelectionMode::policy;
    double random_keep_rate = 0.5;
    std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

    std::size_t n_runs = 1;
    std::uint64_t seed = 7;

    std::string out_dir;
    std::string dataset_path;
    std::string format = "table";
};

ExperimentConfig parse_config_file(const std::string& path);

/// Parses key/value text that may span multiple lines ('#' comments allowed).
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Single flag-style override; throws ConfigError on unknown key or bad value.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

void validate(const ExperimentConfig& cfg);

/// Canonical serialization: every key, sorted, full precision. Two configs
/// with the same canonical text behave identically.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace spot
