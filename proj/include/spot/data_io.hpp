#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spot/gzsl_eval.hpp"
#include "spot/selector.hpp"

namespace spot {

/// Desk-scale synthetic benchmark: unit-norm attribute per class, a random
/// attribute-to-feature projection, Gaussian clusters around the projected
/// means.
struct BenchmarkSpec {
    std::size_t n_classes = 8;
    std::size_t samples_per_class = 30;
    std::size_t feature_dim = 16;
    std::size_t d_attr = 8;
    double intra_class_noise = 0.25;
    double inter_class_separation = 2.0;
    std::uint64_t seed = 1;
};

GzslDataset make_benchmark(const BenchmarkSpec& spec);

/// Delimited text, one sample per row (label then features at 17 significant
/// digits); attributes and projection in companion files `path.attributes`
/// and `path.projection`. Round-trips bitwise.
void save_dataset(const GzslDataset& dataset, const std::string& path);
GzslDataset load_dataset(const std::string& path);

constexpr int kCheckpointVersion = 1;

/// Everything needed to resume a training run mid-way.
struct Checkpoint {
    int format_version = kCheckpointVersion;
    SelectorConfig selector_cfg;
    ParamStore selector_params;
    double alpha = 0.5;
    std::vector<double> ema_state;
    std::uint64_t episodes_done = 0;
    double best_q_hat = 0.0;
    std::uint64_t stale_count = 0;
    std::string rng_state;
    std::string config_snapshot;
    bool has_classifier = false;
    ClassifierParams classifier;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// One report row: a model/arm name plus named metric values, tagged with the
/// run seed and the configuration hash.
struct MetricRow {
    std::string model;
    std::vector<std::pair<std::string, double>> values;
    std::uint64_t seed = 0;
    std::string config_hash;

    bool operator==(const MetricRow& o) const = default;

    double value(const std::string& key) const;
    bool has(const std::string& key) const;
};

enum class ReportFormat { table, records };

ReportFormat report_format_from_string(const std::string& s);

/// Table format: aligned columns; rows carrying S/U/H get the harmonic mean
/// recomputed and are flagged when it disagrees with H beyond 0.05.
/// Records format: one self-describing JSON record per metric value.
void write_report(const std::vector<MetricRow>& rows, const std::string& path,
                  ReportFormat format);
std::string format_table(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_records(const std::string& path);

/// 17-significant-digit decimal rendering; round-trips doubles bitwise.
std::string format_double(double x);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace spot
