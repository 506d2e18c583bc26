#pragma once

#include <vector>

#include "spot/classifier.hpp"
#include "spot/generator.hpp"

namespace spot {

/// Labeled feature dataset plus the class embedding side information.
/// projection is the attribute-to-feature map shared with the toy generator
/// so real and synthetic features live on the same manifold.
struct GzslDataset {
    Matrix features;                          // n x feature_dim
    std::vector<int> labels;                  // n
    std::vector<AttributeVector> attributes;  // one per class
    Matrix projection;                        // d_attr x feature_dim

    std::size_t size() const { return features.rows; }
    const AttributeVector& attribute_for(int class_id) const;
};

void validate_dataset(const GzslDataset& dataset);

/// Class-level seen/unseen partition plus sample-level partitions. train and
/// validation hold seen-class samples only; test holds held-out seen-class
/// samples and every unseen-class sample.
struct SplitSpec {
    std::vector<int> seen_classes;
    std::vector<int> unseen_classes;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    std::vector<std::size_t> test_idx;
};

/// Deterministic given the rng. `excluded` classes are dropped entirely
/// before splitting (overlap filtering reduces to this at desk scale).
/// Seen-class samples give one val_fraction slice to validation and one to
/// test; the remainder trains.
SplitSpec make_split(const GzslDataset& dataset, double unseen_fraction, double val_fraction,
                     Rng& rng, const std::vector<int>& excluded = {});

/// 2su/(s+u); defined as 0 when both are 0.
double harmonic_mean(double s, double u);

/// Mean per-class accuracy over unseen-class test samples. The classifier
/// must cover exactly the unseen classes.
double evaluate_zsl(const ClassifierParams& params, const GzslDataset& dataset,
                    const SplitSpec& split);

struct GzslMetrics {
    double seen = 0.0;
    double unseen = 0.0;
    double harmonic = 0.0;
};

/// S / U / H over the full test partition; the classifier must cover every
/// test class.
GzslMetrics evaluate_gzsl(const ClassifierParams& params, const GzslDataset& dataset,
                          const SplitSpec& split);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // (n-1) denominator; 0 when n == 1
};

MeanStd mean_std(const std::vector<double>& xs);

std::vector<std::size_t> indices_of_classes(const std::vector<int>& labels,
                                            const std::vector<std::size_t>& subset,
                                            const std::vector<int>& classes);

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx);
std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx);

}  // namespace spot
