#pragma once

#include <vector>

#include "spot/tape.hpp"

namespace spot {

/// Linear softmax classifier. weight is feature_dim x C, bias 1 x C, columns
/// aligned with class_list.
struct ClassifierParams {
    Matrix weight;
    Matrix bias;
    std::vector<int> class_list;

    bool operator==(const ClassifierParams& o) const = default;
};

struct ClassifierConfig {
    std::size_t epochs = 30;
    double learning_rate = 0.1;
};

struct TrainReport {
    std::vector<double> per_epoch_val_acc;
    ClassifierParams final_params;
    std::size_t epochs_run = 0;
};

/// Full-batch gradient descent on cross-entropy from a seeded fresh
/// initialization. Validation accuracy (mean per-class) is recorded after
/// every epoch. class_list is the sorted set of training labels.
TrainReport train_classifier(const Matrix& train_features, const std::vector<int>& train_labels,
                             const Matrix& val_features, const std::vector<int>& val_labels,
                             std::size_t epochs, double learning_rate, Rng& rng);

/// softmax(x W + b), rows sum to 1, columns follow class_list.
Matrix predict(const ClassifierParams& params, const Matrix& features);

struct PerClassAccuracy {
    std::vector<double> per_class;  // aligned with class_list; 0 where absent
    std::vector<bool> present;      // class had at least one evaluation sample
    double mean = 0.0;              // unweighted mean over present classes
};

PerClassAccuracy per_class_accuracy(const ClassifierParams& params, const Matrix& features,
                                    const std::vector<int>& labels);

}  // namespace spot
