#include "spot/gzsl_eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spot/errors.hpp"

namespace spot {

const AttributeVector& GzslDataset::attribute_for(int class_id) const {
    for (const auto& attr : attributes)
        if (attr.class_id == class_id) return attr;
    throw IndexError("dataset: no attribute vector for class " + std::to_string(class_id));
}

void validate_dataset(const GzslDataset& dataset) {
    if (dataset.features.rows != dataset.labels.size())
        throw ShapeError("dataset: feature/label count mismatch");
    for (int label : dataset.labels) dataset.attribute_for(label);
    if (dataset.projection.cols != dataset.features.cols)
        throw ShapeError("dataset: projection does not map into the feature space");
}

SplitSpec make_split(const GzslDataset& dataset, double unseen_fraction, double val_fraction,
                     Rng& rng, const std::vector<int>& excluded) {
    if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0))
        throw ConfigError("make_split: unseen_fraction must lie in (0,1)");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("make_split: val_fraction must lie in (0,1)");
    validate_dataset(dataset);

    std::set<int> class_set(dataset.labels.begin(), dataset.labels.end());
    for (int c : excluded) class_set.erase(c);
    std::vector<int> classes(class_set.begin(), class_set.end());
    if (classes.size() < 2) throw ConfigError("make_split: need at least two usable classes");

    // Class-level partition.
    std::vector<int> shuffled = classes;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    const auto n_unseen = static_cast<std::size_t>(
        std::llround(unseen_fraction * static_cast<double>(classes.size())));
    if (n_unseen == 0 || n_unseen >= classes.size())
        throw ConfigError("make_split: unseen_fraction leaves no seen or no unseen classes");

    SplitSpec split;
    split.unseen_classes.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(n_unseen));
    split.seen_classes.assign(shuffled.begin() + static_cast<long>(n_unseen), shuffled.end());
    std::sort(split.unseen_classes.begin(), split.unseen_classes.end());
    std::sort(split.seen_classes.begin(), split.seen_classes.end());

    const auto is_unseen = [&](int c) {
        return std::binary_search(split.unseen_classes.begin(), split.unseen_classes.end(), c);
    };
    const auto is_excluded = [&](int c) { return class_set.count(c) == 0; };

    // Sample-level partition within each seen class.
    for (int c : split.seen_classes) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < dataset.labels.size(); ++i)
            if (dataset.labels[i] == c) idx.push_back(i);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        const auto slice = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(idx.size())));
        const std::size_t n_val = std::max<std::size_t>(1, slice);
        const std::size_t n_test = std::max<std::size_t>(1, slice);
        if (idx.size() < n_val + n_test + 1)
            throw ConfigError("make_split: class " + std::to_string(c) +
                              " has too few samples for the requested fractions");
        split.val_idx.insert(split.val_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
        split.test_idx.insert(split.test_idx.end(), idx.begin() + static_cast<long>(n_val),
                              idx.begin() + static_cast<long>(n_val + n_test));
        split.train_idx.insert(split.train_idx.end(),
                               idx.begin() + static_cast<long>(n_val + n_test), idx.end());
    }

    // All unseen-class samples go to test.
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        if (is_excluded(dataset.labels[i])) continue;
        if (is_unseen(dataset.labels[i])) split.test_idx.push_back(i);
    }

    std::sort(split.train_idx.begin(), split.train_idx.end());
    std::sort(split.val_idx.begin(), split.val_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

double harmonic_mean(double s, double u) {
    if (s < 0.0 || u < 0.0) throw InputError("harmonic_mean: accuracies must be nonnegative");
    if (s == 0.0 && u == 0.0) return 0.0;
    return 2.0 * s * u / (s + u);
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= m.rows) throw IndexError("gather_rows: row index out of range");
        for (std::size_t j = 0; j < m.cols; ++j) out(r, j) = m(idx[r], j);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        if (i >= labels.size()) throw IndexError("gather_labels: index out of range");
        out.push_back(labels[i]);
    }
    return out;
}

std::vector<std::size_t> indices_of_classes(const std::vector<int>& labels,
                                            const std::vector<std::size_t>& subset,
                                            const std::vector<int>& classes) {
    std::vector<std::size_t> out;
    for (std::size_t i : subset)
        if (std::binary_search(classes.begin(), classes.end(), labels[i])) out.push_back(i);
    return out;
}

double evaluate_zsl(const ClassifierParams& params, const GzslDataset& dataset,
                    const SplitSpec& split) {
    if (params.class_list != split.unseen_classes)
        throw InputError("evaluate_zsl: classifier classes must equal the unseen classes");
    const std::vector<std::size_t> idx =
        indices_of_classes(dataset.labels, split.test_idx, split.unseen_classes);
    if (idx.empty()) throw InputError("evaluate_zsl: no unseen-class test samples");
    return per_class_accuracy(params, gather_rows(dataset.features, idx),
                              gather_labels(dataset.labels, idx))
        .mean;
}

GzslMetrics evaluate_gzsl(const ClassifierParams& params, const GzslDataset& dataset,
                          const SplitSpec& split) {
    for (std::size_t i : split.test_idx)
        if (!std::binary_search(params.class_list.begin(), params.class_list.end(),
                                dataset.labels[i]))
            throw InputError("evaluate_gzsl: classifier does not cover test class " +
                             std::to_string(dataset.labels[i]));

    const Matrix test_features = gather_rows(dataset.features, split.test_idx);
    const std::vector<int> test_labels = gather_labels(dataset.labels, split.test_idx);
    const PerClassAccuracy acc = per_class_accuracy(params, test_features, test_labels);

    const auto mean_over = [&](const std::vector<int>& classes) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t c = 0; c < params.class_list.size(); ++c) {
            if (!acc.present[c]) continue;
            if (!std::binary_search(classes.begin(), classes.end(), params.class_list[c]))
                continue;
            sum += acc.per_class[c];
            ++count;
        }
        return count == 0 ? 0.0 : sum / static_cast<double>(count);
    };

    GzslMetrics metrics;
    metrics.seen = mean_over(split.seen_classes);
    metrics.unseen = mean_over(split.unseen_classes);
    metrics.harmonic = harmonic_mean(metrics.seen, metrics.unseen);
    return metrics;
}

MeanStd mean_std(const std::vector<double>& xs) {
    if (xs.empty()) throw InputError("mean_std: empty sample");
    MeanStd out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() == 1) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return out;
}

}  // namespace spot
