#include "spot/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spot/errors.hpp"

namespace spot {

namespace {

std::vector<int> column_of(const std::vector<int>& labels, const std::vector<int>& class_list,
                           const char* what) {
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(class_list.begin(), class_list.end(), labels[i]);
        if (it == class_list.end() || *it != labels[i])
            throw IndexError(std::string(what) + ": label " + std::to_string(labels[i]) +
                             " not in class list");
        out[i] = static_cast<int>(it - class_list.begin());
    }
    return out;
}

}  // namespace

TrainReport train_classifier(const Matrix& train_features, const std::vector<int>& train_labels,
                             const Matrix& val_features, const std::vector<int>& val_labels,
                             std::size_t epochs, double learning_rate, Rng& rng) {
    if (train_features.rows == 0) throw InputError("train_classifier: empty training set");
    if (train_features.rows != train_labels.size())
        throw ShapeError("train_classifier: feature/label count mismatch");
    if (val_features.rows != val_labels.size())
        throw ShapeError("train_classifier: validation feature/label count mismatch");
    if (!val_features.empty() && val_features.cols != train_features.cols)
        throw ShapeError("train_classifier: train/validation feature dims disagree");

    const std::set<int> unique(train_labels.begin(), train_labels.end());
    std::vector<int> class_list(unique.begin(), unique.end());
    const std::size_t n_classes = class_list.size();
    const std::size_t dim = train_features.cols;

    const std::vector<int> train_cols = column_of(train_labels, class_list, "train_classifier");

    ClassifierParams params;
    params.class_list = class_list;
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    params.weight = Matrix::uniform(dim, n_classes, -bound, bound, rng);
    params.bias = Matrix(1, n_classes);

    TrainReport report;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        ParamStore ps;
        ps.add("w", params.weight);
        ps.add("b", params.bias);
        Tape t;
        t.register_params(ps);
        const Tape::NodeId x = t.constant(train_features);
        const Tape::NodeId probs =
            t.softmax_rows(t.add_row_vector(t.matmul(x, t.p("w")), t.p("b")));
        const Tape::NodeId loss = t.cross_entropy(probs, train_cols);
        t.backward(loss);
        sgd_step(ps, t, learning_rate);
        params.weight = ps.at("w");
        params.bias = ps.at("b");

        if (val_features.rows > 0)
            report.per_epoch_val_acc.push_back(
                per_class_accuracy(params, val_features, val_labels).mean);
        ++report.epochs_run;
    }
    report.final_params = std::move(params);
    return report;
}

Matrix predict(const ClassifierParams& params, const Matrix& features) {
    if (features.cols != params.weight.rows)
        throw ShapeError("predict: feature dim " + std::to_string(features.cols) +
                         " vs weights " + params.weight.shape_str());
    const Matrix logits = matmul(features, params.weight);
    Matrix shifted = logits;
    for (std::size_t i = 0; i < shifted.rows; ++i)
        for (std::size_t j = 0; j < shifted.cols; ++j) shifted(i, j) += params.bias(0, j);
    Matrix probs = softmax_rows(shifted);
    check_finite(probs, "predict probabilities");
    return probs;
}

PerClassAccuracy per_class_accuracy(const ClassifierParams& params, const Matrix& features,
                                    const std::vector<int>& labels) {
    if (features.rows != labels.size())
        throw ShapeError("per_class_accuracy: feature/label count mismatch");
    const std::vector<int> cols = column_of(labels, params.class_list, "per_class_accuracy");
    const Matrix probs = predict(params, features);

    const std::size_t n_classes = params.class_list.size();
    std::vector<std::size_t> correct(n_classes, 0), total(n_classes, 0);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        std::size_t argmax = 0;
        for (std::size_t j = 1; j < probs.cols; ++j)
            if (probs(i, j) > probs(i, argmax)) argmax = j;
        const auto truth = static_cast<std::size_t>(cols[i]);
        ++total[truth];
        if (argmax == truth) ++correct[truth];
    }

    PerClassAccuracy out;
    out.per_class.assign(n_classes, 0.0);
    out.present.assign(n_classes, false);
    double sum = 0.0;
    std::size_t present_count = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (total[c] == 0) continue;  // absent classes are excluded from the mean
        out.present[c] = true;
        out.per_class[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
        sum += out.per_class[c];
        ++present_count;
    }
    out.mean = present_count == 0 ? 0.0 : sum / static_cast<double>(present_count);
    return out;
}

}  // namespace spot
