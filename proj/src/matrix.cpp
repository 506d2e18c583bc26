#include "spot/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "spot/errors.hpp"

namespace spot {

std::string Matrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Matrix m;
    m.rows = rows_init.size();
    m.cols = rows_init.size() == 0 ? 0 : rows_init.begin()->size();
    m.data.reserve(m.rows * m.cols);
    for (const auto& row : rows_init) {
        if (row.size() != m.cols)
            throw ShapeError("from_rows: ragged row of length " + std::to_string(row.size()) +
                             ", expected " + std::to_string(m.cols));
        m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::uniform(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
    Matrix m(r, c);
    for (double& x : m.data) x = rng.uniform(lo, hi);
    return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    m.data = v;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " times " +
                         b.shape_str());
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[i * a.cols];
        double* orow = &out.data[i * out.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = &b.data[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch, " + a.shape_str() + " vs " +
                         b.shape_str());
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Matrix scale(const Matrix& a, double c) {
    Matrix out = a;
    for (double& x : out.data) x *= c;
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.empty()) throw ShapeError("softmax_rows: empty matrix");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double mx = m(i, 0);
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double e = std::exp(m(i, j) - mx);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) /= sum;
    }
    return out;
}

Matrix relu(const Matrix& m) {
    Matrix out = m;
    for (double& x : out.data) x = std::max(0.0, x);
    return out;
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size())
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         probs.shape_str() + " probabilities");
    if (probs.rows == 0) throw InputError("cross_entropy: empty input");
    for (std::size_t i = 0; i < probs.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols; ++j) sum += probs(i, j);
        if (std::abs(sum - 1.0) > 1e-6)
            throw InputError("cross_entropy: row " + std::to_string(i) + " sums to " +
                             std::to_string(sum) + ", not a distribution");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= probs.cols)
            throw IndexError("cross_entropy: label " + std::to_string(label) +
                             " out of range for " + std::to_string(probs.cols) + " classes");
        total += -std::log(probs(i, static_cast<std::size_t>(label)));
    }
    return total / static_cast<double>(probs.rows);
}

void check_finite(const Matrix& m, const char* what) {
    for (double x : m.data)
        if (!std::isfinite(x))
            throw NumericError(std::string(what) + ": non-finite entry");
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d;
}

}  // namespace spot
