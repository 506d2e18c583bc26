#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "spot/rng.hpp"

namespace spot {

/// Dense row-major matrix of doubles. The only numeric container in the
/// project; every tensor in the pipeline is 2-D (vectors are n x 1 or 1 x n).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows * cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init);
    static Matrix identity(std::size_t n);
    static Matrix uniform(std::size_t r, std::size_t c, double lo, double hi, Rng& rng);
    static Matrix column(const std::vector<double>& v);  // n x 1

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return rows == 0 || cols == 0; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Matrix& o) const = default;

    std::string shape_str() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

/// Row softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& m);

Matrix relu(const Matrix& m);

/// Mean of -log probs(i, labels[i]). probs rows must sum to 1 within 1e-6.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

/// Throws NumericError if any entry is NaN or infinite.
void check_finite(const Matrix& m, const char* what);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace spot
