#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

#include "lmfs/errors.hpp"

namespace lmfs {

/// Dense row-major matrix of doubles. The only storage type in the library;
/// vectors are n x 1 or handled as std::vector<double> where more natural.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// Standard product, a.cols must equal b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Row-wise softmax with max-subtraction; each output row sums to 1.
Matrix softmax_rows(const Matrix& m);

/// Scales every row to unit L2 norm. Throws NumericError when a row norm
/// falls below min_norm; `who` prefixes the error message.
Matrix normalize_rows(const Matrix& m, double min_norm = 1e-12,
                      const char* who = "normalize_rows");

/// Back-propagates through normalize_rows: given the raw input and the
/// gradient with respect to the unit rows, returns the gradient with respect
/// to the raw rows ((g - (g.u)u) / |x| per row, u = x/|x|).
Matrix normalize_rows_backward(const Matrix& raw, const Matrix& grad_unit);

/// Rows of `a` followed by rows of `b`; column counts must match, except that
/// a matrix with zero rows adopts the other's width.
Matrix vstack(const Matrix& a, const Matrix& b);

/// Central-difference gradient of a scalar function of a flat vector.
/// Component i is (f(x + eps*e_i) - f(x - eps*e_i)) / (2 eps).
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps = 1e-5);

double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
double l2_norm(const double* v, std::size_t n);

}  // namespace lmfs
