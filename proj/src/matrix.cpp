#include "lmfs/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lmfs {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw ShapeError("Matrix initializer rows have unequal lengths");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) throw ShapeError("Matrix += shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) throw ShapeError("Matrix -= shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) oi[j] += aik * bk[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* in = m.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) o[j] /= sum;
    }
    return out;
}

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double eps) {
    if (eps <= 0.0) throw UsageError("finite_diff_grad: eps must be positive");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + eps;
        const double fp = f(x);
        x[i] = xi - eps;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: non-finite function value at component " +
                               std::to_string(i));
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double l2_norm(const double* v, std::size_t n) { return std::sqrt(dot(v, v, n)); }

Matrix normalize_rows(const Matrix& m, double min_norm, const char* who) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double norm = l2_norm(m.row(i), m.cols());
        if (norm < min_norm)
            throw NumericError(std::string(who) + ": row " + std::to_string(i) +
                               " has near-zero norm " + std::to_string(norm));
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) / norm;
    }
    return out;
}

Matrix normalize_rows_backward(const Matrix& raw, const Matrix& grad_unit) {
    if (!raw.same_shape(grad_unit))
        throw ShapeError("normalize_rows_backward: gradient shape does not match input");
    Matrix out(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const double norm = l2_norm(raw.row(i), raw.cols());
        const double proj = dot(grad_unit.row(i), raw.row(i), raw.cols()) / (norm * norm);
        for (std::size_t j = 0; j < raw.cols(); ++j)
            out(i, j) = (grad_unit(i, j) - proj * raw(i, j)) / norm;
    }
    return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols())
        throw ShapeError("vstack: column counts differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

}  // namespace lmfs
