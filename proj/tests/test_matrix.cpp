#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lmfs/matrix.hpp"

using namespace lmfs;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(r, c);
    for (double& v : m.storage()) v = dist(rng);
    return m;
}

}  // namespace

TEST_CASE("matmul identity, zero, and hand-expanded product") {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix prod = matmul(Matrix::identity(2), a);
    CHECK(prod(0, 0) == 1);
    CHECK(prod(0, 1) == 2);
    CHECK(prod(1, 0) == 3);
    CHECK(prod(1, 1) == 4);

    const Matrix z = matmul(Matrix(2, 3), Matrix{{1, 2}, {3, 4}, {5, 6}});
    for (double v : z.storage()) CHECK(v == 0.0);

    const Matrix b{{5}, {6}};
    const Matrix ab = matmul(a, b);
    CHECK(ab.rows() == 2);
    CHECK(ab.cols() == 1);
    CHECK(ab(0, 0) == 17);
    CHECK(ab(1, 0) == 39);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST_CASE("matmul is associative on random 3-chains") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix a = random_matrix(rng, 3, 4);
        const Matrix b = random_matrix(rng, 4, 5);
        const Matrix c = random_matrix(rng, 5, 2);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            const double scale = std::max({1.0, std::abs(left.data()[i])});
            CHECK(std::abs(left.data()[i] - right.data()[i]) / scale < 1e-9);
        }
    }
}

TEST_CASE("softmax_rows on symmetric, huge, and hand-evaluated rows") {
    const Matrix sym = softmax_rows(Matrix(1, 3));
    for (std::size_t c = 0; c < 3; ++c) CHECK(sym(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const Matrix big = softmax_rows(Matrix{{1000, 1000}});
    CHECK(big.all_finite());
    CHECK(big(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    const Matrix two = softmax_rows(Matrix{{1, 0}});
    const double e = std::exp(1.0);
    CHECK(two(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-12));
    CHECK(two(0, 1) == doctest::Approx(1 / (e + 1)).epsilon(1e-12));
}

TEST_CASE("softmax_rows rows sum to 1 and ignore per-row shifts") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix m = random_matrix(rng, 4, 6);
        const Matrix p = softmax_rows(m);
        Matrix shifted = m;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double sum = 0.0;
            const double c = shift(rng);
            for (std::size_t j = 0; j < m.cols(); ++j) {
                sum += p(r, j);
                shifted(r, j) += c;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
        const Matrix q = softmax_rows(shifted);
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(std::abs(p.data()[i] - q.data()[i]) < 1e-12);
    }
}

TEST_CASE("finite_diff_grad on constant, quadratic, and product functions") {
    const auto constant = [](const std::vector<double>&) { return 3.25; };
    for (double g : finite_diff_grad(constant, {1.0, -2.0, 0.5})) CHECK(g == 0.0);

    const auto half_norm = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return 0.5 * s;
    };
    const std::vector<double> g1 = finite_diff_grad(half_norm, {1.0, 2.0});
    CHECK(g1[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(g1[1] == doctest::Approx(2.0).epsilon(1e-6));

    const auto prod = [](const std::vector<double>& x) { return x[0] * x[1]; };
    const std::vector<double> g2 = finite_diff_grad(prod, {3.0, 4.0});
    CHECK(g2[0] == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(g2[1] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("finite_diff_grad matches the analytic gradient of a random quadratic") {
    std::mt19937_64 rng(11);
    const std::size_t n = 5;
    const Matrix a = random_matrix(rng, n, n);
    std::vector<double> x(n);
    for (double& v : x) v = std::normal_distribution<double>(0.0, 1.0)(rng);

    const auto f = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s += p[i] * a(i, j) * p[j];
        return 0.5 * s;
    };
    const std::vector<double> fd = finite_diff_grad(f, x, 1e-5);
    for (std::size_t i = 0; i < n; ++i) {
        double want = 0.0;  // 0.5 (A + A^T) x
        for (std::size_t j = 0; j < n; ++j) want += 0.5 * (a(i, j) + a(j, i)) * x[j];
        CHECK(std::abs(fd[i] - want) / std::max(1.0, std::abs(want)) < 1e-6);
    }
}

TEST_CASE("finite_diff_grad flags non-finite evaluations") {
    const auto blows_up = [](const std::vector<double>& x) { return 1.0 / (x[0] - x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(blows_up, {1.0}), NumericError);
}

TEST_CASE("normalize_rows produces unit rows and rejects near-zero rows") {
    const Matrix m{{3, 4}, {0, -2}};
    const Matrix u = normalize_rows(m);
    CHECK(u(0, 0) == doctest::Approx(0.6));
    CHECK(u(0, 1) == doctest::Approx(0.8));
    CHECK(u(1, 1) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(normalize_rows(Matrix(1, 2)), NumericError);
}

TEST_CASE("normalize_rows_backward matches finite differences") {
    std::mt19937_64 rng(13);
    const Matrix raw = random_matrix(rng, 3, 4);
    const Matrix cot = random_matrix(rng, 3, 4);
    const Matrix grad = normalize_rows_backward(raw, cot);

    std::vector<double> x(raw.storage());
    const auto f = [&](const std::vector<double>& p) {
        Matrix m(3, 4);
        m.storage() = p;
        const Matrix u = normalize_rows(m);
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += u.data()[i] * cot.data()[i];
        return s;
    };
    const std::vector<double> fd = finite_diff_grad(f, x);
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(std::abs(fd[i] - grad.data()[i]) / std::max(1.0, std::abs(fd[i])) < 1e-6);
}

TEST_CASE("vstack concatenates rows and handles empty operands") {
    const Matrix top{{1, 2}};
    const Matrix bottom{{3, 4}, {5, 6}};
    const Matrix both = vstack(top, bottom);
    CHECK(both.rows() == 3);
    CHECK(both(0, 1) == 2);
    CHECK(both(2, 0) == 5);

    const Matrix only = vstack(Matrix(), bottom);
    CHECK(only.rows() == 2);
    CHECK(only.cols() == 2);
    CHECK_THROWS_AS(vstack(Matrix(1, 2), Matrix(1, 3)), ShapeError);
}

TEST_CASE("transpose, elementwise ops, and vector helpers") {
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    const Matrix t = transpose(m);
    CHECK(t.rows() == 3);
    CHECK(t(2, 1) == 6);

    Matrix s = m;
    s *= 2.0;
    CHECK(s(1, 2) == 12);
    const Matrix sum = m + m;
    CHECK(sum(0, 0) == 2);
    CHECK_THROWS_AS(Matrix(1, 2) += Matrix(2, 1), ShapeError);

    const double a[] = {1, 2, 3};
    const double b[] = {4, 5, 6};
    CHECK(dot(a, b, 3) == 32);
    CHECK(squared_distance(a, b, 3) == 27);
    CHECK(l2_norm(b, 3) == doctest::Approx(std::sqrt(77.0)));
}
