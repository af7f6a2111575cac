#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lmfs/encoder.hpp"

using namespace lmfs;

namespace {

EncoderSpec make_spec(std::vector<std::size_t> widths, Activation act = Activation::relu) {
    EncoderSpec spec;
    spec.layer_widths = std::move(widths);
    spec.activation = act;
    return spec;
}

}  // namespace

TEST_CASE("encoder_init is deterministic, shaped by the spec, with zero biases") {
    const EncoderSpec spec = make_spec({4, 8, 3});
    const EncoderParams a = encoder_init(spec, 99);
    const EncoderParams b = encoder_init(spec, 99);
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0].rows() == 4);
    CHECK(a.weights[0].cols() == 8);
    CHECK(a.weights[1].rows() == 8);
    CHECK(a.weights[1].cols() == 3);
    CHECK(a.flatten() == b.flatten());
    for (const auto& bias : a.biases)
        for (double v : bias) CHECK(v == 0.0);

    // Glorot-uniform bound per layer.
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        const double bound =
            std::sqrt(6.0 / double(spec.layer_widths[l] + spec.layer_widths[l + 1]));
        for (double w : a.weights[l].storage()) CHECK(std::abs(w) <= bound);
    }

    const EncoderParams c = encoder_init(spec, 100);
    CHECK(a.flatten() != c.flatten());
}

TEST_CASE("encoder spec validation") {
    CHECK_THROWS_AS(make_spec({5}).validate(), ConfigError);
    CHECK_THROWS_AS(make_spec({5, 0, 2}).validate(), ConfigError);
    CHECK_NOTHROW(make_spec({5, 2}).validate());
}

TEST_CASE("forward through an identity network reproduces positive inputs") {
    EncoderParams p = encoder_init(make_spec({2, 2, 2}), 1);
    for (std::size_t l = 0; l < 2; ++l) {
        p.weights[l] = Matrix::identity(2);
        p.biases[l] = {0.0, 0.0};
    }
    const Matrix x{{0.5, 1.5}, {2.0, 0.25}};
    const Matrix out = encoder_forward(p, x).embeddings;
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.data()[i] == x.data()[i]);
}

TEST_CASE("forward with all-zero parameters yields zero embeddings") {
    EncoderParams p = encoder_init(make_spec({3, 4, 2}), 5);
    p = EncoderParams::zeros_like(p);
    const Matrix out = encoder_forward(p, Matrix{{1, -2, 3}}).embeddings;
    for (double v : out.storage()) CHECK(v == 0.0);
}

TEST_CASE("single affine layer applies weight and bias with no activation") {
    EncoderParams p = encoder_init(make_spec({2, 2}, Activation::tanh_), 1);
    p.weights[0] = Matrix::identity(2);
    p.biases[0] = {1.0, -1.0};
    const Matrix out = encoder_forward(p, Matrix{{0.25, 4.0}, {-3.0, 0.0}}).embeddings;
    CHECK(out(0, 0) == 1.25);
    CHECK(out(0, 1) == 3.0);
    CHECK(out(1, 0) == -2.0);  // negative survives: output layer is affine
    CHECK(out(1, 1) == -1.0);
}

TEST_CASE("forward rejects inputs of the wrong width") {
    const EncoderParams p = encoder_init(make_spec({3, 2}), 1);
    CHECK_THROWS_AS(encoder_forward(p, Matrix(1, 4)), ShapeError);
}

TEST_CASE("backward with a zero cotangent returns zero gradients") {
    const EncoderParams p = encoder_init(make_spec({3, 5, 2}), 17);
    const EncoderForward fwd = encoder_forward(p, Matrix{{1, 2, 3}, {0, -1, 2}});
    const EncoderBackward back = encoder_backward(p, fwd.cache, Matrix(2, 2));
    for (double v : back.grad_params.flatten()) CHECK(v == 0.0);
    for (double v : back.grad_input.storage()) CHECK(v == 0.0);
}

TEST_CASE("single linear layer: sum-of-outputs gradient is x^T 1") {
    const EncoderParams p = encoder_init(make_spec({2, 3}), 3);
    const Matrix x{{1.0, 2.0}, {3.0, 4.0}};
    const EncoderForward fwd = encoder_forward(p, x);
    const EncoderBackward back = encoder_backward(p, fwd.cache, Matrix(2, 3, 1.0));
    // d(sum of outputs)/dW[i][j] = sum_n x[n][i]; biases get the row count.
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(back.grad_params.weights[0](0, j) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(back.grad_params.weights[0](1, j) == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(back.grad_params.biases[0][j] == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("backward matches finite differences on random networks") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (const Activation act : {Activation::relu, Activation::tanh_}) {
        const EncoderSpec spec = make_spec({3, 6, 4}, act);
        const EncoderParams p = encoder_init(spec, rng());
        Matrix x(5, 3);
        for (double& v : x.storage()) v = dist(rng);
        Matrix cot(5, 4);
        for (double& v : cot.storage()) v = dist(rng);

        const EncoderForward fwd = encoder_forward(p, x);
        const EncoderBackward back = encoder_backward(p, fwd.cache, cot);
        const std::vector<double> analytic = back.grad_params.flatten();

        const auto f = [&](const std::vector<double>& flat) {
            EncoderParams q = p;
            q.unflatten(flat);
            const Matrix out = encoder_forward(q, x).embeddings;
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * cot.data()[i];
            return s;
        };
        const std::vector<double> fd = finite_diff_grad(f, p.flatten());
        for (std::size_t i = 0; i < fd.size(); ++i)
            CHECK(std::abs(fd[i] - analytic[i]) / std::max(1.0, std::abs(fd[i])) < 1e-6);
    }
}

TEST_CASE("forward is pure: repeated calls agree") {
    const EncoderParams p = encoder_init(make_spec({4, 6, 3}, Activation::tanh_), 8);
    std::mt19937_64 rng(21);
    Matrix x(3, 4);
    for (double& v : x.storage()) v = std::normal_distribution<double>(0.0, 2.0)(rng);
    const Matrix a = encoder_forward(p, x).embeddings;
    const Matrix b = encoder_forward(p, x).embeddings;
    CHECK(a.storage() == b.storage());
}

TEST_CASE("activation names round-trip and reject unknowns") {
    CHECK(activation_from_string("relu") == Activation::relu);
    CHECK(activation_from_string("tanh") == Activation::tanh_);
    CHECK(to_string(Activation::relu) == "relu");
    CHECK_THROWS_AS(activation_from_string("gelu"), ConfigError);
}
