#include "lmfs/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

namespace lmfs {

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh_;
    throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation act) {
    return act == Activation::relu ? "relu" : "tanh";
}

void EncoderSpec::validate() const {
    if (layer_widths.size() < 2)
        throw ConfigError("EncoderSpec needs at least an input and an output width");
    for (std::size_t w : layer_widths)
        if (w < 1) throw ConfigError("EncoderSpec widths must be >= 1");
}

std::size_t EncoderParams::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> EncoderParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const auto& w = weights[l].storage();
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), biases[l].begin(), biases[l].end());
    }
    return flat;
}

void EncoderParams::unflatten(const std::vector<double>& flat, std::size_t offset) {
    std::size_t pos = offset;
    if (flat.size() < offset + param_count())
        throw ShapeError("EncoderParams::unflatten: flat vector too short");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].storage();
        std::copy(flat.begin() + pos, flat.begin() + pos + w.size(), w.begin());
        pos += w.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + biases[l].size(),
                  biases[l].begin());
        pos += biases[l].size();
    }
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& p) {
    EncoderParams z;
    z.spec = p.spec;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        z.weights.emplace_back(p.weights[l].rows(), p.weights[l].cols());
        z.biases.emplace_back(p.biases[l].size(), 0.0);
    }
    return z;
}

EncoderParams encoder_init(const EncoderSpec& spec, std::uint64_t seed) {
    spec.validate();
    EncoderParams params;
    params.spec = spec;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const std::size_t in = spec.layer_widths[l];
        const std::size_t out = spec.layer_widths[l + 1];
        const double limit = std::sqrt(6.0 / double(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix w(in, out);
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(out, 0.0);
    }
    return params;
}

namespace {

double activate(double v, Activation a) {
    switch (a) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::tanh_: return std::tanh(v);
    }
    return v;
}

// Derivative expressed in terms of the pre-activation value.
double activate_deriv(double pre, Activation a) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh_: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

}  // namespace

EncoderForward encoder_forward(const EncoderParams& params, const Matrix& x) {
    if (x.cols() != params.spec.input_dim())
        throw ShapeError("encoder_forward: input has " + std::to_string(x.cols()) +
                         " columns, spec expects " +
                         std::to_string(params.spec.input_dim()));
    EncoderCache cache;
    cache.input = x;
    Matrix cur = x;
    const std::size_t n_layers = params.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix pre = matmul(cur, params.weights[l]);
        for (std::size_t i = 0; i < pre.rows(); ++i)
            for (std::size_t j = 0; j < pre.cols(); ++j)
                pre(i, j) += params.biases[l][j];
        cache.pre_activations.push_back(pre);
        const bool hidden = (l + 1 < n_layers);
        if (hidden) {
            for (std::size_t i = 0; i < pre.size(); ++i)
                pre.data()[i] = activate(pre.data()[i], params.spec.activation);
        }
        cache.post_activations.push_back(pre);
        cur = std::move(pre);
    }
    return {cur, std::move(cache)};
}

EncoderBackward encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                                 const Matrix& grad_embeddings) {
    const std::size_t n_layers = params.weights.size();
    if (cache.pre_activations.size() != n_layers)
        throw UsageError("encoder_backward: cache does not match params");
    if (grad_embeddings.rows() != cache.input.rows() ||
        grad_embeddings.cols() != params.spec.output_dim())
        throw UsageError("encoder_backward: cotangent shape mismatch");

    EncoderBackward out;
    out.grad_params = EncoderParams::zeros_like(params);

    Matrix delta = grad_embeddings;  // gradient w.r.t. the layer output
    for (std::size_t l = n_layers; l-- > 0;) {
        const bool hidden = (l + 1 < n_layers);
        if (hidden) {
            const Matrix& pre = cache.pre_activations[l];
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta.data()[i] *= activate_deriv(pre.data()[i], params.spec.activation);
        }
        const Matrix& layer_in = (l == 0) ? cache.input : cache.post_activations[l - 1];
        out.grad_params.weights[l] = matmul(transpose(layer_in), delta);
        for (std::size_t j = 0; j < delta.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < delta.rows(); ++i) s += delta(i, j);
            out.grad_params.biases[l][j] = s;
        }
        delta = matmul(delta, transpose(params.weights[l]));
    }
    out.grad_input = std::move(delta);
    return out;
}

}  // namespace lmfs
