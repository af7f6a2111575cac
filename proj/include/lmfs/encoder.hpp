#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmfs/matrix.hpp"

namespace lmfs {

enum class Activation { relu, tanh_ };

/// "relu" or "tanh"; the from-string form throws ConfigError on other names.
Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

/// Architecture of the embedding MLP: layer_widths[0] is the input dimension,
/// layer_widths.back() the embedding dimension. The activation applies to all
/// hidden layers; the output layer is affine so embeddings cover all of R^d.
struct EncoderSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::relu;

    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t output_dim() const { return layer_widths.back(); }
    std::size_t n_layers() const { return layer_widths.size() - 1; }
    void validate() const;
};

/// Per-layer weight (in x out) and bias (out). Also reused as the gradient
/// container since it is shape-identical.
struct EncoderParams {
    EncoderSpec spec;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    std::size_t param_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat, std::size_t offset = 0);
    static EncoderParams zeros_like(const EncoderParams& p);
};

/// Glorot-uniform weights, zero biases, deterministic for a given seed.
EncoderParams encoder_init(const EncoderSpec& spec, std::uint64_t seed);

/// Pre-activations and activations kept from forward for the backward pass.
struct EncoderCache {
    Matrix input;
    std::vector<Matrix> pre_activations;   // one per layer
    std::vector<Matrix> post_activations;  // one per layer (last == embeddings)
};

struct EncoderForward {
    Matrix embeddings;
    EncoderCache cache;
};

EncoderForward encoder_forward(const EncoderParams& params, const Matrix& x);

struct EncoderBackward {
    EncoderParams grad_params;
    Matrix grad_input;
};

/// Reverse-mode gradients of the forward map contracted with grad_embeddings.
EncoderBackward encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                                 const Matrix& grad_embeddings);

}  // namespace lmfs
