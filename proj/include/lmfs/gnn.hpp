#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lmfs/data.hpp"
#include "lmfs/encoder.hpp"
#include "lmfs/losses.hpp"
#include "lmfs/matrix.hpp"

namespace lmfs {

// When the learned adjacency is rebuilt: from the current features at every
// layer (default), or once from the initial features and then reused.
enum class AdjacencyMode { per_layer, static_once };

// "per_layer" or "static_once"; the from-string form throws ConfigError
// on other names.
AdjacencyMode adjacency_mode_from_string(const std::string& name);
std::string to_string(AdjacencyMode mode);

// Architecture of the graph network. Node features at layer 0 have width
// d_embed + n_classes (encoder output plus the label block); layer_dims lists
// the widths after each of the M graph layers.
struct GnnConfig {
    std::size_t d_embed = 8;               // encoder output width
    std::size_t n_classes = 5;             // C, also the label-block width
    std::vector<std::size_t> layer_dims;   // d_1..d_M (M = layer_dims.size())
    std::vector<std::size_t> adjacency_hidden;  // hidden widths of the edge MLP
    AdjacencyMode adjacency_mode = AdjacencyMode::per_layer;
    bool normalize_adjacency = true;       // row-softmax the raw edge scores
    double leaky_slope = 0.2;              // hidden sigma; final layer is linear

    std::size_t n_layers() const { return layer_dims.size(); }
    std::size_t input_dim() const { return d_embed + n_classes; }
    // Width entering layer l (0-based).
    std::size_t dim_in(std::size_t l) const { return l == 0 ? input_dim() : layer_dims[l - 1]; }
    void validate() const;  // throws ConfigError
};

// All learnable pieces. Each layer owns projections for the two graph
// operators (learned adjacency and the normalized all-ones mixer); the edge
// MLPs are one-output encoders over absolute feature differences, one per
// layer in per_layer mode and a single one in static mode.
struct GnnParams {
    GnnConfig config;
    std::vector<EncoderParams> edge_mlps;
    std::vector<Matrix> proj_adj;   // theta for the adjacency operator, d_l x d_{l+1}
    std::vector<Matrix> proj_mean;  // theta for the all-ones operator, d_l x d_{l+1}
    SoftmaxHead head;               // d_M x C on the query node

    std::size_t param_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat, std::size_t offset = 0);
    static GnnParams zeros_like(const GnnParams& p);
};

// Glorot-uniform projections and edge MLPs, deterministic for a given seed.
GnnParams gnn_init(const GnnConfig& config, std::uint64_t seed);

// Initial node features: each embedding row concatenated with a label block
// of width C — the one-hot label for support nodes, uniform 1/C for the
// query and unlabeled nodes. Node order: support..., query, unlabeled....
// The episode must carry exactly one query row (UsageError otherwise).
Matrix init_node_features(const Matrix& embeddings, const Episode& episode);

// Learned adjacency: MLP score on |x_i - x_j| for every ordered pair,
// row-softmax normalized (when enabled). The diagonal is scored like any
// other entry.
Matrix adjacency(const Matrix& x, const EncoderParams& edge_mlp,
                 bool normalize = true);

// One graph layer: sigma(A.X.theta_adj + (1/n).1.X.theta_mean), with sigma a
// leaky relu of the given slope (slope 1 gives the identity used at the
// final layer).
Matrix gnn_layer(const Matrix& x, const Matrix& a, const Matrix& proj_adj,
                 const Matrix& proj_mean, double leaky_slope);

// Everything the backward pass needs from one forward evaluation.
struct GnnAdjCache {
    Matrix x;            // features the adjacency was built from
    Matrix diff_signs;   // n^2 x d signs of x_i - x_j
    EncoderCache mlp;    // edge MLP cache over the |x_i - x_j| rows
    Matrix raw;          // n x n scores before normalization
    Matrix a;            // final adjacency
};

struct GnnLayerCache {
    Matrix x_in;   // n x d_l
    Matrix ax;     // A . x_in (reused for the projection gradients)
    Matrix mx;     // (1/n) 1 . x_in
    Matrix pre;    // pre-activation output
};

struct GnnCache {
    EncoderCache encoder;                // over the stacked raw inputs
    Matrix x0;                           // initial node features
    std::vector<GnnAdjCache> adj;        // M entries, or 1 in static mode
    std::vector<GnnLayerCache> layers;   // M entries
    Matrix x_final;                      // X^(M)
    std::size_t n_support = 0;
};

struct GnnForward {
    std::vector<double> query_logits;  // C entries from the softmax head
    Matrix final_embeddings;           // X^(M), margin losses read its rows
    GnnCache cache;
};

// Runs encoder + M graph layers on one single-query episode and classifies
// the query node.
GnnForward gnn_forward(const Episode& episode, const EncoderParams& encoder,
                       const GnnParams& gnn);

struct GnnBackward {
    EncoderParams grad_encoder;
    GnnParams grad_gnn;
};

// Reverse-mode gradients of gnn_forward contracted with a gradient on the
// query logits and one on the final embeddings (either may be empty/zero).
GnnBackward gnn_backward(const EncoderParams& encoder, const GnnParams& gnn,
                         const GnnCache& cache,
                         const std::vector<double>& grad_query_logits,
                         const Matrix& grad_final_embeddings);

}  // namespace lmfs
