#include "lmfs/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lmfs/errors.hpp"

namespace lmfs {

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = dist(rng);
    return m;
}

EncoderSpec edge_mlp_spec(const GnnConfig& config, std::size_t layer) {
    EncoderSpec spec;
    spec.layer_widths.push_back(config.dim_in(layer));
    for (std::size_t w : config.adjacency_hidden) spec.layer_widths.push_back(w);
    spec.layer_widths.push_back(1);
    // Smooth edge scores keep the row-softmax and the gradient checks
    // well-conditioned; the graph layers carry the piecewise-linear sigma.
    spec.activation = Activation::tanh_;
    return spec;
}

std::size_t n_edge_mlps(const GnnConfig& config) {
    return config.adjacency_mode == AdjacencyMode::per_layer ? config.n_layers() : 1;
}

void flatten_matrix(const Matrix& m, std::vector<double>& out) {
    out.insert(out.end(), m.storage().begin(), m.storage().end());
}

std::size_t unflatten_matrix(Matrix& m, const std::vector<double>& flat, std::size_t offset) {
    if (offset + m.size() > flat.size())
        throw UsageError("gnn params: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + m.size()),
              m.storage().begin());
    return offset + m.size();
}

// Builds the adjacency and remembers everything its backward pass reads.
GnnAdjCache adjacency_forward(const Matrix& x, const EncoderParams& edge_mlp,
                              bool normalize) {
    if (edge_mlp.spec.input_dim() != x.cols())
        throw ShapeError("adjacency: edge MLP input width " +
                         std::to_string(edge_mlp.spec.input_dim()) +
                         " does not match feature width " + std::to_string(x.cols()));
    if (edge_mlp.spec.output_dim() != 1)
        throw ShapeError("adjacency: edge MLP must have one output");

    const std::size_t n = x.rows(), d = x.cols();
    GnnAdjCache cache;
    cache.x = x;
    Matrix diffs(n * n, d);
    cache.diff_signs = Matrix(n * n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double* dr = diffs.row(i * n + j);
            double* sr = cache.diff_signs.row(i * n + j);
            for (std::size_t k = 0; k < d; ++k) {
                const double delta = x(i, k) - x(j, k);
                dr[k] = std::abs(delta);
                sr[k] = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
            }
        }
    }
    EncoderForward scores = encoder_forward(edge_mlp, diffs);
    cache.mlp = std::move(scores.cache);
    cache.raw = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cache.raw(i, j) = scores.embeddings(i * n + j, 0);
    cache.a = normalize ? softmax_rows(cache.raw) : cache.raw;
    return cache;
}

// Routes a gradient on the adjacency back to the features it was built from
// and accumulates the edge-MLP parameter gradient.
Matrix adjacency_backward(const GnnAdjCache& cache, const EncoderParams& edge_mlp,
                          const Matrix& grad_a, bool normalize,
                          EncoderParams& grad_mlp_accum) {
    const std::size_t n = cache.a.rows(), d = cache.x.cols();
    Matrix draw(n, n);
    if (normalize) {
        // Per-row softmax Jacobian: a * (g - <g, a>).
        for (std::size_t i = 0; i < n; ++i) {
            const double inner = dot(grad_a.row(i), cache.a.row(i), n);
            for (std::size_t j = 0; j < n; ++j)
                draw(i, j) = cache.a(i, j) * (grad_a(i, j) - inner);
        }
    } else {
        draw = grad_a;
    }

    Matrix grad_scores(n * n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) grad_scores(i * n + j, 0) = draw(i, j);
    EncoderBackward back = encoder_backward(edge_mlp, cache.mlp, grad_scores);

    for (std::size_t l = 0; l < grad_mlp_accum.weights.size(); ++l) {
        grad_mlp_accum.weights[l] += back.grad_params.weights[l];
        for (std::size_t k = 0; k < grad_mlp_accum.biases[l].size(); ++k)
            grad_mlp_accum.biases[l][k] += back.grad_params.biases[l][k];
    }

    Matrix grad_x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double* gd = back.grad_input.row(i * n + j);
            const double* sg = cache.diff_signs.row(i * n + j);
            double* gi = grad_x.row(i);
            double* gj = grad_x.row(j);
            for (std::size_t k = 0; k < d; ++k) {
                const double v = gd[k] * sg[k];
                gi[k] += v;
                gj[k] -= v;
            }
        }
    }
    return grad_x;
}

Matrix leaky(const Matrix& pre, double slope) {
    Matrix out = pre;
    for (double& v : out.storage())
        if (v < 0.0) v *= slope;
    return out;
}

}  // namespace

AdjacencyMode adjacency_mode_from_string(const std::string& name) {
    if (name == "per_layer") return AdjacencyMode::per_layer;
    if (name == "static_once") return AdjacencyMode::static_once;
    throw ConfigError("unknown adjacency mode '" + name +
                      "' (expected per_layer or static_once)");
}

std::string to_string(AdjacencyMode mode) {
    return mode == AdjacencyMode::per_layer ? "per_layer" : "static_once";
}

void GnnConfig::validate() const {
    if (d_embed < 1) throw ConfigError("gnn config: d_embed must be >= 1");
    if (n_classes < 2) throw ConfigError("gnn config: need at least 2 classes");
    if (layer_dims.empty()) throw ConfigError("gnn config: need at least one graph layer");
    for (std::size_t w : layer_dims)
        if (w < 1) throw ConfigError("gnn config: layer width must be >= 1");
    for (std::size_t w : adjacency_hidden)
        if (w < 1) throw ConfigError("gnn config: edge MLP width must be >= 1");
    if (leaky_slope < 0.0 || leaky_slope > 1.0)
        throw ConfigError("gnn config: leaky slope must lie in [0, 1]");
}

std::size_t GnnParams::param_count() const {
    std::size_t n = 0;
    for (const EncoderParams& mlp : edge_mlps) n += mlp.param_count();
    for (const Matrix& m : proj_adj) n += m.size();
    for (const Matrix& m : proj_mean) n += m.size();
    n += head.weights.size() + head.bias.size();
    return n;
}

std::vector<double> GnnParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const EncoderParams& mlp : edge_mlps) {
        const std::vector<double> part = mlp.flatten();
        flat.insert(flat.end(), part.begin(), part.end());
    }
    for (std::size_t l = 0; l < proj_adj.size(); ++l) {
        flatten_matrix(proj_adj[l], flat);
        flatten_matrix(proj_mean[l], flat);
    }
    flatten_matrix(head.weights, flat);
    flat.insert(flat.end(), head.bias.begin(), head.bias.end());
    return flat;
}

void GnnParams::unflatten(const std::vector<double>& flat, std::size_t offset) {
    for (EncoderParams& mlp : edge_mlps) {
        mlp.unflatten(flat, offset);
        offset += mlp.param_count();
    }
    for (std::size_t l = 0; l < proj_adj.size(); ++l) {
        offset = unflatten_matrix(proj_adj[l], flat, offset);
        offset = unflatten_matrix(proj_mean[l], flat, offset);
    }
    offset = unflatten_matrix(head.weights, flat, offset);
    if (offset + head.bias.size() > flat.size())
        throw UsageError("gnn params: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + head.bias.size()),
              head.bias.begin());
}

GnnParams GnnParams::zeros_like(const GnnParams& p) {
    GnnParams z;
    z.config = p.config;
    for (const EncoderParams& mlp : p.edge_mlps)
        z.edge_mlps.push_back(EncoderParams::zeros_like(mlp));
    for (const Matrix& m : p.proj_adj) z.proj_adj.emplace_back(m.rows(), m.cols());
    for (const Matrix& m : p.proj_mean) z.proj_mean.emplace_back(m.rows(), m.cols());
    z.head.weights = Matrix(p.head.weights.rows(), p.head.weights.cols());
    z.head.bias.assign(p.head.bias.size(), 0.0);
    return z;
}

GnnParams gnn_init(const GnnConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    GnnParams p;
    p.config = config;
    for (std::size_t l = 0; l < n_edge_mlps(config); ++l)
        p.edge_mlps.push_back(encoder_init(edge_mlp_spec(config, l), rng()));
    for (std::size_t l = 0; l < config.n_layers(); ++l) {
        p.proj_adj.push_back(glorot(config.dim_in(l), config.layer_dims[l], rng));
        p.proj_mean.push_back(glorot(config.dim_in(l), config.layer_dims[l], rng));
    }
    p.head.weights = glorot(config.layer_dims.back(), config.n_classes, rng);
    return p;
}

Matrix init_node_features(const Matrix& embeddings, const Episode& episode) {
    if (episode.query_y.size() != 1)
        throw UsageError("init_node_features: the graph model expects exactly one query, got " +
                         std::to_string(episode.query_y.size()));
    const std::size_t s = episode.support_y.size();
    const std::size_t r = episode.unlabeled_x.rows();
    const std::size_t n = s + 1 + r;
    if (embeddings.rows() != n)
        throw ShapeError("init_node_features: expected " + std::to_string(n) +
                         " embedding rows, got " + std::to_string(embeddings.rows()));
    const auto c = static_cast<std::size_t>(episode.c_way());
    if (c < 2) throw UsageError("init_node_features: episode has fewer than 2 classes");

    const std::size_t d = embeddings.cols();
    Matrix x(n, d + c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = embeddings(i, j);
    for (std::size_t i = 0; i < s; ++i)
        x(i, d + static_cast<std::size_t>(episode.support_y[i])) = 1.0;
    for (std::size_t i = s; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) x(i, d + k) = 1.0 / static_cast<double>(c);
    return x;
}

Matrix adjacency(const Matrix& x, const EncoderParams& edge_mlp, bool normalize) {
    return adjacency_forward(x, edge_mlp, normalize).a;
}

Matrix gnn_layer(const Matrix& x, const Matrix& a, const Matrix& proj_adj,
                 const Matrix& proj_mean, double leaky_slope) {
    if (a.rows() != x.rows() || a.cols() != x.rows())
        throw ShapeError("gnn_layer: adjacency must be n x n for n feature rows");
    if (proj_adj.rows() != x.cols() || proj_mean.rows() != x.cols() ||
        proj_adj.cols() != proj_mean.cols())
        throw ShapeError("gnn_layer: projection shapes do not chain with the features");
    const std::size_t n = x.rows();
    Matrix mx(n, x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) mx(i, j) = mean;
    }
    const Matrix pre = matmul(matmul(a, x), proj_adj) + matmul(mx, proj_mean);
    return leaky(pre, leaky_slope);
}

GnnForward gnn_forward(const Episode& episode, const EncoderParams& encoder,
                       const GnnParams& gnn) {
    const GnnConfig& config = gnn.config;
    config.validate();
    if (encoder.spec.output_dim() != config.d_embed)
        throw ShapeError("gnn_forward: encoder output width " +
                         std::to_string(encoder.spec.output_dim()) +
                         " does not match configured d_embed " + std::to_string(config.d_embed));
    if (static_cast<std::size_t>(episode.c_way()) != config.n_classes)
        throw ShapeError("gnn_forward: episode has " + std::to_string(episode.c_way()) +
                         " classes, config expects " + std::to_string(config.n_classes));

    const std::size_t s = episode.support_y.size();
    const std::size_t r = episode.unlabeled_x.rows();
    const std::size_t n = s + 1 + r;
    if (episode.query_x.rows() != 1)
        throw UsageError("gnn_forward: the graph model expects exactly one query");

    Matrix inputs(n, episode.support_x.cols());
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < inputs.cols(); ++j) inputs(i, j) = episode.support_x(i, j);
    for (std::size_t j = 0; j < inputs.cols(); ++j) inputs(s, j) = episode.query_x(0, j);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < inputs.cols(); ++j)
            inputs(s + 1 + i, j) = episode.unlabeled_x(i, j);

    GnnForward fwd;
    EncoderForward enc = encoder_forward(encoder, inputs);
    fwd.cache.encoder = std::move(enc.cache);
    fwd.cache.x0 = init_node_features(enc.embeddings, episode);
    fwd.cache.n_support = s;

    const bool per_layer = config.adjacency_mode == AdjacencyMode::per_layer;
    Matrix x = fwd.cache.x0;
    for (std::size_t l = 0; l < config.n_layers(); ++l) {
        if (per_layer) {
            fwd.cache.adj.push_back(
                adjacency_forward(x, gnn.edge_mlps[l], config.normalize_adjacency));
        } else if (l == 0) {
            fwd.cache.adj.push_back(
                adjacency_forward(x, gnn.edge_mlps[0], config.normalize_adjacency));
        }
        const Matrix& a = per_layer ? fwd.cache.adj[l].a : fwd.cache.adj[0].a;

        GnnLayerCache layer;
        layer.x_in = x;
        layer.ax = matmul(a, x);
        layer.mx = Matrix(n, x.cols());
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) layer.mx(i, j) = mean;
        }
        layer.pre = matmul(layer.ax, gnn.proj_adj[l]) + matmul(layer.mx, gnn.proj_mean[l]);
        const double slope = (l + 1 == config.n_layers()) ? 1.0 : config.leaky_slope;
        x = leaky(layer.pre, slope);
        fwd.cache.layers.push_back(std::move(layer));
    }
    fwd.cache.x_final = x;
    fwd.final_embeddings = x;

    fwd.query_logits.assign(config.n_classes, 0.0);
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        double v = 0.0;
        for (std::size_t j = 0; j < gnn.head.weights.rows(); ++j)
            v += x(s, j) * gnn.head.weights(j, c);
        if (!gnn.head.bias.empty()) v += gnn.head.bias[c];
        fwd.query_logits[c] = v;
    }
    return fwd;
}

GnnBackward gnn_backward(const EncoderParams& encoder, const GnnParams& gnn,
                         const GnnCache& cache,
                         const std::vector<double>& grad_query_logits,
                         const Matrix& grad_final_embeddings) {
    const GnnConfig& config = gnn.config;
    const std::size_t n = cache.x_final.rows();
    const std::size_t s = cache.n_support;
    const bool per_layer = config.adjacency_mode == AdjacencyMode::per_layer;

    GnnBackward back;
    back.grad_encoder = EncoderParams::zeros_like(encoder);
    back.grad_gnn = GnnParams::zeros_like(gnn);

    Matrix dx(n, cache.x_final.cols());
    if (grad_final_embeddings.size() != 0) {
        if (!grad_final_embeddings.same_shape(cache.x_final))
            throw ShapeError("gnn_backward: final-embedding gradient shape mismatch");
        dx = grad_final_embeddings;
    }
    if (!grad_query_logits.empty()) {
        if (grad_query_logits.size() != config.n_classes)
            throw ShapeError("gnn_backward: logit gradient length mismatch");
        for (std::size_t c = 0; c < config.n_classes; ++c) {
            const double g = grad_query_logits[c];
            for (std::size_t j = 0; j < gnn.head.weights.rows(); ++j) {
                back.grad_gnn.head.weights(j, c) += cache.x_final(s, j) * g;
                dx(s, j) += gnn.head.weights(j, c) * g;
            }
            if (!back.grad_gnn.head.bias.empty()) back.grad_gnn.head.bias[c] += g;
        }
    }

    Matrix da_static(n, n);
    for (std::size_t li = config.n_layers(); li-- > 0;) {
        const GnnLayerCache& layer = cache.layers[li];
        const double slope = (li + 1 == config.n_layers()) ? 1.0 : config.leaky_slope;
        Matrix dpre = dx;
        for (std::size_t idx = 0; idx < dpre.size(); ++idx)
            if (layer.pre.storage()[idx] < 0.0) dpre.storage()[idx] *= slope;

        back.grad_gnn.proj_adj[li] += matmul(transpose(layer.ax), dpre);
        back.grad_gnn.proj_mean[li] += matmul(transpose(layer.mx), dpre);

        const Matrix dax = matmul(dpre, transpose(gnn.proj_adj[li]));
        const Matrix dmx = matmul(dpre, transpose(gnn.proj_mean[li]));
        const Matrix& a = per_layer ? cache.adj[li].a : cache.adj[0].a;

        Matrix dxin = matmul(transpose(a), dax);
        // The all-ones mixer feeds every output row the column mean, so each
        // input row receives the column sums of dmx divided by n.
        for (std::size_t j = 0; j < dmx.cols(); ++j) {
            double colsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) colsum += dmx(i, j);
            colsum /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) dxin(i, j) += colsum;
        }

        const Matrix da = matmul(dax, transpose(layer.x_in));
        if (per_layer) {
            dxin += adjacency_backward(cache.adj[li], gnn.edge_mlps[li], da,
                                       config.normalize_adjacency,
                                       back.grad_gnn.edge_mlps[li]);
        } else {
            da_static += da;
        }
        dx = std::move(dxin);
    }
    if (!per_layer) {
        dx += adjacency_backward(cache.adj[0], gnn.edge_mlps[0], da_static,
                                 config.normalize_adjacency, back.grad_gnn.edge_mlps[0]);
    }

    // Strip the label block; only the embedding columns reach the encoder.
    Matrix grad_emb(n, config.d_embed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < config.d_embed; ++j) grad_emb(i, j) = dx(i, j);
    EncoderBackward enc_back = encoder_backward(encoder, cache.encoder, grad_emb);
    back.grad_encoder = std::move(enc_back.grad_params);
    return back;
}

}  // namespace lmfs
