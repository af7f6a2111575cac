#include "lmfs/protonet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lmfs/errors.hpp"

namespace lmfs {

PnMetric pn_metric_from_string(const std::string& name) {
    if (name == "euclidean") return PnMetric::euclidean;
    if (name == "cosine") return PnMetric::cosine;
    throw ConfigError("unknown metric '" + name + "' (expected euclidean or cosine)");
}

std::string to_string(PnMetric metric) {
    return metric == PnMetric::euclidean ? "euclidean" : "cosine";
}

namespace {

// Logits for one metric; euclidean keeps the squared distances so callers can
// reuse them for gradients.
Matrix pn_logits(const Matrix& emb, const PrototypeSet& protos, const char* who) {
    if (emb.cols() != protos.centers.cols())
        throw ShapeError(std::string(who) + ": embedding dim " + std::to_string(emb.cols()) +
                         " does not match center dim " + std::to_string(protos.centers.cols()));
    if (protos.metric == PnMetric::euclidean) {
        Matrix logits(emb.rows(), protos.n_classes());
        for (std::size_t i = 0; i < emb.rows(); ++i)
            for (std::size_t k = 0; k < protos.n_classes(); ++k)
                logits(i, k) = -squared_distance(emb.row(i), protos.centers.row(k), emb.cols());
        return logits;
    }
    const Matrix unit_q = normalize_rows(emb, 1e-12, who);
    const Matrix unit_c = normalize_rows(protos.centers, 1e-12, who);
    return matmul(unit_q, transpose(unit_c)) * protos.scale;
}

}  // namespace

PrototypeSet prototypes(const Matrix& support_emb, const std::vector<int>& support_labels,
                        PnMetric metric, double scale) {
    if (support_labels.size() != support_emb.rows())
        throw ShapeError("prototypes: label count does not match embedding rows");
    if (support_emb.rows() == 0) throw UsageError("prototypes: empty support set");
    int max_label = 0;
    for (int y : support_labels) {
        if (y < 0) throw UsageError("prototypes: negative label");
        max_label = std::max(max_label, y);
    }
    const std::size_t c = static_cast<std::size_t>(max_label) + 1;
    if (c < 2) throw UsageError("prototypes: need at least 2 classes");

    PrototypeSet protos;
    protos.centers = Matrix(c, support_emb.cols());
    protos.metric = metric;
    protos.scale = scale;
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < support_emb.rows(); ++i) {
        const auto k = static_cast<std::size_t>(support_labels[i]);
        ++counts[k];
        for (std::size_t j = 0; j < support_emb.cols(); ++j)
            protos.centers(k, j) += support_emb(i, j);
    }
    for (std::size_t k = 0; k < c; ++k) {
        if (counts[k] == 0)
            throw UsageError("prototypes: class " + std::to_string(k) +
                             " has no support samples");
        for (std::size_t j = 0; j < support_emb.cols(); ++j)
            protos.centers(k, j) /= static_cast<double>(counts[k]);
    }
    return protos;
}

Matrix pn_classify(const Matrix& query_emb, const PrototypeSet& protos) {
    return softmax_rows(pn_logits(query_emb, protos, "pn_classify"));
}

LossOut pn_loss(const Matrix& episode_emb, const Episode& episode,
                const PrototypeSet& protos) {
    const std::size_t s = episode.support_y.size();
    const std::size_t q = episode.query_y.size();
    const std::size_t c = protos.n_classes();
    const std::size_t d = episode_emb.cols();
    if (episode_emb.rows() != s + q)
        throw ShapeError("pn_loss: expected support+query embedding rows");
    if (q == 0) throw UsageError("pn_loss: episode has no queries");

    Matrix support_emb(s, d);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < d; ++j) support_emb(i, j) = episode_emb(i, j);
    Matrix query_emb(q, d);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < d; ++j) query_emb(i, j) = episode_emb(s + i, j);

    // The gradient below differentiates the centers as support means, so the
    // supplied prototypes must actually be those means.
    const PrototypeSet rebuilt =
        prototypes(support_emb, episode.support_y, protos.metric, protos.scale);
    if (rebuilt.n_classes() != c)
        throw UsageError("pn_loss: prototype class count does not match support labels");
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t j = 0; j < d; ++j)
            if (std::abs(rebuilt.centers(k, j) - protos.centers(k, j)) > 1e-9)
                throw UsageError("pn_loss: prototypes are not the support means");

    // Per-class query counts for the double average (1/C)(1/|Q_k|).
    std::vector<std::size_t> q_count(c, 0);
    for (int y : episode.query_y) {
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw UsageError("pn_loss: query label outside prototype classes");
        ++q_count[static_cast<std::size_t>(y)];
    }
    for (std::size_t k = 0; k < c; ++k)
        if (q_count[k] == 0)
            throw UsageError("pn_loss: class " + std::to_string(k) + " has no queries");

    const Matrix logits = pn_logits(query_emb, protos, "pn_loss");
    const Matrix probs = softmax_rows(logits);

    LossOut out;
    Matrix dlogits(q, c);
    for (std::size_t i = 0; i < q; ++i) {
        const auto y = static_cast<std::size_t>(episode.query_y[i]);
        const double w = 1.0 / (static_cast<double>(c) * static_cast<double>(q_count[y]));
        const double* row = logits.row(i);
        double hi = row[0];
        for (std::size_t k = 1; k < c; ++k) hi = std::max(hi, row[k]);
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) sum += std::exp(row[k] - hi);
        out.value += w * (hi + std::log(sum) - row[y]);  // -log p(y)
        for (std::size_t k = 0; k < c; ++k)
            dlogits(i, k) = w * (probs(i, k) - (k == y ? 1.0 : 0.0));
    }

    // Chain dlogits back to query embeddings and centers.
    Matrix grad_query(q, d);
    Matrix grad_centers(c, d);
    if (protos.metric == PnMetric::euclidean) {
        for (std::size_t i = 0; i < q; ++i) {
            for (std::size_t k = 0; k < c; ++k) {
                const double g = dlogits(i, k);
                if (g == 0.0) continue;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = query_emb(i, j) - protos.centers(k, j);
                    grad_query(i, j) += g * (-2.0) * diff;
                    grad_centers(k, j) += g * 2.0 * diff;
                }
            }
        }
    } else {
        const Matrix unit_q = normalize_rows(query_emb, 1e-12, "pn_loss");
        const Matrix unit_c = normalize_rows(protos.centers, 1e-12, "pn_loss");
        const Matrix dcos = dlogits * protos.scale;
        grad_query = normalize_rows_backward(query_emb, matmul(dcos, unit_c));
        grad_centers = normalize_rows_backward(protos.centers, matmul(transpose(dcos), unit_q));
    }

    // Each support row carries 1/|S_k| of its class-center gradient.
    std::vector<std::size_t> s_count(c, 0);
    for (int y : episode.support_y) ++s_count[static_cast<std::size_t>(y)];
    out.grad_embeddings = Matrix(s + q, d);
    for (std::size_t i = 0; i < s; ++i) {
        const auto k = static_cast<std::size_t>(episode.support_y[i]);
        for (std::size_t j = 0; j < d; ++j)
            out.grad_embeddings(i, j) = grad_centers(k, j) / static_cast<double>(s_count[k]);
    }
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.grad_embeddings(s + i, j) = grad_query(i, j);
    return out;
}

PnLinear pn_linearize(const PrototypeSet& protos) {
    if (protos.metric != PnMetric::euclidean)
        throw UsageError("pn_linearize: only the euclidean metric is linear in the embedding");
    const std::size_t c = protos.n_classes();
    const std::size_t d = protos.centers.cols();
    PnLinear lin;
    lin.weights = Matrix(d, c);
    lin.bias.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t j = 0; j < d; ++j) lin.weights(j, k) = 2.0 * protos.centers(k, j);
        lin.bias[k] = -dot(protos.centers.row(k), protos.centers.row(k), d);
    }
    return lin;
}

}  // namespace lmfs
