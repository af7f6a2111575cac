#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmfs/data.hpp"
#include "lmfs/losses.hpp"
#include "lmfs/matrix.hpp"

namespace lmfs {

enum class PnMetric { euclidean, cosine };

// "euclidean" or "cosine"; the from-string form throws ConfigError otherwise.
PnMetric pn_metric_from_string(const std::string& name);
std::string to_string(PnMetric metric);

// Class centers plus the distance convention used against them. Euclidean
// logits are negative squared distances; cosine logits are scale * cos(theta).
struct PrototypeSet {
    Matrix centers;  // C x d, row k is class k's center
    PnMetric metric = PnMetric::euclidean;
    double scale = 10.0;  // used only by the cosine metric

    std::size_t n_classes() const { return centers.rows(); }
};

// Mean support embedding per class. Every class 0..C-1 (C = max label + 1)
// must appear in the labels; throws UsageError otherwise.
PrototypeSet prototypes(const Matrix& support_emb, const std::vector<int>& support_labels,
                        PnMetric metric = PnMetric::euclidean, double scale = 10.0);

// Softmax class probabilities for each query row; one row per query, one
// column per class, rows summing to 1.
Matrix pn_classify(const Matrix& query_emb, const PrototypeSet& protos);

// Episode loss: mean over classes of the mean negative log-probability of
// that class's queries. episode_emb stacks support rows then query rows, and
// protos must have been computed from exactly those support rows (checked);
// gradients flow to the queries and, through the centers, to the support.
LossOut pn_loss(const Matrix& episode_emb, const Episode& episode,
                const PrototypeSet& protos);

// The Euclidean classifier written as an affine map: logits W^T f + b with
// w_k = 2 c_k and b_k = -c_k.c_k reproduce the squared-distance softmax up to
// a per-query constant. Cosine metric is not linear in f; throws UsageError.
struct PnLinear {
    Matrix weights;            // d x C
    std::vector<double> bias;  // C
};
PnLinear pn_linearize(const PrototypeSet& protos);

}  // namespace lmfs
