#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmfs/matrix.hpp"
#include "lmfs/triplets.hpp"

namespace lmfs {

// Which margin loss augments the classification objective. `none` disables
// the margin term entirely.
enum class LossKind {
    none,
    triplet,
    normalized_triplet,
    contrastive,
    normalized_contrastive,
    normface,
    cosface,
    arcface,
};

// Throws ConfigError on an unknown name.
LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

// Margin-loss settings: total objective = classification + lambda * margin.
struct LossConfig {
    LossKind kind = LossKind::none;
    double lambda = 1.0;  // balancing weight on the margin term
    double margin = 0.5;  // m
    double scale = 10.0;  // s, for the cosine-based losses

    void validate() const;  // throws ConfigError
};

// Linear classifier weights, one column per class. The cosine-based losses
// normalize the columns and ignore the bias (the bias-free formulation).
struct SoftmaxHead {
    Matrix weights;            // d x C
    std::vector<double> bias;  // size C, or empty meaning all-zero

    std::size_t n_classes() const { return weights.cols(); }
    void validate() const;  // throws ConfigError on C < 2, non-finite, bad bias size
};

// A loss value plus analytic gradients. grad_weights is 0x0 for losses that
// take no classifier head.
struct LossOut {
    double value = 0.0;
    Matrix grad_embeddings;
    Matrix grad_weights;
};

// Mean negative log-likelihood of softmax(logits); gradient is taken with
// respect to the logits themselves ((softmax - onehot)/n).
LossOut softmax_ce(const Matrix& logits, const std::vector<int>& labels);

// Mean hinge over triplets: (1/N_t) sum [ |f_a-f_p|^2 - |f_a-f_n|^2 + m ]_+.
// A bracket of exactly zero is inactive and contributes no gradient.
LossOut triplet_loss(const Matrix& emb, const TripletSet& ts, double m);

// Pull/push form of the triplet gradient for one pivot row:
//   -(2|S_s|/N_t)(c_s - f) - (2|S_d|/N_t)(f - c_d)
// with c_s, c_d the means of the embeddings paired with the pivot. The form
// itself is margin-free; m is taken only to verify the precondition that
// every triplet involving the pivot is active (throws UsageError else).
std::vector<double> triplet_grad_decomposition(const Matrix& emb,
                                               const TripletSet& ts,
                                               const std::vector<int>& labels,
                                               std::size_t pivot, double m);

// classification + lambda * margin, values and gradients alike. A 0x0
// gradient on either side is treated as absent rather than mismatched.
LossOut total_loss(const LossOut& classification, const LossOut& margin,
                   double lambda);

// Triplet loss over L2-normalized embeddings, gradient propagated through
// the normalization. Throws NumericError on a near-zero-norm row.
LossOut normalized_triplet_loss(const Matrix& emb, const TripletSet& ts, double m);

// A labeled sample pair: same==true marks a same-class (pull) pair.
struct IndexPair {
    std::size_t i = 0;
    std::size_t j = 0;
    bool same = false;
};

// Derives contrastive pairs from a triplet set: each triplet contributes the
// (anchor, positive) pull pair and the (anchor, negative) push pair,
// deduplicated on the unordered index pair.
std::vector<IndexPair> pairs_from_triplets(const TripletSet& ts);

// Mean over pairs of |f_i-f_j|^2 (same label) or [m - |f_i-f_j|^2]_+
// (different label); embeddings are unit-normalized first when `normalized`.
LossOut contrastive_loss(const Matrix& emb, const std::vector<IndexPair>& pairs,
                         double m, bool normalized);

// Contrastive loss between normalized embeddings and normalized class weight
// columns, averaged over all (sample, class) pairs; gradients flow to both.
LossOut normface_loss(const Matrix& emb, const SoftmaxHead& head,
                      const std::vector<int>& labels, double m);

// Softmax CE over logits s*cos(theta_j), with the true-class cosine shifted
// down by m: s*(cos(theta_y) - m).
LossOut cosface_loss(const Matrix& emb, const SoftmaxHead& head,
                     const std::vector<int>& labels, double s, double m);

// Softmax CE with the margin applied in angle space: true-class logit
// s*cos(theta_y + m). cos(theta+m) expands as cos*cos(m) - sin*sin(m) with
// sin(theta) = sqrt(1 - cos^2) clamped to [0,1]; theta_y + m beyond pi is
// clamped to pi (constant region, zero gradient through that cosine).
LossOut arcface_loss(const Matrix& emb, const SoftmaxHead& head,
                     const std::vector<int>& labels, double s, double m);

// Softmax CE over logits s*cos(theta_j) with no margin.
LossOut scaled_cosine_softmax(const Matrix& emb, const SoftmaxHead& head,
                              const std::vector<int>& labels, double s);

}  // namespace lmfs
