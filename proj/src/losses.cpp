#include "lmfs/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "lmfs/errors.hpp"

namespace lmfs {

namespace {

void check_labels(const char* who, const std::vector<int>& labels, std::size_t n,
                  std::size_t n_classes) {
    if (labels.size() != n)
        throw ShapeError(std::string(who) + ": expected " + std::to_string(n) +
                         " labels, got " + std::to_string(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
            throw UsageError(std::string(who) + ": label " + std::to_string(labels[i]) +
                             " at row " + std::to_string(i) + " is outside 0.." +
                             std::to_string(n_classes - 1));
    }
}

// Unit-normalized embeddings and weight columns plus their cosine table;
// the shared front end of all angular losses.
struct CosineLayer {
    Matrix unit_emb;  // n x d
    Matrix unit_w;    // d x C
    Matrix cos;       // n x C
};

CosineLayer cosine_forward(const char* who, const Matrix& emb, const SoftmaxHead& head) {
    head.validate();
    if (emb.rows() == 0) throw UsageError(std::string(who) + ": no embeddings");
    if (emb.cols() != head.weights.rows())
        throw ShapeError(std::string(who) + ": embedding dim " + std::to_string(emb.cols()) +
                         " does not match weight rows " + std::to_string(head.weights.rows()));
    CosineLayer layer;
    layer.unit_emb = normalize_rows(emb, 1e-12, who);
    layer.unit_w = transpose(normalize_rows(transpose(head.weights), 1e-12, who));
    layer.cos = matmul(layer.unit_emb, layer.unit_w);
    return layer;
}

// Routes dL/dcos back to the raw embeddings and raw weight columns.
void cosine_backward(const Matrix& emb, const Matrix& w_raw, const CosineLayer& layer,
                     const Matrix& dcos, LossOut& out) {
    out.grad_embeddings = normalize_rows_backward(emb, matmul(dcos, transpose(layer.unit_w)));
    const Matrix d_unit_w = matmul(transpose(layer.unit_emb), dcos);
    out.grad_weights = transpose(normalize_rows_backward(transpose(w_raw), transpose(d_unit_w)));
}

// classification-grad + lambda * margin-grad, where a 0x0 matrix means the
// term has no gradient of this kind.
Matrix combine_grads(const Matrix& a, const Matrix& b, double lambda, const char* what) {
    if (a.size() == 0 && b.size() == 0) return Matrix();
    if (b.size() == 0) return a;
    if (a.size() == 0) return b * lambda;
    if (!a.same_shape(b))
        throw ShapeError(std::string("total_loss: ") + what + " shapes do not match");
    return a + b * lambda;
}

}  // namespace

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "none") return LossKind::none;
    if (name == "triplet") return LossKind::triplet;
    if (name == "normalized_triplet") return LossKind::normalized_triplet;
    if (name == "contrastive") return LossKind::contrastive;
    if (name == "normalized_contrastive") return LossKind::normalized_contrastive;
    if (name == "normface") return LossKind::normface;
    if (name == "cosface") return LossKind::cosface;
    if (name == "arcface") return LossKind::arcface;
    throw ConfigError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::none: return "none";
        case LossKind::triplet: return "triplet";
        case LossKind::normalized_triplet: return "normalized_triplet";
        case LossKind::contrastive: return "contrastive";
        case LossKind::normalized_contrastive: return "normalized_contrastive";
        case LossKind::normface: return "normface";
        case LossKind::cosface: return "cosface";
        case LossKind::arcface: return "arcface";
    }
    throw ConfigError("unknown loss kind value");
}

void LossConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("loss config: lambda must be >= 0");
    if (margin <= 0.0) throw ConfigError("loss config: margin must be > 0");
    if (scale <= 0.0) throw ConfigError("loss config: scale must be > 0");
}

void SoftmaxHead::validate() const {
    if (weights.cols() < 2) throw ConfigError("softmax head: need at least 2 classes");
    if (!weights.all_finite()) throw ConfigError("softmax head: non-finite weights");
    if (!bias.empty() && bias.size() != weights.cols())
        throw ConfigError("softmax head: bias size does not match class count");
    for (double b : bias)
        if (!std::isfinite(b)) throw ConfigError("softmax head: non-finite bias");
}

LossOut softmax_ce(const Matrix& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (n == 0 || c == 0) throw UsageError("softmax_ce: empty logits");
    check_labels("softmax_ce", labels, n, c);

    LossOut out;
    out.grad_embeddings = softmax_rows(logits);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.row(i);
        const double hi = *std::max_element(row, row + c);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - hi);
        out.value += (hi + std::log(sum) - row[static_cast<std::size_t>(labels[i])]) * inv;
        out.grad_embeddings(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    out.grad_embeddings *= inv;
    return out;
}

LossOut triplet_loss(const Matrix& emb, const TripletSet& ts, double m) {
    if (ts.count() == 0) throw UsageError("triplet_loss: empty triplet set");
    for (const Triplet& t : ts.triplets) {
        if (t.anchor >= emb.rows() || t.positive >= emb.rows() || t.negative >= emb.rows())
            throw UsageError("triplet_loss: triplet index exceeds embedding rows");
    }

    LossOut out;
    out.grad_embeddings = Matrix(emb.rows(), emb.cols());
    const std::size_t d = emb.cols();
    const double inv = 1.0 / static_cast<double>(ts.count());
    for (const Triplet& t : ts.triplets) {
        const double* fa = emb.row(t.anchor);
        const double* fp = emb.row(t.positive);
        const double* fn = emb.row(t.negative);
        const double bracket = squared_distance(fa, fp, d) - squared_distance(fa, fn, d) + m;
        if (bracket <= 0.0) continue;
        out.value += bracket * inv;
        double* ga = out.grad_embeddings.row(t.anchor);
        double* gp = out.grad_embeddings.row(t.positive);
        double* gn = out.grad_embeddings.row(t.negative);
        const double coef = 2.0 * inv;
        for (std::size_t j = 0; j < d; ++j) {
            ga[j] += coef * (fn[j] - fp[j]);
            gp[j] += coef * (fp[j] - fa[j]);
            gn[j] += coef * (fa[j] - fn[j]);
        }
    }
    return out;
}

std::vector<double> triplet_grad_decomposition(const Matrix& emb, const TripletSet& ts,
                                               const std::vector<int>& labels,
                                               std::size_t pivot, double m) {
    if (labels.size() != emb.rows())
        throw ShapeError("triplet_grad_decomposition: label count does not match rows");
    if (pivot >= emb.rows())
        throw UsageError("triplet_grad_decomposition: pivot out of range");
    const std::size_t d = emb.cols();
    for (std::size_t k = 0; k < ts.triplets.size(); ++k) {
        const Triplet& t = ts.triplets[k];
        if (t.anchor != pivot && t.positive != pivot && t.negative != pivot) continue;
        const double bracket = squared_distance(emb.row(t.anchor), emb.row(t.positive), d) -
                               squared_distance(emb.row(t.anchor), emb.row(t.negative), d) + m;
        if (bracket <= 0.0)
            throw UsageError("triplet_grad_decomposition: triplet " + std::to_string(k) +
                             " involving the pivot is inactive");
    }

    const PairingPartition part = pairing_partition(ts, labels, pivot);
    std::vector<double> grad(d, 0.0);
    const double nt = static_cast<double>(ts.count());
    const double* f = emb.row(pivot);
    if (!part.same.empty()) {
        std::vector<double> c_s(d, 0.0);
        for (std::size_t idx : part.same)
            for (std::size_t j = 0; j < d; ++j) c_s[j] += emb(idx, j);
        const double k = static_cast<double>(part.same.size());
        for (std::size_t j = 0; j < d; ++j)
            grad[j] -= (2.0 * k / nt) * (c_s[j] / k - f[j]);
    }
    if (!part.diff.empty()) {
        std::vector<double> c_d(d, 0.0);
        for (std::size_t idx : part.diff)
            for (std::size_t j = 0; j < d; ++j) c_d[j] += emb(idx, j);
        const double k = static_cast<double>(part.diff.size());
        for (std::size_t j = 0; j < d; ++j)
            grad[j] -= (2.0 * k / nt) * (f[j] - c_d[j] / k);
    }
    return grad;
}

LossOut total_loss(const LossOut& classification, const LossOut& margin, double lambda) {
    if (lambda < 0.0) throw UsageError("total_loss: lambda must be >= 0");
    LossOut out;
    out.value = classification.value + lambda * margin.value;
    out.grad_embeddings = combine_grads(classification.grad_embeddings,
                                        margin.grad_embeddings, lambda, "embedding gradient");
    out.grad_weights = combine_grads(classification.grad_weights, margin.grad_weights,
                                     lambda, "weight gradient");
    return out;
}

LossOut normalized_triplet_loss(const Matrix& emb, const TripletSet& ts, double m) {
    const Matrix unit = normalize_rows(emb, 1e-12, "normalized_triplet_loss");
    LossOut inner = triplet_loss(unit, ts, m);
    LossOut out;
    out.value = inner.value;
    out.grad_embeddings = normalize_rows_backward(emb, inner.grad_embeddings);
    return out;
}

std::vector<IndexPair> pairs_from_triplets(const TripletSet& ts) {
    std::vector<IndexPair> pairs;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    auto add = [&](std::size_t i, std::size_t j, bool same) {
        const auto key = std::minmax(i, j);
        if (seen.insert(key).second) pairs.push_back({i, j, same});
    };
    for (const Triplet& t : ts.triplets) {
        add(t.anchor, t.positive, true);
        add(t.anchor, t.negative, false);
    }
    return pairs;
}

LossOut contrastive_loss(const Matrix& emb, const std::vector<IndexPair>& pairs,
                         double m, bool normalized) {
    if (pairs.empty()) throw UsageError("contrastive_loss: empty pair set");
    for (const IndexPair& pr : pairs) {
        if (pr.i >= emb.rows() || pr.j >= emb.rows())
            throw UsageError("contrastive_loss: pair index exceeds embedding rows");
    }

    const Matrix base = normalized ? normalize_rows(emb, 1e-12, "contrastive_loss") : emb;
    const std::size_t d = emb.cols();
    const double inv = 1.0 / static_cast<double>(pairs.size());
    Matrix grad(emb.rows(), emb.cols());
    double value = 0.0;
    for (const IndexPair& pr : pairs) {
        const double* xi = base.row(pr.i);
        const double* xj = base.row(pr.j);
        const double d2 = squared_distance(xi, xj, d);
        double coef = 0.0;  // gradient weight on (xi - xj) for row i
        if (pr.same) {
            value += inv * d2;
            coef = 2.0 * inv;
        } else if (m - d2 > 0.0) {
            value += inv * (m - d2);
            coef = -2.0 * inv;
        }
        if (coef != 0.0) {
            double* gi = grad.row(pr.i);
            double* gj = grad.row(pr.j);
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xi[k] - xj[k];
                gi[k] += coef * diff;
                gj[k] -= coef * diff;
            }
        }
    }

    LossOut out;
    out.value = value;
    out.grad_embeddings = normalized ? normalize_rows_backward(emb, grad) : grad;
    return out;
}

LossOut normface_loss(const Matrix& emb, const SoftmaxHead& head,
                      const std::vector<int>& labels, double m) {
    const CosineLayer layer = cosine_forward("normface_loss", emb, head);
    const std::size_t n = emb.rows(), c = head.n_classes();
    check_labels("normface_loss", labels, n, c);

    // For unit vectors |f - w|^2 = 2 - 2 cos, so every pair term is a linear
    // (or hinged linear) function of its cosine.
    const double inv = 1.0 / static_cast<double>(n * c);
    Matrix dcos(n, c);
    LossOut out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double dist2 = 2.0 - 2.0 * layer.cos(i, j);
            if (static_cast<std::size_t>(labels[i]) == j) {
                out.value += inv * dist2;
                dcos(i, j) = -2.0 * inv;
            } else if (m - dist2 > 0.0) {
                out.value += inv * (m - dist2);
                dcos(i, j) = 2.0 * inv;
            }
        }
    }
    cosine_backward(emb, head.weights, layer, dcos, out);
    return out;
}

LossOut cosface_loss(const Matrix& emb, const SoftmaxHead& head,
                     const std::vector<int>& labels, double s, double m) {
    if (s <= 0.0) throw UsageError("cosface_loss: scale must be > 0");
    if (m < 0.0) throw UsageError("cosface_loss: margin must be >= 0");
    const CosineLayer layer = cosine_forward("cosface_loss", emb, head);
    check_labels("cosface_loss", labels, emb.rows(), head.n_classes());

    Matrix logits = layer.cos * s;
    for (std::size_t i = 0; i < emb.rows(); ++i)
        logits(i, static_cast<std::size_t>(labels[i])) -= s * m;
    const LossOut ce = softmax_ce(logits, labels);

    LossOut out;
    out.value = ce.value;
    cosine_backward(emb, head.weights, layer, ce.grad_embeddings * s, out);
    return out;
}

LossOut arcface_loss(const Matrix& emb, const SoftmaxHead& head,
                     const std::vector<int>& labels, double s, double m) {
    if (s <= 0.0) throw UsageError("arcface_loss: scale must be > 0");
    if (m < 0.0) throw UsageError("arcface_loss: margin must be >= 0");
    const CosineLayer layer = cosine_forward("arcface_loss", emb, head);
    const std::size_t n = emb.rows();
    check_labels("arcface_loss", labels, n, head.n_classes());

    const double cos_m = std::cos(m), sin_m = std::sin(m);
    Matrix logits = layer.cos * s;
    std::vector<double> slope(n);  // d(true-class logit)/d(true-class cosine)
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double cos_t = std::clamp(layer.cos(i, y), -1.0, 1.0);
        const double theta = std::acos(cos_t);
        if (theta + m > std::numbers::pi) {
            // Pushing past the antipode would make the loss non-monotone;
            // hold the logit at its minimum instead.
            logits(i, y) = -s;
            slope[i] = 0.0;
        } else {
            const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
            logits(i, y) = s * (cos_t * cos_m - sin_t * sin_m);
            slope[i] = s * (cos_m + cos_t / std::max(sin_t, 1e-12) * sin_m);
        }
    }
    const LossOut ce = softmax_ce(logits, labels);

    Matrix dcos = ce.grad_embeddings * s;
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        dcos(i, y) = ce.grad_embeddings(i, y) * slope[i];
    }
    LossOut out;
    out.value = ce.value;
    cosine_backward(emb, head.weights, layer, dcos, out);
    return out;
}

LossOut scaled_cosine_softmax(const Matrix& emb, const SoftmaxHead& head,
                              const std::vector<int>& labels, double s) {
    if (s <= 0.0) throw UsageError("scaled_cosine_softmax: scale must be > 0");
    const CosineLayer layer = cosine_forward("scaled_cosine_softmax", emb, head);
    check_labels("scaled_cosine_softmax", labels, emb.rows(), head.n_classes());

    const LossOut ce = softmax_ce(layer.cos * s, labels);
    LossOut out;
    out.value = ce.value;
    cosine_backward(emb, head.weights, layer, ce.grad_embeddings * s, out);
    return out;
}

}  // namespace lmfs
