#include "lmfs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lmfs/encoder.hpp"
#include "lmfs/errors.hpp"
#include "lmfs/gnn.hpp"
#include "lmfs/losses.hpp"
#include "lmfs/matrix.hpp"
#include "lmfs/protonet.hpp"
#include "lmfs/train.hpp"
#include "lmfs/triplets.hpp"

namespace lmfs {

namespace {

// One randomized problem: a scalar function of a flat vector, the point to
// probe, and the analytic gradient to compare against.
struct Instance {
    std::function<double(const std::vector<double>&)> f;
    std::vector<double> x0;
    std::vector<double> analytic;
};

// Fills an Instance; returns false to reject a draw that landed too close to
// a nondifferentiable point (hinge boundary, relu kink, angle clamp), where
// central differences are meaningless.
using Maker = std::function<bool(std::mt19937_64&, Instance&)>;

Matrix randn(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = g(rng);
    return m;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix to_matrix(const std::vector<double>& x, std::size_t offset, std::size_t rows,
                 std::size_t cols) {
    Matrix m(rows, cols);
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(offset),
              x.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols), m.data());
    return m;
}

void append(std::vector<double>& out, const Matrix& m) {
    out.insert(out.end(), m.data(), m.data() + m.size());
}

double component_rel_err(double a, double b, const GradCheckOptions& o) {
    const double denom = std::max({std::abs(a), std::abs(b), o.abs_floor / o.tolerance});
    return std::abs(a - b) / denom;
}

CheckRow run_fd_row(const std::string& name, const Maker& make, const GradCheckOptions& o,
                    std::uint64_t salt) {
    std::mt19937_64 rng(mix_seed(o.seed, salt));
    CheckRow row;
    row.name = name;
    for (std::size_t c = 0; c < o.cases; ++c) {
        Instance inst;
        int attempts = 0;
        while (!make(rng, inst)) {
            inst = Instance{};
            if (++attempts > 500)
                throw NumericError("gradcheck: no well-conditioned instance for " + name);
        }
        if (o.corrupt == name && !inst.analytic.empty()) inst.analytic[0] += 0.5;
        const std::vector<double> fd = finite_diff_grad(inst.f, inst.x0);
        if (fd.size() != inst.analytic.size())
            throw ShapeError("gradcheck: gradient length mismatch in " + name);
        for (std::size_t i = 0; i < fd.size(); ++i)
            row.max_rel_err =
                std::max(row.max_rel_err, component_rel_err(inst.analytic[i], fd[i], o));
        ++row.cases;
    }
    row.pass = row.max_rel_err <= o.tolerance;
    return row;
}

CheckRow run_identity_row(const std::string& name,
                          const std::function<double(std::mt19937_64&)>& one_case,
                          const GradCheckOptions& o, std::uint64_t salt) {
    std::mt19937_64 rng(mix_seed(o.seed, salt));
    CheckRow row;
    row.name = name;
    for (std::size_t c = 0; c < o.cases; ++c) {
        row.max_rel_err = std::max(row.max_rel_err, one_case(rng));
        ++row.cases;
    }
    if (o.corrupt == name) row.max_rel_err = std::max(row.max_rel_err, 1.0);
    row.pass = row.max_rel_err <= o.tolerance;
    return row;
}

// ---- shared fixtures -------------------------------------------------------

// Embeddings with a classifier head: 6 samples, 4 dims, 3 classes, plus
// conditioning guards on norms and angles.
struct HeadSetup {
    Matrix emb;
    SoftmaxHead head;
    std::vector<int> labels;
    double s = 10.0;
    Matrix cos;  // n x C cosines, for angle guards
};

bool random_head_setup(std::mt19937_64& rng, HeadSetup& out) {
    const std::size_t n = 6, d = 4, C = 3;
    out.emb = randn(rng, n, d);
    out.head.weights = randn(rng, d, C);
    out.head.bias.clear();
    out.labels.resize(n);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(C) - 1);
    for (int& l : out.labels) l = pick(rng);
    out.s = uniform(rng, 6.0, 12.0);
    for (std::size_t i = 0; i < n; ++i)
        if (l2_norm(out.emb.row(i), d) < 0.3) return false;
    for (std::size_t c = 0; c < C; ++c) {
        double nc = 0.0;
        for (std::size_t j = 0; j < d; ++j) nc += out.head.weights(j, c) * out.head.weights(j, c);
        if (std::sqrt(nc) < 0.3) return false;
    }
    const Matrix unit_e = normalize_rows(out.emb);
    const Matrix unit_w = transpose(normalize_rows(transpose(out.head.weights)));
    out.cos = matmul(unit_e, unit_w);
    for (double v : out.cos.storage())
        if (std::abs(v) > 0.99) return false;
    return true;
}

enum class HeadLoss { normface, cosface, arcface, scaled };

LossOut eval_head(HeadLoss which, const Matrix& emb, const SoftmaxHead& head,
                  const std::vector<int>& labels, double s, double m) {
    switch (which) {
        case HeadLoss::normface: return normface_loss(emb, head, labels, m);
        case HeadLoss::cosface: return cosface_loss(emb, head, labels, s, m);
        case HeadLoss::arcface: return arcface_loss(emb, head, labels, s, m);
        case HeadLoss::scaled: return scaled_cosine_softmax(emb, head, labels, s);
    }
    throw UsageError("eval_head: unreachable");
}

Maker head_maker(HeadLoss which) {
    return [which](std::mt19937_64& rng, Instance& inst) -> bool {
        HeadSetup setup;
        if (!random_head_setup(rng, setup)) return false;
        const double m = uniform(rng, 0.2, 0.5);
        if (which == HeadLoss::arcface) {
            // Keep every target angle clear of the theta + m = pi clamp where
            // the analytic slope switches branches.
            for (std::size_t i = 0; i < setup.emb.rows(); ++i) {
                const double theta =
                    std::acos(setup.cos(i, static_cast<std::size_t>(setup.labels[i])));
                if (std::abs(theta + m - 3.14159265358979323846) < 0.02) return false;
            }
        }
        const std::size_t n = setup.emb.rows(), d = setup.emb.cols(),
                          C = setup.head.weights.cols();
        append(inst.x0, setup.emb);
        append(inst.x0, setup.head.weights);
        const std::vector<int> labels = setup.labels;
        const double s = setup.s;
        inst.f = [=](const std::vector<double>& x) {
            const Matrix emb = to_matrix(x, 0, n, d);
            SoftmaxHead head;
            head.weights = to_matrix(x, n * d, d, C);
            return eval_head(which, emb, head, labels, s, m).value;
        };
        const LossOut out = eval_head(which, setup.emb, setup.head, labels, s, m);
        append(inst.analytic, out.grad_embeddings);
        append(inst.analytic, out.grad_weights);
        return true;
    };
}

// Labeled embedding batch with a triplet set: 3 classes x 4 samples, 4 dims.
struct TripletSetup {
    Matrix emb;
    std::vector<int> labels;
    TripletSet ts;
    double m = 0.5;
};

// all_active forces every hinge strictly positive (the Eq. 6 precondition);
// otherwise margins land wherever they land, rejected only near the boundary.
bool random_triplet_setup(std::mt19937_64& rng, bool normalized, bool all_active,
                          TripletSetup& out) {
    const std::size_t classes = 3, per_class = 4, d = 4;
    const std::size_t n = classes * per_class;
    out.emb = randn(rng, n, d);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(i / per_class);
    if (normalized)
        for (std::size_t i = 0; i < n; ++i)
            if (l2_norm(out.emb.row(i), d) < 0.3) return false;

    out.ts.triplets.clear();
    std::uniform_int_distribution<std::size_t> pick_sample(0, n - 1);
    for (int t = 0; t < 15; ++t) {
        Triplet tr;
        tr.anchor = pick_sample(rng);
        const std::size_t cls = tr.anchor / per_class;
        do {
            tr.positive = cls * per_class + pick_sample(rng) % per_class;
        } while (tr.positive == tr.anchor);
        do {
            tr.negative = pick_sample(rng);
        } while (tr.negative / per_class == cls);
        out.ts.triplets.push_back(tr);
    }

    const Matrix scored = normalized ? normalize_rows(out.emb) : out.emb;
    if (all_active) {
        double need = 0.0;
        for (const Triplet& t : out.ts.triplets) {
            const double gap = squared_distance(scored.row(t.anchor), scored.row(t.negative), d) -
                               squared_distance(scored.row(t.anchor), scored.row(t.positive), d);
            need = std::max(need, gap);
        }
        out.m = need + 0.3;
        return true;
    }
    out.m = uniform(rng, 0.3, 0.8);
    for (const Triplet& t : out.ts.triplets) {
        const double bracket =
            squared_distance(scored.row(t.anchor), scored.row(t.positive), d) -
            squared_distance(scored.row(t.anchor), scored.row(t.negative), d) + out.m;
        if (std::abs(bracket) < 1e-3) return false;
    }
    return true;
}

Maker triplet_maker(bool normalized) {
    return [normalized](std::mt19937_64& rng, Instance& inst) -> bool {
        TripletSetup setup;
        if (!random_triplet_setup(rng, normalized, false, setup)) return false;
        const std::size_t n = setup.emb.rows(), d = setup.emb.cols();
        append(inst.x0, setup.emb);
        const TripletSet ts = setup.ts;
        const double m = setup.m;
        inst.f = [=](const std::vector<double>& x) {
            const Matrix emb = to_matrix(x, 0, n, d);
            return normalized ? normalized_triplet_loss(emb, ts, m).value
                              : triplet_loss(emb, ts, m).value;
        };
        const LossOut out = normalized ? normalized_triplet_loss(setup.emb, ts, m)
                                       : triplet_loss(setup.emb, ts, m);
        append(inst.analytic, out.grad_embeddings);
        return true;
    };
}

Maker contrastive_maker(bool normalized) {
    return [normalized](std::mt19937_64& rng, Instance& inst) -> bool {
        TripletSetup setup;
        if (!random_triplet_setup(rng, normalized, false, setup)) return false;
        const std::vector<IndexPair> pairs = pairs_from_triplets(setup.ts);
        const std::size_t n = setup.emb.rows(), d = setup.emb.cols();
        const Matrix scored = normalized ? normalize_rows(setup.emb) : setup.emb;
        for (const IndexPair& p : pairs) {
            if (p.same) continue;  // pull term is smooth
            const double hinge =
                setup.m - squared_distance(scored.row(p.i), scored.row(p.j), d);
            if (std::abs(hinge) < 1e-3) return false;
        }
        append(inst.x0, setup.emb);
        const double m = setup.m;
        inst.f = [=](const std::vector<double>& x) {
            return contrastive_loss(to_matrix(x, 0, n, d), pairs, m, normalized).value;
        };
        append(inst.analytic, contrastive_loss(setup.emb, pairs, m, normalized).grad_embeddings);
        return true;
    };
}

Maker softmax_maker() {
    return [](std::mt19937_64& rng, Instance& inst) -> bool {
        const std::size_t n = 6, C = 4;
        const Matrix logits = randn(rng, n, C, 2.0);
        std::vector<int> labels(n);
        std::uniform_int_distribution<int> pick(0, static_cast<int>(C) - 1);
        for (int& l : labels) l = pick(rng);
        append(inst.x0, logits);
        inst.f = [=](const std::vector<double>& x) {
            return softmax_ce(to_matrix(x, 0, n, C), labels).value;
        };
        append(inst.analytic, softmax_ce(logits, labels).grad_embeddings);
        return true;
    };
}

// Slot-labeled episode skeleton for the prototypical loss: 3-way, 2-shot,
// 2 queries per class.
Episode pn_episode_skeleton() {
    Episode ep;
    ep.support_y = {0, 0, 1, 1, 2, 2};
    ep.query_y = {0, 0, 1, 1, 2, 2};
    ep.support_x = Matrix(6, 2);
    ep.query_x = Matrix(6, 2);
    ep.class_map = {0, 1, 2};
    return ep;
}

Maker pn_maker(PnMetric metric) {
    return [metric](std::mt19937_64& rng, Instance& inst) -> bool {
        const Episode ep = pn_episode_skeleton();
        const std::size_t n = 12, d = 4;
        const Matrix emb0 = randn(rng, n, d);
        const double scale = uniform(rng, 4.0, 8.0);
        if (metric == PnMetric::cosine) {
            Matrix support(6, d);
            std::copy(emb0.data(), emb0.data() + 6 * d, support.data());
            const PrototypeSet protos = prototypes(support, ep.support_y, metric, scale);
            for (std::size_t k = 0; k < protos.centers.rows(); ++k)
                if (l2_norm(protos.centers.row(k), d) < 0.3) return false;
            for (std::size_t i = 0; i < n; ++i)
                if (l2_norm(emb0.row(i), d) < 0.3) return false;
        }
        append(inst.x0, emb0);
        inst.f = [=](const std::vector<double>& x) {
            const Matrix emb = to_matrix(x, 0, n, d);
            Matrix support(6, d);
            std::copy(emb.data(), emb.data() + 6 * d, support.data());
            const PrototypeSet protos = prototypes(support, ep.support_y, metric, scale);
            return pn_loss(emb, ep, protos).value;
        };
        Matrix support(6, d);
        std::copy(emb0.data(), emb0.data() + 6 * d, support.data());
        const PrototypeSet protos = prototypes(support, ep.support_y, metric, scale);
        append(inst.analytic, pn_loss(emb0, ep, protos).grad_embeddings);
        return true;
    };
}

Maker encoder_maker(Activation act) {
    return [act](std::mt19937_64& rng, Instance& inst) -> bool {
        EncoderSpec spec;
        spec.layer_widths = {3, 5, 4};
        spec.activation = act;
        EncoderParams params = encoder_init(spec, rng());
        const Matrix x_in = randn(rng, 6, 3);
        const Matrix g_out = randn(rng, 6, 4);

        const EncoderForward fwd = encoder_forward(params, x_in);
        if (act == Activation::relu) {
            // Hidden pre-activations near zero sit on the relu kink.
            for (std::size_t l = 0; l + 1 < fwd.cache.pre_activations.size(); ++l)
                for (double v : fwd.cache.pre_activations[l].storage())
                    if (std::abs(v) < 1e-3) return false;
        }

        inst.x0 = params.flatten();
        const std::size_t n_par = inst.x0.size();
        append(inst.x0, x_in);
        inst.f = [=](const std::vector<double>& x) {
            EncoderParams p = params;
            p.unflatten(x);  // reads the parameter prefix
            const Matrix input = to_matrix(x, n_par, 6, 3);
            const Matrix emb = encoder_forward(p, input).embeddings;
            double v = 0.0;
            for (std::size_t i = 0; i < emb.size(); ++i) v += emb.data()[i] * g_out.data()[i];
            return v;
        };
        const EncoderBackward back = encoder_backward(params, fwd.cache, g_out);
        inst.analytic = back.grad_params.flatten();
        append(inst.analytic, back.grad_input);
        return true;
    };
}

Maker gnn_maker(AdjacencyMode mode) {
    return [mode](std::mt19937_64& rng, Instance& inst) -> bool {
        EncoderSpec enc_spec;
        enc_spec.layer_widths = {3, 5, 4};
        enc_spec.activation = Activation::tanh_;
        GnnConfig config;
        config.d_embed = 4;
        config.n_classes = 2;
        config.layer_dims = {5, 3};
        config.adjacency_hidden = {4};
        config.adjacency_mode = mode;
        config.leaky_slope = 0.2;

        Episode ep;
        ep.support_x = randn(rng, 2, 3);
        ep.support_y = {0, 1};
        ep.query_x = randn(rng, 1, 3);
        ep.query_y = {std::uniform_int_distribution<int>(0, 1)(rng)};
        ep.unlabeled_x = randn(rng, 1, 3);
        ep.class_map = {0, 1};

        const EncoderParams enc = encoder_init(enc_spec, rng());
        const GnnParams gnn = gnn_init(config, rng());
        const GnnForward fwd = gnn_forward(ep, enc, gnn);

        // Leaky-relu kinks in the hidden graph layers.
        for (std::size_t l = 0; l + 1 < fwd.cache.layers.size(); ++l)
            for (double v : fwd.cache.layers[l].pre.storage())
                if (std::abs(v) < 1e-3) return false;
        // |x_i - x_j| kinks in the edge features. Exactly-zero differences are
        // structural ties (diagonal pairs, and the constant uniform label block
        // shared by query/unlabeled rows): both sides are parameter-independent
        // there, so the derivative through them is zero no matter which
        // subgradient the backward pass picks. Only near-zero-but-nonzero
        // differences make the finite-difference probe unreliable.
        for (const GnnAdjCache& adj : fwd.cache.adj) {
            const Matrix& x = adj.x;
            for (std::size_t i = 0; i < x.rows(); ++i)
                for (std::size_t j = 0; j < x.rows(); ++j) {
                    if (i == j) continue;
                    for (std::size_t c = 0; c < x.cols(); ++c) {
                        const double d = std::abs(x(i, c) - x(j, c));
                        if (d != 0.0 && d < 1e-3) return false;
                    }
                }
        }

        const std::vector<double> u{uniform(rng, -1, 1), uniform(rng, -1, 1)};
        const Matrix v_out = randn(rng, fwd.final_embeddings.rows(), fwd.final_embeddings.cols());

        inst.x0 = enc.flatten();
        const std::size_t n_enc = inst.x0.size();
        const std::vector<double> gflat = gnn.flatten();
        inst.x0.insert(inst.x0.end(), gflat.begin(), gflat.end());
        inst.f = [=](const std::vector<double>& x) {
            EncoderParams e = enc;
            GnnParams g = gnn;
            e.unflatten(x);
            g.unflatten(x, n_enc);
            const GnnForward out = gnn_forward(ep, e, g);
            double v = out.query_logits[0] * u[0] + out.query_logits[1] * u[1];
            for (std::size_t i = 0; i < out.final_embeddings.size(); ++i)
                v += out.final_embeddings.data()[i] * v_out.data()[i];
            return v;
        };
        const GnnBackward back = gnn_backward(enc, gnn, fwd.cache, u, v_out);
        inst.analytic = back.grad_encoder.flatten();
        const std::vector<double> gg = back.grad_gnn.flatten();
        inst.analytic.insert(inst.analytic.end(), gg.begin(), gg.end());
        return true;
    };
}

// ---- exact identities ------------------------------------------------------

double eq6_case(std::mt19937_64& rng, const GradCheckOptions& o) {
    TripletSetup setup;
    while (!random_triplet_setup(rng, false, true, setup)) {
    }
    const LossOut full = triplet_loss(setup.emb, setup.ts, setup.m);
    double err = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
        const std::size_t pivot =
            std::uniform_int_distribution<std::size_t>(0, setup.emb.rows() - 1)(rng);
        const std::vector<double> dec =
            triplet_grad_decomposition(setup.emb, setup.ts, setup.labels, pivot, setup.m);
        for (std::size_t j = 0; j < dec.size(); ++j)
            err = std::max(err, component_rel_err(full.grad_embeddings(pivot, j), dec[j], o));
    }
    return err;
}

double pn_linearity_case(std::mt19937_64& rng, const GradCheckOptions& o) {
    const Matrix support = randn(rng, 6, 4);
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const PrototypeSet protos = prototypes(support, labels, PnMetric::euclidean);
    const Matrix queries = randn(rng, 5, 4);
    const Matrix probs = pn_classify(queries, protos);

    const PnLinear lin = pn_linearize(protos);
    Matrix logits(queries.rows(), protos.n_classes());
    for (std::size_t i = 0; i < queries.rows(); ++i)
        for (std::size_t k = 0; k < protos.n_classes(); ++k) {
            double v = lin.bias[k];
            for (std::size_t j = 0; j < queries.cols(); ++j)
                v += queries(i, j) * lin.weights(j, k);
            logits(i, k) = v;
        }
    const Matrix probs_lin = softmax_rows(logits);

    double err = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t a = 0, b = 0;
        for (std::size_t k = 1; k < probs.cols(); ++k) {
            if (probs(i, k) > probs(i, a)) a = k;
            if (probs_lin(i, k) > probs_lin(i, b)) b = k;
        }
        if (a != b) return 1.0;
        for (std::size_t k = 0; k < probs.cols(); ++k)
            err = std::max(err, component_rel_err(probs(i, k), probs_lin(i, k), o));
    }
    return err;
}

double reduction_case(std::mt19937_64& rng, const GradCheckOptions& o, bool arc) {
    HeadSetup setup;
    while (!random_head_setup(rng, setup)) {
    }
    const LossOut a = arc ? arcface_loss(setup.emb, setup.head, setup.labels, setup.s, 0.0)
                          : cosface_loss(setup.emb, setup.head, setup.labels, setup.s, 0.0);
    const LossOut b = scaled_cosine_softmax(setup.emb, setup.head, setup.labels, setup.s);
    double err = component_rel_err(a.value, b.value, o);
    for (std::size_t i = 0; i < a.grad_embeddings.size(); ++i)
        err = std::max(err, component_rel_err(a.grad_embeddings.data()[i],
                                              b.grad_embeddings.data()[i], o));
    for (std::size_t i = 0; i < a.grad_weights.size(); ++i)
        err = std::max(err,
                       component_rel_err(a.grad_weights.data()[i], b.grad_weights.data()[i], o));
    return err;
}

}  // namespace

std::vector<CheckRow> run_gradient_checks(const GradCheckOptions& opts) {
    std::vector<CheckRow> rows;
    std::uint64_t salt = 10;
    rows.push_back(run_fd_row("softmax_ce", softmax_maker(), opts, ++salt));
    rows.push_back(run_fd_row("triplet", triplet_maker(false), opts, ++salt));
    rows.push_back(run_fd_row("normalized_triplet", triplet_maker(true), opts, ++salt));
    rows.push_back(run_fd_row("contrastive", contrastive_maker(false), opts, ++salt));
    rows.push_back(run_fd_row("normalized_contrastive", contrastive_maker(true), opts, ++salt));
    rows.push_back(run_fd_row("normface", head_maker(HeadLoss::normface), opts, ++salt));
    rows.push_back(run_fd_row("cosface", head_maker(HeadLoss::cosface), opts, ++salt));
    rows.push_back(run_fd_row("arcface", head_maker(HeadLoss::arcface), opts, ++salt));
    rows.push_back(
        run_fd_row("scaled_cosine_softmax", head_maker(HeadLoss::scaled), opts, ++salt));
    rows.push_back(run_fd_row("pn_loss_euclidean", pn_maker(PnMetric::euclidean), opts, ++salt));
    rows.push_back(run_fd_row("pn_loss_cosine", pn_maker(PnMetric::cosine), opts, ++salt));
    rows.push_back(run_fd_row("encoder_relu", encoder_maker(Activation::relu), opts, ++salt));
    rows.push_back(run_fd_row("encoder_tanh", encoder_maker(Activation::tanh_), opts, ++salt));
    rows.push_back(
        run_fd_row("gnn_end_to_end", gnn_maker(AdjacencyMode::per_layer), opts, ++salt));
    rows.push_back(
        run_fd_row("gnn_static_adjacency", gnn_maker(AdjacencyMode::static_once), opts, ++salt));
    rows.push_back(run_identity_row(
        "eq6_decomposition", [&](std::mt19937_64& rng) { return eq6_case(rng, opts); }, opts,
        ++salt));
    rows.push_back(run_identity_row(
        "pn_linearity", [&](std::mt19937_64& rng) { return pn_linearity_case(rng, opts); }, opts,
        ++salt));
    rows.push_back(run_identity_row(
        "reduction_cosface",
        [&](std::mt19937_64& rng) { return reduction_case(rng, opts, false); }, opts, ++salt));
    rows.push_back(run_identity_row(
        "reduction_arcface",
        [&](std::mt19937_64& rng) { return reduction_case(rng, opts, true); }, opts, ++salt));
    return rows;
}

bool all_pass(const std::vector<CheckRow>& rows) {
    for (const CheckRow& row : rows)
        if (!row.pass) return false;
    return true;
}

}  // namespace lmfs
