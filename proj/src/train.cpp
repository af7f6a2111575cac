#include "lmfs/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "lmfs/errors.hpp"
#include "lmfs/triplets.hpp"

namespace lmfs {

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "pn") return ModelKind::pn;
    if (name == "gnn") return ModelKind::gnn;
    throw ConfigError("unknown model '" + name + "' (expected pn or gnn)");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::pn ? "pn" : "gnn"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

MarginMode margin_mode_from_string(const std::string& name) {
    if (name == "fixed") return MarginMode::fixed;
    if (name == "heuristic") return MarginMode::heuristic;
    throw ConfigError("unknown margin mode '" + name + "' (expected fixed or heuristic)");
}

std::string to_string(MarginMode mode) {
    return mode == MarginMode::fixed ? "fixed" : "heuristic";
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("optimizer.learning_rate must be > 0");
    if (kind == OptimizerKind::adam) {
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
            throw ConfigError("optimizer.beta1 and optimizer.beta2 must lie in [0, 1)");
        if (!(eps > 0)) throw ConfigError("optimizer.eps must be > 0");
    }
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t n_params) : config_(config) {
    config_.validate();
    if (config_.kind == OptimizerKind::adam) {
        m_.assign(n_params, 0.0);
        v_.assign(n_params, 0.0);
    }
}

void Optimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != grad.size())
        throw ShapeError("optimizer step: gradient size " + std::to_string(grad.size()) +
                         " does not match parameter size " + std::to_string(params.size()));
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
        return;
    }
    if (m_.size() != params.size())
        throw ShapeError("optimizer step: moment state sized for a different parameter count");
    ++t_;
    const double corr1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double corr2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        params[i] -= lr * (m_[i] / corr1) / (std::sqrt(v_[i] / corr2) + config_.eps);
    }
}

double clip_global_norm(std::vector<double>& grad, double max_norm) {
    const double norm = l2_norm(grad.data(), grad.size());
    if (max_norm > 0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& g : grad) g *= scale;
    }
    return norm;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + (salt + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double margin_heuristic(const Matrix& embeddings, std::size_t n_b) {
    if (embeddings.rows() == 0) throw UsageError("margin_heuristic: empty embedding batch");
    if (n_b != embeddings.rows())
        throw UsageError("margin_heuristic: n_b must equal the number of embedding rows");
    double sum = 0.0;
    for (std::size_t i = 0; i < embeddings.rows(); ++i)
        sum += l2_norm(embeddings.row(i), embeddings.cols());
    return sum / (2.0 * static_cast<double>(n_b));
}

void TrainConfig::validate() const {
    episode.validate();
    loss.validate();
    optimizer.validate();
    encoder.validate();
    if (n_updates < 1) throw ConfigError("train.n_updates must be >= 1");
    if (eval_every > 0 && eval_episodes < 2)
        throw ConfigError("train.eval_episodes must be >= 2 when eval_every is set");
    const bool angular = loss.kind == LossKind::normface || loss.kind == LossKind::cosface ||
                         loss.kind == LossKind::arcface;
    if (model == ModelKind::pn) {
        if (batch_episodes != 1)
            throw ConfigError(
                "train.batch_episodes applies to the graph model; the prototypical model "
                "takes one episode per update");
        if (angular)
            throw ConfigError("train.loss.kind " + to_string(loss.kind) +
                              " scores against classifier weight columns; the prototypical "
                              "classifier has none");
        if (!(pn_scale > 0)) throw ConfigError("train.pn_scale must be > 0");
    } else {
        if (batch_episodes < 1) throw ConfigError("train.batch_episodes must be >= 1");
        gnn.validate();
        if (gnn.d_embed != encoder.output_dim())
            throw ConfigError("train.gnn.d_embed must equal the encoder output width");
        if (gnn.n_classes != static_cast<std::size_t>(episode.c_way))
            throw ConfigError("train.gnn.n_classes must equal episode.c_way");
    }
    if (margin_mode == MarginMode::heuristic &&
        (loss.kind == LossKind::cosface || loss.kind == LossKind::arcface))
        throw ConfigError("train.margin_mode heuristic derives a distance-space margin; " +
                          to_string(loss.kind) + " takes a fixed angular margin");
}

namespace {

bool margin_uses_triplets(LossKind k) {
    return k == LossKind::triplet || k == LossKind::normalized_triplet ||
           k == LossKind::contrastive || k == LossKind::normalized_contrastive;
}

bool margin_uses_pairs(LossKind k) {
    return k == LossKind::contrastive || k == LossKind::normalized_contrastive;
}

bool margin_normalizes(LossKind k) {
    return k == LossKind::normalized_triplet || k == LossKind::normalized_contrastive ||
           k == LossKind::normface;
}

// The normalized kinds pair their margin term with angle-based classification
// (scaled cosine softmax); cosface/arcface are angle-based outright.
bool cosine_classification(LossKind k) {
    return k == LossKind::normalized_triplet || k == LossKind::normalized_contrastive ||
           k == LossKind::normface || k == LossKind::cosface || k == LossKind::arcface;
}

void accumulate(EncoderParams& into, const EncoderParams& from) {
    for (std::size_t l = 0; l < into.weights.size(); ++l) {
        into.weights[l] += from.weights[l];
        for (std::size_t j = 0; j < into.biases[l].size(); ++j)
            into.biases[l][j] += from.biases[l][j];
    }
}

void accumulate(GnnParams& into, const GnnParams& from) {
    for (std::size_t i = 0; i < into.edge_mlps.size(); ++i)
        accumulate(into.edge_mlps[i], from.edge_mlps[i]);
    for (std::size_t l = 0; l < into.proj_adj.size(); ++l) {
        into.proj_adj[l] += from.proj_adj[l];
        into.proj_mean[l] += from.proj_mean[l];
    }
    into.head.weights += from.head.weights;
    for (std::size_t j = 0; j < into.head.bias.size(); ++j)
        into.head.bias[j] += from.head.bias[j];
}

Matrix first_rows(const Matrix& m, std::size_t n) {
    Matrix out(n, m.cols());
    std::copy(m.data(), m.data() + n * m.cols(), out.data());
    return out;
}

}  // namespace

TrainResult train_episodic(const TrainConfig& config, const Dataset& dataset,
                           const ClassSplit& split) {
    config.validate();
    split.validate_disjoint();
    if (config.encoder.input_dim() != dataset.dim())
        throw ConfigError("train.encoder input width must equal the dataset feature width");

    const Dataset train_ds = dataset.restricted_to(split.train);
    const bool want_eval = config.eval_every > 0;
    const Dataset val_ds = want_eval ? dataset.restricted_to(split.val) : Dataset{};

    // At lambda == 0 the margin term vanishes, and the run must reproduce the
    // kind=none baseline update-for-update (same classification loss, no
    // triplet draws). cosface/arcface replace the classification loss itself
    // and are not weighted by lambda, so they never collapse this way.
    const bool replaces = config.loss.kind == LossKind::cosface ||
                          config.loss.kind == LossKind::arcface;
    const LossKind kind =
        (!replaces && config.loss.lambda == 0.0) ? LossKind::none : config.loss.kind;
    const double lambda = config.loss.lambda;
    const double scale = config.loss.scale;
    const bool margin_term = kind != LossKind::none && !replaces;

    std::mt19937_64 episode_rng(mix_seed(config.seed, 1));
    std::mt19937_64 triplet_rng(mix_seed(config.seed, 2));

    Model model;
    model.kind = config.model;
    model.encoder = encoder_init(config.encoder, mix_seed(config.seed, 3));
    model.pn_metric = config.pn_metric;
    model.pn_scale = config.pn_scale;
    if (config.model == ModelKind::gnn) {
        model.gnn = gnn_init(config.gnn, mix_seed(config.seed, 4));
        model.gnn_cosine_head = cosine_classification(kind);
    }

    const std::size_t enc_count = model.encoder.param_count();
    const std::size_t n_params =
        enc_count + (config.model == ModelKind::gnn ? model.gnn.param_count() : 0);
    std::vector<double> params(n_params);
    {
        const std::vector<double> e = model.encoder.flatten();
        std::copy(e.begin(), e.end(), params.begin());
        if (config.model == ModelKind::gnn) {
            const std::vector<double> g = model.gnn.flatten();
            std::copy(g.begin(), g.end(), params.begin() + static_cast<std::ptrdiff_t>(enc_count));
        }
    }
    Optimizer opt(config.optimizer, n_params);

    double m_eff = config.loss.margin;
    bool margin_ready =
        !(margin_term || replaces) || config.margin_mode == MarginMode::fixed;
    // Episode shapes are fixed for the whole job and episode labels follow the
    // slot layout, so the index pattern drawn on the first batch stays valid
    // and is reused for every later one.
    TripletSet triplets;
    std::vector<IndexPair> pairs;
    bool triplets_ready = !(margin_term && margin_uses_triplets(kind));

    auto settle_margin = [&](const Matrix& scored) {
        const Matrix basis = margin_normalizes(kind) ? normalize_rows(scored) : scored;
        const double m = margin_heuristic(basis, basis.rows());
        if (m > 0) {
            m_eff = m;
        } else {
            std::cerr << "warning: margin heuristic produced m=" << m
                      << "; keeping the configured margin " << m_eff << "\n";
        }
        margin_ready = true;
    };

    std::vector<double> grad(n_params, 0.0);

    // One prototypical update: a single episode through the encoder, episode
    // loss on the prototypes, margin term on the same embedding rows.
    auto pn_step = [&]() -> double {
        Episode ep = sample_episode(train_ds, config.episode, episode_rng);
        const Matrix x = vstack(ep.support_x, ep.query_x);
        EncoderForward fwd = encoder_forward(model.encoder, x);
        const Matrix& emb = fwd.embeddings;

        if (!triplets_ready) {
            triplets = select_triplets_pn(ep, triplet_rng);
            if (margin_uses_pairs(kind)) pairs = pairs_from_triplets(triplets);
            triplets_ready = true;
        }
        if (!margin_ready) settle_margin(emb);

        const Matrix support_emb = first_rows(emb, ep.support_y.size());
        const PrototypeSet protos =
            prototypes(support_emb, ep.support_y, config.pn_metric, config.pn_scale);
        const LossOut cls = pn_loss(emb, ep, protos);

        LossOut total = cls;
        if (margin_term) {
            LossOut margin;
            switch (kind) {
                case LossKind::triplet: margin = triplet_loss(emb, triplets, m_eff); break;
                case LossKind::normalized_triplet:
                    margin = normalized_triplet_loss(emb, triplets, m_eff);
                    break;
                case LossKind::contrastive:
                    margin = contrastive_loss(emb, pairs, m_eff, false);
                    break;
                case LossKind::normalized_contrastive:
                    margin = contrastive_loss(emb, pairs, m_eff, true);
                    break;
                default: break;  // angular kinds are rejected for pn in validate()
            }
            total = total_loss(cls, margin, lambda);
        }

        const EncoderBackward back =
            encoder_backward(model.encoder, fwd.cache, total.grad_embeddings);
        const std::vector<double> g = back.grad_params.flatten();
        std::copy(g.begin(), g.end(), grad.begin());
        return total.value;
    };

    // One graph-model update: a batch of single-query episodes; classification
    // on the query nodes, margin term on the support-node stack (normface on
    // the query stack, which is also what its softmax scores).
    auto gnn_step = [&]() -> double {
        const std::size_t n_batch = config.batch_episodes;
        std::vector<Episode> batch;
        batch.reserve(n_batch);
        for (std::size_t b = 0; b < n_batch; ++b)
            batch.push_back(
                single_query_episode(sample_episode(train_ds, config.episode, episode_rng),
                                     episode_rng));

        std::vector<GnnForward> fwds;
        fwds.reserve(n_batch);
        for (const Episode& ep : batch) fwds.push_back(gnn_forward(ep, model.encoder, model.gnn));

        const std::size_t n_sup = batch[0].support_y.size();
        const std::size_t d_out = config.gnn.layer_dims.back();
        const std::size_t n_cls = config.gnn.n_classes;

        Matrix support_stack(n_batch * n_sup, d_out);
        Matrix query_emb(n_batch, d_out);
        std::vector<int> query_labels(n_batch);
        for (std::size_t b = 0; b < n_batch; ++b) {
            const Matrix& xf = fwds[b].final_embeddings;
            for (std::size_t i = 0; i < n_sup; ++i)
                std::copy(xf.row(i), xf.row(i) + d_out, support_stack.row(b * n_sup + i));
            std::copy(xf.row(n_sup), xf.row(n_sup) + d_out, query_emb.row(b));
            query_labels[b] = batch[b].query_y[0];
        }

        if (!triplets_ready) {
            std::vector<std::vector<int>> batch_labels;
            batch_labels.reserve(n_batch);
            for (const Episode& ep : batch) batch_labels.push_back(ep.support_y);
            triplets = select_triplets_gnn(batch_labels, triplet_rng);
            if (margin_uses_pairs(kind)) pairs = pairs_from_triplets(triplets);
            triplets_ready = true;
        }
        if (!margin_ready)
            settle_margin(kind == LossKind::normface ? query_emb : support_stack);

        LossOut cls;
        const bool plain_logits = !cosine_classification(kind);
        if (plain_logits) {
            Matrix logits(n_batch, n_cls);
            for (std::size_t b = 0; b < n_batch; ++b)
                std::copy(fwds[b].query_logits.begin(), fwds[b].query_logits.end(),
                          logits.row(b));
            cls = softmax_ce(logits, query_labels);
        } else if (kind == LossKind::cosface) {
            cls = cosface_loss(query_emb, model.gnn.head, query_labels, scale, m_eff);
        } else if (kind == LossKind::arcface) {
            cls = arcface_loss(query_emb, model.gnn.head, query_labels, scale, m_eff);
        } else {
            cls = scaled_cosine_softmax(query_emb, model.gnn.head, query_labels, scale);
        }

        LossOut margin;
        if (margin_term) {
            switch (kind) {
                case LossKind::triplet:
                    margin = triplet_loss(support_stack, triplets, m_eff);
                    break;
                case LossKind::normalized_triplet:
                    margin = normalized_triplet_loss(support_stack, triplets, m_eff);
                    break;
                case LossKind::contrastive:
                    margin = contrastive_loss(support_stack, pairs, m_eff, false);
                    break;
                case LossKind::normalized_contrastive:
                    margin = contrastive_loss(support_stack, pairs, m_eff, true);
                    break;
                case LossKind::normface:
                    margin = normface_loss(query_emb, model.gnn.head, query_labels, m_eff);
                    break;
                default: break;
            }
        }
        const double total_value = cls.value + (margin_term ? lambda * margin.value : 0.0);

        EncoderParams grad_enc = EncoderParams::zeros_like(model.encoder);
        GnnParams grad_gnn = GnnParams::zeros_like(model.gnn);
        for (std::size_t b = 0; b < n_batch; ++b) {
            std::vector<double> grad_logits;
            Matrix grad_final(fwds[b].final_embeddings.rows(), d_out);
            if (plain_logits) {
                grad_logits.assign(n_cls, 0.0);
                for (std::size_t c = 0; c < n_cls; ++c) grad_logits[c] = cls.grad_embeddings(b, c);
            } else {
                for (std::size_t j = 0; j < d_out; ++j)
                    grad_final(n_sup, j) += cls.grad_embeddings(b, j);
            }
            if (margin_term) {
                if (kind == LossKind::normface) {
                    for (std::size_t j = 0; j < d_out; ++j)
                        grad_final(n_sup, j) += lambda * margin.grad_embeddings(b, j);
                } else {
                    for (std::size_t i = 0; i < n_sup; ++i)
                        for (std::size_t j = 0; j < d_out; ++j)
                            grad_final(i, j) += lambda * margin.grad_embeddings(b * n_sup + i, j);
                }
            }
            const GnnBackward back =
                gnn_backward(model.encoder, model.gnn, fwds[b].cache, grad_logits, grad_final);
            accumulate(grad_enc, back.grad_encoder);
            accumulate(grad_gnn, back.grad_gnn);
        }
        // The cosine-space losses differentiate the head columns directly,
        // outside the per-episode graph backward.
        if (cls.grad_weights.rows() > 0) grad_gnn.head.weights += cls.grad_weights;
        if (margin_term && margin.grad_weights.rows() > 0) {
            Matrix gw = margin.grad_weights;
            gw *= lambda;
            grad_gnn.head.weights += gw;
        }

        const std::vector<double> ge = grad_enc.flatten();
        std::copy(ge.begin(), ge.end(), grad.begin());
        const std::vector<double> gg = grad_gnn.flatten();
        std::copy(gg.begin(), gg.end(), grad.begin() + static_cast<std::ptrdiff_t>(enc_count));
        return total_value;
    };

    TrainHistory history;
    std::size_t eval_count = 0;
    for (std::size_t u = 1; u <= config.n_updates; ++u) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double batch_loss = config.model == ModelKind::pn ? pn_step() : gnn_step();
        if (!std::isfinite(batch_loss))
            throw DivergenceError(
                "training loss became non-finite at update " + std::to_string(u), u);

        clip_global_norm(grad, config.clip_norm);
        opt.step(params, grad);
        model.encoder.unflatten(params, 0);
        if (config.model == ModelKind::gnn) model.gnn.unflatten(params, enc_count);

        if (want_eval && (u % config.eval_every == 0 || u == config.n_updates)) {
            const EvalResult ev = evaluate(model, val_ds, config.episode, config.eval_episodes,
                                           mix_seed(config.seed, 100 + eval_count));
            ++eval_count;
            history.rows.push_back({u, batch_loss, ev.mean_accuracy, ev.ci95, m_eff});
        }
    }

    TrainResult result;
    result.model = std::move(model);
    result.history = std::move(history);
    result.margin_used = m_eff;
    return result;
}

double episode_accuracy(const Model& model, const Dataset& dataset, const EpisodeSpec& spec,
                        std::mt19937_64& rng) {
    if (model.kind == ModelKind::pn) {
        const Episode ep = sample_episode(dataset, spec, rng);
        const Matrix emb_s = encoder_forward(model.encoder, ep.support_x).embeddings;
        const Matrix emb_q = encoder_forward(model.encoder, ep.query_x).embeddings;
        const PrototypeSet protos =
            prototypes(emb_s, ep.support_y, model.pn_metric, model.pn_scale);
        const Matrix probs = pn_classify(emb_q, protos);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < probs.rows(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs.cols(); ++c)
                if (probs(i, c) > probs(i, best)) best = c;
            if (static_cast<int>(best) == ep.query_y[i]) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(probs.rows());
    }
    const Episode ep = single_query_episode(sample_episode(dataset, spec, rng), rng);
    const GnnForward fwd = gnn_forward(ep, model.encoder, model.gnn);
    std::vector<double> score;
    if (model.gnn_cosine_head) {
        // Trained against angles, so classify by angle: cosine between the
        // query node and each head column (guarded denominators; only the
        // argmax matters here).
        const std::size_t n_sup = ep.support_y.size();
        const std::size_t d_out = fwd.final_embeddings.cols();
        const double* q = fwd.final_embeddings.row(n_sup);
        const double qn = std::max(l2_norm(q, d_out), 1e-12);
        score.assign(model.gnn.head.n_classes(), 0.0);
        for (std::size_t c = 0; c < score.size(); ++c) {
            double dp = 0.0, wn = 0.0;
            for (std::size_t j = 0; j < d_out; ++j) {
                const double w = model.gnn.head.weights(j, c);
                dp += q[j] * w;
                wn += w * w;
            }
            score[c] = dp / (qn * std::max(std::sqrt(wn), 1e-12));
        }
    } else {
        score = fwd.query_logits;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < score.size(); ++c)
        if (score[c] > score[best]) best = c;
    return best == static_cast<std::size_t>(ep.query_y[0]) ? 1.0 : 0.0;
}

EvalResult evaluate(const Model& model, const Dataset& dataset, const EpisodeSpec& spec,
                    std::size_t n_episodes, std::uint64_t seed) {
    if (n_episodes < 2)
        throw UsageError("evaluate: need at least 2 episodes for a confidence interval");
    std::mt19937_64 rng(seed);
    std::vector<double> accs;
    accs.reserve(n_episodes);
    for (std::size_t e = 0; e < n_episodes; ++e)
        accs.push_back(episode_accuracy(model, dataset, spec, rng));
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(accs.size() - 1);
    EvalResult out;
    out.mean_accuracy = mean;
    out.ci95 = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(accs.size()));
    return out;
}

}  // namespace lmfs
