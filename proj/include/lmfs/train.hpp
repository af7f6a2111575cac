#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lmfs/data.hpp"
#include "lmfs/encoder.hpp"
#include "lmfs/gnn.hpp"
#include "lmfs/losses.hpp"
#include "lmfs/protonet.hpp"

namespace lmfs {

enum class ModelKind { pn, gnn };
enum class OptimizerKind { sgd, adam };
enum class MarginMode { fixed, heuristic };

// Name mappers for configs and reports; the *_from_string forms throw
// ConfigError on an unknown name.
ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);
MarginMode margin_mode_from_string(const std::string& name);
std::string to_string(MarginMode mode);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;  // throws ConfigError
};

// First-order optimizer over one flat parameter vector. Adam keeps
// bias-corrected first/second moments; sgd is plain theta -= lr * g.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& config, std::size_t n_params);
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    OptimizerConfig config_;
    std::vector<double> m_, v_;  // adam moments
    std::size_t t_ = 0;
};

// Scales grad down to the given global L2 norm when it exceeds it
// (max_norm <= 0 disables clipping); returns the pre-clip norm.
double clip_global_norm(std::vector<double>& grad, double max_norm);

// Splitmix64-style seed derivation: one base seed plus a salt per consumer
// of randomness (episode sampling, triplet draws, parameter init,
// evaluation) yields decorrelated deterministic streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// m = (1/(2 n_b)) * sum_i |f(x_i)|_2 over the rows of one batch of
// embeddings, the norm-scale margin rule applied once at the start of
// training. n_b must equal the row count (UsageError otherwise).
double margin_heuristic(const Matrix& embeddings, std::size_t n_b);

struct TrainConfig {
    ModelKind model = ModelKind::pn;
    EpisodeSpec episode;
    LossConfig loss;
    OptimizerConfig optimizer;
    std::size_t n_updates = 100;
    std::size_t batch_episodes = 1;  // episodes per update; the graph model only
    std::size_t eval_every = 0;      // 0 = never evaluate during training
    std::size_t eval_episodes = 50;  // validation episodes per evaluation
    std::uint64_t seed = 0;
    MarginMode margin_mode = MarginMode::heuristic;
    double clip_norm = 10.0;  // global gradient-norm cap, <= 0 disables

    EncoderSpec encoder;  // embedding network architecture
    GnnConfig gnn;        // graph model architecture (model == gnn)
    PnMetric pn_metric = PnMetric::euclidean;
    double pn_scale = 10.0;  // cosine-metric logit scale

    void validate() const;  // throws ConfigError
};

// One evaluation record; margin is the margin in effect at that point (the
// heuristic value never changes after the first batch).
struct HistoryRow {
    std::size_t update = 0;
    double loss = 0.0;
    double val_acc = 0.0;
    double ci95 = 0.0;
    double margin = 0.0;
};

struct TrainHistory {
    std::vector<HistoryRow> rows;
};

// Everything needed to classify after training.
struct Model {
    ModelKind kind = ModelKind::pn;
    EncoderParams encoder;
    GnnParams gnn;  // meaningful only when kind == gnn
    PnMetric pn_metric = PnMetric::euclidean;
    double pn_scale = 10.0;
    // Cosine-softmax kinds classify by angle to the head columns rather than
    // by the raw head logits; evaluation must match training.
    bool gnn_cosine_head = false;
};

struct TrainResult {
    Model model;
    TrainHistory history;
    double margin_used = 0.0;  // effective m after the heuristic, if any
};

// Episodic training per the configured model and margin loss. Deterministic
// given config.seed. Throws DivergenceError (carrying the update index) when
// the total loss goes non-finite.
TrainResult train_episodic(const TrainConfig& config, const Dataset& dataset,
                           const ClassSplit& split);

struct EvalResult {
    double mean_accuracy = 0.0;
    double ci95 = 0.0;  // 1.96 * sample stddev / sqrt(n)
};

// Mean episode accuracy over freshly sampled episodes of `dataset` (queries
// classified by the model), with a 95% confidence half-width. Needs
// n_episodes >= 2 for the interval to exist (UsageError otherwise).
EvalResult evaluate(const Model& model, const Dataset& dataset, const EpisodeSpec& spec,
                    std::size_t n_episodes, std::uint64_t seed);

// Fraction of one freshly sampled episode's queries the model labels
// correctly; the per-episode building block of evaluate().
double episode_accuracy(const Model& model, const Dataset& dataset, const EpisodeSpec& spec,
                        std::mt19937_64& rng);

}  // namespace lmfs
