#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmfs/train.hpp"

namespace lmfs {

// Where an experiment's dataset comes from: a CSV on disk when csv_path is
// set, otherwise the Gaussian-blob generator with the parameters below.
struct DatasetSource {
    std::string csv_path;
    int n_classes = 30;
    int samples_per_class = 30;
    int dim = 16;
    double center_scale = 3.0;
    double noise_sigma = 0.5;
    std::uint64_t seed = 7;
};

// Class split: loaded from a JSON file when path is set, otherwise drawn
// from the dataset's classes with the counts below.
struct SplitSource {
    std::string path;
    std::size_t n_train = 20;
    std::size_t n_val = 5;
    std::size_t n_test = 5;
    std::uint64_t seed = 1;
};

// A full experiment: training setup plus data provenance and the (lambda, m)
// grid to fan out over. Single-point "sweeps" are the common case.
struct ExperimentConfig {
    TrainConfig train;
    DatasetSource dataset;
    SplitSource split;
    std::vector<double> sweep_lambdas;  // non-empty; defaults to {train.loss.lambda}
    std::vector<double> sweep_margins;  // non-empty; defaults to {train.loss.margin}
    std::string out_dir = ".";

    void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const EpisodeSpec& spec);
nlohmann::json to_json(const LossConfig& loss);
nlohmann::json to_json(const OptimizerConfig& opt);
nlohmann::json to_json(const EncoderSpec& spec);
nlohmann::json to_json(const GnnConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);

// All from_json readers throw ConfigError naming the offending field with a
// dotted path (e.g. "train.loss.kind: unknown loss kind 'x'"). Missing
// optional fields keep their defaults.
EpisodeSpec episode_spec_from_json(const nlohmann::json& j, const std::string& path = "episode");
LossConfig loss_config_from_json(const nlohmann::json& j, const std::string& path = "loss");
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j,
                                           const std::string& path = "optimizer");
EncoderSpec encoder_spec_from_json(const nlohmann::json& j, const std::string& path = "encoder");
GnnConfig gnn_config_from_json(const nlohmann::json& j, const std::string& path = "gnn");
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");
ExperimentConfig experiment_from_json(const nlohmann::json& j);

// Reads a JSON file into an ExperimentConfig (ParseError on I/O or syntax
// trouble, ConfigError on bad fields).
ExperimentConfig load_experiment(const std::string& path);
void save_experiment(const ExperimentConfig& config, const std::string& path);

// A trained model with enough context to evaluate or resume reporting.
struct Checkpoint {
    TrainConfig config;
    std::size_t update_index = 0;  // completed updates
    double margin_used = 0.0;      // effective m (post-heuristic)
    Model model;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// History CSV: "update,loss,val_acc,ci95" with full-precision numbers so a
// reload reproduces the run record exactly.
void save_history_csv(const TrainHistory& history, const std::string& path);
TrainHistory load_history_csv(const std::string& path);

// One evaluation record as appended to a results CSV. Diverged cells carry
// no accuracy; their mean/ci fields are written as the non-convergence
// marker. Accuracy fields use 4 decimals, the report convention.
struct ResultRow {
    std::string model;
    std::string loss_kind;
    double lambda = 0.0;
    double margin = 0.0;
    int c_way = 0;
    int k_shot = 0;
    double mean = 0.0;
    double ci95 = 0.0;
    std::size_t n_episodes = 0;
    bool diverged = false;
};

// Appends one row, writing the header first when the file does not exist yet.
void append_result_csv(const ResultRow& row, const std::string& path);
std::vector<ResultRow> load_result_csv(const std::string& path);

}  // namespace lmfs
