#include "lmfs/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmfs/errors.hpp"

namespace lmfs {

namespace {

using nlohmann::json;

// The report marker for a run that failed to converge.
constexpr const char* kDiverged = "×";  // ×

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

// Field access with dotted-path error messages. All getters treat a missing
// key as "keep the default" via the has() guard at call sites.
struct Reader {
    const json& j;
    std::string path;

    Reader(const json& j_, std::string path_) : j(j_), path(std::move(path_)) {
        if (!j.is_object()) fail(path, "expected a JSON object");
    }

    bool has(const char* key) const { return j.contains(key); }

    std::string where(const char* key) const { return path + "." + key; }

    double num(const char* key, double def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_number()) fail(where(key), "expected a number");
        return v.get<double>();
    }

    std::int64_t integer(const char* key, std::int64_t def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_number_integer()) fail(where(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t count(const char* key, std::uint64_t def) const {
        const std::int64_t v = integer(key, static_cast<std::int64_t>(def));
        if (v < 0) fail(where(key), "must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const char* key, bool def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_boolean()) fail(where(key), "expected true or false");
        return v.get<bool>();
    }

    std::string str(const char* key, const std::string& def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_string()) fail(where(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::size_t> sizes(const char* key, std::vector<std::size_t> def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_array()) fail(where(key), "expected an array of sizes");
        std::vector<std::size_t> out;
        for (const json& e : v) {
            if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
                fail(where(key), "entries must be non-negative integers");
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    std::vector<double> numbers(const char* key, std::vector<double> def) const {
        if (!has(key)) return def;
        const json& v = j.at(key);
        if (!v.is_array()) fail(where(key), "expected an array of numbers");
        std::vector<double> out;
        for (const json& e : v) {
            if (!e.is_number()) fail(where(key), "entries must be numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    Reader object(const char* key) const {
        if (!has(key)) fail(where(key), "missing");
        return Reader(j.at(key), where(key));
    }
};

// Applies a name->enum mapper, re-homing its error under the field path.
template <typename Fn>
auto named(const Reader& r, const char* key, const std::string& def, Fn&& parse)
    -> decltype(parse(def)) {
    const std::string name = r.str(key, def);
    try {
        return parse(name);
    } catch (const ConfigError& e) {
        fail(r.where(key), e.what());
    }
}

json read_json_file(const std::string& path, const char* who) {
    std::ifstream in(path);
    if (!in) throw ParseError(std::string(who) + ": cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(std::string(who) + ": " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::string& path, const char* who) {
    std::ofstream out(path);
    if (!out) throw ParseError(std::string(who) + ": cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Shortest decimal string that round-trips to the same double.
std::string fmt_shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    if (sweep_lambdas.empty()) throw ConfigError("sweep.lambdas: must not be empty");
    if (sweep_margins.empty()) throw ConfigError("sweep.margins: must not be empty");
    for (double l : sweep_lambdas)
        if (l < 0) throw ConfigError("sweep.lambdas: entries must be >= 0");
    for (double m : sweep_margins)
        if (m <= 0) throw ConfigError("sweep.margins: entries must be > 0");
    if (out_dir.empty()) throw ConfigError("out_dir: must not be empty");
    if (dataset.csv_path.empty()) {
        if (dataset.n_classes < 2) throw ConfigError("dataset.n_classes: must be >= 2");
        if (dataset.samples_per_class < 1)
            throw ConfigError("dataset.samples_per_class: must be >= 1");
        if (dataset.dim < 1) throw ConfigError("dataset.dim: must be >= 1");
        if (dataset.noise_sigma < 0) throw ConfigError("dataset.noise_sigma: must be >= 0");
    }
}

json to_json(const EpisodeSpec& spec) {
    return json{{"c_way", spec.c_way},
                {"k_shot", spec.k_shot},
                {"n_query", spec.n_query},
                {"n_unlabeled", spec.n_unlabeled}};
}

json to_json(const LossConfig& loss) {
    return json{{"kind", to_string(loss.kind)},
                {"lambda", loss.lambda},
                {"margin", loss.margin},
                {"scale", loss.scale}};
}

json to_json(const OptimizerConfig& opt) {
    return json{{"kind", to_string(opt.kind)},
                {"learning_rate", opt.learning_rate},
                {"beta1", opt.beta1},
                {"beta2", opt.beta2},
                {"eps", opt.eps}};
}

json to_json(const EncoderSpec& spec) {
    return json{{"layer_widths", spec.layer_widths}, {"activation", to_string(spec.activation)}};
}

json to_json(const GnnConfig& config) {
    return json{{"d_embed", config.d_embed},
                {"n_classes", config.n_classes},
                {"layer_dims", config.layer_dims},
                {"adjacency_hidden", config.adjacency_hidden},
                {"adjacency_mode", to_string(config.adjacency_mode)},
                {"normalize_adjacency", config.normalize_adjacency},
                {"leaky_slope", config.leaky_slope}};
}

json to_json(const TrainConfig& config) {
    json j{{"model", to_string(config.model)},
           {"episode", to_json(config.episode)},
           {"loss", to_json(config.loss)},
           {"optimizer", to_json(config.optimizer)},
           {"n_updates", config.n_updates},
           {"batch_episodes", config.batch_episodes},
           {"eval_every", config.eval_every},
           {"eval_episodes", config.eval_episodes},
           {"seed", config.seed},
           {"margin_mode", to_string(config.margin_mode)},
           {"clip_norm", config.clip_norm},
           {"encoder", to_json(config.encoder)},
           {"pn_metric", to_string(config.pn_metric)},
           {"pn_scale", config.pn_scale}};
    if (config.model == ModelKind::gnn) j["gnn"] = to_json(config.gnn);
    return j;
}

json to_json(const ExperimentConfig& config) {
    json j{{"train", to_json(config.train)},
           {"sweep", json{{"lambdas", config.sweep_lambdas}, {"margins", config.sweep_margins}}},
           {"out_dir", config.out_dir}};
    if (!config.dataset.csv_path.empty()) {
        j["dataset"] = json{{"csv", config.dataset.csv_path}};
    } else {
        j["dataset"] = json{{"generate", json{{"n_classes", config.dataset.n_classes},
                                              {"samples_per_class", config.dataset.samples_per_class},
                                              {"dim", config.dataset.dim},
                                              {"center_scale", config.dataset.center_scale},
                                              {"noise_sigma", config.dataset.noise_sigma},
                                              {"seed", config.dataset.seed}}}};
    }
    if (!config.split.path.empty()) {
        j["split"] = json{{"path", config.split.path}};
    } else {
        j["split"] = json{{"counts", json{{"train", config.split.n_train},
                                          {"val", config.split.n_val},
                                          {"test", config.split.n_test},
                                          {"seed", config.split.seed}}}};
    }
    return j;
}

EpisodeSpec episode_spec_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    EpisodeSpec spec;
    spec.c_way = static_cast<int>(r.integer("c_way", spec.c_way));
    spec.k_shot = static_cast<int>(r.integer("k_shot", spec.k_shot));
    spec.n_query = static_cast<int>(r.integer("n_query", spec.n_query));
    spec.n_unlabeled = static_cast<int>(r.integer("n_unlabeled", spec.n_unlabeled));
    return spec;
}

LossConfig loss_config_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    LossConfig loss;
    loss.kind = named(r, "kind", to_string(loss.kind), loss_kind_from_string);
    loss.lambda = r.num("lambda", loss.lambda);
    loss.margin = r.num("margin", loss.margin);
    loss.scale = r.num("scale", loss.scale);
    return loss;
}

OptimizerConfig optimizer_config_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    OptimizerConfig opt;
    opt.kind = named(r, "kind", to_string(opt.kind), optimizer_kind_from_string);
    opt.learning_rate = r.num("learning_rate", opt.learning_rate);
    opt.beta1 = r.num("beta1", opt.beta1);
    opt.beta2 = r.num("beta2", opt.beta2);
    opt.eps = r.num("eps", opt.eps);
    return opt;
}

EncoderSpec encoder_spec_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    EncoderSpec spec;
    spec.layer_widths = r.sizes("layer_widths", spec.layer_widths);
    if (spec.layer_widths.size() < 2)
        fail(path + ".layer_widths", "need at least an input and an output width");
    spec.activation = named(r, "activation", to_string(spec.activation), activation_from_string);
    return spec;
}

GnnConfig gnn_config_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    GnnConfig config;
    config.d_embed = r.count("d_embed", config.d_embed);
    config.n_classes = r.count("n_classes", config.n_classes);
    config.layer_dims = r.sizes("layer_dims", config.layer_dims);
    config.adjacency_hidden = r.sizes("adjacency_hidden", config.adjacency_hidden);
    config.adjacency_mode =
        named(r, "adjacency_mode", to_string(config.adjacency_mode), adjacency_mode_from_string);
    config.normalize_adjacency = r.boolean("normalize_adjacency", config.normalize_adjacency);
    config.leaky_slope = r.num("leaky_slope", config.leaky_slope);
    return config;
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    TrainConfig config;
    config.model = named(r, "model", to_string(config.model), model_kind_from_string);
    if (r.has("episode"))
        config.episode = episode_spec_from_json(j.at("episode"), r.where("episode"));
    if (r.has("loss")) config.loss = loss_config_from_json(j.at("loss"), r.where("loss"));
    if (r.has("optimizer"))
        config.optimizer = optimizer_config_from_json(j.at("optimizer"), r.where("optimizer"));
    config.n_updates = r.count("n_updates", config.n_updates);
    config.batch_episodes = r.count("batch_episodes", config.batch_episodes);
    config.eval_every = r.count("eval_every", config.eval_every);
    config.eval_episodes = r.count("eval_episodes", config.eval_episodes);
    config.seed = r.count("seed", config.seed);
    config.margin_mode =
        named(r, "margin_mode", to_string(config.margin_mode), margin_mode_from_string);
    config.clip_norm = r.num("clip_norm", config.clip_norm);
    if (!r.has("encoder")) fail(r.where("encoder"), "missing");
    config.encoder = encoder_spec_from_json(j.at("encoder"), r.where("encoder"));
    if (r.has("gnn")) config.gnn = gnn_config_from_json(j.at("gnn"), r.where("gnn"));
    config.pn_metric = named(r, "pn_metric", to_string(config.pn_metric), pn_metric_from_string);
    config.pn_scale = r.num("pn_scale", config.pn_scale);
    return config;
}

ExperimentConfig experiment_from_json(const json& j) {
    Reader r(j, "config");
    ExperimentConfig config;
    if (!r.has("train")) fail("config.train", "missing");
    config.train = train_config_from_json(j.at("train"), "train");
    if (r.has("dataset")) {
        Reader d = r.object("dataset");
        if (d.has("csv")) {
            config.dataset.csv_path = d.str("csv", "");
            if (config.dataset.csv_path.empty()) fail(d.where("csv"), "must not be empty");
        } else if (d.has("generate")) {
            Reader g = d.object("generate");
            config.dataset.n_classes = static_cast<int>(g.integer("n_classes", config.dataset.n_classes));
            config.dataset.samples_per_class =
                static_cast<int>(g.integer("samples_per_class", config.dataset.samples_per_class));
            config.dataset.dim = static_cast<int>(g.integer("dim", config.dataset.dim));
            config.dataset.center_scale = g.num("center_scale", config.dataset.center_scale);
            config.dataset.noise_sigma = g.num("noise_sigma", config.dataset.noise_sigma);
            config.dataset.seed = g.count("seed", config.dataset.seed);
        } else {
            fail(d.path, "needs either a 'csv' path or a 'generate' block");
        }
    }
    if (r.has("split")) {
        Reader s = r.object("split");
        if (s.has("path")) {
            config.split.path = s.str("path", "");
            if (config.split.path.empty()) fail(s.where("path"), "must not be empty");
        } else if (s.has("counts")) {
            Reader c = s.object("counts");
            config.split.n_train = c.count("train", config.split.n_train);
            config.split.n_val = c.count("val", config.split.n_val);
            config.split.n_test = c.count("test", config.split.n_test);
            config.split.seed = c.count("seed", config.split.seed);
        } else {
            fail(s.path, "needs either a 'path' or a 'counts' block");
        }
    }
    config.sweep_lambdas = {config.train.loss.lambda};
    config.sweep_margins = {config.train.loss.margin};
    if (r.has("sweep")) {
        Reader s = r.object("sweep");
        config.sweep_lambdas = s.numbers("lambdas", config.sweep_lambdas);
        config.sweep_margins = s.numbers("margins", config.sweep_margins);
    }
    config.out_dir = r.str("out_dir", config.out_dir);
    return config;
}

ExperimentConfig load_experiment(const std::string& path) {
    return experiment_from_json(read_json_file(path, "load_experiment"));
}

void save_experiment(const ExperimentConfig& config, const std::string& path) {
    write_json_file(to_json(config), path, "save_experiment");
}

namespace {

json encoder_params_to_json(const EncoderParams& p) {
    return json{{"spec", to_json(p.spec)}, {"values", p.flatten()}};
}

EncoderParams encoder_params_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    if (!r.has("spec")) fail(r.where("spec"), "missing");
    const EncoderSpec spec = encoder_spec_from_json(j.at("spec"), r.where("spec"));
    // Materialize the right shapes, then overwrite with the stored values.
    EncoderParams p = encoder_init(spec, 0);
    const std::vector<double> values = r.numbers("values", {});
    if (values.size() != p.param_count())
        fail(r.where("values"), "expected " + std::to_string(p.param_count()) +
                                    " parameters, got " + std::to_string(values.size()));
    p.unflatten(values);
    return p;
}

json gnn_params_to_json(const GnnParams& p) {
    return json{{"config", to_json(p.config)}, {"values", p.flatten()}};
}

GnnParams gnn_params_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    if (!r.has("config")) fail(r.where("config"), "missing");
    const GnnConfig config = gnn_config_from_json(j.at("config"), r.where("config"));
    GnnParams p = gnn_init(config, 0);
    const std::vector<double> values = r.numbers("values", {});
    if (values.size() != p.param_count())
        fail(r.where("values"), "expected " + std::to_string(p.param_count()) +
                                    " parameters, got " + std::to_string(values.size()));
    p.unflatten(values);
    return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json model{{"kind", to_string(ckpt.model.kind)},
               {"pn_metric", to_string(ckpt.model.pn_metric)},
               {"pn_scale", ckpt.model.pn_scale},
               {"gnn_cosine_head", ckpt.model.gnn_cosine_head},
               {"encoder", encoder_params_to_json(ckpt.model.encoder)}};
    if (ckpt.model.kind == ModelKind::gnn) model["gnn"] = gnn_params_to_json(ckpt.model.gnn);
    const json j{{"format", "lmfs-checkpoint-v1"},
                 {"update_index", ckpt.update_index},
                 {"margin_used", ckpt.margin_used},
                 {"config", to_json(ckpt.config)},
                 {"model", model}};
    write_json_file(j, path, "save_checkpoint");
}

Checkpoint load_checkpoint(const std::string& path) {
    const json j = read_json_file(path, "load_checkpoint");
    Reader r(j, "checkpoint");
    if (r.str("format", "") != "lmfs-checkpoint-v1")
        fail("checkpoint.format", "not a recognized checkpoint file: " + path);
    Checkpoint ckpt;
    ckpt.update_index = r.count("update_index", 0);
    ckpt.margin_used = r.num("margin_used", 0.0);
    if (!r.has("config")) fail("checkpoint.config", "missing");
    ckpt.config = train_config_from_json(j.at("config"), "checkpoint.config");
    Reader m = r.object("model");
    ckpt.model.kind = named(m, "kind", "pn", model_kind_from_string);
    ckpt.model.pn_metric = named(m, "pn_metric", "euclidean", pn_metric_from_string);
    ckpt.model.pn_scale = m.num("pn_scale", 10.0);
    ckpt.model.gnn_cosine_head = m.boolean("gnn_cosine_head", false);
    if (!m.has("encoder")) fail(m.where("encoder"), "missing");
    ckpt.model.encoder = encoder_params_from_json(m.j.at("encoder"), m.where("encoder"));
    if (ckpt.model.kind == ModelKind::gnn) {
        if (!m.has("gnn")) fail(m.where("gnn"), "missing for a gnn checkpoint");
        ckpt.model.gnn = gnn_params_from_json(m.j.at("gnn"), m.where("gnn"));
    }
    return ckpt;
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_history_csv: cannot open " + path + " for writing");
    out << "update,loss,val_acc,ci95\n";
    for (const HistoryRow& row : history.rows)
        out << row.update << ',' << fmt17(row.loss) << ',' << fmt17(row.val_acc) << ','
            << fmt17(row.ci95) << '\n';
}

TrainHistory load_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_history_csv: cannot open " + path);
    TrainHistory history;
    std::string line;
    if (!std::getline(in, line) || line != "update,loss,val_acc,ci95")
        throw ParseError("load_history_csv: " + path + ": missing header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        HistoryRow row;
        try {
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("update");
            row.update = std::stoul(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("loss");
            row.loss = std::stod(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("val_acc");
            row.val_acc = std::stod(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("ci95");
            row.ci95 = std::stod(field);
        } catch (const std::exception&) {
            throw ParseError("load_history_csv: " + path + " line " +
                             std::to_string(line_no) + ": malformed row");
        }
        history.rows.push_back(row);
    }
    return history;
}

void append_result_csv(const ResultRow& row, const std::string& path) {
    const bool fresh = !std::ifstream(path).good();
    std::ofstream out(path, std::ios::app);
    if (!out) throw ParseError("append_result_csv: cannot open " + path + " for writing");
    if (fresh) out << "model,loss_kind,lambda,margin,c_way,k_shot,mean,ci95,n_episodes\n";
    char acc[32], ci[32];
    std::snprintf(acc, sizeof acc, "%.4f", row.mean);
    std::snprintf(ci, sizeof ci, "%.4f", row.ci95);
    out << row.model << ',' << row.loss_kind << ',' << fmt_shortest(row.lambda) << ','
        << fmt_shortest(row.margin) << ',' << row.c_way << ',' << row.k_shot << ','
        << (row.diverged ? kDiverged : acc) << ',' << (row.diverged ? kDiverged : ci) << ','
        << row.n_episodes << '\n';
}

std::vector<ResultRow> load_result_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_result_csv: cannot open " + path);
    std::vector<ResultRow> rows;
    std::string line;
    if (!std::getline(in, line) ||
        line != "model,loss_kind,lambda,margin,c_way,k_shot,mean,ci95,n_episodes")
        throw ParseError("load_result_csv: " + path + ": missing header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw ParseError("load_result_csv: " + path + " line " + std::to_string(line_no) +
                             ": expected 9 fields");
        ResultRow row;
        row.model = fields[0];
        row.loss_kind = fields[1];
        try {
            row.lambda = std::stod(fields[2]);
            row.margin = std::stod(fields[3]);
            row.c_way = std::stoi(fields[4]);
            row.k_shot = std::stoi(fields[5]);
            row.diverged = fields[6] == kDiverged;
            if (!row.diverged) {
                row.mean = std::stod(fields[6]);
                row.ci95 = std::stod(fields[7]);
            }
            row.n_episodes = std::stoul(fields[8]);
        } catch (const std::exception&) {
            throw ParseError("load_result_csv: " + path + " line " + std::to_string(line_no) +
                             ": malformed row");
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace lmfs
