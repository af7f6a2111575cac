// Command-line harness: dataset generation, training, evaluation, gradient
// checks, and (lambda, m) sweep reporting.

#include <atomic>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lmfs/data.hpp"
#include "lmfs/errors.hpp"
#include "lmfs/gradcheck.hpp"
#include "lmfs/serialize.hpp"
#include "lmfs/train.hpp"

namespace fs = std::filesystem;
using namespace lmfs;

namespace {

constexpr const char* kDiverged = "×";  // the non-convergence marker

// Sweep cells own their seeds: one hash of (base seed, lambda, m) per cell,
// so cells are reproducible independently of sweep order or worker count.
std::uint64_t cell_seed(std::uint64_t base, double lambda, double m) {
    return mix_seed(mix_seed(base, std::bit_cast<std::uint64_t>(lambda)),
                    std::bit_cast<std::uint64_t>(m));
}

std::string num_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

fs::path resolve(const fs::path& out_dir, const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : out_dir / q;
}

struct Materialized {
    Dataset dataset;
    ClassSplit split;
};

Materialized materialize(const ExperimentConfig& config, const fs::path& out_dir) {
    Materialized m;
    if (config.dataset.csv_path.empty()) {
        m.dataset = gen_gaussian_tasks(config.dataset.n_classes, config.dataset.samples_per_class,
                                       config.dataset.dim, config.dataset.center_scale,
                                       config.dataset.noise_sigma, config.dataset.seed);
    } else {
        m.dataset = load_csv(resolve(out_dir, config.dataset.csv_path).string());
    }
    if (config.split.path.empty()) {
        m.split = split_classes(m.dataset, config.split.n_train, config.split.n_val,
                                config.split.n_test, config.split.seed);
    } else {
        m.split = load_split(resolve(out_dir, config.split.path).string());
    }
    return m;
}

int worker_count(std::size_t cells) {
    const char* env = std::getenv("LMFS_WORKERS");
    long n = env ? std::strtol(env, nullptr, 10) : 1;
    if (n < 1) n = 1;
    if (n > 64) n = 64;
    if (static_cast<std::size_t>(n) > cells) n = static_cast<long>(cells);
    return static_cast<int>(n);
}

int cmd_gen_data(const std::string& out_dir, int n_classes, int samples_per_class, int dim,
                 double center_scale, double noise_sigma, std::uint64_t seed,
                 std::size_t n_train, std::size_t n_val, std::size_t n_test,
                 std::uint64_t split_seed) {
    fs::create_directories(out_dir);
    const Dataset ds =
        gen_gaussian_tasks(n_classes, samples_per_class, dim, center_scale, noise_sigma, seed);
    const ClassSplit split = split_classes(ds, n_train, n_val, n_test, split_seed);
    const fs::path data_path = fs::path(out_dir) / "dataset.csv";
    const fs::path split_path = fs::path(out_dir) / "split.json";
    save_csv(ds, data_path.string());
    save_split(split, split_path.string());
    std::cout << "wrote " << data_path.string() << " (" << ds.size() << " rows, "
              << ds.n_classes() << " classes, dim " << ds.dim() << ")\n";
    std::cout << "wrote " << split_path.string() << " (train " << split.train.size() << ", val "
              << split.val.size() << ", test " << split.test.size() << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path, std::string out_dir) {
    ExperimentConfig config = load_experiment(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    config.validate();
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const Materialized data = materialize(config, out);

    bool any_diverged = false;
    for (double lambda : config.sweep_lambdas) {
        for (double m : config.sweep_margins) {
            TrainConfig tc = config.train;
            tc.loss.lambda = lambda;
            tc.loss.margin = m;
            const std::string suffix = "lam" + num_tag(lambda) + "_m" + num_tag(m);
            try {
                const TrainResult res = train_episodic(tc, data.dataset, data.split);
                const fs::path hist = out / ("history_" + suffix + ".csv");
                const fs::path ckpt_path = out / ("checkpoint_" + suffix + ".json");
                save_history_csv(res.history, hist.string());
                Checkpoint ckpt;
                ckpt.config = tc;
                ckpt.update_index = tc.n_updates;
                ckpt.margin_used = res.margin_used;
                ckpt.model = res.model;
                save_checkpoint(ckpt, ckpt_path.string());
                std::cout << "lambda=" << num_tag(lambda) << " m=" << num_tag(m)
                          << ": trained " << tc.n_updates << " updates (margin used "
                          << num_tag(res.margin_used) << "); wrote " << hist.string() << " and "
                          << ckpt_path.string() << "\n";
            } catch (const DivergenceError& e) {
                any_diverged = true;
                std::cout << "lambda=" << num_tag(lambda) << " m=" << num_tag(m) << ": "
                          << kDiverged << " (" << e.what() << ")\n";
            }
        }
    }
    return any_diverged ? 3 : 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split_path, const std::string& part, long episodes,
             std::uint64_t seed, const std::string& out_dir, const std::string& results_name,
             int c_way, int k_shot, int n_query, int n_unlabeled) {
    const Checkpoint ckpt = load_checkpoint(resolve(out_dir, ckpt_path).string());
    Dataset ds = load_csv(resolve(out_dir, data_path).string());
    if (!split_path.empty()) {
        const ClassSplit split = load_split(resolve(out_dir, split_path).string());
        const std::vector<int>& classes =
            part == "train" ? split.train : (part == "val" ? split.val : split.test);
        ds = ds.restricted_to(classes);
    }
    if (ds.dim() != ckpt.model.encoder.spec.input_dim())
        throw ConfigError("checkpoint expects feature dim " +
                          std::to_string(ckpt.model.encoder.spec.input_dim()) + ", dataset has " +
                          std::to_string(ds.dim()));
    EpisodeSpec spec = ckpt.config.episode;
    if (c_way > 0) spec.c_way = c_way;
    if (k_shot > 0) spec.k_shot = k_shot;
    if (n_query > 0) spec.n_query = n_query;
    if (n_unlabeled >= 0) spec.n_unlabeled = n_unlabeled;
    if (episodes < 1) throw ConfigError("--episodes must be >= 1");

    double mean = 0.0, ci = 0.0;
    if (episodes == 1) {
        std::cerr << "warning: ci95 is undefined for a single episode; reporting 0\n";
        std::mt19937_64 rng(seed);
        mean = episode_accuracy(ckpt.model, ds, spec, rng);
    } else {
        const EvalResult res =
            evaluate(ckpt.model, ds, spec, static_cast<std::size_t>(episodes), seed);
        mean = res.mean_accuracy;
        ci = res.ci95;
    }
    std::printf("%.4f ± %.4f\n", mean, ci);

    fs::create_directories(out_dir);
    ResultRow row;
    row.model = to_string(ckpt.model.kind);
    row.loss_kind = to_string(ckpt.config.loss.kind);
    row.lambda = ckpt.config.loss.lambda;
    row.margin = ckpt.margin_used;
    row.c_way = spec.c_way;
    row.k_shot = spec.k_shot;
    row.mean = mean;
    row.ci95 = ci;
    row.n_episodes = static_cast<std::size_t>(episodes);
    const fs::path results = resolve(out_dir, results_name);
    append_result_csv(row, results.string());
    std::cout << "appended to " << results.string() << "\n";
    return 0;
}

int cmd_gradcheck(std::size_t cases, std::uint64_t seed, double tolerance,
                  const std::string& corrupt) {
    GradCheckOptions opts;
    opts.cases = cases;
    opts.seed = seed;
    opts.tolerance = tolerance;
    opts.corrupt = corrupt;
    const std::vector<CheckRow> rows = run_gradient_checks(opts);
    std::printf("%-24s %8s %14s  %s\n", "check", "cases", "max_rel_err", "status");
    for (const CheckRow& row : rows)
        std::printf("%-24s %8zu %14.3e  %s\n", row.name.c_str(), row.cases, row.max_rel_err,
                    row.pass ? "pass" : "FAIL");
    return all_pass(rows) ? 0 : 4;
}

int cmd_sweep(const std::string& config_path, std::string out_dir, long episodes,
              const std::string& results_name) {
    ExperimentConfig config = load_experiment(config_path);
    if (!out_dir.empty()) config.out_dir = out_dir;
    config.validate();
    if (episodes < 2) throw ConfigError("--episodes must be >= 2");
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const Materialized data = materialize(config, out);
    const Dataset test_ds = data.dataset.restricted_to(data.split.test);

    struct Cell {
        double lambda = 0.0;
        double margin = 0.0;
        ResultRow row;
        std::string error;  // non-divergence failure, fatal for the sweep
    };
    std::vector<Cell> cells;
    for (double lambda : config.sweep_lambdas)
        for (double m : config.sweep_margins) cells.push_back({lambda, m, {}, {}});

    std::atomic<std::size_t> next{0};
    auto run_cell = [&](Cell& cell) {
        TrainConfig tc = config.train;
        tc.loss.lambda = cell.lambda;
        tc.loss.margin = cell.margin;
        tc.seed = cell_seed(config.train.seed, cell.lambda, cell.margin);
        ResultRow& row = cell.row;
        row.model = to_string(tc.model);
        row.loss_kind = to_string(tc.loss.kind);
        row.lambda = cell.lambda;
        row.margin = cell.margin;
        row.c_way = tc.episode.c_way;
        row.k_shot = tc.episode.k_shot;
        row.n_episodes = static_cast<std::size_t>(episodes);
        try {
            const TrainResult res = train_episodic(tc, data.dataset, data.split);
            const EvalResult ev =
                evaluate(res.model, test_ds, tc.episode, static_cast<std::size_t>(episodes),
                         mix_seed(tc.seed, 9999));
            row.margin = res.margin_used;
            row.mean = ev.mean_accuracy;
            row.ci95 = ev.ci95;
        } catch (const DivergenceError&) {
            row.diverged = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    const int workers = worker_count(cells.size());
    if (workers <= 1) {
        for (Cell& cell : cells) run_cell(cell);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) return;
                    run_cell(cells[i]);
                }
            });
        for (std::thread& t : pool) t.join();
    }

    for (const Cell& cell : cells)
        if (!cell.error.empty()) throw ConfigError("sweep cell lambda=" + num_tag(cell.lambda) +
                                                   " m=" + num_tag(cell.margin) + ": " +
                                                   cell.error);

    const fs::path results = out / results_name;
    bool any_diverged = false;
    for (const Cell& cell : cells) {
        append_result_csv(cell.row, results.string());
        if (cell.row.diverged) {
            any_diverged = true;
            std::cout << "lambda=" << num_tag(cell.lambda) << " m=" << num_tag(cell.margin)
                      << ": " << kDiverged << "\n";
        } else {
            std::printf("lambda=%s m=%s: %.4f ± %.4f\n", num_tag(cell.lambda).c_str(),
                        num_tag(cell.margin).c_str(), cell.row.mean, cell.row.ci95);
        }
    }
    std::cout << "wrote " << results.string() << "\n";
    return any_diverged ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lmfs: few-shot metric-learning experiments on synthetic tasks"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 success, 2 configuration/input error, 3 training divergence, "
               "4 check failure.\nSweep parallelism: set LMFS_WORKERS (default 1).");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a Gaussian-blob dataset and class split");
    std::string gen_out = ".";
    int gen_classes = 30, gen_spc = 30, gen_dim = 16;
    double gen_center = 3.0, gen_sigma = 0.5;
    std::uint64_t gen_seed = 7, gen_split_seed = 1;
    std::size_t gen_train = 20, gen_val = 5, gen_test = 5;
    gen->add_option("--out-dir", gen_out, "Output directory")->capture_default_str();
    gen->add_option("--n-classes", gen_classes, "Number of classes")->capture_default_str();
    gen->add_option("--samples-per-class", gen_spc, "Samples per class")->capture_default_str();
    gen->add_option("--dim", gen_dim, "Feature dimension")->capture_default_str();
    gen->add_option("--center-scale", gen_center, "Stddev of class centers")->capture_default_str();
    gen->add_option("--noise-sigma", gen_sigma, "Within-class noise stddev")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    gen->add_option("--train", gen_train, "Classes in the train split")->capture_default_str();
    gen->add_option("--val", gen_val, "Classes in the val split")->capture_default_str();
    gen->add_option("--test", gen_test, "Classes in the test split")->capture_default_str();
    gen->add_option("--split-seed", gen_split_seed, "Split shuffle seed")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train per a JSON experiment config; one history "
                                              "CSV and checkpoint per (lambda, m) cell");
    std::string train_config, train_out;
    train->add_option("--config", train_config, "Experiment config (JSON)")->required();
    train->add_option("--out-dir", train_out, "Output directory (overrides config.out_dir)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; prints \"mean ± ci95\" "
                                            "and appends to a results CSV");
    std::string eval_ckpt, eval_data, eval_split, eval_part = "test", eval_out = ".",
                eval_results = "results.csv";
    long eval_episodes = 200;
    std::uint64_t eval_seed = 0;
    int eval_cway = 0, eval_kshot = 0, eval_nquery = 0, eval_unlabeled = -1;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON (relative to --out-dir)")
        ->required();
    eval->add_option("--data", eval_data, "Dataset CSV (relative to --out-dir)")->required();
    eval->add_option("--split", eval_split, "Split JSON restricting classes (relative to "
                                            "--out-dir)");
    eval->add_option("--part", eval_part, "Split part to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    eval->add_option("--episodes", eval_episodes, "Evaluation episodes")->capture_default_str();
    eval->add_option("--seed", eval_seed, "Episode sampling seed")->capture_default_str();
    eval->add_option("--out-dir", eval_out, "Base directory for relative paths and the "
                                            "results CSV")
        ->capture_default_str();
    eval->add_option("--results", eval_results, "Results CSV name")->capture_default_str();
    eval->add_option("--c-way", eval_cway, "Override episode C (default: checkpoint's)");
    eval->add_option("--k-shot", eval_kshot, "Override episode K");
    eval->add_option("--n-query", eval_nquery, "Override queries per class");
    eval->add_option("--n-unlabeled", eval_unlabeled, "Override unlabeled count");

    // gradcheck
    auto* check = app.add_subcommand("gradcheck", "Verify analytic gradients and exact "
                                                  "identities against finite differences");
    std::size_t check_cases = 50;
    std::uint64_t check_seed = 2024;
    double check_tol = 1e-6;
    std::string check_corrupt;
    check->add_option("--cases", check_cases, "Random instances per check")
        ->capture_default_str();
    check->add_option("--seed", check_seed, "Instance generator seed")->capture_default_str();
    check->add_option("--tolerance", check_tol, "Relative-error pass bar")->capture_default_str();
    check->add_option("--corrupt", check_corrupt,
                      "Perturb the named check's analytic gradient (harness self-test)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Train the full (lambda, m) grid and report test "
                                              "accuracy per cell");
    std::string sweep_config, sweep_out, sweep_results = "results.csv";
    long sweep_episodes = 200;
    sweep->add_option("--config", sweep_config, "Experiment config (JSON)")->required();
    sweep->add_option("--out-dir", sweep_out, "Output directory (overrides config.out_dir)");
    sweep->add_option("--episodes", sweep_episodes, "Test episodes per cell")
        ->capture_default_str();
    sweep->add_option("--results", sweep_results, "Results CSV name")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (*gen)
            return cmd_gen_data(gen_out, gen_classes, gen_spc, gen_dim, gen_center, gen_sigma,
                                gen_seed, gen_train, gen_val, gen_test, gen_split_seed);
        if (*train) return cmd_train(train_config, train_out);
        if (*eval)
            return cmd_eval(eval_ckpt, eval_data, eval_split, eval_part, eval_episodes, eval_seed,
                            eval_out, eval_results, eval_cway, eval_kshot, eval_nquery,
                            eval_unlabeled);
        if (*check) return cmd_gradcheck(check_cases, check_seed, check_tol, check_corrupt);
        if (*sweep) return cmd_sweep(sweep_config, sweep_out, sweep_episodes, sweep_results);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
