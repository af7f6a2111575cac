#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lmfs/data.hpp"
#include "lmfs/errors.hpp"
#include "lmfs/serialize.hpp"
#include "lmfs/train.hpp"

using namespace lmfs;
namespace fs = std::filesystem;

// The built binary under test; injected by the build so the tests run it the
// way a user would, through a real process boundary.
#ifndef LMFS_CLI_PATH
#error "LMFS_CLI_PATH must point at the lmfs executable"
#endif

namespace {

struct Scratch {
    fs::path path;
    Scratch() {
        path = fs::temp_directory_path() /
               ("lmfs_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI through the shell, capturing exit code and both streams.
RunResult run(const std::string& args, const std::string& env = "") {
    Scratch cap;
    const std::string out_file = cap.file("stdout");
    const std::string err_file = cap.file("stderr");
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += std::string("\"") + LMFS_CLI_PATH + "\" " + args + " >\"" + out_file + "\" 2>\"" +
           err_file + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// A small, fast experiment: 8 blob classes in 5 dimensions, a two-way network.
void make_workspace(const Scratch& s) {
    const RunResult gen = run("gen-data --out-dir \"" + s.path.string() +
                              "\" --n-classes 8 --samples-per-class 10 --dim 5 "
                              "--center-scale 3.0 --noise-sigma 0.4 --seed 3 "
                              "--train 4 --val 2 --test 2 --split-seed 1");
    REQUIRE(gen.exit_code == 0);
}

ExperimentConfig small_experiment(const Scratch& s) {
    ExperimentConfig config;
    config.train.model = ModelKind::pn;
    config.train.episode = {2, 2, 2, 0};
    config.train.loss.kind = LossKind::triplet;
    config.train.loss.lambda = 1.0;
    config.train.loss.margin = 0.5;
    config.train.optimizer.kind = OptimizerKind::adam;
    config.train.optimizer.learning_rate = 0.01;
    config.train.n_updates = 15;
    config.train.eval_every = 5;
    config.train.eval_episodes = 10;
    config.train.seed = 9;
    config.train.margin_mode = MarginMode::fixed;
    config.train.encoder.layer_widths = {5, 12, 6};
    config.train.encoder.activation = Activation::relu;
    // Absolute data paths so several output directories can share one dataset.
    config.dataset.csv_path = s.file("dataset.csv");
    config.split.path = s.file("split.json");
    config.sweep_lambdas = {1.0};
    config.sweep_margins = {0.5};
    return config;
}

}  // namespace

TEST_CASE("gen-data writes a loadable dataset and class split") {
    Scratch s;
    const RunResult r = run("gen-data --out-dir \"" + s.path.string() +
                            "\" --n-classes 8 --samples-per-class 10 --dim 5 "
                            "--train 4 --val 2 --test 2 --seed 3 --split-seed 1");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("dataset.csv") != std::string::npos);
    CHECK(r.out.find("split.json") != std::string::npos);

    const Dataset ds = load_csv(s.file("dataset.csv"));
    CHECK(ds.size() == 80);
    CHECK(ds.n_classes() == 8);
    CHECK(ds.dim() == 5);

    const ClassSplit split = load_split(s.file("split.json"));
    CHECK(split.train.size() == 4);
    CHECK(split.val.size() == 2);
    CHECK(split.test.size() == 2);
    std::set<int> all(split.train.begin(), split.train.end());
    all.insert(split.val.begin(), split.val.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == 8);  // splits are disjoint
}

TEST_CASE("train fans out the lambda grid deterministically") {
    Scratch s;
    make_workspace(s);
    ExperimentConfig config = small_experiment(s);
    config.sweep_lambdas = {0.0, 1.0};
    const std::string config_path = s.file("exp.json");
    save_experiment(config, config_path);

    const std::string dir_a = s.file("runA");
    const RunResult a = run("train --config \"" + config_path + "\" --out-dir \"" + dir_a + "\"");
    CHECK(a.exit_code == 0);
    REQUIRE(fs::exists(dir_a + "/history_lam0_m0.5.csv"));
    REQUIRE(fs::exists(dir_a + "/history_lam1_m0.5.csv"));
    REQUIRE(fs::exists(dir_a + "/checkpoint_lam0_m0.5.json"));
    REQUIRE(fs::exists(dir_a + "/checkpoint_lam1_m0.5.json"));

    // Two cells, two progress lines.
    CHECK(a.out.find("lambda=0 ") != std::string::npos);
    CHECK(a.out.find("lambda=1 ") != std::string::npos);

    const std::string dir_b = s.file("runB");
    const RunResult b = run("train --config \"" + config_path + "\" --out-dir \"" + dir_b + "\"");
    CHECK(b.exit_code == 0);
    for (const std::string name : {"history_lam0_m0.5.csv", "history_lam1_m0.5.csv"}) {
        const std::string in_a = slurp(dir_a + "/" + name);
        // Header plus the three scheduled evaluation rows.
        CHECK(std::count(in_a.begin(), in_a.end(), '\n') == 4);
        CHECK(in_a == slurp(dir_b + "/" + name));  // byte-identical reruns
    }
}

TEST_CASE("eval prints mean and ci, appends results, and repeats exactly") {
    Scratch s;
    make_workspace(s);
    const std::string config_path = s.file("exp.json");
    save_experiment(small_experiment(s), config_path);
    const std::string dir = s.file("run");
    REQUIRE(run("train --config \"" + config_path + "\" --out-dir \"" + dir + "\"").exit_code ==
            0);

    const std::string eval_args = "eval --checkpoint checkpoint_lam1_m0.5.json --data \"" +
                                  s.file("dataset.csv") + "\" --split \"" + s.file("split.json") +
                                  "\" --part test --episodes 40 --seed 5 --out-dir \"" + dir +
                                  "\"";
    const RunResult first = run(eval_args);
    CHECK(first.exit_code == 0);

    // First line is "<mean> ± <ci>" with four decimals each.
    const std::string line = first.out.substr(0, first.out.find('\n'));
    const std::size_t sep = line.find(" ± ");
    REQUIRE(sep != std::string::npos);
    const double mean = std::stod(line.substr(0, sep));
    const double ci = std::stod(line.substr(sep + 4));
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
    CHECK(ci >= 0.0);
    CHECK(line.substr(0, sep).size() == 6);  // "0.8250"
    CHECK(first.out.find("results.csv") != std::string::npos);

    const RunResult second = run(eval_args);
    CHECK(second.exit_code == 0);
    CHECK(second.out == first.out);  // same seed, same report

    const std::vector<ResultRow> rows = load_result_csv(dir + "/results.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].model == "pn");
    CHECK(rows[0].loss_kind == "triplet");
    CHECK(rows[0].lambda == 1.0);
    CHECK(rows[0].margin == 0.5);
    CHECK(rows[0].c_way == 2);
    CHECK(rows[0].k_shot == 2);
    CHECK(rows[0].n_episodes == 40);
    CHECK(rows[0].mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rows[1].mean == rows[0].mean);
}

TEST_CASE("eval with a single episode warns and reports a zero-width interval") {
    Scratch s;
    make_workspace(s);
    const std::string config_path = s.file("exp.json");
    save_experiment(small_experiment(s), config_path);
    const std::string dir = s.file("run");
    REQUIRE(run("train --config \"" + config_path + "\" --out-dir \"" + dir + "\"").exit_code ==
            0);

    const RunResult r = run("eval --checkpoint checkpoint_lam1_m0.5.json --data \"" +
                            s.file("dataset.csv") + "\" --episodes 1 --seed 2 --out-dir \"" +
                            dir + "\"");
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("ci95") != std::string::npos);  // single-episode warning
    CHECK(r.out.find("± 0.0000") != std::string::npos);
}

TEST_CASE("gradcheck passes on the shipped gradients and catches sabotage") {
    const RunResult clean = run("gradcheck --cases 4 --seed 2");
    CHECK(clean.exit_code == 0);
    CHECK(clean.out.find("pass") != std::string::npos);
    CHECK(clean.out.find("FAIL") == std::string::npos);

    const RunResult broken = run("gradcheck --cases 3 --seed 2 --corrupt triplet");
    CHECK(broken.exit_code == 4);
    CHECK(broken.out.find("FAIL") != std::string::npos);
}

TEST_CASE("usage and configuration problems exit with code 2") {
    SUBCASE("no subcommand") {
        CHECK(run("").exit_code == 2);
    }
    SUBCASE("unknown flag") {
        CHECK(run("gen-data --bogus 1").exit_code == 2);
    }
    SUBCASE("missing config file") {
        Scratch s;
        const RunResult r =
            run("train --config \"" + s.file("absent.json") + "\" --out-dir \"" +
                s.path.string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("error") != std::string::npos);
    }
    SUBCASE("config with an invalid field") {
        Scratch s;
        const std::string path = s.file("bad.json");
        std::ofstream(path) << R"({"train": {"model": "zebra",
                                   "encoder": {"layer_widths": [4, 4]}}})";
        const RunResult r =
            run("train --config \"" + path + "\" --out-dir \"" + s.path.string() + "\"");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("train.model") != std::string::npos);
    }
    SUBCASE("eval pointed at a non-checkpoint file") {
        Scratch s;
        make_workspace(s);
        const std::string config_path = s.file("exp.json");
        save_experiment(small_experiment(s), config_path);
        const RunResult r = run("eval --checkpoint \"" + config_path + "\" --data \"" +
                                s.file("dataset.csv") + "\" --out-dir \"" + s.path.string() +
                                "\"");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("format") != std::string::npos);
    }
}

TEST_CASE("training divergence exits with code 3 and marks the cell") {
    Scratch s;
    make_workspace(s);
    ExperimentConfig config = small_experiment(s);
    config.train.optimizer.kind = OptimizerKind::sgd;
    config.train.optimizer.learning_rate = 1e200;
    config.train.clip_norm = 0.0;
    config.train.n_updates = 5;
    const std::string config_path = s.file("exp.json");
    save_experiment(config, config_path);

    const std::string dir = s.file("run");
    const RunResult r = run("train --config \"" + config_path + "\" --out-dir \"" + dir + "\"");
    CHECK(r.exit_code == 3);
    CHECK(r.out.find("×") != std::string::npos);  // the non-convergence marker
}

TEST_CASE("sweep covers the grid in order and parallel runs match") {
    Scratch s;
    make_workspace(s);
    ExperimentConfig config = small_experiment(s);
    config.sweep_lambdas = {0.0, 1.0};
    const std::string config_path = s.file("exp.json");
    save_experiment(config, config_path);

    const std::string dir_a = s.file("serial");
    const RunResult a =
        run("sweep --config \"" + config_path + "\" --out-dir \"" + dir_a + "\" --episodes 24");
    CHECK(a.exit_code == 0);
    CHECK(a.out.find("lambda=0 ") != std::string::npos);
    CHECK(a.out.find("lambda=1 ") != std::string::npos);

    const std::vector<ResultRow> rows = load_result_csv(dir_a + "/results.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].lambda == 0.0);  // grid order regardless of finish order
    CHECK(rows[1].lambda == 1.0);
    CHECK(rows[0].n_episodes == 24);
    for (const ResultRow& row : rows) {
        CHECK(!row.diverged);
        CHECK(row.mean >= 0.0);
        CHECK(row.mean <= 1.0);
    }

    const std::string dir_b = s.file("parallel");
    const RunResult b =
        run("sweep --config \"" + config_path + "\" --out-dir \"" + dir_b + "\" --episodes 24",
            "LMFS_WORKERS=2");
    CHECK(b.exit_code == 0);
    CHECK(slurp(dir_b + "/results.csv") == slurp(dir_a + "/results.csv"));
}

TEST_CASE("sweep reports divergence per cell without aborting the grid") {
    Scratch s;
    make_workspace(s);
    ExperimentConfig config = small_experiment(s);
    config.train.optimizer.kind = OptimizerKind::sgd;
    config.train.optimizer.learning_rate = 1e200;
    config.train.clip_norm = 0.0;
    config.train.n_updates = 5;
    const std::string config_path = s.file("exp.json");
    save_experiment(config, config_path);

    const std::string dir = s.file("run");
    const RunResult r =
        run("sweep --config \"" + config_path + "\" --out-dir \"" + dir + "\" --episodes 10");
    CHECK(r.exit_code == 3);

    const std::vector<ResultRow> rows = load_result_csv(dir + "/results.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].diverged);
    CHECK(slurp(dir + "/results.csv").find("×") != std::string::npos);
}
