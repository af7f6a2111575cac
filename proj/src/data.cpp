#include "lmfs/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lmfs {

void Dataset::rebuild_index() {
    class_index.clear();
    for (std::size_t i = 0; i < labels.size(); ++i) class_index[labels[i]].push_back(i);
}

Dataset Dataset::restricted_to(const std::vector<int>& classes) const {
    std::set<int> keep(classes.begin(), classes.end());
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (keep.count(labels[i])) rows.push_back(i);
    Dataset out;
    out.features = Matrix(rows.size(), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(features.row(rows[r]), features.row(rows[r]) + features.cols(),
                  out.features.row(r));
        out.labels.push_back(labels[rows[r]]);
    }
    out.rebuild_index();
    return out;
}

void EpisodeSpec::validate() const {
    if (c_way < 2) throw ConfigError("EpisodeSpec: c_way must be >= 2");
    if (k_shot < 1) throw ConfigError("EpisodeSpec: k_shot must be >= 1");
    if (n_query < 1) throw ConfigError("EpisodeSpec: n_query must be >= 1");
    if (n_unlabeled < 0) throw ConfigError("EpisodeSpec: n_unlabeled must be >= 0");
}

namespace {

// Sample k distinct entries of pool (partial Fisher-Yates on a copy).
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t k, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

void copy_row(const Matrix& src, std::size_t src_row, Matrix& dst, std::size_t dst_row) {
    std::copy(src.row(src_row), src.row(src_row) + src.cols(), dst.row(dst_row));
}

}  // namespace

Episode sample_episode(const Dataset& ds, const EpisodeSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    const std::size_t c = static_cast<std::size_t>(spec.c_way);
    if (ds.n_classes() < c)
        throw CapacityError("sample_episode: dataset has " +
                            std::to_string(ds.n_classes()) + " classes, episode needs " +
                            std::to_string(c));

    // Unlabeled rows per episode class, dealt as evenly as possible; the
    // remainder goes to the first classes of the (already random) permutation.
    std::vector<std::size_t> unlabeled_per_class(c, spec.n_unlabeled / c);
    for (std::size_t k = 0; k < static_cast<std::size_t>(spec.n_unlabeled) % c; ++k)
        ++unlabeled_per_class[k];

    std::vector<int> class_ids;
    class_ids.reserve(ds.n_classes());
    for (const auto& [cls, _] : ds.class_index) class_ids.push_back(cls);
    std::vector<std::size_t> order(class_ids.size());
    std::iota(order.begin(), order.end(), 0);
    auto chosen = sample_without_replacement(order, c, rng);

    Episode ep;
    ep.class_map.resize(c);
    ep.support_x = Matrix(c * spec.k_shot, ds.dim());
    ep.query_x = Matrix(c * spec.n_query, ds.dim());
    ep.unlabeled_x = Matrix(spec.n_unlabeled, ds.dim());
    std::size_t unlabeled_row = 0;

    for (std::size_t k = 0; k < c; ++k) {
        const int cls = class_ids[chosen[k]];
        ep.class_map[k] = cls;
        const auto& pool = ds.class_index.at(cls);
        const std::size_t need = spec.k_shot + spec.n_query + unlabeled_per_class[k];
        if (pool.size() < need)
            throw CapacityError("sample_episode: class " + std::to_string(cls) + " has " +
                                std::to_string(pool.size()) + " samples, episode needs " +
                                std::to_string(need));
        auto picked = sample_without_replacement(pool, need, rng);
        std::size_t p = 0;
        for (int s = 0; s < spec.k_shot; ++s, ++p)
            copy_row(ds.features, picked[p], ep.support_x, k * spec.k_shot + s);
        for (int q = 0; q < spec.n_query; ++q, ++p)
            copy_row(ds.features, picked[p], ep.query_x, k * spec.n_query + q);
        for (std::size_t u = 0; u < unlabeled_per_class[k]; ++u, ++p)
            copy_row(ds.features, picked[p], ep.unlabeled_x, unlabeled_row++);
    }
    // Rows are grouped by episode class, so labels follow the slot pattern.
    for (std::size_t k = 0; k < c; ++k)
        for (int s = 0; s < spec.k_shot; ++s) ep.support_y.push_back(static_cast<int>(k));
    for (std::size_t k = 0; k < c; ++k)
        for (int q = 0; q < spec.n_query; ++q) ep.query_y.push_back(static_cast<int>(k));
    return ep;
}

Episode single_query_episode(const Episode& ep, std::mt19937_64& rng) {
    if (ep.query_y.empty()) throw UsageError("single_query_episode: no query rows");
    std::uniform_int_distribution<std::size_t> pick(0, ep.query_y.size() - 1);
    const std::size_t q = pick(rng);
    Episode out;
    out.support_x = ep.support_x;
    out.support_y = ep.support_y;
    out.class_map = ep.class_map;
    out.unlabeled_x = ep.unlabeled_x;
    out.query_x = Matrix(1, ep.query_x.cols());
    copy_row(ep.query_x, q, out.query_x, 0);
    out.query_y = {ep.query_y[q]};
    return out;
}

Dataset gen_gaussian_tasks(int n_classes, int samples_per_class, int dim,
                           double center_scale, double noise_sigma, std::uint64_t seed) {
    if (n_classes < 1 || samples_per_class < 1 || dim < 1)
        throw UsageError("gen_gaussian_tasks: counts must be >= 1");
    if (noise_sigma <= 0.0) throw UsageError("gen_gaussian_tasks: noise_sigma must be > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    Matrix centers(n_classes, dim);
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers.data()[i] = center_scale * unit(rng);

    Dataset ds;
    ds.features = Matrix(std::size_t(n_classes) * samples_per_class, dim);
    ds.labels.reserve(ds.features.rows());
    std::size_t row = 0;
    for (int c = 0; c < n_classes; ++c) {
        for (int s = 0; s < samples_per_class; ++s, ++row) {
            for (int j = 0; j < dim; ++j)
                ds.features(row, j) = centers(c, j) + noise_sigma * unit(rng);
            ds.labels.push_back(c);
        }
    }
    ds.rebuild_index();
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_csv: cannot open " + path);
    std::vector<int> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> values;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw ParseError("load_csv: " + path + " line " + std::to_string(line_no) +
                                 ": non-numeric field '" + field + "'");
            }
        }
        if (values.size() < 2)
            throw ParseError("load_csv: " + path + " line " + std::to_string(line_no) +
                             ": need a label and at least one feature");
        if (!rows.empty() && values.size() != rows.front().size() + 1)
            throw ParseError("load_csv: " + path + " line " + std::to_string(line_no) +
                             ": expected " + std::to_string(rows.front().size()) +
                             " features, got " + std::to_string(values.size() - 1));
        const double label = values.front();
        if (label != std::floor(label))
            throw ParseError("load_csv: " + path + " line " + std::to_string(line_no) +
                             ": label must be an integer");
        labels.push_back(static_cast<int>(label));
        rows.emplace_back(values.begin() + 1, values.end());
    }
    if (rows.empty()) throw ParseError("load_csv: " + path + " is empty");

    Dataset ds;
    ds.features = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), ds.features.row(i));
    ds.labels = std::move(labels);
    ds.rebuild_index();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_csv: cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

void ClassSplit::validate_disjoint() const {
    std::set<int> seen;
    for (const auto* part : {&train, &val, &test}) {
        for (int cls : *part) {
            if (!seen.insert(cls).second)
                throw ConfigError("ClassSplit: class " + std::to_string(cls) +
                                 " appears in more than one split");
        }
    }
}

ClassSplit split_classes(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                         std::size_t n_test, std::uint64_t seed) {
    std::vector<int> class_ids;
    for (const auto& [cls, _] : ds.class_index) class_ids.push_back(cls);
    if (n_train + n_val + n_test > class_ids.size())
        throw CapacityError("split_classes: dataset has " +
                            std::to_string(class_ids.size()) + " classes, split needs " +
                            std::to_string(n_train + n_val + n_test));
    std::mt19937_64 rng(seed);
    std::shuffle(class_ids.begin(), class_ids.end(), rng);
    ClassSplit split;
    auto it = class_ids.begin();
    split.train.assign(it, it + n_train);
    it += n_train;
    split.val.assign(it, it + n_val);
    it += n_val;
    split.test.assign(it, it + n_test);
    return split;
}

ClassSplit load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_split: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("load_split: " + path + ": " + e.what());
    }
    ClassSplit split;
    split.train = j.at("train").get<std::vector<int>>();
    split.val = j.at("val").get<std::vector<int>>();
    split.test = j.at("test").get<std::vector<int>>();
    split.validate_disjoint();
    return split;
}

void save_split(const ClassSplit& split, const std::string& path) {
    nlohmann::json j{{"train", split.train}, {"val", split.val}, {"test", split.test}};
    std::ofstream out(path);
    if (!out) throw ParseError("save_split: cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace lmfs
