#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lmfs/matrix.hpp"

namespace lmfs {

/// Labeled feature set. class_index maps each class id to the row indices
/// carrying that label; together the lists partition 0..N.
struct Dataset {
    Matrix features;          // N x d_in
    std::vector<int> labels;  // N
    std::map<int, std::vector<std::size_t>> class_index;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    std::size_t n_classes() const { return class_index.size(); }

    void rebuild_index();
    /// Rows whose class id is in `classes`, in original order.
    Dataset restricted_to(const std::vector<int>& classes) const;
};

struct EpisodeSpec {
    int c_way = 5;
    int k_shot = 1;
    int n_query = 1;      // queries per class
    int n_unlabeled = 0;  // r, total across the episode

    void validate() const;
};

/// One sampled C-way K-shot task. Labels are remapped to 0..C-1;
/// class_map[episode label] recovers the original class id.
struct Episode {
    Matrix support_x;
    std::vector<int> support_y;
    Matrix query_x;
    std::vector<int> query_y;
    Matrix unlabeled_x;  // zero rows when r == 0
    std::vector<int> class_map;

    int c_way() const { return static_cast<int>(class_map.size()); }
};

/// Uniform sampling without replacement inside the episode; episode labels
/// are a random permutation of the chosen classes. Unlabeled rows come from
/// the same C classes, spread as evenly as possible.
Episode sample_episode(const Dataset& ds, const EpisodeSpec& spec, std::mt19937_64& rng);

/// Keep exactly one query row (uniformly chosen) and drop the rest; the
/// single-query layout the graph model consumes.
Episode single_query_episode(const Episode& ep, std::mt19937_64& rng);

/// Gaussian class blobs: centers ~ N(0, center_scale^2 I), samples
/// ~ N(center, noise_sigma^2 I). Deterministic for a given seed.
Dataset gen_gaussian_tasks(int n_classes, int samples_per_class, int dim,
                           double center_scale, double noise_sigma, std::uint64_t seed);

/// CSV rows are "label,f1,...,fd" with constant d, '.' decimals, no header.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

/// Class-disjoint partition of a dataset's class ids.
struct ClassSplit {
    std::vector<int> train, val, test;

    void validate_disjoint() const;
};

ClassSplit split_classes(const Dataset& ds, std::size_t n_train, std::size_t n_val,
                         std::size_t n_test, std::uint64_t seed);
ClassSplit load_split(const std::string& path);
void save_split(const ClassSplit& split, const std::string& path);

}  // namespace lmfs
