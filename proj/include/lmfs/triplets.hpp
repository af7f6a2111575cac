#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "lmfs/data.hpp"

namespace lmfs {

// One (anchor, positive, negative) index triple. Indices refer to rows of
// whatever embedding matrix the selector was built against: the in-episode
// support+query stack for the prototypical selector, or the concatenated
// support stack of a whole episode batch for the graph selector.
struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

// Immutable after construction; built once per training job and reused for
// indexing at every update.
struct TripletSet {
    std::vector<Triplet> triplets;

    std::size_t count() const { return triplets.size(); }
};

// Partition of all samples relative to one pivot sample: `same` collects every
// co-occurring sample whose distance-to-pivot term carries a positive sign
// (same label), `diff` the negatively signed ones (different label), both with
// multiplicities. `excluded` holds the samples never paired with the pivot.
struct PairingPartition {
    std::vector<std::size_t> same;
    std::vector<std::size_t> diff;
    std::vector<std::size_t> excluded;
};

// Selects triplets for graph-network training. `batch_labels` holds one label
// array per episode (the support labels, values 0..C-1); anchors are all
// support samples of all episodes, and positives/negatives are pooled across
// the batch by label value, mirroring the shared one-hot label representation.
// Indices refer to the episode-major concatenation of the support samples.
// Throws SelectionError when some label has no possible positive or negative.
TripletSet select_triplets_gnn(const std::vector<std::vector<int>>& batch_labels,
                               std::mt19937_64& rng,
                               int n_pos = 5, int n_neg = 5);

// Selects triplets for prototypical-network training. Anchors are all support
// and query samples of the episode; indices refer to the support rows followed
// by the query rows.
TripletSet select_triplets_pn(const Episode& episode,
                              std::mt19937_64& rng,
                              int n_pos = 10, int n_neg = 10);

// Collects, over every triplet containing `pivot`, the co-occurring sample of
// each distance term that involves the pivot: positives and same-label anchors
// land in `same`, negatives and diff-label anchors in `diff`. A term that does
// not touch the pivot contributes nothing (a triplet where the pivot is the
// positive contributes only its anchor, and likewise for the negative role).
PairingPartition pairing_partition(const TripletSet& ts,
                                   const std::vector<int>& labels,
                                   std::size_t pivot);

// Checks every triplet against the label invariants (anchor/positive share a
// label and differ as indices, negative has another label) and the index
// range. Throws SelectionError on the first violation.
void validate_triplets(const TripletSet& ts, const std::vector<int>& labels);

// Writes "anchor,positive,negative" rows (with a header line) for inspection.
void save_triplets_csv(const TripletSet& ts, const std::string& path);

}  // namespace lmfs
