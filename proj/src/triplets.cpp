#include "lmfs/triplets.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "lmfs/errors.hpp"

namespace lmfs {

namespace {

// Draws n entries from pool: a partial Fisher-Yates shuffle when the pool is
// large enough, uniform draws with replacement otherwise (keeps the triplet
// count exact on tiny classes).
std::vector<std::size_t> draw(const std::vector<std::size_t>& pool, int n,
                              std::mt19937_64& rng) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(n));
    if (pool.size() >= static_cast<std::size_t>(n)) {
        std::vector<std::size_t> work = pool;
        for (int i = 0; i < n; ++i) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                            work.size() - 1);
            std::swap(work[static_cast<std::size_t>(i)], work[pick(rng)]);
            out.push_back(work[static_cast<std::size_t>(i)]);
        }
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (int i = 0; i < n; ++i) out.push_back(pool[pick(rng)]);
    }
    return out;
}

// Shared selection core: for each anchor, n_pos positives from the anchor's
// label pool (anchor excluded) and n_neg negatives per positive from the
// complementary pool, all drawn from `labels` over a flat index space.
TripletSet select_core(const char* who, const std::vector<int>& labels,
                       const std::vector<std::size_t>& anchors, int n_pos,
                       int n_neg, std::mt19937_64& rng) {
    if (n_pos < 1 || n_neg < 1)
        throw UsageError(std::string(who) + ": n_pos and n_neg must be >= 1");

    int max_label = 0;
    for (int y : labels) {
        if (y < 0) throw UsageError(std::string(who) + ": negative label");
        max_label = std::max(max_label, y);
    }
    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_label[static_cast<std::size_t>(labels[i])].push_back(i);

    // Complementary pools, one per label value.
    std::vector<std::vector<std::size_t>> against(by_label.size());
    for (std::size_t y = 0; y < by_label.size(); ++y) {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (static_cast<std::size_t>(labels[i]) != y) against[y].push_back(i);
    }

    TripletSet ts;
    ts.triplets.reserve(anchors.size() * static_cast<std::size_t>(n_pos) *
                        static_cast<std::size_t>(n_neg));
    for (std::size_t a : anchors) {
        const auto y = static_cast<std::size_t>(labels[a]);
        std::vector<std::size_t> pos_pool;
        pos_pool.reserve(by_label[y].size());
        for (std::size_t i : by_label[y])
            if (i != a) pos_pool.push_back(i);
        if (pos_pool.empty())
            throw SelectionError(std::string(who) + ": label " + std::to_string(labels[a]) +
                                 " has a single sample; no positive available");
        if (against[y].empty())
            throw SelectionError(std::string(who) + ": label " + std::to_string(labels[a]) +
                                 " has no differently labeled sample; no negative available");
        for (std::size_t p : draw(pos_pool, n_pos, rng)) {
            for (std::size_t n : draw(against[y], n_neg, rng))
                ts.triplets.push_back({a, p, n});
        }
    }
    validate_triplets(ts, labels);
    return ts;
}

}  // namespace

TripletSet select_triplets_gnn(const std::vector<std::vector<int>>& batch_labels,
                               std::mt19937_64& rng, int n_pos, int n_neg) {
    if (batch_labels.empty())
        throw UsageError("select_triplets_gnn: empty batch");
    std::vector<int> labels;
    for (const auto& ep : batch_labels) {
        if (ep.empty()) throw UsageError("select_triplets_gnn: episode with no support labels");
        labels.insert(labels.end(), ep.begin(), ep.end());
    }
    std::vector<std::size_t> anchors(labels.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) anchors[i] = i;
    return select_core("select_triplets_gnn", labels, anchors, n_pos, n_neg, rng);
}

TripletSet select_triplets_pn(const Episode& episode, std::mt19937_64& rng,
                              int n_pos, int n_neg) {
    std::vector<int> labels = episode.support_y;
    labels.insert(labels.end(), episode.query_y.begin(), episode.query_y.end());
    if (labels.empty()) throw UsageError("select_triplets_pn: episode has no samples");
    std::vector<std::size_t> anchors(labels.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) anchors[i] = i;
    return select_core("select_triplets_pn", labels, anchors, n_pos, n_neg, rng);
}

PairingPartition pairing_partition(const TripletSet& ts,
                                   const std::vector<int>& labels,
                                   std::size_t pivot) {
    if (pivot >= labels.size())
        throw UsageError("pairing_partition: pivot out of range");
    PairingPartition part;
    for (const Triplet& t : ts.triplets) {
        if (t.anchor == pivot) {
            // Both distance terms contain the pivot embedding.
            part.same.push_back(t.positive);
            part.diff.push_back(t.negative);
        } else if (t.positive == pivot) {
            // Only the positively signed term pairs the anchor with the pivot.
            part.same.push_back(t.anchor);
        } else if (t.negative == pivot) {
            // Only the negatively signed term pairs the anchor with the pivot.
            part.diff.push_back(t.anchor);
        }
    }
    std::sort(part.same.begin(), part.same.end());
    std::sort(part.diff.begin(), part.diff.end());
    std::unordered_set<std::size_t> paired(part.same.begin(), part.same.end());
    paired.insert(part.diff.begin(), part.diff.end());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (i != pivot && paired.count(i) == 0) part.excluded.push_back(i);
    return part;
}

void validate_triplets(const TripletSet& ts, const std::vector<int>& labels) {
    for (std::size_t k = 0; k < ts.triplets.size(); ++k) {
        const Triplet& t = ts.triplets[k];
        if (t.anchor >= labels.size() || t.positive >= labels.size() ||
            t.negative >= labels.size())
            throw SelectionError("validate_triplets: triplet " + std::to_string(k) +
                                 " references an out-of-range index");
        if (t.anchor == t.positive)
            throw SelectionError("validate_triplets: triplet " + std::to_string(k) +
                                 " uses the same sample as anchor and positive");
        if (labels[t.anchor] != labels[t.positive])
            throw SelectionError("validate_triplets: triplet " + std::to_string(k) +
                                 " pairs differently labeled anchor and positive");
        if (labels[t.anchor] == labels[t.negative])
            throw SelectionError("validate_triplets: triplet " + std::to_string(k) +
                                 " uses a same-labeled negative");
    }
}

void save_triplets_csv(const TripletSet& ts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("save_triplets_csv: cannot open " + path + " for writing");
    out << "anchor,positive,negative\n";
    for (const Triplet& t : ts.triplets)
        out << t.anchor << ',' << t.positive << ',' << t.negative << '\n';
}

}  // namespace lmfs
