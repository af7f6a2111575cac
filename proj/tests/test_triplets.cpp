#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "lmfs/triplets.hpp"

using namespace lmfs;

namespace {

// Support labels of one C-way K-shot episode, class-major.
std::vector<int> episode_labels(int c_way, int k_shot) {
    std::vector<int> labels;
    for (int c = 0; c < c_way; ++c)
        for (int k = 0; k < k_shot; ++k) labels.push_back(c);
    return labels;
}

}  // namespace

TEST_CASE("gnn selector reproduces the 25,000-triplet configuration") {
    std::vector<std::vector<int>> batch(40, episode_labels(5, 5));
    std::mt19937_64 rng(1);
    const TripletSet ts = select_triplets_gnn(batch, rng);
    CHECK(ts.count() == 25000);  // 25 anchors x 5 pos x 5 neg x 40 episodes

    std::vector<int> all_labels;
    for (const auto& ep : batch) all_labels.insert(all_labels.end(), ep.begin(), ep.end());
    CHECK_NOTHROW(validate_triplets(ts, all_labels));
}

TEST_CASE("gnn selector minimal enumeration and determinism") {
    const std::vector<std::vector<int>> batch{{0, 0, 1, 1}};
    std::mt19937_64 rng_a(9), rng_b(9);
    const TripletSet a = select_triplets_gnn(batch, rng_a, 1, 1);
    CHECK(a.count() == 4);  // 4 anchors x 1 x 1

    const TripletSet b = select_triplets_gnn(batch, rng_b, 1, 1);
    REQUIRE(a.count() == b.count());
    for (std::size_t i = 0; i < a.count(); ++i) {
        CHECK(a.triplets[i].anchor == b.triplets[i].anchor);
        CHECK(a.triplets[i].positive == b.triplets[i].positive);
        CHECK(a.triplets[i].negative == b.triplets[i].negative);
    }
}

TEST_CASE("gnn selector pools positives across episodes by label value") {
    // One sample per class per episode: positives can only come from the
    // other episode's share of the same label.
    const std::vector<std::vector<int>> batch{{0, 1}, {0, 1}};
    std::mt19937_64 rng(5);
    const TripletSet ts = select_triplets_gnn(batch, rng, 1, 1);
    CHECK(ts.count() == 4);
    const std::vector<int> labels{0, 1, 0, 1};
    CHECK_NOTHROW(validate_triplets(ts, labels));
    for (const Triplet& t : ts.triplets) {
        // With 2 samples per label the positive is forced to the twin sample
        // in the other episode.
        CHECK(t.positive == (t.anchor + 2) % 4);
    }
}

TEST_CASE("gnn selector rejects a class without a second sample") {
    const std::vector<std::vector<int>> batch{{0, 1}};
    std::mt19937_64 rng(2);
    CHECK_THROWS_AS(select_triplets_gnn(batch, rng, 1, 1), SelectionError);
}

TEST_CASE("pn selector reproduces the 40,000-triplet configuration") {
    Episode ep;
    ep.support_y = episode_labels(20, 5);
    ep.query_y = episode_labels(20, 15);
    ep.support_x = Matrix(ep.support_y.size(), 2);
    ep.query_x = Matrix(ep.query_y.size(), 2);
    for (int c = 0; c < 20; ++c) ep.class_map.push_back(c);

    std::mt19937_64 rng(3);
    const TripletSet ts = select_triplets_pn(ep, rng);
    CHECK(ts.count() == 40000);  // 400 anchors x 10 pos x 10 neg

    std::vector<int> labels = ep.support_y;
    labels.insert(labels.end(), ep.query_y.begin(), ep.query_y.end());
    CHECK_NOTHROW(validate_triplets(ts, labels));
    for (const Triplet& t : ts.triplets) {
        CHECK(t.anchor < 400);
        CHECK(t.positive < 400);
        CHECK(t.negative < 400);
    }
}

TEST_CASE("pn selector minimal enumeration") {
    Episode ep;
    ep.support_y = {0, 1};
    ep.query_y = {0, 1};
    ep.support_x = Matrix(2, 2);
    ep.query_x = Matrix(2, 2);
    ep.class_map = {5, 9};
    std::mt19937_64 rng(4);
    const TripletSet ts = select_triplets_pn(ep, rng, 1, 1);
    CHECK(ts.count() == 4);
}

TEST_CASE("exact count anchors x n_pos x n_neg holds on random shapes") {
    std::mt19937_64 rng(2026);
    std::uniform_int_distribution<int> way(2, 5), shot(2, 4), pos(1, 4), neg(1, 4), eps(1, 4);
    for (int rep = 0; rep < 50; ++rep) {
        const int c = way(rng), k = shot(rng), np = pos(rng), nn = neg(rng);
        const int b = eps(rng);
        std::vector<std::vector<int>> batch(std::size_t(b), episode_labels(c, k));
        const TripletSet ts = select_triplets_gnn(batch, rng, np, nn);
        CHECK(ts.count() == std::size_t(b) * std::size_t(c * k) * std::size_t(np * nn));

        std::vector<int> all_labels;
        for (const auto& ep : batch) all_labels.insert(all_labels.end(), ep.begin(), ep.end());
        CHECK_NOTHROW(validate_triplets(ts, all_labels));
    }
}

TEST_CASE("pairing partition of an unpaired pivot is empty") {
    TripletSet ts;
    ts.triplets = {{0, 1, 2}};
    const std::vector<int> labels{0, 0, 1, 1};
    const PairingPartition part = pairing_partition(ts, labels, 3);
    CHECK(part.same.empty());
    CHECK(part.diff.empty());
    const std::set<std::size_t> excluded(part.excluded.begin(), part.excluded.end());
    CHECK(excluded == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("pairing partition reads triplet roles directly") {
    TripletSet ts;
    ts.triplets = {{0, 1, 2}};
    const std::vector<int> labels{0, 0, 1};
    const PairingPartition part = pairing_partition(ts, labels, 0);
    CHECK(part.same == std::vector<std::size_t>{1});
    CHECK(part.diff == std::vector<std::size_t>{2});
}

TEST_CASE("pairing partition accumulates multiplicities across triplets") {
    // Pivot 0 appears as anchor of (0,1,2) and as positive of (1,0,2): the
    // positive-pair term shows up twice, the negative term only once (the
    // second triplet's negative distance does not involve the pivot).
    TripletSet ts;
    ts.triplets = {{0, 1, 2}, {1, 0, 2}};
    const std::vector<int> labels{0, 0, 1};
    PairingPartition part = pairing_partition(ts, labels, 0);
    std::sort(part.same.begin(), part.same.end());
    CHECK(part.same == std::vector<std::size_t>{1, 1});
    CHECK(part.diff == std::vector<std::size_t>{2});
    CHECK(part.excluded.empty());
}

TEST_CASE("pairing multiplicity equals the number of pivot-involving terms") {
    std::mt19937_64 rng(555);
    const std::vector<int> labels = episode_labels(3, 4);
    std::vector<std::vector<int>> batch{labels};
    for (int rep = 0; rep < 20; ++rep) {
        const TripletSet ts = select_triplets_gnn(batch, rng, 2, 2);
        std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
        const std::size_t pivot = pick(rng);

        // Recount directly from the triplet roles.
        std::map<std::size_t, int> same_count, diff_count;
        for (const Triplet& t : ts.triplets) {
            if (t.anchor == pivot) {
                ++same_count[t.positive];
                ++diff_count[t.negative];
            }
            if (t.positive == pivot) ++same_count[t.anchor];
            if (t.negative == pivot) ++diff_count[t.anchor];
        }
        const PairingPartition part = pairing_partition(ts, labels, pivot);
        std::map<std::size_t, int> got_same, got_diff;
        for (std::size_t j : part.same) ++got_same[j];
        for (std::size_t j : part.diff) ++got_diff[j];
        CHECK(got_same == same_count);
        CHECK(got_diff == diff_count);

        // excluded covers exactly the never-paired samples other than the
        // pivot itself, which belongs to none of the three sets.
        std::set<std::size_t> touched;
        for (const auto& [j, n] : same_count) {
            (void)n;
            touched.insert(j);
        }
        for (const auto& [j, n] : diff_count) {
            (void)n;
            touched.insert(j);
        }
        CHECK(part.excluded.size() == labels.size() - touched.size() - 1);
        for (std::size_t j : part.excluded) {
            CHECK(touched.count(j) == 0);
            CHECK(j != pivot);
        }
    }
}

TEST_CASE("triplet CSV dump writes one line per triplet") {
    TripletSet ts;
    ts.triplets = {{0, 1, 2}, {3, 4, 5}};
    const auto path = std::filesystem::temp_directory_path() / "lmfs_triplets.csv";
    save_triplets_csv(ts, path.string());
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "anchor,positive,negative");
    REQUIRE(std::getline(in, line));
    CHECK(line == "0,1,2");
    REQUIRE(std::getline(in, line));
    CHECK(line == "3,4,5");
    CHECK_FALSE(std::getline(in, line));
}
