#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "lmfs/gnn.hpp"
#include "lmfs/triplets.hpp"

using namespace lmfs;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.storage()) v = dist(rng);
    return m;
}

// Single-query 3-way 2-shot episode with random features and r unlabeled rows.
Episode gnn_episode(std::mt19937_64& rng, int r_unlabeled = 1, std::size_t d_in = 3) {
    Episode ep;
    ep.support_y = {0, 0, 1, 1, 2, 2};
    ep.support_x = random_matrix(rng, 6, d_in);
    ep.query_y = {std::uniform_int_distribution<int>(0, 2)(rng)};
    ep.query_x = random_matrix(rng, 1, d_in);
    ep.unlabeled_x = random_matrix(rng, std::size_t(r_unlabeled), d_in);
    ep.class_map = {0, 1, 2};
    return ep;
}

GnnConfig small_config(AdjacencyMode mode = AdjacencyMode::per_layer) {
    GnnConfig config;
    config.d_embed = 4;
    config.n_classes = 3;
    config.layer_dims = {5, 4};
    config.adjacency_hidden = {6};
    config.adjacency_mode = mode;
    return config;
}

EncoderSpec small_encoder_spec(std::size_t d_in = 3) {
    EncoderSpec spec;
    spec.layer_widths = {d_in, 6, 4};
    spec.activation = Activation::tanh_;
    return spec;
}

}  // namespace

TEST_CASE("init_node_features concatenates embeddings with label blocks") {
    Episode ep;
    ep.support_y = {0, 2};
    ep.support_x = Matrix(2, 1);
    ep.query_y = {1};
    ep.query_x = Matrix(1, 1);
    ep.unlabeled_x = Matrix(1, 1);
    ep.class_map = {0, 1, 2, 3, 4};

    Matrix emb(4, 4);  // support, support, query, unlabeled
    for (std::size_t i = 0; i < emb.size(); ++i) emb.data()[i] = double(i);
    const Matrix x = init_node_features(emb, ep);
    REQUIRE(x.cols() == 9);  // d_enc 4 + C 5
    REQUIRE(x.rows() == 4);

    // Embedding part is copied through.
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(x(r, c) == emb(r, c));

    // Support one-hots; query and unlabeled get the uniform block.
    const std::vector<double> hot0{1, 0, 0, 0, 0}, hot2{0, 0, 1, 0, 0};
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(x(0, 4 + c) == hot0[c]);
        CHECK(x(1, 4 + c) == hot2[c]);
        CHECK(x(2, 4 + c) == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(x(3, 4 + c) == doctest::Approx(0.2).epsilon(1e-12));
    }

    Episode two_queries = ep;
    two_queries.query_x = Matrix(2, 1);
    two_queries.query_y = {1, 2};
    CHECK_THROWS_AS(init_node_features(Matrix(5, 4), two_queries), UsageError);
}

TEST_CASE("raw adjacency scores are symmetric") {
    std::mt19937_64 rng(101);
    EncoderSpec mlp_spec;
    mlp_spec.layer_widths = {4, 5, 1};
    const EncoderParams mlp = encoder_init(mlp_spec, rng());
    const Matrix x = random_matrix(rng, 6, 4);
    const Matrix raw = adjacency(x, mlp, false);
    REQUIRE(raw.rows() == 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(std::abs(raw(i, j) - raw(j, i)) < 1e-12);
}

TEST_CASE("adjacency over identical nodes is uniform; rows always sum to 1") {
    std::mt19937_64 rng(103);
    EncoderSpec mlp_spec;
    mlp_spec.layer_widths = {3, 4, 1};
    const EncoderParams mlp = encoder_init(mlp_spec, rng());

    const Matrix same(5, 3, 0.8);
    const Matrix uniform = adjacency(same, mlp, true);
    for (double v : uniform.storage()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

    const Matrix a = adjacency(random_matrix(rng, 7, 3), mlp, true);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) sum += a(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("gnn_layer operator identities") {
    std::mt19937_64 rng(107);
    const Matrix x = random_matrix(rng, 4, 3);

    // Zero adjacency projection + identity mean projection: rows average.
    const Matrix averaged =
        gnn_layer(x, Matrix(4, 4), Matrix(3, 3), Matrix::identity(3), 1.0);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 4; ++r) mean += x(r, c) / 4.0;
        for (std::size_t r = 0; r < 4; ++r)
            CHECK(averaged(r, c) == doctest::Approx(mean).epsilon(1e-12));
    }

    // Identity adjacency + zero mean projection: features pass through.
    const Matrix passed =
        gnn_layer(x, Matrix::identity(4), Matrix::identity(3), Matrix(3, 3), 1.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(passed.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("gnn_forward with a zero head is uniform and deterministic") {
    std::mt19937_64 rng(109);
    const Episode ep = gnn_episode(rng);
    const EncoderParams enc = encoder_init(small_encoder_spec(), rng());
    GnnParams gnn = gnn_init(small_config(), rng());
    for (double& v : gnn.head.weights.storage()) v = 0.0;

    const GnnForward out = gnn_forward(ep, enc, gnn);
    REQUIRE(out.query_logits.size() == 3);
    for (double v : out.query_logits) CHECK(v == 0.0);
    const LossOut ce = softmax_ce(Matrix{{0, 0, 0}}, {ep.query_y[0]});
    CHECK(ce.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    const GnnForward again = gnn_forward(ep, enc, gnn);
    CHECK(out.final_embeddings.storage() == again.final_embeddings.storage());
    CHECK(out.query_logits == again.query_logits);
}

TEST_CASE("node count and final width follow the episode and config") {
    std::mt19937_64 rng(113);
    const Episode ep = gnn_episode(rng, 2);
    const EncoderParams enc = encoder_init(small_encoder_spec(), rng());
    const GnnParams gnn = gnn_init(small_config(), rng());
    const GnnForward out = gnn_forward(ep, enc, gnn);
    CHECK(out.final_embeddings.rows() == 9);  // 6 support + 1 query + 2 unlabeled
    CHECK(out.final_embeddings.cols() == 4);  // last layer width
    CHECK(out.cache.n_support == 6);
}

TEST_CASE("class permutation equivariance with matching parameter permutation") {
    // Relabeling classes permutes the one-hot coordinates of the layer-0
    // features. The network as a whole is equivariant once every parameter
    // row indexed by those coordinates is permuted the same way: the
    // first-layer rows of the layer-0 projections, the layer-0 edge MLP
    // input rows, and the head columns.
    std::mt19937_64 rng(127);
    for (const AdjacencyMode mode : {AdjacencyMode::per_layer, AdjacencyMode::static_once}) {
        const Episode ep = gnn_episode(rng);
        const EncoderParams enc = encoder_init(small_encoder_spec(), rng());
        const GnnParams gnn = gnn_init(small_config(mode), rng());
        const std::vector<std::size_t> perm{2, 0, 1};  // class c -> perm[c]

        Episode ep2 = ep;
        for (int& y : ep2.support_y) y = int(perm[std::size_t(y)]);
        for (int& y : ep2.query_y) y = int(perm[std::size_t(y)]);
        for (std::size_t c = 0; c < 3; ++c) ep2.class_map[perm[c]] = ep.class_map[c];

        GnnParams gnn2 = gnn;
        const std::size_t d = gnn.config.d_embed;
        const auto permute_rows = [&](const Matrix& m) {
            Matrix out = m;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t j = 0; j < m.cols(); ++j)
                    out(d + perm[c], j) = m(d + c, j);
            return out;
        };
        gnn2.proj_adj[0] = permute_rows(gnn.proj_adj[0]);
        gnn2.proj_mean[0] = permute_rows(gnn.proj_mean[0]);
        gnn2.edge_mlps[0].weights[0] = permute_rows(gnn.edge_mlps[0].weights[0]);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t r = 0; r < gnn.head.weights.rows(); ++r)
                gnn2.head.weights(r, perm[c]) = gnn.head.weights(r, c);

        const GnnForward base = gnn_forward(ep, enc, gnn);
        const GnnForward permuted = gnn_forward(ep2, enc, gnn2);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(permuted.query_logits[perm[c]] - base.query_logits[c]) < 1e-9);
    }
}

TEST_CASE("full backward through classification plus margin matches finite differences") {
    // C=3, K=2, d_enc=4, M=2, with every hinge active and all kinks
    // comfortably away from zero (resampled until well-conditioned).
    std::mt19937_64 rng(131);
    for (int attempt = 0; attempt < 200; ++attempt) {
        const Episode ep = gnn_episode(rng, 1);
        const EncoderParams enc = encoder_init(small_encoder_spec(), rng());
        const GnnParams gnn = gnn_init(small_config(), rng());
        const GnnForward fwd = gnn_forward(ep, enc, gnn);

        bool conditioned = true;
        for (std::size_t l = 0; l + 1 < fwd.cache.layers.size() && conditioned; ++l)
            for (double v : fwd.cache.layers[l].pre.storage())
                if (std::abs(v) < 1e-3) conditioned = false;
        for (const GnnAdjCache& adj : fwd.cache.adj) {
            if (!conditioned) break;
            for (std::size_t i = 0; i < adj.x.rows() && conditioned; ++i)
                for (std::size_t j = 0; j < adj.x.rows() && conditioned; ++j) {
                    if (i == j) continue;
                    for (std::size_t c = 0; c < adj.x.cols(); ++c) {
                        const double diff = std::abs(adj.x(i, c) - adj.x(j, c));
                        if (diff != 0.0 && diff < 1e-3) {
                            conditioned = false;
                            break;
                        }
                    }
                }
        }
        if (!conditioned) continue;

        std::mt19937_64 trng(7);
        const TripletSet ts = select_triplets_gnn({ep.support_y}, trng, 1, 1);

        // Margin large enough that every bracket stays strictly positive.
        double max_gap = 0.0;
        const Matrix& emb = fwd.final_embeddings;
        for (const Triplet& t : ts.triplets) {
            const double gap =
                squared_distance(emb.row(t.anchor), emb.row(t.negative), emb.cols()) -
                squared_distance(emb.row(t.anchor), emb.row(t.positive), emb.cols());
            max_gap = std::max(max_gap, gap);
        }
        const double m = max_gap + 0.5;
        const double lambda = 0.7;

        const auto total = [&](const EncoderParams& e, const GnnParams& g) {
            const GnnForward out = gnn_forward(ep, e, g);
            Matrix logits(1, 3);
            for (std::size_t c = 0; c < 3; ++c) logits(0, c) = out.query_logits[c];
            const LossOut ce = softmax_ce(logits, {ep.query_y[0]});
            const LossOut margin = triplet_loss(out.final_embeddings, ts, m);
            return std::make_tuple(ce.value + lambda * margin.value, ce, margin, out);
        };

        const auto [value, ce, margin, out] = total(enc, gnn);
        (void)value;
        std::vector<double> grad_logits(3);
        for (std::size_t c = 0; c < 3; ++c) grad_logits[c] = ce.grad_embeddings(0, c);
        Matrix grad_final = margin.grad_embeddings;
        grad_final *= lambda;
        const GnnBackward back = gnn_backward(enc, gnn, out.cache, grad_logits, grad_final);

        std::vector<double> analytic = back.grad_encoder.flatten();
        const std::vector<double> ggrad = back.grad_gnn.flatten();
        analytic.insert(analytic.end(), ggrad.begin(), ggrad.end());

        std::vector<double> x0 = enc.flatten();
        const std::size_t n_enc = x0.size();
        const std::vector<double> gflat = gnn.flatten();
        x0.insert(x0.end(), gflat.begin(), gflat.end());

        const auto f = [&](const std::vector<double>& x) {
            EncoderParams e = enc;
            GnnParams g = gnn;
            e.unflatten(x);
            g.unflatten(x, n_enc);
            return std::get<0>(total(e, g));
        };
        const std::vector<double> fd = finite_diff_grad(f, x0);
        for (std::size_t i = 0; i < fd.size(); ++i)
            CHECK(std::abs(fd[i] - analytic[i]) / std::max(1.0, std::abs(fd[i])) < 1e-6);
        return;  // one well-conditioned instance suffices
    }
    FAIL("no well-conditioned instance found");
}

TEST_CASE("gnn parameter flatten/unflatten round-trips") {
    std::mt19937_64 rng(137);
    const GnnParams gnn = gnn_init(small_config(), rng());
    const std::vector<double> flat = gnn.flatten();
    CHECK(flat.size() == gnn.param_count());
    GnnParams copy = GnnParams::zeros_like(gnn);
    copy.unflatten(flat);
    CHECK(copy.flatten() == flat);
}

TEST_CASE("gnn config validation and adjacency mode names") {
    GnnConfig config = small_config();
    CHECK_NOTHROW(config.validate());
    config.layer_dims.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = small_config();
    config.n_classes = 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);

    CHECK(adjacency_mode_from_string("per_layer") == AdjacencyMode::per_layer);
    CHECK(adjacency_mode_from_string("static_once") == AdjacencyMode::static_once);
    CHECK(to_string(AdjacencyMode::static_once) == "static_once");
    CHECK_THROWS_AS(adjacency_mode_from_string("full"), ConfigError);
}
