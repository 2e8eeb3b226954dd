#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "lifestyles/lda.hpp"
#include "lifestyles/rng.hpp"
#include "lifestyles/sparse.hpp"
#include "test_util.hpp"

using namespace lifestyles;

namespace {

std::vector<std::string> numbered_vocab(const std::string& prefix, int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

SparseCountMatrix random_corpus(int docs, int vocab, int tokens_per_doc, std::uint64_t seed) {
    SparseCountMatrix corpus(docs, vocab);
    Rng rng(seed);
    for (int d = 0; d < docs; ++d)
        for (int t = 0; t < tokens_per_doc; ++t)
            corpus.add(d, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab))), 1);
    return corpus;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("gibbs sweeps conserve tokens and keep count tables consistent") {
    const int D = 20, V = 12, K = 3;
    SparseCountMatrix corpus = random_corpus(D, V, 15, 21);
    const long long total = corpus.total();

    int sweeps_seen = 0;
    lda::TrainConfig cfg;
    cfg.topics = K;
    cfg.iterations = 30;
    cfg.seed = 77;
    auto observer = [&](int sweep, const lda::GibbsState& state) {
        CHECK(sweep == sweeps_seen);
        ++sweeps_seen;
        long long topic_total_sum = 0, word_sum = 0, doc_sum = 0;
        for (int k = 0; k < K; ++k) {
            topic_total_sum += (*state.topic_total)[static_cast<std::size_t>(k)];
            long long row = 0;
            for (int w = 0; w < V; ++w) {
                long long c = (*state.topic_word)[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)];
                CHECK(c >= 0);
                row += c;
            }
            CHECK(row == (*state.topic_total)[static_cast<std::size_t>(k)]);
            word_sum += row;
        }
        for (int d = 0; d < D; ++d) {
            long long row = 0;
            for (int k = 0; k < K; ++k) {
                long long c = (*state.doc_topic)[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)];
                CHECK(c >= 0);
                row += c;
            }
            CHECK(row == (*state.doc_total)[static_cast<std::size_t>(d)]);
            CHECK(row == corpus.row_sum(d));
            doc_sum += row;
        }
        CHECK(topic_total_sum == total);
        CHECK(word_sum == total);
        CHECK(doc_sum == total);
    };
    lda::TopicModel model = lda::train(corpus, numbered_vocab("w", V), cfg, observer);
    CHECK(sweeps_seen == 30);

    for (int k = 0; k < K; ++k) CHECK(std::abs(model.phi.row(k).sum() - 1.0) < 1e-9);
    for (int d = 0; d < D; ++d) CHECK(std::abs(model.theta.row(d).sum() - 1.0) < 1e-9);
    CHECK(model.alpha == 50.0 / K);  // negative config alpha selects the default
}

TEST_CASE("training is deterministic in the seed") {
    SparseCountMatrix corpus = random_corpus(15, 10, 12, 3);
    auto vocab = numbered_vocab("w", 10);
    lda::TrainConfig cfg;
    cfg.topics = 4;
    cfg.iterations = 40;
    cfg.seed = 5;
    lda::TopicModel a = lda::train(corpus, vocab, cfg);
    lda::TopicModel b = lda::train(corpus, vocab, cfg);
    CHECK(testutil::bit_equal(a.phi, b.phi));
    CHECK(testutil::bit_equal(a.theta, b.theta));
    cfg.seed = 6;
    lda::TopicModel c = lda::train(corpus, vocab, cfg);
    CHECK(!testutil::bit_equal(a.phi, c.phi));
}

TEST_CASE("relabeling the vocabulary permutes phi columns exactly") {
    const int D = 12, V = 8;
    SparseCountMatrix corpus = random_corpus(D, V, 10, 9);
    auto vocab = numbered_vocab("w", V);
    lda::TrainConfig cfg;
    cfg.topics = 3;
    cfg.iterations = 25;
    cfg.seed = 44;
    lda::TopicModel base = lda::train(corpus, vocab, cfg);

    // Send word w to perm[w]; per-row entry order is preserved, so the sampler
    // visits the same token stream and draws identical assignments.
    std::vector<int> perm(V);
    for (int w = 0; w < V; ++w) perm[static_cast<std::size_t>(w)] = (w + 3) % V;
    SparseCountMatrix permuted(D, V);
    for (int d = 0; d < D; ++d)
        for (const auto& [w, c] : corpus.row(d)) permuted.add(d, perm[static_cast<std::size_t>(w)], c);
    std::vector<std::string> permuted_vocab(static_cast<std::size_t>(V));
    for (int w = 0; w < V; ++w)
        permuted_vocab[static_cast<std::size_t>(perm[static_cast<std::size_t>(w)])] =
            vocab[static_cast<std::size_t>(w)];

    lda::TopicModel moved = lda::train(permuted, permuted_vocab, cfg);
    CHECK(testutil::bit_equal(moved.theta, base.theta));
    for (int k = 0; k < 3; ++k)
        for (int w = 0; w < V; ++w)
            CHECK(moved.phi(k, perm[static_cast<std::size_t>(w)]) == base.phi(k, w));
}

TEST_CASE("two planted topics with disjoint vocabularies are recovered") {
    const int V = 20, half = 10, docs = 100, len = 30;
    auto vocab = numbered_vocab("w", V);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        SparseCountMatrix corpus(docs, V);
        Rng rng(300 + seed);
        for (int d = 0; d < docs; ++d) {
            int base = (d % 2) * half;
            for (int t = 0; t < len; ++t)
                corpus.add(d, base + static_cast<int>(rng.uniform_int(half)), 1);
        }
        lda::TrainConfig cfg;
        cfg.topics = 2;
        cfg.iterations = 200;
        cfg.seed = seed;
        lda::TopicModel model = lda::train(corpus, vocab, cfg);

        Eigen::VectorXd ideal_a = Eigen::VectorXd::Zero(V), ideal_b = Eigen::VectorXd::Zero(V);
        ideal_a.head(half).setConstant(1.0 / half);
        ideal_b.tail(half).setConstant(1.0 / half);
        Eigen::VectorXd row0 = model.phi.row(0), row1 = model.phi.row(1);
        double direct = std::min(cosine(row0, ideal_a), cosine(row1, ideal_b));
        double crossed = std::min(cosine(row0, ideal_b), cosine(row1, ideal_a));
        if (std::max(direct, crossed) >= 0.9) ++hits;
    }
    CHECK(hits == 2);
}

TEST_CASE("top_words sorts by weight with ties broken by vocabulary order") {
    lda::TopicModel model;
    model.K = 2;
    model.alpha = 1.0;
    model.beta = 0.01;
    model.vocabulary = {"apple", "pear", "plum"};
    model.phi.resize(2, 3);
    model.phi << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2;

    auto top = lda::top_words(model, 0, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].first == "pear");
    CHECK(top[0].second == 0.5);
    CHECK(top[1].first == "plum");
    CHECK(top[2].first == "apple");

    auto tied = lda::top_words(model, 1, 2);
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].first == "apple");  // 0.4 tie resolves to the earlier word
    CHECK(tied[1].first == "pear");

    CHECK(lda::top_words(model, 0, 99).size() == 3);  // k clamps to the vocabulary
    CHECK_THROWS_AS(lda::top_words(model, 2, 1), std::invalid_argument);
}

TEST_CASE("fold-in flags all-oov documents and counts dropped tokens") {
    lda::TopicModel model;
    model.K = 2;
    model.alpha = 1.0;
    model.beta = 0.01;
    model.vocabulary = {"a", "b"};
    model.phi.resize(2, 2);
    model.phi << 0.9, 0.1, 0.1, 0.9;

    SparseCountMatrix docs(3, 3);
    docs.add(0, 0, 4);  // "a" x4
    docs.add(1, 2, 5);  // "zzz" x5, entirely out of vocabulary
    // doc 2 has no tokens at all
    lda::InferResult res = lda::infer(model, docs, {"a", "b", "zzz"}, 30, 11);
    CHECK(res.dropped_tokens == 5);
    CHECK(res.all_oov == std::vector<char>{0, 1, 1});
    for (int d = 0; d < 3; ++d) CHECK(std::abs(res.theta.row(d).sum() - 1.0) < 1e-9);
    CHECK(res.theta(1, 0) == 0.5);  // empty documents fall back to the uniform mixture
    CHECK(res.theta(2, 0) == 0.5);
    CHECK(res.theta(0, 0) > 0.7);  // "a"-heavy document leans to topic 0
}

TEST_CASE("perplexity is exactly 1 for a certain model and V for a uniform one") {
    lda::TopicModel certain;
    certain.K = 1;
    certain.alpha = 1.0;
    certain.beta = 0.01;
    certain.vocabulary = {"w"};
    certain.phi.resize(1, 1);
    certain.phi(0, 0) = 1.0;
    SparseCountMatrix heldout(2, 1);
    heldout.add(0, 0, 3);
    heldout.add(1, 0, 2);
    CHECK(lda::perplexity(certain, heldout, {"w"}, 10, 5) == 1.0);

    const int V = 4;
    lda::TopicModel uniform;
    uniform.K = 1;
    uniform.alpha = 1.0;
    uniform.beta = 0.01;
    uniform.vocabulary = numbered_vocab("w", V);
    uniform.phi = Eigen::MatrixXd::Constant(1, V, 1.0 / V);
    SparseCountMatrix docs(1, V);
    for (int w = 0; w < V; ++w) docs.add(0, w, w + 1);
    CHECK(lda::perplexity(uniform, docs, uniform.vocabulary, 10, 5) ==
          doctest::Approx(static_cast<double>(V)).epsilon(1e-12));

    SparseCountMatrix oov(1, 1);
    oov.add(0, 0, 2);
    CHECK_THROWS_AS(lda::perplexity(uniform, oov, {"unseen"}, 10, 5), std::invalid_argument);
}

TEST_CASE("model json round-trips every field bit-exactly") {
    testutil::TempDir tmp;
    SparseCountMatrix corpus = random_corpus(10, 6, 8, 2);
    lda::TrainConfig cfg;
    cfg.topics = 3;
    cfg.alpha = 0.7;
    cfg.beta = 0.02;
    cfg.iterations = 20;
    cfg.seed = 99;
    lda::TopicModel model = lda::train(corpus, numbered_vocab("w", 6), cfg);
    lda::save_json(model, tmp.path / "model.json");
    lda::TopicModel back = lda::load_json(tmp.path / "model.json");
    CHECK(back.K == model.K);
    CHECK(back.alpha == model.alpha);
    CHECK(back.beta == model.beta);
    CHECK(back.seed == model.seed);
    CHECK(back.vocabulary == model.vocabulary);
    CHECK(testutil::bit_equal(back.phi, model.phi));
}

TEST_CASE("train rejects impossible configurations") {
    SparseCountMatrix corpus = random_corpus(4, 5, 3, 1);
    auto vocab = numbered_vocab("w", 5);
    lda::TrainConfig cfg;
    cfg.topics = 0;
    CHECK_THROWS_AS(lda::train(corpus, vocab, cfg), std::invalid_argument);
    cfg.topics = 2;
    CHECK_THROWS_AS(lda::train(corpus, numbered_vocab("w", 4), cfg), std::invalid_argument);
    SparseCountMatrix empty(3, 5);
    CHECK_THROWS_AS(lda::train(empty, vocab, cfg), std::invalid_argument);
    cfg.topics = 999;  // more topics than tokens
    CHECK_THROWS_AS(lda::train(corpus, vocab, cfg), std::invalid_argument);
}
