#include "lifestyles/lda.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "lifestyles/io.hpp"
#include "lifestyles/rng.hpp"

namespace lifestyles::lda {

namespace {

struct Token {
    int doc;
    int word;
};

std::vector<Token> expand_tokens(const SparseCountMatrix& corpus) {
    std::vector<Token> tokens;
    for (int d = 0; d < corpus.rows(); ++d)
        for (const auto& [w, c] : corpus.row(d))
            for (long long i = 0; i < c; ++i) tokens.push_back({d, w});
    return tokens;
}

}  // namespace

TopicModel train(const SparseCountMatrix& corpus, const std::vector<std::string>& vocabulary,
                 const TrainConfig& config, const SweepObserver& observer) {
    const int K = config.topics;
    const int D = corpus.rows();
    const int V = corpus.cols();
    if (K < 1) throw std::invalid_argument("lda::train: K must be >= 1");
    if (static_cast<int>(vocabulary.size()) != V)
        throw std::invalid_argument("lda::train: vocabulary size does not match corpus columns");
    if (config.iterations < 0) throw std::invalid_argument("lda::train: negative iterations");

    std::vector<Token> tokens = expand_tokens(corpus);
    if (tokens.empty()) throw std::invalid_argument("lda::train: empty corpus");
    if (static_cast<long long>(K) > static_cast<long long>(tokens.size()))
        throw std::invalid_argument("lda::train: K exceeds total token count");

    const double alpha = config.alpha < 0 ? 50.0 / K : config.alpha;
    const double beta = config.beta;

    std::vector<std::vector<long long>> n_kw(static_cast<std::size_t>(K),
                                             std::vector<long long>(static_cast<std::size_t>(V), 0));
    std::vector<long long> n_k(static_cast<std::size_t>(K), 0);
    std::vector<std::vector<long long>> n_dk(static_cast<std::size_t>(D),
                                             std::vector<long long>(static_cast<std::size_t>(K), 0));
    std::vector<long long> n_d(static_cast<std::size_t>(D), 0);
    std::vector<int> z(tokens.size());

    Rng rng(config.seed);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        int k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K)));
        z[t] = k;
        n_kw[k][tokens[t].word]++;
        n_k[k]++;
        n_dk[tokens[t].doc][k]++;
        n_d[tokens[t].doc]++;
    }

    std::vector<double> p(static_cast<std::size_t>(K));
    for (int sweep = 0; sweep < config.iterations; ++sweep) {
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const int d = tokens[t].doc, w = tokens[t].word;
            int k = z[t];
            n_kw[k][w]--; n_k[k]--; n_dk[d][k]--; n_d[d]--;
            for (int j = 0; j < K; ++j)
                p[j] = (n_dk[d][j] + alpha) * (n_kw[j][w] + beta) / (n_k[j] + V * beta);
            k = static_cast<int>(rng.categorical(p));
            z[t] = k;
            n_kw[k][w]++; n_k[k]++; n_dk[d][k]++; n_d[d]++;
        }
        if (observer) {
            GibbsState state{&n_kw, &n_k, &n_dk, &n_d};
            observer(sweep, state);
        }
    }

    TopicModel model;
    model.K = K;
    model.alpha = alpha;
    model.beta = beta;
    model.vocabulary = vocabulary;
    model.seed = config.seed;
    model.phi.resize(K, V);
    for (int k = 0; k < K; ++k)
        for (int w = 0; w < V; ++w)
            model.phi(k, w) = (n_kw[k][w] + beta) / (n_k[k] + V * beta);
    model.theta.resize(D, K);
    for (int d = 0; d < D; ++d)
        for (int k = 0; k < K; ++k)
            model.theta(d, k) = (n_dk[d][k] + alpha) / (n_d[d] + K * alpha);
    return model;
}

InferResult infer(const TopicModel& model, const SparseCountMatrix& docs,
                  const std::vector<std::string>& doc_vocabulary, int iterations,
                  std::uint64_t seed) {
    const int K = model.K;
    const int D = docs.rows();
    if (static_cast<int>(doc_vocabulary.size()) != docs.cols())
        throw std::invalid_argument("lda::infer: vocabulary size does not match docs columns");

    std::unordered_map<std::string, int> model_vocab;
    for (int w = 0; w < static_cast<int>(model.vocabulary.size()); ++w)
        model_vocab.emplace(model.vocabulary[static_cast<std::size_t>(w)], w);

    InferResult out;
    out.all_oov.assign(static_cast<std::size_t>(D), 0);

    // Map document tokens to model word ids, dropping out-of-vocabulary occurrences.
    std::vector<Token> tokens;
    for (int d = 0; d < D; ++d) {
        for (const auto& [w, c] : docs.row(d)) {
            auto it = model_vocab.find(doc_vocabulary[static_cast<std::size_t>(w)]);
            if (it == model_vocab.end()) {
                out.dropped_tokens += c;
                continue;
            }
            for (long long i = 0; i < c; ++i) tokens.push_back({d, it->second});
        }
    }

    std::vector<std::vector<long long>> n_dk(static_cast<std::size_t>(D),
                                             std::vector<long long>(static_cast<std::size_t>(K), 0));
    std::vector<long long> n_d(static_cast<std::size_t>(D), 0);
    std::vector<int> z(tokens.size());

    Rng rng(seed);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        int k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(K)));
        z[t] = k;
        n_dk[tokens[t].doc][k]++;
        n_d[tokens[t].doc]++;
    }

    std::vector<double> p(static_cast<std::size_t>(K));
    for (int sweep = 0; sweep < iterations; ++sweep) {
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const int d = tokens[t].doc, w = tokens[t].word;
            int k = z[t];
            n_dk[d][k]--; n_d[d]--;
            for (int j = 0; j < K; ++j) p[j] = (n_dk[d][j] + model.alpha) * model.phi(j, w);
            k = static_cast<int>(rng.categorical(p));
            z[t] = k;
            n_dk[d][k]++; n_d[d]++;
        }
    }

    out.theta.resize(D, K);
    for (int d = 0; d < D; ++d) {
        if (n_d[d] == 0) out.all_oov[static_cast<std::size_t>(d)] = 1;
        for (int k = 0; k < K; ++k)
            out.theta(d, k) = (n_dk[d][k] + model.alpha) / (n_d[d] + K * model.alpha);
    }
    return out;
}

std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, int topic, int k) {
    if (topic < 0 || topic >= model.K) throw std::invalid_argument("top_words: topic out of range");
    const int V = static_cast<int>(model.vocabulary.size());
    std::vector<int> order(static_cast<std::size_t>(V));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (model.phi(topic, a) != model.phi(topic, b)) return model.phi(topic, a) > model.phi(topic, b);
        return a < b;  // ties by vocabulary order
    });
    int n = std::min(k, V);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.emplace_back(model.vocabulary[static_cast<std::size_t>(order[i])],
                         model.phi(topic, order[i]));
    return out;
}

double perplexity(const TopicModel& model, const SparseCountMatrix& heldout,
                  const std::vector<std::string>& heldout_vocabulary, int infer_iterations,
                  std::uint64_t seed) {
    InferResult inf = infer(model, heldout, heldout_vocabulary, infer_iterations, seed);

    std::unordered_map<std::string, int> model_vocab;
    for (int w = 0; w < static_cast<int>(model.vocabulary.size()); ++w)
        model_vocab.emplace(model.vocabulary[static_cast<std::size_t>(w)], w);

    double log_lik = 0.0;
    long long token_count = 0;
    for (int d = 0; d < heldout.rows(); ++d) {
        for (const auto& [w, c] : heldout.row(d)) {
            auto it = model_vocab.find(heldout_vocabulary[static_cast<std::size_t>(w)]);
            if (it == model_vocab.end()) continue;
            double pw = 0.0;
            for (int k = 0; k < model.K; ++k) pw += inf.theta(d, k) * model.phi(k, it->second);
            log_lik += c * std::log(pw);
            token_count += c;
        }
    }
    if (token_count == 0) throw std::invalid_argument("perplexity: empty heldout after OOV drop");
    return std::exp(-log_lik / static_cast<double>(token_count));
}

void save_json(const TopicModel& model, const std::filesystem::path& path) {
    nlohmann::json j;
    j["K"] = model.K;
    j["alpha"] = model.alpha;
    j["beta"] = model.beta;
    j["vocabulary"] = model.vocabulary;
    j["seed"] = model.seed;
    std::vector<std::vector<double>> phi(static_cast<std::size_t>(model.K));
    for (int k = 0; k < model.K; ++k) {
        phi[k].resize(static_cast<std::size_t>(model.phi.cols()));
        for (int w = 0; w < model.phi.cols(); ++w) phi[k][w] = model.phi(k, w);
    }
    j["phi"] = phi;
    io::write_text_file(path, j.dump(2) + "\n");
}

TopicModel load_json(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_text_file(path));
    TopicModel model;
    model.K = j.at("K").get<int>();
    model.alpha = j.at("alpha").get<double>();
    model.beta = j.at("beta").get<double>();
    model.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    model.seed = j.at("seed").get<std::uint64_t>();
    auto phi = j.at("phi").get<std::vector<std::vector<double>>>();
    model.phi.resize(model.K, static_cast<int>(model.vocabulary.size()));
    for (int k = 0; k < model.K; ++k)
        for (int w = 0; w < model.phi.cols(); ++w) model.phi(k, w) = phi[k][w];
    return model;
}

}  // namespace lifestyles::lda
