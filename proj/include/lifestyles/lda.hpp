#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lifestyles/sparse.hpp"

namespace lifestyles::lda {

struct TopicModel {
    int K = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<std::string> vocabulary;
    Eigen::MatrixXd phi;    // K x V, row-stochastic
    Eigen::MatrixXd theta;  // D x K, row-stochastic (training documents)
    std::uint64_t seed = 0;
};

struct TrainConfig {
    int topics = 5;
    double alpha = -1.0;  // < 0 selects the 50/K default
    double beta = 0.01;
    int iterations = 1000;
    std::uint64_t seed = 0;
};

// Count state exposed to per-sweep observers (token conservation and simplex checks).
struct GibbsState {
    const std::vector<std::vector<long long>>* topic_word;  // K x V
    const std::vector<long long>* topic_total;              // K
    const std::vector<std::vector<long long>>* doc_topic;   // D x K
    const std::vector<long long>* doc_total;                // D
};

using SweepObserver = std::function<void(int sweep, const GibbsState&)>;

// Collapsed Gibbs sampling; deterministic given seed. Tokens are visited in document
// order, within a document in the corpus row's stored entry order.
TopicModel train(const SparseCountMatrix& corpus, const std::vector<std::string>& vocabulary,
                 const TrainConfig& config, const SweepObserver& observer = nullptr);

struct InferResult {
    Eigen::MatrixXd theta;        // docs x K
    std::vector<char> all_oov;    // flagged documents (zero usable tokens)
    long long dropped_tokens = 0; // out-of-vocabulary occurrences dropped
};

// Fold-in: phi held fixed, only the new documents' assignments are resampled.
InferResult infer(const TopicModel& model, const SparseCountMatrix& docs,
                  const std::vector<std::string>& doc_vocabulary, int iterations,
                  std::uint64_t seed);

// k highest-phi words, descending, ties broken by vocabulary order.
std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, int topic, int k);

// exp(-sum log p(token) / token count) with theta obtained by fold-in.
double perplexity(const TopicModel& model, const SparseCountMatrix& heldout,
                  const std::vector<std::string>& heldout_vocabulary, int infer_iterations,
                  std::uint64_t seed);

void save_json(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_json(const std::filesystem::path& path);

}  // namespace lifestyles::lda
