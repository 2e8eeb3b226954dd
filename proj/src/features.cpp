#include "lifestyles/features.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lifestyles::features {

TfidfResult tfidf(const SparseCountMatrix& W) {
    const int n = W.rows();
    const int p = W.cols();
    if (n == 0) throw std::invalid_argument("tfidf: no users");

    std::vector<long long> df(static_cast<std::size_t>(p), 0);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, c] : W.row(i))
            if (c > 0) df[static_cast<std::size_t>(j)]++;

    TfidfResult out;
    std::vector<int> col_pos(static_cast<std::size_t>(p), -1);
    for (int j = 0; j < p; ++j) {
        if (df[static_cast<std::size_t>(j)] == 0) continue;
        col_pos[static_cast<std::size_t>(j)] = static_cast<int>(out.kept_columns.size());
        out.kept_columns.push_back(j);
    }

    out.weights = Eigen::MatrixXd::Zero(n, static_cast<int>(out.kept_columns.size()));
    for (int i = 0; i < n; ++i) {
        for (const auto& [j, c] : W.row(i)) {
            if (c == 0) continue;
            const double idf =
                std::log(static_cast<double>(n) / static_cast<double>(df[static_cast<std::size_t>(j)]));
            out.weights(i, col_pos[static_cast<std::size_t>(j)]) = static_cast<double>(c) * idf;
        }
    }
    return out;
}

Eigen::MatrixXd mobility_matrix(const Eigen::MatrixXd& W_weighted, const Eigen::MatrixXd& C) {
    if (W_weighted.cols() != C.rows())
        throw std::invalid_argument(
            "mobility_matrix: weighted visits are " + std::to_string(W_weighted.rows()) + "x" +
            std::to_string(W_weighted.cols()) + " but tower classes are " +
            std::to_string(C.rows()) + "x" + std::to_string(C.cols()));
    return W_weighted * C;
}

}  // namespace lifestyles::features
