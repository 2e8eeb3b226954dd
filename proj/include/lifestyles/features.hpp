#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lifestyles/sparse.hpp"

namespace lifestyles::features {

struct TfidfResult {
    Eigen::MatrixXd weights;        // users x kept towers
    std::vector<int> kept_columns;  // original column index of each kept column
};

// weight_ij = w_ij * ln(n / df_j) with df_j = number of users visiting tower j;
// towers nobody visits are dropped and recorded in kept_columns.
TfidfResult tfidf(const SparseCountMatrix& W);

Eigen::MatrixXd mobility_matrix(const Eigen::MatrixXd& W_weighted, const Eigen::MatrixXd& C);

}  // namespace lifestyles::features
