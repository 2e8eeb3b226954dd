#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lifestyles::baselines {

// L1-penalized least squares fitted by cyclic coordinate descent on internally
// centered data:
//   (1/2N) ||y - b0 - X beta||^2 + lambda ||beta||_1
// The intercept is unpenalized. objective_history holds the penalized objective
// after each full coordinate sweep.
struct LassoFit {
    double intercept = 0.0;
    Eigen::VectorXd beta;
    std::vector<double> objective_history;
};

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                   double tol = 1e-12, int max_sweeps = 10000);

struct LassoReportRow {
    double lambda = 0.0;
    double r2_train = 0.0;  // mean over folds, each split scored against its own mean
    double r2_test = 0.0;
    int nnz = 0;  // nonzero coefficients of the full-data fit
};

// Cross-validated lasso over a lambda grid. Features are standardized (mean 0,
// variance 1) on each training split; the same transform is applied to the
// held-out split.
std::vector<LassoReportRow> lasso_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const std::vector<double>& lambda_grid, int folds,
                                             std::uint64_t seed);

// Index of the highest-weighted behavior; ties resolve to the smallest index.
int primary_behavior(const Eigen::RowVectorXd& theta_row);

struct ClassifyConfig {
    int folds = 10;
    double ridge = 1e-3;
    int max_iter = 300;
    std::uint64_t seed = 0;
};

struct ClassifyResult {
    std::vector<double> majority_accuracy;  // per fold
    std::vector<double> logistic_accuracy;  // per fold; meaningful only where not skipped
    std::vector<bool> logistic_skipped;     // true when the training fold held a single class
    double majority_pooled_accuracy = 0.0;  // pooled over all held-out rows
    double logistic_pooled_accuracy = 0.0;  // pooled over rows of non-skipped folds
    double majority_frequency = 0.0;        // modal-class frequency over the full label set
};

// Majority-class and ridge-penalized multinomial logistic baselines, evaluated
// by seeded row folds. Features are standardized per training split.
ClassifyResult classify_primary(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                const ClassifyConfig& config);

}  // namespace lifestyles::baselines
