#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace lifestyles::cmf {

struct CmfConfig {
    int rank = 5;
    double lambda_u = 1e-3;  // ridge on the shared user factor
    double lambda_s = 1e-3;  // ridge on the shopping loadings
    double lambda_m = 1e-3;  // ridge on the mobility loadings
    double gamma_s = 0.0;    // column-group penalty weights
    double gamma_m = 0.0;
    double tol = 1e-6;  // relative objective change
    int max_iter = 500;
    std::uint64_t seed = 0;
    bool clamp_predictions = false;  // clip predict_shopping output to [0, 1]
};

struct RowMask {
    std::vector<int> observed;  // row indices of S contributing to the loss
};

struct CmfModel {
    Eigen::MatrixXd U;   // n x r
    Eigen::MatrixXd Vs;  // K x r
    Eigen::MatrixXd Vm;  // d x r
    std::vector<double> objective_history;
};

// || P(S - U Vs^T) ||_F^2 + || M - U Vm^T ||_F^2
//   + lambda_u ||U||_F^2 + lambda_s ||Vs||_F^2 + lambda_m ||Vm||_F^2
//   + gamma_s sum_k ||Vs col k|| + gamma_m sum_k ||Vm col k||
// where P zeroes the unobserved rows of S.
double objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
                 const CmfModel& model, const CmfConfig& config);

// Smooth part of the objective (everything but the group penalties) with its analytic
// gradients, exposed for finite-difference verification.
double smooth_objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
                        const CmfModel& model, const CmfConfig& config);
struct SmoothGradients {
    Eigen::MatrixXd dU, dVs, dVm;
};
SmoothGradients smooth_gradients(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M,
                                 const RowMask& mask, const CmfModel& model,
                                 const CmfConfig& config);

// Block coordinate descent: exact ridge solves for the rows of U, proximal gradient with
// backtracking and column-group soft-thresholding for Vs and Vm. objective_history holds
// the initial value followed by one entry per outer iteration, non-increasing.
CmfModel fit(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
             const CmfConfig& config);

// Per unseen row m: u = argmin ||m - u Vm^T||^2 + lambda_u ||u||^2, prediction u Vs^T.
Eigen::MatrixXd predict_shopping(const CmfModel& model, const Eigen::MatrixXd& M_rows,
                                 const CmfConfig& config);

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

Eigen::VectorXd group_norms(const Eigen::MatrixXd& V);

struct CvCell {
    int fold;
    int rank;
    double rmse;
};

struct CvResult {
    std::vector<CvCell> table;      // fold-major within each rank
    std::vector<int> ranks;         // grid, ascending
    std::vector<double> mean_rmse;  // aligned with ranks
    int selected_rank = 0;          // lowest mean RMSE, ties to the smaller rank
};

// Masked-row cross-validation over a rank grid; an empty grid means {2..10}.
CvResult cross_validate(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, CmfConfig config,
                        std::vector<int> rank_grid, int folds, std::uint64_t seed);

struct CompareViewsResult {
    double rmse_joint = 0.0;
    double rmse_shopping_only = 0.0;  // held-out rows predicted by observed column means
    double relative_change = 0.0;     // (only - joint) / only
};

CompareViewsResult compare_views(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M,
                                 const CmfConfig& config, int folds, std::uint64_t seed);

void save_json(const CmfModel& model, const CmfConfig& config, const std::filesystem::path& path);
struct LoadedModel {
    CmfModel model;
    CmfConfig config;
};
LoadedModel load_json(const std::filesystem::path& path);

}  // namespace lifestyles::cmf
