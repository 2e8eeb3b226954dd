#include "lifestyles/cmf.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "lifestyles/io.hpp"
#include "lifestyles/rng.hpp"

namespace lifestyles::cmf {

namespace {

std::vector<int> checked_mask(const RowMask& mask, int n) {
    std::vector<int> rows = mask.observed;
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    if (!rows.empty() && (rows.front() < 0 || rows.back() >= n))
        throw std::invalid_argument("mask: observed row index out of range");
    return rows;
}

void check_shapes(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const CmfModel& model) {
    if (S.rows() != M.rows())
        throw std::invalid_argument("cmf: S has " + std::to_string(S.rows()) + " rows but M has " +
                                    std::to_string(M.rows()));
    if (model.U.rows() != S.rows() || model.Vs.rows() != S.cols() || model.Vm.rows() != M.cols() ||
        model.Vs.cols() != model.U.cols() || model.Vm.cols() != model.U.cols())
        throw std::invalid_argument("cmf: factor shapes do not match the data");
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& A, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), A.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
    return out;
}

double group_penalty(const Eigen::MatrixXd& V, double gamma) {
    if (gamma == 0.0) return 0.0;
    double total = 0.0;
    for (Eigen::Index k = 0; k < V.cols(); ++k) total += V.col(k).norm();
    return gamma * total;
}

// One proximal gradient pass on a loading block V minimizing
//   f(V) = tr(V G V^T) - 2 tr(H^T V) + lambda ||V||_F^2   (+ const)
//   g(V) = gamma sum_k ||V col k||
// where G = X^T X over the rows seen by this view and H = D^T X for data block D.
// Backtracking halves the step until the quadratic upper bound holds, which keeps the
// full objective non-increasing.
void prox_descend(Eigen::MatrixXd& V, const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                  double lambda, double gamma, double& step, int passes) {
    if (V.rows() == 0) return;
    auto smooth = [&](const Eigen::MatrixXd& X) {
        return (X * G).cwiseProduct(X).sum() - 2.0 * H.cwiseProduct(X).sum() +
               lambda * X.squaredNorm();
    };
    for (int pass = 0; pass < passes; ++pass) {
        const double f0 = smooth(V);
        Eigen::MatrixXd grad = 2.0 * (V * G - H + lambda * V);
        step = std::min(step * 2.0, 1e12);  // allow recovery after conservative halving
        for (int halving = 0; halving < 200; ++halving) {
            Eigen::MatrixXd cand = V - step * grad;
            if (gamma > 0.0) {
                for (Eigen::Index k = 0; k < cand.cols(); ++k) {
                    const double norm = cand.col(k).norm();
                    const double scale = norm <= step * gamma ? 0.0 : 1.0 - step * gamma / norm;
                    cand.col(k) *= scale;
                }
            }
            const Eigen::MatrixXd delta = cand - V;
            const double bound =
                f0 + grad.cwiseProduct(delta).sum() + delta.squaredNorm() / (2.0 * step);
            if (smooth(cand) <= bound + 1e-12 * (1.0 + std::abs(bound))) {
                V = cand;
                break;
            }
            step *= 0.5;
        }
    }
}

}  // namespace

double smooth_objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
                        const CmfModel& model, const CmfConfig& config) {
    check_shapes(S, M, model);
    const std::vector<int> obs = checked_mask(mask, static_cast<int>(S.rows()));
    double value = 0.0;
    for (int i : obs) value += (S.row(i) - model.U.row(i) * model.Vs.transpose()).squaredNorm();
    value += (M - model.U * model.Vm.transpose()).squaredNorm();
    value += config.lambda_u * model.U.squaredNorm();
    value += config.lambda_s * model.Vs.squaredNorm();
    value += config.lambda_m * model.Vm.squaredNorm();
    return value;
}

double objective(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
                 const CmfModel& model, const CmfConfig& config) {
    return smooth_objective(S, M, mask, model, config) + group_penalty(model.Vs, config.gamma_s) +
           group_penalty(model.Vm, config.gamma_m);
}

SmoothGradients smooth_gradients(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M,
                                 const RowMask& mask, const CmfModel& model,
                                 const CmfConfig& config) {
    check_shapes(S, M, model);
    const std::vector<int> obs = checked_mask(mask, static_cast<int>(S.rows()));
    SmoothGradients g;
    Eigen::MatrixXd S_resid = Eigen::MatrixXd::Zero(S.rows(), S.cols());
    for (int i : obs) S_resid.row(i) = model.U.row(i) * model.Vs.transpose() - S.row(i);
    const Eigen::MatrixXd M_resid = model.U * model.Vm.transpose() - M;
    g.dU = 2.0 * (S_resid * model.Vs + M_resid * model.Vm + config.lambda_u * model.U);
    g.dVs = 2.0 * (S_resid.transpose() * model.U + config.lambda_s * model.Vs);
    g.dVm = 2.0 * (M_resid.transpose() * model.U + config.lambda_m * model.Vm);
    return g;
}

CmfModel fit(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, const RowMask& mask,
             const CmfConfig& config) {
    const int n = static_cast<int>(S.rows());
    const int K = static_cast<int>(S.cols());
    const int d = static_cast<int>(M.cols());
    const int r = config.rank;
    if (r < 1) throw std::invalid_argument("cmf::fit: rank must be >= 1");
    if (config.tol <= 0) throw std::invalid_argument("cmf::fit: tol must be > 0");
    if (config.lambda_u < 0 || config.lambda_s < 0 || config.lambda_m < 0 ||
        config.gamma_s < 0 || config.gamma_m < 0)
        throw std::invalid_argument("cmf::fit: penalty weights must be >= 0");
    if (S.rows() != M.rows())
        throw std::invalid_argument("cmf::fit: S and M row counts differ");
    const std::vector<int> obs = checked_mask(mask, n);
    if (obs.empty()) throw std::invalid_argument("cmf::fit: empty mask");

    CmfModel model;
    const double scale = 1.0 / std::sqrt(static_cast<double>(r));
    Rng rng(config.seed);
    auto init = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd X(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) X(i, j) = rng.uniform(-1.0, 1.0) * scale;
        return X;
    };
    model.U = init(n, r);
    model.Vs = init(K, r);
    model.Vm = init(d, r);

    std::vector<char> is_obs(static_cast<std::size_t>(n), 0);
    for (int i : obs) is_obs[static_cast<std::size_t>(i)] = 1;

    double prev = objective(S, M, mask, model, config);
    model.objective_history.push_back(prev);
    if (!std::isfinite(prev)) throw std::runtime_error("cmf::fit: non-finite objective");

    constexpr int kProxPasses = 5;
    double step_s = 1.0, step_m = 1.0;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(r, r);

    for (int iter = 0; iter < config.max_iter; ++iter) {
        // U rows: exact ridge solve; observed rows see both views, the rest only M.
        {
            const Eigen::MatrixXd A_obs =
                model.Vs.transpose() * model.Vs + model.Vm.transpose() * model.Vm +
                config.lambda_u * I;
            const Eigen::MatrixXd A_un = model.Vm.transpose() * model.Vm + config.lambda_u * I;
            Eigen::LDLT<Eigen::MatrixXd> ldlt_obs(A_obs), ldlt_un(A_un);
            const Eigen::MatrixXd MV = M * model.Vm;
            for (int i = 0; i < n; ++i) {
                if (is_obs[static_cast<std::size_t>(i)]) {
                    Eigen::VectorXd b = model.Vs.transpose() * S.row(i).transpose() +
                                        MV.row(i).transpose();
                    model.U.row(i) = ldlt_obs.solve(b).transpose();
                } else {
                    model.U.row(i) = ldlt_un.solve(MV.row(i).transpose()).transpose();
                }
            }
        }

        // Vs block sees only the observed rows of S.
        {
            const Eigen::MatrixXd U_obs = take_rows(model.U, obs);
            const Eigen::MatrixXd S_obs = take_rows(S, obs);
            const Eigen::MatrixXd G = U_obs.transpose() * U_obs;
            const Eigen::MatrixXd H = S_obs.transpose() * U_obs;
            prox_descend(model.Vs, G, H, config.lambda_s, config.gamma_s, step_s, kProxPasses);
        }

        // Vm block sees every row.
        {
            const Eigen::MatrixXd G = model.U.transpose() * model.U;
            const Eigen::MatrixXd H = M.transpose() * model.U;
            prox_descend(model.Vm, G, H, config.lambda_m, config.gamma_m, step_m, kProxPasses);
        }

        const double cur = objective(S, M, mask, model, config);
        if (!std::isfinite(cur)) throw std::runtime_error("cmf::fit: non-finite objective");
        model.objective_history.push_back(cur);
        const double rel = (prev - cur) / std::max(std::abs(prev), 1e-300);
        prev = cur;
        if (rel < config.tol) break;
    }
    return model;
}

Eigen::MatrixXd predict_shopping(const CmfModel& model, const Eigen::MatrixXd& M_rows,
                                 const CmfConfig& config) {
    if (M_rows.cols() != model.Vm.rows())
        throw std::invalid_argument("predict_shopping: M rows have " +
                                    std::to_string(M_rows.cols()) + " columns but Vm has " +
                                    std::to_string(model.Vm.rows()) + " rows");
    const int r = static_cast<int>(model.U.cols());
    const double ridge = std::max(config.lambda_u, 1e-8);
    const Eigen::MatrixXd A = model.Vm.transpose() * model.Vm +
                              ridge * Eigen::MatrixXd::Identity(r, r);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    Eigen::MatrixXd U_new = ldlt.solve(model.Vm.transpose() * M_rows.transpose()).transpose();
    Eigen::MatrixXd pred = U_new * model.Vs.transpose();
    if (config.clamp_predictions) pred = pred.cwiseMax(0.0).cwiseMin(1.0);
    return pred;
}

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        throw std::invalid_argument("rmse: shape mismatch");
    if (truth.size() == 0) throw std::invalid_argument("rmse: zero entries");
    return std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
}

Eigen::VectorXd group_norms(const Eigen::MatrixXd& V) {
    Eigen::VectorXd norms(V.cols());
    for (Eigen::Index k = 0; k < V.cols(); ++k) norms(k) = V.col(k).norm();
    return norms;
}

CvResult cross_validate(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M, CmfConfig config,
                        std::vector<int> rank_grid, int folds, std::uint64_t seed) {
    const int n = static_cast<int>(S.rows());
    if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
    if (n < folds) throw std::invalid_argument("cross_validate: fewer users than folds");
    if (rank_grid.empty())
        for (int r = 2; r <= 10; ++r) rank_grid.push_back(r);
    std::sort(rank_grid.begin(), rank_grid.end());

    const std::vector<std::vector<int>> fold_rows = make_folds(n, folds, seed);
    for (const auto& fold : fold_rows)
        if (fold.empty()) throw std::invalid_argument("cross_validate: fold with zero users");

    CvResult out;
    out.ranks = rank_grid;
    for (int rank : rank_grid) {
        config.rank = rank;
        double total_sq = 0.0;
        long long total_entries = 0;
        for (int f = 0; f < folds; ++f) {
            std::vector<char> held(static_cast<std::size_t>(n), 0);
            for (int i : fold_rows[static_cast<std::size_t>(f)]) held[static_cast<std::size_t>(i)] = 1;
            RowMask mask;
            for (int i = 0; i < n; ++i)
                if (!held[static_cast<std::size_t>(i)]) mask.observed.push_back(i);

            CmfConfig fold_cfg = config;
            fold_cfg.seed = derive_seed(seed, "cmf/rank=" + std::to_string(rank) +
                                                  "/fold=" + std::to_string(f));
            CmfModel model = fit(S, M, mask, fold_cfg);
            const Eigen::MatrixXd M_held = take_rows(M, fold_rows[static_cast<std::size_t>(f)]);
            const Eigen::MatrixXd S_held = take_rows(S, fold_rows[static_cast<std::size_t>(f)]);
            const Eigen::MatrixXd pred = predict_shopping(model, M_held, fold_cfg);
            const double fold_rmse = rmse(S_held, pred);
            out.table.push_back({f, rank, fold_rmse});
            total_sq += fold_rmse * fold_rmse * static_cast<double>(S_held.size());
            total_entries += S_held.size();
        }
        out.mean_rmse.push_back(std::sqrt(total_sq / static_cast<double>(total_entries)));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.mean_rmse.size(); ++i)
        if (out.mean_rmse[i] < out.mean_rmse[best]) best = i;
    out.selected_rank = out.ranks[best];
    return out;
}

CompareViewsResult compare_views(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M,
                                 const CmfConfig& config, int folds, std::uint64_t seed) {
    const int n = static_cast<int>(S.rows());
    if (folds < 2) throw std::invalid_argument("compare_views: folds must be >= 2");
    if (n < folds) throw std::invalid_argument("compare_views: fewer users than folds");
    const std::vector<std::vector<int>> fold_rows = make_folds(n, folds, seed);

    Eigen::MatrixXd pred_joint(n, S.cols());
    Eigen::MatrixXd pred_only(n, S.cols());
    for (int f = 0; f < folds; ++f) {
        const auto& held_rows = fold_rows[static_cast<std::size_t>(f)];
        std::vector<char> held(static_cast<std::size_t>(n), 0);
        for (int i : held_rows) held[static_cast<std::size_t>(i)] = 1;
        RowMask mask;
        for (int i = 0; i < n; ++i)
            if (!held[static_cast<std::size_t>(i)]) mask.observed.push_back(i);

        CmfConfig fold_cfg = config;
        fold_cfg.seed = derive_seed(seed, "compare/fold=" + std::to_string(f));
        CmfModel model = fit(S, M, mask, fold_cfg);
        const Eigen::MatrixXd pred = predict_shopping(model, take_rows(M, held_rows), fold_cfg);
        for (std::size_t i = 0; i < held_rows.size(); ++i)
            pred_joint.row(held_rows[i]) = pred.row(static_cast<Eigen::Index>(i));

        // With rows fully missing and no side information, the shopping-only arm can do no
        // better than row-independent statistics: predict the observed column means.
        Eigen::RowVectorXd col_mean = Eigen::RowVectorXd::Zero(S.cols());
        for (int i : mask.observed) col_mean += S.row(i);
        col_mean /= static_cast<double>(mask.observed.size());
        for (int i : held_rows) pred_only.row(i) = col_mean;
    }

    CompareViewsResult out;
    out.rmse_joint = rmse(S, pred_joint);
    out.rmse_shopping_only = rmse(S, pred_only);
    out.relative_change = (out.rmse_shopping_only - out.rmse_joint) / out.rmse_shopping_only;
    return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, Eigen::Index cols_hint) {
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    Eigen::Index c = cols_hint;
    if (r > 0) c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    return m;
}

}  // namespace

void save_json(const CmfModel& model, const CmfConfig& config, const std::filesystem::path& path) {
    nlohmann::json j;
    j["U"] = matrix_to_json(model.U);
    j["Vs"] = matrix_to_json(model.Vs);
    j["Vm"] = matrix_to_json(model.Vm);
    j["objective_history"] = model.objective_history;
    j["config"] = {{"rank", config.rank},       {"lambda_u", config.lambda_u},
                   {"lambda_s", config.lambda_s}, {"lambda_m", config.lambda_m},
                   {"gamma_s", config.gamma_s},   {"gamma_m", config.gamma_m},
                   {"tol", config.tol},           {"max_iter", config.max_iter},
                   {"seed", config.seed},         {"clamp_predictions", config.clamp_predictions}};
    io::write_text_file(path, j.dump(2) + "\n");
}

LoadedModel load_json(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_text_file(path));
    LoadedModel out;
    const auto& c = j.at("config");
    out.config.rank = c.at("rank").get<int>();
    out.config.lambda_u = c.at("lambda_u").get<double>();
    out.config.lambda_s = c.at("lambda_s").get<double>();
    out.config.lambda_m = c.at("lambda_m").get<double>();
    out.config.gamma_s = c.at("gamma_s").get<double>();
    out.config.gamma_m = c.at("gamma_m").get<double>();
    out.config.tol = c.at("tol").get<double>();
    out.config.max_iter = c.at("max_iter").get<int>();
    out.config.seed = c.at("seed").get<std::uint64_t>();
    out.config.clamp_predictions = c.value("clamp_predictions", false);
    out.model.U = matrix_from_json(j.at("U"), out.config.rank);
    out.model.Vs = matrix_from_json(j.at("Vs"), out.config.rank);
    out.model.Vm = matrix_from_json(j.at("Vm"), out.config.rank);
    out.model.objective_history = j.at("objective_history").get<std::vector<double>>();
    return out;
}

}  // namespace lifestyles::cmf
