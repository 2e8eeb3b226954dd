#include "lifestyles/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "lifestyles/rng.hpp"

namespace lifestyles::baselines {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;  // 1 for zero-variance columns, which standardize to all zeros

    static Standardizer fit(const Eigen::MatrixXd& X) {
        Standardizer s;
        s.mean = X.colwise().mean();
        Eigen::MatrixXd centered = X.rowwise() - s.mean;
        Eigen::RowVectorXd var = centered.array().square().colwise().mean();
        s.scale = var.array().sqrt();
        for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
            if (s.scale(j) == 0.0) s.scale(j) = 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean).array().rowwise() / scale.array();
    }
};

// R^2 against the split's own mean.
double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) {
    const double mean = y.mean();
    const double ss_tot = (y.array() - mean).square().sum();
    const double ss_res = (y - pred).squaredNorm();
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take_elems(const Eigen::VectorXd& y, const std::vector<int>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
    return out;
}

}  // namespace

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, double tol,
                   int max_sweeps) {
    if (X.rows() != y.size()) throw std::invalid_argument("lasso: feature rows do not match targets");
    if (X.rows() < 1) throw std::invalid_argument("lasso: need at least one sample");
    if (lambda < 0.0) throw std::invalid_argument("lasso: lambda must be >= 0");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const double y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::VectorXd denom(p);  // (1/N) ||x_j||^2 on centered data
    for (Eigen::Index j = 0; j < p; ++j) denom(j) = inv_n * Xc.col(j).squaredNorm();

    LassoFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd residual = yc;  // yc - Xc beta

    auto objective = [&]() {
        return 0.5 * inv_n * residual.squaredNorm() + lambda * fit.beta.template lpNorm<1>();
    };

    double prev = objective();
    fit.objective_history.push_back(prev);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (denom(j) == 0.0) continue;  // constant column carries no signal
            const double old = fit.beta(j);
            const double rho = inv_n * Xc.col(j).dot(residual) + denom(j) * old;
            const double updated = soft_threshold(rho, lambda) / denom(j);
            if (updated != old) {
                residual += Xc.col(j) * (old - updated);
                fit.beta(j) = updated;
            }
        }
        const double cur = objective();
        fit.objective_history.push_back(cur);
        if (std::abs(prev - cur) <= tol * std::max(1.0, std::abs(prev))) break;
        prev = cur;
    }
    fit.intercept = y_mean - x_mean.dot(fit.beta);
    return fit;
}

std::vector<LassoReportRow> lasso_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             const std::vector<double>& lambda_grid, int folds,
                                             std::uint64_t seed) {
    const int n = static_cast<int>(X.rows());
    if (n != y.size()) throw std::invalid_argument("lasso: feature rows do not match targets");
    if (n < 2) throw std::invalid_argument("lasso: need at least two samples");
    if (lambda_grid.empty()) throw std::invalid_argument("lasso: empty lambda grid");
    if (folds < 2 || folds > n) throw std::invalid_argument("lasso: folds must be in [2, n]");
    if ((y.array() - y(0)).abs().maxCoeff() == 0.0)
        throw std::invalid_argument("lasso: target is constant; R^2 is undefined");

    const auto fold_rows = make_folds(n, folds, seed);
    std::vector<LassoReportRow> report;
    report.reserve(lambda_grid.size());
    const Standardizer full_std = Standardizer::fit(X);
    const Eigen::MatrixXd X_full = full_std.apply(X);

    for (double lambda : lambda_grid) {
        LassoReportRow row;
        row.lambda = lambda;
        double train_sum = 0.0;
        double test_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train_rows;
            train_rows.reserve(n - fold_rows[f].size());
            for (int i = 0; i < n; ++i) {
                if (!std::binary_search(fold_rows[f].begin(), fold_rows[f].end(), i))
                    train_rows.push_back(i);
            }
            const Eigen::MatrixXd X_train_raw = take_rows(X, train_rows);
            const Standardizer std_train = Standardizer::fit(X_train_raw);
            const Eigen::MatrixXd X_train = std_train.apply(X_train_raw);
            const Eigen::VectorXd y_train = take_elems(y, train_rows);
            const LassoFit fit = lasso_fit(X_train, y_train, lambda);

            const Eigen::VectorXd pred_train = (X_train * fit.beta).array() + fit.intercept;
            train_sum += r_squared(y_train, pred_train);

            const Eigen::MatrixXd X_test = std_train.apply(take_rows(X, fold_rows[f]));
            const Eigen::VectorXd y_test = take_elems(y, fold_rows[f]);
            const Eigen::VectorXd pred_test = (X_test * fit.beta).array() + fit.intercept;
            test_sum += r_squared(y_test, pred_test);
        }
        row.r2_train = train_sum / folds;
        row.r2_test = test_sum / folds;
        const LassoFit full_fit = lasso_fit(X_full, y, lambda);
        row.nnz = static_cast<int>((full_fit.beta.array() != 0.0).count());
        report.push_back(row);
    }
    return report;
}

int primary_behavior(const Eigen::RowVectorXd& theta_row) {
    if (theta_row.size() == 0) throw std::invalid_argument("primary behavior: empty row");
    int best = 0;
    for (Eigen::Index j = 1; j < theta_row.size(); ++j) {
        if (theta_row(j) > theta_row(best)) best = static_cast<int>(j);
    }
    return best;
}

namespace {

// Ridge-penalized multinomial logistic regression trained by gradient descent with
// backtracking line search. Features arrive standardized; the intercept column is
// appended here and left unpenalized.
struct Logistic {
    Eigen::MatrixXd theta;  // classes x (features + 1), last column is the intercept

    static Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
        Eigen::MatrixXd out(X.rows(), X.cols() + 1);
        out.leftCols(X.cols()) = X;
        out.col(X.cols()).setOnes();
        return out;
    }

    static Logistic train(const Eigen::MatrixXd& X, const std::vector<int>& labels, int classes,
                          double ridge, int max_iter) {
        const Eigen::MatrixXd Xi = with_intercept(X);
        const Eigen::Index n = Xi.rows();
        const Eigen::Index p = Xi.cols();
        Logistic model;
        model.theta = Eigen::MatrixXd::Zero(classes, p);

        auto loss_and_probs = [&](const Eigen::MatrixXd& theta, Eigen::MatrixXd* probs) {
            Eigen::MatrixXd scores = Xi * theta.transpose();  // n x classes
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double mx = scores.row(i).maxCoeff();
                const Eigen::ArrayXd ex = (scores.row(i).array() - mx).exp();
                const double z = ex.sum();
                total -= std::log(ex(labels[static_cast<std::size_t>(i)]) / z);
                if (probs) probs->row(i) = (ex / z).matrix();
            }
            total /= static_cast<double>(n);
            total += 0.5 * ridge * theta.leftCols(p - 1).squaredNorm();
            return total;
        };

        double step = 1.0;
        Eigen::MatrixXd probs(n, classes);
        double loss = loss_and_probs(model.theta, &probs);
        for (int iter = 0; iter < max_iter; ++iter) {
            Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n, classes);
            for (Eigen::Index i = 0; i < n; ++i) target(i, labels[static_cast<std::size_t>(i)]) = 1.0;
            Eigen::MatrixXd grad = (probs - target).transpose() * Xi / static_cast<double>(n);
            grad.leftCols(p - 1) += ridge * model.theta.leftCols(p - 1);
            const double grad_norm2 = grad.squaredNorm();
            if (grad_norm2 < 1e-18) break;

            step = std::min(step * 2.0, 1e6);
            bool accepted = false;
            for (int halving = 0; halving < 60; ++halving) {
                Eigen::MatrixXd cand = model.theta - step * grad;
                Eigen::MatrixXd cand_probs(n, classes);
                const double cand_loss = loss_and_probs(cand, &cand_probs);
                if (cand_loss <= loss - 0.5 * step * grad_norm2 + 1e-12 * (1.0 + std::abs(loss))) {
                    model.theta = cand;
                    probs = cand_probs;
                    loss = cand_loss;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        return model;
    }

    int predict(const Eigen::RowVectorXd& x) const {
        Eigen::RowVectorXd xi(x.size() + 1);
        xi.head(x.size()) = x;
        xi(x.size()) = 1.0;
        Eigen::VectorXd scores = theta * xi.transpose();
        int best = 0;
        for (Eigen::Index c = 1; c < scores.size(); ++c) {
            if (scores(c) > scores(best)) best = static_cast<int>(c);
        }
        return best;
    }
};

int modal_class(const std::vector<int>& labels, const std::vector<int>& rows, int classes) {
    std::vector<int> counts(classes, 0);
    for (int i : rows) counts[labels[static_cast<std::size_t>(i)]]++;
    int best = 0;
    for (int c = 1; c < classes; ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    return best;
}

}  // namespace

ClassifyResult classify_primary(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                const ClassifyConfig& config) {
    const int n = static_cast<int>(X.rows());
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("classify: feature rows do not match labels");
    if (config.folds < 2 || config.folds > n)
        throw std::invalid_argument("classify: folds must be in [2, n]");
    int classes = 0;
    for (int label : labels) {
        if (label < 0) throw std::invalid_argument("classify: negative label");
        classes = std::max(classes, label + 1);
    }
    std::vector<int> full_counts(classes, 0);
    for (int label : labels) full_counts[label]++;
    if (std::count_if(full_counts.begin(), full_counts.end(), [](int c) { return c > 0; }) < 2)
        throw std::invalid_argument("classify: need at least two classes present");

    ClassifyResult result;
    const int full_modal = static_cast<int>(
        std::max_element(full_counts.begin(), full_counts.end()) - full_counts.begin());
    result.majority_frequency =
        static_cast<double>(full_counts[full_modal]) / static_cast<double>(n);

    const auto fold_rows = make_folds(n, config.folds, config.seed);
    long long majority_correct = 0;
    long long logistic_correct = 0;
    long long logistic_total = 0;
    for (int f = 0; f < config.folds; ++f) {
        std::vector<int> train_rows;
        train_rows.reserve(n - fold_rows[f].size());
        for (int i = 0; i < n; ++i) {
            if (!std::binary_search(fold_rows[f].begin(), fold_rows[f].end(), i))
                train_rows.push_back(i);
        }
        const int majority = modal_class(labels, train_rows, classes);
        long long fold_majority_correct = 0;
        for (int i : fold_rows[f]) {
            if (labels[static_cast<std::size_t>(i)] == majority) fold_majority_correct++;
        }
        majority_correct += fold_majority_correct;
        result.majority_accuracy.push_back(static_cast<double>(fold_majority_correct) /
                                           static_cast<double>(fold_rows[f].size()));

        std::vector<int> train_classes(classes, 0);
        for (int i : train_rows) train_classes[labels[static_cast<std::size_t>(i)]]++;
        const bool single_class =
            std::count_if(train_classes.begin(), train_classes.end(), [](int c) { return c > 0; }) < 2;
        result.logistic_skipped.push_back(single_class);
        if (single_class) {
            result.logistic_accuracy.push_back(0.0);
            continue;
        }

        const Eigen::MatrixXd X_train_raw = take_rows(X, train_rows);
        const Standardizer std_train = Standardizer::fit(X_train_raw);
        const Eigen::MatrixXd X_train = std_train.apply(X_train_raw);
        std::vector<int> y_train;
        y_train.reserve(train_rows.size());
        for (int i : train_rows) y_train.push_back(labels[static_cast<std::size_t>(i)]);
        const Logistic model =
            Logistic::train(X_train, y_train, classes, config.ridge, config.max_iter);

        const Eigen::MatrixXd X_test = std_train.apply(take_rows(X, fold_rows[f]));
        long long fold_logistic_correct = 0;
        for (std::size_t k = 0; k < fold_rows[f].size(); ++k) {
            const int pred = model.predict(X_test.row(static_cast<Eigen::Index>(k)));
            if (pred == labels[static_cast<std::size_t>(fold_rows[f][k])]) fold_logistic_correct++;
        }
        logistic_correct += fold_logistic_correct;
        logistic_total += static_cast<long long>(fold_rows[f].size());
        result.logistic_accuracy.push_back(static_cast<double>(fold_logistic_correct) /
                                           static_cast<double>(fold_rows[f].size()));
    }
    result.majority_pooled_accuracy = static_cast<double>(majority_correct) / static_cast<double>(n);
    result.logistic_pooled_accuracy =
        logistic_total == 0 ? 0.0
                            : static_cast<double>(logistic_correct) / static_cast<double>(logistic_total);
    return result;
}

}  // namespace lifestyles::baselines
