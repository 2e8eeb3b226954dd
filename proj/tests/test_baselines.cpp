#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lifestyles/baselines.hpp"
#include "lifestyles/rng.hpp"
#include "test_util.hpp"

using namespace lifestyles;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, Rng& rng) {
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    return X;
}

}  // namespace

TEST_CASE("lasso_fit satisfies the KKT optimality conditions") {
    Rng rng(41);
    const int n = 40, p = 6;
    const Eigen::MatrixXd X = random_matrix(n, p, rng);
    Eigen::VectorXd beta_true(p);
    beta_true << 2.0, -1.5, 0.0, 0.0, 0.8, 0.0;
    Eigen::VectorXd y = X * beta_true;
    for (int i = 0; i < n; ++i) y(i) += 0.1 * rng.normal();

    const double lambda = 0.1;
    const auto fit = baselines::lasso_fit(X, y, lambda, 1e-14);

    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::VectorXd residual = yc - Xc * fit.beta;
    for (int j = 0; j < p; ++j) {
        const double corr = Xc.col(j).dot(residual) / static_cast<double>(n);
        if (fit.beta(j) > 0.0)
            CHECK(std::abs(corr - lambda) < 1e-6);
        else if (fit.beta(j) < 0.0)
            CHECK(std::abs(corr + lambda) < 1e-6);
        else
            CHECK(std::abs(corr) <= lambda + 1e-6);
    }
    CHECK(fit.intercept == doctest::Approx(y.mean() - x_mean.dot(fit.beta)).epsilon(1e-12));
}

TEST_CASE("lasso_fit collapses to the mean under an overwhelming penalty") {
    Rng rng(42);
    const Eigen::MatrixXd X = random_matrix(20, 4, rng);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) y(i) = rng.normal(3.0, 2.0);

    const auto fit = baselines::lasso_fit(X, y, 1e6);
    for (int j = 0; j < 4; ++j) CHECK(fit.beta(j) == 0.0);
    CHECK(fit.intercept == y.mean());
}

TEST_CASE("lasso_fit objective history decreases sweep over sweep") {
    Rng rng(43);
    const int n = 30, p = 5;
    const Eigen::MatrixXd X = random_matrix(n, p, rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = X(i, 0) - 2.0 * X(i, 2) + 0.3 * rng.normal();

    const auto fit = baselines::lasso_fit(X, y, 0.05);
    REQUIRE(fit.objective_history.size() >= 2);
    const Eigen::VectorXd yc = y.array() - y.mean();
    CHECK(fit.objective_history.front() ==
          doctest::Approx(0.5 * yc.squaredNorm() / n).epsilon(1e-12));
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
        CHECK(fit.objective_history[i] <=
              fit.objective_history[i - 1] + 1e-12 * (1.0 + fit.objective_history[i - 1]));
}

TEST_CASE("lasso_fit recovers an exact linear rule at zero penalty") {
    Rng rng(44);
    const int n = 50, p = 4;
    const Eigen::MatrixXd X = random_matrix(n, p, rng);
    Eigen::VectorXd beta_true(p);
    beta_true << 1.5, -2.0, 0.0, 0.5;
    const Eigen::VectorXd y = (X * beta_true).array() + 0.7;

    const auto fit = baselines::lasso_fit(X, y, 0.0, 1e-14);
    CHECK((fit.beta - beta_true).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(fit.intercept == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("lasso_fit leaves constant columns at zero") {
    Rng rng(45);
    const int n = 25;
    Eigen::MatrixXd X = random_matrix(n, 3, rng);
    X.col(1).setConstant(3.0);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = 2.0 * X(i, 0) + 0.1 * rng.normal();

    const auto fit = baselines::lasso_fit(X, y, 0.01);
    CHECK(fit.beta(1) == 0.0);
    CHECK(std::abs(fit.beta(0) - 2.0) < 0.1);
}

TEST_CASE("lasso_regression reports one row per lambda with cv scores") {
    Rng rng(46);
    const int n = 60, p = 5;
    const Eigen::MatrixXd X = random_matrix(n, p, rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = 1.2 * X(i, 0) - 0.8 * X(i, 3) + 0.2 * rng.normal();

    const auto report = baselines::lasso_regression(X, y, {0.01, 1e6}, 4, 9);
    REQUIRE(report.size() == 2);
    CHECK(report[0].lambda == 0.01);
    CHECK(report[1].lambda == 1e6);

    // A light penalty on a strong linear signal explains most of the variance.
    CHECK(report[0].r2_test > 0.8);
    CHECK(report[0].nnz >= 2);

    // The crushing penalty predicts the training mean everywhere.
    CHECK(report[1].nnz == 0);
    CHECK(std::abs(report[1].r2_train) < 1e-12);
    CHECK(report[1].r2_test <= 1e-12);

    // Identical call, identical numbers.
    const auto again = baselines::lasso_regression(X, y, {0.01, 1e6}, 4, 9);
    for (std::size_t i = 0; i < report.size(); ++i) {
        CHECK(again[i].r2_train == report[i].r2_train);
        CHECK(again[i].r2_test == report[i].r2_test);
        CHECK(again[i].nnz == report[i].nnz);
    }
}

TEST_CASE("primary_behavior picks the top weight with ties to the smaller index") {
    Eigen::RowVectorXd row(3);
    row << 0.1, 0.7, 0.2;
    CHECK(baselines::primary_behavior(row) == 1);

    Eigen::RowVectorXd tie(3);
    tie << 0.4, 0.4, 0.2;
    CHECK(baselines::primary_behavior(tie) == 0);

    CHECK(baselines::primary_behavior(2.0 * row) == baselines::primary_behavior(row));

    Eigen::RowVectorXd single(1);
    single << 1.0;
    CHECK(baselines::primary_behavior(single) == 0);

    CHECK_THROWS_AS(baselines::primary_behavior(Eigen::RowVectorXd()), std::invalid_argument);
}

TEST_CASE("majority baseline equals the modal-class frequency under a dominant class") {
    Rng rng(47);
    const int n = 20;
    const Eigen::MatrixXd X = random_matrix(n, 3, rng);
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(0);
    for (int i = 0; i < 5; ++i) labels.push_back(1);
    for (int i = 0; i < 3; ++i) labels.push_back(2);

    baselines::ClassifyConfig cfg;
    cfg.folds = 4;
    cfg.seed = 3;
    const auto result = baselines::classify_primary(X, labels, cfg);

    CHECK(result.majority_frequency == 12.0 / 20.0);
    // Class 0 dominates every training split, so the pooled majority accuracy is
    // exactly the modal frequency.
    CHECK(result.majority_pooled_accuracy == result.majority_frequency);
    REQUIRE(result.majority_accuracy.size() == 4);
    REQUIRE(result.logistic_accuracy.size() == 4);
    REQUIRE(result.logistic_skipped.size() == 4);
}

TEST_CASE("logistic baseline separates well-spread blobs") {
    Rng rng(48);
    const int per_class = 20;
    Eigen::MatrixXd X(3 * per_class, 2);
    std::vector<int> labels;
    const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < per_class; ++i) {
            const int row = c * per_class + i;
            X(row, 0) = centers[c][0] + 0.5 * rng.normal();
            X(row, 1) = centers[c][1] + 0.5 * rng.normal();
            labels.push_back(c);
        }
    }

    baselines::ClassifyConfig cfg;
    cfg.folds = 5;
    cfg.seed = 11;
    const auto result = baselines::classify_primary(X, labels, cfg);
    CHECK(result.logistic_pooled_accuracy > 0.95);
    CHECK(result.majority_pooled_accuracy < 0.6);
    for (bool skipped : result.logistic_skipped) CHECK_FALSE(skipped);
}

TEST_CASE("logistic accuracy stays near the modal frequency on permuted labels") {
    const int n = 120;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) labels.push_back(0);
    for (int i = 0; i < 36; ++i) labels.push_back(1);
    for (int i = 0; i < 24; ++i) labels.push_back(2);

    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng(seed);
        const Eigen::MatrixXd X = random_matrix(n, 4, rng);
        std::vector<int> permuted = labels;
        rng.shuffle(permuted);

        baselines::ClassifyConfig cfg;
        cfg.folds = 5;
        cfg.seed = seed;
        const auto result = baselines::classify_primary(X, permuted, cfg);
        CHECK(result.logistic_pooled_accuracy >= 0.3);
        CHECK(result.logistic_pooled_accuracy <= 0.7);
    }
}

TEST_CASE("single-class training folds are skipped and excluded from pooling") {
    Rng rng(49);
    const Eigen::MatrixXd X = random_matrix(4, 2, rng);
    const std::vector<int> labels = {0, 0, 0, 1};

    baselines::ClassifyConfig cfg;
    cfg.folds = 2;
    cfg.seed = 5;
    const auto result = baselines::classify_primary(X, labels, cfg);

    // With one minority row, exactly the fold that holds it out trains single-class.
    REQUIRE(result.logistic_skipped.size() == 2);
    const int skipped_count = (result.logistic_skipped[0] ? 1 : 0) +
                              (result.logistic_skipped[1] ? 1 : 0);
    CHECK(skipped_count == 1);
    const std::size_t skipped = result.logistic_skipped[0] ? 0 : 1;
    const std::size_t active = 1 - skipped;
    CHECK(result.logistic_accuracy[skipped] == 0.0);
    CHECK(result.logistic_pooled_accuracy == result.logistic_accuracy[active]);
}

TEST_CASE("lasso_regression validates its inputs") {
    Rng rng(50);
    const Eigen::MatrixXd X = random_matrix(10, 2, rng);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) y(i) = rng.normal();

    CHECK_THROWS_AS(baselines::lasso_regression(X.topRows(1), y.head(1), {0.1}, 2, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_regression(X, y, {}, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_regression(X, y, {0.1}, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_regression(X, y, {0.1}, 11, 0), std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_regression(X, Eigen::VectorXd::Constant(10, 2.0), {0.1}, 2, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_regression(X, y.head(9), {0.1}, 2, 0), std::invalid_argument);

    CHECK_THROWS_AS(baselines::lasso_fit(X, y, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(baselines::lasso_fit(Eigen::MatrixXd(0, 2), Eigen::VectorXd(), 0.1),
                    std::invalid_argument);
}

TEST_CASE("classify_primary validates its inputs") {
    Rng rng(51);
    const Eigen::MatrixXd X = random_matrix(10, 2, rng);
    const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    baselines::ClassifyConfig cfg;
    cfg.folds = 2;

    std::vector<int> short_labels(labels.begin(), labels.begin() + 9);
    CHECK_THROWS_AS(baselines::classify_primary(X, short_labels, cfg), std::invalid_argument);

    baselines::ClassifyConfig bad = cfg;
    bad.folds = 1;
    CHECK_THROWS_AS(baselines::classify_primary(X, labels, bad), std::invalid_argument);
    bad.folds = 11;
    CHECK_THROWS_AS(baselines::classify_primary(X, labels, bad), std::invalid_argument);

    std::vector<int> negative = labels;
    negative[3] = -1;
    CHECK_THROWS_AS(baselines::classify_primary(X, negative, cfg), std::invalid_argument);

    const std::vector<int> uniform(10, 2);
    CHECK_THROWS_AS(baselines::classify_primary(X, uniform, cfg), std::invalid_argument);
}
