#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mortjump {

struct WaicResult {
    double waic = 0.0;
    double lpd_hat = 0.0;
    double p_waic = 0.0;
    Eigen::VectorXd lpd_pointwise;
    Eigen::VectorXd p_waic_pointwise;
};

/// WAIC from an S x n pointwise log-likelihood matrix.
WaicResult waic(const Eigen::MatrixXd& loglik);

struct PsisResult {
    Eigen::VectorXd log_weights;  // smoothed, unnormalised
    double pareto_k = 0.0;        // +inf when the tail could not be fitted
    bool smoothed = false;        // false when the tail was too short or constant
};

/// Pareto-smoothed importance weights for one observation's log ratios.
/// The tail is the largest ceil(0.2 S) ratios.
PsisResult psis_smooth(const Eigen::VectorXd& log_ratios);

/// Generalised Pareto fit to exceedances (sorted ascending) with the weakly
/// informative shrinkage of k; returns {k, sigma}.
std::pair<double, double> gpd_fit(const std::vector<double>& sorted_exceedances);

struct LooResult {
    double lpd_loo = 0.0;
    double deviance = 0.0;  // -2 lpd_loo
    Eigen::VectorXd lpd_pointwise;
    Eigen::VectorXd pareto_k;
    std::vector<std::string> warnings;

    int n_high_k(double threshold = 0.7) const;
};

LooResult loo_cv(const Eigen::MatrixXd& loglik);

/// One row of a model comparison table.
struct ComparisonRow {
    std::string label;
    WaicResult waic;
    LooResult loo;
};

/// Rows in input order; `best` is the index of the lowest WAIC.
struct Comparison {
    std::vector<ComparisonRow> rows;
    int best = -1;
};

Comparison compare_models(const std::vector<std::string>& labels,
                          const std::vector<Eigen::MatrixXd>& logliks);

}  // namespace mortjump
