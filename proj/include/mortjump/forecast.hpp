#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mortjump/samplers.hpp"

namespace mortjump {

/// Posterior-predictive paths, one per retained draw. Matrices are A x H.
struct ForecastFan {
    int horizon = 0;
    int base_year = 0;  // calendar year of the base log rates
    Eigen::VectorXd base_log_rates;
    std::vector<Eigen::MatrixXd> log_rates;
    std::vector<Eigen::MatrixXd> z_draws;
    std::vector<Eigen::MatrixXd> z_mean;  // conditional mean of Z given the simulated N, Y, xi
    std::vector<double> sigma_r;

    int size() const { return static_cast<int>(log_rates.size()); }
    int n_ages() const { return static_cast<int>(base_log_rates.size()); }
};

/// Simulates each retained draw forward `horizon` years from `base_log_rates`.
/// Draw s uses its own RNG stream, so results do not depend on evaluation order.
ForecastFan forecast(const PosteriorDraws& draws, const Eigen::VectorXd& base_log_rates,
                     int horizon, std::uint64_t seed, int base_year = 0);

/// Same, from an explicit list of states (used by tests and the CLI).
ForecastFan forecast(const std::vector<ParameterState>& states, const ModelSpec& spec,
                     const Eigen::VectorXd& base_log_rates, int horizon, std::uint64_t seed,
                     int base_year = 0);

/// Per age: quantiles across draws of the time average of exp(beta_j[x] J(t)) - 1.
/// Result is A x levels.size().
Eigen::MatrixXd shock_increase_quantiles(const PosteriorDraws& draws,
                                         const std::vector<double>& levels);
Eigen::MatrixXd shock_increase_quantiles(const std::vector<ParameterState>& states,
                                         const std::vector<double>& levels);

/// mean|X - y| - 0.5 mean|X - X'| over all ordered pairs of samples.
double crps_samples(std::vector<double> samples, double observed);

/// -log of the equally weighted Gaussian mixture density at `observed`.
double log_score_mixture(const std::vector<double>& means, const std::vector<double>& sds,
                         double observed);

struct ScoreTable {
    Eigen::MatrixXd log_score;  // A x H, on improvements
    Eigen::MatrixXd crps;       // A x H, on improvements
    Eigen::MatrixXd sq_error;   // A x H, posterior-mean log rate minus observed
    Eigen::MatrixXd abs_error;
    double total_log_score = 0.0;
    double total_crps = 0.0;
    double mse = 0.0;
    double mae = 0.0;
};

/// Scores a fan against observed log rates (A x H, years after the base year).
ScoreTable forecast_scores(const ForecastFan& fan, const Eigen::MatrixXd& observed_log_rates);

}  // namespace mortjump
