#pragma once

#include <string>
#include <vector>

#include "mortjump/samplers.hpp"

namespace mortjump {

/// One scalar sequence per chain.
using ChainSet = std::vector<std::vector<double>>;

/// Split R-hat: the largest of the rank-normalised bulk value, the
/// rank-normalised value on draws folded around the median, and the classic
/// value on the raw draws.
double split_rhat(const ChainSet& chains);
double ess_bulk(const ChainSet& chains);
/// Minimum of the ESS of the 5% and 95% quantile indicators.
double ess_tail(const ChainSet& chains);

/// Sample quantile with linear interpolation between order statistics
/// (the type-7 / midpoint convention).
double quantile(std::vector<double> values, double level);

/// A row of the diagnostics table. R-hat and ESS are NaN (written "NA") for
/// parameters that do not vary.
struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double map = 0.0;  // value at the retained draw of highest posterior density
    double sd = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    double rhat = 0.0;
    double ess_bulk = 0.0;
    double ess_tail = 0.0;
};

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws);

/// Largest finite R-hat among the scalar parameters (d, sigmas, p, mu_y, sigma_y, a/b).
double max_scalar_rhat(const std::vector<ParameterSummary>& table, const ModelSpec& spec);

}  // namespace mortjump
