#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mortjump/samplers.hpp"

namespace mortjump {

/// Joint state of C populations. Each country keeps a full ParameterState whose
/// occurrence vector and p mirror the shared values; its sigma_xi mirrors the
/// square root of the matching covariance diagonal entry.
struct MultiPopState {
    std::vector<ParameterState> countries;
    std::vector<int> occurrence;  // shared N
    double p = 0.05;              // shared
    Eigen::MatrixXd covariance;   // C x C, innovations of dkappa

    int n_countries() const { return static_cast<int>(countries.size()); }
    Eigen::VectorXd drift() const;
    /// Copies the shared N, p and covariance diagonal into every country and refreshes J.
    void sync(JumpKind kind);
};

struct MultiPopSpec {
    JumpKind kind = JumpKind::AR1;
    PriorConfig priors = PriorConfig::covid();  // per-country priors, shared p prior
    ConstraintConfig constraints;               // pins on the shared N
    /// Inverse-Wishart prior on the covariance: dof = C + iw_extra_dof, scale = iw_scale I.
    double iw_extra_dof = 2.0;
    double iw_scale = 1.0;
    /// Keep the covariance diagonal (independent innovations).
    bool diagonal_covariance = false;

    ModelSpec country_spec() const;
};

struct MultiPopLogLikelihood {
    double total = 0.0;        // observations + innovation density
    double observation = 0.0;  // sum over countries of the Gaussian observation terms
    double innovation = 0.0;   // MVN density of the dkappa innovations
    std::vector<Eigen::MatrixXd> pointwise;  // per country, A x (T-1)
};

/// Throws YearRangeMismatch unless every Z has the same number of columns.
void check_year_ranges(const std::vector<ImprovementMatrix>& zs);

MultiPopLogLikelihood multipop_log_likelihood(const MultiPopState& state,
                                              const std::vector<ImprovementMatrix>& zs);

/// Log density of the innovation vectors dkappa[., c] - d, c >= 1, under N(0, covariance).
double innovation_log_density(const MultiPopState& state);

/// Renormalises each country's loadings with compensating rescale of its
/// increments, drift, covariance row/column and severities. N is untouched.
MultiPopState rescale_country_params(MultiPopState state, JumpKind kind);

struct MultiPopDraws {
    MultiPopSpec spec;
    McmcSettings settings;
    int n_ages = 0;
    int n_years = 0;
    std::vector<MultiPopState> states;
    std::vector<int> chain;
    std::vector<int> iteration;
    /// S x (C A (T-1)); observation i of country c sits at column c A (T-1) + i.
    Eigen::MatrixXd loglik;
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(states.size()); }
    int n_chains() const;
    /// Single-population view of country c (shared N and p included).
    PosteriorDraws country(int c) const;
};

MultiPopDraws run_mcmc_multipop(const MultiPopSpec& spec, const std::vector<ImprovementMatrix>& zs,
                                const McmcSettings& settings);

/// Inverse-Wishart(dof, scale) draw via the Bartlett decomposition.
Eigen::MatrixXd draw_inverse_wishart(Rng& rng, double dof, const Eigen::MatrixXd& scale);

}  // namespace mortjump
