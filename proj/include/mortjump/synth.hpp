#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mortjump/data.hpp"
#include "mortjump/model.hpp"
#include "mortjump/multipop.hpp"
#include "mortjump/rng.hpp"
#include "mortjump/samplers.hpp"

namespace mortjump {

/// A simulated log-rate panel with the latent quantities that generated it.
struct SimulatedPanel {
    ParameterState truth;  // dkappa holds the realised increments, J the realised path
    Eigen::MatrixXd log_rates;  // A x T
    ImprovementMatrix z;        // A x (T-1), the generated improvements
};

/// Draws xi ~ N(0, sigma_xi) (xi for the first increment is 0) and
/// eps ~ N(0, sigma_r), then accumulates log rates from `base_log_rates`.
/// (N, Y, coeff) of `truth` are kept as given. Zero scales give a noiseless panel.
SimulatedPanel simulate_dataset(const ParameterState& truth, JumpKind kind,
                                const Eigen::VectorXd& base_log_rates, std::uint64_t seed);

struct SimulatedMultiPanel {
    MultiPopState truth;
    std::vector<Eigen::MatrixXd> log_rates;  // per country, A x T
    std::vector<ImprovementMatrix> z;
};

/// Multi-population version: innovation vectors are drawn jointly from
/// N(0, truth.covariance); every country uses the shared N.
SimulatedMultiPanel simulate_multipop(const MultiPopState& truth, JumpKind kind,
                                      const std::vector<Eigen::VectorXd>& base_log_rates,
                                      std::uint64_t seed);

/// Converts a panel to deaths/exposures with a constant exposure per cell.
MortalityTable panel_to_table(const Eigen::MatrixXd& log_rates, int first_year,
                              const std::string& population = "synthetic",
                              double exposure = 1e6);

/// A baseline truth shaped like the desk-scale default (A = 10, T = 33).
ParameterState default_truth(JumpKind kind, int n_ages = 10, int n_years = 33);
/// Gompertz-like base log rates rising linearly with age group.
Eigen::VectorXd default_base_log_rates(int n_ages = 10);

struct RecoveryOptions {
    ModelSpec spec;  // the fitted model
    /// Jump structure that generates the data; defaults to spec.kind. Set it to
    /// fit a misspecified model to data from a given structure.
    std::optional<JumpKind> truth_kind;
    McmcSettings settings;
    int n_replications = 50;
    std::uint64_t seed = 1;
    double level = 0.8;
    Eigen::VectorXd base_log_rates;  // empty = default_base_log_rates
    /// Optional per-replication truth; defaults to the fixed truth passed in.
    std::function<ParameterState(int replication, Rng& rng)> draw_truth;
    /// Called after each replication (progress reporting).
    std::function<void(int replication)> on_replication;
};

struct ParameterRecovery {
    std::string name;
    int covered = 0;
    int replications = 0;
    double coverage = 0.0;
    double bias = 0.0;  // mean of (posterior mean - truth)
};

struct RecoveryReport {
    std::vector<ParameterRecovery> parameters;
    std::vector<double> max_rhat;  // per replication, over scalar parameters
    std::vector<double> waic;      // per replication

    const ParameterRecovery& at(const std::string& name) const;
};

/// Repeatedly simulates from the truth and refits; coverage of central
/// `level` credible intervals and bias per scalar parameter.
RecoveryReport recovery_study(const ParameterState& truth, const RecoveryOptions& options);

}  // namespace mortjump
