#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mortjump/data.hpp"

namespace mortjump {

/// Serial structure of the jump effect J.
///   None:        J = 0 (plain Lee-Carter on improvements)
///   Independent: J(t) = N(t) Y(t) (model name "liuli")
///   AR1:         J(t) = a J(t-1) + N(t) Y(t)
///   MA1:         J(t) = N(t) Y(t) + b N(t-1) Y(t-1)
enum class JumpKind { None, Independent, AR1, MA1 };

std::string_view to_string(JumpKind kind);
/// Accepts the CLI model names (lc, liuli, ar, ma) as well as none/independent/ar1/ma1.
JumpKind parse_jump_kind(std::string_view name);
inline bool has_jumps(JumpKind k) { return k != JumpKind::None; }
inline bool has_coeff(JumpKind k) { return k == JumpKind::AR1 || k == JumpKind::MA1; }

enum class SeveritySupport { PositiveHalfNormal, Gaussian };

/// Prior of the vanishing coefficient a (AR1) or b (MA1), supported on [0, 1).
struct CoeffPrior {
    enum class Family { TruncatedNormal, Beta };
    Family family = Family::TruncatedNormal;
    double first = 0.0;   // mean, or Beta shape a
    double second = 0.4;  // sd, or Beta shape b
};

struct PriorConfig {
    Eigen::VectorXd dirichlet_beta;       // empty = all ones
    Eigen::VectorXd dirichlet_beta_jump;  // empty = all ones
    double drift_mean = 0.0;
    double drift_sd = 5.0;
    double sigma_xi_sd = 2.0;  // half-normal
    double sigma_r_sd = 2.0;   // half-normal
    double p_a = 1.0;
    double p_b = 20.0;
    double mu_y_sd = 4.0;     // half-normal
    double sigma_y_sd = 2.0;  // half-normal
    CoeffPrior coeff;
    SeveritySupport severity = SeveritySupport::PositiveHalfNormal;

    /// Hyperparameters used for the COVID-era fits (US, Spain, Poland).
    static PriorConfig covid();
    /// Hyperparameters used for the England and Wales war-period fits (A must be 10).
    static PriorConfig england_wales();

    Eigen::VectorXd beta_concentration(int n_ages) const;
    Eigen::VectorXd beta_jump_concentration(int n_ages) const;
    void validate(int n_ages) const;
};

/// Pins on the occurrence vector N (0-based year indices). N(0) = N(1) = 0 always holds;
/// in addition N(no_jump_year) = 0, where -1 selects the last year.
struct ConstraintConfig {
    int no_jump_year = -1;
    std::vector<int> extra_pins;
};

struct ModelSpec {
    JumpKind kind = JumpKind::AR1;
    PriorConfig priors = PriorConfig::covid();
    ConstraintConfig constraints;
    /// Holds the coefficient fixed instead of sampling it (used for nesting checks).
    std::optional<double> fixed_coeff;

    /// pinned[t] is true where N(t) is held at 0. All years are pinned for JumpKind::None.
    std::vector<bool> pinned(int n_years) const;
    int no_jump_index(int n_years) const;
};

/// One point in parameter space. Vectors over years have length T, dkappa has
/// length T-1 with dkappa[c] = kappa(c+1) - kappa(c) and dkappa[0] == drift.
/// sigma_r is the improvement-scale noise sd (sigma_r^2 = 2 sigma_e^2).
struct ParameterState {
    Eigen::VectorXd beta;
    Eigen::VectorXd beta_jump;
    double drift = 0.0;
    Eigen::VectorXd dkappa;
    double sigma_xi = 0.1;
    double sigma_r = 0.1;
    double p = 0.05;
    std::vector<int> occurrence;
    Eigen::VectorXd severity;
    double coeff = 0.0;
    Eigen::VectorXd jump;
    double mu_y = 1.0;
    double sigma_y = 1.0;

    int n_ages() const { return static_cast<int>(beta.size()); }
    int n_years() const { return static_cast<int>(occurrence.size()); }

    /// Recomputes J from (N, Y, coeff).
    void refresh_jump(JumpKind kind);
};

/// A state with uniform age loadings, no jumps and the given drift.
ParameterState make_state(int n_ages, int n_years, double drift = 0.0);

/// Throws an Error naming the first violated constraint of the state.
void check_invariants(const ParameterState& state, const ModelSpec& spec);

struct McmcSettings {
    int n_chains = 2;
    int burn_in = 7500;
    int n_samples = 10000;
    int thin = 10;
    std::uint64_t seed = 20240601;
    int threads = 0;  // 0 = one per chain

    void validate() const;
    int retained_per_chain() const { return n_samples / thin; }
};

Eigen::VectorXd jump_path(JumpKind kind, const std::vector<int>& occurrence,
                          const Eigen::VectorXd& severity, double coeff);

struct LogLikelihood {
    double total = 0.0;
    Eigen::MatrixXd pointwise;  // A x (T-1)
};

LogLikelihood log_likelihood(const ParameterState& state, const ImprovementMatrix& z);

/// Sum of squared residuals of Z against the state's mean over columns [first, last).
double residual_sum_of_squares(const ParameterState& state, const ImprovementMatrix& z,
                               int first = 0, int last = -1);

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_prior(const ParameterState& state, const ModelSpec& spec);

/// Log density of the free increments dkappa[1..] under Normal(drift, sigma_xi^2).
double dkappa_log_density(const ParameterState& state);

double log_posterior(const ParameterState& state, const ModelSpec& spec,
                     const ImprovementMatrix& z);

/// Column names of a flattened state, in the order used by flatten_state:
/// scalars (d, sigma_xi, sigma_r, then p, mu_y, sigma_y and a or b when the
/// structure has them), beta[x], beta_j[x], dkappa[c], N[t], Y[t], J[t].
/// Indices in names are 1-based.
std::vector<std::string> parameter_names(const ModelSpec& spec, int n_ages, int n_years);
std::vector<double> flatten_state(const ParameterState& state, const ModelSpec& spec);
/// Inverse of flatten_state; J is recomputed from (N, Y, coeff).
ParameterState unflatten_state(const std::vector<double>& values, const ModelSpec& spec,
                               int n_ages, int n_years);
/// Number of leading scalar entries in the flattened layout.
int n_scalar_parameters(const ModelSpec& spec);

namespace density {
double normal(double x, double mean, double sd);
double half_normal(double x, double sd);
/// Normal(mean, sd) truncated to (0, inf).
double positive_normal(double x, double mean, double sd);
double beta(double x, double a, double b);
double dirichlet(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha);
double coeff(double x, const CoeffPrior& prior);
double severity(double y, double mu, double sd, SeveritySupport support);
double log_normal_cdf(double x);
}  // namespace density

}  // namespace mortjump
