#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mortjump/error.hpp"
#include "mortjump/model.hpp"
#include "mortjump/rng.hpp"

namespace mortjump {

struct SliceResult {
    double value;
    int evaluations;
};

/// Univariate slice sampler with stepping out and shrinkage. `log_density` may
/// return -inf outside its support; it must be finite at `current`.
template <class LogDensity>
SliceResult slice_sample_detailed(LogDensity&& log_density, double current, double width,
                                  int max_steps, Rng& rng) {
    int evals = 0;
    auto f = [&](double x) {
        ++evals;
        return log_density(x);
    };
    const double f0 = f(current);
    if (!std::isfinite(f0))
        throw Error(Errc::InvalidStart, "log density is not finite at the current point");
    const double level = f0 + std::log(rnd::uniform(rng));
    double left = current - width * rnd::uniform(rng);
    double right = left + width;
    int j = static_cast<int>(std::floor(max_steps * rnd::uniform(rng)));
    int k = max_steps - 1 - j;
    for (; j > 0 && f(left) > level; --j) left -= width;
    for (; k > 0 && f(right) > level; --k) right += width;
    for (;;) {
        const double proposal = left + rnd::uniform(rng) * (right - left);
        if (f(proposal) > level) return {proposal, evals};
        if (proposal < current)
            left = proposal;
        else
            right = proposal;
        if (!(right - left > 1e-14 * (1.0 + std::abs(current)))) return {current, evals};
    }
}

template <class LogDensity>
double slice_sample(LogDensity&& log_density, double current, double width, int max_steps,
                    Rng& rng) {
    return slice_sample_detailed(std::forward<LogDensity>(log_density), current, width, max_steps,
                                 rng)
        .value;
}

struct MetropolisResult {
    double value;
    bool accepted;
};

/// Random-walk Metropolis step with a Gaussian proposal of sd `step_sd`.
template <class LogDensity>
MetropolisResult rw_metropolis(LogDensity&& log_density, double current, double step_sd,
                               Rng& rng) {
    if (!(step_sd > 0.0)) throw Error(Errc::InvalidSettings, "step_sd must be positive");
    const double proposal = current + step_sd * rnd::standard_normal(rng);
    const double u = rnd::uniform(rng);
    const double f1 = log_density(proposal);
    if (!(f1 > -INFINITY)) return {current, false};
    const double f0 = log_density(current);
    if (std::log(u) < f1 - f0) return {proposal, true};
    return {current, false};
}

/// Width of a slice sampler, adapted during burn-in toward twice the mean move.
class SliceTuner {
public:
    explicit SliceTuner(double width = 1.0) : width_(width) {}
    double width() const { return width_; }
    void observe(double move, bool adapt);

private:
    double width_;
    double sum_moves_ = 0.0;
    long count_ = 0;
};

/// Step size of a random-walk Metropolis kernel, adapted during burn-in toward
/// an acceptance rate of 0.44.
class MetropolisTuner {
public:
    explicit MetropolisTuner(double step = 0.1) : log_step_(std::log(step)) {}
    double step() const { return std::exp(log_step_); }
    void observe(bool accepted, bool adapt);
    long proposals() const { return proposals_; }
    long accepted() const { return accepted_; }

private:
    double log_step_;
    long proposals_ = 0;
    long accepted_ = 0;
};

constexpr int kSliceMaxSteps = 50;

struct NormalMoments {
    double mean;
    double sd;
};

/// Gaussian full conditional of the drift d.
NormalMoments drift_conditional(const ParameterState& state, const ImprovementMatrix& z,
                                const PriorConfig& priors);
double gibbs_drift(const ParameterState& state, const ImprovementMatrix& z,
                   const PriorConfig& priors, Rng& rng);

/// Beta shapes of the full conditional of p given the free occurrences.
std::pair<double, double> p_conditional(const std::vector<int>& occurrence,
                                        const std::vector<bool>& pinned,
                                        const PriorConfig& priors);
double gibbs_p(const std::vector<int>& occurrence, const std::vector<bool>& pinned,
               const PriorConfig& priors, Rng& rng);

/// P(N(t) = 1 | everything else).
double occurrence_probability(const ParameterState& state, const ModelSpec& spec,
                              const ImprovementMatrix& z, int t);
int gibbs_binary_N(const ParameterState& state, const ModelSpec& spec,
                   const ImprovementMatrix& z, int t, Rng& rng);

/// The likelihood ratio of N(t) = 1 against N(t) = 0 as a function of Y(t) is
/// exp(linear Y - quadratic Y^2 / 2); these are its two coefficients.
struct ShockLikelihood {
    double quadratic = 0.0;
    double linear = 0.0;
};
ShockLikelihood shock_likelihood(const ParameterState& state, const ModelSpec& spec,
                                 const ImprovementMatrix& z, int t);

/// Log of E_prior[likelihood ratio] with Y(t) integrated over its prior, plus the
/// Gaussian (before truncation) conditional of Y(t) given N(t) = 1.
struct CollapsedShock {
    double log_bayes_factor = 0.0;
    double mean = 0.0;
    double sd = 0.0;
};
CollapsedShock collapse_severity(const ShockLikelihood& lik, double mu, double sd,
                                 SeveritySupport support);

/// Joint draw of (N(t), Y(t)) from their conditional with Y(t) integrated out of
/// the occurrence step. Consumes exactly two uniforms.
std::pair<int, double> gibbs_occurrence_severity(const ParameterState& state,
                                                 const ModelSpec& spec,
                                                 const ImprovementMatrix& z, int t, Rng& rng);

/// Metropolis-Hastings move that flips N(t) and shifts the affected increments
/// dkappa by minus the change in J increments, leaving column totals of the fitted
/// improvements unchanged. A new severity is proposed from a positive normal
/// centred at the excess increment dkappa[t-1] - d. When the flip adds the only
/// shock or removes it, the jump loadings are proposed too (Dirichlet draws on top
/// of the two uniforms).
bool shift_occurrence_move(ParameterState& state, const ModelSpec& spec,
                           const ImprovementMatrix& z, int t, Rng& rng);

enum class SimplexBlock { Beta, BetaJump };

/// Gamma-reparameterised coordinate slice update of one simplex block.
/// `log_widths` (one per age, may be empty) are slice widths on the log scale.
Eigen::VectorXd sample_simplex_block(const ParameterState& state, const ModelSpec& spec,
                                     const ImprovementMatrix& z, SimplexBlock which, Rng& rng,
                                     std::vector<SliceTuner>* tuners = nullptr,
                                     bool adapt = false);

/// Thinned post-burn-in draws of all chains.
struct PosteriorDraws {
    ModelSpec spec;
    McmcSettings settings;
    int n_ages = 0;
    int n_years = 0;
    std::vector<ParameterState> states;
    std::vector<int> chain;
    std::vector<int> iteration;
    Eigen::MatrixXd loglik;  // S x n, n = A (T-1), observation i = x (T-1) + c
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(states.size()); }
    int n_chains() const;

    /// Per-chain sequences of a scalar functional of the state.
    template <class F>
    std::vector<std::vector<double>> chains_of(F&& f) const {
        std::vector<std::vector<double>> out(n_chains());
        for (std::size_t s = 0; s < states.size(); ++s) out[chain[s]].push_back(f(states[s]));
        return out;
    }
};

PosteriorDraws run_mcmc(const ModelSpec& spec, const ImprovementMatrix& z,
                        const McmcSettings& settings);

/// Runs one chain; `chain_id` selects the RNG stream. Exposed for tests that need
/// per-iteration access via `on_iteration(iteration, state)`.
template <class Callback>
void run_chain(const ModelSpec& spec, const ImprovementMatrix& z, const McmcSettings& settings,
               int chain_id, Callback&& on_iteration);

namespace detail {

constexpr double kFirstShockConcentration = 200.0;

/// Dirichlet parameters proposing jump loadings for a lone shock at t of size y,
/// centred on the loadings that explain the residual of column t-1 in the
/// shock-free state.
Eigen::VectorXd first_shock_loading_alpha(const ParameterState& shock_free,
                                          const ImprovementMatrix& z, int t, double y);
Eigen::VectorXd draw_dirichlet(const Eigen::VectorXd& alpha, Rng& rng);
int active_shocks(const std::vector<int>& occurrence);

/// Robust z-score (median and MAD of the column totals) above which a column
/// starts a chain as a shock onset.
constexpr double kOutlierShockThreshold = 5.0;

/// Starts shocks at the free years whose onset column total stands out from the
/// rest, with severity equal to the excess. Large shocks left to the sampler can
/// be absorbed into dkappa together with distorted loadings, a mode the
/// single-year moves rarely leave. Returns the robust scale of the totals
/// (0 when there are too few columns to judge).
double seed_outlier_shocks(ParameterState& s, const ModelSpec& spec, const Eigen::VectorXd& col,
                           const std::vector<int>& free_years);

struct SeverityTuners {
    SliceTuner mu_y;
    SliceTuner log_sigma_y;
    std::vector<SliceTuner> severity;  // per year
};

// Kernels shared by the single- and multi-population samplers. Each updates
// `state` in place and keeps J consistent.
void update_severity_block(ParameterState& state, const ModelSpec& spec,
                           const ImprovementMatrix& z, const std::vector<int>& free_years,
                           SeverityTuners& tuners, Rng& rng, bool adapt);
void update_sigma_r(ParameterState& state, const ModelSpec& spec, const ImprovementMatrix& z,
                    MetropolisTuner& tuner, Rng& rng, bool adapt);
void update_coeff(ParameterState& state, const ModelSpec& spec, const ImprovementMatrix& z,
                  SliceTuner& tuner, Rng& rng, bool adapt);

/// Per-chain Gibbs sweep over all parameter blocks.
class ChainSampler {
public:
    ChainSampler(const ModelSpec& spec, const ImprovementMatrix& z, std::uint64_t seed,
                 int chain_id);

    void sweep(bool adapt);
    const ParameterState& state() const { return state_; }
    ParameterState& mutable_state() { return state_; }

private:
    void update_severity_block(bool adapt);
    void update_occurrences();
    void update_p();
    void update_drift();
    void update_sigma_r(bool adapt);
    void update_sigma_xi(bool adapt);
    void update_coeff(bool adapt);
    void update_dkappa(bool adapt);
    void update_simplex(SimplexBlock which, bool adapt);
    double ssr_from_year(int t) const;

    const ModelSpec& spec_;
    const ImprovementMatrix& z_;
    Rng rng_;
    ParameterState state_;
    std::vector<bool> pinned_;
    std::vector<int> free_years_;
    SeverityTuners severity_tuners_;
    SliceTuner coeff_tuner_;
    std::vector<SliceTuner> dkappa_tuners_, beta_tuners_, beta_jump_tuners_;
    MetropolisTuner sigma_r_tuner_, sigma_xi_tuner_;
};

}  // namespace detail

template <class Callback>
void run_chain(const ModelSpec& spec, const ImprovementMatrix& z, const McmcSettings& settings,
               int chain_id, Callback&& on_iteration) {
    detail::ChainSampler sampler(spec, z, settings.seed, chain_id);
    const int total = settings.burn_in + settings.n_samples;
    for (int it = 0; it < total; ++it) {
        sampler.sweep(it < settings.burn_in);
        on_iteration(it, sampler.state());
    }
}

}  // namespace mortjump
