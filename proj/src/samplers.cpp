#include "mortjump/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace mortjump {

void SliceTuner::observe(double move, bool adapt) {
    if (!adapt) return;
    sum_moves_ += std::abs(move);
    ++count_;
    if (count_ >= 10) width_ = std::clamp(2.0 * sum_moves_ / count_, 1e-8, 1e4);
}

void MetropolisTuner::observe(bool accepted, bool adapt) {
    ++proposals_;
    accepted_ += accepted;
    if (!adapt) return;
    const double gain = 1.0 / std::sqrt(static_cast<double>(proposals_));
    log_step_ += gain * ((accepted ? 1.0 : 0.0) - 0.44);
    log_step_ = std::clamp(log_step_, -20.0, 5.0);
}

NormalMoments drift_conditional(const ParameterState& s, const ImprovementMatrix& z,
                                const PriorConfig& priors) {
    double precision = 1.0 / (priors.drift_sd * priors.drift_sd);
    double weighted = priors.drift_mean * precision;
    const double xi_prec = 1.0 / (s.sigma_xi * s.sigma_xi);
    for (Eigen::Index c = 1; c < s.dkappa.size(); ++c) {
        precision += xi_prec;
        weighted += s.dkappa[c] * xi_prec;
    }
    // The first improvement column carries dkappa[0] = d directly.
    const double r_prec = 1.0 / (s.sigma_r * s.sigma_r);
    const double dj = s.jump[1] - s.jump[0];
    for (Eigen::Index x = 0; x < z.values.rows(); ++x) {
        const double resid = z.values(x, 0) - s.beta_jump[x] * dj;
        precision += s.beta[x] * s.beta[x] * r_prec;
        weighted += s.beta[x] * resid * r_prec;
    }
    return {weighted / precision, 1.0 / std::sqrt(precision)};
}

double gibbs_drift(const ParameterState& s, const ImprovementMatrix& z, const PriorConfig& priors,
                   Rng& rng) {
    const auto m = drift_conditional(s, z, priors);
    return rnd::normal(rng, m.mean, m.sd);
}

std::pair<double, double> p_conditional(const std::vector<int>& occurrence,
                                        const std::vector<bool>& pinned,
                                        const PriorConfig& priors) {
    int k = 0;
    int m = 0;
    for (std::size_t t = 0; t < occurrence.size(); ++t) {
        if (pinned[t]) continue;
        ++m;
        k += occurrence[t];
    }
    return {priors.p_a + k, priors.p_b + (m - k)};
}

double gibbs_p(const std::vector<int>& occurrence, const std::vector<bool>& pinned,
               const PriorConfig& priors, Rng& rng) {
    const auto [a, b] = p_conditional(occurrence, pinned, priors);
    double p = rnd::beta(rng, a, b);
    // Keep p inside the open interval required by the state invariants.
    return std::clamp(p, 1e-300, std::nextafter(1.0, 0.0));
}

namespace {

double ssr_columns(const ParameterState& s, const ImprovementMatrix& z, int first) {
    return residual_sum_of_squares(s, z, std::max(0, first), -1);
}

}  // namespace

double occurrence_probability(const ParameterState& state, const ModelSpec& spec,
                              const ImprovementMatrix& z, int t) {
    const auto pins = spec.pinned(state.n_years());
    if (t < 0 || t >= state.n_years() || pins[t])
        throw Error(Errc::PinnedIndex, "occurrence index " + std::to_string(t) + " is pinned");
    ParameterState s = state;
    s.occurrence[t] = 0;
    s.refresh_jump(spec.kind);
    const double ssr0 = ssr_columns(s, z, t - 1);
    s.occurrence[t] = 1;
    s.refresh_jump(spec.kind);
    const double ssr1 = ssr_columns(s, z, t - 1);
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
    const double log_odds =
        std::log(s.p) - std::log1p(-s.p) - (ssr1 - ssr0) * inv2var;
    return 1.0 / (1.0 + std::exp(-log_odds));
}

int gibbs_binary_N(const ParameterState& state, const ModelSpec& spec, const ImprovementMatrix& z,
                   int t, Rng& rng) {
    const double prob = occurrence_probability(state, spec, z, t);
    return rnd::uniform(rng) < prob ? 1 : 0;
}

ShockLikelihood shock_likelihood(const ParameterState& state, const ModelSpec& spec,
                                 const ImprovementMatrix& z, int t) {
    const auto pins = spec.pinned(state.n_years());
    if (t < 0 || t >= state.n_years() || pins[t])
        throw Error(Errc::PinnedIndex, "occurrence index " + std::to_string(t) + " is pinned");
    const int T = state.n_years();
    Eigen::VectorXd base_jump = state.jump;
    if (state.occurrence[t]) {
        std::vector<int> occ = state.occurrence;
        occ[t] = 0;
        base_jump = jump_path(spec.kind, occ, state.severity, state.coeff);
    }
    std::vector<int> unit(T, 0);
    unit[t] = 1;
    const Eigen::VectorXd impulse = jump_path(spec.kind, unit, Eigen::VectorXd::Ones(T), state.coeff);
    double H = 0.0;
    double B = 0.0;
    const auto A = z.values.rows();
    for (int c = std::max(0, t - 1); c < T - 1; ++c) {
        const double dg = impulse[c + 1] - impulse[c];
        if (dg == 0.0) continue;
        const double dj = base_jump[c + 1] - base_jump[c];
        for (Eigen::Index x = 0; x < A; ++x) {
            const double r0 = z.values(x, c) - state.beta[x] * state.dkappa[c] -
                              state.beta_jump[x] * dj;
            const double h = state.beta_jump[x] * dg;
            H += h * h;
            B += r0 * h;
        }
    }
    const double var = state.sigma_r * state.sigma_r;
    return {H / var, B / var};
}

CollapsedShock collapse_severity(const ShockLikelihood& lik, double mu, double sd,
                                 SeveritySupport support) {
    const double prior_prec = 1.0 / (sd * sd);
    const double prec = prior_prec + lik.quadratic;
    const double mean = (mu * prior_prec + lik.linear) / prec;
    CollapsedShock out;
    out.mean = mean;
    out.sd = 1.0 / std::sqrt(prec);
    out.log_bayes_factor =
        0.5 * prec * mean * mean - 0.5 * mu * mu * prior_prec - std::log(sd) - 0.5 * std::log(prec);
    if (support == SeveritySupport::PositiveHalfNormal)
        out.log_bayes_factor +=
            density::log_normal_cdf(mean * std::sqrt(prec)) - density::log_normal_cdf(mu / sd);
    return out;
}

std::pair<int, double> gibbs_occurrence_severity(const ParameterState& state,
                                                 const ModelSpec& spec,
                                                 const ImprovementMatrix& z, int t, Rng& rng) {
    const auto support = spec.priors.severity;
    const auto post = collapse_severity(shock_likelihood(state, spec, z, t), state.mu_y,
                                        state.sigma_y, support);
    const double u_n = rnd::uniform(rng);
    const double u_y = rnd::uniform(rng);
    const double log_odds = std::log(state.p) - std::log1p(-state.p) + post.log_bayes_factor;
    const int n = u_n < 1.0 / (1.0 + std::exp(-log_odds)) ? 1 : 0;
    const double mean = n ? post.mean : state.mu_y;
    const double sd = n ? post.sd : state.sigma_y;
    const double y = support == SeveritySupport::PositiveHalfNormal
                         ? rnd::positive_truncated_normal_quantile(u_y, mean, sd)
                         : rnd::normal_quantile(u_y, mean, sd);
    return {n, y};
}

namespace {

// Impulse response of J to a unit shock at t, as increments per column.
Eigen::VectorXd impulse_increments(const ParameterState& s, JumpKind kind, int t) {
    const int T = s.n_years();
    std::vector<int> unit(T, 0);
    unit[t] = 1;
    const Eigen::VectorXd g = jump_path(kind, unit, Eigen::VectorXd::Ones(T), s.coeff);
    return g.tail(T - 1) - g.head(T - 1);
}

double severity_proposal_sd(const ParameterState& s) { return std::max(s.sigma_xi, 1e-3); }

}  // namespace

namespace detail {

Eigen::VectorXd first_shock_loading_alpha(const ParameterState& shock_free,
                                          const ImprovementMatrix& z, int t, double y) {
    const int A = shock_free.n_ages();
    Eigen::VectorXd m(A);
    for (int x = 0; x < A; ++x) {
        const double r = z.values(x, t - 1) - shock_free.beta[x] * shock_free.dkappa[t - 1];
        m[x] = std::max(shock_free.beta[x] + r / y, 1e-3);
    }
    return (1.0 + kFirstShockConcentration * (m / m.sum()).array()).matrix();
}

Eigen::VectorXd draw_dirichlet(const Eigen::VectorXd& alpha, Rng& rng) {
    Eigen::VectorXd g(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) g[i] = rnd::gamma(rng, alpha[i]);
    return g / g.sum();
}

int active_shocks(const std::vector<int>& occurrence) {
    return static_cast<int>(std::count(occurrence.begin(), occurrence.end(), 1));
}

double seed_outlier_shocks(ParameterState& s, const ModelSpec& spec, const Eigen::VectorXd& col,
                           const std::vector<int>& free_years) {
    const Eigen::Index C = col.size();
    if (C < 4) return 0.0;
    std::vector<double> rest(col.data() + 1, col.data() + C);
    auto median = [](std::vector<double> v) {
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        return *mid;
    };
    const double centre = median(rest);
    for (double& v : rest) v = std::abs(v - centre);
    const double scale = std::max(1.4826 * median(rest), 1e-8);
    const bool positive = spec.priors.severity == SeveritySupport::PositiveHalfNormal;
    for (int t : free_years) {
        s.refresh_jump(spec.kind);
        const double excess = col[t - 1] - centre - (s.jump[t] - s.jump[t - 1]);
        if (excess > kOutlierShockThreshold * scale ||
            (!positive && -excess > kOutlierShockThreshold * scale)) {
            s.occurrence[t] = 1;
            s.severity[t] = excess;
        }
    }
    s.refresh_jump(spec.kind);
    return scale;
}

}  // namespace detail

bool shift_occurrence_move(ParameterState& s, const ModelSpec& spec, const ImprovementMatrix& z,
                           int t, Rng& rng) {
    const auto support = spec.priors.severity;
    const double u_y = rnd::uniform(rng);
    const double u_acc = rnd::uniform(rng);
    const Eigen::VectorXd dg = impulse_increments(s, spec.kind, t);
    if (dg[0] != 0.0) return false;  // would move the pinned first increment
    const int first = std::max(0, t - 1);
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
    const Eigen::VectorXd alpha_j = spec.priors.beta_jump_concentration(s.n_ages());
    auto local = [&](const ParameterState& x) {
        double lp = -residual_sum_of_squares(x, z, first) * inv2var;
        for (Eigen::Index c = std::max(1, first); c < x.dkappa.size(); ++c)
            lp += density::normal(x.dkappa[c], x.drift, x.sigma_xi);
        return lp + density::dirichlet(x.beta_jump, alpha_j);
    };
    auto draw_y = [&](double mean, double sd) {
        return support == SeveritySupport::PositiveHalfNormal
                   ? rnd::positive_truncated_normal_quantile(u_y, mean, sd)
                   : rnd::normal_quantile(u_y, mean, sd);
    };
    const double sd = severity_proposal_sd(s);
    // Without other shocks the jump loadings are unconstrained by the data, so a
    // first shock also proposes them; the reverse move redraws them from the prior.
    const bool birth = !s.occurrence[t];
    const bool first_shock = detail::active_shocks(s.occurrence) == (birth ? 0 : 1);
    ParameterState next = s;
    double log_ratio = 0.0;
    if (birth) {
        const double centre = s.dkappa[t - 1] - s.drift;
        const double y = draw_y(centre, sd);
        if (first_shock) {
            const Eigen::VectorXd alpha = detail::first_shock_loading_alpha(s, z, t, y);
            next.beta_jump = detail::draw_dirichlet(alpha, rng);
            log_ratio += density::dirichlet(s.beta_jump, alpha_j) -
                         density::dirichlet(next.beta_jump, alpha);
        }
        next.occurrence[t] = 1;
        next.severity[t] = y;
        for (Eigen::Index c = 1; c < next.dkappa.size(); ++c) next.dkappa[c] -= y * dg[c];
        next.refresh_jump(spec.kind);
        log_ratio += std::log(s.p) - std::log1p(-s.p) +
                     density::severity(y, s.mu_y, s.sigma_y, support) -
                     density::severity(y, centre, sd, support);
    } else {
        const double y_old = s.severity[t];
        next.occurrence[t] = 0;
        for (Eigen::Index c = 1; c < next.dkappa.size(); ++c) next.dkappa[c] += y_old * dg[c];
        next.severity[t] = draw_y(s.mu_y, s.sigma_y);
        next.refresh_jump(spec.kind);
        if (first_shock) {
            next.beta_jump = detail::draw_dirichlet(alpha_j, rng);
            const Eigen::VectorXd alpha = detail::first_shock_loading_alpha(next, z, t, y_old);
            log_ratio += density::dirichlet(s.beta_jump, alpha) -
                         density::dirichlet(next.beta_jump, alpha_j);
        }
        const double centre = next.dkappa[t - 1] - next.drift;
        log_ratio += std::log1p(-s.p) - std::log(s.p) -
                     density::severity(y_old, s.mu_y, s.sigma_y, support) +
                     density::severity(y_old, centre, sd, support);
    }
    log_ratio += local(next) - local(s);
    if (std::log(u_acc) < log_ratio) {
        s = std::move(next);
        return true;
    }
    return false;
}

Eigen::VectorXd sample_simplex_block(const ParameterState& state, const ModelSpec& spec,
                                     const ImprovementMatrix& z, SimplexBlock which, Rng& rng,
                                     std::vector<SliceTuner>* tuners, bool adapt) {
    const int A = state.n_ages();
    const Eigen::VectorXd alpha = which == SimplexBlock::Beta
                                      ? spec.priors.beta_concentration(A)
                                      : spec.priors.beta_jump_concentration(A);
    ParameterState s = state;
    Eigen::VectorXd& target = which == SimplexBlock::Beta ? s.beta : s.beta_jump;

    // Given the simplex point the Gamma total is independent Gamma(sum alpha, 1);
    // drawing it refreshes the auxiliary unnormalised coordinates exactly.
    const double total = rnd::gamma(rng, alpha.sum());
    Eigen::VectorXd log_b = (target.array() * total).log().matrix();
    double sum_b = log_b.array().exp().sum();
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);

    for (int x = 0; x < A; ++x) {
        const double others = sum_b - std::exp(log_b[x]);
        auto log_density = [&](double u) {
            const double bx = std::exp(u);
            const double sum = others + bx;
            if (!(bx > 0.0) || !std::isfinite(sum)) return kLogZero;
            for (int i = 0; i < A; ++i) target[i] = (i == x ? bx : std::exp(log_b[i])) / sum;
            return alpha[x] * u - bx - residual_sum_of_squares(s, z) * inv2var;
        };
        const double width = tuners ? (*tuners)[x].width() : 1.0;
        const double next = slice_sample(log_density, log_b[x], width, kSliceMaxSteps, rng);
        if (tuners) (*tuners)[x].observe(next - log_b[x], adapt);
        log_b[x] = next;
        sum_b = others + std::exp(next);
    }
    Eigen::VectorXd out = (log_b.array() - log_b.maxCoeff()).exp().matrix();
    return out / out.sum();
}

int PosteriorDraws::n_chains() const {
    return chain.empty() ? 0 : *std::max_element(chain.begin(), chain.end()) + 1;
}

namespace detail {

void update_severity_block(ParameterState& s, const ModelSpec& spec, const ImprovementMatrix& z,
                           const std::vector<int>& free_years, SeverityTuners& tuners, Rng& rng,
                           bool adapt) {
    const auto& pr = spec.priors;
    if (tuners.severity.size() != static_cast<std::size_t>(s.n_years()))
        tuners.severity.assign(s.n_years(), SliceTuner());
    // (mu_Y, sigma_Y) are updated with the severities of non-occurring years
    // integrated out; those severities are then redrawn from their exact
    // conditional, which is the prior because they do not enter the likelihood.
    auto active_severity = [&](double mu, double sd) {
        double out = 0.0;
        for (int t : free_years)
            if (s.occurrence[t]) out += density::severity(s.severity[t], mu, sd, pr.severity);
        return out;
    };
    {
        auto f = [&](double mu) {
            const double lp = density::half_normal(mu, pr.mu_y_sd);
            return lp == kLogZero ? kLogZero : lp + active_severity(mu, s.sigma_y);
        };
        const double next = slice_sample(f, s.mu_y, tuners.mu_y.width(), kSliceMaxSteps, rng);
        tuners.mu_y.observe(next - s.mu_y, adapt);
        s.mu_y = next;
    }
    {
        auto f = [&](double u) {
            const double sd = std::exp(u);
            if (!(sd > 0.0) || !std::isfinite(sd)) return kLogZero;
            return density::half_normal(sd, pr.sigma_y_sd) + u + active_severity(s.mu_y, sd);
        };
        const double u0 = std::log(s.sigma_y);
        const double next = slice_sample(f, u0, tuners.log_sigma_y.width(), kSliceMaxSteps, rng);
        tuners.log_sigma_y.observe(next - u0, adapt);
        s.sigma_y = std::exp(next);
    }
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
    for (int t : free_years) {
        if (!s.occurrence[t]) {
            s.severity[t] = pr.severity == SeveritySupport::PositiveHalfNormal
                                ? rnd::positive_truncated_normal(rng, s.mu_y, s.sigma_y)
                                : rnd::normal(rng, s.mu_y, s.sigma_y);
            continue;
        }
        auto f = [&](double y) {
            const double lp = density::severity(y, s.mu_y, s.sigma_y, pr.severity);
            if (lp == kLogZero) return kLogZero;
            s.severity[t] = y;
            s.refresh_jump(spec.kind);
            return lp - ssr_columns(s, z, t - 1) * inv2var;
        };
        const double y0 = s.severity[t];
        const double next = slice_sample(f, y0, tuners.severity[t].width(), kSliceMaxSteps, rng);
        tuners.severity[t].observe(next - y0, adapt);
        s.severity[t] = next;
        s.refresh_jump(spec.kind);
    }
}

void update_sigma_r(ParameterState& s, const ModelSpec& spec, const ImprovementMatrix& z,
                    MetropolisTuner& tuner, Rng& rng, bool adapt) {
    const double ssr = residual_sum_of_squares(s, z);
    const double n = static_cast<double>(z.values.size());
    const double prior_sd = spec.priors.sigma_r_sd;
    auto f = [&](double u) {
        const double sigma = std::exp(u);
        return density::half_normal(sigma, prior_sd) + u - n * u - 0.5 * ssr / (sigma * sigma);
    };
    const auto r = rw_metropolis(f, std::log(s.sigma_r), tuner.step(), rng);
    tuner.observe(r.accepted, adapt);
    s.sigma_r = std::exp(r.value);
}

void update_coeff(ParameterState& s, const ModelSpec& spec, const ImprovementMatrix& z,
                  SliceTuner& tuner, Rng& rng, bool adapt) {
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
    auto f = [&](double a) {
        const double lp = density::coeff(a, spec.priors.coeff);
        if (!(lp > kLogZero) || !std::isfinite(lp)) return kLogZero;
        s.coeff = a;
        s.refresh_jump(spec.kind);
        return lp - residual_sum_of_squares(s, z) * inv2var;
    };
    const double a0 = s.coeff;
    const double next = slice_sample(f, a0, tuner.width(), kSliceMaxSteps, rng);
    tuner.observe(next - a0, adapt);
    s.coeff = next;
    s.refresh_jump(spec.kind);
}

ChainSampler::ChainSampler(const ModelSpec& spec, const ImprovementMatrix& z, std::uint64_t seed,
                           int chain_id)
    : spec_(spec), z_(z), rng_(make_stream(seed, {0x6d636d63ull, static_cast<std::uint64_t>(chain_id)})) {
    const int A = z.n_ages();
    const int C = z.n_cols();
    const int T = C + 1;
    spec.priors.validate(A);
    pinned_ = spec.pinned(T);
    for (int t = 0; t < T; ++t)
        if (!pinned_[t]) free_years_.push_back(t);

    // Overdispersed start: column sums identify dkappa + dJ under sum-to-one loadings.
    auto& s = state_;
    s = make_state(A, T);
    Eigen::VectorXd col = z.values.colwise().sum().transpose();
    const double mean_rest = C > 1 ? col.tail(C - 1).mean() : col[0];
    double sd = 0.0;
    for (int c = 1; c < C; ++c) sd += (col[c] - mean_rest) * (col[c] - mean_rest);
    sd = C > 2 ? std::sqrt(sd / (C - 2)) : 0.1;
    sd = std::max(sd, 1e-3);
    s.drift = mean_rest + 0.5 * sd / std::sqrt(std::max(1, C - 1)) * rnd::standard_normal(rng_);
    for (int c = 1; c < C; ++c) s.dkappa[c] = col[c] + 0.1 * sd * rnd::standard_normal(rng_);
    s.dkappa[0] = s.drift;
    s.sigma_xi = sd * std::exp(0.2 * rnd::standard_normal(rng_));

    for (auto* block : {&s.beta, &s.beta_jump}) {
        for (int x = 0; x < A; ++x) (*block)[x] = rnd::gamma(rng_, 20.0);
        *block /= block->sum();
    }
    double ssr = residual_sum_of_squares(s, z);
    s.sigma_r = std::max(1e-4, std::sqrt(ssr / (A * C))) * std::exp(0.2 * rnd::standard_normal(rng_));

    s.p = 0.02 + 0.06 * rnd::uniform(rng_);
    s.mu_y = 0.5 + rnd::uniform(rng_);
    s.sigma_y = 0.5 + rnd::uniform(rng_);
    const double coeff_start = 0.05 + 0.45 * rnd::uniform(rng_);
    s.coeff = spec.fixed_coeff ? *spec.fixed_coeff : (has_coeff(spec.kind) ? coeff_start : 0.0);
    for (int t : free_years_)
        s.severity[t] = spec.priors.severity == SeveritySupport::PositiveHalfNormal
                            ? rnd::positive_truncated_normal(rng_, s.mu_y, s.sigma_y)
                            : rnd::normal(rng_, s.mu_y, s.sigma_y);
    if (!has_jumps(spec.kind)) {
        s.beta_jump = Eigen::VectorXd::Constant(A, 1.0 / A);
        s.severity.setZero();
    } else {
        const double robust_sd = detail::seed_outlier_shocks(s, spec, col, free_years_);
        if (detail::active_shocks(s.occurrence) > 0) {
            // The plain column sd is inflated by the shocks; at that sigma_xi the
            // first sweep would fold them straight back into dkappa.
            s.sigma_xi = robust_sd * std::exp(0.2 * rnd::standard_normal(rng_));
            for (int c = 1; c < C; ++c) {
                const double dj = s.jump[c + 1] - s.jump[c];
                if (dj != 0.0)
                    s.dkappa[c] = col[c] - dj + 0.1 * robust_sd * rnd::standard_normal(rng_);
            }
        }
    }
    s.refresh_jump(spec.kind);

    severity_tuners_.severity.assign(T, SliceTuner());
    dkappa_tuners_.assign(C, SliceTuner());
    beta_tuners_.assign(A, SliceTuner());
    beta_jump_tuners_.assign(A, SliceTuner());
    sigma_r_tuner_ = MetropolisTuner(0.1);
    sigma_xi_tuner_ = MetropolisTuner(0.2);
}

double ChainSampler::ssr_from_year(int t) const { return ssr_columns(state_, z_, t - 1); }

void ChainSampler::sweep(bool adapt) {
    if (has_jumps(spec_.kind)) {
        update_severity_block(adapt);
        update_occurrences();
        update_p();
    }
    update_drift();
    update_sigma_r(adapt);
    update_sigma_xi(adapt);
    if (has_coeff(spec_.kind) && !spec_.fixed_coeff) update_coeff(adapt);
    update_dkappa(adapt);
    update_simplex(SimplexBlock::Beta, adapt);
    if (has_jumps(spec_.kind)) update_simplex(SimplexBlock::BetaJump, adapt);
}

void ChainSampler::update_severity_block(bool adapt) {
    detail::update_severity_block(state_, spec_, z_, free_years_, severity_tuners_, rng_, adapt);
}

void ChainSampler::update_occurrences() {
    auto& s = state_;
    for (int t : free_years_) {
        const auto [n, y] = gibbs_occurrence_severity(s, spec_, z_, t, rng_);
        s.occurrence[t] = n;
        s.severity[t] = y;
        s.refresh_jump(spec_.kind);
    }
    for (int t : free_years_) shift_occurrence_move(s, spec_, z_, t, rng_);
}

void ChainSampler::update_p() { state_.p = gibbs_p(state_.occurrence, pinned_, spec_.priors, rng_); }

void ChainSampler::update_drift() {
    state_.drift = gibbs_drift(state_, z_, spec_.priors, rng_);
    state_.dkappa[0] = state_.drift;
}

void ChainSampler::update_sigma_r(bool adapt) {
    detail::update_sigma_r(state_, spec_, z_, sigma_r_tuner_, rng_, adapt);
}

void ChainSampler::update_sigma_xi(bool adapt) {
    auto& s = state_;
    double ss = 0.0;
    for (Eigen::Index c = 1; c < s.dkappa.size(); ++c)
        ss += (s.dkappa[c] - s.drift) * (s.dkappa[c] - s.drift);
    const double m = static_cast<double>(s.dkappa.size() - 1);
    const double prior_sd = spec_.priors.sigma_xi_sd;
    auto f = [&](double u) {
        const double sigma = std::exp(u);
        return density::half_normal(sigma, prior_sd) + u - m * u - 0.5 * ss / (sigma * sigma);
    };
    const auto r = rw_metropolis(f, std::log(s.sigma_xi), sigma_xi_tuner_.step(), rng_);
    sigma_xi_tuner_.observe(r.accepted, adapt);
    s.sigma_xi = std::exp(r.value);
}

void ChainSampler::update_coeff(bool adapt) {
    detail::update_coeff(state_, spec_, z_, coeff_tuner_, rng_, adapt);
}

void ChainSampler::update_dkappa(bool adapt) {
    auto& s = state_;
    const int A = z_.n_ages();
    const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
    for (Eigen::Index c = 1; c < s.dkappa.size(); ++c) {
        const double dj = s.jump[c + 1] - s.jump[c];
        auto f = [&](double v) {
            double ssr = 0.0;
            for (int x = 0; x < A; ++x) {
                const double r = z_.values(x, c) - s.beta[x] * v - s.beta_jump[x] * dj;
                ssr += r * r;
            }
            const double u = (v - s.drift) / s.sigma_xi;
            return -0.5 * u * u - ssr * inv2var;
        };
        const double v0 = s.dkappa[c];
        const double next = slice_sample(f, v0, dkappa_tuners_[c].width(), kSliceMaxSteps, rng_);
        dkappa_tuners_[c].observe(next - v0, adapt);
        s.dkappa[c] = next;
    }
}

void ChainSampler::update_simplex(SimplexBlock which, bool adapt) {
    auto& tuners = which == SimplexBlock::Beta ? beta_tuners_ : beta_jump_tuners_;
    auto next = sample_simplex_block(state_, spec_, z_, which, rng_, &tuners, adapt);
    (which == SimplexBlock::Beta ? state_.beta : state_.beta_jump) = std::move(next);
}

}  // namespace detail

PosteriorDraws run_mcmc(const ModelSpec& spec, const ImprovementMatrix& z,
                        const McmcSettings& settings) {
    settings.validate();
    if (z.n_cols() < 2) throw Error(Errc::TooFewYears, "need at least three years of rates");
    const int A = z.n_ages();
    const int C = z.n_cols();
    const int T = C + 1;
    spec.priors.validate(A);

    PosteriorDraws out;
    out.spec = spec;
    out.settings = settings;
    out.n_ages = A;
    out.n_years = T;
    const auto pins = spec.pinned(T);
    if (has_coeff(spec.kind) && std::all_of(pins.begin(), pins.end(), [](bool b) { return b; }))
        out.warnings.push_back(
            "CoeffUnidentified: every occurrence is pinned, the coefficient follows its prior");

    const int per_chain = settings.retained_per_chain();
    struct ChainOutput {
        std::vector<ParameterState> states;
        std::vector<int> iterations;
        Eigen::MatrixXd loglik;
    };
    std::vector<ChainOutput> results(settings.n_chains);

    auto run_one = [&](int chain_id) {
        auto& res = results[chain_id];
        res.states.reserve(per_chain);
        res.loglik.resize(per_chain, A * C);
        run_chain(spec, z, settings, chain_id, [&](int it, const ParameterState& s) {
            if (it < settings.burn_in) return;
            const int k = it - settings.burn_in + 1;
            if (k % settings.thin != 0 || static_cast<int>(res.states.size()) >= per_chain) return;
            const auto ll = log_likelihood(s, z);
            const int row = static_cast<int>(res.states.size());
            for (int x = 0; x < A; ++x)
                for (int c = 0; c < C; ++c) res.loglik(row, x * C + c) = ll.pointwise(x, c);
            res.states.push_back(s);
            res.iterations.push_back(it + 1);
        });
    };

    const int n_threads = std::max(1, settings.threads == 0 ? settings.n_chains : settings.threads);
    for (int first = 0; first < settings.n_chains; first += n_threads) {
        std::vector<std::thread> workers;
        const int last = std::min(settings.n_chains, first + n_threads);
        for (int c = first; c < last; ++c) workers.emplace_back(run_one, c);
        for (auto& w : workers) w.join();
    }

    out.loglik.resize(static_cast<Eigen::Index>(settings.n_chains) * per_chain, A * C);
    for (int c = 0; c < settings.n_chains; ++c) {
        auto& res = results[c];
        out.loglik.middleRows(static_cast<Eigen::Index>(c) * per_chain, per_chain) = res.loglik;
        for (int i = 0; i < per_chain; ++i) {
            out.states.push_back(std::move(res.states[i]));
            out.chain.push_back(c);
            out.iteration.push_back(res.iterations[i]);
        }
    }
    return out;
}

}  // namespace mortjump
