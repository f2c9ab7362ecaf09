#include "mortjump/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "mortjump/diagnostics.hpp"
#include "mortjump/error.hpp"

namespace mortjump {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr std::uint64_t kForecastTag = 0x66637374ull;
}  // namespace

ForecastFan forecast(const std::vector<ParameterState>& states, const ModelSpec& spec,
                     const Eigen::VectorXd& base, int H, std::uint64_t seed, int base_year) {
    if (H < 1) throw Error(Errc::InvalidHorizon, "horizon must be at least 1, got " + std::to_string(H));
    if (states.empty()) throw Error(Errc::ShapeError, "no posterior draws to forecast from");
    const int A = static_cast<int>(base.size());
    ForecastFan fan;
    fan.horizon = H;
    fan.base_year = base_year;
    fan.base_log_rates = base;
    const int S = static_cast<int>(states.size());
    fan.log_rates.resize(S);
    fan.z_draws.resize(S);
    fan.z_mean.resize(S);
    fan.sigma_r.resize(S);

    for (int s = 0; s < S; ++s) {
        const auto& st = states[s];
        if (st.n_ages() != A) throw Error(Errc::ShapeError, "draw and base rates differ in ages");
        Rng rng = make_stream(seed, {kForecastTag, static_cast<std::uint64_t>(s)});
        const int T = st.n_years();
        double jump_prev = T > 0 ? st.jump[T - 1] : 0.0;
        double shock_prev = (T > 0 && st.occurrence[T - 1]) ? st.severity[T - 1] : 0.0;
        auto& lr = fan.log_rates[s];
        auto& zd = fan.z_draws[s];
        auto& zm = fan.z_mean[s];
        lr.resize(A, H);
        zd.resize(A, H);
        zm.resize(A, H);
        fan.sigma_r[s] = st.sigma_r;
        for (int h = 0; h < H; ++h) {
            // Fixed consumption per step keeps streams aligned across structures.
            const double u_n = rnd::uniform(rng);
            const double u_y = rnd::uniform(rng);
            const double xi = rnd::standard_normal(rng);
            const int n = u_n < st.p ? 1 : 0;
            const double y = spec.priors.severity == SeveritySupport::PositiveHalfNormal
                                 ? rnd::positive_truncated_normal_quantile(u_y, st.mu_y, st.sigma_y)
                                 : rnd::normal_quantile(u_y, st.mu_y, st.sigma_y);
            const double shock = n ? y : 0.0;
            double jump = 0.0;
            switch (spec.kind) {
                case JumpKind::None: jump = 0.0; break;
                case JumpKind::Independent: jump = shock; break;
                case JumpKind::AR1: jump = st.coeff * jump_prev + shock; break;
                case JumpKind::MA1: jump = shock + st.coeff * shock_prev; break;
            }
            const double dj = jump - jump_prev;
            const double dkappa = st.drift + st.sigma_xi * xi;
            for (int x = 0; x < A; ++x) {
                zm(x, h) = st.beta[x] * dkappa + st.beta_jump[x] * dj;
                zd(x, h) = zm(x, h) + st.sigma_r * rnd::standard_normal(rng);
                lr(x, h) = (h == 0 ? base[x] : lr(x, h - 1)) + zd(x, h);
            }
            jump_prev = jump;
            shock_prev = shock;
        }
    }
    return fan;
}

ForecastFan forecast(const PosteriorDraws& draws, const Eigen::VectorXd& base, int H,
                     std::uint64_t seed, int base_year) {
    return forecast(draws.states, draws.spec, base, H, seed, base_year);
}

Eigen::MatrixXd shock_increase_quantiles(const std::vector<ParameterState>& states,
                                         const std::vector<double>& levels) {
    if (states.empty()) throw Error(Errc::ShapeError, "no posterior draws");
    const int A = states.front().n_ages();
    Eigen::MatrixXd out(A, static_cast<Eigen::Index>(levels.size()));
    for (int x = 0; x < A; ++x) {
        std::vector<double> per_draw;
        per_draw.reserve(states.size());
        for (const auto& s : states) {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < s.jump.size(); ++t)
                acc += std::expm1(s.beta_jump[x] * s.jump[t]);
            per_draw.push_back(acc / static_cast<double>(s.jump.size()));
        }
        for (std::size_t l = 0; l < levels.size(); ++l) out(x, l) = quantile(per_draw, levels[l]);
    }
    return out;
}

Eigen::MatrixXd shock_increase_quantiles(const PosteriorDraws& draws,
                                         const std::vector<double>& levels) {
    return shock_increase_quantiles(draws.states, levels);
}

double crps_samples(std::vector<double> x, double y) {
    if (x.empty()) throw Error(Errc::ShapeError, "CRPS needs at least one sample");
    const auto S = static_cast<double>(x.size());
    double abs_err = 0.0;
    for (double v : x) abs_err += std::abs(v - y);
    std::sort(x.begin(), x.end());
    // sum over ordered pairs |x_i - x_j| = 2 sum_i (2i - S - 1) x_(i), i = 1..S
    double pair = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        pair += (2.0 * static_cast<double>(i + 1) - S - 1.0) * x[i];
    return abs_err / S - pair / (S * S);
}

double log_score_mixture(const std::vector<double>& means, const std::vector<double>& sds,
                         double y) {
    if (means.empty() || means.size() != sds.size())
        throw Error(Errc::ShapeError, "mixture needs matching, nonempty means and sds");
    std::vector<double> logd(means.size());
    for (std::size_t s = 0; s < means.size(); ++s) {
        const double u = (y - means[s]) / sds[s];
        logd[s] = -kLogSqrt2Pi - std::log(sds[s]) - 0.5 * u * u;
    }
    const double m = *std::max_element(logd.begin(), logd.end());
    double acc = 0.0;
    for (double l : logd) acc += std::exp(l - m);
    return -(m + std::log(acc / static_cast<double>(means.size())));
}

ScoreTable forecast_scores(const ForecastFan& fan, const Eigen::MatrixXd& observed) {
    const int A = fan.n_ages();
    const int H = fan.horizon;
    if (observed.rows() != A || observed.cols() != H)
        throw Error(Errc::ShapeError, "observed rates are " + std::to_string(observed.rows()) +
                                          " x " + std::to_string(observed.cols()) +
                                          ", fan is " + std::to_string(A) + " x " +
                                          std::to_string(H));
    const int S = fan.size();
    ScoreTable t;
    t.log_score.resize(A, H);
    t.crps.resize(A, H);
    t.sq_error.resize(A, H);
    t.abs_error.resize(A, H);
    std::vector<double> means(S);
    std::vector<double> samples(S);
    for (int h = 0; h < H; ++h) {
        for (int x = 0; x < A; ++x) {
            const double prev = h == 0 ? fan.base_log_rates[x] : observed(x, h - 1);
            const double z_obs = observed(x, h) - prev;
            double mean_lr = 0.0;
            for (int s = 0; s < S; ++s) {
                means[s] = fan.z_mean[s](x, h);
                samples[s] = fan.z_draws[s](x, h);
                mean_lr += fan.log_rates[s](x, h);
            }
            mean_lr /= S;
            t.log_score(x, h) = log_score_mixture(means, fan.sigma_r, z_obs);
            t.crps(x, h) = crps_samples(samples, z_obs);
            const double e = mean_lr - observed(x, h);
            t.sq_error(x, h) = e * e;
            t.abs_error(x, h) = std::abs(e);
        }
    }
    t.total_log_score = t.log_score.sum();
    t.total_crps = t.crps.sum();
    t.mse = t.sq_error.mean();
    t.mae = t.abs_error.mean();
    return t;
}

}  // namespace mortjump
