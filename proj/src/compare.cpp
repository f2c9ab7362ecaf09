#include "mortjump/compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mortjump/error.hpp"

namespace mortjump {

namespace {

void check_loglik(const Eigen::MatrixXd& ll) {
    if (ll.rows() < 2 || ll.cols() < 1)
        throw Error(Errc::InvalidLogLik, "need at least 2 draws and 1 observation");
    if (!ll.allFinite()) throw Error(Errc::InvalidLogLik, "log-likelihood has non-finite entries");
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

WaicResult waic(const Eigen::MatrixXd& ll) {
    check_loglik(ll);
    const auto S = static_cast<double>(ll.rows());
    const auto n = ll.cols();
    WaicResult r;
    r.lpd_pointwise.resize(n);
    r.p_waic_pointwise.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd col = ll.col(i);
        r.lpd_pointwise[i] = log_sum_exp(col) - std::log(S);
        const double mean = col.mean();
        r.p_waic_pointwise[i] = (col.array() - mean).square().sum() / (S - 1.0);
    }
    r.lpd_hat = r.lpd_pointwise.sum();
    r.p_waic = r.p_waic_pointwise.sum();
    r.waic = -2.0 * r.lpd_hat + 2.0 * r.p_waic;
    return r;
}

std::pair<double, double> gpd_fit(const std::vector<double>& x) {
    constexpr double kPrior = 3.0;
    constexpr int kMinGrid = 30;
    const auto N = static_cast<int>(x.size());
    const int M = kMinGrid + static_cast<int>(std::floor(std::sqrt(static_cast<double>(N))));
    const double xstar = x[static_cast<std::size_t>(std::floor(N / 4.0 + 0.5)) - 1];
    std::vector<double> theta(M);
    std::vector<double> l_theta(M);
    for (int j = 1; j <= M; ++j) {
        theta[j - 1] = 1.0 / x[N - 1] + (1.0 - std::sqrt(M / (j - 0.5))) / kPrior / xstar;
        const double a = -theta[j - 1];
        double k = 0.0;
        for (double xi : x) k += std::log1p(a * xi);
        k /= N;
        l_theta[j - 1] = N * (std::log(a / k) - k - 1.0);
    }
    const double lmax = *std::max_element(l_theta.begin(), l_theta.end());
    double wsum = 0.0;
    for (double l : l_theta) wsum += std::exp(l - lmax);
    double theta_hat = 0.0;
    for (int j = 0; j < M; ++j) theta_hat += theta[j] * std::exp(l_theta[j] - lmax) / wsum;
    double k = 0.0;
    for (double xi : x) k += std::log1p(-theta_hat * xi);
    k /= N;
    const double sigma = -k / theta_hat;
    // Weakly informative prior pulling k toward 0.5 with weight 10.
    k = k * N / (N + 10.0) + 10.0 * 0.5 / (N + 10.0);
    if (std::isnan(k)) k = std::numeric_limits<double>::infinity();
    return {k, sigma};
}

namespace {

double gpd_quantile(double p, double k, double sigma) {
    if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
    return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

}  // namespace

PsisResult psis_smooth(const Eigen::VectorXd& log_ratios) {
    const auto S = log_ratios.size();
    const double max_lr = log_ratios.maxCoeff();
    PsisResult r;
    r.log_weights = log_ratios.array() - max_lr;
    r.pareto_k = std::numeric_limits<double>::infinity();
    const auto tail_len = static_cast<Eigen::Index>(std::ceil(0.2 * static_cast<double>(S)));
    if (tail_len >= 5 && tail_len < S) {
        std::vector<Eigen::Index> order(S);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
            return r.log_weights[a] < r.log_weights[b];
        });
        const Eigen::Index first = S - tail_len;
        const double lo = r.log_weights[order[first]];
        const double hi = r.log_weights[order[S - 1]];
        if (std::abs(hi - lo) < std::numeric_limits<double>::epsilon() / 100.0) {
            r.pareto_k = 0.0;
        } else {
            const double cutoff = r.log_weights[order[first - 1]];
            const double exp_cutoff = std::exp(cutoff);
            std::vector<double> exceed(tail_len);
            for (Eigen::Index i = 0; i < tail_len; ++i)
                exceed[i] = std::exp(r.log_weights[order[first + i]]) - exp_cutoff;
            const auto [k, sigma] = gpd_fit(exceed);
            r.pareto_k = k;
            if (std::isfinite(k) && sigma > 0.0) {
                for (Eigen::Index i = 0; i < tail_len; ++i) {
                    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(tail_len);
                    r.log_weights[order[first + i]] = std::log(gpd_quantile(p, k, sigma) + exp_cutoff);
                }
                r.smoothed = true;
            }
        }
    }
    // Truncate at the largest raw weight.
    r.log_weights = r.log_weights.array().min(0.0) + max_lr;
    return r;
}

int LooResult::n_high_k(double threshold) const {
    return static_cast<int>((pareto_k.array() > threshold).count());
}

LooResult loo_cv(const Eigen::MatrixXd& ll) {
    check_loglik(ll);
    const auto n = ll.cols();
    LooResult r;
    r.lpd_pointwise.resize(n);
    r.pareto_k.resize(n);
    int short_tail = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd col = ll.col(i);
        const auto ps = psis_smooth(-col);
        if (!ps.smoothed && std::isinf(ps.pareto_k)) ++short_tail;
        r.pareto_k[i] = ps.pareto_k;
        r.lpd_pointwise[i] = log_sum_exp(ps.log_weights + col) - log_sum_exp(ps.log_weights);
    }
    if (short_tail > 0)
        r.warnings.push_back(std::to_string(short_tail) +
                             " observations used raw importance sampling (tail too short)");
    if (r.n_high_k() > 0)
        r.warnings.push_back(std::to_string(r.n_high_k()) + " observations have pareto_k > 0.7");
    r.lpd_loo = r.lpd_pointwise.sum();
    r.deviance = -2.0 * r.lpd_loo;
    return r;
}

Comparison compare_models(const std::vector<std::string>& labels,
                          const std::vector<Eigen::MatrixXd>& logliks) {
    if (labels.size() != logliks.size())
        throw Error(Errc::ShapeError, "labels and log-likelihood matrices differ in number");
    Comparison out;
    for (std::size_t m = 0; m < labels.size(); ++m) {
        out.rows.push_back({labels[m], waic(logliks[m]), loo_cv(logliks[m])});
        if (out.best < 0 || out.rows.back().waic.waic < out.rows[out.best].waic.waic)
            out.best = static_cast<int>(m);
    }
    return out;
}

}  // namespace mortjump
