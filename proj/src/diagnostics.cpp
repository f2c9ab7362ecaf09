#include "mortjump/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "mortjump/error.hpp"

namespace mortjump {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_chains(const ChainSet& chains) {
    if (chains.empty()) throw Error(Errc::ChainTooShort, "no chains");
    for (const auto& c : chains) {
        if (c.size() < 4)
            throw Error(Errc::ChainTooShort, "chains need at least 4 draws, got " +
                                                 std::to_string(c.size()));
        if (c.size() != chains.front().size())
            throw Error(Errc::ChainTooShort, "chains differ in length");
    }
}

// Halves of each chain; the middle draw of an odd-length chain is dropped.
ChainSet split(const ChainSet& chains) {
    ChainSet out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
        out.emplace_back(c.end() - static_cast<long>(half), c.end());
    }
    return out;
}

bool all_constant(const ChainSet& chains) {
    for (const auto& c : chains)
        for (double v : c)
            if (v != c.front()) return false;
    return true;
}

// Pooled average ranks mapped through the normal quantile, (r - 3/8) / (S + 1/4).
ChainSet rank_normalize(const ChainSet& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (std::size_t i = 0; i < chains[c].size(); ++i)
            pooled.emplace_back(chains[c][i], c * chains[0].size() + i);
    std::sort(pooled.begin(), pooled.end());
    const double S = static_cast<double>(pooled.size());
    std::vector<double> z(pooled.size());
    const boost::math::normal_distribution<double> std_normal;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        const double v = boost::math::quantile(std_normal, (rank - 0.375) / (S + 0.25));
        for (std::size_t k = i; k < j; ++k) z[pooled[k].second] = v;
        i = j;
    }
    ChainSet out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c)
        out[c].assign(z.begin() + static_cast<long>(c * chains[0].size()),
                      z.begin() + static_cast<long>((c + 1) * chains[0].size()));
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

double rhat_basic(const ChainSet& chains) {
    const double n = static_cast<double>(chains[0].size());
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& c : chains) {
        means.push_back(mean_of(c));
        vars.push_back(var_of(c));
    }
    const double B = n * var_of(means);
    const double W = mean_of(vars);
    if (!(W > 0.0)) return kNaN;
    return std::sqrt(((n - 1.0) / n * W + B / n) / W);
}

// Biased (1/n) autocovariances of one chain by direct summation.
std::vector<double> autocovariance(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const double m = mean_of(x);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - m;
    std::vector<double> acov(n, 0.0);
    for (std::size_t lag = 0; lag < n; ++lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += d[i] * d[i + lag];
        acov[lag] = s / static_cast<double>(n);
    }
    return acov;
}

// Geyer initial monotone sequence ESS over chains of equal length.
double ess_geyer(const ChainSet& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains[0].size();
    std::vector<std::vector<double>> acov;
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& c : chains) {
        acov.push_back(autocovariance(c));
        means.push_back(mean_of(c));
        vars.push_back(acov.back()[0] * static_cast<double>(n) / static_cast<double>(n - 1));
    }
    const double mean_var = mean_of(vars);
    double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
    if (m > 1) var_plus += var_of(means);
    if (!(var_plus > 0.0)) return kNaN;
    auto mean_acov = [&](std::size_t lag) {
        double s = 0.0;
        for (const auto& a : acov) s += a[lag];
        return s / static_cast<double>(m);
    };
    auto rho_at = [&](std::size_t lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

    std::vector<double> rho(n, 0.0);
    double even = 1.0;
    double odd = rho_at(1);
    rho[0] = even;
    rho[1] = odd;
    std::size_t t = 0;
    while (t + 5 < n && even + odd > 0.0) {
        t += 2;
        even = rho_at(t);
        odd = rho_at(t + 1);
        if (even + odd >= 0.0) {
            rho[t] = even;
            rho[t + 1] = odd;
        }
    }
    const std::size_t max_t = t;
    if (even > 0.0) rho[max_t] = even;
    for (t = 2; t + 2 <= max_t; t += 2) {
        if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
            rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
            rho[t + 1] = rho[t];
        }
    }
    const double total = static_cast<double>(m * n);
    double tau = -1.0 + rho[max_t];
    for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

ChainSet indicator(const ChainSet& chains, double cut) {
    ChainSet out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (double v : chains[c]) out[c].push_back(v <= cut ? 1.0 : 0.0);
    return out;
}

std::vector<double> pooled(const ChainSet& chains) {
    std::vector<double> all;
    for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
    return all;
}

}  // namespace

double quantile(std::vector<double> v, double level) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double split_rhat(const ChainSet& chains) {
    check_chains(chains);
    if (all_constant(chains)) throw Error(Errc::DegenerateChains, "all chains are constant");
    const ChainSet halves = split(chains);
    const double bulk = rhat_basic(rank_normalize(halves));
    const double med = quantile(pooled(chains), 0.5);
    ChainSet folded = halves;
    for (auto& c : folded)
        for (auto& v : c) v = std::abs(v - med);
    const double tail = rhat_basic(rank_normalize(folded));
    // Ranks cap the statistic near 1.8 for fully separated chains, so the raw
    // split value is included to keep large location gaps visible.
    const double raw = rhat_basic(halves);
    double out = kNaN;
    for (double r : {bulk, tail, raw})
        if (!std::isnan(r)) out = std::isnan(out) ? r : std::max(out, r);
    return out;
}

double ess_bulk(const ChainSet& chains) {
    check_chains(chains);
    if (all_constant(chains)) throw Error(Errc::DegenerateChains, "all chains are constant");
    return ess_geyer(rank_normalize(split(chains)));
}

double ess_tail(const ChainSet& chains) {
    check_chains(chains);
    if (all_constant(chains)) throw Error(Errc::DegenerateChains, "all chains are constant");
    const auto all = pooled(chains);
    const ChainSet halves = split(chains);
    double out = std::numeric_limits<double>::infinity();
    for (double level : {0.05, 0.95}) {
        const auto ind = indicator(halves, quantile(all, level));
        if (all_constant(ind)) return kNaN;
        out = std::min(out, ess_geyer(ind));
    }
    return out;
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
    const auto names = parameter_names(draws.spec, draws.n_ages, draws.n_years);
    const int S = draws.size();
    std::vector<std::vector<double>> flat;
    flat.reserve(S);
    for (const auto& s : draws.states) flat.push_back(flatten_state(s, draws.spec));

    int best = 0;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < S; ++i) {
        const double lp = log_prior(draws.states[i], draws.spec) + draws.loglik.row(i).sum();
        if (lp > best_lp) {
            best_lp = lp;
            best = i;
        }
    }

    std::vector<ParameterSummary> table;
    for (std::size_t k = 0; k < names.size(); ++k) {
        ParameterSummary row;
        row.name = names[k];
        std::vector<double> values(S);
        for (int i = 0; i < S; ++i) values[i] = flat[i][k];
        row.mean = mean_of(values);
        row.sd = S > 1 ? std::sqrt(var_of(values)) : 0.0;
        row.map = flat[best][k];
        row.q10 = quantile(values, 0.1);
        row.q90 = quantile(values, 0.9);
        ChainSet chains(draws.n_chains());
        for (int i = 0; i < S; ++i) chains[draws.chain[i]].push_back(values[i]);
        row.rhat = row.ess_bulk = row.ess_tail = kNaN;
        try {
            row.rhat = split_rhat(chains);
            row.ess_bulk = ess_bulk(chains);
            row.ess_tail = ess_tail(chains);
        } catch (const Error& e) {
            if (e.code() != Errc::DegenerateChains && e.code() != Errc::ChainTooShort) throw;
        }
        table.push_back(row);
    }
    return table;
}

double max_scalar_rhat(const std::vector<ParameterSummary>& table, const ModelSpec& spec) {
    double out = kNaN;
    const int n = std::min<int>(n_scalar_parameters(spec), static_cast<int>(table.size()));
    for (int k = 0; k < n; ++k)
        if (!std::isnan(table[k].rhat)) out = std::isnan(out) ? table[k].rhat : std::max(out, table[k].rhat);
    return out;
}

}  // namespace mortjump
