#include "mortjump/synth.hpp"

#include <cmath>

#include "mortjump/compare.hpp"
#include "mortjump/diagnostics.hpp"
#include "mortjump/error.hpp"

namespace mortjump {

SimulatedPanel simulate_dataset(const ParameterState& truth, JumpKind kind,
                                const Eigen::VectorXd& base_log_rates, std::uint64_t seed) {
    const int A = truth.n_ages();
    const int T = truth.n_years();
    if (base_log_rates.size() != A)
        throw Error(Errc::ShapeError, "base log rates need one entry per age group");
    if (T < 2) throw Error(Errc::TooFewYears, "need at least two years");
    Rng rng = make_stream(seed, {0x73796e74ull});
    SimulatedPanel out;
    out.truth = truth;
    auto& s = out.truth;
    s.refresh_jump(kind);
    s.dkappa.resize(T - 1);
    s.dkappa[0] = s.drift;
    for (int c = 1; c < T - 1; ++c) s.dkappa[c] = s.drift + s.sigma_xi * rnd::standard_normal(rng);

    out.z.values.resize(A, T - 1);
    out.log_rates.resize(A, T);
    out.log_rates.col(0) = base_log_rates;
    for (int c = 0; c < T - 1; ++c) {
        const double dj = s.jump[c + 1] - s.jump[c];
        for (int x = 0; x < A; ++x)
            out.z.values(x, c) = s.beta[x] * s.dkappa[c] + s.beta_jump[x] * dj +
                                 s.sigma_r * rnd::standard_normal(rng);
        out.log_rates.col(c + 1) = out.log_rates.col(c) + out.z.values.col(c);
    }
    return out;
}

SimulatedMultiPanel simulate_multipop(const MultiPopState& truth, JumpKind kind,
                                      const std::vector<Eigen::VectorXd>& base_log_rates,
                                      std::uint64_t seed) {
    const int C = truth.n_countries();
    if (C < 1 || static_cast<int>(base_log_rates.size()) != C)
        throw Error(Errc::ShapeError, "need one base log-rate vector per population");
    const Eigen::LLT<Eigen::MatrixXd> llt(truth.covariance);
    if (truth.covariance.rows() != C || llt.info() != Eigen::Success)
        throw Error(Errc::InvalidConfig, "covariance must be C x C positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    SimulatedMultiPanel out;
    out.truth = truth;
    out.truth.sync(kind);
    const int T = truth.countries.front().n_years();
    Rng rng = make_stream(seed, {0x73796e74ull, 0x6d756c74ull});
    for (int c = 0; c < C; ++c) {
        auto& s = out.truth.countries[c];
        if (s.n_years() != T || base_log_rates[c].size() != s.n_ages())
            throw Error(Errc::ShapeError, "populations differ in shape");
        s.dkappa.resize(T - 1);
        s.dkappa[0] = s.drift;
    }
    Eigen::VectorXd e(C);
    for (int t = 1; t < T - 1; ++t) {
        for (int c = 0; c < C; ++c) e[c] = rnd::standard_normal(rng);
        const Eigen::VectorXd xi = L * e;
        for (int c = 0; c < C; ++c)
            out.truth.countries[c].dkappa[t] = out.truth.countries[c].drift + xi[c];
    }
    for (int c = 0; c < C; ++c) {
        const auto& s = out.truth.countries[c];
        const int A = s.n_ages();
        ImprovementMatrix z;
        z.values.resize(A, T - 1);
        Eigen::MatrixXd log_rates(A, T);
        log_rates.col(0) = base_log_rates[c];
        for (int t = 0; t < T - 1; ++t) {
            const double dj = s.jump[t + 1] - s.jump[t];
            for (int x = 0; x < A; ++x)
                z.values(x, t) = s.beta[x] * s.dkappa[t] + s.beta_jump[x] * dj +
                                 s.sigma_r * rnd::standard_normal(rng);
            log_rates.col(t + 1) = log_rates.col(t) + z.values.col(t);
        }
        out.z.push_back(std::move(z));
        out.log_rates.push_back(std::move(log_rates));
    }
    return out;
}

MortalityTable panel_to_table(const Eigen::MatrixXd& log_rates, int first_year,
                              const std::string& population, double exposure) {
    MortalityTable t;
    t.population_id = population;
    for (Eigen::Index x = 0; x < log_rates.rows(); ++x) t.ages.push_back(std::to_string(x));
    for (Eigen::Index j = 0; j < log_rates.cols(); ++j)
        t.years.push_back(first_year + static_cast<int>(j));
    t.exposures = Eigen::MatrixXd::Constant(log_rates.rows(), log_rates.cols(), exposure);
    t.deaths = log_rates.array().exp().matrix() * exposure;
    t.validate();
    return t;
}

Eigen::VectorXd default_base_log_rates(int n_ages) {
    Eigen::VectorXd v(n_ages);
    for (int x = 0; x < n_ages; ++x)
        v[x] = -9.0 + 6.5 * static_cast<double>(x) / std::max(1, n_ages - 1);
    return v;
}

ParameterState default_truth(JumpKind kind, int A, int T) {
    ParameterState s = make_state(A, T, -0.15);
    // Improvement loadings peak in middle age; shock loadings rise with age.
    for (int x = 0; x < A; ++x) {
        const double u = (x + 0.5) / A;
        s.beta[x] = 1.0 + std::sin(3.14159265358979 * u);
        s.beta_jump[x] = 0.3 + 2.0 * u * u;
    }
    s.beta /= s.beta.sum();
    s.beta_jump /= s.beta_jump.sum();
    s.sigma_xi = 0.15;
    s.sigma_r = 0.02;
    s.p = 3.0 / 51.0;
    s.mu_y = 1.0;
    s.sigma_y = 0.5;
    s.coeff = has_coeff(kind) ? 0.4 : 0.0;
    if (has_jumps(kind) && T > 5) {
        const int shock = T - 4;
        s.occurrence[shock] = 1;
        s.severity[shock] = 1.2;
        s.occurrence[shock + 1] = 1;
        s.severity[shock + 1] = 0.8;
    }
    s.refresh_jump(kind);
    s.dkappa = Eigen::VectorXd::Constant(T - 1, s.drift);
    return s;
}

const ParameterRecovery& RecoveryReport::at(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p;
    throw Error(Errc::InvalidConfig, "no recovery entry for '" + name + "'");
}

RecoveryReport recovery_study(const ParameterState& truth, const RecoveryOptions& o) {
    if (o.n_replications < 20)
        throw Error(Errc::InvalidSettings, "a recovery study needs at least 20 replications");
    const int A = truth.n_ages();
    const Eigen::VectorXd base =
        o.base_log_rates.size() == 0 ? default_base_log_rates(A) : o.base_log_rates;
    const int n_scalar = n_scalar_parameters(o.spec);
    const auto names = parameter_names(o.spec, A, truth.n_years());

    RecoveryReport report;
    for (int k = 0; k < n_scalar; ++k) report.parameters.push_back({names[k]});
    Rng truth_rng = make_stream(o.seed, {0x74727468ull});
    const double lo = 0.5 * (1.0 - o.level);
    for (int rep = 0; rep < o.n_replications; ++rep) {
        const ParameterState rep_truth = o.draw_truth ? o.draw_truth(rep, truth_rng) : truth;
        const auto panel = simulate_dataset(rep_truth, o.truth_kind.value_or(o.spec.kind), base,
                                            o.seed * 1000003ull + static_cast<std::uint64_t>(rep));
        McmcSettings settings = o.settings;
        settings.seed = o.settings.seed + static_cast<std::uint64_t>(rep);
        const auto draws = run_mcmc(o.spec, panel.z, settings);
        const auto truth_flat = flatten_state(panel.truth, o.spec);
        for (int k = 0; k < n_scalar; ++k) {
            std::vector<double> values;
            double mean = 0.0;
            for (const auto& s : draws.states) {
                values.push_back(flatten_state(s, o.spec)[k]);
                mean += values.back();
            }
            mean /= static_cast<double>(values.size());
            auto& p = report.parameters[k];
            const double q_lo = quantile(values, lo);
            const double q_hi = quantile(values, 1.0 - lo);
            p.covered += (truth_flat[k] >= q_lo && truth_flat[k] <= q_hi) ? 1 : 0;
            p.replications += 1;
            p.bias += (mean - truth_flat[k]);
        }
        report.max_rhat.push_back(max_scalar_rhat(summarize(draws), o.spec));
        report.waic.push_back(waic(draws.loglik).waic);
        if (o.on_replication) o.on_replication(rep);
    }
    for (auto& p : report.parameters) {
        p.coverage = static_cast<double>(p.covered) / p.replications;
        p.bias /= p.replications;
    }
    return report;
}

}  // namespace mortjump
