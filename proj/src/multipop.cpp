#include "mortjump/multipop.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mortjump/error.hpp"
#include "mortjump/identify.hpp"

namespace mortjump {

namespace {
constexpr double kLog2Pi = 1.83787706640934548356;
}  // namespace

Eigen::VectorXd MultiPopState::drift() const {
    Eigen::VectorXd d(n_countries());
    for (int c = 0; c < n_countries(); ++c) d[c] = countries[c].drift;
    return d;
}

void MultiPopState::sync(JumpKind kind) {
    for (int c = 0; c < n_countries(); ++c) {
        auto& s = countries[c];
        s.occurrence = occurrence;
        s.p = p;
        s.sigma_xi = std::sqrt(covariance(c, c));
        s.dkappa[0] = s.drift;
        s.refresh_jump(kind);
    }
}

ModelSpec MultiPopSpec::country_spec() const {
    ModelSpec s;
    s.kind = kind;
    s.priors = priors;
    s.constraints = constraints;
    return s;
}

void check_year_ranges(const std::vector<ImprovementMatrix>& zs) {
    if (zs.empty()) throw Error(Errc::ShapeError, "no populations");
    for (const auto& z : zs)
        if (z.n_cols() != zs.front().n_cols())
            throw Error(Errc::YearRangeMismatch, "populations cover different numbers of years");
}

double innovation_log_density(const MultiPopState& st) {
    const int C = st.n_countries();
    const Eigen::LLT<Eigen::MatrixXd> llt(st.covariance);
    if (llt.info() != Eigen::Success) return kLogZero;
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    const Eigen::VectorXd d = st.drift();
    const auto n_inc = st.countries.front().dkappa.size();
    double out = 0.0;
    Eigen::VectorXd e(C);
    for (Eigen::Index t = 1; t < n_inc; ++t) {
        for (int c = 0; c < C; ++c) e[c] = st.countries[c].dkappa[t] - d[c];
        const Eigen::VectorXd w = llt.matrixL().solve(e);
        out += -0.5 * (C * kLog2Pi + log_det + w.squaredNorm());
    }
    return out;
}

MultiPopLogLikelihood multipop_log_likelihood(const MultiPopState& st,
                                              const std::vector<ImprovementMatrix>& zs) {
    check_year_ranges(zs);
    if (static_cast<int>(zs.size()) != st.n_countries())
        throw Error(Errc::ShapeError, "state and data differ in number of populations");
    MultiPopLogLikelihood out;
    for (int c = 0; c < st.n_countries(); ++c) {
        auto ll = log_likelihood(st.countries[c], zs[c]);
        out.observation += ll.total;
        out.pointwise.push_back(std::move(ll.pointwise));
    }
    out.innovation = innovation_log_density(st);
    out.total = out.observation + out.innovation;
    return out;
}

MultiPopState rescale_country_params(MultiPopState st, JumpKind kind) {
    const int C = st.n_countries();
    Eigen::VectorXd scale(C);
    for (int c = 0; c < C; ++c) {
        auto& s = st.countries[c];
        const double sb = s.beta.sum();
        if (!(sb > 0.0)) throw Error(Errc::DegenerateScale, "loadings of population " + std::to_string(c) + " sum to a non-positive value");
        scale[c] = sb;
        s.beta /= sb;
        s.dkappa *= sb;
        s.drift *= sb;
        if (has_jumps(kind)) {
            const double sj = s.beta_jump.sum();
            if (!(sj > 0.0)) throw Error(Errc::DegenerateScale, "jump loadings of population " + std::to_string(c) + " sum to a non-positive value");
            s.beta_jump /= sj;
            s.severity *= sj;
            s.mu_y *= sj;
            s.sigma_y *= sj;
        }
    }
    st.covariance = scale.asDiagonal() * st.covariance * scale.asDiagonal();
    st.sync(kind);
    return st;
}

Eigen::MatrixXd draw_inverse_wishart(Rng& rng, double dof, const Eigen::MatrixXd& scale) {
    const auto C = scale.rows();
    if (!(dof > static_cast<double>(C) - 1.0))
        throw Error(Errc::InvalidConfig, "inverse-Wishart dof must exceed dimension - 1");
    const Eigen::MatrixXd scale_inv = scale.inverse();
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(scale_inv).matrixL();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(C, C);
    for (Eigen::Index i = 0; i < C; ++i) {
        A(i, i) = std::sqrt(rnd::chi_squared(rng, dof - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rnd::standard_normal(rng);
    }
    const Eigen::MatrixXd LA = L * A;
    const Eigen::MatrixXd W = LA * LA.transpose();
    Eigen::MatrixXd sigma = W.inverse();
    return 0.5 * (sigma + sigma.transpose());
}

int MultiPopDraws::n_chains() const {
    return chain.empty() ? 0 : *std::max_element(chain.begin(), chain.end()) + 1;
}

PosteriorDraws MultiPopDraws::country(int c) const {
    PosteriorDraws out;
    out.spec = spec.country_spec();
    out.settings = settings;
    out.n_ages = n_ages;
    out.n_years = n_years;
    out.chain = chain;
    out.iteration = iteration;
    out.warnings = warnings;
    const auto n = static_cast<Eigen::Index>(n_ages) * (n_years - 1);
    out.loglik = loglik.middleCols(c * n, n);
    for (const auto& s : states) out.states.push_back(s.countries[c]);
    return out;
}

namespace {

class MultiChainSampler {
public:
    MultiChainSampler(const MultiPopSpec& spec, const std::vector<ImprovementMatrix>& zs,
                      std::uint64_t seed, int chain_id)
        : spec_(spec),
          cspec_(spec.country_spec()),
          zs_(zs),
          rng_(make_stream(seed, {0x6d756c74ull, static_cast<std::uint64_t>(chain_id)})) {
        const int C = static_cast<int>(zs.size());
        const int T = zs.front().n_cols() + 1;
        pins_ = cspec_.pinned(T);
        for (int t = 0; t < T; ++t)
            if (!pins_[t]) free_years_.push_back(t);
        state_.covariance = Eigen::MatrixXd::Zero(C, C);
        double p_sum = 0.0;
        for (int c = 0; c < C; ++c) {
            const std::uint64_t stream = static_cast<std::uint64_t>(chain_id) * 4096u + c;
            detail::ChainSampler init(cspec_, zs[c], seed ^ 0x9e3779b97f4a7c15ull,
                                      static_cast<int>(stream));
            state_.countries.push_back(init.state());
            state_.covariance(c, c) = init.state().sigma_xi * init.state().sigma_xi;
            p_sum += init.state().p;
        }
        state_.p = p_sum / C;
        state_.occurrence.assign(T, 0);
        state_.sync(spec.kind);
        severity_tuners_.resize(C);
        sigma_r_tuners_.assign(C, MetropolisTuner(0.1));
        coeff_tuners_.assign(C, SliceTuner());
        dkappa_tuners_.assign(C, std::vector<SliceTuner>(T - 1));
        beta_tuners_.assign(C, std::vector<SliceTuner>(zs.front().n_ages()));
        beta_jump_tuners_ = beta_tuners_;
    }

    const MultiPopState& state() const { return state_; }

    void sweep(bool adapt) {
        const int C = state_.n_countries();
        const bool jumps = has_jumps(spec_.kind);
        if (jumps) {
            for (int c = 0; c < C; ++c)
                detail::update_severity_block(state_.countries[c], cspec_, zs_[c], free_years_,
                                              severity_tuners_[c], rng_, adapt);
            update_shared_occurrence();
            for (int t : free_years_) shift_shared_occurrence(t);
            const auto [a, b] = p_conditional(state_.occurrence, pins_, spec_.priors);
            state_.p = std::clamp(rnd::beta(rng_, a, b), 1e-300, std::nextafter(1.0, 0.0));
            state_.sync(spec_.kind);
        }
        update_drift();
        for (int c = 0; c < C; ++c)
            detail::update_sigma_r(state_.countries[c], cspec_, zs_[c], sigma_r_tuners_[c], rng_,
                                   adapt);
        update_covariance();
        if (has_coeff(spec_.kind))
            for (int c = 0; c < C; ++c)
                detail::update_coeff(state_.countries[c], cspec_, zs_[c], coeff_tuners_[c], rng_,
                                     adapt);
        update_dkappa(adapt);
        for (int c = 0; c < C; ++c) {
            auto& s = state_.countries[c];
            s.beta = sample_simplex_block(s, cspec_, zs_[c], SimplexBlock::Beta, rng_,
                                          &beta_tuners_[c], adapt);
            if (jumps)
                s.beta_jump = sample_simplex_block(s, cspec_, zs_[c], SimplexBlock::BetaJump, rng_,
                                                   &beta_jump_tuners_[c], adapt);
        }
    }

private:
    void update_shared_occurrence() {
        const int C = state_.n_countries();
        const auto support = spec_.priors.severity;
        std::vector<CollapsedShock> post(C);
        for (int t : free_years_) {
            // Severities are integrated out per country; the countries' factors multiply.
            double log_bf = 0.0;
            for (int c = 0; c < C; ++c) {
                const auto& s = state_.countries[c];
                post[c] = collapse_severity(shock_likelihood(s, cspec_, zs_[c], t), s.mu_y,
                                            s.sigma_y, support);
                log_bf += post[c].log_bayes_factor;
            }
            const double u_n = rnd::uniform(rng_);
            const double log_odds = std::log(state_.p) - std::log1p(-state_.p) + log_bf;
            const int n = u_n < 1.0 / (1.0 + std::exp(-log_odds)) ? 1 : 0;
            state_.occurrence[t] = n;
            for (int c = 0; c < C; ++c) {
                auto& s = state_.countries[c];
                const double u_y = rnd::uniform(rng_);
                const double mean = n ? post[c].mean : s.mu_y;
                const double sd = n ? post[c].sd : s.sigma_y;
                s.severity[t] = support == SeveritySupport::PositiveHalfNormal
                                    ? rnd::positive_truncated_normal_quantile(u_y, mean, sd)
                                    : rnd::normal_quantile(u_y, mean, sd);
                s.occurrence[t] = n;
                s.refresh_jump(spec_.kind);
            }
        }
    }

    // Shared-N version of shift_occurrence_move: every country gets its own
    // severity proposal, increment shift and (for a lone shock) jump loadings;
    // the innovation density is joint.
    void shift_shared_occurrence(int t) {
        const int C = state_.n_countries();
        const auto support = spec_.priors.severity;
        std::vector<double> u_y(C);
        for (auto& u : u_y) u = rnd::uniform(rng_);
        const double u_acc = rnd::uniform(rng_);
        const int first = std::max(0, t - 1);
        const bool birth = !state_.occurrence[t];
        const bool first_shock = detail::active_shocks(state_.occurrence) == (birth ? 0 : 1);
        const Eigen::VectorXd alpha_j =
            spec_.priors.beta_jump_concentration(state_.countries.front().n_ages());
        MultiPopState next = state_;
        next.occurrence[t] = birth ? 1 : 0;
        double log_ratio = birth ? std::log(state_.p) - std::log1p(-state_.p)
                                 : std::log1p(-state_.p) - std::log(state_.p);
        auto draw = [&](double u, double mean, double sd) {
            return support == SeveritySupport::PositiveHalfNormal
                       ? rnd::positive_truncated_normal_quantile(u, mean, sd)
                       : rnd::normal_quantile(u, mean, sd);
        };
        for (int c = 0; c < C; ++c) {
            const auto& cur = state_.countries[c];
            auto& nx = next.countries[c];
            std::vector<int> unit(cur.n_years(), 0);
            unit[t] = 1;
            const Eigen::VectorXd g =
                jump_path(spec_.kind, unit, Eigen::VectorXd::Ones(cur.n_years()), cur.coeff);
            const Eigen::VectorXd dg = g.tail(g.size() - 1) - g.head(g.size() - 1);
            if (dg[0] != 0.0) return;
            const double sd = std::max(cur.sigma_xi, 1e-3);
            if (birth) {
                const double centre = cur.dkappa[t - 1] - cur.drift;
                const double y = draw(u_y[c], centre, sd);
                if (first_shock) {
                    const Eigen::VectorXd alpha =
                        detail::first_shock_loading_alpha(cur, zs_[c], t, y);
                    nx.beta_jump = detail::draw_dirichlet(alpha, rng_);
                    // Prior of the old loadings cancels against the reverse proposal.
                    log_ratio += density::dirichlet(nx.beta_jump, alpha_j) -
                                 density::dirichlet(nx.beta_jump, alpha);
                }
                nx.severity[t] = y;
                for (Eigen::Index k = 1; k < nx.dkappa.size(); ++k) nx.dkappa[k] -= y * dg[k];
                log_ratio += density::severity(y, cur.mu_y, cur.sigma_y, support) -
                             density::severity(y, centre, sd, support);
            } else {
                const double y_old = cur.severity[t];
                for (Eigen::Index k = 1; k < nx.dkappa.size(); ++k) nx.dkappa[k] += y_old * dg[k];
                nx.severity[t] = draw(u_y[c], cur.mu_y, cur.sigma_y);
                if (first_shock) {
                    nx.beta_jump = detail::draw_dirichlet(alpha_j, rng_);
                    const Eigen::VectorXd alpha =
                        detail::first_shock_loading_alpha(nx, zs_[c], t, y_old);
                    log_ratio += density::dirichlet(cur.beta_jump, alpha) -
                                 density::dirichlet(cur.beta_jump, alpha_j);
                }
                const double centre = nx.dkappa[t - 1] - nx.drift;
                log_ratio += -density::severity(y_old, cur.mu_y, cur.sigma_y, support) +
                             density::severity(y_old, centre, sd, support);
            }
            nx.occurrence[t] = next.occurrence[t];
            nx.refresh_jump(spec_.kind);
            const double inv2var = 0.5 / (cur.sigma_r * cur.sigma_r);
            log_ratio += -(residual_sum_of_squares(nx, zs_[c], first) -
                           residual_sum_of_squares(cur, zs_[c], first)) * inv2var;
        }
        log_ratio += innovation_log_density(next) - innovation_log_density(state_);
        if (std::log(u_acc) < log_ratio) state_ = std::move(next);
    }

    void update_drift() {
        const int C = state_.n_countries();
        const auto& pr = spec_.priors;
        const Eigen::MatrixXd Q = state_.covariance.inverse();
        const auto n_inc = state_.countries.front().dkappa.size();
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(C, C) / (pr.drift_sd * pr.drift_sd);
        Eigen::VectorXd b = Eigen::VectorXd::Constant(C, pr.drift_mean / (pr.drift_sd * pr.drift_sd));
        Eigen::VectorXd sum_inc = Eigen::VectorXd::Zero(C);
        for (int c = 0; c < C; ++c)
            for (Eigen::Index t = 1; t < n_inc; ++t) sum_inc[c] += state_.countries[c].dkappa[t];
        P += static_cast<double>(n_inc - 1) * Q;
        b += Q * sum_inc;
        for (int c = 0; c < C; ++c) {
            const auto& s = state_.countries[c];
            const double r_prec = 1.0 / (s.sigma_r * s.sigma_r);
            const double dj = s.jump[1] - s.jump[0];
            for (Eigen::Index x = 0; x < zs_[c].values.rows(); ++x) {
                P(c, c) += s.beta[x] * s.beta[x] * r_prec;
                b[c] += s.beta[x] * (zs_[c].values(x, 0) - s.beta_jump[x] * dj) * r_prec;
            }
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(P);
        const Eigen::VectorXd mean = llt.solve(b);
        Eigen::VectorXd z(C);
        for (int c = 0; c < C; ++c) z[c] = rnd::standard_normal(rng_);
        // P = L L^T, so L^{-T} z has covariance P^{-1}.
        const Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
        for (int c = 0; c < C; ++c) {
            state_.countries[c].drift = draw[c];
            state_.countries[c].dkappa[0] = draw[c];
        }
    }

    void update_covariance() {
        const int C = state_.n_countries();
        const auto n_inc = state_.countries.front().dkappa.size();
        const Eigen::VectorXd d = state_.drift();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(C, C);
        Eigen::VectorXd e(C);
        for (Eigen::Index t = 1; t < n_inc; ++t) {
            for (int c = 0; c < C; ++c) e[c] = state_.countries[c].dkappa[t] - d[c];
            S += e * e.transpose();
        }
        const double dof0 = C + spec_.iw_extra_dof;
        const double m = static_cast<double>(n_inc - 1);
        if (spec_.diagonal_covariance) {
            // Diagonal of IW(dof0, s I): inverse-gamma((dof0 - C + 1) / 2, s / 2) marginals.
            const double a0 = 0.5 * (dof0 - C + 1.0);
            const double b0 = 0.5 * spec_.iw_scale;
            state_.covariance.setZero();
            for (int c = 0; c < C; ++c) {
                const double shape = a0 + 0.5 * m;
                const double rate = b0 + 0.5 * S(c, c);
                state_.covariance(c, c) = rate / rnd::gamma(rng_, shape);
            }
        } else {
            state_.covariance = draw_inverse_wishart(rng_, dof0 + m,
                                                     spec_.iw_scale * Eigen::MatrixXd::Identity(C, C) + S);
        }
        for (int c = 0; c < C; ++c) state_.countries[c].sigma_xi = std::sqrt(state_.covariance(c, c));
    }

    void update_dkappa(bool adapt) {
        const int C = state_.n_countries();
        const Eigen::MatrixXd Q = state_.covariance.inverse();
        const Eigen::VectorXd d = state_.drift();
        const auto n_inc = state_.countries.front().dkappa.size();
        Eigen::VectorXd e(C);
        for (Eigen::Index t = 1; t < n_inc; ++t) {
            for (int c = 0; c < C; ++c) e[c] = state_.countries[c].dkappa[t] - d[c];
            for (int c = 0; c < C; ++c) {
                auto& s = state_.countries[c];
                const auto& z = zs_[c].values;
                const double inv2var = 0.5 / (s.sigma_r * s.sigma_r);
                const double dj = s.jump[t + 1] - s.jump[t];
                // Terms of -e'Qe/2 that involve e[c].
                double cross = 0.0;
                for (int k = 0; k < C; ++k)
                    if (k != c) cross += Q(c, k) * e[k];
                auto f = [&](double v) {
                    double ssr = 0.0;
                    for (Eigen::Index x = 0; x < z.rows(); ++x) {
                        const double r = z(x, t) - s.beta[x] * v - s.beta_jump[x] * dj;
                        ssr += r * r;
                    }
                    const double u = v - d[c];
                    return -0.5 * Q(c, c) * u * u - u * cross - ssr * inv2var;
                };
                const double v0 = s.dkappa[t];
                const double next = slice_sample(f, v0, dkappa_tuners_[c][t].width(),
                                                 kSliceMaxSteps, rng_);
                dkappa_tuners_[c][t].observe(next - v0, adapt);
                s.dkappa[t] = next;
                e[c] = next - d[c];
            }
        }
    }

    const MultiPopSpec& spec_;
    ModelSpec cspec_;
    const std::vector<ImprovementMatrix>& zs_;
    Rng rng_;
    MultiPopState state_;
    std::vector<bool> pins_;
    std::vector<int> free_years_;
    std::vector<detail::SeverityTuners> severity_tuners_;
    std::vector<MetropolisTuner> sigma_r_tuners_;
    std::vector<SliceTuner> coeff_tuners_;
    std::vector<std::vector<SliceTuner>> dkappa_tuners_, beta_tuners_, beta_jump_tuners_;
};

}  // namespace

MultiPopDraws run_mcmc_multipop(const MultiPopSpec& spec, const std::vector<ImprovementMatrix>& zs,
                                const McmcSettings& settings) {
    settings.validate();
    check_year_ranges(zs);
    const int C = static_cast<int>(zs.size());
    const int A = zs.front().n_ages();
    const int T = zs.front().n_cols() + 1;
    if (T < 3) throw Error(Errc::TooFewYears, "need at least three years of rates");
    for (const auto& z : zs)
        if (z.n_ages() != A) throw Error(Errc::ShapeError, "populations differ in age groups");
    spec.priors.validate(A);

    MultiPopDraws out;
    out.spec = spec;
    out.settings = settings;
    out.n_ages = A;
    out.n_years = T;
    const int per_chain = settings.retained_per_chain();
    const Eigen::Index n_obs = static_cast<Eigen::Index>(A) * (T - 1);

    struct ChainOutput {
        std::vector<MultiPopState> states;
        std::vector<int> iterations;
        Eigen::MatrixXd loglik;
    };
    std::vector<ChainOutput> results(settings.n_chains);
    auto run_one = [&](int chain_id) {
        auto& res = results[chain_id];
        res.loglik.resize(per_chain, C * n_obs);
        MultiChainSampler sampler(spec, zs, settings.seed, chain_id);
        const int total = settings.burn_in + settings.n_samples;
        for (int it = 0; it < total; ++it) {
            sampler.sweep(it < settings.burn_in);
            if (it < settings.burn_in) continue;
            const int k = it - settings.burn_in + 1;
            if (k % settings.thin != 0 || static_cast<int>(res.states.size()) >= per_chain) continue;
            const int row = static_cast<int>(res.states.size());
            const auto ll = multipop_log_likelihood(sampler.state(), zs);
            for (int c = 0; c < C; ++c)
                for (int x = 0; x < A; ++x)
                    for (int j = 0; j < T - 1; ++j)
                        res.loglik(row, c * n_obs + x * (T - 1) + j) = ll.pointwise[c](x, j);
            res.states.push_back(sampler.state());
            res.iterations.push_back(it + 1);
        }
    };
    const int n_threads = std::max(1, settings.threads == 0 ? settings.n_chains : settings.threads);
    for (int first = 0; first < settings.n_chains; first += n_threads) {
        std::vector<std::thread> workers;
        for (int c = first; c < std::min(settings.n_chains, first + n_threads); ++c)
            workers.emplace_back(run_one, c);
        for (auto& w : workers) w.join();
    }
    out.loglik.resize(static_cast<Eigen::Index>(settings.n_chains) * per_chain, C * n_obs);
    for (int ch = 0; ch < settings.n_chains; ++ch) {
        out.loglik.middleRows(static_cast<Eigen::Index>(ch) * per_chain, per_chain) = results[ch].loglik;
        for (int i = 0; i < per_chain; ++i) {
            out.states.push_back(std::move(results[ch].states[i]));
            out.chain.push_back(ch);
            out.iteration.push_back(results[ch].iterations[i]);
        }
    }
    return out;
}

}  // namespace mortjump
