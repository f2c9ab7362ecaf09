#include <algorithm>
#include <cmath>
#include <numbers>

#include "mortjump/diagnostics.hpp"
#include "mortjump/samplers.hpp"
#include "mortjump/synth.hpp"
#include "support.hpp"

using namespace mortjump;
using Catch::Approx;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= v.size();
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= v.size() - 1;
    return m;
}

// Kolmogorov-Smirnov distance to Uniform(0, 1).
double ks_uniform(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        d = std::max({d, (i + 1) / n - v[i], v[i] - i / n});
    return d;
}

SimulatedPanel ar_panel(std::uint64_t seed = 17) {
    return simulate_dataset(default_truth(JumpKind::AR1), JumpKind::AR1, default_base_log_rates(),
                            seed);
}

McmcSettings short_settings(std::uint64_t seed = 5) {
    McmcSettings s;
    s.burn_in = 1500;
    s.n_samples = 3000;
    s.thin = 3;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("rng streams are reproducible and distinct", "[samplers][rng]") {
    Rng a = make_stream(42, {1, 2});
    Rng b = make_stream(42, {1, 2});
    Rng c = make_stream(42, {1, 3});
    Rng d = make_stream(43, {1, 2});
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());

    Rng g = make_stream(7, {0});
    std::vector<double> n, t;
    for (int i = 0; i < 20000; ++i) {
        n.push_back(rnd::standard_normal(g));
        t.push_back(rnd::positive_truncated_normal(g, -1.0, 0.5));
    }
    CHECK(std::abs(moments(n).mean) < 0.03);
    CHECK(moments(n).var == Approx(1.0).margin(0.04));
    CHECK(*std::min_element(t.begin(), t.end()) > 0.0);
    // Far tail of the truncated normal stays finite and positive.
    const double q = rnd::positive_truncated_normal_quantile(0.5, -40.0, 1.0);
    CHECK(std::isfinite(q));
    CHECK(q > 0.0);
    CHECK(rnd::normal_quantile(0.975, 1.0, 2.0) == Approx(1.0 + 2.0 * 1.959964).epsilon(1e-6));
}

TEST_CASE("slice_sample: standard normal moments", "[samplers]") {
    Rng rng = make_stream(1, {0});
    auto target = [](double x) { return -0.5 * x * x; };
    double x = 0.3;
    std::vector<double> draws;
    for (int i = 0; i < 10000; ++i) draws.push_back(x = slice_sample(target, x, 1.0, 50, rng));
    const auto m = moments(draws);
    CHECK(std::abs(m.mean) < 0.05);
    CHECK(std::abs(m.var - 1.0) < 0.1);
}

TEST_CASE("slice_sample: flat density on [0, 1] gives uniform draws", "[samplers]") {
    Rng rng = make_stream(2, {0});
    auto target = [](double x) { return (x >= 0.0 && x <= 1.0) ? 0.0 : kLogZero; };
    double x = 0.5;
    std::vector<double> draws;
    for (int i = 0; i < 10000; ++i) draws.push_back(x = slice_sample(target, x, 1.0, 50, rng));
    CHECK(ks_uniform(draws) < 0.02);
}

TEST_CASE("slice_sample: -inf at the start is InvalidStart", "[samplers]") {
    Rng rng = make_stream(3, {0});
    auto target = [](double x) { return x > 0 ? 0.0 : kLogZero; };
    REQUIRE_ERRC(slice_sample(target, -1.0, 1.0, 50, rng), Errc::InvalidStart);
}

TEST_CASE("rw_metropolis", "[samplers]") {
    Rng rng = make_stream(4, {0});
    SECTION("flat target always accepts") {
        auto flat = [](double) { return 0.0; };
        for (int i = 0; i < 1000; ++i) REQUIRE(rw_metropolis(flat, 0.0, 1.0, rng).accepted);
    }
    SECTION("standard normal with step 2.4") {
        auto target = [](double x) { return -0.5 * x * x; };
        double x = 0.0;
        int accepted = 0;
        std::vector<double> draws;
        for (int i = 0; i < 10000; ++i) {
            const auto r = rw_metropolis(target, x, 2.4, rng);
            accepted += r.accepted;
            draws.push_back(x = r.value);
        }
        const double rate = accepted / 10000.0;
        CHECK(rate >= 0.3);
        CHECK(rate <= 0.6);
        const auto m = moments(draws);
        CHECK(std::abs(m.mean) < 0.1);
        CHECK(std::abs(m.var - 1.0) < 0.15);
    }
    SECTION("-inf at every proposal always rejects") {
        auto spike = [](double x) { return x == 0.0 ? 0.0 : kLogZero; };
        for (int i = 0; i < 1000; ++i) {
            const auto r = rw_metropolis(spike, 0.0, 1.0, rng);
            REQUIRE_FALSE(r.accepted);
            REQUIRE(r.value == 0.0);
        }
    }
    SECTION("non-positive step") {
        auto flat = [](double) { return 0.0; };
        REQUIRE_ERRC(rw_metropolis(flat, 0.0, 0.0, rng), Errc::InvalidSettings);
    }
}

TEST_CASE("tuners adapt only during burn-in", "[samplers]") {
    MetropolisTuner m(1.0);
    for (int i = 0; i < 200; ++i) m.observe(false, true);
    const double adapted = m.step();
    CHECK(adapted < 1.0);
    for (int i = 0; i < 200; ++i) m.observe(true, false);
    CHECK(m.step() == adapted);
    SliceTuner s(1.0);
    for (int i = 0; i < 20; ++i) s.observe(0.1, true);
    CHECK(s.width() == Approx(0.2));
    s.observe(100.0, false);
    CHECK(s.width() == Approx(0.2));
}

TEST_CASE("drift conditional", "[samplers]") {
    // Three years: one pinned increment dkappa[0] = d and one free increment.
    ParameterState s = make_state(2, 3, -0.1);
    s.beta << 0.4, 0.6;
    s.dkappa << -0.1, -0.3;
    s.sigma_xi = 0.2;
    s.sigma_r = 0.05;
    ImprovementMatrix z;
    z.values.resize(2, 2);
    z.values << -0.08, -0.12, -0.11, -0.19;
    PriorConfig pr;

    SECTION("mean and sd match the curvature of the log posterior in d") {
        // Oracle: log posterior as a function of d is quadratic; read off its
        // vertex and curvature by finite differences.
        ModelSpec spec;
        spec.kind = JumpKind::None;
        auto f = [&](double d) {
            ParameterState x = s;
            x.drift = d;
            x.dkappa[0] = d;
            return log_posterior(x, spec, z);
        };
        const double h = 1e-3;
        const double f0 = f(0.0), fp = f(h), fm = f(-h);
        const double curvature = (fp - 2 * f0 + fm) / (h * h);
        const double slope = (fp - fm) / (2 * h);
        const auto m = drift_conditional(s, z, pr);
        CHECK(m.sd == Approx(1.0 / std::sqrt(-curvature)).epsilon(1e-6));
        CHECK(m.mean == Approx(-slope / curvature).epsilon(1e-6));
    }
    SECTION("shrinkage towards the data") {
        const auto m = drift_conditional(s, z, pr);
        CHECK(m.mean < pr.drift_mean);
        CHECK(std::abs(m.mean - (-0.2)) < std::abs(pr.drift_mean - (-0.2)));
    }
    SECTION("tight prior pins the draw at the prior mean") {
        pr.drift_mean = 0.7;
        pr.drift_sd = 1e-9;
        Rng rng = make_stream(1, {0});
        CHECK(gibbs_drift(s, z, pr, rng) == Approx(0.7).margin(1e-7));
    }
}

TEST_CASE("p conditional", "[samplers]") {
    PriorConfig pr;
    std::vector<int> n(33, 0);
    std::vector<bool> pins(33, false);
    pins[0] = pins[1] = pins[32] = true;  // m = 30 free
    n[10] = n[11] = 1;
    CHECK(p_conditional(n, pins, pr) == std::pair{3.0, 48.0});
    n[10] = n[11] = 0;
    CHECK(p_conditional(n, pins, pr) == std::pair{1.0, 50.0});

    n[10] = n[11] = 1;
    Rng rng = make_stream(8, {0});
    double sum = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) sum += gibbs_p(n, pins, pr, rng);
    // Beta(3, 48): mean 3/51, sd about 0.0326
    CHECK(sum / draws == Approx(3.0 / 51.0).margin(4 * 0.0326 / std::sqrt(draws)));
}

TEST_CASE("binary occurrence update", "[samplers]") {
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    ParameterState s = default_truth(JumpKind::AR1, 5, 12);
    const auto panel = simulate_dataset(s, JumpKind::AR1, default_base_log_rates(5), 3);

    SECTION("zero severity leaves the prior odds") {
        ParameterState x = panel.truth;
        x.severity[5] = 0.0;
        x.p = 0.07;
        CHECK(occurrence_probability(x, spec, panel.z, 5) == Approx(0.07).epsilon(1e-12));
    }
    SECTION("a manufactured large shock is detected") {
        // default_truth puts shocks at T-4 and T-3
        CHECK(occurrence_probability(panel.truth, spec, panel.z, 8) > 0.999);
        Rng rng = make_stream(1, {0});
        CHECK(gibbs_binary_N(panel.truth, spec, panel.z, 8, rng) == 1);
    }
    SECTION("pinned years are rejected") {
        Rng rng = make_stream(1, {0});
        REQUIRE_ERRC(gibbs_binary_N(panel.truth, spec, panel.z, 11, rng), Errc::PinnedIndex);
        REQUIRE_ERRC(gibbs_binary_N(panel.truth, spec, panel.z, 1, rng), Errc::PinnedIndex);
    }
}

TEST_CASE("collapsed severity Bayes factor matches numerical integration", "[samplers]") {
    // Oracle: integrate exp(B y - H y^2 / 2) against the severity prior on a fine grid.
    for (auto support : {SeveritySupport::PositiveHalfNormal, SeveritySupport::Gaussian}) {
        for (auto [H, B, mu, sd] : std::vector<std::array<double, 4>>{
                 {40.0, 30.0, 1.0, 0.5}, {5.0, -2.0, 0.3, 1.0}, {0.0, 0.0, 1.0, 1.0}}) {
            const double lo = support == SeveritySupport::Gaussian ? mu - 12 * sd : 0.0;
            const double hi = mu + 12 * sd + 5.0;
            const int n = 200000;
            const double h = (hi - lo) / n;
            double integral = 0.0;
            for (int i = 0; i <= n; ++i) {
                const double y = lo + i * h;
                const double w = (i == 0 || i == n) ? 0.5 : 1.0;
                integral += w * std::exp(B * y - 0.5 * H * y * y +
                                         density::severity(y, mu, sd, support));
            }
            const auto c = collapse_severity({H, B}, mu, sd, support);
            CHECK(c.log_bayes_factor == Approx(std::log(integral * h)).margin(1e-6));
        }
    }
}

TEST_CASE("shift move keeps invariants and column totals", "[samplers]") {
    ModelSpec spec;
    spec.kind = JumpKind::MA1;
    const auto panel = simulate_dataset(default_truth(JumpKind::MA1), JumpKind::MA1,
                                        default_base_log_rates(), 4);
    ParameterState s = panel.truth;
    auto totals = [](const ParameterState& x) {
        Eigen::VectorXd out(x.n_years() - 1);
        for (int c = 0; c < out.size(); ++c) out[c] = x.dkappa[c] + x.jump[c + 1] - x.jump[c];
        return out;
    };
    Rng rng = make_stream(9, {0});
    const auto pins = spec.pinned(s.n_years());
    int accepted = 0;
    for (int it = 0; it < 300; ++it) {
        for (int t = 0; t < s.n_years(); ++t) {
            if (pins[t]) continue;
            const auto before = totals(s);
            accepted += shift_occurrence_move(s, spec, panel.z, t, rng);
            REQUIRE((totals(s) - before).cwiseAbs().maxCoeff() < 1e-12);
            REQUIRE_NOTHROW(check_invariants(s, spec));
        }
    }
    CHECK(accepted > 0);
}

TEST_CASE("simplex block", "[samplers]") {
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    const auto panel = ar_panel();
    ParameterState s = panel.truth;
    Rng rng = make_stream(10, {0});

    SECTION("symmetric unnormalised coordinates map to the uniform simplex point") {
        const Eigen::VectorXd b = Eigen::VectorXd::Constant(10, 2.5);
        CHECK(((b / b.sum()).array() - 0.1).abs().maxCoeff() < 1e-15);
    }
    SECTION("output stays on the simplex and is stationary at the truth") {
        const int draws = 10000;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(10), sq = Eigen::VectorXd::Zero(10);
        for (int i = 0; i < draws; ++i) {
            s.beta = sample_simplex_block(s, spec, panel.z, SimplexBlock::Beta, rng);
            REQUIRE(std::abs(s.beta.sum() - 1.0) < 1e-12);
            REQUIRE((s.beta.array() > 0.0).all());
            sum += s.beta;
            sq += s.beta.cwiseProduct(s.beta);
        }
        const Eigen::VectorXd mean = sum / draws;
        const Eigen::VectorXd sd = (sq / draws - mean.cwiseProduct(mean)).cwiseSqrt();
        for (int x = 0; x < 10; ++x) {
            INFO("age " << x);
            CHECK(std::abs(mean[x] - panel.truth.beta[x]) < 2.0 * sd[x] + 1e-3);
        }
    }
}

TEST_CASE("run_mcmc: settings, determinism and constraint preservation", "[samplers]") {
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    const auto panel = ar_panel();

    McmcSettings bad;
    bad.thin = 0;
    REQUIRE_ERRC(run_mcmc(spec, panel.z, bad), Errc::InvalidSettings);

    McmcSettings st;
    st.burn_in = 200;
    st.n_samples = 400;
    st.thin = 4;
    const auto a = run_mcmc(spec, panel.z, st);
    st.threads = 1;
    const auto b = run_mcmc(spec, panel.z, st);
    REQUIRE(a.size() == 2 * 100);
    REQUIRE(a.loglik.rows() == 200);
    REQUIRE(a.loglik.cols() == 10 * 32);
    CHECK(a.loglik == b.loglik);
    for (int i = 0; i < a.size(); ++i) {
        REQUIRE(flatten_state(a.states[i], spec) == flatten_state(b.states[i], spec));
        REQUIRE_NOTHROW(check_invariants(a.states[i], spec));
    }
    // Pointwise log-likelihood rows belong to the stored states.
    const auto ll = log_likelihood(a.states[17], panel.z).pointwise;
    for (int x = 0; x < 10; ++x)
        for (int c = 0; c < 32; ++c) REQUIRE(a.loglik(17, x * 32 + c) == ll(x, c));
}

TEST_CASE("run_mcmc warns when every occurrence is pinned", "[samplers]") {
    ModelSpec spec;
    spec.kind = JumpKind::MA1;
    for (int t = 0; t < 12; ++t) spec.constraints.extra_pins.push_back(t);
    ParameterState truth = default_truth(JumpKind::None, 4, 12);
    const auto panel = simulate_dataset(truth, JumpKind::None, default_base_log_rates(4), 1);
    McmcSettings st;
    st.burn_in = 10;
    st.n_samples = 20;
    st.thin = 1;
    const auto draws = run_mcmc(spec, panel.z, st);
    REQUIRE_FALSE(draws.warnings.empty());
    CHECK(draws.warnings.front().rfind("CoeffUnidentified", 0) == 0);
}

TEST_CASE("AR1 with the coefficient fixed at 0 tracks the independent model draw for draw",
          "[samplers]") {
    const auto panel = simulate_dataset(default_truth(JumpKind::Independent),
                                        JumpKind::Independent, default_base_log_rates(), 6);
    ModelSpec indep;
    indep.kind = JumpKind::Independent;
    ModelSpec ar0;
    ar0.kind = JumpKind::AR1;
    ar0.fixed_coeff = 0.0;
    McmcSettings st;
    st.burn_in = 100;
    st.n_samples = 300;
    st.thin = 1;
    st.n_chains = 1;
    std::vector<double> ll_a, ll_b;
    run_chain(indep, panel.z, st, 0,
              [&](int, const ParameterState& s) { ll_a.push_back(log_likelihood(s, panel.z).total); });
    run_chain(ar0, panel.z, st, 0,
              [&](int, const ParameterState& s) { ll_b.push_back(log_likelihood(s, panel.z).total); });
    CHECK(ll_a == ll_b);
}

TEST_CASE("run_mcmc recovers an AR1 truth and converges", "[samplers][slow]") {
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    const auto panel = ar_panel();
    const auto draws = run_mcmc(spec, panel.z, short_settings());
    const auto table = summarize(draws);
    CHECK(max_scalar_rhat(table, spec) < 1.05);
    std::vector<double> a;
    for (const auto& s : draws.states) a.push_back(s.coeff);
    const double lo = quantile(a, 0.1), hi = quantile(a, 0.9);
    INFO("a interval [" << lo << ", " << hi << "]");
    CHECK(lo <= 0.4);
    CHECK(hi >= 0.4);
    // Both shock years are found.
    double n29 = 0, n30 = 0;
    for (const auto& s : draws.states) {
        n29 += s.occurrence[29];
        n30 += s.occurrence[30];
    }
    CHECK(n29 / draws.size() > 0.9);
    CHECK(n30 / draws.size() > 0.9);
}

TEST_CASE("run_mcmc without jumps recovers the age loadings of Lee-Carter data",
          "[samplers][slow]") {
    ModelSpec spec;
    spec.kind = JumpKind::None;
    const auto truth = default_truth(JumpKind::None);
    const auto panel = simulate_dataset(truth, JumpKind::None, default_base_log_rates(), 12);
    const auto draws = run_mcmc(spec, panel.z, short_settings(3));
    for (int x = 0; x < 10; ++x) {
        std::vector<double> b;
        for (const auto& s : draws.states) b.push_back(s.beta[x]);
        const auto m = moments(b);
        INFO("age " << x);
        CHECK(std::abs(m.mean - truth.beta[x]) < 3.0 * std::sqrt(m.var));
    }
}
