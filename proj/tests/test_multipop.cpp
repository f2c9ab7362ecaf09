#include <cmath>

#include "mortjump/compare.hpp"
#include "mortjump/diagnostics.hpp"
#include "mortjump/multipop.hpp"
#include "mortjump/synth.hpp"
#include "support.hpp"

using namespace mortjump;
using Catch::Approx;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

MultiPopState make_truth(int C, double rho, JumpKind kind = JumpKind::AR1, int A = 5, int T = 14) {
    MultiPopState st;
    for (int c = 0; c < C; ++c) {
        auto s = default_truth(kind, A, T);
        s.drift = -0.15 + 0.03 * c;
        s.dkappa[0] = s.drift;
        s.sigma_r = 0.02 + 0.01 * c;
        st.countries.push_back(s);
    }
    st.occurrence = st.countries.front().occurrence;
    st.p = st.countries.front().p;
    const double v = 0.15 * 0.15;
    st.covariance = Eigen::MatrixXd::Constant(C, C, rho * v);
    st.covariance.diagonal().setConstant(v);
    st.sync(kind);
    return st;
}

std::vector<Eigen::VectorXd> bases(int C, int A = 5) {
    std::vector<Eigen::VectorXd> out;
    for (int c = 0; c < C; ++c) out.push_back(default_base_log_rates(A).array() + 0.1 * c);
    return out;
}

McmcSettings short_settings(std::uint64_t seed) {
    McmcSettings st;
    st.burn_in = 1500;
    st.n_samples = 3000;
    st.thin = 3;
    st.seed = seed;
    return st;
}

}  // namespace

TEST_CASE("multipop likelihood reduces to single-population terms", "[multipop]") {
    SECTION("diagonal covariance") {
        const auto panel = simulate_multipop(make_truth(3, 0.0), JumpKind::AR1, bases(3), 1);
        const auto ll = multipop_log_likelihood(panel.truth, panel.z);
        double sum = 0.0;
        for (int c = 0; c < 3; ++c)
            sum += log_likelihood(panel.truth.countries[c], panel.z[c]).total +
                   dkappa_log_density(panel.truth.countries[c]);
        CHECK(ll.total == Approx(sum).epsilon(1e-12));
    }
    SECTION("one population") {
        const auto panel = simulate_multipop(make_truth(1, 0.0), JumpKind::AR1, bases(1), 2);
        const auto ll = multipop_log_likelihood(panel.truth, panel.z);
        const auto& s = panel.truth.countries[0];
        CHECK(ll.observation == log_likelihood(s, panel.z[0]).total);
        CHECK(ll.innovation == Approx(dkappa_log_density(s)).epsilon(1e-13));
        CHECK(ll.pointwise[0] == log_likelihood(s, panel.z[0]).pointwise);
    }
}

TEST_CASE("innovation density matches a direct bivariate normal evaluation", "[multipop]") {
    const auto panel = simulate_multipop(make_truth(2, 0.6), JumpKind::AR1, bases(2), 3);
    const auto& st = panel.truth;
    const Eigen::Matrix2d S = st.covariance;
    const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    Eigen::Matrix2d inv;
    inv << S(1, 1), -S(0, 1), -S(1, 0), S(0, 0);
    inv /= det;
    double expected = 0.0;
    const auto n = st.countries[0].dkappa.size();
    for (Eigen::Index t = 1; t < n; ++t) {
        Eigen::Vector2d e(st.countries[0].dkappa[t] - st.countries[0].drift,
                          st.countries[1].dkappa[t] - st.countries[1].drift);
        expected += -kLog2Pi - 0.5 * std::log(det) - 0.5 * e.dot(inv * e);
    }
    CHECK(innovation_log_density(st) == Approx(expected).epsilon(1e-12));
    const auto ll = multipop_log_likelihood(st, panel.z);
    CHECK(ll.total == Approx(ll.observation + expected).epsilon(1e-12));

    MultiPopState bad = st;
    bad.covariance(0, 1) = bad.covariance(1, 0) = 1.0;
    CHECK(innovation_log_density(bad) == kLogZero);
}

TEST_CASE("year ranges must agree", "[multipop]") {
    ImprovementMatrix a, b;
    a.values = Eigen::MatrixXd::Zero(3, 10);
    b.values = Eigen::MatrixXd::Zero(3, 11);
    REQUIRE_ERRC(check_year_ranges({a, b}), Errc::YearRangeMismatch);
    const auto st = make_truth(2, 0.0, JumpKind::AR1, 3, 11);
    REQUIRE_ERRC(multipop_log_likelihood(st, {a, b}), Errc::YearRangeMismatch);
}

TEST_CASE("rescale_country_params", "[multipop]") {
    const auto panel = simulate_multipop(make_truth(2, 0.4), JumpKind::AR1, bases(2), 4);
    const auto& truth = panel.truth;
    SECTION("normalised state is unchanged") {
        const auto once = rescale_country_params(truth, JumpKind::AR1);
        for (int c = 0; c < 2; ++c)
            CHECK((once.countries[c].dkappa - truth.countries[c].dkappa).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((once.covariance - truth.covariance).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("rescaling preserves fitted rates and the shared N") {
        MultiPopState raw = truth;
        raw.countries[0].beta *= 2.0;
        raw.countries[0].dkappa *= 0.5;
        raw.countries[0].drift *= 0.5;
        raw.countries[1].beta_jump *= 3.0;
        raw.countries[1].severity /= 3.0;
        raw.countries[1].mu_y /= 3.0;
        raw.countries[1].sigma_y /= 3.0;
        raw.covariance.row(0) *= 0.5;
        raw.covariance.col(0) *= 0.5;
        raw.sync(JumpKind::AR1);
        const auto before = multipop_log_likelihood(raw, panel.z);
        const auto fixed = rescale_country_params(raw, JumpKind::AR1);
        const auto after = multipop_log_likelihood(fixed, panel.z);
        for (int c = 0; c < 2; ++c)
            CHECK((before.pointwise[c] - after.pointwise[c]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(fixed.occurrence == raw.occurrence);
        for (const auto& s : fixed.countries) CHECK(s.occurrence == raw.occurrence);
        CHECK((fixed.covariance - truth.covariance).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(fixed.countries[0].beta.sum() == Approx(1.0).epsilon(1e-15));
        CHECK(fixed.countries[1].beta_jump.sum() == Approx(1.0).epsilon(1e-15));
    }
    SECTION("degenerate sums") {
        MultiPopState raw = truth;
        raw.countries[1].beta.setZero();
        REQUIRE_ERRC(rescale_country_params(raw, JumpKind::AR1), Errc::DegenerateScale);
    }
}

TEST_CASE("inverse-Wishart draws", "[multipop][property]") {
    Rng rng = make_stream(5, {0});
    Eigen::Matrix3d scale;
    scale << 2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 0.5;
    const double dof = 8.0;
    Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd draw = draw_inverse_wishart(rng, dof, scale);
        REQUIRE(Eigen::LLT<Eigen::MatrixXd>(draw).info() == Eigen::Success);
        mean += draw / n;
    }
    // E = scale / (dof - p - 1)
    const Eigen::Matrix3d expected = scale / (dof - 4.0);
    CHECK((mean - expected).cwiseAbs().maxCoeff() < 0.03);
    REQUIRE_ERRC(draw_inverse_wishart(rng, 1.5, scale), Errc::InvalidConfig);
}

TEST_CASE("multipop MCMC on two populations with a shared shock", "[multipop][slow]") {
    const auto truth = make_truth(2, 0.5, JumpKind::AR1, 6, 16);
    const auto panel = simulate_multipop(truth, JumpKind::AR1, bases(2, 6), 6);
    MultiPopSpec spec;
    spec.kind = JumpKind::AR1;
    const auto draws = run_mcmc_multipop(spec, panel.z, short_settings(11));
    REQUIRE(draws.size() == 2000);
    const int T = 16;
    std::vector<double> n_mean(T, 0.0);
    for (const auto& st : draws.states) {
        for (const auto& s : st.countries) REQUIRE(s.occurrence == st.occurrence);
        REQUIRE(Eigen::LLT<Eigen::MatrixXd>(st.covariance).info() == Eigen::Success);
        for (int t = 0; t < T; ++t) n_mean[t] += st.occurrence[t] / 2000.0;
    }
    for (int t = 0; t < T; ++t)
        if (truth.occurrence[t]) CHECK(n_mean[t] > 0.99);
    CHECK(n_mean[0] == 0.0);
    CHECK(n_mean[1] == 0.0);
    CHECK(n_mean[T - 1] == 0.0);

    // The pointwise matrix is the concatenation of country blocks.
    REQUIRE(draws.loglik.cols() == 2 * 6 * 15);
    const auto& last = draws.states.back();
    for (int c = 0; c < 2; ++c) {
        const auto pw = log_likelihood(last.countries[c], panel.z[c]).pointwise;
        for (int x = 0; x < 6; ++x)
            for (int k = 0; k < 15; ++k)
                CHECK(draws.loglik(draws.size() - 1, c * 90 + x * 15 + k) == Approx(pw(x, k)).epsilon(1e-12));
    }
    const auto joint = waic(draws.loglik);
    const double sum = waic(draws.country(0).loglik).waic + waic(draws.country(1).loglik).waic;
    CHECK(std::abs(joint.waic - sum) < 1e-8);
    const double loo_sum = loo_cv(draws.country(0).loglik).lpd_loo + loo_cv(draws.country(1).loglik).lpd_loo;
    CHECK(std::abs(loo_cv(draws.loglik).lpd_loo - loo_sum) < 1e-8);
}

TEST_CASE("one-population multipop agrees with the single-population sampler", "[multipop][slow]") {
    const auto truth = make_truth(1, 0.0, JumpKind::AR1, 6, 16);
    const auto panel = simulate_multipop(truth, JumpKind::AR1, bases(1, 6), 7);
    MultiPopSpec mspec;
    mspec.kind = JumpKind::AR1;
    // The inverse-Wishart prior differs from the single-population sigma_xi
    // prior, so only quantities it barely touches are compared.
    const auto multi = run_mcmc_multipop(mspec, panel.z, short_settings(12)).country(0);
    const auto single = run_mcmc(mspec.country_spec(), panel.z[0], short_settings(13));
    auto check_close = [&](const char* name, auto f) {
        const auto a = multi.chains_of(f);
        const auto b = single.chains_of(f);
        std::vector<double> pa, pb;
        for (const auto& c : a) pa.insert(pa.end(), c.begin(), c.end());
        for (const auto& c : b) pb.insert(pb.end(), c.begin(), c.end());
        auto mean_sd = [](const std::vector<double>& v) {
            double m = 0.0;
            for (double x : v) m += x / v.size();
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m) / (v.size() - 1);
            return std::pair<double, double>{m, std::sqrt(s)};
        };
        const auto [ma, sa] = mean_sd(pa);
        const auto [mb, sb] = mean_sd(pb);
        const double se = std::sqrt(sa * sa / ess_bulk(a) + sb * sb / ess_bulk(b));
        INFO(name << ": " << ma << " vs " << mb << " (se " << se << ")");
        CHECK(std::abs(ma - mb) < 4.0 * se + 0.1 * std::max(sa, sb));
    };
    check_close("sigma_r", [](const ParameterState& s) { return s.sigma_r; });
    check_close("coeff", [](const ParameterState& s) { return s.coeff; });
    check_close("beta[2]", [](const ParameterState& s) { return s.beta[2]; });
    check_close("jump at shock", [](const ParameterState& s) { return s.jump[12]; });
}
