#include <algorithm>
#include <cmath>

#include "mortjump/identify.hpp"
#include "mortjump/synth.hpp"
#include "support.hpp"

using namespace mortjump;
using Catch::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

struct RandomPath {
    std::vector<int> occurrence;
    Eigen::VectorXd severity;
    double coeff;
    int pin;
};

// Random schedule with N(0) = N(1) = N(pin) = 0, at least one shock and positive severities.
RandomPath random_path(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int T = 6 + static_cast<int>(gen() % 35);
    RandomPath p{std::vector<int>(T, 0), Eigen::VectorXd::Zero(T), 0.95 * u(gen), T - 1};
    bool any = false;
    for (int t = 2; t < T - 1; ++t) {
        p.occurrence[t] = u(gen) < 0.1;
        p.severity[t] = 0.1 + 2.9 * u(gen);
        any = any || p.occurrence[t];
    }
    if (!any) {
        const int t = 2 + static_cast<int>(gen() % (T - 3));
        p.occurrence[t] = 1;
        p.severity[t] = 0.1 + 2.9 * u(gen);
    }
    return p;
}

void require_schedule(const JumpSchedule& got, const RandomPath& p) {
    REQUIRE(got.occurrence == p.occurrence);
    for (std::size_t t = 0; t < p.occurrence.size(); ++t)
        if (p.occurrence[t]) REQUIRE(std::abs(got.severity[t] - p.severity[t]) < 1e-9);
}

}  // namespace

TEST_CASE("recover_ar_coefficient", "[identify]") {
    CHECK(recover_ar_coefficient(vec({0, 0, 2.0, 1.0, 0.5}), 4) == 0.5);
    CHECK(recover_ar_coefficient(vec({0, 0, 2.0, 0, 0}), 4) == 0.0);
    REQUIRE_ERRC(recover_ar_coefficient(vec({0, 0, 0, 0, 0}), 4), Errc::NoJump);
    REQUIRE_ERRC(recover_ar_coefficient(vec({0, 0, 2.0, 0, 0.3}), 4), Errc::InconsistentPath);
}

TEST_CASE("recover_ma_coefficient", "[identify]") {
    SECTION("two-period quadratic selects the root in [0, 1)") {
        const auto roots = ma_quadratic_roots(1.0, 1.9, 0.6);
        REQUIRE(roots.size() == 2);
        CHECK(roots[0] == Approx(0.4).epsilon(1e-14));
        CHECK(roots[1] == Approx(1.5).epsilon(1e-14));
        const auto j = jump_path(JumpKind::MA1, {1, 1, 0}, vec({1.0, 1.5, 0}), 0.4);
        CHECK(j.isApprox(vec({1.0, 1.9, 0.6}), 1e-15));
        CHECK(recover_ma_coefficient(j, 2) == Approx(0.4).epsilon(1e-14));
        // The general polynomial route agrees with the closed form.
        const auto scan = unit_interval_roots(ma_pin_polynomial(j, 0, 2));
        REQUIRE(scan.size() == 1);
        CHECK(scan[0] == Approx(0.4).margin(1e-12));
    }
    SECTION("isolated shock: one-lag echo ratio") {
        CHECK(recover_ma_coefficient(vec({2.0, 0.8, 0, 0}), 3) == Approx(0.4).epsilon(1e-14));
        CHECK(recover_ma_coefficient(vec({2.0, 0.8, 0, 0}), 2) == Approx(0.4).epsilon(1e-14));
    }
    SECTION("no admissible root") {
        REQUIRE_ERRC(recover_ma_coefficient(vec({0, 0, 1.0, 2.0, 5.0}), 4), Errc::NoAdmissibleRoot);
    }
    SECTION("no jump") {
        REQUIRE_ERRC(recover_ma_coefficient(vec({0, 0, 0, 0}), 3), Errc::NoJump);
    }
    SECTION("a falling two-year shock is explained equally by b and Y2 / Y1") {
        // Shocks 1.2 then 0.8 with b = 0.4. The alternative explanation has shocks
        // 1.2 then 0.48 with b = 0.8 / 1.2, and the same N.
        const auto truth = default_truth(JumpKind::MA1);
        const auto roots = admissible_ma_roots(truth.jump, truth.n_years() - 1);
        REQUIRE(roots.size() == 2);
        CHECK(roots[0] == Approx(0.4).epsilon(1e-12));
        CHECK(roots[1] == Approx(0.8 / 1.2).epsilon(1e-12));
        const auto alt = recover_jump_schedule(truth.jump, JumpKind::MA1, roots[1]);
        CHECK(alt.occurrence == truth.occurrence);
        CHECK(jump_path(JumpKind::MA1, alt.occurrence, alt.severity, roots[1]).isApprox(truth.jump, 1e-12));
        REQUIRE_ERRC(recover_ma_coefficient(truth.jump, truth.n_years() - 1), Errc::AmbiguousRoot);
    }
}

TEST_CASE("unit_interval_roots finds touching and close roots", "[identify]") {
    // (b - 0.3)^2 (b - 0.7): touching root at 0.3
    const std::vector<double> touching = {-0.063, 0.51, -1.3, 1.0};
    const auto r1 = unit_interval_roots(touching);
    REQUIRE(r1.size() == 2);
    CHECK(r1[0] == Approx(0.3).margin(1e-9));
    CHECK(r1[1] == Approx(0.7).margin(1e-12));
    // (b - 0.5)(b - 0.5002): both roots inside one grid cell
    const std::vector<double> close = {0.5 * 0.5002, -1.0002, 1.0};
    const auto r2 = unit_interval_roots(close);
    REQUIRE(r2.size() == 2);
    CHECK(r2[0] == Approx(0.5).margin(1e-12));
    CHECK(r2[1] == Approx(0.5002).margin(1e-12));
}

TEST_CASE("recover_jump_schedule", "[identify]") {
    const auto ar = recover_jump_schedule(vec({0, 0, 2.0, 1.0, 0.5}), JumpKind::AR1, 0.5);
    CHECK(ar.occurrence == std::vector<int>{0, 0, 1, 0, 0});
    CHECK(ar.severity[2] == 2.0);
    const auto ma = recover_jump_schedule(vec({0, 1.0, 2.5, 1.0}), JumpKind::MA1, 0.5);
    CHECK(ma.occurrence == std::vector<int>{0, 1, 1, 0});
    CHECK(ma.severity[1] == 1.0);
    CHECK(ma.severity[2] == 2.0);
    REQUIRE_ERRC(recover_jump_schedule(vec({0, 0, 1.0, -0.2, 0}), JumpKind::AR1, 0.5),
                 Errc::InconsistentPath);
    REQUIRE_ERRC(recover_jump_schedule(vec({0, 1}), JumpKind::AR1, 1.2), Errc::InvalidCoefficient);
}

TEST_CASE("AR1 round trip on random paths", "[identify][property]") {
    std::mt19937_64 gen(101);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto p = random_path(gen);
        const auto j = jump_path(JumpKind::AR1, p.occurrence, p.severity, p.coeff);
        const double a = recover_ar_coefficient(j, p.pin);
        REQUIRE(std::abs(a - p.coeff) < 1e-9);
        require_schedule(recover_jump_schedule(j, JumpKind::AR1, a), p);
    }
}

// Unique recovery is not guaranteed for MA1: a falling pair of consecutive
// shocks admits a second root. The truth must always be admissible, and
// uniqueness must hold whenever every shock episode is a single year.
TEST_CASE("MA1 round trip on random paths", "[identify][property]") {
    std::mt19937_64 gen(202);
    int unique = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto p = random_path(gen);
        const auto j = jump_path(JumpKind::MA1, p.occurrence, p.severity, p.coeff);
        const auto roots = admissible_ma_roots(j, p.pin);
        const bool truth_found = std::any_of(roots.begin(), roots.end(), [&](double r) {
            return std::abs(r - p.coeff) < 1e-9;
        });
        REQUIRE(truth_found);
        bool consecutive = false;
        for (std::size_t t = 1; t < p.occurrence.size(); ++t)
            consecutive = consecutive || (p.occurrence[t] && p.occurrence[t - 1]);
        if (!consecutive) REQUIRE(roots.size() == 1);
        if (roots.size() != 1) continue;
        ++unique;
        const double b = recover_ma_coefficient(j, p.pin);
        REQUIRE(std::abs(b - p.coeff) < 1e-9);
        require_schedule(recover_jump_schedule(j, JumpKind::MA1, b), p);
    }
    CHECK(unique >= 950);
}

TEST_CASE("apply_constraints", "[identify]") {
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    const auto truth = default_truth(JumpKind::AR1, 5, 12);

    SECTION("idempotent on a constrained state") {
        const auto once = apply_constraints(truth, spec);
        CHECK(flatten_state(once, spec) == flatten_state(truth, spec));
        CHECK(flatten_state(apply_constraints(once, spec), spec) == flatten_state(once, spec));
    }
    SECTION("rescaling the loadings leaves fitted improvements and likelihood unchanged") {
        const auto panel = simulate_dataset(truth, JumpKind::AR1, default_base_log_rates(5), 2);
        ParameterState raw = panel.truth;
        raw.beta *= 2.0;
        raw.dkappa *= 0.5;
        raw.drift *= 0.5;
        raw.beta_jump *= 4.0;
        raw.severity *= 0.25;
        raw.refresh_jump(spec.kind);
        const auto fixed = apply_constraints(raw, spec);
        CHECK_NOTHROW(check_invariants(fixed, spec));
        CHECK(log_likelihood(fixed, panel.z).total ==
              Approx(log_likelihood(panel.truth, panel.z).total).epsilon(1e-12));
        CHECK((fixed.beta - panel.truth.beta).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((fixed.dkappa - panel.truth.dkappa).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("pins are enforced") {
        ParameterState raw = truth;
        raw.occurrence[0] = 1;
        raw.occurrence[11] = 1;
        const auto fixed = apply_constraints(raw, spec);
        CHECK(fixed.occurrence[0] == 0);
        CHECK(fixed.occurrence[11] == 0);
        CHECK_NOTHROW(check_invariants(fixed, spec));
    }
    SECTION("degenerate scale") {
        ParameterState raw = truth;
        raw.beta.setZero();
        REQUIRE_ERRC(apply_constraints(raw, spec), Errc::DegenerateScale);
        raw = truth;
        raw.beta_jump.setZero();
        REQUIRE_ERRC(apply_constraints(raw, spec), Errc::DegenerateScale);
    }
}
