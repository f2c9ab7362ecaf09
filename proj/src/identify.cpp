#include "mortjump/identify.hpp"

#include <algorithm>
#include <cmath>

#include "mortjump/error.hpp"

namespace mortjump {

ParameterState apply_constraints(ParameterState s, const ModelSpec& spec) {
    const double sum_beta = s.beta.sum();
    if (!(sum_beta > 0.0)) throw Error(Errc::DegenerateScale, "loadings sum to a non-positive value");
    s.beta /= sum_beta;
    s.dkappa *= sum_beta;
    s.drift *= sum_beta;
    s.sigma_xi *= sum_beta;
    s.dkappa[0] = s.drift;

    const auto pins = spec.pinned(s.n_years());
    if (has_jumps(spec.kind)) {
        const double sum_jump = s.beta_jump.sum();
        if (!(sum_jump > 0.0))
            throw Error(Errc::DegenerateScale, "jump loadings sum to a non-positive value");
        s.beta_jump /= sum_jump;
        s.severity *= sum_jump;
        s.mu_y *= sum_jump;
        s.sigma_y *= sum_jump;
    }
    for (int t = 0; t < s.n_years(); ++t)
        if (pins[t]) s.occurrence[t] = 0;
    if (!has_coeff(spec.kind)) s.coeff = 0.0;
    s.refresh_jump(spec.kind);
    return s;
}

namespace {

int first_jump(const Eigen::VectorXd& jump, int pin, double tol) {
    for (int t = 0; t < pin; ++t)
        if (std::abs(jump[t]) > tol) return t;
    throw Error(Errc::NoJump, "no jump before the pinned year; the coefficient is not identified");
}

void check_pin(const Eigen::VectorXd& jump, int pin) {
    if (pin < 1 || pin >= jump.size())
        throw Error(Errc::InvalidConfig, "pin index " + std::to_string(pin) + " outside 1.." +
                                             std::to_string(jump.size() - 1));
}

double horner(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

double horner_derivative(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t j = c.size(); j-- > 1;) v = v * x + static_cast<double>(j) * c[j];
    return v;
}

// Implied shocks N(t) Y(t) for t in [first, pin] under MA(1) with coefficient b.
bool ma_admissible(const Eigen::VectorXd& jump, int first, int pin, double b, double tol) {
    double prev = 0.0;
    for (int t = first; t <= pin; ++t) {
        const double shock = jump[t] - b * prev;
        if (shock < -tol) return false;
        prev = shock;
    }
    return std::abs(prev) <= tol;
}

}  // namespace

double recover_ar_coefficient(const Eigen::VectorXd& jump, int pin, double tol) {
    check_pin(jump, pin);
    first_jump(jump, pin, tol);
    const double before = jump[pin - 1];
    const double at = jump[pin];
    double a;
    if (before != 0.0) {
        a = at / before;
    } else {
        if (std::abs(at) > tol)
            throw Error(Errc::InconsistentPath, "J vanishes before the pin but not at it");
        a = 0.0;
    }
    if (std::abs(before) <= tol && std::abs(at) <= tol && !(a >= 0.0 && a < 1.0)) a = 0.0;
    if (!(a >= 0.0 && a < 1.0))
        throw Error(Errc::InconsistentPath, "implied coefficient " + std::to_string(a) +
                                                " outside [0, 1)");
    return a;
}

std::vector<double> ma_pin_polynomial(const Eigen::VectorXd& jump, int first, int pin) {
    std::vector<double> c(pin - first + 1);
    for (int j = 0; j <= pin - first; ++j) c[j] = (j % 2 == 0 ? 1.0 : -1.0) * jump[pin - j];
    return c;
}

namespace {

// Bisection on a sign change of f over [lo, hi], then a guarded Newton polish.
template <class F, class DF>
double bracketed_root(F&& f, DF&& df, double lo, double hi) {
    const double a = lo;
    const double b = hi;
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double r = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double d = df(r);
        if (d == 0.0) break;
        const double next = r - f(r) / d;
        if (!(next >= a && next <= b) || std::abs(f(next)) >= std::abs(f(r))) break;
        r = next;
    }
    return r;
}

bool sign_change(double f0, double f1) {
    return f0 != 0.0 && f1 != 0.0 && std::signbit(f0) != std::signbit(f1);
}

}  // namespace

std::vector<double> unit_interval_roots(const std::vector<double>& coeffs) {
    constexpr int kCells = 1024;
    std::vector<double> roots;
    if (coeffs.size() < 2) return roots;
    auto f = [&](double x) { return horner(coeffs, x); };
    auto df = [&](double x) { return horner_derivative(coeffs, x); };
    std::vector<double> dcoeffs(coeffs.size() - 1);
    for (std::size_t j = 1; j < coeffs.size(); ++j) dcoeffs[j - 1] = static_cast<double>(j) * coeffs[j];
    auto d2f = [&](double x) { return horner_derivative(dcoeffs, x); };
    // A value this small at a critical point is a touching (double) root.
    double scale = 0.0;
    for (double c : coeffs) scale += std::abs(c);
    const double touch = 1e-13 * scale;

    auto push = [&](double r) {
        if (r < 1.0 && (roots.empty() || std::abs(roots.back() - r) > 1e-14)) roots.push_back(r);
    };
    double x0 = 0.0;
    double f0 = f(x0);
    for (int i = 1; i <= kCells; ++i) {
        const double x1 = static_cast<double>(i) / kCells;
        const double f1 = f(x1);
        // Split the cell at a turning point so that two close roots, or a root
        // where f only touches zero, are not lost between grid points.
        double split = -1.0;
        if (sign_change(df(x0), df(x1))) {
            split = bracketed_root(df, d2f, x0, x1);
            if (!(split > x0 && split < x1)) split = -1.0;
        }
        if (split < 0.0) {
            if (sign_change(f0, f1)) push(bracketed_root(f, df, x0, x1));
        } else {
            const double fm = f(split);
            if (std::abs(fm) <= touch) {
                push(split);
            } else {
                if (sign_change(f0, fm)) push(bracketed_root(f, df, x0, split));
                if (sign_change(fm, f1)) push(bracketed_root(f, df, split, x1));
            }
        }
        if (f1 == 0.0 && i < kCells) push(x1);
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

std::vector<double> ma_quadratic_roots(double j0, double j1, double j2) {
    const double disc = j1 * j1 - 4.0 * j0 * j2;
    if (disc < 0.0 || j0 == 0.0) return {};
    const double sq = std::sqrt(disc);
    std::vector<double> r = {(-j1 + sq) / (-2.0 * j0), (-j1 - sq) / (-2.0 * j0)};
    std::sort(r.begin(), r.end());
    return r;
}

std::vector<double> admissible_ma_roots(const Eigen::VectorXd& jump, int pin, double tol) {
    check_pin(jump, pin);
    const int first = first_jump(jump, pin, tol);
    auto coeffs = ma_pin_polynomial(jump, first, pin);

    // Low-order coefficients that vanish are roots at b = 0.
    std::size_t zero_order = 0;
    while (zero_order < coeffs.size() && std::abs(coeffs[zero_order]) <= tol) ++zero_order;
    const bool zero_root = zero_order > 0;
    std::vector<double> reduced(coeffs.begin() + static_cast<long>(zero_order), coeffs.end());

    std::vector<double> candidates;
    if (reduced.size() == 3) {
        // Two periods between first jump and pin: closed-form quadratic.
        for (double r : ma_quadratic_roots(reduced[2], -reduced[1], reduced[0]))
            if (r > 0.0 && r < 1.0) candidates.push_back(r);
    } else {
        candidates = unit_interval_roots(reduced);
    }

    std::vector<double> admissible;
    for (double r : candidates) {
        if (!ma_admissible(jump, first, pin, r, tol)) continue;
        if (admissible.empty() || std::abs(admissible.back() - r) > 1e-12) admissible.push_back(r);
    }
    // b = 0 only counts when no positive root explains the path.
    if (admissible.empty() && zero_root && ma_admissible(jump, first, pin, 0.0, tol))
        admissible.push_back(0.0);
    return admissible;
}

double recover_ma_coefficient(const Eigen::VectorXd& jump, int pin, double tol) {
    const auto admissible = admissible_ma_roots(jump, pin, tol);
    if (admissible.size() == 1) return admissible.front();
    if (admissible.empty())
        throw Error(Errc::NoAdmissibleRoot, "no root in [0, 1) yields nonnegative shocks");
    std::string list;
    for (double r : admissible) list += (list.empty() ? "" : ", ") + std::to_string(r);
    throw Error(Errc::AmbiguousRoot, "several admissible roots in [0, 1): " + list);
}

JumpSchedule recover_jump_schedule(const Eigen::VectorXd& jump, JumpKind kind, double coeff,
                                   double tol) {
    if (!(coeff >= 0.0 && coeff < 1.0))
        throw Error(Errc::InvalidCoefficient, "coefficient outside [0, 1)");
    const auto T = jump.size();
    JumpSchedule out;
    out.occurrence.assign(T, 0);
    out.severity = Eigen::VectorXd::Zero(T);
    double prev_jump = 0.0;
    double prev_shock = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        double shock = 0.0;
        switch (kind) {
            case JumpKind::None: shock = jump[t]; break;
            case JumpKind::Independent: shock = jump[t]; break;
            case JumpKind::AR1: shock = jump[t] - coeff * prev_jump; break;
            case JumpKind::MA1: shock = jump[t] - coeff * prev_shock; break;
        }
        if (shock < -tol || (kind == JumpKind::None && std::abs(shock) > tol))
            throw Error(Errc::InconsistentPath, "implied shock " + std::to_string(shock) +
                                                    " at index " + std::to_string(t));
        if (shock > tol) {
            out.occurrence[t] = 1;
            out.severity[t] = shock;
        } else {
            shock = 0.0;
        }
        prev_jump = jump[t];
        prev_shock = shock;
    }
    return out;
}

}  // namespace mortjump
