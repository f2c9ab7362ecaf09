#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mortjump/model.hpp"

namespace mortjump {

/// Absolute tolerance for "J(t) = 0" and for severity positivity.
constexpr double kIdentifyTol = 1e-9;

/// Maps a candidate parameter collection onto the identified parameterisation:
/// sum-to-one loadings with compensating rescale of (dkappa, d, sigma_xi) and of
/// (Y, mu_Y, sigma_Y), dkappa[0] = d, pinned N zeroed and J recomputed.
ParameterState apply_constraints(ParameterState raw, const ModelSpec& spec);

/// a from an exact AR(1) jump path with N(pin) = 0 (0-based pin index).
double recover_ar_coefficient(const Eigen::VectorXd& jump, int pin, double tol = kIdentifyTol);

/// b from an exact MA(1) jump path with N(pin) = 0: the admissible root in [0, 1)
/// of the no-shock condition at the pin.
double recover_ma_coefficient(const Eigen::VectorXd& jump, int pin, double tol = kIdentifyTol);

/// Every b in [0, 1) under which the MA(1) path implies nonnegative shocks and no
/// shock at the pin. Zero is included only when no positive root qualifies.
std::vector<double> admissible_ma_roots(const Eigen::VectorXd& jump, int pin,
                                        double tol = kIdentifyTol);

/// Coefficients c[j] of b^j of the no-shock polynomial at `pin`, first jump at `first`.
std::vector<double> ma_pin_polynomial(const Eigen::VectorXd& jump, int first, int pin);

/// Real roots in (0, 1) of sum_j c[j] b^j by a 1024-cell sign scan, bisection and
/// a Newton polish. Cells are split at turning points so that touching roots and
/// close root pairs are found too.
std::vector<double> unit_interval_roots(const std::vector<double>& coeffs);

/// Closed-form roots of J(t*+2) - b J(t*+1) + b^2 J(t*) = 0, sorted ascending;
/// empty when the discriminant is negative.
std::vector<double> ma_quadratic_roots(double j0, double j1, double j2);

struct JumpSchedule {
    std::vector<int> occurrence;
    Eigen::VectorXd severity;
};

/// Inverts the jump recursion for (N, Y) given the coefficient.
JumpSchedule recover_jump_schedule(const Eigen::VectorXd& jump, JumpKind kind, double coeff,
                                   double tol = kIdentifyTol);

}  // namespace mortjump
