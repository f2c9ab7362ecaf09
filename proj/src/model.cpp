#include "mortjump/model.hpp"

#include <algorithm>
#include <cmath>

#include "mortjump/error.hpp"

namespace mortjump {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
constexpr double kSimplexTol = 1e-12;
}  // namespace

std::string_view to_string(JumpKind kind) {
    switch (kind) {
        case JumpKind::None: return "lc";
        case JumpKind::Independent: return "liuli";
        case JumpKind::AR1: return "ar";
        case JumpKind::MA1: return "ma";
    }
    return "?";
}

JumpKind parse_jump_kind(std::string_view name) {
    if (name == "lc" || name == "none") return JumpKind::None;
    if (name == "liuli" || name == "independent") return JumpKind::Independent;
    if (name == "ar" || name == "ar1") return JumpKind::AR1;
    if (name == "ma" || name == "ma1") return JumpKind::MA1;
    throw Error(Errc::InvalidConfig, "unknown model '" + std::string(name) + "'");
}

PriorConfig PriorConfig::covid() { return PriorConfig{}; }

PriorConfig PriorConfig::england_wales() {
    PriorConfig p;
    p.dirichlet_beta_jump.resize(10);
    p.dirichlet_beta_jump << 0.5, 0.5, 0.5, 5, 5, 5, 5, 0.5, 0.5, 0.5;
    p.mu_y_sd = 5.0;
    p.sigma_y_sd = 5.0;
    p.coeff = CoeffPrior{CoeffPrior::Family::Beta, 1.0, 5.0};
    p.severity = SeveritySupport::Gaussian;
    return p;
}

Eigen::VectorXd PriorConfig::beta_concentration(int n_ages) const {
    return dirichlet_beta.size() == 0 ? Eigen::VectorXd::Ones(n_ages) : dirichlet_beta;
}

Eigen::VectorXd PriorConfig::beta_jump_concentration(int n_ages) const {
    return dirichlet_beta_jump.size() == 0 ? Eigen::VectorXd::Ones(n_ages) : dirichlet_beta_jump;
}

void PriorConfig::validate(int n_ages) const {
    auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
    for (const auto* conc : {&dirichlet_beta, &dirichlet_beta_jump}) {
        if (conc->size() != 0 && conc->size() != n_ages)
            bad("Dirichlet concentration has " + std::to_string(conc->size()) +
                " entries for " + std::to_string(n_ages) + " age groups");
        if (conc->size() != 0 && !(conc->array() > 0.0).all())
            bad("Dirichlet concentrations must be positive");
    }
    for (double sd : {drift_sd, sigma_xi_sd, sigma_r_sd, mu_y_sd, sigma_y_sd})
        if (!(sd > 0.0)) bad("prior scales must be positive");
    if (!(p_a > 0.0) || !(p_b > 0.0)) bad("Beta prior of p needs positive shapes");
    if (coeff.family == CoeffPrior::Family::TruncatedNormal && !(coeff.second > 0.0))
        bad("coefficient prior sd must be positive");
    if (coeff.family == CoeffPrior::Family::Beta && (!(coeff.first > 0.0) || !(coeff.second > 0.0)))
        bad("coefficient Beta prior needs positive shapes");
}

int ModelSpec::no_jump_index(int n_years) const {
    const int t = constraints.no_jump_year < 0 ? n_years - 1 : constraints.no_jump_year;
    if (t < 0 || t >= n_years)
        throw Error(Errc::InvalidConfig, "no-jump year index " + std::to_string(t) +
                                             " outside 0.." + std::to_string(n_years - 1));
    return t;
}

std::vector<bool> ModelSpec::pinned(int n_years) const {
    std::vector<bool> pins(n_years, kind == JumpKind::None);
    if (kind == JumpKind::None) return pins;
    for (int t = 0; t < std::min(2, n_years); ++t) pins[t] = true;
    pins[no_jump_index(n_years)] = true;
    for (int t : constraints.extra_pins) {
        if (t < 0 || t >= n_years) throw Error(Errc::InvalidConfig, "pin outside year range");
        pins[t] = true;
    }
    return pins;
}

void ParameterState::refresh_jump(JumpKind kind) {
    jump = jump_path(kind, occurrence, severity, coeff);
}

ParameterState make_state(int n_ages, int n_years, double drift) {
    ParameterState s;
    s.beta = Eigen::VectorXd::Constant(n_ages, 1.0 / n_ages);
    s.beta_jump = s.beta;
    s.drift = drift;
    s.dkappa = Eigen::VectorXd::Constant(n_years - 1, drift);
    s.occurrence.assign(n_years, 0);
    s.severity = Eigen::VectorXd::Zero(n_years);
    s.jump = Eigen::VectorXd::Zero(n_years);
    return s;
}

void check_invariants(const ParameterState& s, const ModelSpec& spec) {
    const int A = s.n_ages();
    const int T = s.n_years();
    auto fail = [](Errc c, const std::string& what) { throw Error(c, what); };
    if (s.beta_jump.size() != A || s.dkappa.size() != T - 1 || s.severity.size() != T ||
        s.jump.size() != T)
        fail(Errc::ShapeError, "state vectors have inconsistent lengths");
    if (std::abs(s.beta.sum() - 1.0) > kSimplexTol || (s.beta.array() < 0.0).any())
        fail(Errc::DegenerateScale, "beta is not on the simplex");
    if (std::abs(s.beta_jump.sum() - 1.0) > kSimplexTol || (s.beta_jump.array() < 0.0).any())
        fail(Errc::DegenerateScale, "beta_jump is not on the simplex");
    if (s.dkappa[0] != s.drift) fail(Errc::ShapeError, "dkappa[0] must equal the drift");
    if (!(s.sigma_xi > 0.0) || !(s.sigma_r > 0.0) || !(s.sigma_y > 0.0))
        fail(Errc::InvalidConfig, "scale parameters must be positive");
    if (!(s.p > 0.0 && s.p < 1.0)) fail(Errc::InvalidConfig, "p must lie in (0, 1)");
    if (!(s.coeff >= 0.0 && s.coeff < 1.0))
        fail(Errc::InvalidCoefficient, "coefficient outside [0, 1)");
    const auto pins = spec.pinned(T);
    for (int t = 0; t < T; ++t) {
        if (s.occurrence[t] != 0 && s.occurrence[t] != 1)
            fail(Errc::ShapeError, "occurrence must be binary");
        if (pins[t] && s.occurrence[t] != 0)
            fail(Errc::PinnedIndex, "pinned occurrence at index " + std::to_string(t) + " is set");
    }
    if (T >= 2 && (s.jump[0] != 0.0 || s.jump[1] != 0.0))
        fail(Errc::InconsistentPath, "J(1) and J(2) must be zero");
    const Eigen::VectorXd expected = jump_path(spec.kind, s.occurrence, s.severity, s.coeff);
    if (expected != s.jump) fail(Errc::InconsistentPath, "J is not the image of (N, Y, coeff)");
}

void McmcSettings::validate() const {
    if (n_chains < 1 || burn_in < 0 || n_samples < 1 || thin < 1 || threads < 0)
        throw Error(Errc::InvalidSettings,
                    "need n_chains >= 1, burn_in >= 0, n_samples >= 1, thin >= 1");
    if (n_samples / thin < 1) throw Error(Errc::InvalidSettings, "thin exceeds n_samples");
}

Eigen::VectorXd jump_path(JumpKind kind, const std::vector<int>& occurrence,
                          const Eigen::VectorXd& severity, double coeff) {
    const auto T = static_cast<Eigen::Index>(occurrence.size());
    if (severity.size() != T) throw Error(Errc::ShapeError, "N and Y differ in length");
    if (!(coeff >= 0.0 && coeff < 1.0))
        throw Error(Errc::InvalidCoefficient, "coefficient " + std::to_string(coeff) +
                                                  " outside [0, 1)");
    Eigen::VectorXd jump = Eigen::VectorXd::Zero(T);
    if (kind == JumpKind::None) return jump;
    double prev_jump = 0.0;
    double prev_shock = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const double shock = occurrence[t] ? severity[t] : 0.0;
        switch (kind) {
            case JumpKind::Independent: jump[t] = shock; break;
            case JumpKind::AR1: jump[t] = coeff * prev_jump + shock; break;
            case JumpKind::MA1: jump[t] = shock + coeff * prev_shock; break;
            case JumpKind::None: break;
        }
        prev_jump = jump[t];
        prev_shock = shock;
    }
    return jump;
}

namespace {

void check_shape(const ParameterState& s, const ImprovementMatrix& z) {
    if (z.values.rows() != s.n_ages() || z.values.cols() != s.n_years() - 1 ||
        s.dkappa.size() != z.values.cols() || s.beta_jump.size() != s.n_ages() ||
        s.jump.size() != s.n_years())
        throw Error(Errc::ShapeError, "state is " + std::to_string(s.n_ages()) + " x " +
                                          std::to_string(s.n_years()) + ", Z is " +
                                          std::to_string(z.values.rows()) + " x " +
                                          std::to_string(z.values.cols()));
}

}  // namespace

LogLikelihood log_likelihood(const ParameterState& s, const ImprovementMatrix& z) {
    check_shape(s, z);
    const auto A = z.values.rows();
    const auto C = z.values.cols();
    LogLikelihood out;
    out.pointwise.resize(A, C);
    const double log_norm = -kLogSqrt2Pi - std::log(s.sigma_r);
    const double inv_var = 1.0 / (s.sigma_r * s.sigma_r);
    for (Eigen::Index c = 0; c < C; ++c) {
        const double dj = s.jump[c + 1] - s.jump[c];
        for (Eigen::Index x = 0; x < A; ++x) {
            const double r = z.values(x, c) - s.beta[x] * s.dkappa[c] - s.beta_jump[x] * dj;
            out.pointwise(x, c) = log_norm - 0.5 * r * r * inv_var;
        }
    }
    out.total = out.pointwise.sum();
    return out;
}

double residual_sum_of_squares(const ParameterState& s, const ImprovementMatrix& z, int first,
                               int last) {
    const auto A = z.values.rows();
    if (last < 0) last = static_cast<int>(z.values.cols());
    double ssr = 0.0;
    for (int c = first; c < last; ++c) {
        const double dj = s.jump[c + 1] - s.jump[c];
        for (Eigen::Index x = 0; x < A; ++x) {
            const double r = z.values(x, c) - s.beta[x] * s.dkappa[c] - s.beta_jump[x] * dj;
            ssr += r * r;
        }
    }
    return ssr;
}

int n_scalar_parameters(const ModelSpec& spec) {
    return 3 + (has_jumps(spec.kind) ? 3 : 0) + (has_coeff(spec.kind) ? 1 : 0);
}

std::vector<std::string> parameter_names(const ModelSpec& spec, int A, int T) {
    std::vector<std::string> names = {"d", "sigma_xi", "sigma_r"};
    const bool jumps = has_jumps(spec.kind);
    if (jumps) names.insert(names.end(), {"p", "mu_y", "sigma_y"});
    if (has_coeff(spec.kind)) names.push_back(spec.kind == JumpKind::AR1 ? "a" : "b");
    auto indexed = [&](const char* stem, int n) {
        for (int i = 1; i <= n; ++i) names.push_back(std::string(stem) + "[" + std::to_string(i) + "]");
    };
    indexed("beta", A);
    if (jumps) indexed("beta_j", A);
    indexed("dkappa", T - 1);
    if (jumps) {
        indexed("N", T);
        indexed("Y", T);
        indexed("J", T);
    }
    return names;
}

std::vector<double> flatten_state(const ParameterState& s, const ModelSpec& spec) {
    std::vector<double> v = {s.drift, s.sigma_xi, s.sigma_r};
    const bool jumps = has_jumps(spec.kind);
    if (jumps) v.insert(v.end(), {s.p, s.mu_y, s.sigma_y});
    if (has_coeff(spec.kind)) v.push_back(s.coeff);
    auto append = [&](const Eigen::VectorXd& x) { v.insert(v.end(), x.data(), x.data() + x.size()); };
    append(s.beta);
    if (jumps) append(s.beta_jump);
    append(s.dkappa);
    if (jumps) {
        for (int n : s.occurrence) v.push_back(n);
        append(s.severity);
        append(s.jump);
    }
    return v;
}

ParameterState unflatten_state(const std::vector<double>& v, const ModelSpec& spec, int A, int T) {
    const auto expected = parameter_names(spec, A, T).size();
    if (v.size() != expected)
        throw Error(Errc::ShapeError, "flattened state has " + std::to_string(v.size()) +
                                          " values, expected " + std::to_string(expected));
    ParameterState s = make_state(A, T);
    std::size_t i = 0;
    s.drift = v[i++];
    s.sigma_xi = v[i++];
    s.sigma_r = v[i++];
    const bool jumps = has_jumps(spec.kind);
    if (jumps) {
        s.p = v[i++];
        s.mu_y = v[i++];
        s.sigma_y = v[i++];
    }
    if (has_coeff(spec.kind)) s.coeff = v[i++];
    auto take = [&](Eigen::VectorXd& x) {
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = v[i++];
    };
    take(s.beta);
    if (jumps) take(s.beta_jump);
    take(s.dkappa);
    if (jumps) {
        for (int t = 0; t < T; ++t) s.occurrence[t] = v[i++] != 0.0 ? 1 : 0;
        take(s.severity);
        i += T;
    }
    s.refresh_jump(spec.kind);
    return s;
}

namespace density {

double normal(double x, double mean, double sd) {
    const double u = (x - mean) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * u * u;
}

double half_normal(double x, double sd) {
    if (!(x >= 0.0)) return kLogZero;
    return std::log(2.0) + normal(x, 0.0, sd);
}

double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
    // Mills-ratio asymptotics deep in the lower tail.
    return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log1p(-1.0 / (x * x));
}

double positive_normal(double x, double mean, double sd) {
    if (!(x >= 0.0)) return kLogZero;
    return normal(x, mean, sd) - log_normal_cdf(mean / sd);
}

double beta(double x, double a, double b) {
    if (!(x > 0.0 && x < 1.0)) return kLogZero;
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

double dirichlet(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
    double out = std::lgamma(alpha.sum());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) return kLogZero;
        out += -std::lgamma(alpha[i]) + (alpha[i] - 1.0) * std::log(x[i]);
    }
    return out;
}

double coeff(double x, const CoeffPrior& prior) {
    if (!(x >= 0.0 && x < 1.0)) return kLogZero;
    if (prior.family == CoeffPrior::Family::Beta) {
        if (x == 0.0) {
            if (prior.first == 1.0) return std::log(prior.second);
            return prior.first > 1.0 ? kLogZero : std::numeric_limits<double>::infinity();
        }
        return beta(x, prior.first, prior.second);
    }
    // Normal(mean, sd) truncated to [0, 1).
    const double hi = std::exp(log_normal_cdf((1.0 - prior.first) / prior.second));
    const double lo = std::exp(log_normal_cdf((0.0 - prior.first) / prior.second));
    return normal(x, prior.first, prior.second) - std::log(hi - lo);
}

double severity(double y, double mu, double sd, SeveritySupport support) {
    return support == SeveritySupport::PositiveHalfNormal ? positive_normal(y, mu, sd)
                                                          : normal(y, mu, sd);
}

}  // namespace density

double dkappa_log_density(const ParameterState& s) {
    double out = 0.0;
    for (Eigen::Index c = 1; c < s.dkappa.size(); ++c)
        out += density::normal(s.dkappa[c], s.drift, s.sigma_xi);
    return out;
}

double log_prior(const ParameterState& s, const ModelSpec& spec) {
    const int A = s.n_ages();
    const int T = s.n_years();
    const auto& pr = spec.priors;
    if (!(s.sigma_xi > 0.0) || !(s.sigma_r > 0.0)) return kLogZero;
    double lp = density::dirichlet(s.beta, pr.beta_concentration(A));
    lp += density::normal(s.drift, pr.drift_mean, pr.drift_sd);
    lp += dkappa_log_density(s);
    lp += density::half_normal(s.sigma_xi, pr.sigma_xi_sd);
    lp += density::half_normal(s.sigma_r, pr.sigma_r_sd);
    if (!has_jumps(spec.kind)) return lp;

    if (!(s.p > 0.0 && s.p < 1.0) || !(s.sigma_y > 0.0)) return kLogZero;
    lp += density::dirichlet(s.beta_jump, pr.beta_jump_concentration(A));
    lp += density::beta(s.p, pr.p_a, pr.p_b);
    lp += density::half_normal(s.mu_y, pr.mu_y_sd);
    lp += density::half_normal(s.sigma_y, pr.sigma_y_sd);
    const auto pins = spec.pinned(T);
    const double log_p = std::log(s.p);
    const double log_q = std::log1p(-s.p);
    for (int t = 0; t < T; ++t) {
        if (pins[t]) {
            if (s.occurrence[t] != 0) return kLogZero;
            continue;
        }
        lp += s.occurrence[t] ? log_p : log_q;
        lp += density::severity(s.severity[t], s.mu_y, s.sigma_y, pr.severity);
    }
    if (has_coeff(spec.kind) && !spec.fixed_coeff) lp += density::coeff(s.coeff, pr.coeff);
    return lp;
}

double log_posterior(const ParameterState& s, const ModelSpec& spec, const ImprovementMatrix& z) {
    const double lp = log_prior(s, spec);
    if (lp == kLogZero) return kLogZero;
    return lp + log_likelihood(s, z).total;
}

}  // namespace mortjump
