#include "mortjump/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "csv.hpp"
#include "mortjump/error.hpp"

namespace mortjump {

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) bad_config("'" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
            bad_config("unknown key '" + key + "' in '" + where + "'");
    }
}

template <class T>
T get(const Json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        bad_config("'" + where + "." + key + "' has the wrong type");
    }
}

Eigen::VectorXd get_vector(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    const auto v = get<std::vector<double>>(j, key, where, {});
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string severity_name(SeveritySupport s) {
    return s == SeveritySupport::PositiveHalfNormal ? "positive" : "gaussian";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv::quote(fields[i]);
    }
    out << '\n';
}

std::string fmt(double v) { return std::isnan(v) ? "NA" : csv::format_double(v); }

}  // namespace

JumpKind RunConfig::kind() const {
    return is_multipop() ? multipop_structure : parse_jump_kind(model);
}

ConstraintConfig RunConfig::constraints(const std::vector<int>& years) const {
    auto index_of = [&](int year, const char* what) {
        if (years.empty() || year < years.front() || year > years.back())
            throw Error(Errc::InvalidConfig, std::string(what) + " " + std::to_string(year) +
                                                 " lies outside the data years");
        return year - years.front();
    };
    ConstraintConfig c;
    if (no_jump_year) c.no_jump_year = index_of(*no_jump_year, "no-jump year");
    for (int y : extra_pin_years) c.extra_pins.push_back(index_of(y, "pinned year"));
    return c;
}

ModelSpec RunConfig::model_spec(const std::vector<int>& years) const {
    ModelSpec spec;
    spec.kind = kind();
    spec.priors = priors;
    spec.constraints = constraints(years);
    spec.fixed_coeff = fixed_coeff;
    return spec;
}

MultiPopSpec RunConfig::multipop_spec(const std::vector<int>& years) const {
    MultiPopSpec spec;
    spec.kind = multipop_structure;
    spec.priors = priors;
    spec.constraints = constraints(years);
    spec.iw_extra_dof = iw_extra_dof;
    spec.iw_scale = iw_scale;
    spec.diagonal_covariance = diagonal_covariance;
    return spec;
}

RunConfig parse_config(const Json& j) {
    RunConfig c;
    check_keys(j, "config", {"model", "priors", "constraints", "mcmc", "data", "multipop"});
    c.model = get<std::string>(j, "model", "config", c.model);
    if (c.model != "multipop") (void)parse_jump_kind(c.model);

    if (j.contains("priors")) {
        const Json& p = j.at("priors");
        check_keys(p, "priors",
                   {"preset", "dirichlet_beta", "dirichlet_beta_jump", "drift_mean", "drift_sd",
                    "sigma_xi_sd", "sigma_r_sd", "p_a", "p_b", "mu_y_sd", "sigma_y_sd", "coeff",
                    "severity", "fixed_coeff"});
        c.prior_preset = get<std::string>(p, "preset", "priors", "covid");
        if (c.prior_preset == "covid")
            c.priors = PriorConfig::covid();
        else if (c.prior_preset == "england_wales")
            c.priors = PriorConfig::england_wales();
        else
            bad_config("unknown prior preset '" + c.prior_preset + "'");
        auto& pr = c.priors;
        if (p.contains("dirichlet_beta")) pr.dirichlet_beta = get_vector(p, "dirichlet_beta", "priors");
        if (p.contains("dirichlet_beta_jump"))
            pr.dirichlet_beta_jump = get_vector(p, "dirichlet_beta_jump", "priors");
        pr.drift_mean = get(p, "drift_mean", "priors", pr.drift_mean);
        pr.drift_sd = get(p, "drift_sd", "priors", pr.drift_sd);
        pr.sigma_xi_sd = get(p, "sigma_xi_sd", "priors", pr.sigma_xi_sd);
        pr.sigma_r_sd = get(p, "sigma_r_sd", "priors", pr.sigma_r_sd);
        pr.p_a = get(p, "p_a", "priors", pr.p_a);
        pr.p_b = get(p, "p_b", "priors", pr.p_b);
        pr.mu_y_sd = get(p, "mu_y_sd", "priors", pr.mu_y_sd);
        pr.sigma_y_sd = get(p, "sigma_y_sd", "priors", pr.sigma_y_sd);
        if (p.contains("severity")) {
            const auto s = get<std::string>(p, "severity", "priors", "");
            if (s == "positive")
                pr.severity = SeveritySupport::PositiveHalfNormal;
            else if (s == "gaussian")
                pr.severity = SeveritySupport::Gaussian;
            else
                bad_config("priors.severity must be 'positive' or 'gaussian'");
        }
        if (p.contains("coeff")) {
            const Json& k = p.at("coeff");
            check_keys(k, "priors.coeff", {"family", "mean", "sd", "a", "b"});
            const auto family = get<std::string>(k, "family", "priors.coeff", "truncated_normal");
            if (family == "truncated_normal")
                pr.coeff = CoeffPrior{CoeffPrior::Family::TruncatedNormal,
                                      get(k, "mean", "priors.coeff", 0.0),
                                      get(k, "sd", "priors.coeff", 0.4)};
            else if (family == "beta")
                pr.coeff = CoeffPrior{CoeffPrior::Family::Beta, get(k, "a", "priors.coeff", 1.0),
                                      get(k, "b", "priors.coeff", 5.0)};
            else
                bad_config("priors.coeff.family must be 'truncated_normal' or 'beta'");
        }
        if (p.contains("fixed_coeff") && !p.at("fixed_coeff").is_null())
            c.fixed_coeff = get(p, "fixed_coeff", "priors", 0.0);
    }

    if (j.contains("constraints")) {
        const Json& k = j.at("constraints");
        check_keys(k, "constraints", {"no_jump_year", "extra_pins"});
        if (k.contains("no_jump_year") && !k.at("no_jump_year").is_null())
            c.no_jump_year = get(k, "no_jump_year", "constraints", 0);
        c.extra_pin_years = get<std::vector<int>>(k, "extra_pins", "constraints", {});
    }

    if (j.contains("mcmc")) {
        const Json& m = j.at("mcmc");
        check_keys(m, "mcmc", {"chains", "burn_in", "samples", "thin", "seed", "threads"});
        auto& s = c.settings;
        s.n_chains = get(m, "chains", "mcmc", s.n_chains);
        s.burn_in = get(m, "burn_in", "mcmc", s.burn_in);
        s.n_samples = get(m, "samples", "mcmc", s.n_samples);
        s.thin = get(m, "thin", "mcmc", s.thin);
        s.seed = get<std::uint64_t>(m, "seed", "mcmc", s.seed);
        s.threads = get(m, "threads", "mcmc", s.threads);
        try {
            s.validate();
        } catch (const Error& e) {
            bad_config(e.what());
        }
    }

    if (j.contains("data")) {
        const Json& d = j.at("data");
        check_keys(d, "data", {"population", "populations", "zero_deaths", "columns"});
        c.population = get<std::string>(d, "population", "data", "");
        c.populations = get<std::vector<std::string>>(d, "populations", "data", {});
        const auto z = get<std::string>(d, "zero_deaths", "data", "reject");
        if (z == "reject")
            c.zero_deaths = ZeroDeathPolicy::Reject;
        else if (z == "impute_half")
            c.zero_deaths = ZeroDeathPolicy::ImputeHalf;
        else
            bad_config("data.zero_deaths must be 'reject' or 'impute_half'");
        if (d.contains("columns")) {
            const Json& cols = d.at("columns");
            check_keys(cols, "data.columns", {"age", "year", "deaths", "exposure", "population"});
            auto& sc = c.schema;
            sc.age = get(cols, "age", "data.columns", sc.age);
            sc.year = get(cols, "year", "data.columns", sc.year);
            sc.deaths = get(cols, "deaths", "data.columns", sc.deaths);
            sc.exposure = get(cols, "exposure", "data.columns", sc.exposure);
            sc.population = get(cols, "population", "data.columns", sc.population);
        }
    }

    if (j.contains("multipop")) {
        const Json& m = j.at("multipop");
        check_keys(m, "multipop", {"structure", "iw_extra_dof", "iw_scale", "diagonal_covariance"});
        c.multipop_structure =
            parse_jump_kind(get<std::string>(m, "structure", "multipop", "ar"));
        c.iw_extra_dof = get(m, "iw_extra_dof", "multipop", c.iw_extra_dof);
        c.iw_scale = get(m, "iw_scale", "multipop", c.iw_scale);
        c.diagonal_covariance = get(m, "diagonal_covariance", "multipop", c.diagonal_covariance);
        if (!(c.iw_scale > 0.0) || !(c.iw_extra_dof > 0.0))
            bad_config("multipop.iw_scale and multipop.iw_extra_dof must be positive");
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    Json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        if (e.code() == Errc::ParseError) bad_config(e.what());
        throw;
    }
    return parse_config(j);
}

Json vector_to_json(const Eigen::VectorXd& v) {
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json config_to_json(const RunConfig& c) {
    const auto& pr = c.priors;
    Json coeff;
    if (pr.coeff.family == CoeffPrior::Family::Beta)
        coeff = {{"family", "beta"}, {"a", pr.coeff.first}, {"b", pr.coeff.second}};
    else
        coeff = {{"family", "truncated_normal"}, {"mean", pr.coeff.first}, {"sd", pr.coeff.second}};
    Json priors = {{"preset", c.prior_preset}};
    priors["dirichlet_beta"] = pr.dirichlet_beta.size() ? vector_to_json(pr.dirichlet_beta) : Json();
    priors["dirichlet_beta_jump"] =
        pr.dirichlet_beta_jump.size() ? vector_to_json(pr.dirichlet_beta_jump) : Json();
    priors["drift_mean"] = pr.drift_mean;
    priors["drift_sd"] = pr.drift_sd;
    priors["sigma_xi_sd"] = pr.sigma_xi_sd;
    priors["sigma_r_sd"] = pr.sigma_r_sd;
    priors["p_a"] = pr.p_a;
    priors["p_b"] = pr.p_b;
    priors["mu_y_sd"] = pr.mu_y_sd;
    priors["sigma_y_sd"] = pr.sigma_y_sd;
    priors["coeff"] = coeff;
    priors["severity"] = severity_name(pr.severity);
    priors["fixed_coeff"] = c.fixed_coeff ? Json(*c.fixed_coeff) : Json();

    Json j;
    j["model"] = c.model;
    j["priors"] = priors;
    j["constraints"] = {{"no_jump_year", c.no_jump_year ? Json(*c.no_jump_year) : Json()},
                        {"extra_pins", c.extra_pin_years}};
    const auto& s = c.settings;
    j["mcmc"] = {{"chains", s.n_chains}, {"burn_in", s.burn_in}, {"samples", s.n_samples},
                 {"thin", s.thin},       {"seed", s.seed},       {"threads", s.threads}};
    j["data"] = {{"population", c.population},
                 {"populations", c.populations},
                 {"zero_deaths", c.zero_deaths == ZeroDeathPolicy::Reject ? "reject" : "impute_half"},
                 {"columns",
                  {{"age", c.schema.age},
                   {"year", c.schema.year},
                   {"deaths", c.schema.deaths},
                   {"exposure", c.schema.exposure},
                   {"population", c.schema.population}}}};
    j["multipop"] = {{"structure", std::string(to_string(c.multipop_structure))},
                     {"iw_extra_dof", c.iw_extra_dof},
                     {"iw_scale", c.iw_scale},
                     {"diagonal_covariance", c.diagonal_covariance}};
    return j;
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot read '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::ParseError, "'" + path + "': " + e.what());
    }
}

void write_json(const std::string& path, const Json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(Errc::IoError, "SHA-256 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

namespace {

void write_draw_rows(std::ostream& out, const ParameterState& s, const ModelSpec& spec, int chain,
                     int iteration, const std::string* country) {
    out << chain << ',' << iteration;
    if (country) out << ',' << csv::quote(*country);
    for (double v : flatten_state(s, spec)) out << ',' << csv::format_double(v);
    out << '\n';
}

}  // namespace

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
    auto out = open_out(path);
    std::vector<std::string> header = {"chain", "iteration"};
    for (auto& n : parameter_names(draws.spec, draws.n_ages, draws.n_years)) header.push_back(n);
    write_row(out, header);
    for (int s = 0; s < draws.size(); ++s)
        write_draw_rows(out, draws.states[s], draws.spec, draws.chain[s], draws.iteration[s],
                        nullptr);
}

void write_multipop_draws_csv(const std::string& path, const MultiPopDraws& draws,
                              const std::vector<std::string>& countries) {
    auto out = open_out(path);
    const ModelSpec spec = draws.spec.country_spec();
    std::vector<std::string> header = {"chain", "iteration", "country"};
    for (auto& n : parameter_names(spec, draws.n_ages, draws.n_years)) header.push_back(n);
    write_row(out, header);
    for (int s = 0; s < draws.size(); ++s)
        for (std::size_t c = 0; c < countries.size(); ++c)
            write_draw_rows(out, draws.states[s].countries[c], spec, draws.chain[s],
                            draws.iteration[s], &countries[c]);
}

DrawTable read_draws_csv(const std::string& path) {
    const auto raw = csv::read(path);
    const int c_chain = raw.column("chain");
    const int c_iter = raw.column("iteration");
    const int c_country = raw.column("country");
    if (c_chain != 0 || c_iter != 1)
        throw Error(Errc::ParseError, "'" + path + "' does not start with chain,iteration");
    const int first = c_country >= 0 ? 3 : 2;
    DrawTable t;
    t.columns.assign(raw.header.begin() + first, raw.header.end());
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& row = raw.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        if (row.size() != raw.header.size()) throw Error(Errc::ParseError, ctx + ": wrong field count");
        t.chain.push_back(static_cast<int>(csv::parse_int(row[0], ctx)));
        t.iteration.push_back(static_cast<int>(csv::parse_int(row[1], ctx)));
        if (c_country >= 0) t.country.push_back(row[2]);
        std::vector<double> v;
        v.reserve(row.size() - first);
        for (std::size_t k = first; k < row.size(); ++k) v.push_back(csv::parse_double(row[k], ctx));
        t.values.push_back(std::move(v));
    }
    return t;
}

std::vector<ParameterState> states_from_draws(const DrawTable& table, const ModelSpec& spec,
                                              int n_ages, int n_years, const std::string& country) {
    if (table.columns != parameter_names(spec, n_ages, n_years))
        throw Error(Errc::ShapeError, "draw columns do not match the model layout");
    std::vector<ParameterState> out;
    for (std::size_t r = 0; r < table.values.size(); ++r) {
        if (!country.empty() && (table.country.empty() || table.country[r] != country)) continue;
        out.push_back(unflatten_state(table.values[r], spec, n_ages, n_years));
    }
    return out;
}

void write_covariance_csv(const std::string& path, const MultiPopDraws& draws) {
    auto out = open_out(path);
    std::vector<std::string> header = {"chain", "iteration"};
    const int C = draws.states.empty() ? 0 : draws.states.front().n_countries();
    for (int i = 0; i < C; ++i)
        for (int k = i; k < C; ++k)
            header.push_back("cov[" + std::to_string(i + 1) + "," + std::to_string(k + 1) + "]");
    write_row(out, header);
    for (int s = 0; s < draws.size(); ++s) {
        out << draws.chain[s] << ',' << draws.iteration[s];
        for (int i = 0; i < C; ++i)
            for (int k = i; k < C; ++k)
                out << ',' << csv::format_double(draws.states[s].covariance(i, k));
        out << '\n';
    }
}

std::vector<std::string> loglik_columns(const std::vector<std::string>& populations,
                                        const std::vector<std::string>& ages,
                                        const std::vector<int>& years) {
    std::vector<std::string> out;
    for (const auto& pop : populations)
        for (const auto& age : ages)
            for (std::size_t t = 1; t < years.size(); ++t)
                out.push_back(pop + "|" + age + "|" + std::to_string(years[t]));
    return out;
}

void write_loglik_csv(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<int>& chain, const std::vector<int>& iteration,
                      const Eigen::MatrixXd& loglik) {
    if (static_cast<Eigen::Index>(columns.size()) != loglik.cols() ||
        static_cast<Eigen::Index>(chain.size()) != loglik.rows())
        throw Error(Errc::ShapeError, "log-likelihood labels do not match the matrix");
    auto out = open_out(path);
    std::vector<std::string> header = {"chain", "iteration"};
    header.insert(header.end(), columns.begin(), columns.end());
    write_row(out, header);
    for (Eigen::Index s = 0; s < loglik.rows(); ++s) {
        out << chain[s] << ',' << iteration[s];
        for (Eigen::Index i = 0; i < loglik.cols(); ++i) out << ',' << csv::format_double(loglik(s, i));
        out << '\n';
    }
}

LogLikTable read_loglik_csv(const std::string& path) {
    const auto raw = csv::read(path);
    if (raw.column("chain") != 0 || raw.column("iteration") != 1)
        throw Error(Errc::ParseError, "'" + path + "' does not start with chain,iteration");
    LogLikTable t;
    t.columns.assign(raw.header.begin() + 2, raw.header.end());
    t.values.resize(static_cast<Eigen::Index>(raw.rows.size()),
                    static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& row = raw.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        if (row.size() != raw.header.size()) throw Error(Errc::ParseError, ctx + ": wrong field count");
        t.chain.push_back(static_cast<int>(csv::parse_int(row[0], ctx)));
        t.iteration.push_back(static_cast<int>(csv::parse_int(row[1], ctx)));
        for (std::size_t k = 2; k < row.size(); ++k)
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k - 2)) =
                csv::parse_double(row[k], ctx);
    }
    return t;
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<std::vector<ParameterSummary>>& tables,
                           const std::vector<std::string>& country) {
    auto out = open_out(path);
    const bool labelled = !country.empty();
    std::vector<std::string> header = {"parameter", "mean", "map",  "sd",      "q10",
                                       "q90",       "rhat", "ess_bulk", "ess_tail"};
    if (labelled) header.insert(header.begin(), "country");
    write_row(out, header);
    for (std::size_t b = 0; b < tables.size(); ++b) {
        for (const auto& row : tables[b]) {
            if (labelled) out << csv::quote(country[b]) << ',';
            out << csv::quote(row.name) << ',' << fmt(row.mean) << ',' << fmt(row.map) << ','
                << fmt(row.sd) << ',' << fmt(row.q10) << ',' << fmt(row.q90) << ','
                << fmt(row.rhat) << ',' << fmt(row.ess_bulk) << ',' << fmt(row.ess_tail) << '\n';
        }
    }
}

namespace {

Json state_to_json(const ParameterState& s) {
    return {{"beta", vector_to_json(s.beta)},
            {"beta_jump", vector_to_json(s.beta_jump)},
            {"drift", s.drift},
            {"dkappa", vector_to_json(s.dkappa)},
            {"sigma_xi", s.sigma_xi},
            {"sigma_r", s.sigma_r},
            {"p", s.p},
            {"occurrence", s.occurrence},
            {"severity", vector_to_json(s.severity)},
            {"coeff", s.coeff},
            {"jump", vector_to_json(s.jump)},
            {"mu_y", s.mu_y},
            {"sigma_y", s.sigma_y}};
}

ParameterState state_from_json(const Json& j) {
    ParameterState s;
    try {
        s.beta = vector_from_json(j.at("beta"));
        s.beta_jump = vector_from_json(j.at("beta_jump"));
        s.drift = j.at("drift").get<double>();
        s.dkappa = vector_from_json(j.at("dkappa"));
        s.sigma_xi = j.at("sigma_xi").get<double>();
        s.sigma_r = j.at("sigma_r").get<double>();
        s.p = j.at("p").get<double>();
        s.occurrence = j.at("occurrence").get<std::vector<int>>();
        s.severity = vector_from_json(j.at("severity"));
        s.coeff = j.at("coeff").get<double>();
        s.jump = vector_from_json(j.at("jump"));
        s.mu_y = j.at("mu_y").get<double>();
        s.sigma_y = j.at("sigma_y").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("truth record: ") + e.what());
    }
    return s;
}

}  // namespace

void write_truth_json(const std::string& path, const TruthRecord& truth) {
    Json j;
    j["model"] = std::string(to_string(truth.kind));
    j["populations"] = truth.populations;
    j["ages"] = truth.ages;
    j["years"] = truth.years;
    Json states = Json::array();
    for (const auto& s : truth.states) states.push_back(state_to_json(s));
    j["states"] = states;
    if (truth.covariance.size()) {
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < truth.covariance.rows(); ++i)
            rows.push_back(vector_to_json(truth.covariance.row(i).transpose()));
        j["covariance"] = rows;
    }
    write_json(path, j);
}

TruthRecord read_truth_json(const std::string& path) {
    const Json j = read_json(path);
    TruthRecord t;
    try {
        t.kind = parse_jump_kind(j.at("model").get<std::string>());
        t.populations = j.at("populations").get<std::vector<std::string>>();
        t.ages = j.at("ages").get<std::vector<std::string>>();
        t.years = j.at("years").get<std::vector<int>>();
        for (const auto& s : j.at("states")) t.states.push_back(state_from_json(s));
        if (j.contains("covariance")) {
            const auto& rows = j.at("covariance");
            const auto C = static_cast<Eigen::Index>(rows.size());
            t.covariance.resize(C, C);
            for (Eigen::Index i = 0; i < C; ++i) t.covariance.row(i) = vector_from_json(rows[i]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, "'" + path + "': " + e.what());
    }
    return t;
}

}  // namespace mortjump
