#include "mortjump/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "csv.hpp"
#include "mortjump/compare.hpp"
#include "mortjump/data.hpp"
#include "mortjump/diagnostics.hpp"
#include "mortjump/error.hpp"
#include "mortjump/forecast.hpp"
#include "mortjump/identify.hpp"
#include "mortjump/io.hpp"
#include "mortjump/multipop.hpp"
#include "mortjump/samplers.hpp"
#include "mortjump/synth.hpp"

namespace mortjump {

namespace fs = std::filesystem;

namespace {

constexpr double kRhatLimit = 1.05;
constexpr std::uint64_t kDefaultSeed = 20240601;

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback,
                           const CliEnvironment& env) {
    if (env.seed) return *env.seed;
    return flag ? *flag : fallback;
}

std::string level_column(double level) { return "q" + csv::format_double(level); }

// ---- data selection ---------------------------------------------------------

struct Dataset {
    std::vector<std::string> populations;
    std::vector<std::string> ages;
    std::vector<int> years;
    std::vector<Eigen::MatrixXd> log_rates;
    std::vector<ImprovementMatrix> z;
};

const MortalityTable& find_table(const std::vector<MortalityTable>& tables, const std::string& id,
                                 const std::string& path) {
    for (const auto& t : tables)
        if (t.population_id == id) return t;
    throw Error(Errc::ParseError, "population '" + id + "' not found in " + path);
}

Dataset load_dataset(const std::string& path, const RunConfig& cfg) {
    const auto tables = load_mortality_tables(path, cfg.schema);
    std::vector<const MortalityTable*> chosen;
    if (cfg.is_multipop()) {
        if (cfg.populations.empty())
            for (const auto& t : tables) chosen.push_back(&t);
        else
            for (const auto& id : cfg.populations) chosen.push_back(&find_table(tables, id, path));
    } else if (!cfg.population.empty()) {
        chosen.push_back(&find_table(tables, cfg.population, path));
    } else {
        if (tables.size() != 1)
            throw Error(Errc::ParseError, "'" + path + "' holds " + std::to_string(tables.size()) +
                                              " populations; select one with --population");
        chosen.push_back(&tables.front());
    }
    Dataset d;
    d.ages = chosen.front()->ages;
    d.years = chosen.front()->years;
    for (const auto* t : chosen) {
        if (t->years != d.years)
            throw Error(Errc::YearRangeMismatch, "population '" + t->population_id +
                                                     "' covers different years");
        if (t->ages != d.ages)
            throw Error(Errc::ShapeError, "population '" + t->population_id +
                                              "' has different age groups");
        const RateMatrix rates = central_death_rates(*t, cfg.zero_deaths);
        d.populations.push_back(t->population_id);
        d.z.push_back(improvement_rates(rates));
        d.log_rates.push_back(rates.log_values);
    }
    return d;
}

// ---- manifests --------------------------------------------------------------

Json new_manifest(const std::string& command, const std::vector<std::string>& argv,
                  std::uint64_t seed) {
    Json m;
    m["tool"] = "mortjump";
    m["version"] = std::string(kVersion);
    m["command"] = command;
    m["argv"] = argv;
    m["seed"] = seed;
    m["inputs"] = Json::object();
    return m;
}

Json file_record(const std::string& path) {
    return {{"path", absolute(path)}, {"sha256", sha256_file(path)}};
}

void finish_manifest(Json& m, const fs::path& dir, const std::vector<std::string>& files) {
    Json outputs = Json::object();
    for (const auto& f : files) outputs[f] = sha256_file((dir / f).string());
    m["outputs"] = outputs;
    write_json((dir / "manifest.json").string(), m);
}

Json read_manifest(const std::string& dir, const std::string& command) {
    const fs::path path = fs::path(dir) / "manifest.json";
    if (!fs::exists(path)) throw Error(Errc::IoError, "no manifest.json in '" + dir + "'");
    Json m = read_json(path.string());
    if (!m.contains("command") || m.at("command") != command)
        throw Error(Errc::InvalidConfig, "'" + dir + "' is not the output of '" + command + "'");
    return m;
}

// ---- fit directories ----------------------------------------------------------

struct FitDir {
    fs::path dir;
    Json manifest;
    RunConfig config;
    std::vector<std::string> populations;
    std::vector<std::string> ages;
    std::vector<int> years;

    ModelSpec country_spec() const {
        return config.is_multipop() ? config.multipop_spec(years).country_spec()
                                    : config.model_spec(years);
    }
    Eigen::VectorXd base_log_rates(const std::string& pop) const {
        return vector_from_json(manifest.at("fit").at("base_log_rates").at(pop));
    }
};

FitDir open_fit(const std::string& dir) {
    FitDir f;
    f.dir = fs::path(absolute(dir));
    f.manifest = read_manifest(f.dir.string(), "fit");
    f.config = parse_config(read_json((f.dir / "config.json").string()));
    const Json& info = f.manifest.at("fit");
    f.populations = info.at("populations").get<std::vector<std::string>>();
    f.ages = info.at("ages").get<std::vector<std::string>>();
    f.years = info.at("years").get<std::vector<int>>();
    return f;
}

std::vector<ForecastFan> make_fans(const FitDir& fit, int horizon, std::uint64_t seed) {
    if (horizon < 1) throw Error(Errc::InvalidHorizon, "horizon must be at least 1");
    const DrawTable table = read_draws_csv((fit.dir / "draws.csv").string());
    const ModelSpec spec = fit.country_spec();
    const int A = static_cast<int>(fit.ages.size());
    const int T = static_cast<int>(fit.years.size());
    std::vector<ForecastFan> fans;
    for (std::size_t c = 0; c < fit.populations.size(); ++c) {
        const auto& pop = fit.populations[c];
        const auto states =
            states_from_draws(table, spec, A, T, fit.config.is_multipop() ? pop : std::string{});
        // Countries of a joint fit are forecast marginally, each on its own stream.
        fans.push_back(forecast(states, spec, fit.base_log_rates(pop), horizon, seed + c,
                                fit.years.back()));
    }
    return fans;
}

// ---- commands -----------------------------------------------------------------

struct FitArgs {
    std::string data, model, config, out, population;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err, const CliEnvironment& env) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    cfg.model = a.model;
    if (!a.population.empty()) cfg.population = a.population;
    cfg.settings.seed = resolve_seed(a.seed, cfg.settings.seed, env);
    if (a.threads) cfg.settings.threads = *a.threads;
    cfg.settings.validate();
    const Dataset data = load_dataset(a.data, cfg);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::vector<std::string> argv = {"fit",    "--data", absolute(a.data), "--model", a.model,
                                     "--out",  absolute(a.out),  "--seed",
                                     std::to_string(cfg.settings.seed), "--threads",
                                     std::to_string(cfg.settings.threads)};
    if (!a.config.empty()) argv.insert(argv.end(), {"--config", absolute(a.config)});
    if (!a.population.empty()) argv.insert(argv.end(), {"--population", a.population});
    Json manifest = new_manifest("fit", argv, cfg.settings.seed);
    manifest["inputs"]["data"] = file_record(a.data);
    if (!a.config.empty()) manifest["inputs"]["config"] = file_record(a.config);

    const auto columns = loglik_columns(data.populations, data.ages, data.years);
    std::vector<std::vector<ParameterSummary>> tables;
    std::vector<std::string> labels;
    std::vector<std::string> files = {"config.json", "draws.csv", "loglik.csv", "diagnostics.csv"};
    std::vector<std::string> warnings;
    int n_draws = 0;
    write_json((dir / "config.json").string(), config_to_json(cfg));
    if (cfg.is_multipop()) {
        const MultiPopDraws draws = run_mcmc_multipop(cfg.multipop_spec(data.years), data.z,
                                                      cfg.settings);
        for (std::size_t c = 0; c < data.populations.size(); ++c)
            tables.push_back(summarize(draws.country(static_cast<int>(c))));
        labels = data.populations;
        write_multipop_draws_csv((dir / "draws.csv").string(), draws, data.populations);
        write_covariance_csv((dir / "covariance.csv").string(), draws);
        write_loglik_csv((dir / "loglik.csv").string(), columns, draws.chain, draws.iteration,
                         draws.loglik);
        files.push_back("covariance.csv");
        warnings = draws.warnings;
        n_draws = draws.size();
    } else {
        const PosteriorDraws draws = run_mcmc(cfg.model_spec(data.years), data.z.front(),
                                              cfg.settings);
        tables.push_back(summarize(draws));
        write_draws_csv((dir / "draws.csv").string(), draws);
        write_loglik_csv((dir / "loglik.csv").string(), columns, draws.chain, draws.iteration,
                         draws.loglik);
        warnings = draws.warnings;
        n_draws = draws.size();
    }
    write_diagnostics_csv((dir / "diagnostics.csv").string(), tables, labels);

    double max_rhat = 0.0;
    std::string worst;
    for (std::size_t b = 0; b < tables.size(); ++b)
        for (const auto& row : tables[b])
            if (std::isfinite(row.rhat) && row.rhat > max_rhat) {
                max_rhat = row.rhat;
                worst = labels.empty() ? row.name : labels[b] + ":" + row.name;
            }
    const bool converged = max_rhat <= kRhatLimit;

    Json base = Json::object();
    for (std::size_t c = 0; c < data.populations.size(); ++c)
        base[data.populations[c]] = vector_to_json(data.log_rates[c].col(data.years.size() - 1));
    std::string key_material = manifest["inputs"]["data"]["sha256"].get<std::string>();
    for (const auto& p : data.populations) key_material += "\n" + p;
    key_material += cfg.zero_deaths == ZeroDeathPolicy::Reject ? "\nreject" : "\nimpute_half";
    manifest["fit"] = {{"model", cfg.model},
                       {"structure", std::string(to_string(cfg.kind()))},
                       {"populations", data.populations},
                       {"ages", data.ages},
                       {"years", data.years},
                       {"base_log_rates", base},
                       {"data_key", sha256_hex(key_material)},
                       {"draws", n_draws},
                       {"max_rhat", max_rhat},
                       {"max_rhat_parameter", worst},
                       {"converged", converged},
                       {"warnings", warnings}};
    finish_manifest(manifest, dir, files);

    for (const auto& w : warnings) err << "warning: " << w << '\n';
    out << "fit " << cfg.model << ": " << cfg.settings.n_chains << " chains, " << n_draws
        << " retained draws, max R-hat " << std::fixed << std::setprecision(4) << max_rhat
        << " (" << worst << ")\n";
    out.unsetf(std::ios::floatfield);
    if (!converged) {
        err << "nonconvergence: R-hat " << max_rhat << " > " << kRhatLimit << " for " << worst
            << "; see " << (dir / "diagnostics.csv").string() << '\n';
        return kExitStatistical;
    }
    return kExitOk;
}

struct ForecastArgs {
    std::string fit, out;
    int horizon = 0;
    std::vector<double> levels;
    std::optional<std::uint64_t> seed;
};

int cmd_forecast(const ForecastArgs& a, std::ostream& out, const CliEnvironment& env) {
    const FitDir fit = open_fit(a.fit);
    const std::uint64_t seed = resolve_seed(a.seed, kDefaultSeed, env);
    for (double l : a.levels)
        if (!(l > 0.0 && l < 1.0)) throw Error(Errc::InvalidConfig, "levels must lie in (0, 1)");
    const auto fans = make_fans(fit, a.horizon, seed);
    const fs::path dir(a.out);
    fs::create_directories(dir);

    std::vector<std::string> argv = {"forecast",   "--fit",  fit.dir.string(),
                                     "--horizon",  std::to_string(a.horizon),
                                     "--out",      absolute(a.out),
                                     "--seed",     std::to_string(seed)};
    for (double l : a.levels) argv.insert(argv.end(), {"--level", csv::format_double(l)});
    Json manifest = new_manifest("forecast", argv, seed);
    manifest["inputs"]["fit_manifest"] = file_record((fit.dir / "manifest.json").string());
    manifest["inputs"]["draws"] = file_record((fit.dir / "draws.csv").string());

    const bool multi = fit.config.is_multipop();
    const int A = static_cast<int>(fit.ages.size());
    const int H = a.horizon;
    {
        std::ofstream f(dir / "fan.csv", std::ios::binary);
        if (!f) throw Error(Errc::IoError, "cannot write fan.csv");
        f << (multi ? "country," : "") << "draw,age,horizon,log_rate\n";
        for (std::size_t c = 0; c < fans.size(); ++c) {
            const std::string prefix = multi ? csv::quote(fit.populations[c]) + "," : "";
            for (int s = 0; s < fans[c].size(); ++s)
                for (int x = 0; x < A; ++x) {
                    const std::string age = csv::quote(fit.ages[x]);
                    for (int h = 0; h < H; ++h)
                        f << prefix << s + 1 << ',' << age << ',' << h + 1 << ','
                          << csv::format_double(fans[c].log_rates[s](x, h)) << '\n';
                }
        }
    }
    {
        std::ofstream f(dir / "fan_summary.csv", std::ios::binary);
        if (!f) throw Error(Errc::IoError, "cannot write fan_summary.csv");
        f << (multi ? "country," : "") << "age,horizon,year,mean";
        for (double l : a.levels) f << ',' << level_column(l);
        f << '\n';
        for (std::size_t c = 0; c < fans.size(); ++c) {
            const auto& fan = fans[c];
            for (int x = 0; x < A; ++x)
                for (int h = 0; h < H; ++h) {
                    std::vector<double> v(fan.size());
                    for (int s = 0; s < fan.size(); ++s) v[s] = fan.log_rates[s](x, h);
                    double mean = 0.0;
                    for (double e : v) mean += e;
                    mean /= static_cast<double>(v.size());
                    if (multi) f << csv::quote(fit.populations[c]) << ',';
                    f << csv::quote(fit.ages[x]) << ',' << h + 1 << ',' << fan.base_year + h + 1
                      << ',' << csv::format_double(mean);
                    for (double l : a.levels) f << ',' << csv::format_double(quantile(v, l));
                    f << '\n';
                }
        }
    }
    {
        const DrawTable table = read_draws_csv((fit.dir / "draws.csv").string());
        std::ofstream f(dir / "shock_increase.csv", std::ios::binary);
        if (!f) throw Error(Errc::IoError, "cannot write shock_increase.csv");
        f << (multi ? "country," : "") << "age";
        for (double l : a.levels) f << ',' << level_column(l);
        f << '\n';
        for (std::size_t c = 0; c < fit.populations.size(); ++c) {
            const auto states =
                states_from_draws(table, fit.country_spec(), A, static_cast<int>(fit.years.size()),
                                  multi ? fit.populations[c] : std::string{});
            const Eigen::MatrixXd q = shock_increase_quantiles(states, a.levels);
            for (int x = 0; x < A; ++x) {
                if (multi) f << csv::quote(fit.populations[c]) << ',';
                f << csv::quote(fit.ages[x]);
                for (Eigen::Index k = 0; k < q.cols(); ++k) f << ',' << csv::format_double(q(x, k));
                f << '\n';
            }
        }
    }
    manifest["forecast"] = {{"fit", fit.dir.string()},
                            {"horizon", H},
                            {"levels", a.levels},
                            {"base_year", fit.years.back()}};
    finish_manifest(manifest, dir, {"fan.csv", "fan_summary.csv", "shock_increase.csv"});
    out << "forecast: " << fans.size() << " population(s), " << fans.front().size()
        << " draws x " << A << " ages x " << H << " years\n";
    return kExitOk;
}

struct ScoreArgs {
    std::string forecast, data, out;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const Json fm = read_manifest(a.forecast, "forecast");
    const FitDir fit = open_fit(fm.at("forecast").at("fit").get<std::string>());
    const int H = fm.at("forecast").at("horizon").get<int>();
    const auto fans = make_fans(fit, H, fm.at("seed").get<std::uint64_t>());
    const auto tables = load_mortality_tables(a.data, fit.config.schema);
    const bool multi = fit.config.is_multipop();
    const int A = static_cast<int>(fit.ages.size());
    const int base_year = fit.years.back();

    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::ofstream cells(dir / "scores.csv", std::ios::binary);
    std::ofstream summary(dir / "score_summary.csv", std::ios::binary);
    if (!cells || !summary) throw Error(Errc::IoError, "cannot write into '" + a.out + "'");
    cells << (multi ? "country," : "")
          << "age,horizon,year,log_score,crps,sq_error,abs_error\n";
    summary << (multi ? "country," : "") << "log_score,crps,mse,mae\n";
    for (std::size_t c = 0; c < fans.size(); ++c) {
        const auto& pop = fit.populations[c];
        const MortalityTable* table = nullptr;
        for (const auto& t : tables)
            if (t.population_id == pop) table = &t;
        if (!table && !multi && tables.size() == 1) table = &tables.front();
        if (!table) throw Error(Errc::ParseError, "population '" + pop + "' not in " + a.data);
        if (table->ages != fit.ages)
            throw Error(Errc::ShapeError, "held-out age groups differ from the fit");
        const auto first = std::find(table->years.begin(), table->years.end(), base_year + 1);
        if (first == table->years.end() || table->years.end() - first < H)
            throw Error(Errc::GridIncomplete, "held-out data must cover " +
                                                  std::to_string(base_year + 1) + "-" +
                                                  std::to_string(base_year + H));
        const auto offset = first - table->years.begin();
        const RateMatrix rates = central_death_rates(*table, fit.config.zero_deaths);
        const ScoreTable sc = forecast_scores(fans[c], rates.log_values.middleCols(offset, H));
        const std::string prefix = multi ? csv::quote(pop) + "," : "";
        for (int x = 0; x < A; ++x)
            for (int h = 0; h < H; ++h)
                cells << prefix << csv::quote(fit.ages[x]) << ',' << h + 1 << ','
                      << base_year + h + 1 << ',' << csv::format_double(sc.log_score(x, h)) << ','
                      << csv::format_double(sc.crps(x, h)) << ','
                      << csv::format_double(sc.sq_error(x, h)) << ','
                      << csv::format_double(sc.abs_error(x, h)) << '\n';
        summary << prefix << csv::format_double(sc.total_log_score) << ','
                << csv::format_double(sc.total_crps) << ',' << csv::format_double(sc.mse) << ','
                << csv::format_double(sc.mae) << '\n';
        out << (pop.empty() ? "scores" : pop) << ": LogS " << sc.total_log_score << ", CRPS "
            << sc.total_crps << ", MSE " << sc.mse << ", MAE " << sc.mae << '\n';
    }
    cells.close();
    summary.close();
    std::vector<std::string> argv = {"score", "--forecast", absolute(a.forecast), "--data",
                                     absolute(a.data), "--out", absolute(a.out)};
    Json manifest = new_manifest("score", argv, fm.at("seed").get<std::uint64_t>());
    manifest["inputs"]["forecast_manifest"] =
        file_record((fs::path(a.forecast) / "manifest.json").string());
    manifest["inputs"]["data"] = file_record(a.data);
    finish_manifest(manifest, dir, {"scores.csv", "score_summary.csv"});
    return kExitOk;
}

struct CompareArgs {
    std::vector<std::string> fits;
    std::string out;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
    if (a.fits.size() < 2) throw Error(Errc::InvalidConfig, "compare needs at least two fits");
    std::vector<std::string> labels;
    std::vector<Eigen::MatrixXd> logliks;
    std::string key;
    std::vector<std::string> columns;
    std::vector<std::string> argv = {"compare"};
    Json inputs = Json::object();
    std::map<std::string, int> seen;
    for (const auto& dir : a.fits) {
        const FitDir fit = open_fit(dir);
        const std::string k = fit.manifest.at("fit").at("data_key").get<std::string>();
        LogLikTable ll = read_loglik_csv((fit.dir / "loglik.csv").string());
        if (key.empty()) {
            key = k;
            columns = ll.columns;
        } else if (k != key || ll.columns != columns) {
            throw Error(Errc::IncompatibleFits,
                        "'" + dir + "' was fitted to different data than '" + a.fits.front() + "'");
        }
        std::string label = fit.config.is_multipop()
                                ? "multipop-" + std::string(to_string(fit.config.kind()))
                                : fit.config.model;
        if (seen[label]++) label += "#" + std::to_string(seen[label]);
        labels.push_back(label);
        logliks.push_back(std::move(ll.values));
        argv.push_back(fit.dir.string());
        inputs[label] = file_record((fit.dir / "loglik.csv").string());
    }
    const Comparison cmp = compare_models(labels, logliks);
    int best_loo = 0;
    for (std::size_t i = 1; i < cmp.rows.size(); ++i)
        if (cmp.rows[i].loo.lpd_loo > cmp.rows[best_loo].loo.lpd_loo) best_loo = static_cast<int>(i);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "comparison.csv", std::ios::binary);
        if (!f) throw Error(Errc::IoError, "cannot write comparison.csv");
        f << "model,lpd_hat,p_waic,waic,lpd_loo,p_loo,looic,n_high_k,best_waic,best_loo\n";
        for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
            const auto& r = cmp.rows[i];
            f << csv::quote(r.label) << ',' << csv::format_double(r.waic.lpd_hat) << ','
              << csv::format_double(r.waic.p_waic) << ',' << csv::format_double(r.waic.waic) << ','
              << csv::format_double(r.loo.lpd_loo) << ','
              << csv::format_double(r.waic.lpd_hat - r.loo.lpd_loo) << ','
              << csv::format_double(r.loo.deviance) << ',' << r.loo.n_high_k() << ','
              << (static_cast<int>(i) == cmp.best ? 1 : 0) << ','
              << (static_cast<int>(i) == best_loo ? 1 : 0) << '\n';
        }
    }
    // Console layout: a WAIC block and a LOO-CV block, best value starred.
    std::ostringstream table;
    table << std::fixed << std::setprecision(2);
    table << std::left << std::setw(16) << "Model" << "value\n";
    table << "WAIC\n";
    for (std::size_t i = 0; i < cmp.rows.size(); ++i)
        table << "  " << std::setw(14) << cmp.rows[i].label << cmp.rows[i].waic.waic
              << (static_cast<int>(i) == cmp.best ? " *" : "") << '\n';
    table << "LOO-CV\n";
    for (std::size_t i = 0; i < cmp.rows.size(); ++i)
        table << "  " << std::setw(14) << cmp.rows[i].label << cmp.rows[i].loo.deviance
              << (static_cast<int>(i) == best_loo ? " *" : "") << '\n';
    out << table.str();
    for (const auto& r : cmp.rows)
        for (const auto& w : r.loo.warnings) out << "note (" << r.label << "): " << w << '\n';

    argv.insert(argv.end(), {"--out", absolute(a.out)});
    Json manifest = new_manifest("compare", argv, 0);
    manifest["inputs"] = inputs;
    finish_manifest(manifest, dir, {"comparison.csv"});
    return kExitOk;
}

struct SimulateArgs {
    std::string model, out;
    int ages = 10, years = 33, first_year = 1991, populations = 1;
    std::optional<int> shock_year;
    std::optional<std::uint64_t> seed;
    bool verify = false;
};

// Recovers (coeff, N, Y) from a true jump path and checks them against the truth.
bool verify_identification(const ParameterState& truth, JumpKind kind, const std::string& label,
                           int first_year, std::ostream& out) {
    const int T = truth.n_years();
    double coeff = 0.0;
    try {
        if (kind == JumpKind::AR1) coeff = recover_ar_coefficient(truth.jump, T - 1);
        if (kind == JumpKind::MA1) coeff = recover_ma_coefficient(truth.jump, T - 1);
        const JumpSchedule sched = recover_jump_schedule(truth.jump, kind, coeff);
        bool ok = std::abs(coeff - truth.coeff) < 1e-9;
        for (int t = 0; t < T; ++t) {
            ok = ok && sched.occurrence[t] == truth.occurrence[t];
            if (truth.occurrence[t]) ok = ok && std::abs(sched.severity[t] - truth.severity[t]) < 1e-9;
        }
        out << label << ": ";
        if (has_coeff(kind))
            out << "recovered " << (kind == JumpKind::AR1 ? "a" : "b") << " = "
                << csv::format_double(coeff) << " (truth " << csv::format_double(truth.coeff)
                << "), ";
        out << "shock years";
        for (int t = 0; t < T; ++t)
            if (sched.occurrence[t]) out << ' ' << first_year + t;
        out << (ok ? "; schedule matches truth\n" : "; MISMATCH with truth\n");
        return ok;
    } catch (const Error& e) {
        out << label << ": identification failed: " << e.what();
        if (has_coeff(kind)) out << " (truth " << csv::format_double(truth.coeff) << ")";
        out << '\n';
        return false;
    }
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, const CliEnvironment& env) {
    const JumpKind kind = parse_jump_kind(a.model);
    if (a.ages < 1 || a.years < 3 || a.populations < 1)
        throw Error(Errc::InvalidConfig, "need ages >= 1, years >= 3, populations >= 1");
    const std::uint64_t seed = resolve_seed(a.seed, kDefaultSeed, env);
    const fs::path dir(a.out);
    fs::create_directories(dir);

    TruthRecord record;
    record.kind = kind;
    std::vector<MortalityTable> tables;
    const Eigen::VectorXd base = default_base_log_rates(a.ages);
    // The default truth has a two-year shock starting four years before the end.
    auto truth_for = [&](JumpKind k) {
        ParameterState s = default_truth(k, a.ages, a.years);
        if (!a.shock_year || !has_jumps(k)) return s;
        const int t = *a.shock_year - a.first_year;
        if (t < 2 || t + 1 > a.years - 2)
            throw Error(Errc::InvalidConfig, "shock year must leave two years before and one "
                                             "unpinned year after the shock");
        const int old = a.years - 4;
        std::swap(s.occurrence[old], s.occurrence[t]);
        std::swap(s.occurrence[old + 1], s.occurrence[t + 1]);
        std::swap(s.severity[old], s.severity[t]);
        std::swap(s.severity[old + 1], s.severity[t + 1]);
        s.refresh_jump(k);
        return s;
    };
    if (a.populations == 1) {
        const auto panel = simulate_dataset(truth_for(kind), kind, base, seed);
        tables.push_back(panel_to_table(panel.log_rates, a.first_year, "synthetic"));
        record.states.push_back(panel.truth);
    } else {
        const int C = a.populations;
        MultiPopState truth;
        std::vector<Eigen::VectorXd> bases;
        for (int c = 0; c < C; ++c) {
            ParameterState s = truth_for(kind);
            s.drift = -0.15 + 0.03 * c;
            s.dkappa[0] = s.drift;
            truth.countries.push_back(s);
            bases.push_back(base.array() + 0.1 * c);
        }
        truth.occurrence = truth.countries.front().occurrence;
        truth.p = truth.countries.front().p;
        const double v = truth.countries.front().sigma_xi * truth.countries.front().sigma_xi;
        truth.covariance = Eigen::MatrixXd::Constant(C, C, 0.5 * v);
        truth.covariance.diagonal().setConstant(v);
        const auto panel = simulate_multipop(truth, kind, bases, seed);
        for (int c = 0; c < C; ++c) {
            tables.push_back(panel_to_table(panel.log_rates[c], a.first_year,
                                            "pop" + std::to_string(c + 1)));
            record.states.push_back(panel.truth.countries[c]);
        }
        record.covariance = panel.truth.covariance;
    }
    for (const auto& t : tables) record.populations.push_back(t.population_id);
    record.ages = tables.front().ages;
    record.years = tables.front().years;
    write_mortality_tables((dir / "data.csv").string(), tables);
    write_truth_json((dir / "truth.json").string(), record);

    std::vector<std::string> argv = {"simulate",     "--model", a.model,
                                     "--out",        absolute(a.out),
                                     "--seed",       std::to_string(seed),
                                     "--ages",       std::to_string(a.ages),
                                     "--years",      std::to_string(a.years),
                                     "--first-year", std::to_string(a.first_year),
                                     "--populations", std::to_string(a.populations)};
    if (a.shock_year) argv.insert(argv.end(), {"--shock-year", std::to_string(*a.shock_year)});
    if (a.verify) argv.push_back("--verify");
    Json manifest = new_manifest("simulate", argv, seed);
    finish_manifest(manifest, dir, {"data.csv", "truth.json"});
    out << "simulated " << tables.size() << " population(s), " << a.ages << " ages x " << a.years
        << " years -> " << (dir / "data.csv").string() << '\n';

    if (!a.verify) return kExitOk;
    bool ok = true;
    for (std::size_t c = 0; c < record.states.size(); ++c)
        ok = verify_identification(record.states[c], kind, record.populations[c], a.first_year, out) && ok;
    return ok ? kExitOk : kExitStatistical;
}

struct ReplayArgs {
    std::string dir, out;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
    Json m = read_json((fs::path(a.dir) / "manifest.json").string());
    if (!m.contains("argv") || !m.contains("outputs"))
        throw Error(Errc::InvalidConfig, "'" + a.dir + "' has no replayable manifest");
    for (const auto& [name, rec] : m.at("inputs").items()) {
        const auto path = rec.at("path").get<std::string>();
        if (!fs::exists(path) || sha256_file(path) != rec.at("sha256").get<std::string>())
            throw Error(Errc::IncompatibleFits, "input '" + name + "' (" + path +
                                                    ") changed since the run");
    }
    auto argv = m.at("argv").get<std::vector<std::string>>();
    const std::string target = a.out.empty() ? absolute(a.dir) + ".replay" : absolute(a.out);
    if (fs::absolute(target) == fs::absolute(a.dir))
        throw Error(Errc::InvalidConfig, "replay output must differ from the original run");
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == "--out") argv[i + 1] = target;
    std::ostringstream sink;
    const int code = run_cli(argv, sink, err, CliEnvironment{});
    if (code == kExitUsage) return code;
    const Json again = read_json((fs::path(target) / "manifest.json").string());
    bool same = true;
    for (const auto& [file, hash] : m.at("outputs").items()) {
        const bool match = again.at("outputs").contains(file) && again.at("outputs").at(file) == hash;
        out << (match ? "identical  " : "DIFFERENT  ") << file << '\n';
        same = same && match;
    }
    out << (same ? "replay reproduced all outputs bit-exactly\n" : "replay differs\n");
    return same ? kExitOk : kExitStatistical;
}

}  // namespace

CliEnvironment environment_from_process() {
    CliEnvironment env;
    if (const char* s = std::getenv("MORTJUMP_SEED"); s && *s) {
        std::uint64_t v = 0;
        const char* end = s + std::char_traits<char>::length(s);
        auto [ptr, ec] = std::from_chars(s, end, v);
        if (ec != std::errc() || ptr != end)
            throw Error(Errc::InvalidConfig, std::string("MORTJUMP_SEED is not an integer: ") + s);
        env.seed = v;
    }
    return env;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnvironment& env) {
    CLI::App app{"Bayesian Lee-Carter models with vanishing jumps", "mortjump"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit a model by MCMC");
    c_fit->add_option("--data", fit.data, "Long-format CSV of deaths and exposures")
        ->required()
        ->check(CLI::ExistingFile);
    c_fit->add_option("--model", fit.model, "lc, liuli, ar, ma or multipop")
        ->required()
        ->check(CLI::IsMember({"lc", "liuli", "ar", "ma", "multipop"}));
    c_fit->add_option("--config", fit.config, "JSON run configuration")->check(CLI::ExistingFile);
    c_fit->add_option("--out", fit.out, "Output directory")->required();
    c_fit->add_option("--seed", fit.seed, "Master seed (MORTJUMP_SEED overrides)");
    c_fit->add_option("--threads", fit.threads, "Chains run in parallel (0 = one per chain)")
        ->check(CLI::NonNegativeNumber);
    c_fit->add_option("--population", fit.population, "Population to fit");

    ForecastArgs fc;
    fc.levels = {0.1, 0.5, 0.9};
    auto* c_fc = app.add_subcommand("forecast", "Simulate the posterior-predictive fan");
    c_fc->add_option("--fit", fc.fit, "Fit directory")->required()->check(CLI::ExistingDirectory);
    c_fc->add_option("--horizon", fc.horizon, "Years ahead")->required();
    c_fc->add_option("--out", fc.out, "Output directory")->required();
    c_fc->add_option("--seed", fc.seed, "Forecast seed (MORTJUMP_SEED overrides)");
    c_fc->add_option("--level", fc.levels, "Quantile levels of the summary")->take_all();

    ScoreArgs sc;
    auto* c_sc = app.add_subcommand("score", "Score a forecast against held-out data");
    c_sc->add_option("--forecast", sc.forecast, "Forecast directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_sc->add_option("--data", sc.data, "Held-out CSV")->required()->check(CLI::ExistingFile);
    c_sc->add_option("--out", sc.out, "Output directory")->required();

    CompareArgs cmp;
    auto* c_cmp = app.add_subcommand("compare", "WAIC and LOO-CV table of several fits");
    c_cmp->add_option("fits", cmp.fits, "Fit directories")->required()->expected(2, -1)
        ->check(CLI::ExistingDirectory);
    c_cmp->add_option("--out", cmp.out, "Output directory")->required();

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Write a synthetic dataset with its truth");
    c_sim->add_option("--model", sim.model, "lc, liuli, ar or ma")
        ->required()
        ->check(CLI::IsMember({"lc", "liuli", "ar", "ma"}));
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_option("--seed", sim.seed, "Seed (MORTJUMP_SEED overrides)");
    c_sim->add_option("--ages", sim.ages, "Age groups");
    c_sim->add_option("--years", sim.years, "Years");
    c_sim->add_option("--first-year", sim.first_year, "First calendar year");
    c_sim->add_option("--populations", sim.populations, "Populations sharing the shocks");
    c_sim->add_option("--shock-year", sim.shock_year, "First year of the two-year shock");
    c_sim->add_flag("--verify", sim.verify, "Check the identification round trip on the truth");

    ReplayArgs rp;
    auto* c_rp = app.add_subcommand("replay", "Re-run a command from its manifest and compare");
    c_rp->add_option("dir", rp.dir, "Output directory of the original run")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_rp->add_option("--out", rp.out, "Where to write the re-run (default <dir>.replay)");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        if (*c_fit) return cmd_fit(fit, out, err, env);
        if (*c_fc) return cmd_forecast(fc, out, env);
        if (*c_sc) return cmd_score(sc, out);
        if (*c_cmp) return cmd_compare(cmp, out);
        if (*c_sim) return cmd_simulate(sim, out, env);
        if (*c_rp) return cmd_replay(rp, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: IoError: " << e.what() << '\n';
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: ParseError: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace mortjump
