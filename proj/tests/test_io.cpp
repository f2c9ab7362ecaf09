#include <fstream>

#include "mortjump/io.hpp"
#include "mortjump/synth.hpp"
#include "support.hpp"

using namespace mortjump;
using namespace mortjump::testing;
using Catch::Approx;

namespace {

PosteriorDraws short_fit(JumpKind kind, int A = 3, int T = 9) {
    ModelSpec spec;
    spec.kind = kind;
    const auto panel = simulate_dataset(default_truth(kind, A, T), kind, default_base_log_rates(A), 3);
    McmcSettings st;
    st.burn_in = 50;
    st.n_samples = 40;
    st.thin = 4;
    return run_mcmc(spec, panel.z, st);
}

}  // namespace

TEST_CASE("config round trip", "[io]") {
    const RunConfig defaults = parse_config(Json::object());
    const Json resolved = config_to_json(defaults);
    CHECK(config_to_json(parse_config(resolved)) == resolved);
    // The bundled default config is the fully resolved default.
    CHECK(read_json(std::string(MORTJUMP_SOURCE_DIR) + "/configs/covid.json") == resolved);

    const auto ew = load_config(std::string(MORTJUMP_SOURCE_DIR) + "/configs/england_wales.json");
    CHECK(ew.prior_preset == "england_wales");
    CHECK(ew.priors.severity == SeveritySupport::Gaussian);
    CHECK(ew.priors.coeff.family == CoeffPrior::Family::Beta);
    CHECK(config_to_json(parse_config(config_to_json(ew))) == config_to_json(ew));

    const auto mp = load_config(std::string(MORTJUMP_SOURCE_DIR) + "/configs/multipop.json");
    CHECK(mp.is_multipop());
    CHECK(mp.multipop_structure == JumpKind::MA1);
}

TEST_CASE("config parsing is strict", "[io]") {
    REQUIRE_ERRC(parse_config(Json::parse(R"({"modle": "ar"})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"priors": {"p_aa": 1}})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"mcmc": {"thin": "ten"}})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"mcmc": {"thin": 0}})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"priors": {"preset": "mars"}})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"priors": {"severity": "both"}})")), Errc::InvalidConfig);
    REQUIRE_ERRC(parse_config(Json::parse(R"({"multipop": {"iw_scale": -1}})")), Errc::InvalidConfig);

    TempDir dir("io-config");
    write_text(dir.file("broken.json"), "{ not json");
    REQUIRE_ERRC(load_config(dir.file("broken.json")), Errc::InvalidConfig);
}

TEST_CASE("config years become indices", "[io]") {
    RunConfig c = parse_config(Json::parse(R"({"constraints": {"no_jump_year": 2019, "extra_pins": [2010]}})"));
    std::vector<int> years;
    for (int y = 2000; y <= 2023; ++y) years.push_back(y);
    const auto k = c.constraints(years);
    CHECK(k.no_jump_year == 19);
    CHECK(k.extra_pins == std::vector<int>{10});
    c.no_jump_year = 1999;
    REQUIRE_ERRC(c.constraints(years), Errc::InvalidConfig);
}

TEST_CASE("sha256", "[io]") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir("io-sha");
    write_text(dir.file("abc.txt"), "abc");
    CHECK(sha256_file(dir.file("abc.txt")) == sha256_hex("abc"));
}

TEST_CASE("draws and log-likelihood round trip exactly", "[io]") {
    const auto draws = short_fit(JumpKind::MA1);
    TempDir dir("io-draws");
    write_draws_csv(dir.file("draws.csv"), draws);
    const auto table = read_draws_csv(dir.file("draws.csv"));
    CHECK(table.columns == parameter_names(draws.spec, 3, 9));
    CHECK(table.chain == draws.chain);
    CHECK(table.iteration == draws.iteration);
    const auto states = states_from_draws(table, draws.spec, 3, 9);
    REQUIRE(states.size() == draws.states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        CHECK(flatten_state(states[i], draws.spec) == flatten_state(draws.states[i], draws.spec));

    const auto cols = loglik_columns({"pop"}, {"0", "1", "2"}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    REQUIRE(static_cast<Eigen::Index>(cols.size()) == draws.loglik.cols());
    CHECK(cols.front() == "pop|0|2");
    CHECK(cols.back() == "pop|2|9");
    write_loglik_csv(dir.file("loglik.csv"), cols, draws.chain, draws.iteration, draws.loglik);
    const auto ll = read_loglik_csv(dir.file("loglik.csv"));
    CHECK(ll.columns == cols);
    CHECK(ll.values == draws.loglik);

    ModelSpec other;
    other.kind = JumpKind::AR1;
    REQUIRE_ERRC(states_from_draws(table, other, 3, 10), Errc::ShapeError);
}

TEST_CASE("truth record round trip", "[io]") {
    TruthRecord rec;
    rec.kind = JumpKind::AR1;
    rec.populations = {"a", "b"};
    rec.ages = {"0", "1", "2"};
    rec.years = {2000, 2001, 2002, 2003};
    rec.states = {default_truth(JumpKind::AR1, 3, 4), default_truth(JumpKind::AR1, 3, 4)};
    rec.states[1].drift = -0.1 / 3.0;
    rec.covariance = Eigen::MatrixXd::Identity(2, 2) * 0.0225;
    rec.covariance(0, 1) = rec.covariance(1, 0) = 0.01;
    TempDir dir("io-truth");
    write_truth_json(dir.file("truth.json"), rec);
    const auto back = read_truth_json(dir.file("truth.json"));
    CHECK(back.kind == rec.kind);
    CHECK(back.populations == rec.populations);
    CHECK(back.years == rec.years);
    CHECK(back.covariance == rec.covariance);
    REQUIRE(back.states.size() == 2);
    ModelSpec spec;
    spec.kind = JumpKind::AR1;
    CHECK(flatten_state(back.states[1], spec) == flatten_state(rec.states[1], spec));

    write_text(dir.file("bad.json"), R"({"model": "ar"})");
    REQUIRE_ERRC(read_truth_json(dir.file("bad.json")), Errc::ParseError);
}

TEST_CASE("bundled truth matches the bundled data", "[io]") {
    const std::string root = MORTJUMP_SOURCE_DIR;
    const auto truth = read_truth_json(root + "/data/synthetic_ar_truth.json");
    const auto table = load_mortality_table(root + "/data/synthetic_ar.csv");
    CHECK(truth.kind == JumpKind::AR1);
    CHECK(truth.ages == table.ages);
    CHECK(truth.years.front() == table.years.front());
    CHECK(truth.years.size() == table.years.size() + 10);
}

TEST_CASE("diagnostics table layout", "[io]") {
    ParameterSummary row;
    row.name = "d";
    row.mean = -0.15;
    row.rhat = std::numeric_limits<double>::quiet_NaN();
    TempDir dir("io-diag");
    write_diagnostics_csv(dir.file("diag.csv"), {{row}}, {});
    const auto text = read_text(dir.file("diag.csv"));
    CHECK(text.rfind("parameter,mean,map,sd,q10,q90,rhat,ess_bulk,ess_tail\n", 0) == 0);
    CHECK(text.find("NA") != std::string::npos);
}
