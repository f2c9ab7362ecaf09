#include <cmath>
#include <sstream>

#include "mortjump/data.hpp"
#include "support.hpp"

using namespace mortjump;
using mortjump::testing::TempDir;
using mortjump::testing::write_text;
using Catch::Approx;

namespace {

std::string grid_csv(int n_ages, int first_year, int n_years) {
    std::ostringstream s;
    s << "age,year,deaths,exposure\n";
    for (int x = 0; x < n_ages; ++x)
        for (int t = 0; t < n_years; ++t)
            s << "g" << x << ',' << first_year + t << ',' << 10 + x + t << ",1000\n";
    return s.str();
}

MortalityTable single_age(std::vector<double> deaths, std::vector<double> exposures) {
    MortalityTable t;
    t.ages = {"0"};
    const int T = static_cast<int>(deaths.size());
    for (int j = 0; j < T; ++j) t.years.push_back(2000 + j);
    t.deaths = Eigen::Map<Eigen::RowVectorXd>(deaths.data(), T);
    t.exposures = Eigen::Map<Eigen::RowVectorXd>(exposures.data(), T);
    return t;
}

}  // namespace

TEST_CASE("load_mortality_table reads a complete 10 x 33 grid", "[data]") {
    TempDir dir("data");
    write_text(dir.file("grid.csv"), grid_csv(10, 1991, 33));
    const auto t = load_mortality_table(dir.file("grid.csv"));
    CHECK(t.n_ages() == 10);
    CHECK(t.n_years() == 33);
    CHECK(t.years.front() == 1991);
    CHECK(t.years.back() == 2023);
    CHECK(t.ages[3] == "g3");
    CHECK(t.deaths(3, 5) == 18.0);
}

TEST_CASE("load_mortality_table rejects malformed grids", "[data]") {
    TempDir dir("data");
    std::string text = grid_csv(2, 2000, 3);

    SECTION("missing cell") {
        const auto pos = text.find("g1,2001");
        write_text(dir.file("f.csv"), text.erase(pos, text.find('\n', pos) - pos + 1));
        REQUIRE_ERRC(load_mortality_table(dir.file("f.csv")), Errc::GridIncomplete);
    }
    SECTION("zero exposure") {
        std::string bad = text;
        bad.replace(bad.find("1000"), 4, "0");
        write_text(dir.file("f.csv"), bad);
        REQUIRE_ERRC(load_mortality_table(dir.file("f.csv")), Errc::InvalidExposure);
    }
    SECTION("duplicate cell") {
        write_text(dir.file("f.csv"), text + "g0,2000,1,1000\n");
        REQUIRE_ERRC(load_mortality_table(dir.file("f.csv")), Errc::DuplicateCell);
    }
    SECTION("non-numeric deaths") {
        write_text(dir.file("f.csv"), text + "g0,2003,1;5,1000\n");
        REQUIRE_ERRC(load_mortality_table(dir.file("f.csv")), Errc::ParseError);
    }
}

TEST_CASE("load_mortality_tables splits populations and honours the schema", "[data]") {
    TempDir dir("data");
    write_text(dir.file("m.csv"),
               "Country,Age,Year,D,E\n"
               "US,young,2000,1,10\nUS,young,2001,2,10\nUS,old,2000,3,10\nUS,old,2001,4,10\n"
               "PL,young,2000,5,10\nPL,young,2001,6,10\nPL,old,2000,7,10\nPL,old,2001,8,10\n");
    CsvSchema schema{"Age", "Year", "D", "E", "Country"};
    const auto tables = load_mortality_tables(dir.file("m.csv"), schema);
    REQUIRE(tables.size() == 2);
    CHECK(tables[0].population_id == "US");
    CHECK(tables[1].population_id == "PL");
    CHECK(tables[1].deaths(1, 1) == 8.0);
    CHECK(load_mortality_table(dir.file("m.csv"), schema, "PL").deaths(0, 0) == 5.0);
    REQUIRE_ERRC(load_mortality_table(dir.file("m.csv"), schema), Errc::ParseError);
}

TEST_CASE("write_mortality_tables round-trips", "[data]") {
    TempDir dir("data");
    write_text(dir.file("g.csv"), grid_csv(3, 2000, 4));
    const auto t = load_mortality_table(dir.file("g.csv"));
    write_mortality_tables(dir.file("out.csv"), {t});
    const auto back = load_mortality_table(dir.file("out.csv"));
    CHECK(back.ages == t.ages);
    CHECK(back.years == t.years);
    CHECK(back.deaths == t.deaths);
    CHECK(back.exposures == t.exposures);
}

TEST_CASE("central_death_rates", "[data]") {
    CHECK(central_death_rates(single_age({5}, {100})).values(0, 0) == Approx(0.05));
    REQUIRE_ERRC(central_death_rates(single_age({0}, {100})), Errc::ZeroDeathCell);
    CHECK(central_death_rates(single_age({0}, {100}), ZeroDeathPolicy::ImputeHalf).values(0, 0) ==
          Approx(0.005));

    const auto same = central_death_rates(single_age({3, 7, 11}, {3, 7, 11}));
    CHECK(same.values.isOnes());
    CHECK(same.log_values.isZero(0.0));
}

TEST_CASE("improvement_rates", "[data]") {
    SECTION("constant rates give zero improvements") {
        const auto z = improvement_rates(central_death_rates(single_age({5, 5, 5}, {100, 100, 100})));
        CHECK(z.n_cols() == 2);
        CHECK(z.values.isZero(0.0));
    }
    SECTION("doubling rates give ln 2") {
        const auto z = improvement_rates(central_death_rates(single_age({1, 2, 4, 8}, {1, 1, 1, 1})));
        for (int c = 0; c < 3; ++c) CHECK(z.values(0, c) == Approx(0.693147).margin(1e-6));
    }
    SECTION("hand example") {
        const auto z = improvement_rates(
            central_death_rates(single_age({0.05, 0.04, 0.045}, {1, 1, 1})));
        CHECK(z.values(0, 0) == Approx(std::log(0.8)).epsilon(1e-14));
        CHECK(z.values(0, 1) == Approx(std::log(1.125)).epsilon(1e-14));
    }
    SECTION("one year is too few") {
        REQUIRE_ERRC(improvement_rates(central_death_rates(single_age({1}, {2}))),
                     Errc::TooFewYears);
    }
}

TEST_CASE("improvements: cumulative sums recover log rates; scaling leaves Z unchanged",
          "[data][property]") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.5, 50.0);
    for (int rep = 0; rep < 50; ++rep) {
        MortalityTable t;
        t.ages = {"a", "b", "c"};
        for (int j = 0; j < 12; ++j) t.years.push_back(1990 + j);
        t.deaths.resize(3, 12);
        t.exposures = Eigen::MatrixXd::Constant(3, 12, 1000.0);
        for (int x = 0; x < 3; ++x)
            for (int j = 0; j < 12; ++j) t.deaths(x, j) = u(gen);
        const auto rates = central_death_rates(t);
        const auto z = improvement_rates(rates);
        Eigen::VectorXd acc = rates.log_values.col(0);
        for (int c = 0; c < z.n_cols(); ++c) {
            acc += z.values.col(c);
            REQUIRE((acc - rates.log_values.col(c + 1)).cwiseAbs().maxCoeff() < 1e-12);
        }
        MortalityTable scaled = t;
        scaled.deaths *= 3.7;
        const auto zs = improvement_rates(central_death_rates(scaled));
        REQUIRE((zs.values - z.values).cwiseAbs().maxCoeff() < 1e-12);
    }
}
