#include "mortjump/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "csv.hpp"
#include "mortjump/error.hpp"

namespace mortjump {

void MortalityTable::validate() const {
    const auto A = static_cast<Eigen::Index>(ages.size());
    const auto T = static_cast<Eigen::Index>(years.size());
    if (deaths.rows() != A || deaths.cols() != T || exposures.rows() != A ||
        exposures.cols() != T)
        throw Error(Errc::ShapeError, "deaths/exposures do not match the age x year grid");
    for (std::size_t i = 1; i < years.size(); ++i)
        if (years[i] != years[i - 1] + 1)
            throw Error(Errc::GridIncomplete, "years are not consecutive at " +
                                                  std::to_string(years[i - 1]));
    for (Eigen::Index x = 0; x < A; ++x) {
        for (Eigen::Index t = 0; t < T; ++t) {
            if (!(exposures(x, t) > 0.0) || !std::isfinite(exposures(x, t)))
                throw Error(Errc::InvalidExposure, "exposure at age '" + ages[x] + "', year " +
                                                       std::to_string(years[t]) + " is not positive");
            if (!(deaths(x, t) >= 0.0) || !std::isfinite(deaths(x, t)))
                throw Error(Errc::ParseError, "negative deaths at age '" + ages[x] + "', year " +
                                                  std::to_string(years[t]));
        }
    }
}

namespace {

struct Cell {
    double deaths;
    double exposure;
};

struct Accumulator {
    std::vector<std::string> ages;
    std::map<std::string, int> age_index;
    std::map<std::pair<int, int>, Cell> cells;  // (age index, year)
    std::set<int> years;
};

MortalityTable finish(const std::string& population, const Accumulator& acc) {
    MortalityTable table;
    table.population_id = population;
    table.ages = acc.ages;
    const int first = *acc.years.begin();
    const int last = *acc.years.rbegin();
    for (int y = first; y <= last; ++y) table.years.push_back(y);
    const auto A = static_cast<Eigen::Index>(table.ages.size());
    const auto T = static_cast<Eigen::Index>(table.years.size());
    table.deaths.resize(A, T);
    table.exposures.resize(A, T);
    for (Eigen::Index x = 0; x < A; ++x) {
        for (Eigen::Index t = 0; t < T; ++t) {
            auto it = acc.cells.find({static_cast<int>(x), table.years[t]});
            if (it == acc.cells.end())
                throw Error(Errc::GridIncomplete,
                            "population '" + population + "': missing cell age '" +
                                table.ages[x] + "', year " + std::to_string(table.years[t]));
            table.deaths(x, t) = it->second.deaths;
            table.exposures(x, t) = it->second.exposure;
        }
    }
    table.validate();
    return table;
}

}  // namespace

std::vector<MortalityTable> load_mortality_tables(const std::string& path,
                                                  const CsvSchema& schema) {
    const auto raw = csv::read(path);
    const int c_age = raw.column(schema.age);
    const int c_year = raw.column(schema.year);
    const int c_deaths = raw.column(schema.deaths);
    const int c_exp = raw.column(schema.exposure);
    const int c_pop = raw.column(schema.population);
    for (auto [col, name] : {std::pair{c_age, schema.age}, {c_year, schema.year},
                             {c_deaths, schema.deaths}, {c_exp, schema.exposure}})
        if (col < 0) throw Error(Errc::ParseError, "'" + path + "' lacks column '" + name + "'");

    std::vector<std::string> order;
    std::map<std::string, Accumulator> pops;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& row = raw.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        const std::string pop = c_pop >= 0 ? row[c_pop] : std::string{};
        auto [it, inserted] = pops.try_emplace(pop);
        if (inserted) order.push_back(pop);
        auto& acc = it->second;
        const auto& age = row[c_age];
        auto [ait, new_age] = acc.age_index.try_emplace(age, static_cast<int>(acc.ages.size()));
        if (new_age) acc.ages.push_back(age);
        const int year = static_cast<int>(csv::parse_int(row[c_year], ctx));
        const double d = csv::parse_double(row[c_deaths], ctx);
        const double e = csv::parse_double(row[c_exp], ctx);
        if (!(e > 0.0))
            throw Error(Errc::InvalidExposure, ctx + ": exposure " + row[c_exp] + " <= 0");
        if (!(d >= 0.0)) throw Error(Errc::ParseError, ctx + ": negative deaths");
        if (!acc.cells.emplace(std::pair{ait->second, year}, Cell{d, e}).second)
            throw Error(Errc::DuplicateCell, ctx + ": duplicate cell age '" + age + "', year " +
                                                 std::to_string(year));
        acc.years.insert(year);
    }
    if (order.empty()) throw Error(Errc::GridIncomplete, "'" + path + "' has no data rows");

    std::vector<MortalityTable> tables;
    for (const auto& pop : order) tables.push_back(finish(pop, pops.at(pop)));
    return tables;
}

MortalityTable load_mortality_table(const std::string& path, const CsvSchema& schema,
                                    const std::string& population) {
    auto tables = load_mortality_tables(path, schema);
    if (!population.empty()) {
        for (auto& t : tables)
            if (t.population_id == population) return std::move(t);
        throw Error(Errc::ParseError, "population '" + population + "' not found in " + path);
    }
    if (tables.size() != 1)
        throw Error(Errc::ParseError, "'" + path + "' holds " + std::to_string(tables.size()) +
                                          " populations; select one");
    return std::move(tables.front());
}

void write_mortality_tables(const std::string& path, const std::vector<MortalityTable>& tables,
                            const CsvSchema& schema) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
    out << csv::quote(schema.population) << ',' << csv::quote(schema.age) << ','
        << csv::quote(schema.year) << ',' << csv::quote(schema.deaths) << ','
        << csv::quote(schema.exposure) << '\n';
    for (const auto& t : tables) {
        for (int x = 0; x < t.n_ages(); ++x)
            for (int j = 0; j < t.n_years(); ++j)
                out << csv::quote(t.population_id) << ',' << csv::quote(t.ages[x]) << ','
                    << t.years[j] << ',' << csv::format_double(t.deaths(x, j)) << ','
                    << csv::format_double(t.exposures(x, j)) << '\n';
    }
}

RateMatrix central_death_rates(const MortalityTable& table, ZeroDeathPolicy policy) {
    table.validate();
    RateMatrix rates;
    rates.values = table.deaths.cwiseQuotient(table.exposures);
    for (Eigen::Index x = 0; x < rates.values.rows(); ++x) {
        for (Eigen::Index t = 0; t < rates.values.cols(); ++t) {
            if (table.deaths(x, t) > 0.0) continue;
            if (policy == ZeroDeathPolicy::Reject)
                throw Error(Errc::ZeroDeathCell,
                            "zero deaths at age '" + table.ages[x] + "', year " +
                                std::to_string(table.years[t]) + " (cell " + std::to_string(x) +
                                "," + std::to_string(t) + ")");
            rates.values(x, t) = 0.5 / table.exposures(x, t);
        }
    }
    rates.log_values = rates.values.array().log().matrix();
    return rates;
}

RateMatrix rates_from_log(const Eigen::MatrixXd& log_values) {
    return RateMatrix{log_values.array().exp().matrix(), log_values};
}

ImprovementMatrix improvement_rates(const RateMatrix& rates) {
    const auto T = rates.log_values.cols();
    if (T < 2) throw Error(Errc::TooFewYears, "need at least two years, got " + std::to_string(T));
    ImprovementMatrix z;
    z.values = rates.log_values.rightCols(T - 1) - rates.log_values.leftCols(T - 1);
    return z;
}

}  // namespace mortjump
