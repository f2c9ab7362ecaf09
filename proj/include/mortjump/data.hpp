#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mortjump {

/// Deaths and central exposures on an age-group x calendar-year grid.
struct MortalityTable {
    std::vector<std::string> ages;  // A labels, in order of first appearance
    std::vector<int> years;         // T consecutive years, increasing
    Eigen::MatrixXd deaths;         // A x T, >= 0
    Eigen::MatrixXd exposures;      // A x T, > 0
    std::string population_id;

    int n_ages() const { return static_cast<int>(ages.size()); }
    int n_years() const { return static_cast<int>(years.size()); }

    /// Throws if any invariant is broken.
    void validate() const;
};

/// Central death rates m = D / E and their natural logs.
struct RateMatrix {
    Eigen::MatrixXd values;
    Eigen::MatrixXd log_values;
};

/// Mortality-improvement rates Z(x, t) = ln m(x, t+1) - ln m(x, t), A x (T-1).
struct ImprovementMatrix {
    Eigen::MatrixXd values;

    int n_ages() const { return static_cast<int>(values.rows()); }
    int n_cols() const { return static_cast<int>(values.cols()); }
};

/// Column names of the long-format input CSV.
struct CsvSchema {
    std::string age = "age";
    std::string year = "year";
    std::string deaths = "deaths";
    std::string exposure = "exposure";
    std::string population = "population";  // optional column
};

enum class ZeroDeathPolicy {
    Reject,      // ZeroDeathCell error
    ImputeHalf,  // replace D = 0 with D = 0.5
};

/// Reads every population found in a long-format CSV. Tables come back in order
/// of first appearance of their population id.
std::vector<MortalityTable> load_mortality_tables(const std::string& path,
                                                  const CsvSchema& schema = {});

/// Reads a CSV holding exactly one population (or selects `population` when given).
MortalityTable load_mortality_table(const std::string& path, const CsvSchema& schema = {},
                                    const std::string& population = {});

/// Writes tables in the long format understood by load_mortality_tables.
void write_mortality_tables(const std::string& path, const std::vector<MortalityTable>& tables,
                            const CsvSchema& schema = {});

RateMatrix central_death_rates(const MortalityTable& table,
                               ZeroDeathPolicy policy = ZeroDeathPolicy::Reject);

RateMatrix rates_from_log(const Eigen::MatrixXd& log_values);

ImprovementMatrix improvement_rates(const RateMatrix& rates);

}  // namespace mortjump
