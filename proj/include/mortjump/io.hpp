#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mortjump/data.hpp"
#include "mortjump/diagnostics.hpp"
#include "mortjump/multipop.hpp"
#include "mortjump/samplers.hpp"

namespace mortjump {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

/// Everything a fit needs besides the data file. Years in constraints are
/// calendar years; they become indices once the data's year range is known.
struct RunConfig {
    std::string model = "ar";  // lc, liuli, ar, ma or multipop
    PriorConfig priors = PriorConfig::covid();
    std::string prior_preset = "covid";
    std::optional<int> no_jump_year;  // default: last year of the data
    std::vector<int> extra_pin_years;
    std::optional<double> fixed_coeff;
    McmcSettings settings;
    CsvSchema schema;
    ZeroDeathPolicy zero_deaths = ZeroDeathPolicy::Reject;
    std::string population;                // single-population fits: which one
    std::vector<std::string> populations;  // multipop: subset and order, empty = all
    JumpKind multipop_structure = JumpKind::AR1;
    double iw_extra_dof = 2.0;
    double iw_scale = 1.0;
    bool diagonal_covariance = false;

    bool is_multipop() const { return model == "multipop"; }
    JumpKind kind() const;
    /// Pins as year indices for data covering `years`.
    ConstraintConfig constraints(const std::vector<int>& years) const;
    ModelSpec model_spec(const std::vector<int>& years) const;
    MultiPopSpec multipop_spec(const std::vector<int>& years) const;
};

/// Strict parse: unknown keys and wrong types raise InvalidConfig.
RunConfig parse_config(const Json& j);
RunConfig load_config(const std::string& path);
/// Fully resolved form; parse_config(config_to_json(c)) reproduces c.
Json config_to_json(const RunConfig& config);

Json read_json(const std::string& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::string& path, const Json& j);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Retained draws as a table: one row per (draw, country). `country` is empty
/// for single-population fits, in which case the column is omitted.
struct DrawTable {
    std::vector<std::string> columns;  // parameter names (excluding chain/iteration/country)
    std::vector<int> chain;
    std::vector<int> iteration;
    std::vector<std::string> country;
    std::vector<std::vector<double>> values;
};

void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
void write_multipop_draws_csv(const std::string& path, const MultiPopDraws& draws,
                              const std::vector<std::string>& countries);
DrawTable read_draws_csv(const std::string& path);
/// States of one country (all rows when `country` is empty), in file order.
std::vector<ParameterState> states_from_draws(const DrawTable& table, const ModelSpec& spec,
                                              int n_ages, int n_years,
                                              const std::string& country = {});

/// Covariance draws of a multipop fit, columns cov[i,j] for i <= j.
void write_covariance_csv(const std::string& path, const MultiPopDraws& draws);

/// Column labels of the pointwise log-likelihood: "<population>|<age>|<year>" where
/// year is the later year of the improvement.
std::vector<std::string> loglik_columns(const std::vector<std::string>& populations,
                                        const std::vector<std::string>& ages,
                                        const std::vector<int>& years);

struct LogLikTable {
    std::vector<std::string> columns;
    std::vector<int> chain;
    std::vector<int> iteration;
    Eigen::MatrixXd values;  // S x n
};

void write_loglik_csv(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<int>& chain, const std::vector<int>& iteration,
                      const Eigen::MatrixXd& loglik);
LogLikTable read_loglik_csv(const std::string& path);

/// Diagnostics rows; `country` labels each block when non-empty.
void write_diagnostics_csv(const std::string& path,
                           const std::vector<std::vector<ParameterSummary>>& tables,
                           const std::vector<std::string>& country);

/// Truth sidecar of a simulated dataset.
struct TruthRecord {
    JumpKind kind = JumpKind::AR1;
    std::vector<std::string> populations;
    std::vector<std::string> ages;
    std::vector<int> years;
    std::vector<ParameterState> states;
    Eigen::MatrixXd covariance;  // empty for a single population
};

void write_truth_json(const std::string& path, const TruthRecord& truth);
TruthRecord read_truth_json(const std::string& path);

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

}  // namespace mortjump
