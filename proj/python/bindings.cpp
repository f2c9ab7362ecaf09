#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mortjump/cli.hpp"
#include "mortjump/compare.hpp"
#include "mortjump/data.hpp"
#include "mortjump/diagnostics.hpp"
#include "mortjump/forecast.hpp"
#include "mortjump/identify.hpp"
#include "mortjump/io.hpp"
#include "mortjump/synth.hpp"

namespace py = pybind11;
using namespace mortjump;

namespace {

// Rows are chains; every row must have the same length.
ChainSet chains_from(const Eigen::MatrixXd& m) {
    ChainSet out(static_cast<std::size_t>(m.rows()), std::vector<double>(m.cols()));
    for (Eigen::Index c = 0; c < m.rows(); ++c)
        for (Eigen::Index i = 0; i < m.cols(); ++i) out[c][i] = m(c, i);
    return out;
}

ImprovementMatrix as_improvements(const Eigen::MatrixXd& z) {
    ImprovementMatrix out;
    out.values = z;
    return out;
}

Eigen::MatrixXd draws_matrix(const PosteriorDraws& d) {
    const auto names = parameter_names(d.spec, d.n_ages, d.n_years);
    Eigen::MatrixXd out(d.size(), static_cast<Eigen::Index>(names.size()));
    for (int s = 0; s < d.size(); ++s) {
        const auto v = flatten_state(d.states[s], d.spec);
        for (std::size_t k = 0; k < v.size(); ++k) out(s, static_cast<Eigen::Index>(k)) = v[k];
    }
    return out;
}

// S x A x H array of simulated log rates.
py::array_t<double> fan_array(const ForecastFan& fan) {
    const py::ssize_t S = fan.size(), A = fan.n_ages(), H = fan.horizon;
    py::array_t<double> out({S, A, H});
    auto r = out.mutable_unchecked<3>();
    for (py::ssize_t s = 0; s < S; ++s)
        for (py::ssize_t x = 0; x < A; ++x)
            for (py::ssize_t h = 0; h < H; ++h) r(s, x, h) = fan.log_rates[s](x, h);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Lee-Carter models with vanishing jumps";
    m.attr("__version__") = std::string(kVersion);

    // Messages start with the error code name, e.g. "ShapeError: ...".
    py::register_exception<Error>(m, "MortjumpError", PyExc_RuntimeError);

    m.def("load_table", [](const std::string& path, const std::string& population) {
              const auto t = load_mortality_table(path, {}, population);
              py::dict d;
              d["ages"] = t.ages;
              d["years"] = t.years;
              d["deaths"] = t.deaths;
              d["exposures"] = t.exposures;
              d["population"] = t.population_id;
              d["improvements"] = improvement_rates(central_death_rates(t)).values;
              return d;
          },
          py::arg("path"), py::arg("population") = "",
          "Reads a long-format CSV; returns ages, years, deaths, exposures and improvement rates.");

    m.def("improvement_rates", [](const Eigen::MatrixXd& log_rates) {
              return improvement_rates(rates_from_log(log_rates)).values;
          },
          py::arg("log_rates"), "Year-on-year differences of an A x T log-rate panel.");

    m.def("jump_path", [](const std::string& model, const std::vector<int>& occurrence,
                          const Eigen::VectorXd& severity, double coeff) {
              return jump_path(parse_jump_kind(model), occurrence, severity, coeff);
          },
          py::arg("model"), py::arg("occurrence"), py::arg("severity"), py::arg("coeff"));
    m.def("recover_ar_coefficient", &recover_ar_coefficient, py::arg("jump"), py::arg("pin"),
          py::arg("tol") = kIdentifyTol);
    m.def("admissible_ma_roots", &admissible_ma_roots, py::arg("jump"), py::arg("pin"),
          py::arg("tol") = kIdentifyTol);

    m.def("rhat", [](const Eigen::MatrixXd& c) { return split_rhat(chains_from(c)); }, py::arg("chains"),
          "Split R-hat of a chains x draws array.");
    m.def("ess_bulk", [](const Eigen::MatrixXd& c) { return ess_bulk(chains_from(c)); }, py::arg("chains"));
    m.def("ess_tail", [](const Eigen::MatrixXd& c) { return ess_tail(chains_from(c)); }, py::arg("chains"));

    m.def("waic", [](const Eigen::MatrixXd& ll) {
              const auto w = waic(ll);
              py::dict d;
              d["waic"] = w.waic;
              d["lpd_hat"] = w.lpd_hat;
              d["p_waic"] = w.p_waic;
              d["lpd_pointwise"] = w.lpd_pointwise;
              d["p_waic_pointwise"] = w.p_waic_pointwise;
              return d;
          },
          py::arg("loglik"), "WAIC of an S x n pointwise log-likelihood array.");
    m.def("loo", [](const Eigen::MatrixXd& ll) {
              const auto l = loo_cv(ll);
              py::dict d;
              d["lpd_loo"] = l.lpd_loo;
              d["deviance"] = l.deviance;
              d["lpd_pointwise"] = l.lpd_pointwise;
              d["pareto_k"] = l.pareto_k;
              d["warnings"] = l.warnings;
              return d;
          },
          py::arg("loglik"), "PSIS leave-one-out estimate.");

    m.def("crps", &crps_samples, py::arg("samples"), py::arg("observed"));
    m.def("log_score", &log_score_mixture, py::arg("means"), py::arg("sds"), py::arg("observed"));

    m.def("simulate", [](const std::string& model, std::uint64_t seed, int n_ages, int n_years) {
              const auto kind = parse_jump_kind(model);
              const auto p = simulate_dataset(default_truth(kind, n_ages, n_years), kind,
                                              default_base_log_rates(n_ages), seed);
              py::dict d;
              d["log_rates"] = p.log_rates;
              d["improvements"] = p.z.values;
              d["occurrence"] = p.truth.occurrence;
              d["severity"] = p.truth.severity;
              d["jump"] = p.truth.jump;
              d["coeff"] = p.truth.coeff;
              d["drift"] = p.truth.drift;
              return d;
          },
          py::arg("model") = "ar", py::arg("seed") = 1, py::arg("n_ages") = 10, py::arg("n_years") = 33,
          "Simulates a panel from the default synthetic truth.");

    py::class_<PosteriorDraws>(m, "Fit")
        .def_property_readonly("columns", [](const PosteriorDraws& d) {
            return parameter_names(d.spec, d.n_ages, d.n_years);
        })
        .def_property_readonly("draws", &draws_matrix)
        .def_property_readonly("chain", [](const PosteriorDraws& d) { return d.chain; })
        .def_property_readonly("iteration", [](const PosteriorDraws& d) { return d.iteration; })
        .def_property_readonly("loglik", [](const PosteriorDraws& d) { return d.loglik; })
        .def_property_readonly("warnings", [](const PosteriorDraws& d) { return d.warnings; })
        .def_property_readonly("model", [](const PosteriorDraws& d) { return std::string(to_string(d.spec.kind)); })
        .def("summary", [](const PosteriorDraws& d) {
            py::list rows;
            for (const auto& r : summarize(d)) {
                py::dict row;
                row["parameter"] = r.name;
                row["mean"] = r.mean;
                row["map"] = r.map;
                row["sd"] = r.sd;
                row["q10"] = r.q10;
                row["q90"] = r.q90;
                row["rhat"] = r.rhat;
                row["ess_bulk"] = r.ess_bulk;
                row["ess_tail"] = r.ess_tail;
                rows.append(row);
            }
            return rows;
        })
        .def("forecast", [](const PosteriorDraws& d, const Eigen::VectorXd& base, int horizon, std::uint64_t seed) {
            return fan_array(forecast(d, base, horizon, seed));
        },
        py::arg("base_log_rates"), py::arg("horizon"), py::arg("seed") = 1,
        "Posterior-predictive log rates, shape draws x ages x horizon.");

    m.def("fit", [](const Eigen::MatrixXd& z, const std::string& model, int chains, int burn_in, int samples,
                    int thin, std::uint64_t seed) {
              ModelSpec spec;
              spec.kind = parse_jump_kind(model);
              McmcSettings st;
              st.n_chains = chains;
              st.burn_in = burn_in;
              st.n_samples = samples;
              st.thin = thin;
              st.seed = seed;
              py::gil_scoped_release release;
              return run_mcmc(spec, as_improvements(z), st);
          },
          py::arg("improvements"), py::arg("model") = "ar", py::arg("chains") = 2, py::arg("burn_in") = 7500,
          py::arg("samples") = 10000, py::arg("thin") = 10, py::arg("seed") = 20240601,
          "Fits a single-population model to an A x (T-1) improvement array.");

    m.def("run_cli", [](const std::vector<std::string>& args) {
              std::ostringstream out, err;
              int code;
              {
                  py::gil_scoped_release release;
                  code = run_cli(args, out, err, environment_from_process());
              }
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"), "Runs one command-line command; returns (exit code, stdout, stderr).");
}
