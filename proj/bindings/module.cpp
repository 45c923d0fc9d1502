// Python bindings for the main operations: simulation scenarios, the
// estimation pipeline on in-memory arrays, and the covariance machinery.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "condscore/csv.hpp"
#include "condscore/sim.hpp"

namespace py = pybind11;
using namespace condscore;

namespace {

Family family_from_string(const std::string& s) {
    if (s == "gaussian") {
        return Family::gaussian;
    }
    if (s == "binary") {
        return Family::binary;
    }
    throw invalid_input("family must be 'gaussian' or 'binary'");
}

Setting setting_from_string(const std::string& s) {
    if (s == "sqexp") {
        return Setting::sqexp;
    }
    if (s == "brownian_bridge") {
        return Setting::brownian_bridge;
    }
    throw invalid_input("setting must be 'sqexp' or 'brownian_bridge'");
}

py::dict fit_to_dict(const FitResult& fit) {
    py::dict d;
    d["beta0"] = fit.coef.beta0;
    d["beta"] = fit.coef.beta;
    if (fit.sigma2.has_value()) {
        d["sigma2"] = *fit.sigma2;
    }
    d["converged"] = fit.converged;
    d["iterations"] = fit.iterations;
    d["final_residual"] = fit.final_residual;
    d["pn"] = fit.pn;
    if (fit.slope.values.size() > 0) {
        d["slope"] = fit.slope.values;
    }
    return d;
}

}  // namespace

PYBIND11_MODULE(_condscore, m) {
    m.doc() = "Conditional-score estimation for functional GLMs with measurement error";

    m.def(
        "run_scenario",
        [](const std::string& family, const std::string& setting, int n, double noise,
           double length_scale, int reps, int replicates_per_subject, int grid_size,
           std::uint64_t seed, int threads) {
            SimScenario s;
            s.family = family_from_string(family);
            s.setting = setting_from_string(setting);
            s.n = n;
            s.noise = noise;
            s.length_scale = length_scale;
            s.reps = reps;
            s.replicates_per_subject = replicates_per_subject;
            s.grid_size = grid_size;
            s.seed = seed;
            const MCResultRow row = run_scenario(s, threads);
            py::dict d;
            d["mean_pn"] = row.mean_pn;
            d["mean_E_n"] = row.mean_E_n;
            d["mean_E_co"] = row.mean_E_co;
            d["failures"] = row.failures;
            d["E_n_reps"] = row.E_n_reps;
            d["E_co_reps"] = row.E_co_reps;
            return d;
        },
        py::arg("family"), py::arg("setting"), py::arg("n"), py::arg("noise"),
        py::arg("length_scale") = 0.05, py::arg("reps") = 50,
        py::arg("replicates_per_subject") = 50, py::arg("grid_size") = 101, py::arg("seed") = 1,
        py::arg("threads") = 1, "Run a Monte Carlo scenario and return summary statistics.");

    m.def(
        "fit",
        [](const Eigen::MatrixXd& scores, const Eigen::VectorXd& response,
           const Eigen::VectorXd& lambda, const std::string& family) {
            const Family fam = family_from_string(family);
            const ErrorModel em(lambda, 1.0);
            const RegressionData data = make_regression_data(scores, response, em, fam);
            const Basis empty;
            const NewtonConfig cfg;
            const FitResult fit = fam == Family::gaussian ? fit_gaussian(data, empty, cfg)
                                                          : fit_binary(data, empty, cfg);
            py::dict d = fit_to_dict(fit);
            const AugmentedCoef naive = naive_glm(data);
            d["naive_beta0"] = naive.beta0;
            d["naive_beta"] = naive.beta;
            return d;
        },
        py::arg("scores"), py::arg("response"), py::arg("lambda"), py::arg("family"),
        "Conditional-score fit on truncated scores with error variances `lambda`.");

    m.def(
        "eigen_decompose",
        [](const Eigen::MatrixXd& kernel, const Eigen::VectorXd& grid_points,
           int max_components) {
            const Grid grid{grid_points};
            const EigenBasis eb = eigen_decompose(CovKernel(grid, kernel), max_components);
            return py::make_tuple(eb.eigenvalues, eb.basis.functions);
        },
        py::arg("kernel"), py::arg("grid_points"), py::arg("max_components") = 20,
        "Nystrom eigen-decomposition; returns (eigenvalues, eigenfunctions).");

    m.def(
        "estimate_error_kernel",
        [](const std::vector<Eigen::MatrixXd>& subjects, const Eigen::VectorXd& grid_points) {
            const Grid grid{grid_points};
            return estimate_error_kernel(ReplicateSet(grid, subjects)).matrix;
        },
        py::arg("subjects"), py::arg("grid_points"),
        "Pooled within-subject covariance estimate from replicate curves.");

    m.def(
        "fourier_basis",
        [](int K, const Eigen::VectorXd& grid_points) {
            return fourier_basis(K, Grid{grid_points}).functions;
        },
        py::arg("K"), py::arg("grid_points"), "Orthonormal Fourier basis sampled on a grid.");

    m.def(
        "sqexp_kernel",
        [](double sigma1, double l, const Eigen::VectorXd& grid_points) {
            return sqexp_kernel(sigma1, l, Grid{grid_points}).matrix;
        },
        py::arg("sigma1"), py::arg("l"), py::arg("grid_points"));

    m.def(
        "brownian_bridge_kernel",
        [](double sigma2, const Eigen::VectorXd& grid_points) {
            return brownian_bridge_kernel(sigma2, Grid{grid_points}).matrix;
        },
        py::arg("sigma2"), py::arg("grid_points"));
}
