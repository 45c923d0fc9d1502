#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "condscore/covariance.hpp"
#include "condscore/estimator.hpp"
#include "condscore/rng.hpp"

namespace condscore {

enum class Setting { sqexp, brownian_bridge };
enum class BinaryLink { linear_logit, max_curve };
enum class PRounding { nearest, floor };
enum class SelectionMode { signal, observed };
enum class BasisSource { observed, error };

// Knobs shared by the Monte Carlo harness and the file-based estimation
// pipeline.
struct PipelineOptions {
    double epsilon = 0.01;  // selection increment threshold
    int cap = 20;           // upper bound on considered components
    SelectionMode selection = SelectionMode::signal;
    BasisSource basis_source = BasisSource::observed;
    NewtonConfig newton;
    int outer_max = 50;
};

struct SimScenario {
    Family family = Family::gaussian;
    Setting setting = Setting::sqexp;
    int n = 1000;
    double noise = 5.0;        // sigma1 for sqexp, sigma2 for brownian_bridge
    double length_scale = 0.05;  // sqexp only
    int reps = 50;
    int replicates_per_subject = 50;
    int grid_size = 101;
    std::uint64_t seed = 1;
    BinaryLink binary_link = BinaryLink::linear_logit;
    PRounding p_rounding = PRounding::nearest;
    PipelineOptions pipeline;

    void validate() const;
};

struct MCResultRow {
    std::string scenario_id;
    Family family = Family::gaussian;
    Setting setting = Setting::sqexp;
    int n = 0;
    double noise = 0.0;
    double length_scale = 0.0;
    int reps = 0;
    double mean_pn = 0.0;
    double mean_E_n = 0.0;
    double mean_E_co = 0.0;
    int failures = 0;
    // Per-replication detail (converged reps only), not serialized.
    std::vector<double> E_n_reps;
    std::vector<double> E_co_reps;
    std::vector<int> pn_reps;
};

// K(s,t) = sigma1 * exp(-(s-t)^2 / (2 l^2)).
CovKernel sqexp_kernel(double sigma1, double l, const Grid& grid);

// K(s,t) = sigma2 * (min(s,t) - s t) on [0,1].
CovKernel brownian_bridge_kernel(double sigma2, const Grid& grid);

// Factor a kernel once and draw mean-zero Gaussian curves repeatedly.
class GpSampler {
  public:
    explicit GpSampler(const CovKernel& kernel);
    CurveSet draw(int n, Rng& rng) const;
    void draw_into(Eigen::MatrixXd& out, Rng& rng) const;  // rows = curves

  private:
    Grid grid_;
    Eigen::MatrixXd chol_;  // lower factor of kernel + jitter
};

// n mean-zero Gaussian curves with the given covariance kernel.
CurveSet sample_gp(const CovKernel& kernel, int n, Rng& rng);

// X_i = sum_{k<=p} eps_ik rho_k with eps_ik ~ Poisson(2) and Fourier rho_k,
// p = 2 * round-or-floor(n^{1/5}).
std::pair<CurveSet, int> generate_covariates(int n, const Grid& grid, Rng& rng,
                                             PRounding rounding = PRounding::nearest);

// True slope sum_{k<=p} k^{-1} rho_k; returns the curve and the coefficients.
std::pair<Curve, Eigen::VectorXd> generate_slope(int p, const Grid& grid);

// Responses from the covariates: Gaussian N(integral(X beta), 1); binary
// either Bernoulli(F(max_t X(t))) (max_curve) or the centered linear logistic
// Bernoulli(F(beta0 + integral(X beta))) (linear_logit).
Eigen::VectorXd generate_responses(const CurveSet& X, const Curve& slope, Family family, Rng& rng,
                                   BinaryLink link = BinaryLink::max_curve);

// Shared estimation pipeline (harness and CLI): error kernel from replicates,
// working basis, truncation selection, naive and corrected fits.
struct PipelineResult {
    EigenBasis error_eigen;   // eigen-decomposition of the estimated kernel
    Basis working_basis;      // basis the fits are expressed in (pn functions)
    Eigen::VectorXd lambda;   // error variances per working component (cap)
    int pn = 0;
    FitResult naive;
    FitResult corrected;
    Diagnostics diagnostics;
};

PipelineResult estimate_pipeline(const CurveSet& observed, const ReplicateSet& reps,
                                 const Eigen::VectorXd& response, Family family,
                                 const PipelineOptions& opt);

// End-to-end Monte Carlo scenario run; deterministic given the scenario
// (including across thread counts).
MCResultRow run_scenario(const SimScenario& s, int threads = 1);

// Error-injection protocol on user-supplied clean curves: fit the reference
// slope on clean data, contaminate with the kernel, estimate the error
// covariance from generated replicates, fit naive and corrected estimators.
struct InjectReport {
    double E_n = 0.0;
    double E_co = 0.0;
    Curve reference_slope;
    Curve naive_slope;
    Curve corrected_slope;
    int pn = 0;
};

InjectReport inject_and_fit(const CurveSet& clean, const Eigen::VectorXd& response,
                            const CovKernel& kernel, int reps_per_subject, Rng& rng,
                            const PipelineOptions& opt = {});

std::string family_name(Family f);
std::string setting_name(Setting s);

}  // namespace condscore
