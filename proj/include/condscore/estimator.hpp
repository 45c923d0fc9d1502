#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include "condscore/covariance.hpp"
#include "condscore/fda.hpp"

namespace condscore {

enum class Family { gaussian, binary };

// The finite-dimensional regression problem: truncated scores, responses and
// the score-level error model. Gaussian data is column-centered with the
// means retained; binary data keeps raw scores.
struct RegressionData {
    ScoreMatrix scores;  // n x pn
    Eigen::VectorXd response;
    ErrorModel error_model;
    Family family = Family::gaussian;
    Eigen::VectorXd score_means;  // gaussian: means removed from `scores`
    double response_mean = 0.0;   // gaussian: mean removed from `response`

    int n() const { return static_cast<int>(scores.rows()); }
    int p() const { return static_cast<int>(scores.cols()); }
};

// Validating constructor: centers Gaussian data, checks dimensions and that
// binary responses contain both classes.
RegressionData make_regression_data(const ScoreMatrix& scores, const Eigen::VectorXd& response,
                                    const ErrorModel& error_model, Family family);

// Intercept plus slope coefficients, beta_c = (beta0, beta')'.
struct AugmentedCoef {
    double beta0 = 0.0;
    Eigen::VectorXd beta;

    Eigen::VectorXd combined() const;
    static AugmentedCoef from_combined(const Eigen::VectorXd& bc);
};

struct NewtonConfig {
    double tol = 1e-8;  // on ||U||_inf / n
    int max_iter = 100;
    int max_halvings = 20;
    double jacobian_ridge = 1e-10;
};

struct NewtonResult {
    Eigen::VectorXd root;
    bool converged = false;
    int iterations = 0;
    double final_residual = 0.0;  // ||U||_inf / n at exit
};

struct FitResult {
    AugmentedCoef coef;
    std::optional<double> sigma2;  // gaussian only
    Curve slope;
    bool converged = false;
    int iterations = 0;
    double final_residual = 0.0;
    int pn = 0;
};

// Delta statistic w + y * Omega * beta (the sufficient statistic the
// conditional score conditions on).
Eigen::VectorXd delta_statistic(const Eigen::VectorXd& w, double y,
                                const Eigen::MatrixXd& omega, const Eigen::VectorXd& beta);

// Naive GLM ignoring measurement error: OLS for Gaussian (on centered data,
// intercept recovered from the stored means), logistic IRLS for binary.
// Throws on singular design or perfect separation.
AugmentedCoef naive_glm(const RegressionData& data, int max_iter = 100);

// Conditional-score estimating equation for binary responses, evaluated at
// the augmented coefficient (intercept handled via the bordered Omega_c with
// a zero intercept row/column).
Eigen::VectorXd binary_score(const AugmentedCoef& beta_c, const RegressionData& data);

// Analytic Jacobian dU/dbeta_c of binary_score.
Eigen::MatrixXd binary_jacobian(const AugmentedCoef& beta_c, const RegressionData& data);

// Conditional-score estimating equation for Gaussian responses on centered
// data (throws if the data is not centered). Omega taken from the error
// model (Omega1 / scale with scale = sigma^2).
Eigen::VectorXd gaussian_score(const Eigen::VectorXd& beta, const RegressionData& data);

// Analytic Jacobian dU/dbeta of gaussian_score.
Eigen::MatrixXd gaussian_jacobian(const Eigen::VectorXd& beta, const RegressionData& data);

// Damped Newton iteration on a generic estimating equation: solves
// (J + ridge I) d = -U, halves the step until the residual decreases,
// converges when ||U||_inf / n <= tol.
NewtonResult newton_solve(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
                          const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                          const Eigen::VectorXd& init, const NewtonConfig& cfg, int n);

// Full binary fit: naive logistic init, Newton on the conditional score,
// slope reconstruction in the supplied basis (pass an empty basis to skip).
FitResult fit_binary(const RegressionData& data, const Basis& basis, const NewtonConfig& cfg);

// Full Gaussian fit: outer fixed point on sigma^2 (Omega = Omega1 / sigma^2),
// Newton on the slope equation inside, intercept beta0 = Ybar - beta'Wbar.
FitResult fit_gaussian(const RegressionData& data, const Basis& basis, const NewtonConfig& cfg,
                       int outer_max = 50);

// P(Y = 1 | Delta = delta) = F(beta0 + (delta - 0.5 Omega beta)' beta).
double conditional_mean_binary(const Eigen::VectorXd& delta, const AugmentedCoef& beta_c,
                               const Eigen::MatrixXd& omega);

// Diagnostic report for the model assumptions; never throws.
struct Diagnostics {
    double omega_lambda_max = 0.0;   // spectral norm of Omega (finite => ok)
    double gram_lambda_min = 0.0;    // lambda_min of the score Gram matrix / n
    double omega1_lambda_max = 0.0;
    std::optional<double> bound_lhs;  // lambda_max(Omega) exp(lambda_max(Omega) m1)
    bool norm_ok = true;              // Omega norm finite
    bool bound_ok = true;             // bound_lhs <= gram_lambda_min (when available)
    bool spectrum_ok = true;          // lambda_max(Omega1) <= lambda_min(Gram) + lambda_min(Omega1)
    bool approximate = true;          // checks use W in place of the unobservable X
    std::string report() const;
};

Diagnostics check_assumptions(const RegressionData& data,
                              const std::optional<Eigen::VectorXd>& beta_tilde = std::nullopt);

}  // namespace condscore
