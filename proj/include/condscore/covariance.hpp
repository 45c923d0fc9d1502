#pragma once

#include <Eigen/Dense>
#include <vector>

#include "condscore/fda.hpp"

namespace condscore {

// A covariance kernel sampled on a grid: matrix(j,k) = K(t_j, t_k).
struct CovKernel {
    Grid grid;
    Eigen::MatrixXd matrix;

    CovKernel() = default;
    CovKernel(Grid g, Eigen::MatrixXd m);
};

// Eigenfunctions and eigenvalues of the integral operator of a covariance
// kernel (Nystrom discretization, eigenfunctions unit L2 norm, eigenvalues
// sorted descending and clipped at zero).
struct EigenBasis {
    Basis basis;
    Eigen::VectorXd eigenvalues;

    int size() const { return static_cast<int>(eigenvalues.size()); }
};

// Replicated noisy observations: for each subject, m_i >= 2 curves on a
// shared grid.
struct ReplicateSet {
    Grid grid;
    std::vector<Eigen::MatrixXd> subjects;  // subject i: m_i x m matrix

    ReplicateSet() = default;
    ReplicateSet(Grid g, std::vector<Eigen::MatrixXd> s);

    int count() const { return static_cast<int>(subjects.size()); }
};

// Score-level error covariance: Omega1 = diag(lambda_1..lambda_pn) and its
// scaled version Omega = Omega1 / scale (scale = 1 for binary responses,
// sigma^2 for Gaussian).
struct ErrorModel {
    Eigen::VectorXd omega1;  // diagonal entries, variance units
    double scale = 1.0;

    ErrorModel() = default;
    ErrorModel(Eigen::VectorXd o1, double s);

    Eigen::VectorXd omega() const { return omega1 / scale; }
    int dim() const { return static_cast<int>(omega1.size()); }
};

// Pooled within-subject covariance estimator of the error kernel, divisor
// sum_i (m_i - 1). Unbiased for the error covariance when replicates are
// i.i.d. subject mean plus centered Gaussian noise.
CovKernel estimate_error_kernel(const ReplicateSet& reps);

// Nystrom eigen-decomposition of the kernel's integral operator with
// trapezoid quadrature weights. Returns at most max_components eigenpairs,
// dropping numerically zero ones. Throws if the kernel has an eigenvalue
// below -1e-6 times the largest (not a covariance).
EigenBasis eigen_decompose(const CovKernel& kernel, int max_components);

// Sample covariance kernel of a curve set (curves centered at the pointwise
// mean, divisor n - 1). Used to build the observed-curve FPCA basis.
CovKernel sample_covariance_kernel(const CurveSet& curves);

// Per-component sample variances of the centered scores of `observed` in the
// basis, for components 1..cap.
Eigen::VectorXd observed_score_variances(const CurveSet& observed, const Basis& basis, int cap);

// Variance-explained elbow rule on a vector of per-component variances:
// cumulative fractions c_k over the first `cap` components; returns the
// smallest k with c_{k+1} - c_k < epsilon, else cap.
int select_pn_from_variances(const Eigen::VectorXd& variances, double epsilon, int cap);

// Truncation-level selection from the observed curves' score variances in the
// error eigenbasis.
int select_pn(const CurveSet& observed, const EigenBasis& basis, double epsilon, int cap);

// ErrorModel with omega1 = diag of the first p_n eigenvalues, omega scaled.
ErrorModel build_error_model(const EigenBasis& basis, int p_n, double scale);

// Quadrature quadratic form <rho_k, K rho_k> for each basis function: the
// error variance carried by each component of an arbitrary working basis.
Eigen::VectorXd kernel_quadratic_forms(const CovKernel& kernel, const Basis& basis, int cap);

}  // namespace condscore
