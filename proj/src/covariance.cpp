#include "condscore/covariance.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace condscore {

CovKernel::CovKernel(Grid g, Eigen::MatrixXd m) : grid(std::move(g)), matrix(std::move(m)) {
    if (matrix.rows() != grid.points.size() || matrix.cols() != grid.points.size()) {
        throw invalid_input("covariance kernel must be m x m on its grid");
    }
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw invalid_input("covariance kernel must be symmetric within 1e-10");
    }
}

ReplicateSet::ReplicateSet(Grid g, std::vector<Eigen::MatrixXd> s)
    : grid(std::move(g)), subjects(std::move(s)) {
    if (subjects.empty()) {
        throw invalid_input("replicate set needs at least one subject");
    }
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (subjects[i].rows() < 2) {
            throw invalid_input("subject " + std::to_string(i) +
                                " has fewer than 2 replicates");
        }
        if (subjects[i].cols() != grid.points.size()) {
            throw invalid_input("replicate curves must match the grid length");
        }
    }
}

ErrorModel::ErrorModel(Eigen::VectorXd o1, double s) : omega1(std::move(o1)), scale(s) {
    if (!(scale > 0.0)) {
        throw invalid_input("error model scale must be positive");
    }
    if (omega1.size() > 0 && omega1.minCoeff() < 0.0) {
        throw invalid_input("error model eigenvalues must be nonnegative");
    }
}

CovKernel estimate_error_kernel(const ReplicateSet& reps) {
    const Eigen::Index m = reps.grid.points.size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    long denom = 0;
    for (const auto& subject : reps.subjects) {
        const Eigen::RowVectorXd mean = subject.colwise().mean();
        const Eigen::MatrixXd centered = subject.rowwise() - mean;
        acc.noalias() += centered.transpose() * centered;
        denom += subject.rows() - 1;
    }
    Eigen::MatrixXd k = acc / static_cast<double>(denom);
    k = ((k + k.transpose()) / 2.0).eval();  // kill rounding asymmetry
    return CovKernel(reps.grid, std::move(k));
}

EigenBasis eigen_decompose(const CovKernel& kernel, int max_components) {
    if (max_components < 1) {
        throw invalid_input("eigen_decompose: max_components must be >= 1");
    }
    const Eigen::VectorXd w = trap_weights(kernel.grid);
    const Eigen::VectorXd s = w.array().sqrt();
    Eigen::MatrixXd b = s.asDiagonal() * kernel.matrix * s.asDiagonal();
    b = ((b + b.transpose()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
    if (solver.info() != Eigen::Success) {
        throw numerical_error("eigen_decompose: eigensolver failed");
    }
    const Eigen::Index m = b.rows();
    // Eigen returns ascending order; flip to descending.
    Eigen::VectorXd evals(m);
    Eigen::MatrixXd evecs(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        evals(k) = solver.eigenvalues()(m - 1 - k);
        evecs.col(k) = solver.eigenvectors().col(m - 1 - k);
    }
    const double top = std::max(evals(0), 0.0);
    if (evals(m - 1) < -1e-6 * std::max(top, 1e-300)) {
        throw invalid_input("eigen_decompose: kernel is not positive semidefinite");
    }
    evals = evals.cwiseMax(0.0);
    // Keep numerically positive eigenpairs only.
    const double positive_floor = 1e-12 * std::max(top, 1.0);
    int keep = 0;
    while (keep < m && evals(keep) > positive_floor) {
        ++keep;
    }
    keep = std::min(keep, max_components);
    keep = std::max(keep, 1);
    // Nystrom back-transform: rho_k = v_k / sqrt(w), unit L2 norm.
    Eigen::MatrixXd funcs(keep, m);
    for (int k = 0; k < keep; ++k) {
        funcs.row(k) = (evecs.col(k).array() / s.array()).transpose();
    }
    EigenBasis out;
    out.basis = Basis(kernel.grid, std::move(funcs), false);
    out.eigenvalues = evals.head(keep);
    return out;
}

CovKernel sample_covariance_kernel(const CurveSet& curves) {
    if (curves.count() < 2) {
        throw invalid_input("sample_covariance_kernel: need at least 2 curves");
    }
    const Eigen::RowVectorXd mean = curves.values.colwise().mean();
    const Eigen::MatrixXd centered = curves.values.rowwise() - mean;
    Eigen::MatrixXd k =
        centered.transpose() * centered / static_cast<double>(curves.count() - 1);
    k = ((k + k.transpose()) / 2.0).eval();
    return CovKernel(curves.grid, std::move(k));
}

Eigen::VectorXd observed_score_variances(const CurveSet& observed, const Basis& basis, int cap) {
    if (observed.count() < 2) {
        throw invalid_input("observed_score_variances: need at least 2 curves");
    }
    const int p = std::min(cap, basis.size());
    const ScoreMatrix scores = project_scores(observed, basis, p);
    const auto [centered, means] = center_scores(scores);
    return centered.array().square().colwise().sum() /
           static_cast<double>(observed.count() - 1);
}

int select_pn_from_variances(const Eigen::VectorXd& variances, double epsilon, int cap) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw invalid_input("select_pn: epsilon must be in (0, 1)");
    }
    if (cap < 1) {
        throw invalid_input("select_pn: cap must be >= 1");
    }
    const int k_max = std::min<int>(cap, static_cast<int>(variances.size()));
    const double total = variances.head(k_max).sum();
    if (!(total > 0.0)) {
        return 1;
    }
    double cum = variances(0) / total;
    for (int k = 1; k < k_max; ++k) {
        const double inc = variances(k) / total;
        if (inc < epsilon) {
            return k;
        }
        cum += inc;
    }
    return k_max;
}

int select_pn(const CurveSet& observed, const EigenBasis& basis, double epsilon, int cap) {
    const Eigen::VectorXd v = observed_score_variances(observed, basis.basis, cap);
    return select_pn_from_variances(v, epsilon, cap);
}

ErrorModel build_error_model(const EigenBasis& basis, int p_n, double scale) {
    if (p_n < 1 || p_n > basis.size()) {
        throw invalid_input("build_error_model: p_n out of range");
    }
    return ErrorModel(basis.eigenvalues.head(p_n), scale);
}

Eigen::VectorXd kernel_quadratic_forms(const CovKernel& kernel, const Basis& basis, int cap) {
    if (!kernel.grid.same_as(basis.grid)) {
        throw invalid_input("kernel_quadratic_forms: grid mismatch");
    }
    const int p = std::min(cap, basis.size());
    const Eigen::VectorXd w = trap_weights(kernel.grid);
    Eigen::VectorXd out(p);
    for (int k = 0; k < p; ++k) {
        const Eigen::VectorXd wk =
            (basis.functions.row(k).transpose().array() * w.array()).matrix();
        out(k) = wk.dot(kernel.matrix * wk);
    }
    return out;
}

}  // namespace condscore
