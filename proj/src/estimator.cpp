#include "condscore/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace condscore {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Eigen::MatrixXd bordered_omega(const Eigen::VectorXd& omega_diag) {
    const Eigen::Index p = omega_diag.size();
    Eigen::MatrixXd oc = Eigen::MatrixXd::Zero(p + 1, p + 1);
    oc.diagonal().tail(p) = omega_diag;
    return oc;
}

void require_centered(const RegressionData& data) {
    if (data.family != Family::gaussian) {
        throw invalid_input("operation requires gaussian-family data");
    }
    const Eigen::VectorXd col_means = data.scores.colwise().mean();
    if (data.p() > 0 && col_means.cwiseAbs().maxCoeff() > 1e-8) {
        throw invalid_input("gaussian scores must be column-centered");
    }
}

}  // namespace

RegressionData make_regression_data(const ScoreMatrix& scores, const Eigen::VectorXd& response,
                                    const ErrorModel& error_model, Family family) {
    if (scores.rows() != response.size()) {
        throw invalid_input("regression data: score rows must match response length");
    }
    if (scores.rows() < 2) {
        throw invalid_input("regression data: need at least 2 observations");
    }
    if (error_model.dim() != scores.cols()) {
        throw invalid_input("regression data: error model dimension mismatch");
    }
    if (!scores.allFinite() || !response.allFinite()) {
        throw invalid_input("regression data: values must be finite");
    }
    RegressionData data;
    data.error_model = error_model;
    data.family = family;
    if (family == Family::binary) {
        bool has0 = false;
        bool has1 = false;
        for (Eigen::Index i = 0; i < response.size(); ++i) {
            if (response(i) == 0.0) {
                has0 = true;
            } else if (response(i) == 1.0) {
                has1 = true;
            } else {
                throw invalid_input("binary response must be 0/1");
            }
        }
        if (!has0 || !has1) {
            throw invalid_input("response must contain both classes");
        }
        data.scores = scores;
        data.response = response;
    } else {
        auto [centered, means] = center_scores(scores);
        data.scores = std::move(centered);
        data.score_means = std::move(means);
        data.response_mean = response.mean();
        data.response = response.array() - data.response_mean;
    }
    return data;
}

Eigen::VectorXd AugmentedCoef::combined() const {
    Eigen::VectorXd bc(beta.size() + 1);
    bc(0) = beta0;
    bc.tail(beta.size()) = beta;
    return bc;
}

AugmentedCoef AugmentedCoef::from_combined(const Eigen::VectorXd& bc) {
    AugmentedCoef c;
    c.beta0 = bc(0);
    c.beta = bc.tail(bc.size() - 1);
    return c;
}

Eigen::VectorXd delta_statistic(const Eigen::VectorXd& w, double y,
                                const Eigen::MatrixXd& omega, const Eigen::VectorXd& beta) {
    if (omega.rows() != w.size() || omega.cols() != beta.size() || w.size() != beta.size()) {
        throw invalid_input("delta_statistic: dimension mismatch");
    }
    return w + y * (omega * beta);
}

AugmentedCoef naive_glm(const RegressionData& data, int max_iter) {
    const int n = data.n();
    const int p = data.p();
    AugmentedCoef out;
    if (data.family == Family::gaussian) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.scores);
        if (qr.rank() < p) {
            throw invalid_input("naive_glm: singular design matrix");
        }
        out.beta = qr.solve(data.response);
        out.beta0 = data.response_mean - out.beta.dot(data.score_means);
        return out;
    }
    // Logistic IRLS with an intercept column.
    Eigen::MatrixXd x(n, p + 1);
    x.col(0).setOnes();
    x.rightCols(p) = data.scores;
    Eigen::VectorXd bc = Eigen::VectorXd::Zero(p + 1);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = x * bc;
        Eigen::VectorXd mu(n);
        Eigen::VectorXd wgt(n);
        for (int i = 0; i < n; ++i) {
            mu(i) = logistic(eta(i));
            wgt(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
        }
        const Eigen::VectorXd grad = x.transpose() * (data.response - mu);
        const Eigen::MatrixXd hess = x.transpose() * wgt.asDiagonal() * x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success) {
            throw invalid_input("naive_glm: singular design matrix");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        bc += step;
        if (bc.norm() > 1e3) {
            throw invalid_input("naive_glm: perfect separation detected (diverging coefficients)");
        }
        if (step.cwiseAbs().maxCoeff() < 1e-10) {
            return AugmentedCoef::from_combined(bc);
        }
    }
    throw invalid_input("naive_glm: logistic fit did not converge (possible separation)");
}

Eigen::VectorXd binary_score(const AugmentedCoef& beta_c, const RegressionData& data) {
    if (data.family != Family::binary) {
        throw invalid_input("binary_score: data is not binary-family");
    }
    if (beta_c.beta.size() != data.p()) {
        throw invalid_input("binary_score: coefficient dimension mismatch");
    }
    const int n = data.n();
    const int p = data.p();
    const Eigen::VectorXd bc = beta_c.combined();
    const Eigen::MatrixXd oc = bordered_omega(data.error_model.omega());
    const Eigen::VectorXd ob = oc * bc;
    const double quad = bc.dot(ob);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd wc(p + 1);
    for (int i = 0; i < n; ++i) {
        wc(0) = 1.0;
        wc.tail(p) = data.scores.row(i).transpose();
        const double y = data.response(i);
        const double t = wc.dot(bc) + (y - 0.5) * quad;
        // delta_ci - Omega_c beta_c = W_ci + (y - 1) Omega_c beta_c
        u += (y - logistic(t)) * (wc + (y - 1.0) * ob);
    }
    return u;
}

Eigen::MatrixXd binary_jacobian(const AugmentedCoef& beta_c, const RegressionData& data) {
    if (data.family != Family::binary) {
        throw invalid_input("binary_jacobian: data is not binary-family");
    }
    if (beta_c.beta.size() != data.p()) {
        throw invalid_input("binary_jacobian: coefficient dimension mismatch");
    }
    const int n = data.n();
    const int p = data.p();
    const Eigen::VectorXd bc = beta_c.combined();
    const Eigen::MatrixXd oc = bordered_omega(data.error_model.omega());
    const Eigen::VectorXd ob = oc * bc;
    const double quad = bc.dot(ob);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(p + 1, p + 1);
    double omega_weight = 0.0;
    Eigen::VectorXd wc(p + 1);
    for (int i = 0; i < n; ++i) {
        wc(0) = 1.0;
        wc.tail(p) = data.scores.row(i).transpose();
        const double y = data.response(i);
        const double t = wc.dot(bc) + (y - 0.5) * quad;
        const double f = logistic(t);
        const double fp = f * (1.0 - f);
        // d/dbeta_c of (delta_ci - Omega_c beta_c) contributes (y-1) Omega_c;
        // d t / dbeta_c = W_ci + 2 (y - 0.5) Omega_c beta_c.
        omega_weight += (y - f) * (y - 1.0);
        const Eigen::VectorXd v = wc + (y - 1.0) * ob;
        const Eigen::VectorXd dt = wc + 2.0 * (y - 0.5) * ob;
        j.noalias() -= fp * v * dt.transpose();
    }
    j += omega_weight * oc;
    return j;
}

Eigen::VectorXd gaussian_score(const Eigen::VectorXd& beta, const RegressionData& data) {
    require_centered(data);
    if (beta.size() != data.p()) {
        throw invalid_input("gaussian_score: coefficient dimension mismatch");
    }
    const Eigen::VectorXd omega = data.error_model.omega();
    const Eigen::VectorXd c = data.scores.transpose() * data.response;
    const double sy2 = data.response.squaredNorm();
    const Eigen::VectorXd ob = omega.asDiagonal() * beta;
    return c - data.scores.transpose() * (data.scores * beta) + sy2 * ob - c.dot(beta) * ob;
}

Eigen::MatrixXd gaussian_jacobian(const Eigen::VectorXd& beta, const RegressionData& data) {
    require_centered(data);
    if (beta.size() != data.p()) {
        throw invalid_input("gaussian_jacobian: coefficient dimension mismatch");
    }
    const Eigen::VectorXd omega = data.error_model.omega();
    const Eigen::VectorXd c = data.scores.transpose() * data.response;
    const double sy2 = data.response.squaredNorm();
    const Eigen::VectorXd ob = omega.asDiagonal() * beta;
    Eigen::MatrixXd j = -(data.scores.transpose() * data.scores);
    j += sy2 * Eigen::MatrixXd(omega.asDiagonal());
    j.noalias() -= ob * c.transpose();
    j -= c.dot(beta) * Eigen::MatrixXd(omega.asDiagonal());
    return j;
}

NewtonResult newton_solve(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
                          const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                          const Eigen::VectorXd& init, const NewtonConfig& cfg, int n) {
    NewtonResult res;
    res.root = init;
    Eigen::VectorXd u = score(res.root);
    const double dn = static_cast<double>(n);
    for (int it = 0; it < cfg.max_iter; ++it) {
        res.final_residual = u.cwiseAbs().maxCoeff() / dn;
        if (res.final_residual <= cfg.tol) {
            res.converged = true;
            res.iterations = it;
            return res;
        }
        Eigen::MatrixXd j = jacobian(res.root);
        j.diagonal().array() += cfg.jacobian_ridge;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
        if (!lu.isInvertible()) {
            throw numerical_error("singular Jacobian (consider smaller p_n)");
        }
        const Eigen::VectorXd d = lu.solve(-u);
        const double current = u.cwiseAbs().maxCoeff();
        bool improved = false;
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            const Eigen::VectorXd cand = res.root + d / std::pow(2.0, h);
            const Eigen::VectorXd uc = score(cand);
            if (uc.allFinite() && uc.cwiseAbs().maxCoeff() < current) {
                res.root = cand;
                u = uc;
                improved = true;
                break;
            }
        }
        if (!improved) {
            res.iterations = it + 1;
            res.final_residual = current / dn;
            res.converged = false;
            return res;
        }
        res.iterations = it + 1;
    }
    res.final_residual = u.cwiseAbs().maxCoeff() / dn;
    res.converged = res.final_residual <= cfg.tol;
    return res;
}

FitResult fit_binary(const RegressionData& data, const Basis& basis, const NewtonConfig& cfg) {
    if (data.family != Family::binary) {
        throw invalid_input("fit_binary: data is not binary-family");
    }
    const AugmentedCoef init = naive_glm(data);
    const auto score = [&data](const Eigen::VectorXd& bc) {
        return binary_score(AugmentedCoef::from_combined(bc), data);
    };
    const auto jac = [&data](const Eigen::VectorXd& bc) {
        return binary_jacobian(AugmentedCoef::from_combined(bc), data);
    };
    const NewtonResult nr = newton_solve(score, jac, init.combined(), cfg, data.n());
    FitResult fit;
    fit.coef = AugmentedCoef::from_combined(nr.root);
    fit.converged = nr.converged;
    fit.iterations = nr.iterations;
    fit.final_residual = nr.final_residual;
    fit.pn = data.p();
    if (basis.size() >= data.p() && basis.size() > 0) {
        fit.slope = reconstruct_function(fit.coef.beta, basis);
    }
    return fit;
}

FitResult fit_gaussian(const RegressionData& data, const Basis& basis, const NewtonConfig& cfg,
                       int outer_max) {
    if (data.family != Family::gaussian) {
        throw invalid_input("fit_gaussian: data is not gaussian-family");
    }
    const int n = data.n();
    const AugmentedCoef init = naive_glm(data);
    double sigma2 = (data.response - data.scores * init.beta).squaredNorm() / n;
    Eigen::VectorXd beta = init.beta;
    FitResult fit;
    fit.pn = data.p();
    bool sigma_converged = false;
    int total_iterations = 0;
    double final_residual = 0.0;
    bool inner_converged = false;
    for (int outer = 0; outer < outer_max; ++outer) {
        RegressionData scaled = data;
        // sigma2 = 0 only happens for exactly-interpolating data; Omega is
        // then well defined only when Omega1 = 0, where the scale is moot.
        scaled.error_model =
            ErrorModel(data.error_model.omega1, sigma2 > 0.0 ? sigma2 : 1.0);
        if (sigma2 <= 0.0 && data.error_model.omega1.size() > 0 &&
            data.error_model.omega1.maxCoeff() > 0.0) {
            throw numerical_error("fit_gaussian: nonpositive sigma^2 with nonzero error model");
        }
        const auto score = [&scaled](const Eigen::VectorXd& b) {
            return gaussian_score(b, scaled);
        };
        const auto jac = [&scaled](const Eigen::VectorXd& b) {
            return gaussian_jacobian(b, scaled);
        };
        const NewtonResult nr = newton_solve(score, jac, beta, cfg, n);
        beta = nr.root;
        total_iterations += nr.iterations;
        final_residual = nr.final_residual;
        inner_converged = nr.converged;
        if (!nr.converged) {
            break;
        }
        // sigma^2 update: residuals (Y_i - mu_i) with
        // mu_i = (beta0 + beta' delta_i) / (1 + beta' Omega beta); on centered
        // data this reduces to (Yc_i - beta' Wc_i) / (1 + q).
        const Eigen::VectorXd omega = scaled.error_model.omega();
        const double q = beta.dot(omega.asDiagonal() * beta);
        const double rss = (data.response - data.scores * beta).squaredNorm();
        const double sigma2_new = rss / ((1.0 + q) * n);
        if (!std::isfinite(sigma2_new) || sigma2_new < 0.0 ||
            (sigma2_new == 0.0 && data.error_model.omega1.size() > 0 &&
             data.error_model.omega1.maxCoeff() > 0.0)) {
            throw numerical_error("fit_gaussian: nonpositive sigma^2 update");
        }
        const double delta = std::abs(sigma2_new - sigma2);
        sigma2 = sigma2_new;
        if (delta < 1e-8) {
            sigma_converged = true;
            break;
        }
    }
    fit.coef.beta = beta;
    fit.coef.beta0 = data.response_mean - beta.dot(data.score_means);
    fit.sigma2 = sigma2;
    fit.converged = inner_converged && sigma_converged;
    fit.iterations = total_iterations;
    fit.final_residual = final_residual;
    if (basis.size() >= data.p() && basis.size() > 0) {
        fit.slope = reconstruct_function(beta, basis);
    }
    return fit;
}

double conditional_mean_binary(const Eigen::VectorXd& delta, const AugmentedCoef& beta_c,
                               const Eigen::MatrixXd& omega) {
    if (delta.size() != beta_c.beta.size() || omega.rows() != delta.size() ||
        omega.cols() != delta.size()) {
        throw invalid_input("conditional_mean_binary: dimension mismatch");
    }
    const Eigen::VectorXd adj = delta - 0.5 * (omega * beta_c.beta);
    return logistic(beta_c.beta0 + adj.dot(beta_c.beta));
}

std::string Diagnostics::report() const {
    std::ostringstream os;
    os << "assumption_norm: lambda_max(Omega)=" << omega_lambda_max
       << (norm_ok ? " [pass]" : " [warn]") << "\n";
    os << "assumption_bound: ";
    if (bound_lhs.has_value()) {
        os << "lhs=" << *bound_lhs << " rhs=" << gram_lambda_min
           << (bound_ok ? " [pass]" : " [warn]");
    } else {
        os << "skipped (no slope estimate supplied)";
    }
    os << "\n";
    os << "assumption_spectrum: lambda_max(Omega1)=" << omega1_lambda_max
       << " gram_lambda_min=" << gram_lambda_min << (spectrum_ok ? " [pass]" : " [warn]")
       << (approximate ? " [approximate: W substitutes X]" : "") << "\n";
    return os.str();
}

Diagnostics check_assumptions(const RegressionData& data,
                              const std::optional<Eigen::VectorXd>& beta_tilde) {
    Diagnostics d;
    const Eigen::VectorXd omega = data.error_model.omega();
    d.omega_lambda_max = omega.size() > 0 ? omega.maxCoeff() : 0.0;
    d.omega1_lambda_max =
        data.error_model.omega1.size() > 0 ? data.error_model.omega1.maxCoeff() : 0.0;
    d.norm_ok = std::isfinite(d.omega_lambda_max);
    // Centered score Gram matrix / n.
    Eigen::MatrixXd centered = data.scores;
    if (data.family == Family::binary) {
        const Eigen::RowVectorXd means = centered.colwise().mean();
        centered.rowwise() -= means;
    }
    const Eigen::MatrixXd gram = centered.transpose() * centered / static_cast<double>(data.n());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    d.gram_lambda_min = solver.eigenvalues().minCoeff();
    if (beta_tilde.has_value()) {
        const double m1 = data.response.cwiseAbs().maxCoeff() * beta_tilde->norm();
        d.bound_lhs = d.omega_lambda_max * std::exp(d.omega_lambda_max * m1);
        d.bound_ok = *d.bound_lhs <= d.gram_lambda_min;
    }
    const double omega1_min =
        data.error_model.omega1.size() > 0 ? data.error_model.omega1.minCoeff() : 0.0;
    d.spectrum_ok = d.omega1_lambda_max <= d.gram_lambda_min + omega1_min;
    return d;
}

}  // namespace condscore
