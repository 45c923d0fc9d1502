#include "condscore/sim.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <thread>

namespace condscore {

void SimScenario::validate() const {
    if (n < 50) {
        throw invalid_input("scenario: n must be >= 50");
    }
    if (reps < 1) {
        throw invalid_input("scenario: reps must be >= 1");
    }
    if (!(noise > 0.0)) {
        throw invalid_input("scenario: noise must be positive");
    }
    if (setting == Setting::sqexp && !(length_scale > 0.0 && length_scale < 1.0)) {
        throw invalid_input("scenario: length_scale must be in (0, 1)");
    }
    if (replicates_per_subject < 2) {
        throw invalid_input("scenario: replicates_per_subject must be >= 2");
    }
    if (grid_size < 2) {
        throw invalid_input("scenario: grid_size must be >= 2");
    }
}

CovKernel sqexp_kernel(double sigma1, double l, const Grid& grid) {
    if (!(sigma1 > 0.0) || !(l > 0.0)) {
        throw invalid_input("sqexp_kernel: sigma1 and l must be positive");
    }
    const auto& t = grid.points;
    const Eigen::Index m = t.size();
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double d = t(i) - t(j);
            const double v = sigma1 * std::exp(-d * d / (2.0 * l * l));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return CovKernel(grid, std::move(k));
}

CovKernel brownian_bridge_kernel(double sigma2, const Grid& grid) {
    if (!(sigma2 > 0.0)) {
        throw invalid_input("brownian_bridge_kernel: sigma2 must be positive");
    }
    const auto& t = grid.points;
    if (t(0) < 0.0 || t(t.size() - 1) > 1.0) {
        throw invalid_input("brownian_bridge_kernel: grid must lie in [0, 1]");
    }
    const Eigen::Index m = t.size();
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = sigma2 * (std::min(t(i), t(j)) - t(i) * t(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return CovKernel(grid, std::move(k));
}

GpSampler::GpSampler(const CovKernel& kernel) : grid_(kernel.grid) {
    const Eigen::Index m = kernel.matrix.rows();
    const double jitter = 1e-10 * kernel.matrix.trace() / static_cast<double>(m);
    Eigen::MatrixXd k = kernel.matrix;
    k.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        // One stronger jitter attempt before giving up.
        k.diagonal().array() += 1e-8 * (kernel.matrix.trace() / m + 1.0);
        llt.compute(k);
        if (llt.info() != Eigen::Success) {
            throw numerical_error("sample_gp: covariance factorization failed after jitter");
        }
    }
    chol_ = llt.matrixL();
}

void GpSampler::draw_into(Eigen::MatrixXd& out, Rng& rng) const {
    const Eigen::Index m = grid_.points.size();
    Eigen::MatrixXd z(out.rows(), m);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            z(i, j) = rng.normal();
        }
    }
    out.noalias() = z * chol_.transpose();
}

CurveSet GpSampler::draw(int n, Rng& rng) const {
    Eigen::MatrixXd v(n, grid_.points.size());
    draw_into(v, rng);
    return CurveSet(grid_, std::move(v));
}

CurveSet sample_gp(const CovKernel& kernel, int n, Rng& rng) {
    return GpSampler(kernel).draw(n, rng);
}

std::pair<CurveSet, int> generate_covariates(int n, const Grid& grid, Rng& rng,
                                             PRounding rounding) {
    if (n < 1) {
        throw invalid_input("generate_covariates: n must be >= 1");
    }
    const double root = std::pow(static_cast<double>(n), 0.2);
    const int p =
        2 * static_cast<int>(rounding == PRounding::nearest ? std::lround(root)
                                                            : std::floor(root));
    const Basis basis = fourier_basis(p, grid);
    Eigen::MatrixXd coefs(n, p);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) {
            coefs(i, k) = static_cast<double>(rng.poisson(2.0));
        }
    }
    return {CurveSet(grid, coefs * basis.functions), p};
}

std::pair<Curve, Eigen::VectorXd> generate_slope(int p, const Grid& grid) {
    if (p < 1) {
        throw invalid_input("generate_slope: p must be >= 1");
    }
    Eigen::VectorXd coefs(p);
    for (int k = 0; k < p; ++k) {
        coefs(k) = 1.0 / static_cast<double>(k + 1);
    }
    const Basis basis = fourier_basis(p, grid);
    return {reconstruct_function(coefs, basis), coefs};
}

Eigen::VectorXd generate_responses(const CurveSet& X, const Curve& slope, Family family, Rng& rng,
                                   BinaryLink link) {
    if (!X.grid.same_as(slope.grid)) {
        throw invalid_input("generate_responses: grid mismatch");
    }
    const int n = X.count();
    const Eigen::VectorXd w = trap_weights(X.grid);
    Eigen::VectorXd y(n);
    if (family == Family::gaussian) {
        const Eigen::VectorXd lin =
            X.values * (w.array() * slope.values.array()).matrix();
        for (int i = 0; i < n; ++i) {
            y(i) = lin(i) + rng.normal();
        }
        return y;
    }
    Eigen::VectorXd eta(n);
    if (link == BinaryLink::max_curve) {
        for (int i = 0; i < n; ++i) {
            eta(i) = X.values.row(i).maxCoeff();
        }
    } else {
        // Linear-functional logistic, centered so the linear predictor has
        // mean zero under Poisson(2) coefficients: intercept = -2 sum_k b_k
        // with b_k the slope's Fourier coefficients (recovered by projection;
        // coefficients beyond the slope's span vanish up to quadrature error).
        const int K = std::min<int>(40, X.grid.size() - 2);
        const Basis fourier = fourier_basis(K, X.grid);
        double coef_sum = 0.0;
        for (int k = 0; k < K; ++k) {
            coef_sum += inner_product(slope, fourier.function(k));
        }
        const double intercept = -2.0 * coef_sum;
        eta = X.values * (w.array() * slope.values.array()).matrix();
        eta.array() += intercept;
    }
    for (int i = 0; i < n; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-eta(i)));
        y(i) = rng.uniform() < prob ? 1.0 : 0.0;
    }
    return y;
}

std::string family_name(Family f) { return f == Family::gaussian ? "gaussian" : "binary"; }

std::string setting_name(Setting s) {
    return s == Setting::sqexp ? "sqexp" : "brownian_bridge";
}

PipelineResult estimate_pipeline(const CurveSet& observed, const ReplicateSet& reps,
                                 const Eigen::VectorXd& response, Family family,
                                 const PipelineOptions& opt) {
    if (!observed.grid.same_as(reps.grid)) {
        throw invalid_input("estimate_pipeline: curve and replicate grids differ");
    }
    if (observed.count() != response.size()) {
        throw invalid_input("estimate_pipeline: response length must match curve count");
    }
    const int n = observed.count();
    const int m = observed.grid.size();
    const int cap = std::min({opt.cap, n - 1, m - 1});

    const CovKernel khat = estimate_error_kernel(reps);
    PipelineResult out;
    out.error_eigen = eigen_decompose(khat, cap);

    Basis working;
    Eigen::VectorXd lambda;
    if (opt.basis_source == BasisSource::observed) {
        const CovKernel cov_w = sample_covariance_kernel(observed);
        const EigenBasis fpca = eigen_decompose(cov_w, cap);
        working = fpca.basis;
        lambda = kernel_quadratic_forms(khat, working, working.size()).cwiseMax(0.0);
    } else {
        working = out.error_eigen.basis;
        lambda = out.error_eigen.eigenvalues.head(working.size());
    }

    const Eigen::VectorXd v = observed_score_variances(observed, working, working.size());
    int pn = 0;
    if (opt.selection == SelectionMode::observed) {
        pn = select_pn_from_variances(v, opt.epsilon, working.size());
    } else {
        const Eigen::VectorXd signal = (v - lambda.head(v.size())).cwiseMax(0.0);
        pn = select_pn_from_variances(signal, opt.epsilon, working.size());
    }

    out.working_basis = working.head(pn);
    out.lambda = lambda;
    out.pn = pn;

    const ScoreMatrix scores = project_scores(observed, working, pn);
    const ErrorModel em(lambda.head(pn), 1.0);
    const RegressionData data = make_regression_data(scores, response, em, family);

    const AugmentedCoef naive = naive_glm(data);
    out.naive.coef = naive;
    out.naive.converged = true;
    out.naive.pn = pn;
    out.naive.slope = reconstruct_function(naive.beta, out.working_basis);
    if (family == Family::gaussian) {
        out.naive.sigma2 = (data.response - data.scores * naive.beta).squaredNorm() / n;
        out.corrected = fit_gaussian(data, out.working_basis, opt.newton, opt.outer_max);
    } else {
        out.corrected = fit_binary(data, out.working_basis, opt.newton);
    }
    out.diagnostics = check_assumptions(data, out.corrected.coef.beta);
    return out;
}

namespace {

struct RepOutcome {
    bool failed = false;
    double e_n = 0.0;
    double e_co = 0.0;
    int pn = 0;
};

RepOutcome run_one_rep(const SimScenario& s, const Grid& grid, const GpSampler& sampler,
                       const Curve& true_slope, const Eigen::VectorXd& slope_coefs, int p,
                       const Basis& gen_basis, std::uint64_t rep) {
    Rng rng(s.seed, rep);
    RepOutcome out;
    const int n = s.n;
    const int m = grid.size();

    // Covariate coefficients and curves.
    Eigen::MatrixXd coefs(n, p);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) {
            coefs(i, k) = static_cast<double>(rng.poisson(2.0));
        }
    }
    const CurveSet X(grid, coefs * gen_basis.functions);

    // Error process and surrogate.
    Eigen::MatrixXd u(n, m);
    sampler.draw_into(u, rng);
    const CurveSet W(grid, X.values + u);

    // Covariance-estimation replicates (pure error curves).
    std::vector<Eigen::MatrixXd> subjects(n);
    for (int i = 0; i < n; ++i) {
        subjects[i].resize(s.replicates_per_subject, m);
        sampler.draw_into(subjects[i], rng);
    }
    const ReplicateSet reps(grid, std::move(subjects));

    // Responses.
    Eigen::VectorXd y(n);
    const Eigen::VectorXd w = trap_weights(grid);
    const Eigen::VectorXd lin = X.values * (w.array() * true_slope.values.array()).matrix();
    if (s.family == Family::gaussian) {
        for (int i = 0; i < n; ++i) {
            y(i) = lin(i) + rng.normal();
        }
    } else if (s.binary_link == BinaryLink::linear_logit) {
        const double intercept = -2.0 * slope_coefs.sum();
        for (int i = 0; i < n; ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-(intercept + lin(i))));
            y(i) = rng.uniform() < prob ? 1.0 : 0.0;
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-X.values.row(i).maxCoeff()));
            y(i) = rng.uniform() < prob ? 1.0 : 0.0;
        }
    }

    try {
        const PipelineResult fit = estimate_pipeline(W, reps, y, s.family, s.pipeline);
        out.pn = fit.pn;
        out.e_n = l2_error(true_slope, fit.naive.slope);
        if (!fit.corrected.converged) {
            out.failed = true;
            return out;
        }
        out.e_co = l2_error(true_slope, fit.corrected.slope);
    } catch (const std::exception&) {
        out.failed = true;
    }
    return out;
}

}  // namespace

MCResultRow run_scenario(const SimScenario& s, int threads) {
    s.validate();
    const Grid grid = uniform_grid(s.grid_size);
    const CovKernel kernel = s.setting == Setting::sqexp
                                 ? sqexp_kernel(s.noise, s.length_scale, grid)
                                 : brownian_bridge_kernel(s.noise, grid);
    const GpSampler sampler(kernel);
    const double root = std::pow(static_cast<double>(s.n), 0.2);
    const int p = 2 * static_cast<int>(s.p_rounding == PRounding::nearest ? std::lround(root)
                                                                          : std::floor(root));
    const Basis gen_basis = fourier_basis(p, grid);
    const auto [true_slope, slope_coefs] = generate_slope(p, grid);

    std::vector<RepOutcome> outcomes(s.reps);
    const int nthreads = std::max(1, std::min(threads, s.reps));
    if (nthreads == 1) {
        for (int r = 0; r < s.reps; ++r) {
            outcomes[r] = run_one_rep(s, grid, sampler, true_slope, slope_coefs, p, gen_basis,
                                      static_cast<std::uint64_t>(r));
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int tid = 0; tid < nthreads; ++tid) {
            pool.emplace_back([&, tid] {
                for (int r = tid; r < s.reps; r += nthreads) {
                    outcomes[r] = run_one_rep(s, grid, sampler, true_slope, slope_coefs, p,
                                              gen_basis, static_cast<std::uint64_t>(r));
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    MCResultRow row;
    row.family = s.family;
    row.setting = s.setting;
    row.n = s.n;
    row.noise = s.noise;
    row.length_scale = s.setting == Setting::sqexp ? s.length_scale : 0.0;
    row.reps = s.reps;
    double sum_en = 0.0;
    double sum_eco = 0.0;
    double sum_pn = 0.0;
    int ok = 0;
    for (const auto& o : outcomes) {
        if (o.failed) {
            ++row.failures;
            continue;
        }
        sum_en += o.e_n;
        sum_eco += o.e_co;
        sum_pn += o.pn;
        row.E_n_reps.push_back(o.e_n);
        row.E_co_reps.push_back(o.e_co);
        row.pn_reps.push_back(o.pn);
        ++ok;
    }
    if (ok == 0) {
        throw numerical_error("run_scenario: every replication failed");
    }
    row.mean_E_n = sum_en / ok;
    row.mean_E_co = sum_eco / ok;
    row.mean_pn = sum_pn / ok;
    return row;
}

InjectReport inject_and_fit(const CurveSet& clean, const Eigen::VectorXd& response,
                            const CovKernel& kernel, int reps_per_subject, Rng& rng,
                            const PipelineOptions& opt) {
    if (clean.count() != response.size()) {
        throw invalid_input("inject_and_fit: response length must match curve count");
    }
    if (reps_per_subject < 2) {
        throw invalid_input("inject_and_fit: need at least 2 replicates per subject");
    }
    const int n = clean.count();
    const int m = clean.grid.size();
    const int cap = std::min({opt.cap, n - 1, m - 1});

    // Reference slope from the clean curves (naive Gaussian fit at the
    // truncation selected on the clean data).
    const CovKernel cov_clean = sample_covariance_kernel(clean);
    const EigenBasis clean_fpca = eigen_decompose(cov_clean, cap);
    const int pn_ref = select_pn_from_variances(
        observed_score_variances(clean, clean_fpca.basis, cap), opt.epsilon, cap);
    const ScoreMatrix clean_scores = project_scores(clean, clean_fpca.basis, pn_ref);
    const ErrorModel zero_em(Eigen::VectorXd::Zero(pn_ref), 1.0);
    const RegressionData clean_data =
        make_regression_data(clean_scores, response, zero_em, Family::gaussian);
    const AugmentedCoef ref_coef = naive_glm(clean_data);
    InjectReport report;
    report.reference_slope = reconstruct_function(ref_coef.beta, clean_fpca.basis.head(pn_ref));

    // Contaminate and estimate.
    const GpSampler sampler(kernel);
    const CurveSet noise = sampler.draw(n, rng);
    const CurveSet contaminated(clean.grid, clean.values + noise.values);
    std::vector<Eigen::MatrixXd> subjects(n);
    for (int i = 0; i < n; ++i) {
        subjects[i].resize(reps_per_subject, m);
        sampler.draw_into(subjects[i], rng);
    }
    const ReplicateSet reps(clean.grid, std::move(subjects));
    const PipelineResult fit =
        estimate_pipeline(contaminated, reps, response, Family::gaussian, opt);
    report.naive_slope = fit.naive.slope;
    report.corrected_slope = fit.corrected.slope;
    report.pn = fit.pn;
    report.E_n = l2_error(report.reference_slope, fit.naive.slope);
    report.E_co = l2_error(report.reference_slope, fit.corrected.slope);
    return report;
}

}  // namespace condscore
