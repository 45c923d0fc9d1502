#pragma once

#include <string>
#include <vector>

#include "condscore/covariance.hpp"
#include "condscore/estimator.hpp"
#include "condscore/sim.hpp"

namespace condscore {

// All writers format doubles with 17 significant digits so that files
// round-trip bit-exactly, and write atomically (temp file + rename).

// Curve-set format: header "t,<t_1>,...,<t_m>"; rows "curve_<id>,<values>".
void write_curveset(const std::string& path, const CurveSet& curves);
CurveSet read_curveset(const std::string& path);

// Replicate format: same header; rows "curve_<subject>_rep_<l>,<values>".
void write_replicates(const std::string& path, const ReplicateSet& reps);
ReplicateSet read_replicates(const std::string& path);

// Response format: header "y"; one value per row, aligned with curve order.
void write_response(const std::string& path, const Eigen::VectorXd& y);
Eigen::VectorXd read_response(const std::string& path);

// Eigenbasis format: header "lambda,<t_1>,...,<t_m>"; one row per
// eigenfunction, first column its eigenvalue.
void write_eigenbasis(const std::string& path, const EigenBasis& eb);
EigenBasis read_eigenbasis(const std::string& path);

// Cumulative variance-explained sequence: header "k,cumulative_fraction".
void write_cumulative_variance(const std::string& path, const Eigen::VectorXd& variances);

// Fit result: "key,value" block (beta0, sigma2, converged, iterations,
// final_residual, pn, coef_k) followed by the slope in curve format.
void write_fit_result(const std::string& path, const FitResult& fit);

// Results table, one row per scenario.
void write_results(const std::string& path, const std::vector<MCResultRow>& rows);

// Injection report: metrics block then the three slope curves.
void write_inject_report(const std::string& path, const InjectReport& report);

std::string format_double(double v);

}  // namespace condscore
