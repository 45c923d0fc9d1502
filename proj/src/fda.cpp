#include "condscore/fda.hpp"

#include <cmath>

namespace condscore {

Grid::Grid(Eigen::VectorXd pts) : points(std::move(pts)) {
    if (points.size() < 2) {
        throw invalid_input("grid needs at least 2 points");
    }
    for (Eigen::Index j = 1; j < points.size(); ++j) {
        if (!(points(j) > points(j - 1))) {
            throw invalid_input("grid points must be strictly increasing");
        }
    }
    if (!points.allFinite()) {
        throw invalid_input("grid points must be finite");
    }
}

bool Grid::same_as(const Grid& other) const {
    return points.size() == other.points.size() && points == other.points;
}

Grid uniform_grid(int m, double a, double b) {
    if (m < 2 || !(b > a)) {
        throw invalid_input("uniform_grid: need m >= 2 and b > a");
    }
    Eigen::VectorXd pts(m);
    for (int j = 0; j < m; ++j) {
        pts(j) = a + (b - a) * static_cast<double>(j) / (m - 1);
    }
    return Grid(std::move(pts));
}

Eigen::VectorXd trap_weights(const Grid& grid) {
    const auto& t = grid.points;
    const Eigen::Index m = t.size();
    Eigen::VectorXd w(m);
    w(0) = (t(1) - t(0)) / 2.0;
    w(m - 1) = (t(m - 1) - t(m - 2)) / 2.0;
    for (Eigen::Index j = 1; j < m - 1; ++j) {
        w(j) = (t(j + 1) - t(j - 1)) / 2.0;
    }
    return w;
}

Curve::Curve(Grid g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.points.size()) {
        throw invalid_input("curve values must match grid length");
    }
    if (!values.allFinite()) {
        throw invalid_input("curve values must be finite");
    }
}

CurveSet::CurveSet(Grid g, Eigen::MatrixXd v) : grid(std::move(g)), values(std::move(v)) {
    if (values.cols() != grid.points.size()) {
        throw invalid_input("curve set columns must match grid length");
    }
    if (values.rows() < 1) {
        throw invalid_input("curve set needs at least one curve");
    }
    if (!values.allFinite()) {
        throw invalid_input("curve set values must be finite");
    }
}

Basis::Basis(Grid g, Eigen::MatrixXd f, bool check_orthonormal)
    : grid(std::move(g)), functions(std::move(f)) {
    if (functions.cols() != grid.points.size()) {
        throw invalid_input("basis columns must match grid length");
    }
    if (check_orthonormal && functions.rows() > 0) {
        const Eigen::VectorXd w = trap_weights(grid);
        const Eigen::MatrixXd gram = functions * w.asDiagonal() * functions.transpose();
        const Eigen::MatrixXd dev =
            gram - Eigen::MatrixXd::Identity(functions.rows(), functions.rows());
        if (dev.cwiseAbs().maxCoeff() > 1e-6) {
            throw invalid_input("basis is not orthonormal to tolerance 1e-6");
        }
    }
}

Basis Basis::head(int p) const {
    if (p < 0 || p > size()) {
        throw invalid_input("basis head: p out of range");
    }
    return Basis(grid, functions.topRows(p), false);
}

double inner_product(const Curve& f, const Curve& g) {
    if (!f.grid.same_as(g.grid)) {
        throw invalid_input("inner_product: curves on different grids");
    }
    const Eigen::VectorXd w = trap_weights(f.grid);
    return (f.values.array() * g.values.array() * w.array()).sum();
}

Basis fourier_basis(int K, const Grid& grid, int cap) {
    if (K < 1) {
        throw invalid_input("fourier_basis: K must be >= 1");
    }
    if (K > cap) {
        throw invalid_input("fourier_basis: K exceeds the configured cap");
    }
    const auto& t = grid.points;
    Eigen::MatrixXd f(K, t.size());
    const double two_pi = 2.0 * 3.14159265358979323846;
    const double r2 = std::sqrt(2.0);
    f.row(0).setOnes();
    for (int k = 1; k < K; ++k) {
        const double freq = two_pi * ((k + 1) / 2);
        for (Eigen::Index j = 0; j < t.size(); ++j) {
            f(k, j) = (k % 2 == 1) ? r2 * std::cos(freq * t(j)) : r2 * std::sin(freq * t(j));
        }
    }
    return Basis(grid, std::move(f));
}

ScoreMatrix project_scores(const CurveSet& curves, const Basis& basis, int p) {
    if (!curves.grid.same_as(basis.grid)) {
        throw invalid_input("project_scores: grid mismatch");
    }
    if (p < 1 || p > basis.size()) {
        throw invalid_input("project_scores: p exceeds basis size");
    }
    const Eigen::VectorXd w = trap_weights(curves.grid);
    return curves.values * w.asDiagonal() * basis.functions.topRows(p).transpose();
}

Curve reconstruct_function(const Eigen::VectorXd& coeffs, const Basis& basis) {
    if (coeffs.size() > basis.size()) {
        throw invalid_input("reconstruct_function: more coefficients than basis functions");
    }
    Eigen::VectorXd v =
        basis.functions.topRows(coeffs.size()).transpose() * coeffs;
    if (coeffs.size() == 0) {
        v = Eigen::VectorXd::Zero(basis.grid.size());
    }
    return Curve(basis.grid, std::move(v));
}

double l2_error(const Curve& f, const Curve& g) {
    if (!f.grid.same_as(g.grid)) {
        throw invalid_input("l2_error: curves on different grids");
    }
    Curve diff(f.grid, f.values - g.values);
    return inner_product(diff, diff);
}

std::pair<ScoreMatrix, Eigen::VectorXd> center_scores(const ScoreMatrix& scores) {
    if (scores.rows() < 2) {
        throw invalid_input("center_scores: need at least 2 rows");
    }
    Eigen::VectorXd means = scores.colwise().mean();
    ScoreMatrix centered = scores.rowwise() - means.transpose();
    return {std::move(centered), std::move(means)};
}

}  // namespace condscore
