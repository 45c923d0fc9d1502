#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "condscore/error.hpp"

namespace condscore {

// A strictly increasing sample grid t_1 < ... < t_m defining the integration
// domain [t_1, t_m]. All functional objects in the library live on a grid.
struct Grid {
    Eigen::VectorXd points;

    Grid() = default;
    explicit Grid(Eigen::VectorXd pts);

    int size() const { return static_cast<int>(points.size()); }
    double a() const { return points(0); }
    double b() const { return points(points.size() - 1); }
    bool same_as(const Grid& other) const;
};

// Uniform grid of m points on [a, b].
Grid uniform_grid(int m, double a = 0.0, double b = 1.0);

// Trapezoid-rule quadrature weights for a grid.
Eigen::VectorXd trap_weights(const Grid& grid);

// A function sampled on a grid.
struct Curve {
    Grid grid;
    Eigen::VectorXd values;

    Curve() = default;
    Curve(Grid g, Eigen::VectorXd v);
};

// n curves sharing one grid; row i of `values` samples curve i.
struct CurveSet {
    Grid grid;
    Eigen::MatrixXd values;  // n x m

    CurveSet() = default;
    CurveSet(Grid g, Eigen::MatrixXd v);

    int count() const { return static_cast<int>(values.rows()); }
    Curve curve(int i) const { return Curve(grid, values.row(i).transpose()); }
};

// An ordered collection of basis functions rho_1, ..., rho_K on a grid,
// orthonormal under the quadrature inner product to tolerance 1e-6.
struct Basis {
    Grid grid;
    Eigen::MatrixXd functions;  // K x m

    Basis() = default;
    // check_orthonormal=false skips the Gram validation (for internal
    // construction where orthonormality is guaranteed separately).
    Basis(Grid g, Eigen::MatrixXd f, bool check_orthonormal = true);

    int size() const { return static_cast<int>(functions.rows()); }
    Curve function(int k) const { return Curve(grid, functions.row(k).transpose()); }
    Basis head(int p) const;  // first p functions
};

using ScoreMatrix = Eigen::MatrixXd;

// Trapezoid-rule approximation of the L2 inner product of two curves.
double inner_product(const Curve& f, const Curve& g);

// First K functions of the orthonormal Fourier system on [0,1]:
// 1, sqrt(2)cos(2*pi*t), sqrt(2)sin(2*pi*t), sqrt(2)cos(4*pi*t), ...
Basis fourier_basis(int K, const Grid& grid, int cap = 64);

// n x p matrix of projections <curve_i, rho_k>.
ScoreMatrix project_scores(const CurveSet& curves, const Basis& basis, int p);

// Pointwise linear combination sum_k coeffs_k * rho_k.
Curve reconstruct_function(const Eigen::VectorXd& coeffs, const Basis& basis);

// Integrated squared difference of two curves.
double l2_error(const Curve& f, const Curve& g);

// Column-centers a score matrix; returns the centered matrix and the means.
std::pair<ScoreMatrix, Eigen::VectorXd> center_scores(const ScoreMatrix& scores);

}  // namespace condscore
