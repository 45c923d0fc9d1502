#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "condscore/fda.hpp"
#include "condscore/rng.hpp"

using namespace condscore;

namespace {

Curve constant_curve(const Grid& g, double c) {
    return Curve(g, Eigen::VectorXd::Constant(g.size(), c));
}

Curve sampled(const Grid& g, double (*f)(double)) {
    Eigen::VectorXd v(g.size());
    for (int j = 0; j < g.size(); ++j) {
        v(j) = f(g.points(j));
    }
    return Curve(g, v);
}

}  // namespace

TEST_CASE("grid invariants") {
    CHECK_THROWS_AS(Grid(Eigen::VectorXd::Constant(1, 0.0)), invalid_input);
    Eigen::VectorXd bad(3);
    bad << 0.0, 0.5, 0.5;
    CHECK_THROWS_AS((void)Grid(bad), invalid_input);
    const Grid g = uniform_grid(101);
    CHECK(g.a() == 0.0);
    CHECK(g.b() == 1.0);
    CHECK(trap_weights(g).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inner_product: constants integrate to the domain length") {
    const Grid g = uniform_grid(101);
    CHECK(inner_product(constant_curve(g, 1.0), constant_curve(g, 1.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inner_product: sin/cos orthogonality") {
    const Grid g = uniform_grid(101);
    const Curve s = sampled(g, [](double t) { return std::sin(2 * 3.14159265358979323846 * t); });
    const Curve c = sampled(g, [](double t) { return std::cos(2 * 3.14159265358979323846 * t); });
    CHECK(std::abs(inner_product(s, c)) < 1e-10);
}

TEST_CASE("inner_product: normalized sine has unit norm") {
    const Grid g = uniform_grid(101);
    const Curve s = sampled(g, [](double t) {
        return std::sqrt(2.0) * std::sin(2 * 3.14159265358979323846 * t);
    });
    CHECK(inner_product(s, s) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("inner_product: mismatched grids rejected") {
    const Grid g1 = uniform_grid(101);
    const Grid g2 = uniform_grid(51);
    CHECK_THROWS_AS(inner_product(constant_curve(g1, 1.0), constant_curve(g2, 1.0)),
                    invalid_input);
}

TEST_CASE("fourier_basis: K=1 is the constant function") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(1, g);
    CHECK((b.functions.row(0).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("fourier_basis: second and third functions orthogonal") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(3, g);
    CHECK(std::abs(inner_product(b.function(1), b.function(2))) < 1e-8);
}

TEST_CASE("fourier_basis: K=8 Gram matrix is the identity") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(8, g);
    const Eigen::VectorXd w = trap_weights(g);
    const Eigen::MatrixXd gram = b.functions * w.asDiagonal() * b.functions.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fourier_basis: cap enforced") {
    const Grid g = uniform_grid(201);
    CHECK_THROWS_AS(fourier_basis(65, g), invalid_input);
    CHECK_THROWS_AS(fourier_basis(0, g), invalid_input);
}

TEST_CASE("project_scores: basis function projects to a unit vector") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(2, g);
    const CurveSet one(g, b.functions.row(0));
    const ScoreMatrix s = project_scores(one, b, 2);
    CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(s(0, 1)) < 1e-8);
}

TEST_CASE("project_scores: linearity") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(2, g);
    const Eigen::MatrixXd mix = 2.0 * b.functions.row(0) + 3.0 * b.functions.row(1);
    const ScoreMatrix s = project_scores(CurveSet(g, mix), b, 2);
    CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(s(0, 1) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("project_scores: matches a brute-force quadrature oracle") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(4, g);
    Rng rng(5);
    Eigen::MatrixXd v(1, g.size());
    for (int j = 0; j < g.size(); ++j) {
        v(0, j) = rng.normal();
    }
    const CurveSet cs(g, v);
    const ScoreMatrix s = project_scores(cs, b, 4);
    const Eigen::VectorXd w = trap_weights(g);
    for (int k = 0; k < 4; ++k) {
        double oracle = 0.0;
        for (int j = 0; j < g.size(); ++j) {
            oracle += w(j) * v(0, j) * b.functions(k, j);
        }
        CHECK(s(0, k) == doctest::Approx(oracle).epsilon(1e-6));
    }
}

TEST_CASE("project_scores: p beyond basis size rejected") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(2, g);
    const CurveSet one(g, b.functions.row(0));
    CHECK_THROWS_AS(project_scores(one, b, 3), invalid_input);
}

TEST_CASE("reconstruct_function: unit coefficient returns the basis function") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(3, g);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
    e1(0) = 1.0;
    const Curve c = reconstruct_function(e1, b);
    CHECK((c.values - b.functions.row(0).transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Curve z = reconstruct_function(Eigen::VectorXd::Zero(3), b);
    CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("round trip: project then reconstruct recovers span coefficients") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(5, g);
    Rng rng(17);
    Eigen::VectorXd c(5);
    for (int k = 0; k < 5; ++k) {
        c(k) = rng.normal();
    }
    const Curve f = reconstruct_function(c, b);
    const ScoreMatrix s = project_scores(CurveSet(g, f.values.transpose()), b, 5);
    CHECK((s.row(0).transpose() - c).cwiseAbs().maxCoeff() < 1e-6);
    // Parseval at truncation.
    const Curve back = reconstruct_function(s.row(0).transpose(), b);
    CHECK(l2_error(f, back) < 1e-10);
}

TEST_CASE("l2_error: zero for identical curves, Parseval for truncations") {
    const Grid g = uniform_grid(101);
    const Basis b = fourier_basis(4, g);
    Eigen::VectorXd c(4);
    for (int k = 0; k < 4; ++k) {
        c(k) = 1.0 / (k + 1);
    }
    const Curve f = reconstruct_function(c, b);
    CHECK(l2_error(f, f) == 0.0);
    const Curve zero(g, Eigen::VectorXd::Zero(g.size()));
    CHECK(l2_error(f, zero) == doctest::Approx(1.0 + 0.25 + 1.0 / 9 + 1.0 / 16).epsilon(1e-4));
}

TEST_CASE("l2_error: symmetric and nonnegative") {
    const Grid g = uniform_grid(101);
    Rng rng(3);
    Eigen::VectorXd a(g.size());
    Eigen::VectorXd b2(g.size());
    for (int j = 0; j < g.size(); ++j) {
        a(j) = rng.normal();
        b2(j) = rng.normal();
    }
    const Curve f(g, a);
    const Curve h(g, b2);
    CHECK(l2_error(f, h) == doctest::Approx(l2_error(h, f)).epsilon(1e-14));
    CHECK(l2_error(f, h) >= 0.0);
}

TEST_CASE("center_scores: hand arithmetic and round trip") {
    ScoreMatrix s(2, 2);
    s << 1, 2, 3, 4;
    const auto [c, means] = center_scores(s);
    CHECK(means(0) == 2.0);
    CHECK(means(1) == 3.0);
    CHECK(c(0, 0) == -1.0);
    CHECK(c(1, 1) == 1.0);
    const ScoreMatrix back = c.rowwise() + means.transpose();
    CHECK((back - s).cwiseAbs().maxCoeff() == 0.0);

    ScoreMatrix identical(3, 2);
    identical << 5, 6, 5, 6, 5, 6;
    const auto [cz, mz] = center_scores(identical);
    CHECK(cz.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(center_scores(ScoreMatrix::Zero(1, 2)), invalid_input);
}

TEST_CASE("quadrature linearity") {
    const Grid g = uniform_grid(101);
    Rng rng(9);
    Eigen::VectorXd fa(g.size());
    Eigen::VectorXd ga(g.size());
    Eigen::VectorXd ha(g.size());
    for (int j = 0; j < g.size(); ++j) {
        fa(j) = rng.normal();
        ga(j) = rng.normal();
        ha(j) = rng.normal();
    }
    const double alpha = rng.normal();
    const Curve f(g, fa);
    const Curve h(g, ha);
    const Curve combo(g, alpha * fa + ga);
    const double lhs = inner_product(combo, h);
    const double rhs = alpha * inner_product(f, h) + inner_product(Curve(g, ga), h);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
