#include "degen/norms.hpp"
#include "degen/spectral.hpp"
#include "oracles/bessel.hpp"

#include <gtest/gtest.h>

#include <Eigen/SparseCholesky>

#include <cmath>
#include <random>

using namespace degen;

TEST(BesselOracle, AgreesWithStandardLibrary) {
    for (double alpha : {0.25, 0.5, 0.75}) {
        const double nu = oracle::nu_of(alpha);
        for (int n = 1; n <= 3; ++n) {
            const double j = oracle::bessel_zero(nu, n);
            EXPECT_NEAR(std::cyl_bessel_j(nu, j), 0.0, 1e-12);
        }
        EXPECT_NEAR(oracle::bessel_j(nu, 1.7), std::cyl_bessel_j(nu, 1.7), 1e-14);
    }
    // frozen value: first zero of J_{1/3}
    EXPECT_NEAR(oracle::bessel_zero(1.0 / 3.0, 1), 2.902586248416954, 1e-12);
    EXPECT_NEAR(oracle::degenerate_eigenvalue(0.5, 1), 4.739066397843304, 1e-11);
}

TEST(Spectrum, ClassicalLimit) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 1e-12), 512, 1.0));
    const auto s = compute_spectrum(ops, 5);
    for (int n = 1; n <= 5; ++n) {
        const double exact = std::pow(n * M_PI, 2);
        EXPECT_NEAR(s.values[n - 1], exact, 1e-3 * exact);
    }
}

TEST(Spectrum, BesselEigenvalues) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 0.5), 512, 2.0));
    const auto s = compute_spectrum(ops, 4);
    for (int n = 1; n <= 4; ++n) {
        const double exact = oracle::degenerate_eigenvalue(0.5, n);
        EXPECT_NEAR(s.values[n - 1], exact, 1e-3 * exact) << "mode " << n;
    }
}

TEST(Spectrum, SquareSeparation) {
    const double mu1 = oracle::degenerate_eigenvalue(0.5, 1);
    const auto ops = assemble(build_mesh(make_domain(DomainKind::square, 0.5), 32));
    const auto s = compute_spectrum(ops, 3);
    EXPECT_NEAR(s.values[0], M_PI * M_PI + mu1, 1e-2 * (M_PI * M_PI + mu1));
    const double next = std::min(4 * M_PI * M_PI + mu1, M_PI * M_PI + oracle::degenerate_eigenvalue(0.5, 2));
    EXPECT_NEAR(s.values[1], next, 2e-2 * next);
}

TEST(Spectrum, DenseAndSubspacePathsAgree) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 0.5), 600));
    EigenOptions dense;
    dense.dense_limit = 100000;
    const auto a = compute_spectrum(ops, 6);
    const auto b = compute_spectrum(ops, 6, dense);
    EXPECT_GT(a.iterations, 0);
    EXPECT_EQ(b.iterations, 0);
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(a.values[i], b.values[i], 1e-10 * b.values[i]);
        EXPECT_LT((a.vectors.col(i) - b.vectors.col(i)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Spectrum, OrthonormalityAndSigns) {
    for (auto kind : {DomainKind::interval, DomainKind::square}) {
        const auto ops = assemble(build_mesh(make_domain(kind, 0.5), kind == DomainKind::interval ? 1024 : 24));
        const auto s = compute_spectrum(ops, 10);
        const Eigen::MatrixXd mm = s.vectors.transpose() * (ops.mass * s.vectors);
        const Eigen::MatrixXd kk = s.vectors.transpose() * (ops.stiffness * s.vectors);
        EXPECT_LT((mm - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) {
                const double target = i == j ? s.values[i] : 0.0;
                EXPECT_NEAR(kk(i, j), target, 1e-8 * s.values[std::max(i, j)]);
            }
        EXPECT_GT(s.values[0], 0.0);
        for (int i = 1; i < 10; ++i) EXPECT_GE(s.values[i], s.values[i - 1]);
        for (int i = 0; i < 10; ++i) {
            const double peak = s.vectors.col(i).cwiseAbs().maxCoeff();
            Eigen::Index at = 0;
            while (std::abs(s.vectors(at, i)) < peak * (1 - 1e-9)) ++at;
            EXPECT_GT(s.vectors(at, i), 0.0);
        }
    }
}

TEST(Spectrum, ClusterBasisIsReproducible) {
    // on the classical square, lambda_{1,2} = lambda_{2,1} is a repeated pair
    const auto ops = assemble(build_mesh(make_domain(DomainKind::square, 1e-12), 16, 1.0));
    const auto a = compute_spectrum(ops, 4);
    EigenOptions other;
    other.dense_limit = 0;
    const auto b = compute_spectrum(ops, 4, other);
    EXPECT_NEAR(a.values[1], a.values[2], 1e-9 * a.values[1]);
    EXPECT_LT((a.vectors - b.vectors).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Spectrum, RejectsTooManyModes) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 0.5), 8));
    EXPECT_THROW(compute_spectrum(ops, 8), ParameterError);
    EXPECT_NO_THROW(compute_spectrum(ops, 7));
}

TEST(Rayleigh, Identities) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 0.5), 256));
    const auto s = compute_spectrum(ops, 3);
    const auto p1 = mode(ops, s, 0), p2 = mode(ops, s, 1);
    EXPECT_NEAR(rayleigh(ops, p1), s.values[0], 1e-10 * s.values[0]);
    EXPECT_NEAR(rayleigh(ops, p1 + p2), 0.5 * (s.values[0] + s.values[1]), 1e-10 * s.values[1]);
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (int r = 0; r < 10; ++r) {
        Eigen::VectorXd v(ops.dofs());
        for (auto& x : v) x = nd(gen);
        EXPECT_GE(rayleigh(ops, ops.to_nodes(v)), s.values[0] - 1e-10);
    }
    EXPECT_THROW(rayleigh(ops, Eigen::VectorXd::Zero(257)), UndefinedRatio);
}

TEST(Expand, UnitCoefficientsAndParseval) {
    const auto ops = assemble(build_mesh(make_domain(DomainKind::square, 0.5), 20));
    const auto s = compute_spectrum(ops, 8);
    const auto c3 = expand(ops, s, mode(ops, s, 2));
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(c3[i], i == 2 ? 1.0 : 0.0, 1e-12);
    EXPECT_EQ(expand(ops, s, Eigen::VectorXd::Zero(Eigen::Index(ops.mesh->num_nodes()))).norm(), 0.0);

    Eigen::VectorXd coeffs(8);
    coeffs << 0.3, -1.1, 0.7, 2.0, 0.0, -0.4, 0.9, 0.05;
    const auto u = synthesize(ops, s, coeffs);
    const auto back = expand(ops, s, u);
    const auto n = norms(ops, u);
    const Eigen::VectorXd lam = s.values;
    EXPECT_NEAR(back.squaredNorm(), n.l2 * n.l2, 1e-8 * n.l2 * n.l2);
    const double weighted = (back.array().square() * lam.array()).sum();
    EXPECT_NEAR(weighted, n.h1w * n.h1w, 1e-6 * weighted);
    // ||A u||^2 as (K u)^T M^{-1} (K u)
    const Eigen::VectorXd ku = ops.stiffness * ops.to_interior(u);
    Eigen::SimplicialLLT<SparseMatrix> m(ops.mass);
    const double image = ku.dot(m.solve(ku));
    const double image_modes = (back.array().square() * lam.array().square()).sum();
    EXPECT_NEAR(image, image_modes, 1e-6 * image_modes);
}

// The Dirichlet eigenfunction behaves like x^(1-alpha) at the degenerate edge,
// so on a mesh graded with exponent g the eigenvalue error decays like h^min(2, g(1-alpha)).
TEST(Spectrum, GradedMeshConvergenceOrder) {
    const double exact = oracle::degenerate_eigenvalue(0.5, 1);
    for (double g : {2.0, 4.0}) {
        std::vector<double> lam;
        for (int n : {256, 512, 1024}) {
            const auto ops = assemble(build_mesh(make_domain(DomainKind::interval, 0.5), n, g));
            lam.push_back(compute_spectrum(ops, 1).values[0]);
        }
        const double richardson = std::log2((lam[0] - lam[1]) / (lam[1] - lam[2]));
        const double to_oracle = std::log2((lam[1] - exact) / (lam[2] - exact));
        const double expected = std::min(2.0, g * 0.5);
        EXPECT_NEAR(richardson, expected, 0.15) << "g = " << g;
        EXPECT_NEAR(to_oracle, expected, 0.15) << "g = " << g;
    }
}
