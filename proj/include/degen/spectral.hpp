#pragma once

#include "degen/assembly.hpp"
#include "degen/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace degen {

/// Leading eigenpairs of K phi = lambda M phi, ascending, M-orthonormal.
/// Eigenvectors are stored on interior degrees of freedom.
struct Spectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    int iterations = 0; ///< subspace iterations used (0 for the dense path)

    Eigen::Index count() const { return values.size(); }
};

struct EigenOptions {
    Eigen::Index dense_limit = 400; ///< dense solve at or below this many dofs
    double tolerance = 1e-11;       ///< relative residual per converged pair
    int max_iterations = 2000;
    double cluster_tol = 1e-8;      ///< relative gap treated as a repeated eigenvalue
};

namespace detail {

/// Rotates an M-orthonormal basis of a repeated eigenvalue into a canonical
/// form that depends only on the spanned subspace: rows are chosen by
/// pivoted Cholesky of the projector V V^T and the basis is made lower
/// triangular with positive diagonal on those rows.
inline void canonicalize_cluster(Eigen::Ref<Eigen::MatrixXd> v) {
    const Eigen::Index n = v.rows(), c = v.cols();
    if (c < 2) return;
    Eigen::VectorXd diag = v.rowwise().squaredNorm();
    Eigen::MatrixXd factors(n, c);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index step = 0; step < c; ++step) {
        Eigen::Index piv = 0;
        diag.maxCoeff(&piv);
        rows.push_back(piv);
        Eigen::VectorXd col = v * v.row(piv).transpose();
        for (Eigen::Index q = 0; q < step; ++q) col -= factors.col(q) * factors(piv, q);
        const double d = std::sqrt(std::max(col[piv], 1e-300));
        factors.col(step) = col / d;
        diag -= factors.col(step).cwiseAbs2();
        for (auto r : rows) diag[r] = -1.0;
    }
    Eigen::MatrixXd sub(c, c);
    for (Eigen::Index q = 0; q < c; ++q) sub.row(q) = v.row(rows[std::size_t(q)]);
    // sub = L Q with L lower triangular: QR of sub^T = Q' R gives sub = R^T Q'^T
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sub.transpose());
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c, c);
    Eigen::MatrixXd rotated = v * q;
    for (Eigen::Index k = 0; k < c; ++k)
        if (rotated(rows[std::size_t(k)], k) < 0.0) rotated.col(k) *= -1.0;
    v = rotated;
}

/// Entry of largest magnitude made positive; near-ties resolved by lowest index.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> x) {
    const double peak = x.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) >= peak * (1.0 - 1e-9)) {
            if (x[i] < 0.0) x *= -1.0;
            return;
        }
    }
}

inline void finalize(Spectrum& s, const SparseMatrix& m, double cluster_tol) {
    const Eigen::Index k = s.count();
    Eigen::Index start = 0;
    while (start < k) {
        Eigen::Index end = start + 1;
        while (end < k && std::abs(s.values[end] - s.values[start]) <= cluster_tol * std::abs(s.values[start])) ++end;
        if (end - start > 1) {
            // re-orthogonalize the cluster in the M inner product
            Eigen::MatrixXd block = s.vectors.middleCols(start, end - start);
            const Eigen::MatrixXd gram = block.transpose() * (m * block);
            const Eigen::LLT<Eigen::MatrixXd> llt(gram);
            block = llt.matrixU().solve<Eigen::OnTheRight>(block);
            canonicalize_cluster(block);
            s.vectors.middleCols(start, end - start) = block;
        }
        start = end;
    }
    for (Eigen::Index i = 0; i < k; ++i) fix_sign(s.vectors.col(i));
}

} // namespace detail

namespace detail {

inline Spectrum dense_spectrum(const OperatorPair& ops, Eigen::Index k) {
    const Eigen::MatrixXd kd(ops.stiffness), md(ops.mass);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(kd, md, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed");
    Spectrum s;
    s.values = ges.eigenvalues().head(k);
    s.vectors = ges.eigenvectors().leftCols(k);
    return s;
}

/// Rayleigh-Ritz of (K, M) on span(Y); returns M-orthonormal Ritz vectors.
inline void rayleigh_ritz(const SparseMatrix& kmat, const SparseMatrix& mmat, Eigen::MatrixXd& y, Eigen::MatrixXd& x,
                          Eigen::VectorXd& lam) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        const double nrm = std::sqrt(y.col(c).dot(mmat * y.col(c)));
        if (nrm > 0.0) y.col(c) /= nrm;
    }
    Eigen::MatrixXd kr = y.transpose() * (kmat * y);
    Eigen::MatrixXd mr = y.transpose() * (mmat * y);
    kr = 0.5 * (kr + kr.transpose()).eval();
    mr = 0.5 * (mr + mr.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(kr, mr, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz projection failed");
    lam = ges.eigenvalues();
    x = y * ges.eigenvectors();
}

/// Inverse subspace iteration with Rayleigh-Ritz; K is factored once.
/// Convergence is measured by the shift-invert residual ||lambda K^-1 M x - x||_M.
inline Spectrum subspace_spectrum(const OperatorPair& ops, Eigen::Index k, const EigenOptions& opt) {
    const Eigen::Index n = ops.dofs();
    const Eigen::Index p = std::min(n, std::max<Eigen::Index>(2 * k, k + 10));
    Eigen::SimplicialLLT<SparseMatrix> chol(ops.stiffness);
    if (chol.info() != Eigen::Success) throw NumericalError("stiffness factorization failed (matrix not SPD)");

    std::mt19937_64 gen(0x5eed5eedULL);
    Eigen::MatrixXd y(n, p);
    for (Eigen::Index c = 0; c < p; ++c)
        for (Eigen::Index r = 0; r < n; ++r) y(r, c) = double(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    Eigen::MatrixXd x;
    Eigen::VectorXd lam;
    y = chol.solve(ops.mass * y);
    rayleigh_ritz(ops.stiffness, ops.mass, y, x, lam);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        y = chol.solve(ops.mass * x);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::VectorXd r = lam[i] * y.col(i) - x.col(i);
            worst = std::max(worst, std::sqrt(std::max(0.0, r.dot(ops.mass * r))));
        }
        if (worst < opt.tolerance) {
            Spectrum s;
            s.values = lam.head(k);
            s.vectors = x.leftCols(k);
            s.iterations = it;
            return s;
        }
        rayleigh_ritz(ops.stiffness, ops.mass, y, x, lam);
    }
    throw NumericalError("subspace iteration did not converge after " + std::to_string(opt.max_iterations) +
                         " iterations");
}

} // namespace detail

/// First k eigenpairs of the weighted operator. Small problems (or requests
/// for a large share of the spectrum) use a dense generalized solver; larger
/// ones use inverse subspace iteration on a sparse Cholesky factor.
inline Spectrum compute_spectrum(const OperatorPair& ops, Eigen::Index k, const EigenOptions& opt = {}) {
    const Eigen::Index n = ops.dofs();
    if (k < 1 || k > n)
        throw ParameterError("requested " + std::to_string(k) + " eigenpairs from " + std::to_string(n) + " dofs");
    Spectrum s = (n <= opt.dense_limit || 3 * k >= n) ? detail::dense_spectrum(ops, k)
                                                       : detail::subspace_spectrum(ops, k, opt);
    if (!(s.values[0] > 0.0)) throw NumericalError("first eigenvalue is not positive");
    detail::finalize(s, ops.mass, opt.cluster_tol);
    return s;
}

/// Mode i (0-based) as a nodal vector.
inline Eigen::VectorXd mode(const OperatorPair& ops, const Spectrum& s, Eigen::Index i) {
    return ops.to_nodes(s.vectors.col(i));
}

/// u^T K u / u^T M u.
inline double rayleigh(const OperatorPair& ops, const Eigen::VectorXd& u) {
    ops.require_admissible(u);
    const Eigen::VectorXd v = ops.to_interior(u);
    const double den = v.dot(ops.mass * v);
    if (!(den > 0.0)) throw UndefinedRatio("Rayleigh quotient undefined for the zero vector");
    return v.dot(ops.stiffness * v) / den;
}

/// Coefficients u_i = (u, phi_i)_{L2} for the first `count` modes (all when count < 0).
inline Eigen::VectorXd expand(const OperatorPair& ops, const Spectrum& s, const Eigen::VectorXd& u,
                              Eigen::Index count = -1) {
    if (count < 0) count = s.count();
    if (count > s.count()) throw ParameterError("spectrum holds fewer modes than requested");
    const Eigen::VectorXd mu = ops.mass * ops.to_interior(u);
    return s.vectors.leftCols(count).transpose() * mu;
}

/// sum_i c_i phi_i as a nodal vector.
inline Eigen::VectorXd synthesize(const OperatorPair& ops, const Spectrum& s, const Eigen::VectorXd& coeffs) {
    if (coeffs.size() > s.count()) throw ParameterError("more coefficients than modes");
    return ops.to_nodes(s.vectors.leftCols(coeffs.size()) * coeffs);
}

} // namespace degen
