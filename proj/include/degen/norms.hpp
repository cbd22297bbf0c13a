#pragma once

#include "degen/assembly.hpp"
#include "degen/error.hpp"
#include "degen/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace degen {

struct Norms {
    double l2 = 0.0;
    double h1w = 0.0;       ///< (int grad u . A grad u)^(1/2)
    double hardy_lhs = 0.0; ///< int x_N^(alpha-2) u^2 (not square-rooted)
};

/// L2, weighted energy and Hardy-weight integrals of an admissible nodal vector.
inline Norms norms(const OperatorPair& ops, const Eigen::VectorXd& u) {
    ops.require_admissible(u);
    const Eigen::VectorXd v = ops.to_interior(u);
    Norms n;
    n.l2 = std::sqrt(std::max(0.0, v.dot(ops.mass * v)));
    n.h1w = std::sqrt(std::max(0.0, v.dot(ops.stiffness * v)));
    n.hardy_lhs = v.dot(ops.hardy * v);
    return n;
}

inline double hardy_constant(double alpha) { return 4.0 / ((1.0 - alpha) * (1.0 - alpha)); }

struct HardyResult {
    double ratio = 0.0;
    double bound = 0.0;
    bool holds = false;
};

/// Ratio int x_N^(alpha-2) u^2 / int x_N^alpha (du/dx_N)^2 against 4/(1-alpha)^2.
inline HardyResult hardy_check(const OperatorPair& ops, const Eigen::VectorXd& u, double tol = 0.02) {
    const Norms n = norms(ops, u);
    const Eigen::VectorXd v = ops.to_interior(u);
    const double denom = v.dot(ops.normal_stiffness * v);
    if (!(denom > 0.0)) throw UndefinedRatio("Hardy ratio undefined for a vector with zero x_N-energy");
    HardyResult r;
    r.ratio = n.hardy_lhs / denom;
    r.bound = hardy_constant(ops.alpha);
    r.holds = r.ratio <= r.bound * (1.0 + tol);
    return r;
}

/// ||u||^2 / ||u||_{H^1_0(w)}^2; its supremum is 1/lambda_1 of the discrete pair.
inline double poincare_check(const OperatorPair& ops, const Eigen::VectorXd& u) {
    const Norms n = norms(ops, u);
    if (!(n.h1w > 0.0)) throw UndefinedRatio("Poincare ratio undefined for the zero vector");
    return (n.l2 * n.l2) / (n.h1w * n.h1w);
}

/// Outward normal derivative sampled at the nodes of one boundary part.
struct FluxTrace {
    BoundaryPart part = BoundaryPart::gamma_plus;
    std::vector<std::size_t> nodes;
    Eigen::VectorXd values;
};

namespace detail {

inline void require_flux_region(const Mesh& m, BoundaryPart part) {
    if (part == BoundaryPart::degenerate)
        throw UnsupportedRegion("boundary flux is not available on the degenerate boundary");
    if (part == BoundaryPart::lateral && !m.truncated() && m.dim() == 2)
        throw UnsupportedRegion("the lateral boundary of the full domain reaches x_N = 0");
    if (part == BoundaryPart::lateral && m.dim() == 1)
        throw UnsupportedRegion("an interval has no lateral boundary");
}

/// Lumped (row-sum) boundary mass of each node of a part.
inline Eigen::VectorXd lumped_boundary_mass(const Mesh& m, BoundaryPart part, const std::vector<std::size_t>& nodes) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes.size()));
    if (m.dim() == 1) {
        w.setOnes();
        return w;
    }
    if (part == BoundaryPart::lateral) {
        // two disjoint edges; each node gets half of its adjacent edge lengths
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const std::size_t j = m.row(nodes[q]);
            double s = 0.0;
            if (j > 0) s += 0.5 * (m.xn[j] - m.xn[j - 1]);
            if (j + 1 < m.nodes_xn()) s += 0.5 * (m.xn[j + 1] - m.xn[j]);
            w[Eigen::Index(q)] = s;
        }
        return w;
    }
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const std::size_t i = m.column(nodes[q]);
        double s = 0.0;
        if (i > 0) s += 0.5 * (m.x1[i] - m.x1[i - 1]);
        if (i + 1 < m.nodes_x1()) s += 0.5 * (m.x1[i + 1] - m.x1[i]);
        w[Eigen::Index(q)] = s;
    }
    return w;
}

/// (A nu . nu) at a node of the part; converts conormal to normal derivative.
inline double conormal_factor(const Mesh& m, BoundaryPart part, std::size_t node) {
    if (part == BoundaryPart::lateral) return 1.0;
    return m.domain.weight(m.node(node).xn);
}

} // namespace detail

/// Flux recovery by the variational residual: for each node b of `part`,
/// (K_full u - M_full f)(b) is the boundary integral of the conormal flux
/// against the hat function of b. Dividing by the lumped boundary mass and
/// by (A nu . nu) gives du/dnu at b. `source` is the right-hand side for
/// which u solves -div(A grad u) = f; omit it for f = 0.
inline FluxTrace boundary_flux(const OperatorPair& ops, const Eigen::VectorXd& u, BoundaryPart part,
                               const std::optional<Eigen::VectorXd>& source = std::nullopt) {
    const Mesh& m = *ops.mesh;
    detail::require_flux_region(m, part);
    if (u.size() != static_cast<Eigen::Index>(m.num_nodes())) throw ContractViolation("nodal vector has wrong size");
    FluxTrace tr;
    tr.part = part;
    tr.nodes = m.boundary_nodes(part);
    Eigen::VectorXd residual = ops.stiffness_full * u;
    if (source) {
        if (source->size() != u.size()) throw ContractViolation("source vector has wrong size");
        residual -= ops.mass_full * (*source);
    }
    const Eigen::VectorXd lumped = detail::lumped_boundary_mass(m, part, tr.nodes);
    tr.values.resize(static_cast<Eigen::Index>(tr.nodes.size()));
    for (std::size_t q = 0; q < tr.nodes.size(); ++q) {
        const auto b = tr.nodes[q];
        tr.values[Eigen::Index(q)] =
            residual[Eigen::Index(b)] / (lumped[Eigen::Index(q)] * detail::conormal_factor(m, part, b));
    }
    return tr;
}

/// One-sided second-order finite-difference normal derivative, used to
/// cross-check the variational recovery.
inline FluxTrace boundary_flux_fd(const Mesh& m, const Eigen::VectorXd& u, BoundaryPart part) {
    detail::require_flux_region(m, part);
    FluxTrace tr;
    tr.part = part;
    tr.nodes = m.boundary_nodes(part);
    tr.values.resize(static_cast<Eigen::Index>(tr.nodes.size()));
    // derivative at x0 from samples at x0, x1, x2 (any spacing)
    auto d3 = [](double x0, double x1, double x2, double f0, double f1, double f2) {
        const double h1 = x1 - x0, h2 = x2 - x0;
        return (f1 * h2 * h2 - f2 * h1 * h1 - f0 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h2 - h1));
    };
    for (std::size_t q = 0; q < tr.nodes.size(); ++q) {
        const std::size_t k = tr.nodes[q];
        const std::size_t i = m.column(k), j = m.row(k);
        double d = 0.0;
        if (part == BoundaryPart::gamma_plus || part == BoundaryPart::cut) {
            const bool top = (j + 1 == m.nodes_xn());
            const std::size_t j1 = top ? j - 1 : j + 1, j2 = top ? j - 2 : j + 2;
            const auto f = [&](std::size_t jj) { return u[Eigen::Index(m.index(i, jj))]; };
            d = d3(m.xn[j], m.xn[j1], m.xn[j2], f(j), f(j1), f(j2));
            if (!top) d = -d;
        } else {
            const bool right = (i + 1 == m.nodes_x1());
            const std::size_t i1 = right ? i - 1 : i + 1, i2 = right ? i - 2 : i + 2;
            const auto f = [&](std::size_t ii) { return u[Eigen::Index(m.index(ii, j))]; };
            d = d3(m.x1[i], m.x1[i1], m.x1[i2], f(i), f(i1), f(i2));
            if (!right) d = -d;
        }
        tr.values[Eigen::Index(q)] = d;
    }
    return tr;
}

/// int_part g h dS with the consistent (piecewise-linear) boundary mass.
inline double boundary_inner(const Mesh& m, const FluxTrace& g, const Eigen::VectorXd& h) {
    if (m.dim() == 1) return g.values.dot(h);
    const auto& nodes = g.nodes; // ascending node indices
    auto position = [&](std::size_t node) -> std::optional<std::size_t> {
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
        if (it == nodes.end() || *it != node) return std::nullopt;
        return static_cast<std::size_t>(it - nodes.begin());
    };
    double s = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        const std::size_t i = m.column(nodes[q]), j = m.row(nodes[q]);
        const bool vertical = g.part == BoundaryPart::lateral;
        if (vertical ? j + 1 >= m.nodes_xn() : i + 1 >= m.nodes_x1()) continue;
        const auto next = position(vertical ? m.index(i, j + 1) : m.index(i + 1, j));
        if (!next) continue;
        const double len = vertical ? m.xn[j + 1] - m.xn[j] : m.x1[i + 1] - m.x1[i];
        const double g0 = g.values[Eigen::Index(q)], g1 = g.values[Eigen::Index(*next)];
        const double h0 = h[Eigen::Index(q)], h1 = h[Eigen::Index(*next)];
        s += len / 6.0 * (2 * g0 * h0 + g0 * h1 + g1 * h0 + 2 * g1 * h1);
    }
    return s;
}

inline double boundary_l2_squared(const Mesh& m, const FluxTrace& g) { return boundary_inner(m, g, g.values); }

} // namespace degen
