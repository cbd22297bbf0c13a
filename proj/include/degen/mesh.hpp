#pragma once

#include "degen/error.hpp"
#include "degen/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace degen {

/// Tensor-product mesh of the unit interval or unit square (possibly truncated
/// at x_N = cut). Nodes are numbered x1-fastest: index = j * nodes_x1() + i.
struct Mesh {
    DomainSpec domain;
    double cut = 0.0; ///< lower x_N bound; 0 for the full degenerate domain
    double grading = 1.0;
    std::vector<double> x1; ///< empty when dim() == 1
    std::vector<double> xn;

    int dim() const { return domain.dim(); }
    bool truncated() const { return cut > 0.0; }
    std::size_t nodes_x1() const { return dim() == 1 ? 1 : x1.size(); }
    std::size_t nodes_xn() const { return xn.size(); }
    std::size_t cells_x1() const { return dim() == 1 ? 1 : x1.size() - 1; }
    std::size_t cells_xn() const { return xn.size() - 1; }
    std::size_t num_nodes() const { return nodes_x1() * nodes_xn(); }
    std::size_t index(std::size_t i, std::size_t j) const { return j * nodes_x1() + i; }
    std::size_t column(std::size_t node) const { return node % nodes_x1(); }
    std::size_t row(std::size_t node) const { return node / nodes_x1(); }

    Point node(std::size_t k) const {
        Point p;
        p.xn = xn[row(k)];
        if (dim() == 2) p.x1 = x1[column(k)];
        return p;
    }

    Box region() const {
        Box b = domain.extent();
        b.lo.xn = cut;
        return b;
    }

    bool on_boundary(std::size_t k) const {
        const std::size_t j = row(k);
        if (j == 0 || j + 1 == nodes_xn()) return true;
        if (dim() == 2) {
            const std::size_t i = column(k);
            return i == 0 || i + 1 == nodes_x1();
        }
        return false;
    }

    /// Boundary class of a boundary node; nullopt for interior nodes.
    std::optional<BoundaryPart> part_of(std::size_t k) const {
        if (!on_boundary(k)) return std::nullopt;
        const Point p = node(k);
        if (truncated()) return TruncatedDomain{domain, cut}.classify(p);
        return domain.classify(p);
    }

    std::vector<std::size_t> boundary_nodes(BoundaryPart part) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < num_nodes(); ++k) {
            const auto p = part_of(k);
            if (p && *p == part) out.push_back(k);
        }
        return out;
    }

    /// Evaluates a function at every node.
    template <typename F>
    Eigen::VectorXd sample(F&& f) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(num_nodes()));
        for (std::size_t k = 0; k < num_nodes(); ++k) v[static_cast<Eigen::Index>(k)] = f(node(k));
        return v;
    }
};

namespace detail {

inline std::vector<double> graded_axis(int n, double g, double lo, double hi) {
    std::vector<double> nodes(static_cast<std::size_t>(n) + 1);
    const double span = hi - lo;
    for (int j = 0; j <= n; ++j) nodes[static_cast<std::size_t>(j)] = lo + std::pow(double(j) / n, g) * span;
    nodes.back() = hi;
    return nodes;
}

inline std::vector<double> uniform_axis(int n) { return graded_axis(n, 1.0, 0.0, 1.0); }

inline std::optional<std::size_t> find_node(const std::vector<double>& axis, double value, double tol = 1e-12) {
    for (std::size_t j = 0; j < axis.size(); ++j)
        if (std::abs(axis[j] - value) <= tol) return j;
    return std::nullopt;
}

} // namespace detail

/// Mesh of the full degenerate domain, graded toward x_N = 0 with exponent g.
inline Mesh build_mesh(const DomainSpec& d, int n, double g = 2.0) {
    if (n < 4) throw ParameterError("mesh needs at least 4 cells per axis, got " + std::to_string(n));
    if (!(g >= 1.0)) throw ParameterError("grading exponent must be >= 1");
    Mesh m;
    m.domain = d;
    m.grading = g;
    m.xn = detail::graded_axis(n, g, 0.0, 1.0);
    if (d.dim() == 2) m.x1 = detail::uniform_axis(n);
    return m;
}

/// Uniform mesh of a truncated slab (uniformly parabolic, so no grading).
inline Mesh build_mesh(const TruncatedDomain& t, int n) {
    if (n < 4) throw ParameterError("mesh needs at least 4 cells per axis, got " + std::to_string(n));
    Mesh m;
    m.domain = t.parent;
    m.cut = t.delta;
    m.xn = detail::graded_axis(n, 1.0, t.delta, 1.0);
    if (t.parent.dim() == 2) m.x1 = detail::uniform_axis(n);
    return m;
}

inline bool is_node_aligned(const Mesh& parent, double delta) {
    return detail::find_node(parent.xn, delta).has_value();
}

/// The part of `parent` above x_N = delta. Nodes are a subset of the parent's,
/// which makes extension by zero an exact injection.
inline Mesh submesh_above(const Mesh& parent, double delta) {
    check_delta(parent.domain, delta);
    const auto j0 = detail::find_node(parent.xn, delta);
    if (!j0) throw ParameterError("delta = " + std::to_string(delta) + " is not a node of the parent mesh");
    if (parent.xn.size() - *j0 < 5) throw ParameterError("truncated submesh would have fewer than 4 cells");
    Mesh m = parent;
    m.cut = delta;
    m.xn.assign(parent.xn.begin() + static_cast<std::ptrdiff_t>(*j0), parent.xn.end());
    m.xn.front() = delta;
    return m;
}

/// Maps node indices of `sub` to node indices of `full`; throws when the
/// node sets are not nested.
inline std::vector<std::size_t> embed_nodes(const Mesh& sub, const Mesh& full) {
    if (sub.dim() != full.dim()) throw ContractViolation("meshes have different dimensions");
    std::vector<std::size_t> cols(sub.nodes_x1(), 0), rows(sub.nodes_xn());
    for (std::size_t j = 0; j < sub.nodes_xn(); ++j) {
        const auto r = detail::find_node(full.xn, sub.xn[j]);
        if (!r) throw ContractViolation("meshes are not nested: x_N node " + std::to_string(sub.xn[j]) + " missing");
        rows[j] = *r;
    }
    if (sub.dim() == 2) {
        for (std::size_t i = 0; i < sub.nodes_x1(); ++i) {
            const auto c = detail::find_node(full.x1, sub.x1[i]);
            if (!c) throw ContractViolation("meshes are not nested: x1 node missing");
            cols[i] = *c;
        }
    }
    std::vector<std::size_t> map(sub.num_nodes());
    for (std::size_t j = 0; j < sub.nodes_xn(); ++j)
        for (std::size_t i = 0; i < sub.nodes_x1(); ++i) map[sub.index(i, j)] = full.index(cols[i], rows[j]);
    return map;
}

namespace detail {

/// Linear interpolation weights of `fine` axis nodes on the `coarse` axis.
struct AxisInterp {
    std::size_t left;
    double t;
};

inline std::vector<AxisInterp> axis_interp(const std::vector<double>& coarse, const std::vector<double>& fine) {
    std::vector<AxisInterp> out(fine.size());
    std::size_t c = 0;
    for (std::size_t f = 0; f < fine.size(); ++f) {
        const double x = fine[f];
        if (x < coarse.front() - 1e-12 || x > coarse.back() + 1e-12)
            throw ContractViolation("fine mesh extends outside the coarse mesh");
        while (c + 2 < coarse.size() && coarse[c + 1] < x) ++c;
        const double h = coarse[c + 1] - coarse[c];
        out[f] = {c, std::clamp((x - coarse[c]) / h, 0.0, 1.0)};
    }
    return out;
}

} // namespace detail

/// Interpolates a nodal field on `coarse` onto the nodes of `fine` (P1/Q1
/// interpolation); exact when the finite element spaces are nested.
inline Eigen::VectorXd prolongate(const Eigen::VectorXd& values, const Mesh& coarse, const Mesh& fine) {
    if (values.size() != static_cast<Eigen::Index>(coarse.num_nodes()))
        throw ContractViolation("field size does not match the coarse mesh");
    const auto rn = detail::axis_interp(coarse.xn, fine.xn);
    std::vector<detail::AxisInterp> r1(1, {0, 0.0});
    if (fine.dim() == 2) r1 = detail::axis_interp(coarse.x1, fine.x1);
    Eigen::VectorXd out(static_cast<Eigen::Index>(fine.num_nodes()));
    for (std::size_t j = 0; j < fine.nodes_xn(); ++j) {
        for (std::size_t i = 0; i < fine.nodes_x1(); ++i) {
            const auto [jl, tj] = rn[j];
            double v = 0.0;
            if (fine.dim() == 1) {
                v = (1 - tj) * values[Eigen::Index(jl)] + tj * values[Eigen::Index(jl + 1)];
            } else {
                const auto [il, ti] = r1[i];
                auto at = [&](std::size_t ii, std::size_t jj) { return values[Eigen::Index(coarse.index(ii, jj))]; };
                v = (1 - tj) * ((1 - ti) * at(il, jl) + ti * at(il + 1, jl)) +
                    tj * ((1 - ti) * at(il, jl + 1) + ti * at(il + 1, jl + 1));
            }
            out[Eigen::Index(fine.index(i, j))] = v;
        }
    }
    return out;
}

} // namespace degen
