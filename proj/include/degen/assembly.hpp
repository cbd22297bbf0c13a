#pragma once

#include "degen/error.hpp"
#include "degen/mesh.hpp"
#include "degen/moments.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <memory>
#include <vector>

namespace degen {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Assembled weighted stiffness and mass matrices of a mesh.
///
/// `stiffness` is the discrete form B[u, v] = int grad u . A grad v with
/// A = diag(1, ..., 1, x_N^alpha); `mass` is int u v. Both act on interior
/// degrees of freedom (homogeneous Dirichlet data eliminated on all of the
/// boundary). The `_full` variants keep every node and feed flux recovery.
/// `normal_stiffness` holds only the x_N part int x_N^alpha du/dx_N dv/dx_N
/// and `hardy` the singular form int x_N^(alpha-2) u v.
struct OperatorPair {
    std::shared_ptr<const Mesh> mesh;
    double alpha = 0.0;

    SparseMatrix stiffness;
    SparseMatrix mass;
    SparseMatrix normal_stiffness;
    SparseMatrix hardy;
    SparseMatrix stiffness_full;
    SparseMatrix mass_full;

    std::vector<std::size_t> dof_nodes;     ///< interior dof -> node
    std::vector<Eigen::Index> node_dof;     ///< node -> dof, -1 on the boundary

    Eigen::Index dofs() const { return static_cast<Eigen::Index>(dof_nodes.size()); }

    Eigen::VectorXd to_interior(const Eigen::VectorXd& nodal) const {
        if (nodal.size() != static_cast<Eigen::Index>(mesh->num_nodes()))
            throw ContractViolation("nodal vector has wrong size");
        Eigen::VectorXd v(dofs());
        for (Eigen::Index d = 0; d < dofs(); ++d) v[d] = nodal[static_cast<Eigen::Index>(dof_nodes[std::size_t(d)])];
        return v;
    }

    Eigen::VectorXd to_nodes(const Eigen::VectorXd& interior) const {
        if (interior.size() != dofs()) throw ContractViolation("interior vector has wrong size");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->num_nodes()));
        for (Eigen::Index d = 0; d < dofs(); ++d) v[static_cast<Eigen::Index>(dof_nodes[std::size_t(d)])] = interior[d];
        return v;
    }

    /// Largest |u| over Dirichlet nodes.
    double boundary_max(const Eigen::VectorXd& nodal) const {
        double worst = 0.0;
        for (std::size_t k = 0; k < node_dof.size(); ++k)
            if (node_dof[k] < 0) worst = std::max(worst, std::abs(nodal[static_cast<Eigen::Index>(k)]));
        return worst;
    }

    /// Throws unless the nodal vector vanishes on every Dirichlet node.
    void require_admissible(const Eigen::VectorXd& nodal) const {
        if (nodal.size() != static_cast<Eigen::Index>(mesh->num_nodes()))
            throw ContractViolation("nodal vector has wrong size");
        const double scale = nodal.cwiseAbs().maxCoeff();
        if (boundary_max(nodal) > 1e-14 * scale)
            throw ContractViolation("vector does not vanish on the Dirichlet boundary");
    }
};

namespace detail {

using Local2 = std::array<std::array<double, 2>, 2>;

inline Local2 linear_stiffness(double h, double coeff) {
    const double c = coeff / (h * h);
    return {{{c, -c}, {-c, c}}};
}

inline Local2 linear_mass(double h) { return {{{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}}}; }

inline SparseMatrix restrict_matrix(const Triplets& full, const std::vector<Eigen::Index>& node_dof, Eigen::Index n) {
    Triplets t;
    t.reserve(full.size());
    for (const auto& e : full) {
        const auto r = node_dof[std::size_t(e.row())];
        const auto c = node_dof[std::size_t(e.col())];
        if (r >= 0 && c >= 0) t.emplace_back(r, c, e.value());
    }
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

} // namespace detail

/// Assembles the weighted operators with exact per-cell weight integrals
/// (monomial antiderivatives of x_N^alpha and x_N^(alpha-2)); no quadrature
/// is applied to the singular weight.
inline OperatorPair assemble(const Mesh& mesh_in) {
    auto mesh = std::make_shared<const Mesh>(mesh_in);
    const Mesh& m = *mesh;
    const double alpha = m.domain.alpha;
    const auto nn = static_cast<Eigen::Index>(m.num_nodes());

    OperatorPair ops;
    ops.mesh = mesh;
    ops.alpha = alpha;
    ops.node_dof.assign(m.num_nodes(), -1);
    for (std::size_t k = 0; k < m.num_nodes(); ++k) {
        if (!m.on_boundary(k)) {
            ops.node_dof[k] = static_cast<Eigen::Index>(ops.dof_nodes.size());
            ops.dof_nodes.push_back(k);
        }
    }

    Triplets tk, tm, tn, th;
    const std::size_t na = m.dim() == 1 ? 1 : 2;
    const std::size_t ncx = m.cells_x1();
    const detail::Local2 one{{{1.0, 0.0}, {0.0, 0.0}}};
    const detail::Local2 zero{};

    for (std::size_t j = 0; j < m.cells_xn(); ++j) {
        const double y0 = m.xn[j];
        const double hy = m.xn[j + 1] - y0;
        const double w = power_integral(y0, hy, alpha);
        const auto sy = detail::linear_stiffness(hy, w);
        const auto my = detail::linear_mass(hy);
        const auto hyw = weighted_cell_mass(y0, hy, alpha - 2.0);
        for (std::size_t i = 0; i < ncx; ++i) {
            detail::Local2 sx = zero, mx = one;
            if (m.dim() == 2) {
                const double hx = m.x1[i + 1] - m.x1[i];
                sx = detail::linear_stiffness(hx, hx);
                mx = detail::linear_mass(hx);
            }
            for (std::size_t a = 0; a < na; ++a)
                for (std::size_t b = 0; b < 2; ++b)
                    for (std::size_t a2 = 0; a2 < na; ++a2)
                        for (std::size_t b2 = 0; b2 < 2; ++b2) {
                            const auto r = static_cast<Eigen::Index>(m.index(i + a, j + b));
                            const auto c = static_cast<Eigen::Index>(m.index(i + a2, j + b2));
                            const double kn = mx[a][a2] * sy[b][b2];
                            tk.emplace_back(r, c, sx[a][a2] * my[b][b2] + kn);
                            tn.emplace_back(r, c, kn);
                            tm.emplace_back(r, c, mx[a][a2] * my[b][b2]);
                            if (std::isfinite(hyw[b][b2])) th.emplace_back(r, c, mx[a][a2] * hyw[b][b2]);
                        }
        }
    }

    ops.stiffness_full.resize(nn, nn);
    ops.stiffness_full.setFromTriplets(tk.begin(), tk.end());
    ops.mass_full.resize(nn, nn);
    ops.mass_full.setFromTriplets(tm.begin(), tm.end());
    ops.stiffness = detail::restrict_matrix(tk, ops.node_dof, ops.dofs());
    ops.mass = detail::restrict_matrix(tm, ops.node_dof, ops.dofs());
    ops.normal_stiffness = detail::restrict_matrix(tn, ops.node_dof, ops.dofs());
    ops.hardy = detail::restrict_matrix(th, ops.node_dof, ops.dofs());
    return ops;
}

} // namespace degen
