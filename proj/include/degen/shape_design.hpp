#pragma once

#include "degen/assembly.hpp"
#include "degen/error.hpp"
#include "degen/evolution.hpp"
#include "degen/mesh.hpp"
#include "degen/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace degen {

using InitialFn = std::function<double(Point)>;
using SourceFn = std::function<double(double, Point)>; ///< empty means f = 0

/// Zero-extension of nodal values from a nested submesh to the full mesh.
inline Eigen::VectorXd extend_by_zero(const Eigen::VectorXd& values, const Mesh& sub, const Mesh& full) {
    if (values.size() != static_cast<Eigen::Index>(sub.num_nodes()))
        throw ContractViolation("field size does not match the truncated mesh");
    const auto map = embed_nodes(sub, full);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(full.num_nodes()));
    for (std::size_t k = 0; k < map.size(); ++k) out[Eigen::Index(map[k])] = values[Eigen::Index(k)];
    return out;
}

inline SpaceTimeField extend_by_zero(const SpaceTimeField& field, std::shared_ptr<const Mesh> full) {
    SpaceTimeField out;
    out.mesh = full;
    out.grid = field.grid;
    out.direction = field.direction;
    out.datum = extend_by_zero(field.datum, *field.mesh, *full);
    for (const auto& v : field.values) out.values.push_back(extend_by_zero(v, *field.mesh, *full));
    for (const auto& f : field.source) out.source.push_back(extend_by_zero(f, *field.mesh, *full));
    return out;
}

struct ExtensionNorms {
    double nodal_truncated = 0.0; ///< Euclidean norm of the nodal values
    double nodal_extended = 0.0;
    double fe_truncated = 0.0;    ///< L2 norm of the finite element function
    double fe_extended = 0.0;
};

inline ExtensionNorms extension_norms(const Eigen::VectorXd& values, const OperatorPair& sub_ops,
                                      const OperatorPair& full_ops) {
    const Eigen::VectorXd ext = extend_by_zero(values, *sub_ops.mesh, *full_ops.mesh);
    ExtensionNorms n;
    n.nodal_truncated = values.norm();
    n.nodal_extended = ext.norm();
    n.fe_truncated = std::sqrt(std::max(0.0, values.dot(sub_ops.mass_full * values)));
    n.fe_extended = std::sqrt(std::max(0.0, ext.dot(full_ops.mass_full * ext)));
    return n;
}

/// Time integrator used for truncated and reference solves.
struct SolveOptions {
    enum class Method { modal, crank_nicolson };
    Method method = Method::modal;
    Eigen::Index modes = -1;           ///< modal: number of modes, -1 for all interior dofs
    Eigen::Index modal_limit = 800;    ///< fall back to Crank-Nicolson above this many dofs
};

/// Solves the forward problem on an assembled mesh with the selected method.
inline SpaceTimeField solve_on(const OperatorPair& ops, const Eigen::VectorXd& y0, const Source& f,
                               const TimeGrid& grid, const SolveOptions& opt = {}) {
    const Eigen::Index k = opt.modes < 0 ? ops.dofs() : std::min(opt.modes, ops.dofs());
    if (opt.method == SolveOptions::Method::modal && (opt.modes >= 0 || ops.dofs() <= opt.modal_limit))
        return solve_spectral(ops, compute_spectrum(ops, k), y0, f, grid);
    return solve_implicit(ops, y0, f, grid, 0.5);
}

/// dist(supp y0, {x_N = 0}) for nodal values of a piecewise-linear datum:
/// the x_N coordinate of the node row just below the lowest nonzero value.
inline double support_distance(const Mesh& m, const Eigen::VectorXd& y0) {
    for (std::size_t j = 0; j < m.nodes_xn(); ++j)
        for (std::size_t i = 0; i < m.nodes_x1(); ++i)
            if (y0[Eigen::Index(m.index(i, j))] != 0.0) return j == 0 ? m.xn[0] : m.xn[j - 1];
    return 1.0;
}

struct TruncatedSolve {
    std::shared_ptr<const Mesh> parent;
    OperatorPair ops;
    SpaceTimeField field;
};

/// Truncated problem on the slab above x_N = delta, discretized by the part of
/// `parent` above delta so that its nodes nest into the parent's. `y0` holds
/// nodal values on the parent mesh.
inline TruncatedSolve solve_truncated(std::shared_ptr<const Mesh> parent, double delta, const Eigen::VectorXd& y0,
                                      const SourceFn& f, const TimeGrid& grid, const SolveOptions& opt = {}) {
    const double dist = support_distance(*parent, y0);
    if (dist < delta - 1e-12)
        throw PreconditionError("initial datum reaches x_N = " + std::to_string(dist) + ", below delta = " +
                                std::to_string(delta));
    const Mesh sub = submesh_above(*parent, delta);
    TruncatedSolve out;
    out.parent = parent;
    out.ops = assemble(sub);
    const auto map = embed_nodes(sub, *parent);
    Eigen::VectorXd y0_sub(static_cast<Eigen::Index>(sub.num_nodes()));
    for (std::size_t k = 0; k < map.size(); ++k)
        y0_sub[Eigen::Index(k)] = sub.on_boundary(k) ? 0.0 : y0[Eigen::Index(map[k])];
    Source fs;
    if (f) fs = sample_source(sub, grid, f);
    out.field = solve_on(out.ops, y0_sub, fs, grid, opt);
    return out;
}

inline TruncatedSolve solve_truncated(std::shared_ptr<const Mesh> parent, double delta, const InitialFn& y0,
                                      const SourceFn& f, const TimeGrid& grid, const SolveOptions& opt = {}) {
    return solve_truncated(parent, delta, Eigen::VectorXd(parent->sample(y0)), f, grid, opt);
}

/// Same, on a fresh uniform mesh with n cells per axis of the parent domain.
inline TruncatedSolve solve_truncated(const DomainSpec& domain, double delta, const InitialFn& y0, const SourceFn& f,
                                      const TimeGrid& grid, int n, const SolveOptions& opt = {}) {
    check_delta(domain, delta);
    auto parent = std::make_shared<const Mesh>(build_mesh(domain, n, 1.0));
    if (!is_node_aligned(*parent, delta))
        throw ParameterError("delta = " + std::to_string(delta) + " is not a node of the uniform mesh with n = " +
                             std::to_string(n));
    return solve_truncated(parent, delta, y0, f, grid, opt);
}

struct ConvergenceReport {
    std::vector<double> deltas;
    std::vector<double> solution_error;   ///< ||E y_delta - y_ref||_{L2(Q)}
    std::vector<double> final_error;      ///< ||E y_delta(T) - y_ref(T)||_{L2}
    std::vector<double> flux_error;       ///< ||d_nu y_delta - d_nu y_ref||_{L2(Gamma+ x (0,T))}
    std::vector<double> stability_ratio;  ///< apriori ratio of each truncated solve
    std::vector<double> solution_rate;    ///< log(e_i / e_{i+1}) / log(delta_i / delta_{i+1})
    std::vector<double> flux_rate;
    double reference_norm = 0.0;          ///< ||y_ref||_{L2(Q)}
    double self_convergence = 0.0;        ///< ||y_ref(n) - y_ref(2n)||_{L2(Q)}
    bool homogeneous = true;              ///< f = 0; final-time and flux errors are meaningful
    int n = 0;
    int n_ref = 0;
};

namespace detail {

/// Interpolates a trace given on the Gamma+ nodes of `coarse` onto those of `fine`.
inline FluxTrace prolongate_trace(const FluxTrace& tr, const Mesh& coarse, const Mesh& fine) {
    FluxTrace out;
    out.part = tr.part;
    out.nodes = fine.boundary_nodes(tr.part);
    out.values.resize(static_cast<Eigen::Index>(out.nodes.size()));
    if (fine.dim() == 1) {
        out.values = tr.values;
        return out;
    }
    std::vector<double> xs;
    for (auto k : tr.nodes) xs.push_back(coarse.node(k).x1);
    for (std::size_t q = 0; q < out.nodes.size(); ++q) {
        const double x = fine.node(out.nodes[q]).x1;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t r = std::size_t(std::clamp<std::ptrdiff_t>(it - xs.begin(), 1, std::ptrdiff_t(xs.size()) - 1));
        const double t = (x - xs[r - 1]) / (xs[r] - xs[r - 1]);
        out.values[Eigen::Index(q)] = (1 - t) * tr.values[Eigen::Index(r - 1)] + t * tr.values[Eigen::Index(r)];
    }
    return out;
}

inline double space_time_gap(const SpaceTimeField& a, const SpaceTimeField& b, const OperatorPair& ops) {
    std::vector<double> sq;
    for (std::size_t j = 0; j < a.values.size(); ++j) {
        const Eigen::VectorXd d = a.values[j] - b.values[j];
        sq.push_back(std::max(0.0, d.dot(ops.mass_full * d)));
    }
    return std::sqrt(trapezoid(sq, a.grid.dt()));
}

inline double final_gap(const SpaceTimeField& a, const SpaceTimeField& b, const OperatorPair& ops) {
    const Eigen::VectorXd d = a.values.back() - b.values.back();
    return std::sqrt(std::max(0.0, d.dot(ops.mass_full * d)));
}

inline std::vector<double> rates(const std::vector<double>& d, const std::vector<double>& e) {
    std::vector<double> r;
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        r.push_back(e[i] > 0.0 && e[i + 1] > 0.0 ? std::log(e[i] / e[i + 1]) / std::log(d[i] / d[i + 1]) : 0.0);
    return r;
}

inline SpaceTimeField prolongate_field(const SpaceTimeField& f, std::shared_ptr<const Mesh> fine) {
    SpaceTimeField out;
    out.mesh = fine;
    out.grid = f.grid;
    out.datum = prolongate(f.datum, *f.mesh, *fine);
    for (const auto& v : f.values) out.values.push_back(prolongate(v, *f.mesh, *fine));
    return out;
}

} // namespace detail

/// Truncated solutions for a descending delta ladder against a full
/// degenerate-domain reference on a uniform mesh with n_ref = 2n cells.
/// Truncated meshes are the parts of the n-cell mesh above each delta, so
/// zero extension is an injection; extended fields are interpolated onto the
/// nested reference mesh for comparison.
inline ConvergenceReport delta_sweep(const DomainSpec& domain, const InitialFn& y0, const SourceFn& f,
                                     const TimeGrid& grid, const std::vector<double>& deltas, int n,
                                     const SolveOptions& opt = {}) {
    if (deltas.empty()) throw ParameterError("delta list is empty");
    for (std::size_t i = 0; i + 1 < deltas.size(); ++i)
        if (!(deltas[i + 1] < deltas[i])) throw ParameterError("deltas must be strictly decreasing");
    auto mesh_n = std::make_shared<const Mesh>(build_mesh(domain, n, 1.0));
    for (double d : deltas) {
        check_delta(domain, d);
        if (!is_node_aligned(*mesh_n, d))
            throw ParameterError("delta = " + std::to_string(d) + " is not a node of the sweep mesh");
    }
    auto mesh_ref = std::make_shared<const Mesh>(build_mesh(domain, 2 * n, 1.0));
    const auto ops_n = assemble(*mesh_n);
    const auto ops_ref = assemble(*mesh_ref);

    auto full_solve = [&](const OperatorPair& ops) {
        Eigen::VectorXd v = ops.mesh->sample(y0);
        for (std::size_t k = 0; k < ops.mesh->num_nodes(); ++k)
            if (ops.mesh->on_boundary(k)) v[Eigen::Index(k)] = 0.0;
        Source fs;
        if (f) fs = sample_source(*ops.mesh, grid, f);
        return solve_on(ops, v, fs, grid, opt);
    };
    const SpaceTimeField ref = full_solve(ops_ref);
    const SpaceTimeField coarse_ref = detail::prolongate_field(full_solve(ops_n), mesh_ref);
    const FluxHistory ref_flux = flux_history(ref, ops_ref, BoundaryPart::gamma_plus);

    ConvergenceReport rep;
    rep.deltas = deltas;
    rep.n = n;
    rep.n_ref = 2 * n;
    rep.homogeneous = !f;
    rep.reference_norm = l2_space_time(ref, ops_ref);
    rep.self_convergence = detail::space_time_gap(coarse_ref, ref, ops_ref);
    for (double d : deltas) {
        const auto ts = solve_truncated(mesh_n, d, y0, f, grid, opt);
        const auto ext = detail::prolongate_field(extend_by_zero(ts.field, mesh_n), mesh_ref);
        rep.solution_error.push_back(detail::space_time_gap(ext, ref, ops_ref));
        rep.final_error.push_back(detail::final_gap(ext, ref, ops_ref));
        try {
            rep.stability_ratio.push_back(apriori_ratio(ts.field, ts.ops));
        } catch (const UndefinedRatio&) {
            rep.stability_ratio.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        const FluxHistory fl = flux_history(ts.field, ts.ops, BoundaryPart::gamma_plus);
        std::vector<double> sq;
        for (int j = 0; j < grid.nodes(); ++j) {
            FluxTrace diff = detail::prolongate_trace(fl.traces[std::size_t(j)], *ts.ops.mesh, *mesh_ref);
            diff.values -= ref_flux.traces[std::size_t(j)].values;
            sq.push_back(boundary_l2_squared(*mesh_ref, diff));
        }
        rep.flux_error.push_back(std::sqrt(trapezoid(sq, grid.dt())));
    }
    rep.solution_rate = detail::rates(deltas, rep.solution_error);
    rep.flux_rate = detail::rates(deltas, rep.flux_error);
    return rep;
}

/// Largest stability ratio [sup ||y|| + ||y||_{L2(H1w)}] / [||f|| + ||y0||] of
/// the truncated problem over a suite of data.
inline double stability_constant(std::shared_ptr<const Mesh> parent, double delta,
                                 const std::vector<std::pair<InitialFn, SourceFn>>& data, const TimeGrid& grid,
                                 const SolveOptions& opt = {}) {
    double worst = 0.0;
    for (const auto& [y0, f] : data) {
        const auto ts = solve_truncated(parent, delta, y0, f, grid, opt);
        worst = std::max(worst, apriori_ratio(ts.field, ts.ops));
    }
    return worst;
}

} // namespace degen
