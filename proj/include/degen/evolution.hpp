#pragma once

#include "degen/assembly.hpp"
#include "degen/error.hpp"
#include "degen/norms.hpp"
#include "degen/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

namespace degen {

/// Uniform grid t_j = j T / steps on [0, T].
struct TimeGrid {
    double T = 1.0;
    int steps = 8;

    double dt() const { return T / steps; }
    double t(int j) const { return j == steps ? T : j * dt(); }
    int nodes() const { return steps + 1; }
};

inline TimeGrid make_time_grid(double T, int steps) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("final time must be positive");
    if (steps < 8) throw ParameterError("time grid needs at least 8 steps, got " + std::to_string(steps));
    return TimeGrid{T, steps};
}

/// `forward`: y_t - div(A grad y) = f with data at t = 0.
/// `backward`: y_t + div(A grad y) = f with data at t = T.
enum class Direction { forward, backward };

/// Nodal source per time node; an empty vector means f = 0.
using Source = std::vector<Eigen::VectorXd>;

/// A solution on a mesh times a time grid. `values[j]` is the full nodal
/// vector at t_j (physical time, whatever the direction). `datum` is the
/// prescribed state: y(0) for forward fields, y(T) for backward ones.
struct SpaceTimeField {
    std::shared_ptr<const Mesh> mesh;
    TimeGrid grid;
    std::vector<Eigen::VectorXd> values;
    Eigen::VectorXd datum;
    Source source;
    Direction direction = Direction::forward;

    bool has_source() const { return !source.empty(); }

    Eigen::VectorXd source_at(int j) const {
        if (source.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->num_nodes()));
        return source[std::size_t(j)];
    }
};

/// Source constant in time.
inline Source constant_source(const Eigen::VectorXd& f, const TimeGrid& grid) {
    return Source(std::size_t(grid.nodes()), f);
}

/// Samples f(t, x) at every node and time node.
inline Source sample_source(const Mesh& m, const TimeGrid& grid, const std::function<double(double, Point)>& f) {
    Source s;
    s.reserve(std::size_t(grid.nodes()));
    for (int j = 0; j < grid.nodes(); ++j) {
        const double t = grid.t(j);
        s.push_back(m.sample([&](Point p) { return f(t, p); }));
    }
    return s;
}

/// Maps a field to the opposite time convention by t -> T - t. A backward
/// field y with y_t + div(A grad y) = f becomes the forward field
/// w(t) = y(T - t) with source -f(T - t), and vice versa.
inline SpaceTimeField time_reverse(const SpaceTimeField& in) {
    SpaceTimeField out = in;
    std::reverse(out.values.begin(), out.values.end());
    std::reverse(out.source.begin(), out.source.end());
    for (auto& f : out.source) f = -f;
    out.direction = in.direction == Direction::forward ? Direction::backward : Direction::forward;
    return out;
}

namespace detail {

inline void check_source(const Source& f, const Mesh& m, const TimeGrid& grid) {
    if (f.empty()) return;
    if (f.size() != std::size_t(grid.nodes())) throw ContractViolation("source has wrong number of time nodes");
    for (const auto& v : f)
        if (v.size() != static_cast<Eigen::Index>(m.num_nodes())) throw ContractViolation("source vector has wrong size");
}

/// Weights (w0, w1) with int_0^h e^{-lambda (h - s)} (f0 (1 - s/h) + f1 s/h) ds = w0 f0 + w1 f1.
inline std::pair<double, double> duhamel_weights(double lambda, double h) {
    const double a = lambda * h;
    if (a < 0.5) {
        // c0 = sum (-a)^k (k+1)/(k+2)!, c1 = sum (-a)^k/(k+2)!
        double c0 = 0.0, c1 = 0.0, term = 0.5;
        for (int k = 0; k < 24; ++k) {
            c0 += (k + 1) * term;
            c1 += term;
            term *= -a / (k + 3);
        }
        return {h * c0, h * c1};
    }
    const double e = -std::expm1(-a); // 1 - e^{-a}
    return {h * (e - a * (1.0 - e)) / (a * a), h * (a - e) / (a * a)};
}

} // namespace detail

/// Galerkin evolution in the first spec.count() modes: each coefficient
/// follows c(t) = c(0) e^{-lambda t} + int_0^t e^{lambda (s - t)} f_n(s) ds,
/// with the Duhamel integral exact for loads linear between time nodes.
/// values[0] is y0 itself; later values are the modal reconstruction.
inline SpaceTimeField solve_spectral(const OperatorPair& ops, const Spectrum& spec, const Eigen::VectorXd& y0,
                                     const Source& f, const TimeGrid& grid) {
    ops.require_admissible(y0);
    detail::check_source(f, *ops.mesh, grid);
    const Eigen::Index k = spec.count();
    const double h = grid.dt();

    std::vector<Eigen::VectorXd> loads;
    if (!f.empty()) {
        loads.reserve(f.size());
        for (const auto& fj : f) loads.push_back(spec.vectors.transpose() * (ops.mass * ops.to_interior(fj)));
    }
    Eigen::VectorXd decay(k), w0(k), w1(k);
    for (Eigen::Index n = 0; n < k; ++n) {
        decay[n] = std::exp(-spec.values[n] * h);
        std::tie(w0[n], w1[n]) = detail::duhamel_weights(spec.values[n], h);
    }

    SpaceTimeField out;
    out.mesh = ops.mesh;
    out.grid = grid;
    out.datum = y0;
    out.source = f;
    out.values.reserve(std::size_t(grid.nodes()));
    out.values.push_back(y0);
    Eigen::VectorXd c = expand(ops, spec, y0);
    for (int j = 0; j < grid.steps; ++j) {
        c = decay.cwiseProduct(c);
        if (!loads.empty()) c += w0.cwiseProduct(loads[std::size_t(j)]) + w1.cwiseProduct(loads[std::size_t(j + 1)]);
        out.values.push_back(synthesize(ops, spec, c));
    }
    return out;
}

/// Theta scheme (M + theta dt K) y_{j+1} = (M - (1 - theta) dt K) y_j + dt M f_{j+theta}.
inline SpaceTimeField solve_implicit(const OperatorPair& ops, const Eigen::VectorXd& y0, const Source& f,
                                     const TimeGrid& grid, double theta = 1.0) {
    if (!(theta >= 0.5 && theta <= 1.0)) throw ParameterError("theta must lie in [0.5, 1]");
    ops.require_admissible(y0);
    detail::check_source(f, *ops.mesh, grid);
    const double dt = grid.dt();
    const SparseMatrix lhs = ops.mass + (theta * dt) * ops.stiffness;
    const SparseMatrix rhs = ops.mass - ((1.0 - theta) * dt) * ops.stiffness;
    Eigen::SimplicialLLT<SparseMatrix> solver(lhs);
    if (solver.info() != Eigen::Success) throw NumericalError("theta-scheme matrix is not positive definite");

    SpaceTimeField out;
    out.mesh = ops.mesh;
    out.grid = grid;
    out.datum = y0;
    out.source = f;
    out.values.reserve(std::size_t(grid.nodes()));
    out.values.push_back(y0);
    Eigen::VectorXd y = ops.to_interior(y0);
    for (int j = 0; j < grid.steps; ++j) {
        Eigen::VectorXd b = rhs * y;
        if (!f.empty()) {
            const Eigen::VectorXd fm = (1.0 - theta) * ops.to_interior(f[std::size_t(j)]) +
                                       theta * ops.to_interior(f[std::size_t(j + 1)]);
            b += dt * (ops.mass * fm);
        }
        y = solver.solve(b);
        if (solver.info() != Eigen::Success) throw NumericalError("theta-scheme solve failed");
        out.values.push_back(ops.to_nodes(y));
    }
    return out;
}

/// Trapezoid rule over the time grid.
inline double trapezoid(const std::vector<double>& v, double dt) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t j = 1; j + 1 < v.size(); ++j) s += v[j];
    return s * dt;
}

/// ||y(t_j)||_{L2} per time node.
inline std::vector<double> energy_history(const SpaceTimeField& field, const OperatorPair& ops) {
    std::vector<double> out;
    out.reserve(field.values.size());
    for (const auto& y : field.values) {
        const Eigen::VectorXd v = ops.to_interior(y);
        out.push_back(std::sqrt(std::max(0.0, v.dot(ops.mass * v))));
    }
    return out;
}

/// ||y||_{L2(Q)} (trapezoid in time, mass matrix in space).
inline double l2_space_time(const SpaceTimeField& field, const OperatorPair& ops) {
    auto e = energy_history(field, ops);
    for (auto& x : e) x *= x;
    return std::sqrt(trapezoid(e, field.grid.dt()));
}

/// ||y||_{L2(0,T; H^1_0(w))}.
inline double energy_space_time(const SpaceTimeField& field, const OperatorPair& ops) {
    std::vector<double> e;
    e.reserve(field.values.size());
    for (const auto& y : field.values) {
        const Eigen::VectorXd v = ops.to_interior(y);
        e.push_back(std::max(0.0, v.dot(ops.stiffness * v)));
    }
    return std::sqrt(trapezoid(e, field.grid.dt()));
}

/// ||f||_{L2(Q)} of a source on the field's mesh.
inline double source_norm(const Source& f, const OperatorPair& ops, const TimeGrid& grid) {
    if (f.empty()) return 0.0;
    std::vector<double> e;
    e.reserve(f.size());
    for (const auto& fj : f) e.push_back(std::max(0.0, fj.dot(ops.mass_full * fj)));
    return std::sqrt(trapezoid(e, grid.dt()));
}

struct FluxHistory {
    BoundaryPart part = BoundaryPart::gamma_plus;
    std::vector<FluxTrace> traces;   ///< per time node
    std::vector<double> squared;     ///< int_part |dy/dnu|^2 dS per time node
    double integral = 0.0;           ///< int_0^T int_part |dy/dnu|^2 dS dt
};

/// Normal derivative on `part` at every time node. The flux is recovered
/// variationally with the semi-discrete time derivative
/// y_t = M^{-1}(M f - K y), so -div(A grad y) = f - y_t supplies the source
/// proxy of the recovery.
inline FluxHistory flux_history(const SpaceTimeField& field_in, const OperatorPair& ops, BoundaryPart part) {
    detail::require_flux_region(*ops.mesh, part);
    const SpaceTimeField field = field_in.direction == Direction::forward ? field_in : time_reverse(field_in);
    Eigen::SimplicialLLT<SparseMatrix> mass(ops.mass);
    if (mass.info() != Eigen::Success) throw NumericalError("mass matrix factorization failed");

    const int nodes = field.grid.nodes();
    FluxHistory out;
    out.part = part;
    out.traces.resize(std::size_t(nodes));
    out.squared.resize(std::size_t(nodes));
    for (int j = 0; j < nodes; ++j) {
        const Eigen::VectorXd y = ops.to_interior(field.values[std::size_t(j)]);
        Eigen::VectorXd rhs = -(ops.stiffness * y);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ops.mesh->num_nodes()));
        if (field.has_source()) {
            const Eigen::VectorXd& fj = field.source[std::size_t(j)];
            rhs += ops.mass * ops.to_interior(fj);
            g = fj;
        }
        g -= ops.to_nodes(mass.solve(rhs)); // f - y_t
        // physical time of this forward-ordered node
        const int jt = field_in.direction == Direction::forward ? j : nodes - 1 - j;
        out.traces[std::size_t(jt)] = boundary_flux(ops, field.values[std::size_t(j)], part, g);
        out.squared[std::size_t(jt)] = boundary_l2_squared(*ops.mesh, out.traces[std::size_t(jt)]);
    }
    out.integral = trapezoid(out.squared, field.grid.dt());
    return out;
}

/// Stability ratio [sup_t ||y(t)|| + ||y||_{L2(H1w)}] / [||f||_{L2(Q)} + ||y0||].
inline double apriori_ratio(const SpaceTimeField& field, const OperatorPair& ops) {
    const auto e = energy_history(field, ops);
    const double sup = *std::max_element(e.begin(), e.end());
    const double num = sup + energy_space_time(field, ops);
    const Eigen::VectorXd d = ops.to_interior(field.datum);
    const double den = source_norm(field.source, ops, field.grid) + std::sqrt(std::max(0.0, d.dot(ops.mass * d)));
    if (!(den > 0.0)) throw UndefinedRatio("stability ratio undefined for zero data");
    return num / den;
}

namespace detail {

/// Mass matrix of the cells lying inside `region` (full nodal numbering).
inline SparseMatrix region_mass(const Mesh& m, const Box& region) {
    Triplets t;
    const std::size_t na = m.dim() == 1 ? 1 : 2;
    for (std::size_t j = 0; j < m.cells_xn(); ++j) {
        const double hy = m.xn[j + 1] - m.xn[j];
        for (std::size_t i = 0; i < m.cells_x1(); ++i) {
            Point mid{0.0, 0.5 * (m.xn[j] + m.xn[j + 1])};
            double hx = 1.0;
            if (m.dim() == 2) {
                mid.x1 = 0.5 * (m.x1[i] + m.x1[i + 1]);
                hx = m.x1[i + 1] - m.x1[i];
            }
            if (!region.contains(mid)) continue;
            const auto my = linear_mass(hy);
            const Local2 mx = m.dim() == 2 ? linear_mass(hx) : Local2{{{1.0, 0.0}, {0.0, 0.0}}};
            for (std::size_t a = 0; a < na; ++a)
                for (std::size_t b = 0; b < 2; ++b)
                    for (std::size_t a2 = 0; a2 < na; ++a2)
                        for (std::size_t b2 = 0; b2 < 2; ++b2)
                            t.emplace_back(Eigen::Index(m.index(i + a, j + b)), Eigen::Index(m.index(i + a2, j + b2)),
                                           mx[a][a2] * my[b][b2]);
        }
    }
    const auto n = static_cast<Eigen::Index>(m.num_nodes());
    SparseMatrix out(n, n);
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

} // namespace detail

struct CollarDerivative {
    double sup = 0.0;      ///< max_j ||y_t(t_j)||_{L2(collar)}
    double l2 = 0.0;       ///< ||y_t||_{L2(collar x (0,T))}
};

/// Finite-differenced time derivative measured on the collar {x_N > 1 - delta}.
inline CollarDerivative collar_time_derivative(const SpaceTimeField& field, double delta) {
    const Mesh& m = *field.mesh;
    Box region = m.region();
    region.lo.xn = 1.0 - delta;
    const SparseMatrix mc = detail::region_mass(m, region);
    const int nodes = field.grid.nodes();
    const double dt = field.grid.dt();
    std::vector<double> sq(static_cast<std::size_t>(nodes));
    CollarDerivative out;
    for (int j = 0; j < nodes; ++j) {
        Eigen::VectorXd d;
        const auto& v = field.values;
        if (j == 0) d = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
        else if (j == nodes - 1) d = (3.0 * v[std::size_t(j)] - 4.0 * v[std::size_t(j - 1)] + v[std::size_t(j - 2)]) / (2.0 * dt);
        else d = (v[std::size_t(j + 1)] - v[std::size_t(j - 1)]) / (2.0 * dt);
        sq[std::size_t(j)] = std::max(0.0, d.dot(mc * d));
        out.sup = std::max(out.sup, std::sqrt(sq[std::size_t(j)]));
    }
    out.l2 = std::sqrt(trapezoid(sq, dt));
    return out;
}

} // namespace degen
