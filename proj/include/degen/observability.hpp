#pragma once

#include "degen/evolution.hpp"
#include "degen/norms.hpp"
#include "degen/parallel.hpp"
#include "degen/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace degen {

/// Flux on Gamma+ of each mode evolution y_m(t) = e^{-lambda_m t} phi_m.
/// The semi-discrete time derivative is -lambda_m y_m, so the recovery source
/// is lambda_m phi_m.
inline std::vector<FluxTrace> mode_fluxes(const OperatorPair& ops, const Spectrum& spec, Eigen::Index count,
                                          int jobs = 1) {
    if (count > spec.count()) throw ParameterError("spectrum holds fewer modes than requested");
    std::vector<FluxTrace> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), jobs, [&](std::size_t m) {
        const Eigen::VectorXd phi = mode(ops, spec, Eigen::Index(m));
        const Eigen::VectorXd g = spec.values[Eigen::Index(m)] * phi;
        out[m] = boundary_flux(ops, phi, BoundaryPart::gamma_plus, g);
    });
    return out;
}

/// (1 - e^{-a T}) / a, continuous at a = 0.
inline double decay_integral(double a, double T) {
    return a * T < 1e-12 ? T : -std::expm1(-a * T) / a;
}

/// G_mn = int_0^T int_{Gamma+} dy_m/dnu dy_n/dnu dS dt with the time integral
/// in closed form: (F_m, F_n)_Gamma (1 - e^{-(lambda_m + lambda_n) T}) / (lambda_m + lambda_n).
/// Assembled in long double: the time factor is a Cauchy-like matrix whose
/// smallest eigenvalue drops below double resolution near K = 15.
using GramMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

inline long double decay_integral_ld(long double a, long double T) {
    return a * T < 1e-15L ? T : -std::expm1(-a * T) / a;
}

inline GramMatrix flux_gram_ld(const OperatorPair& ops, const Spectrum& spec, const std::vector<FluxTrace>& fluxes,
                               double T) {
    const auto k = static_cast<Eigen::Index>(fluxes.size());
    GramMatrix g(k, k);
    for (Eigen::Index m = 0; m < k; ++m)
        for (Eigen::Index n = m; n < k; ++n) {
            const long double inner = boundary_inner(*ops.mesh, fluxes[std::size_t(m)], fluxes[std::size_t(n)].values);
            g(m, n) = g(n, m) =
                inner * decay_integral_ld((long double)spec.values[m] + (long double)spec.values[n], (long double)T);
        }
    return g;
}

inline Eigen::MatrixXd flux_gram(const OperatorPair& ops, const Spectrum& spec, const std::vector<FluxTrace>& fluxes,
                                 double T) {
    return flux_gram_ld(ops, spec, fluxes, T).cast<double>();
}

/// ||y0||^2 / int_0^T int_{Gamma+} |dy/dnu|^2 for the free evolution from y0,
/// evaluated through the modal expansion on the modes held by `spec` (exact
/// for the semi-discrete evolution when `spec` is complete).
inline double observability_ratio(const OperatorPair& ops, const Spectrum& spec, const Eigen::VectorXd& y0, double T) {
    if (!(T > 0.0)) throw ParameterError("final time must be positive");
    ops.require_admissible(y0);
    const Eigen::VectorXd v = ops.to_interior(y0);
    const double num = v.dot(ops.mass * v);
    if (!(num > 0.0)) throw UndefinedRatio("observability ratio undefined for zero data");
    const Eigen::VectorXd c = expand(ops, spec, y0);
    const Eigen::MatrixXd g = flux_gram(ops, spec, mode_fluxes(ops, spec, spec.count()), T);
    const double den = c.dot(g * c);
    if (!(den > 1e-300)) throw DegenerateObservation("flux integral vanishes; the datum is not observed on Gamma+");
    return num / den;
}

/// The same ratio from an already evolved forward field (trapezoid in time).
inline double observability_ratio(const SpaceTimeField& field, const OperatorPair& ops) {
    if (field.has_source()) throw PreconditionError("observability ratio needs f = 0");
    const SpaceTimeField fw = field.direction == Direction::forward ? field : time_reverse(field);
    const Eigen::VectorXd v = ops.to_interior(fw.values.front());
    const double num = v.dot(ops.mass * v);
    if (!(num > 0.0)) throw UndefinedRatio("observability ratio undefined for zero data");
    const double den = flux_history(fw, ops, BoundaryPart::gamma_plus).integral;
    if (!(den > 1e-300)) throw DegenerateObservation("flux integral vanishes; the datum is not observed on Gamma+");
    return num / den;
}

struct ObservabilityReport {
    double alpha = 0.0;
    double T = 0.0;
    double delta = 0.0;                ///< x_N of the lower edge (0 on the full domain)
    std::size_t nodes = 0;
    Eigen::Index requested_modes = 0;
    Eigen::Index modes = 0;            ///< K actually used after the lambda_K T cap
    double cap = 60.0;
    double lambda_max_used = 0.0;
    std::vector<double> mode_ratios;   ///< single-mode ratios 1 / G_mm
    double constant = 0.0;             ///< C_obs = 1 / lambda_min(G)
    double gram_min = 0.0, gram_max = 0.0;
    bool singular = false;
    Eigen::VectorXd null_direction;    ///< eigenvector of lambda_min(G) when singular
};

/// Worst-case ratio over span{phi_1..phi_K}: with M-orthonormal modes
/// ||y0||^2 = |c|^2 and the flux integral is c^T G c, so C_obs is the largest
/// generalized eigenvalue of (I, G), i.e. 1 / lambda_min(G). Modes with
/// lambda T above `cap` are dropped (pass infinity to lift the cap).
inline ObservabilityReport estimate_constant(const OperatorPair& ops, const Spectrum& spec, Eigen::Index K, double T,
                                             double cap = 60.0, int jobs = 1) {
    if (K < 1) throw ParameterError("need at least one mode");
    if (K > spec.count()) throw ParameterError("spectrum holds " + std::to_string(spec.count()) + " modes, K = " + std::to_string(K));
    if (!(T > 0.0)) throw ParameterError("final time must be positive");
    ObservabilityReport r;
    r.alpha = ops.alpha;
    r.T = T;
    r.delta = ops.mesh->xn.front();
    r.nodes = ops.mesh->num_nodes();
    r.requested_modes = K;
    r.cap = cap;
    Eigen::Index k = 0;
    while (k < K && spec.values[k] * T <= cap) ++k;
    if (k == 0) throw ParameterError("lambda_1 T exceeds the cap " + std::to_string(cap));
    r.modes = k;
    r.lambda_max_used = spec.values[k - 1];

    const GramMatrix g = flux_gram_ld(ops, spec, mode_fluxes(ops, spec, k, jobs), T);
    for (Eigen::Index m = 0; m < k; ++m)
        r.mode_ratios.push_back(g(m, m) > 1e-300L ? double(1.0L / g(m, m)) : std::numeric_limits<double>::infinity());
    Eigen::SelfAdjointEigenSolver<GramMatrix> es(g);
    if (es.info() != Eigen::Success) throw NumericalError("Gram eigen-decomposition failed");
    const long double lo = es.eigenvalues()[0], hi = es.eigenvalues()[k - 1];
    r.gram_min = double(lo);
    r.gram_max = double(hi);
    // below this the eigenvalue is rounding noise of the long double solve
    const long double floor = 64.0L * std::numeric_limits<long double>::epsilon() * hi;
    if (!(lo > floor) || !(lo > 1e-300L)) {
        r.singular = true;
        r.constant = std::numeric_limits<double>::infinity();
        r.null_direction = es.eigenvectors().col(0).cast<double>();
        return r;
    }
    r.constant = double(1.0L / lo);
    return r;
}

struct WindowBound {
    double lhs = 0.0; ///< ||y(0)||^2
    double rhs = 0.0; ///< (2/T) int_{T/4}^{3T/4} ||y||^2 dt
    bool holds = true;
};

/// Time-window energy bound for a field whose energy is non-decreasing in t
/// (the backward or time-reversed convention). T/4 and 3T/4 must be grid nodes.
inline WindowBound window_bound_check(const SpaceTimeField& field, const OperatorPair& ops) {
    if (field.grid.steps % 4 != 0) throw ParameterError("time steps must be divisible by 4 for the window [T/4, 3T/4]");
    const auto e = energy_history(field, ops);
    double top = 0.0;
    for (double v : e) top = std::max(top, v * v);
    for (std::size_t j = 1; j < e.size(); ++j)
        if (e[j] * e[j] < e[j - 1] * e[j - 1] - 1e-8 * top)
            throw ConventionError("energy decreases at t = " + std::to_string(field.grid.t(int(j))) +
                                  "; pass the backward (time-reversed) field");
    const int q = field.grid.steps / 4;
    std::vector<double> window;
    for (int j = q; j <= 3 * q; ++j) window.push_back(e[std::size_t(j)] * e[std::size_t(j)]);
    WindowBound w;
    w.lhs = e.front() * e.front();
    w.rhs = 2.0 / field.grid.T * trapezoid(window, field.grid.dt());
    w.holds = w.lhs <= w.rhs * (1.0 + 1e-8);
    return w;
}

} // namespace degen
