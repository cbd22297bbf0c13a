#pragma once

#include "degen/assembly.hpp"
#include "degen/error.hpp"
#include "degen/evolution.hpp"
#include "degen/norms.hpp"
#include "degen/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace degen {

/// eta = x_N^(2-alpha), Theta = 1/[t(T-t)]^4, xi = Theta (gamma - eta).
struct CarlemanWeights {
    double alpha = 0.5;
    double T = 1.0;
    double gamma = 2.0; ///< sup eta + 1
    double s = 1.0;

    double eta(double xn) const { return std::pow(xn, 2.0 - alpha); }
    double log_theta(double t) const { return -4.0 * std::log(t * (T - t)); }
    double theta(double t) const { return std::pow(t * (T - t), -4.0); }
    /// Theta' = -4 Theta^(5/4) (T - 2t)
    double theta_prime(double t) const { return -4.0 * std::pow(theta(t), 1.25) * (T - 2.0 * t); }
    /// Theta'' = 20 Theta^(3/2) (T - 2t)^2 + 8 Theta^(5/4)
    double theta_second(double t) const {
        const double th = theta(t), d = T - 2.0 * t;
        return 20.0 * std::pow(th, 1.5) * d * d + 8.0 * std::pow(th, 1.25);
    }
};

inline CarlemanWeights make_weights(const DomainSpec& d, double T, double s) {
    if (!(s > 0.0)) throw ParameterError("Carleman parameter s must be positive");
    if (!(T > 0.0)) throw ParameterError("final time must be positive");
    CarlemanWeights w;
    w.alpha = d.alpha;
    w.T = T;
    w.gamma = 1.0 + 1.0; // sup x_N^(2-alpha) = 1 on the unit interval and square
    w.s = s;
    return w;
}

inline CarlemanWeights with_s(CarlemanWeights w, double s) {
    if (!(s > 0.0)) throw ParameterError("Carleman parameter s must be positive");
    w.s = s;
    return w;
}

struct WeightValues {
    double theta = 0.0;
    double xi = 0.0;
    double grad_xi_n = 0.0; ///< only the x_N component is nonzero
    double xi_t = 0.0;
    double factor = 0.0;    ///< e^{-s xi}
};

/// Closed-form weights; at t = 0 and t = T the limits Theta = xi = +inf and
/// e^{-s xi} = 0 are returned.
inline WeightValues eval_weights(const CarlemanWeights& w, double t, Point x) {
    if (!(t >= 0.0 && t <= w.T)) throw ParameterError("time " + std::to_string(t) + " outside [0, T]");
    WeightValues v;
    const double inf = std::numeric_limits<double>::infinity();
    if (t == 0.0 || t == w.T) {
        v.theta = inf;
        v.xi = inf;
        v.grad_xi_n = x.xn > 0.0 ? -inf : 0.0;
        v.xi_t = t == 0.0 ? -inf : inf;
        v.factor = 0.0;
        return v;
    }
    v.theta = w.theta(t);
    v.xi = v.theta * (w.gamma - w.eta(x.xn));
    v.grad_xi_n = -(2.0 - w.alpha) * v.theta * std::pow(x.xn, 1.0 - w.alpha);
    v.xi_t = w.theta_prime(t) * (w.gamma - w.eta(x.xn));
    v.factor = std::exp(-w.s * v.xi);
    return v;
}

/// z = e^{-s xi} y at every node; zero at t = 0 and t = T. Entries underflow
/// to zero for large s Theta; the budget routines work in log space instead.
inline SpaceTimeField transform(const SpaceTimeField& y, const CarlemanWeights& w) {
    if (std::abs(y.grid.T - w.T) > 1e-14 * w.T) throw ContractViolation("field and weights use different T");
    SpaceTimeField z = y;
    z.source.clear();
    for (int j = 0; j < y.grid.nodes(); ++j) {
        const double t = y.grid.t(j);
        auto& v = z.values[std::size_t(j)];
        for (std::size_t k = 0; k < y.mesh->num_nodes(); ++k)
            v[Eigen::Index(k)] *= eval_weights(w, t, y.mesh->node(k)).factor;
    }
    return z;
}

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

/// Row sums of the full mass matrix (lumped nodal quadrature weights).
inline Eigen::VectorXd lumped_weights(const OperatorPair& ops) {
    return ops.mass_full * Eigen::VectorXd::Ones(ops.mass_full.cols());
}

/// Nodal x_N-derivative by three-point differences (one-sided on the x_N boundary rows).
inline Eigen::VectorXd recovered_dn(const Mesh& m, const Eigen::VectorXd& u) {
    Eigen::VectorXd d(u.size());
    const std::size_t ny = m.nodes_xn();
    auto d3 = [](double x0, double x1, double x2, double f0, double f1, double f2) {
        const double h1 = x1 - x0, h2 = x2 - x0;
        return (f1 * h2 * h2 - f2 * h1 * h1 - f0 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h2 - h1));
    };
    for (std::size_t i = 0; i < m.nodes_x1(); ++i) {
        auto f = [&](std::size_t j) { return u[Eigen::Index(m.index(i, j))]; };
        for (std::size_t j = 0; j < ny; ++j) {
            double v;
            if (j == 0) v = d3(m.xn[0], m.xn[1], m.xn[2], f(0), f(1), f(2));
            else if (j + 1 == ny) v = d3(m.xn[j], m.xn[j - 1], m.xn[j - 2], f(j), f(j - 1), f(j - 2));
            else {
                const double hm = m.xn[j] - m.xn[j - 1], hp = m.xn[j + 1] - m.xn[j];
                v = (hm * hm * (f(j + 1) - f(j)) + hp * hp * (f(j) - f(j - 1))) / (hm * hp * (hm + hp));
            }
            d[Eigen::Index(m.index(i, j))] = v;
        }
    }
    return d;
}

inline SpaceTimeField as_backward(const SpaceTimeField& f) {
    return f.direction == Direction::backward ? f : time_reverse(f);
}

} // namespace detail

struct ResidualReport {
    double log_residual = -std::numeric_limits<double>::infinity(); ///< log ||e^{-s xi} f - P1 z - P2 z||_{L2(Q)}
    double log_source = -std::numeric_limits<double>::infinity();   ///< log ||e^{-s xi} f||_{L2(Q)}
    double log_p1 = -std::numeric_limits<double>::infinity();       ///< log ||P1 z||_{L2(Q)}
    double residual() const { return std::exp(log_residual); }
    /// residual relative to the larger of ||e^{-s xi} f|| and ||P1 z||
    double relative() const {
        const double ref = std::max(log_source, log_p1);
        return std::isfinite(ref) ? std::exp(log_residual - ref) : 0.0;
    }
};

/// Discrete residual of e^{-s xi} f = P1 z + P2 z with z = e^{-s xi} y, where
/// y solves y_t + div(A grad y) = f (forward fields are time-reversed first).
/// z_t by central differences, div(A grad z) by the lumped finite element
/// operator, grad z by recovered nodal differences; xi-derivatives in closed
/// form. Each time slice is scaled by e^{s min xi} so nothing underflows, and
/// slices are combined in log space over interior time nodes and interior
/// space nodes with lumped quadrature.
inline ResidualReport p_residual(const SpaceTimeField& field, const CarlemanWeights& w, const OperatorPair& ops) {
    if (field.mesh->num_nodes() != ops.mesh->num_nodes()) throw ContractViolation("field and operators use different meshes");
    if (std::abs(field.grid.T - w.T) > 1e-14 * w.T) throw ContractViolation("field and weights use different T");
    const SpaceTimeField y = detail::as_backward(field);
    const Mesh& m = *ops.mesh;
    const auto nn = static_cast<Eigen::Index>(m.num_nodes());
    const Eigen::VectorXd lumped = detail::lumped_weights(ops);
    const int steps = y.grid.steps;
    const double dt = y.grid.dt(), s = w.s, a = w.alpha;

    Eigen::VectorXd xn(nn), eta(nn);
    for (Eigen::Index k = 0; k < nn; ++k) {
        xn[k] = m.node(std::size_t(k)).xn;
        eta[k] = w.eta(xn[k]);
    }
    std::vector<double> lr, ls, lp;
    for (int j = 1; j < steps; ++j) {
        // scale e^{S} with S = s min_x xi over the three slices in the stencil
        double th_min = w.theta(y.grid.t(j));
        if (j - 1 > 0) th_min = std::min(th_min, w.theta(y.grid.t(j - 1)));
        if (j + 1 < steps) th_min = std::min(th_min, w.theta(y.grid.t(j + 1)));
        const double S = s * th_min * (w.gamma - 1.0);
        auto scaled = [&](int k) -> Eigen::VectorXd {
            if (k == 0 || k == steps) return Eigen::VectorXd::Zero(nn);
            const double th = w.theta(y.grid.t(k));
            return ((-s * th * (w.gamma - eta.array()) + S).exp() * y.values[std::size_t(k)].array()).matrix();
        };
        const double th = w.theta(y.grid.t(j)), thp = w.theta_prime(y.grid.t(j));
        const Eigen::VectorXd z = scaled(j);
        const Eigen::VectorXd zt = (scaled(j + 1) - scaled(j - 1)) / (2.0 * dt);
        const Eigen::VectorXd dz = detail::recovered_dn(m, z);
        const Eigen::VectorXd div_az = -(ops.stiffness_full * z).cwiseQuotient(lumped);
        const Eigen::ArrayXd a_grad_xi = -(2.0 - a) * th * xn.array();
        const Eigen::VectorXd p1 = (zt.array() + 2.0 * s * a_grad_xi * dz.array() - s * (2.0 - a) * th * z.array()).matrix();
        const Eigen::VectorXd p2 = (div_az.array() + s * z.array() * thp * (w.gamma - eta.array()) +
                                    s * s * z.array() * (2.0 - a) * (2.0 - a) * th * th * xn.array().pow(2.0 - a))
                                       .matrix();
        Eigen::VectorXd ef = Eigen::VectorXd::Zero(nn);
        if (y.has_source())
            ef = ((-s * th * (w.gamma - eta.array()) + S).exp() * y.source[std::size_t(j)].array()).matrix();
        double r2 = 0.0, f2 = 0.0, p2n = 0.0;
        for (Eigen::Index k = 0; k < nn; ++k) {
            if (m.on_boundary(std::size_t(k))) continue;
            const double r = ef[k] - p1[k] - p2[k];
            r2 += lumped[k] * r * r;
            f2 += lumped[k] * ef[k] * ef[k];
            p2n += lumped[k] * p1[k] * p1[k];
        }
        const double ldt = std::log(dt);
        lr.push_back(detail::safe_log(r2) - 2.0 * S + ldt);
        ls.push_back(detail::safe_log(f2) - 2.0 * S + ldt);
        lp.push_back(detail::safe_log(p2n) - 2.0 * S + ldt);
    }
    ResidualReport rep;
    rep.log_residual = 0.5 * detail::log_sum_exp(lr);
    rep.log_source = 0.5 * detail::log_sum_exp(ls);
    rep.log_p1 = 0.5 * detail::log_sum_exp(lp);
    return rep;
}

enum class CarlemanForm { z_form, y_form };

/// Terms of the weighted inequality, all as natural logarithms (the raw
/// values underflow for realistic s Theta). For the z-form the left side is
/// s iint Theta x_N^alpha (d_N z)^2 + s^3 iint Theta^3 x_N^(2-alpha) z^2; for
/// the y-form it is s iint Theta y^2 e^{-2 s xi}. The right side is
/// ||e^{-s xi} f||^2 + C s iint_{Gamma+} Theta |dz/dnu|^2.
struct CarlemanBudget {
    CarlemanForm form = CarlemanForm::z_form;
    double s = 1.0;
    double log_lhs_gradient = -std::numeric_limits<double>::infinity();
    double log_lhs_zero_order = -std::numeric_limits<double>::infinity();
    double log_rhs_source = -std::numeric_limits<double>::infinity();
    double log_rhs_boundary = -std::numeric_limits<double>::infinity();
    std::vector<double> log_slices; ///< log of each interior time slice's left-side contribution
    double constant = 0.0;          ///< C used for `holds`
    double quotient = 0.0;          ///< smallest C for which the inequality holds
    bool holds = true;

    double log_lhs() const { return detail::log_sum_exp({log_lhs_gradient, log_lhs_zero_order}); }
};

namespace detail {

/// (lhs - rhs_source)^+ / rhs_boundary from logarithms.
inline double min_constant(double llhs, double lsrc, double lbnd) {
    if (!std::isfinite(llhs) || llhs <= lsrc) return 0.0;
    const double ldiff = llhs + std::log1p(-std::exp(lsrc - llhs));
    if (!std::isfinite(lbnd)) return std::numeric_limits<double>::infinity();
    return std::exp(ldiff - lbnd);
}

} // namespace detail

namespace detail {

/// E_k(c) = int_0^1 e^{c u} u^k du for k = 0..4 and c <= 0.
inline std::array<double, 5> exp_moments(double c) {
    std::array<double, 5> e{};
    if (c > -8.0) {
        for (int k = 0; k < 5; ++k) {
            double term = 1.0, sum = 0.0;
            for (int n = 0; n < 80; ++n) {
                sum += term / (n + k + 1);
                term *= c / (n + 1);
                if (std::abs(term) < 1e-18 * std::abs(sum)) break;
            }
            e[std::size_t(k)] = sum;
        }
        return e;
    }
    const double ec = std::exp(c);
    e[0] = -std::expm1(c) / -c;
    for (int k = 1; k < 5; ++k) e[std::size_t(k)] = (ec - k * e[std::size_t(k - 1)]) / c;
    return e;
}

/// Product-integration weights W_i(c) = int_0^1 e^{c u} l_i(u) du for the
/// Lagrange basis on u = 0, 1/4, 1/2, 3/4, 1 (c <= 0).
inline std::array<double, 5> fitted_weights(double c) {
    static const Eigen::Matrix<double, 5, 5> vinv = [] {
        Eigen::Matrix<double, 5, 5> v;
        for (int i = 0; i < 5; ++i)
            for (int k = 0; k < 5; ++k) v(i, k) = std::pow(0.25 * i, k);
        return Eigen::Matrix<double, 5, 5>(v.inverse());
    }();
    const auto e = exp_moments(c);
    std::array<double, 5> w{};
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 5; ++k) w[std::size_t(i)] += vinv(k, i) * e[std::size_t(k)];
    return w;
}

/// Weights q_i with int_cell e^{phi(x)} R(x) dx ~ sum_i q_i R(x_i), where phi
/// is interpolated linearly between its end values and R is given at five
/// equispaced points (ascending x). Exact for polynomial R of degree 4; the
/// exponential factor may vary on a scale far below the cell length h.
inline std::array<double, 5> fitted_cell_weights(double h, double phi_a, double phi_b) {
    std::array<double, 5> q{};
    if (phi_b <= phi_a) {
        const auto w = fitted_weights(phi_b - phi_a);
        const double f = h * std::exp(phi_a);
        for (std::size_t i = 0; i < 5; ++i) q[i] = f * w[i];
        return q;
    }
    const auto w = fitted_weights(phi_a - phi_b);
    const double f = h * std::exp(phi_b);
    for (std::size_t i = 0; i < 5; ++i) q[i] = f * w[4 - i];
    return q;
}

inline double dot5(const std::array<double, 5>& a, const std::array<double, 5>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += a[i] * b[i];
    return s;
}

/// Powers of x_N at the five sample points of every x_N cell.
struct CellSamples {
    std::vector<std::array<double, 5>> x, xa, x1a, x2a; ///< x, x^alpha, x^(1-alpha), x^(2-alpha)
    std::vector<double> eta;                           ///< eta at the nodes
};

inline CellSamples cell_samples(const std::vector<double>& xs, double alpha) {
    CellSamples c;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        std::array<double, 5> x{}, xa{}, x1a{}, x2a{};
        for (int i = 0; i < 5; ++i) {
            const auto q = std::size_t(i);
            x[q] = xs[k] + 0.25 * i * (xs[k + 1] - xs[k]);
            xa[q] = std::pow(x[q], alpha);
            x1a[q] = x[q] / xa[q];
            x2a[q] = x[q] * x1a[q];
        }
        c.x.push_back(x);
        c.xa.push_back(xa);
        c.x1a.push_back(x1a);
        c.x2a.push_back(x2a);
    }
    for (double x : xs) c.eta.push_back(std::pow(x, 2.0 - alpha));
    return c;
}

/// Lines x1 = const with Gauss weights over which x_N-integrals are summed;
/// nodal values on a line interpolate two neighbouring columns (Q1 is linear
/// in x1, so two Gauss points per cell are exact for squared quantities).
struct QuadLine {
    std::size_t left = 0, right = 0;
    double theta = 0.0; ///< share of the right column
    double weight = 1.0;
};

inline std::vector<QuadLine> quad_lines(const Mesh& m) {
    if (m.dim() == 1) return {QuadLine{}};
    std::vector<QuadLine> lines;
    const double g = 0.5 / std::sqrt(3.0);
    for (std::size_t i = 0; i + 1 < m.nodes_x1(); ++i) {
        const double h = m.x1[i + 1] - m.x1[i];
        for (double u : {0.5 - g, 0.5 + g}) lines.push_back({i, i + 1, u, 0.5 * h});
    }
    return lines;
}

inline Eigen::VectorXd line_values(const Mesh& m, const QuadLine& l, const Eigen::VectorXd& u) {
    Eigen::VectorXd v(Eigen::Index(m.nodes_xn()));
    for (std::size_t j = 0; j < m.nodes_xn(); ++j)
        v[Eigen::Index(j)] = (1.0 - l.theta) * u[Eigen::Index(m.index(l.left, j))] +
                             (m.dim() == 1 ? 0.0 : l.theta * u[Eigen::Index(m.index(l.right, j))]);
    return v;
}

} // namespace detail

/// Evaluates one weighted inequality for a solution of the backward problem
/// (forward fields are time-reversed). Space integrals integrate the finite
/// element interpolant against the exact exponential weight cell by cell
/// (exponentially fitted product rule), so the boundary layer of width
/// 1/(s Theta) near Gamma+ is captured at every s. Time integrals use the
/// trapezoid rule over interior nodes (the weights vanish at t = 0 and t = T).
/// The boundary flux is the variational recovery of dy/dnu on Gamma+, where
/// dz/dnu = e^{-s xi} dy/dnu.
inline CarlemanBudget check_inequality(const SpaceTimeField& field, const CarlemanWeights& w, const OperatorPair& ops,
                                       CarlemanForm form, double constant) {
    if (field.mesh->num_nodes() != ops.mesh->num_nodes()) throw ContractViolation("field and operators use different meshes");
    if (std::abs(field.grid.T - w.T) > 1e-14 * w.T) throw ContractViolation("field and weights use different T");
    const SpaceTimeField y = detail::as_backward(field);
    const Mesh& m = *ops.mesh;
    const FluxHistory flux = flux_history(y, ops, BoundaryPart::gamma_plus);
    const double s = w.s, a = w.alpha, ldt = std::log(y.grid.dt());
    const auto lines = detail::quad_lines(m);
    const auto& xs = m.xn;
    const auto cs = detail::cell_samples(xs, a);

    CarlemanBudget b;
    b.form = form;
    b.s = s;
    b.constant = constant;
    std::vector<double> lg, l0, lf, lb;
    for (int j = 1; j < y.grid.steps; ++j) {
        const double t = y.grid.t(j);
        const double th = w.theta(t), lth = w.log_theta(t);
        // exponent of e^{-2 s xi} relative to its maximum -2 s Theta (gamma - 1) on Gamma+
        std::vector<double> phi(xs.size());
        for (std::size_t k = 0; k < xs.size(); ++k) phi[k] = -2.0 * s * th * (1.0 - cs.eta[k]);
        std::vector<std::array<double, 5>> cw(xs.size() - 1);
        for (std::size_t c = 0; c + 1 < xs.size(); ++c) cw[c] = detail::fitted_cell_weights(xs[c + 1] - xs[c], phi[c], phi[c + 1]);
        const double lift = s * (2.0 - a) * th; // -s d_N xi = lift x^(1 - alpha)
        double g = 0.0, zz = 0.0, ff = 0.0;
        std::array<double, 5> rg{}, rz{}, rf{};
        for (const auto& line : lines) {
            const Eigen::VectorXd yl = detail::line_values(m, line, y.values[std::size_t(j)]);
            Eigen::VectorXd fl;
            if (y.has_source()) fl = detail::line_values(m, line, y.source[std::size_t(j)]);
            for (std::size_t c = 0; c + 1 < xs.size(); ++c) {
                const double hc = xs[c + 1] - xs[c];
                const double y0 = yl[Eigen::Index(c)], y1 = yl[Eigen::Index(c + 1)], grad = (y1 - y0) / hc;
                for (std::size_t i = 0; i < 5; ++i) {
                    const double yv = y0 + 0.25 * double(i) * (y1 - y0);
                    if (form == CarlemanForm::z_form) {
                        // x^alpha (d_N y - s y d_N xi)^2
                        const double d = grad + lift * cs.x1a[c][i] * yv;
                        rg[i] = cs.xa[c][i] * d * d;
                        rz[i] = cs.x2a[c][i] * yv * yv;
                    } else {
                        rz[i] = yv * yv;
                    }
                    if (y.has_source()) {
                        const double fv = fl[Eigen::Index(c)] + 0.25 * double(i) * (fl[Eigen::Index(c + 1)] - fl[Eigen::Index(c)]);
                        rf[i] = fv * fv;
                    }
                }
                const auto& q = cw[c];
                if (form == CarlemanForm::z_form) g += line.weight * detail::dot5(q, rg);
                zz += line.weight * detail::dot5(q, rz);
                if (y.has_source()) ff += line.weight * detail::dot5(q, rf);
            }
        }
        const double S2 = 2.0 * s * th * (w.gamma - 1.0);
        if (form == CarlemanForm::z_form) {
            lg.push_back(std::log(s) + lth + detail::safe_log(g) - S2 + ldt);
            l0.push_back(3.0 * std::log(s) + 3.0 * lth + detail::safe_log(zz) - S2 + ldt);
        } else {
            l0.push_back(std::log(s) + lth + detail::safe_log(zz) - S2 + ldt);
        }
        if (y.has_source()) lf.push_back(detail::safe_log(ff) - S2 + ldt);
        // on Gamma+ (x_N = 1) xi = Theta (gamma - 1)
        lb.push_back(std::log(s) + lth + detail::safe_log(flux.squared[std::size_t(j)]) - S2 + ldt);
        b.log_slices.push_back(
            detail::log_sum_exp({lg.empty() ? -std::numeric_limits<double>::infinity() : lg.back(), l0.back()}));
    }
    b.log_lhs_gradient = detail::log_sum_exp(lg);
    b.log_lhs_zero_order = detail::log_sum_exp(l0);
    b.log_rhs_source = detail::log_sum_exp(lf);
    b.log_rhs_boundary = detail::log_sum_exp(lb);
    b.quotient = detail::min_constant(b.log_lhs(), b.log_rhs_source, b.log_rhs_boundary);
    b.holds = b.quotient <= constant;
    return b;
}

/// Default s-grid: 20 logarithmically spaced points in [1, 200].
inline std::vector<double> default_s_grid(int points = 20, double lo = 1.0, double hi = 200.0) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / (points - 1));
    g.back() = hi;
    return g;
}

struct S0Result {
    bool found = false;
    double s0 = 0.0;
    std::size_t index = 0;
    double fitted_constant = 0.0;              ///< max quotient over fields and s >= s0
    std::vector<std::vector<double>> quotient; ///< [field][s] smallest admissible C
};

/// Quotients of every field on the s-grid (no constant applied).
inline std::vector<std::vector<double>> quotient_table(const std::vector<SpaceTimeField>& fields,
                                                       const CarlemanWeights& tmpl, const OperatorPair& ops,
                                                       const std::vector<double>& s_grid, CarlemanForm form,
                                                       int jobs = 1) {
    std::vector<std::vector<double>> q(fields.size(), std::vector<double>(s_grid.size()));
    const std::size_t ns = s_grid.size();
    parallel_for(fields.size() * ns, jobs, [&](std::size_t k) {
        q[k / ns][k % ns] = check_inequality(fields[k / ns], with_s(tmpl, s_grid[k % ns]), ops, form, 0.0).quotient;
    });
    return q;
}

/// Smallest grid s from which the inequality with constant C holds for every
/// field at that s and all larger grid values.
inline S0Result find_s0(const std::vector<std::vector<double>>& quotients, const std::vector<double>& s_grid,
                        double constant) {
    if (quotients.empty()) throw ParameterError("find_s0 needs at least one field");
    if (s_grid.empty() || s_grid.front() < 1.0) throw ParameterError("s-grid must be nonempty with s >= 1");
    for (std::size_t i = 0; i + 1 < s_grid.size(); ++i)
        if (!(s_grid[i + 1] > s_grid[i])) throw ParameterError("s-grid must be ascending");
    S0Result r;
    r.quotient = quotients;
    std::size_t first = s_grid.size();
    for (std::size_t i = s_grid.size(); i-- > 0;) {
        bool ok = true;
        for (const auto& row : quotients) ok = ok && row[i] <= constant;
        if (!ok) break;
        first = i;
    }
    if (first == s_grid.size()) return r;
    r.found = true;
    r.index = first;
    r.s0 = s_grid[first];
    for (const auto& row : quotients)
        for (std::size_t i = first; i < s_grid.size(); ++i) r.fitted_constant = std::max(r.fitted_constant, row[i]);
    return r;
}

inline S0Result find_s0(const std::vector<SpaceTimeField>& fields, const CarlemanWeights& tmpl, const OperatorPair& ops,
                        const std::vector<double>& s_grid, double constant, CarlemanForm form = CarlemanForm::z_form) {
    if (fields.empty()) throw ParameterError("find_s0 needs at least one field");
    return find_s0(quotient_table(fields, tmpl, ops, s_grid, form), s_grid, constant);
}

/// Calibrated constant: the largest quotient over a calibration suite at s.
inline double calibrate_constant(const std::vector<SpaceTimeField>& fields, const CarlemanWeights& tmpl,
                                 const OperatorPair& ops, double s, CarlemanForm form = CarlemanForm::z_form) {
    double c = 0.0;
    for (const auto& f : fields) c = std::max(c, check_inequality(f, with_s(tmpl, s), ops, form, 0.0).quotient);
    return c;
}

struct GrowthFit {
    double exponent_first = 0.0;  ///< slope of log|Theta'| against log Theta
    double exponent_second = 0.0; ///< slope of log|Theta''| against log Theta
    double constant_first = 0.0;  ///< max |Theta'| / Theta^(5/4)
    double constant_second = 0.0; ///< max |Theta''| / Theta^(3/2)
};

/// Least-squares growth exponents over interior grid nodes within T/10 of an endpoint.
inline GrowthFit fit_growth(const CarlemanWeights& w, const TimeGrid& grid) {
    std::vector<double> lt, l1, l2;
    GrowthFit g;
    for (int j = 1; j < grid.steps; ++j) {
        const double t = grid.t(j);
        const double th = w.theta(t), d1 = std::abs(w.theta_prime(t)), d2 = std::abs(w.theta_second(t));
        g.constant_first = std::max(g.constant_first, d1 / std::pow(th, 1.25));
        g.constant_second = std::max(g.constant_second, d2 / std::pow(th, 1.5));
        if (t > 0.1 * w.T && t < 0.9 * w.T) continue;
        lt.push_back(std::log(th));
        l1.push_back(std::log(d1));
        l2.push_back(std::log(d2));
    }
    auto slope = [&](const std::vector<double>& v) {
        const double n = double(lt.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < lt.size(); ++i) {
            sx += lt[i];
            sy += v[i];
            sxx += lt[i] * lt[i];
            sxy += lt[i] * v[i];
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    if (lt.size() >= 2) {
        g.exponent_first = slope(l1);
        g.exponent_second = slope(l2);
    }
    return g;
}

} // namespace degen
