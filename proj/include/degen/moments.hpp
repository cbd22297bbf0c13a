#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace degen {

/// Moments m_j = int_0^1 (y0 + h s)^beta s^j ds, j = 0..2, evaluated in closed
/// form. Three regimes keep the evaluation accurate:
///  - y0 == 0: m_j = h^beta / (beta + j + 1), +inf when that integral diverges;
///  - h / y0 <= 1/2: binomial series of (1 + r s)^beta integrated term by term;
///  - otherwise: monomial antiderivatives x^{beta+i+1} / (beta+i+1).
inline std::array<double, 3> power_moments(double y0, double h, double beta) {
    std::array<double, 3> m{};
    if (y0 == 0.0) {
        for (int j = 0; j < 3; ++j) {
            const double e = beta + j + 1;
            m[j] = e > 0.0 ? std::pow(h, beta) / e : std::numeric_limits<double>::infinity();
        }
        return m;
    }
    const double r = h / y0;
    if (r <= 0.5) {
        // (1 + r s)^beta = sum_k c_k (r s)^k with c_k = binom(beta, k).
        const double scale = std::pow(y0, beta);
        double coeff = 1.0, rk = 1.0;
        for (int k = 0; k < 200; ++k) {
            double largest = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double term = coeff * rk / (k + j + 1);
                m[j] += term;
                largest = std::max(largest, std::abs(term));
            }
            if (largest < 1e-18 * std::abs(m[0])) break;
            coeff *= (beta - k) / (k + 1);
            rk *= r;
        }
        for (auto& v : m) v *= scale;
        return m;
    }
    // int_{y0}^{y1} x^beta (x - y0)^j dx / h^{j+1}, expanded binomially in x.
    auto prim = [&](int i) {
        const double e = beta + i + 1;
        return std::pow(y0, e) * std::expm1(e * std::log1p(r)) / e;
    };
    const double p0 = prim(0), p1 = prim(1), p2 = prim(2);
    m[0] = p0 / h;
    m[1] = (p1 - y0 * p0) / (h * h);
    m[2] = (p2 - 2.0 * y0 * p1 + y0 * y0 * p0) / (h * h * h);
    return m;
}

/// int_{y0}^{y0+h} x^beta dx.
inline double power_integral(double y0, double h, double beta) { return h * power_moments(y0, h, beta)[0]; }

/// Weighted 1D linear-element mass matrix int x^beta psi_a psi_b dx over the
/// cell [y0, y0+h], psi_0 = 1 - s, psi_1 = s. Entries coupling psi_0 are +inf
/// when the weight is not integrable at y0 = 0.
inline std::array<std::array<double, 2>, 2> weighted_cell_mass(double y0, double h, double beta) {
    const auto m = power_moments(y0, h, beta);
    std::array<std::array<double, 2>, 2> w{};
    w[1][1] = h * m[2];
    w[0][1] = w[1][0] = h * (m[1] - m[2]);
    w[0][0] = h * (m[0] - 2.0 * m[1] + m[2]);
    const double inf = std::numeric_limits<double>::infinity();
    if (!std::isfinite(m[1])) w[0][1] = w[1][0] = inf;
    if (!std::isfinite(m[0])) w[0][0] = inf;
    return w;
}

} // namespace degen
