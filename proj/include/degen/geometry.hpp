#pragma once

#include "degen/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

namespace degen {

/// A point of the closed domain. For one-dimensional domains only `xn` is used.
struct Point {
    double x1 = 0.0;
    double xn = 0.0;
};

enum class DomainKind { interval, square };

/// Boundary classes. `cut` is the artificial edge {x_N = delta} of a truncated domain.
enum class BoundaryPart { degenerate, gamma_plus, lateral, cut };

inline std::string_view to_string(BoundaryPart part) {
    switch (part) {
    case BoundaryPart::degenerate: return "degenerate";
    case BoundaryPart::gamma_plus: return "gamma_plus";
    case BoundaryPart::lateral: return "lateral";
    case BoundaryPart::cut: return "cut";
    }
    return "unknown";
}

inline std::string_view to_string(DomainKind kind) {
    return kind == DomainKind::interval ? "interval" : "square";
}

inline DomainKind parse_domain_kind(std::string_view name) {
    if (name == "interval") return DomainKind::interval;
    if (name == "square") return DomainKind::square;
    throw ParameterError("unknown domain kind '" + std::string(name) + "'");
}

/// Axis-aligned box; for dim == 1 the x1 bounds are ignored.
struct Box {
    int dim = 1;
    Point lo;
    Point hi;

    bool contains(const Point& p, double tol = 0.0) const {
        if (p.xn < lo.xn - tol || p.xn > hi.xn + tol) return false;
        if (dim == 2 && (p.x1 < lo.x1 - tol || p.x1 > hi.x1 + tol)) return false;
        return true;
    }

    bool contains(const Box& other, double tol = 0.0) const {
        return contains(other.lo, tol) && contains(other.hi, tol);
    }

    double measure() const {
        const double h = hi.xn - lo.xn;
        return dim == 1 ? h : h * (hi.x1 - lo.x1);
    }
};

/// Continuous problem description: the unit interval or unit square with the
/// diffusion matrix A = diag(1, ..., 1, x_N^alpha).
struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    double alpha = 0.5;
    double delta0 = 0.25;

    int dim() const { return kind == DomainKind::interval ? 1 : 2; }

    Box extent() const {
        Box b;
        b.dim = dim();
        b.lo = {0.0, 0.0};
        b.hi = {dim() == 2 ? 1.0 : 0.0, 1.0};
        return b;
    }

    /// sup |x| + 1 over the closed domain.
    double bound_m() const { return dim() == 1 ? 2.0 : std::sqrt(2.0) + 1.0; }

    /// Diffusion coefficient in the x_N direction.
    double weight(double xn) const { return std::pow(xn, alpha); }

    /// Classifies a boundary point using the sign of (A nu) . e_N over the
    /// outward normals active at that point.
    BoundaryPart classify(const Point& p, double tol = 1e-12) const {
        if (std::abs(p.xn) <= tol) return BoundaryPart::degenerate;
        double best = -1.0;
        // nu_N of the active normals: top edge +1, lateral edges 0.
        auto consider = [&](double nun) { best = std::max(best, weight(p.xn) * nun); };
        if (std::abs(p.xn - 1.0) <= tol) consider(1.0);
        if (dim() == 2 && (std::abs(p.x1) <= tol || std::abs(p.x1 - 1.0) <= tol)) consider(0.0);
        if (best < -0.5) throw ContractViolation("point is not on the domain boundary");
        return best > 0.0 ? BoundaryPart::gamma_plus : BoundaryPart::lateral;
    }
};

inline DomainSpec make_domain(DomainKind kind, double alpha, double delta0 = 0.25) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ParameterError("alpha must lie in the open interval (0, 1), got " + std::to_string(alpha));
    if (!(delta0 > 0.0 && 3.0 * delta0 < 1.0))
        throw ParameterError("delta0 must satisfy 0 < 3 delta0 < 1");
    DomainSpec d;
    d.kind = kind;
    d.alpha = alpha;
    d.delta0 = delta0;
    return d;
}

/// Slab Omega intersected with {x_N > delta}.
struct TruncatedDomain {
    DomainSpec parent;
    double delta = 0.0;

    Box region() const {
        Box b = parent.extent();
        b.lo.xn = delta;
        return b;
    }

    BoundaryPart classify(const Point& p, double tol = 1e-12) const {
        if (std::abs(p.xn - delta) <= tol) return BoundaryPart::cut;
        return parent.classify(p, tol);
    }
};

inline void check_delta(const DomainSpec& d, double delta) {
    if (!(delta > 0.0 && delta < d.delta0))
        throw ParameterError("delta must lie in (0, delta0 = " + std::to_string(d.delta0) + "), got " +
                             std::to_string(delta));
}

inline TruncatedDomain truncate(const DomainSpec& d, double delta) {
    check_delta(d, delta);
    return TruncatedDomain{d, delta};
}

/// Points of Omega within distance delta of Gamma+ (the top edge / right endpoint).
inline Box collar(const DomainSpec& d, double delta) {
    check_delta(d, delta);
    Box b = d.extent();
    b.lo.xn = 1.0 - delta;
    return b;
}

} // namespace degen
