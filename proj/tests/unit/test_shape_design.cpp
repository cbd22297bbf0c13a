#include "degen/shape_design.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace degen;

namespace {

double bump(Point p) {
    const double r = (p.xn - 0.7) / 0.25;
    return std::abs(r) < 1 ? std::exp(1 - 1 / (1 - r * r)) : 0.0;
}

double bump2d(Point p) { return bump(p) * std::sin(M_PI * p.x1); }

} // namespace

TEST(Extension, ZeroAndNodalEquality) {
    const auto d = make_domain(DomainKind::square, 0.5);
    const Mesh full = build_mesh(d, 20, 1.0);
    const Mesh sub = submesh_above(full, 0.1);
    EXPECT_EQ(extend_by_zero(Eigen::VectorXd::Zero(Eigen::Index(sub.num_nodes())), sub, full).norm(), 0.0);
    const Eigen::VectorXd v = sub.sample(bump2d);
    const Eigen::VectorXd e = extend_by_zero(v, sub, full);
    const auto map = embed_nodes(sub, full);
    for (std::size_t k = 0; k < map.size(); ++k) EXPECT_EQ(e[Eigen::Index(map[k])], v[Eigen::Index(k)]);
    EXPECT_THROW(extend_by_zero(v, sub, build_mesh(d, 21, 1.0)), ContractViolation);
}

TEST(Extension, IsometryAcrossDeltaLadder) {
    for (auto kind : {DomainKind::interval, DomainKind::square}) {
        const auto d = make_domain(kind, 0.5);
        const Mesh full = build_mesh(d, kind == DomainKind::interval ? 160 : 40, 1.0);
        const auto full_ops = assemble(full);
        for (double delta : {0.2, 0.1, 0.05}) {
            const auto sub_ops = assemble(submesh_above(full, delta));
            Eigen::VectorXd v = sub_ops.mesh->sample(kind == DomainKind::interval ? InitialFn(bump) : InitialFn(bump2d));
            const auto n = extension_norms(v, sub_ops, full_ops);
            EXPECT_NEAR(n.nodal_extended, n.nodal_truncated, 1e-14 * n.nodal_truncated);
            EXPECT_NEAR(n.fe_extended, n.fe_truncated, 1e-14 * n.fe_truncated);
        }
    }
}

TEST(TruncatedSolve, SupportPrecondition) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    const auto grid = make_time_grid(0.1, 10);
    EXPECT_NO_THROW(solve_truncated(d, 0.2, bump, {}, grid, 40));
    // the first full-domain eigenfunction reaches the degenerate edge
    auto parent = std::make_shared<const Mesh>(build_mesh(d, 40, 1.0));
    const auto full_ops = assemble(*parent);
    const auto phi = mode(full_ops, compute_spectrum(full_ops, 1), 0);
    try {
        solve_truncated(parent, 0.1, phi, {}, grid);
        FAIL() << "expected a precondition error";
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("x_N = 0.000000"), std::string::npos);
    }
    EXPECT_THROW(solve_truncated(d, 0.21, bump, {}, grid, 40), ParameterError);
}

TEST(TruncatedSolve, TruncatedFirstModeDecays) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    auto parent = std::make_shared<const Mesh>(build_mesh(d, 80, 1.0));
    const auto sub_ops = assemble(submesh_above(*parent, 0.1));
    const auto spec = compute_spectrum(sub_ops, 1);
    const Eigen::VectorXd y0 = extend_by_zero(mode(sub_ops, spec, 0), *sub_ops.mesh, *parent);
    const auto grid = make_time_grid(0.5, 10);
    const auto ts = solve_truncated(parent, 0.1, y0, {}, grid);
    const auto e = energy_history(ts.field, ts.ops);
    for (int j = 0; j <= 10; ++j) EXPECT_NEAR(e[std::size_t(j)], std::exp(-spec.values[0] * grid.t(j)), 1e-10);
}

TEST(DeltaSweep, ErrorsDecrease) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    const auto grid = make_time_grid(0.5, 40);
    const std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
    for (bool with_source : {false, true}) {
        SourceFn f;
        if (with_source) f = [](double t, Point p) { return std::cos(2 * t) * std::sin(M_PI * p.xn); };
        const auto rep = delta_sweep(d, bump, f, grid, deltas, 80);
        for (std::size_t i = 1; i < deltas.size(); ++i) {
            EXPECT_LT(rep.solution_error[i], rep.solution_error[i - 1]);
            if (!with_source) {
                EXPECT_LT(rep.flux_error[i], rep.flux_error[i - 1]);
            }
        }
        EXPECT_LT(rep.self_convergence, rep.solution_error.back());
    }
}

TEST(DeltaSweep, SupportAboveHalf) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    auto high = [](Point p) {
        const double r = (p.xn - 0.75) / 0.2;
        return std::abs(r) < 1 ? std::exp(1 - 1 / (1 - r * r)) : 0.0;
    };
    const auto rep = delta_sweep(d, high, {}, make_time_grid(0.5, 40), {0.2, 0.1}, 80);
    EXPECT_LE(rep.solution_error[1], rep.solution_error[0]);
}

TEST(DeltaSweep, ZeroDataAndValidation) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    const auto grid = make_time_grid(0.5, 10);
    const auto rep = delta_sweep(d, [](Point) { return 0.0; }, {}, grid, {0.2, 0.1}, 40);
    for (double e : rep.solution_error) EXPECT_EQ(e, 0.0);
    for (double e : rep.flux_error) EXPECT_EQ(e, 0.0);
    EXPECT_THROW(delta_sweep(d, bump, {}, grid, {0.1, 0.2}, 40), ParameterError);
    EXPECT_THROW(delta_sweep(d, bump, {}, grid, {0.2, 0.13}, 40), ParameterError);
}

TEST(DeltaSweep, SquareDomain) {
    const auto d = make_domain(DomainKind::square, 0.5);
    SolveOptions cn;
    cn.method = SolveOptions::Method::crank_nicolson;
    const auto rep = delta_sweep(d, bump2d, {}, make_time_grid(0.2, 16), {0.2, 0.1, 0.05}, 20, cn);
    for (std::size_t i = 1; i < 3; ++i) {
        EXPECT_LT(rep.solution_error[i], rep.solution_error[i - 1]);
        EXPECT_LT(rep.flux_error[i], rep.flux_error[i - 1]);
    }
}

TEST(Stability, UniformAcrossDelta) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    auto parent = std::make_shared<const Mesh>(build_mesh(d, 80, 1.0));
    std::vector<std::pair<InitialFn, SourceFn>> data{
        {bump, {}},
        {bump, [](double t, Point p) { return t * p.xn; }},
        {[](Point) { return 0.0; }, [](double, Point p) { return std::sin(3 * M_PI * p.xn); }},
    };
    std::vector<double> c;
    for (double delta : {0.2, 0.1, 0.05}) c.push_back(stability_constant(parent, delta, data, make_time_grid(1.0, 40)));
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    EXPECT_LE(*hi / *lo - 1.0, 0.2);
}
