#include "degen/geometry.hpp"
#include "degen/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace degen;

TEST(Geometry, IntervalPartition) {
    const auto d = make_domain(DomainKind::interval, 0.5);
    EXPECT_EQ(d.classify({0.0, 1.0}), BoundaryPart::gamma_plus);
    EXPECT_EQ(d.classify({0.0, 0.0}), BoundaryPart::degenerate);
    EXPECT_DOUBLE_EQ(d.bound_m(), 2.0);
}

TEST(Geometry, SquarePartition) {
    const auto d = make_domain(DomainKind::square, 0.5);
    EXPECT_EQ(d.classify({0.5, 1.0}), BoundaryPart::gamma_plus);
    EXPECT_EQ(d.classify({0.0, 0.5}), BoundaryPart::lateral);
    EXPECT_EQ(d.classify({1.0, 0.3}), BoundaryPart::lateral);
    EXPECT_EQ(d.classify({0.4, 0.0}), BoundaryPart::degenerate);
    EXPECT_DOUBLE_EQ(d.bound_m(), std::sqrt(2.0) + 1.0);
}

TEST(Geometry, AlphaOutsideRangeRejected) {
    EXPECT_THROW(make_domain(DomainKind::square, 1.0), ParameterError);
    EXPECT_THROW(make_domain(DomainKind::interval, 0.0), ParameterError);
    EXPECT_THROW(make_domain(DomainKind::interval, -0.3), ParameterError);
}

TEST(Geometry, TruncateRegionAndRange) {
    const auto sq = make_domain(DomainKind::square, 0.5);
    const auto t = truncate(sq, 0.1);
    EXPECT_DOUBLE_EQ(t.region().lo.xn, 0.1);
    EXPECT_DOUBLE_EQ(t.region().hi.xn, 1.0);
    EXPECT_DOUBLE_EQ(t.region().lo.x1, 0.0);
    EXPECT_DOUBLE_EQ(t.region().hi.x1, 1.0);
    const auto iv = make_domain(DomainKind::interval, 0.5);
    EXPECT_THROW(truncate(iv, 0.3), ParameterError);
    EXPECT_THROW(truncate(iv, 0.0), ParameterError);
    EXPECT_THROW(truncate(iv, 0.25), ParameterError);
}

TEST(Geometry, NestingAndContainment) {
    const auto sq = make_domain(DomainKind::square, 0.5);
    const double deltas[] = {0.24, 0.2, 0.1, 0.05, 0.01};
    for (double d1 : deltas)
        for (double d2 : deltas) {
            if (!(d2 < d1)) continue;
            EXPECT_TRUE(truncate(sq, d2).region().contains(truncate(sq, d1).region()));
        }
    for (double d : deltas) {
        Box inner = sq.extent();
        inner.lo.xn = 2 * d;
        EXPECT_TRUE(truncate(sq, d).region().contains(inner));
    }
}

TEST(Geometry, Collar) {
    const auto sq = make_domain(DomainKind::square, 0.5);
    const auto c = collar(sq, 0.1);
    EXPECT_DOUBLE_EQ(c.lo.xn, 0.9);
    EXPECT_DOUBLE_EQ(c.lo.x1, 0.0);
    EXPECT_DOUBLE_EQ(c.hi.x1, 1.0);
    const auto iv = make_domain(DomainKind::interval, 0.5);
    EXPECT_NEAR(collar(iv, 0.05).lo.xn, 0.95, 1e-15);
    EXPECT_TRUE(truncate(sq, 0.2).region().contains(collar(sq, 0.2)));
    EXPECT_GT(collar(sq, 0.2).lo.xn, sq.delta0);
    EXPECT_THROW(collar(iv, 0.3), ParameterError);
}

TEST(Geometry, DiscretePartitionCoversBoundaryOnce) {
    for (auto kind : {DomainKind::interval, DomainKind::square}) {
        const auto d = make_domain(kind, 0.5);
        const Mesh m = build_mesh(d, 8);
        std::multiset<std::size_t> seen;
        for (auto part : {BoundaryPart::degenerate, BoundaryPart::gamma_plus, BoundaryPart::lateral})
            for (auto k : m.boundary_nodes(part)) seen.insert(k);
        std::size_t boundary = 0;
        for (std::size_t k = 0; k < m.num_nodes(); ++k) {
            if (!m.on_boundary(k)) continue;
            ++boundary;
            EXPECT_EQ(seen.count(k), 1u);
        }
        EXPECT_EQ(seen.size(), boundary);
    }
}

TEST(Geometry, GammaPlusIndependentOfDelta) {
    const auto sq = make_domain(DomainKind::square, 0.5);
    const Mesh full = build_mesh(sq, 40, 1.0);
    std::set<std::pair<double, double>> ref;
    for (auto k : full.boundary_nodes(BoundaryPart::gamma_plus)) ref.insert({full.node(k).x1, full.node(k).xn});
    for (double delta : {0.2, 0.1, 0.05}) {
        const Mesh sub = submesh_above(full, delta);
        std::set<std::pair<double, double>> got;
        for (auto k : sub.boundary_nodes(BoundaryPart::gamma_plus)) got.insert({sub.node(k).x1, sub.node(k).xn});
        EXPECT_EQ(got, ref);
    }
}
