#include "doctest.h"

#include "spheremoduli/complex.hpp"
#include "spheremoduli/trace.hpp"
#include "oracles.hpp"

using namespace spheremoduli;

namespace {

MetricComplex octant() {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    b.add_triangle(vz, vx, vy);
    return b.build();
}

// square 4-gon from two octants glued along (ex, ey)
MetricComplex two_octant_square() {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vs = b.add_vertex(VertexRole::Completion, ez().antipode());
    b.add_triangle(vz, vx, vy);
    b.add_triangle(vy, vx, vs);
    return b.build();
}

// octant subdivided around an interior centroid vertex
MetricComplex octant_with_center() {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId m = b.add_vertex(VertexRole::Interior, UnitVec(1, 1, 1));
    b.add_triangle(m, vz, vx);
    b.add_triangle(m, vx, vy);
    b.add_triangle(m, vy, vz);
    return b.build();
}

} // namespace

TEST_CASE("octant complex is valid") {
    auto c = octant();
    auto report = c.validate();
    for (auto& v : report) MESSAGE(v.kind, ": ", v.detail);
    CHECK(report.empty());
    CHECK(c.total_area() == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(c.vertex_angle(0) == doctest::Approx(kPi / 2));
    CHECK(c.boundary_next(0) == 1);
    CHECK(c.boundary_next(1) == 2);
    CHECK(c.boundary_next(2) == 0);
}

TEST_CASE("octant with interior vertex: angle sums") {
    auto c = octant_with_center();
    CHECK(c.valid());
    CHECK(c.vertex_angle(3) == doctest::Approx(kTwoPi).epsilon(1e-12));
    CHECK(c.total_area() == doctest::Approx(kPi / 2).epsilon(1e-10));
}

TEST_CASE("two glued octants: angle additivity at shared vertices") {
    auto c = two_octant_square();
    CHECK(c.valid());
    CHECK(c.total_area() == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(c.vertex_angle(1) == doctest::Approx(kPi)); // merged vertex
    CHECK(c.vertex_angle(2) == doctest::Approx(kPi));
    // Gauss-Bonnet for the 4-gon
    CHECK(polygon_gauss_bonnet(c, {0, 1, 3, 2}) == doctest::Approx(c.total_area()).epsilon(1e-10));
}

TEST_CASE("branch point reported as ConeAngleViolation") {
    // fan winding twice around an interior vertex: cone angle 4pi
    MetricComplexBuilder b;
    VertexId m = b.add_vertex(VertexRole::Interior, ez());
    std::vector<VertexId> rim;
    for (int k = 0; k < 8; ++k) {
        double az = (kPi / 2) * k; // wraps twice
        rim.push_back(b.add_vertex(VertexRole::Completion,
                                   UnitVec(std::sin(0.5) * std::cos(az),
                                           std::sin(0.5) * std::sin(az), std::cos(0.5))));
    }
    for (int k = 0; k < 8; ++k) b.add_triangle(m, rim[k], rim[(k + 1) % 8]);
    auto c = b.build();
    auto report = c.validate();
    bool found = false;
    for (auto& v : report) found |= v.kind == "ConeAngleViolation";
    CHECK(found);
}

TEST_CASE("DevelopmentMismatch from inconsistent corner claims") {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vs = b.add_vertex(VertexRole::Completion, ez().antipode());
    b.add_triangle(vz, vx, vy);
    TriId t2 = b.add_triangle(vy, vx, vs);
    // the second triangle believes the shared edge endpoint vx develops elsewhere
    b.claim_corner_position(t2, 1, UnitVec(0.9, 0.1, std::sqrt(1 - 0.81 - 0.01)));
    auto c = b.build();
    auto report = c.validate();
    bool found = false;
    for (auto& v : report) found |= v.kind == "DevelopmentMismatch";
    CHECK(found);
}

TEST_CASE("annulus rejected as NotDisk") {
    // two triangles sharing two edges -> not a disk (sphere-like pair)
    MetricComplexBuilder b;
    VertexId a = b.add_vertex(VertexRole::Completion, ez());
    VertexId c1 = b.add_vertex(VertexRole::Completion, ex());
    VertexId d = b.add_vertex(VertexRole::Completion, ey());
    b.add_triangle(a, c1, d);
    b.add_triangle(d, c1, a);
    auto c = b.build();
    auto report = c.validate();
    REQUIRE(!report.empty());
    CHECK(report.front().kind == "NotDisk");
}

TEST_CASE("trace octant midline") {
    auto c = octant();
    auto r = trace_geodesic(c, 0, kPi / 4);
    CHECK(r.hit.kind == GeodesicHit::Kind::EdgeHit);
    CHECK(r.hit.edge == edge_key(1, 2));
    CHECK(r.hit.edge_param == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.hit.length == doctest::Approx(kPi / 2).epsilon(1e-9));
}

TEST_CASE("trace octant asymmetric direction matches oracle") {
    auto c = octant();
    for (double theta : {0.2, 0.4, 0.7, 1.1, 1.4}) {
        auto r = trace_geodesic(c, 0, theta);
        auto o = oracles::dense_trace(c, 0, theta);
        CHECK(r.hit.kind == o.kind);
        CHECK(r.hit.length == doctest::Approx(o.length).epsilon(1e-6));
        if (r.hit.kind == GeodesicHit::Kind::EdgeHit) CHECK(r.hit.edge == o.edge);
    }
}

TEST_CASE("trace across interior edge reaches the antipodal corner") {
    auto c = two_octant_square();
    for (double theta : {0.3, kPi / 4, 1.2}) {
        auto r = trace_geodesic(c, 0, theta);
        CHECK(r.hit.kind == GeodesicHit::Kind::VertexHit);
        CHECK(r.hit.vertex == 3);
        CHECK(r.hit.length == doctest::Approx(kPi).epsilon(1e-9));
    }
}

TEST_CASE("trace through an interior vertex continues straight") {
    auto c = octant_with_center();
    // aim exactly at the centroid: passes through and exits on the far edge
    double theta = corner_angle(ez(), ex(), UnitVec(1, 1, 1));
    auto r = trace_geodesic(c, 0, theta);
    CHECK(r.hit.kind == GeodesicHit::Kind::EdgeHit);
    CHECK(r.hit.edge == edge_key(1, 2));
    CHECK(r.hit.edge_param == doctest::Approx(0.5).epsilon(1e-9));
    auto o = oracles::dense_trace(c, 0, theta);
    CHECK(o.kind == GeodesicHit::Kind::EdgeHit);
    CHECK(r.hit.length == doctest::Approx(o.length).epsilon(1e-6));
}

TEST_CASE("trace rejects bad angles") {
    auto c = octant();
    CHECK_THROWS_AS(trace_geodesic(c, 0, 0.0), AngleOutOfRange);
    CHECK_THROWS_AS(trace_geodesic(c, 0, kPi), AngleOutOfRange);
}
