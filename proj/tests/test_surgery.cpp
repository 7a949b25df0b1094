#include "doctest.h"

#include "spheremoduli/pieces.hpp"
#include "oracles.hpp"

using namespace spheremoduli;

namespace {

MetricComplex one_triangle(const UnitVec& a, const UnitVec& b, const UnitVec& c) {
    MetricComplexBuilder bld;
    VertexId va = bld.add_vertex(VertexRole::Completion, a);
    VertexId vb = bld.add_vertex(VertexRole::Completion, b);
    VertexId vc = bld.add_vertex(VertexRole::Completion, c);
    bld.add_triangle(va, vb, vc);
    return bld.build();
}

} // namespace

TEST_CASE("glue two octants along an edge") {
    auto c1 = one_triangle(ez(), ex(), ey());
    auto c2 = one_triangle(ez(), ex(), ey());
    // glue c2's edge (0->1) onto c1's edge (0->1): result is a 4-gon
    auto g = glue(c1, 0, 1, c2, 0, 1);
    CHECK(g.complex.valid());
    CHECK(g.complex.total_area() == doctest::Approx(kPi).epsilon(1e-10));
    // merged endpoints: angle pi/2 + pi/2 = pi
    CHECK(g.complex.vertex_angle(g.map1[0]) == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(g.complex.vertex_angle(g.map1[1]) == doctest::Approx(kPi).epsilon(1e-9));
    // the other two corners survive with angle pi/2
    CHECK(g.complex.vertex_angle(g.map1[2]) == doctest::Approx(kPi / 2).epsilon(1e-9));
    CHECK(g.complex.vertex_angle(g.map2[2]) == doctest::Approx(kPi / 2).epsilon(1e-9));
    // development re-seated to the far side: c2's apex lands opposite ey
    CHECK(dist(g.complex.pos(g.map2[2]), ey().antipode()) < 1e-9);
}

TEST_CASE("glue rejects length mismatch") {
    auto c1 = one_triangle(ez(), ex(), ey());
    // a triangle whose first edge is shorter than pi/2
    UnitVec b1 = walk(ez(), tangent_toward(ez(), ex()), 1.0);
    auto c2 = one_triangle(ez(), b1, ey());
    CHECK_THROWS_AS(glue(c1, 0, 1, c2, 0, 1), LengthMismatch);
}

TEST_CASE("self glue produces NotDiskResult") {
    // mismatched developments are rejected outright
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vs = b.add_vertex(VertexRole::Completion, ez().antipode());
    b.add_triangle(vz, vx, vy);
    b.add_triangle(vy, vx, vs);
    auto c = b.build();
    CHECK_THROWS_AS(glue_self(c, vz, vx, vs, vy), LengthMismatch);

    // a slit sphere's two boundary copies develop identically; identifying
    // them seals the slit into a closed sphere, which is not a disk
    auto msh = meshing::slit_sphere_at(ez(), ex(), 1.0);
    CHECK_THROWS_AS(glue_self(msh.complex, msh.corner_a, msh.corner_b, msh.corner_b,
                              msh.corner_a),
                    NotDiskResult);
}

TEST_CASE("split boundary edge keeps the metric valid") {
    auto c = one_triangle(ez(), ex(), ey());
    UnitVec mid = slerp(ex(), ey(), 0.25);
    auto r = split_boundary_edge(c, 1, 2, mid);
    CHECK(r.complex.valid());
    CHECK(r.complex.total_area() == doctest::Approx(kPi / 2).epsilon(1e-10));
    CHECK(r.complex.vertex_count() == 4);
    CHECK(r.complex.triangle_count() == 2);
    // the new vertex is a straight boundary point
    VertexId m = r.vmap.back();
    CHECK(r.complex.role(m) == VertexRole::EdgeMark);
    CHECK(r.complex.vertex_angle(m) == doctest::Approx(kPi).epsilon(1e-9));
}

TEST_CASE("cut square along traced diagonal recovers two octants") {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vs = b.add_vertex(VertexRole::Completion, ez().antipode());
    b.add_triangle(vz, vx, vy);
    b.add_triangle(vy, vx, vs);
    auto c = b.build();

    auto tr = trace_geodesic(c, vz, kPi / 4);
    REQUIRE(tr.hit.kind == GeodesicHit::Kind::VertexHit);
    REQUIRE(tr.hit.vertex == vs);

    auto cut = cut_along(c, tr);
    CHECK(cut.left.valid());
    CHECK(cut.right.valid());
    CHECK(cut.left.total_area() + cut.right.total_area() ==
          doctest::Approx(kPi).epsilon(1e-9));
    // angle at the source splits as theta | alpha - theta
    CHECK(cut.left.vertex_angle(cut.lmap[vz]) + cut.right.vertex_angle(cut.rmap[vz]) ==
          doctest::Approx(kPi / 2).epsilon(1e-9));
    // cut path runs source .. target in both halves
    REQUIRE(cut.lcut.size() >= 2);
    CHECK(cut.lcut.front() == cut.lmap[vz]);
    CHECK(cut.lcut.back() == cut.lmap[vs]);
    CHECK(cut.rcut.front() == cut.rmap[vz]);
    CHECK(cut.rcut.back() == cut.rmap[vs]);
    // both halves keep full corners elsewhere
    CHECK(cut.left.vertex_angle(cut.lmap[vy]) == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(cut.right.vertex_angle(cut.rmap[vx]) == doctest::Approx(kPi).epsilon(1e-9));
}

TEST_CASE("cut along an existing interior edge") {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vs = b.add_vertex(VertexRole::Completion, ez().antipode());
    b.add_triangle(vz, vx, vy);
    b.add_triangle(vy, vx, vs);
    auto c = b.build();
    // from vx, the direction along the interior edge (vx, vy):
    // fan at vx starts at outgoing boundary edge vx->vs
    double theta = corner_angle(ex(), ez().antipode().vec().x == 0 ? ez().antipode() : ez().antipode(), ey());
    theta = corner_angle(ex(), ez().antipode(), ey());
    auto tr = trace_geodesic(c, vx, theta);
    REQUIRE(tr.hit.kind == GeodesicHit::Kind::VertexHit);
    REQUIRE(tr.hit.vertex == vy);
    CHECK(tr.hit.length == doctest::Approx(kPi / 2).epsilon(1e-9));

    auto cut = cut_along(c, tr);
    CHECK(cut.left.valid());
    CHECK(cut.right.valid());
    CHECK(cut.left.triangle_count() == 1);
    CHECK(cut.right.triangle_count() == 1);
    CHECK(cut.left.total_area() + cut.right.total_area() ==
          doctest::Approx(kPi).epsilon(1e-9));
}

TEST_CASE("glue then cut round-trips area") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        // two random small triangles sharing an edge length
        UnitVec a = oracles::random_unit(rng);
        UnitVec dir = UnitVec(a.cross(oracles::random_unit(rng)));
        double L = 0.4 + 0.2 * (trial % 5);
        UnitVec b1 = walk(a, tangent_toward(a, dir), L);
        // apexes on either side
        Vec3 t = tangent_toward(a, b1);
        Vec3 nrm = a.vec().cross(t);
        UnitVec apex1(a.vec() * 0.4 + b1.vec() * 0.4 + nrm * 0.7);
        auto c1 = one_triangle(a, b1, apex1);
        if (!c1.valid()) continue;
        auto c2 = one_triangle(a, b1, apex1);
        auto g = glue(c1, 0, 1, c2, 0, 1);
        REQUIRE(g.complex.valid());
        CHECK(g.complex.total_area() ==
              doctest::Approx(c1.total_area() * 2).epsilon(1e-9));
    }
}

TEST_CASE("flip rejects a non-convex quad") {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vw = b.add_vertex(VertexRole::Completion, UnitVec(1, 1, 1)); // reflex
    b.add_triangle(vz, vx, vw);
    b.add_triangle(vz, vw, vy);
    auto c = b.build();
    REQUIRE(c.valid());
    CHECK_THROWS_AS(flip_edge(c, vz, vw), ChartDegeneracy);
}

TEST_CASE("flip interior edge preserves metric") {
    MetricComplexBuilder b;
    VertexId vz = b.add_vertex(VertexRole::Completion, ez());
    VertexId vx = b.add_vertex(VertexRole::Completion, ex());
    VertexId vy = b.add_vertex(VertexRole::Completion, ey());
    VertexId vw = b.add_vertex(VertexRole::Completion, UnitVec(1, 1, -0.2));
    b.add_triangle(vz, vx, vw);
    b.add_triangle(vz, vw, vy);
    auto c = b.build();
    REQUIRE(c.valid());
    double area = c.total_area();
    auto f = flip_edge(c, vz, vw);
    CHECK(f.valid());
    CHECK(f.total_area() == doctest::Approx(area).epsilon(1e-10));
    CHECK(f.edge(vx, vy) != nullptr);
    CHECK(f.edge(vz, vw) == nullptr);
    // angles at the corners are preserved (same metric, new triangulation)
    CHECK(f.vertex_angle(vz) == doctest::Approx(c.vertex_angle(vz)).epsilon(1e-9));
    CHECK(f.vertex_angle(vw) == doctest::Approx(c.vertex_angle(vw)).epsilon(1e-9));
}

TEST_CASE("remove straight boundary vertex") {
    auto c0 = one_triangle(ez(), ex(), ey());
    UnitVec mid = slerp(ex(), ey(), 0.5);
    auto r = split_boundary_edge(c0, 1, 2, mid);
    REQUIRE(r.complex.valid());
    VertexId m = r.vmap.back();
    auto rem = remove_boundary_vertex(r.complex, m);
    CHECK(rem.complex.valid());
    CHECK(rem.complex.vertex_count() == 3);
    CHECK(rem.complex.total_area() == doctest::Approx(kPi / 2).epsilon(1e-9));
}
