#include "doctest.h"

#include "spheremoduli/moduli.hpp"
#include "oracles.hpp"

using namespace spheremoduli;

namespace {

KPointMetric octant_metric() {
    auto t = make_piece(PieceSpec::small_triangle(ez(), ex(), ey()));
    return attach_rays(KGon{t.complex, t.corners});
}

// equatorial metric: hemisphere with `extra_marks` on the long side plus a
// chain of m slit spheres hanging inside the diagonal (0 .. gap), the last
// sphere carrying one completion mark so the chain stays interior
KPointMetric equatorial_with_m(int m) {
    double gap = 1.1; // diagonal length
    auto hemi = make_piece(PieceSpec::hemisphere({0.0, gap, 2.6, 4.4}));
    // hemisphere corners: A at az 0, B at az gap, marks at 2.6 and 4.4
    if (m == 0) return attach_rays(KGon{hemi.complex, hemi.corners});
    std::vector<Piece> pieces = {hemi};
    std::vector<Gluing> gluings;
    for (int j = 0; j < m; ++j) {
        Piece s;
        if (j + 1 == m) {
            // marked final sphere: one extra completion vertex on its free copy
            auto msh = meshing::slit_sphere_at(UnitVec(1, 0, 0),
                                               UnitVec(std::cos(gap), std::sin(gap), 0),
                                               gap, {gap / 2}, {});
            MetricComplexBuilder b;
            for (VertexId v = 0; v < msh.complex.vertex_count(); ++v)
                b.add_vertex(msh.complex.role(v), msh.complex.pos(v));
            b.set_role(msh.marks_a[0], VertexRole::Completion);
            for (const auto& tr : msh.complex.triangles())
                b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
            s.complex = b.build();
            s.spec = PieceSpec::slit_sphere(gap);
            s.corners = {msh.corner_a, msh.marks_a[0], msh.corner_b};
        } else {
            s = make_piece(PieceSpec::slit_sphere(gap));
        }
        pieces.push_back(s);
        // chain: hemisphere edge 0 - sphere - sphere - ...
        int prev = j == 0 ? 0 : j;
        int prev_edge = j == 0 ? 0 : (int)pieces[prev].corners.size() - 1;
        gluings.push_back({prev, prev_edge, j + 1, j + 1 == m ? 2 : 0});
    }
    auto g = assemble(pieces, gluings);
    return attach_rays(g);
}

} // namespace

TEST_CASE("project_tuple of the octant metric") {
    auto d = octant_metric();
    auto t = project_tuple(d);
    REQUIRE(t.k() == 3);
    // canonical: p1 at north, p2 on the x>0 meridian
    CHECK(same_point(t.points[0], ez(), 1e-12));
    CHECK(std::fabs(t.points[1].y) < 1e-12);
    // pairwise distances pi/2
    for (int i = 0; i < 3; ++i)
        CHECK(dist(t.points[i], t.points[(i + 1) % 3]) == doctest::Approx(kPi / 2));
}

TEST_CASE("project_tuple rejects alternating tuples") {
    std::vector<UnitVec> alt = {ex(), ey(), ex(), ey()};
    CHECK_THROWS_AS(make_ktuple(alt), InvalidTuple);
}

TEST_CASE("necksizes: octant passes all inequalities") {
    auto rep = necksizes(octant_metric());
    REQUIRE(rep.necksizes.size() == 3);
    for (double n : rep.necksizes) CHECK(n == doctest::Approx(kPi / 2));
    CHECK(rep.pass());
    CHECK(rep.sum == doctest::Approx(3 * kPi / 2));
    CHECK(rep.sum_odd_applicable);
    CHECK(!rep.sum_odd_equality);
    CHECK(rep.cylindrical_count == 0);
}

TEST_CASE("necksize checker rejects the hypothetical (pi, pi, pi/2)") {
    auto rep = check_necksizes({kPi, kPi, kPi / 2});
    CHECK(!rep.pass());
    CHECK(!rep.sum_odd_pass); // 5pi/2 > 2pi
    CHECK(rep.cylindrical_count == 2);
    CHECK(!rep.cylindrical_ok); // 2 > k-2 = 1
}

TEST_CASE("necksize checker rejects (pi, pi, pi, pi) by strict even inequality") {
    auto rep = check_necksizes({kPi, kPi, kPi, kPi});
    CHECK(rep.sum_even_applicable);
    CHECK(!rep.sum_even_pass);
    CHECK(!rep.pass());
}

TEST_CASE("example family necksizes: equality for odd k") {
    for (int k : {3, 5, 7}) {
        auto d = attach_rays(example_family(k, 0.7));
        auto rep = necksizes(d);
        CHECK(rep.sum_odd_applicable);
        CHECK(rep.sum_odd_pass);
        CHECK(rep.sum_odd_equality); // sum = (k-1) pi, sharp
        CHECK(rep.pass());
        CHECK(rep.cylindrical_count == k - 2);
        CHECK(rep.cylindrical_ok);
    }
    for (int k : {4, 6, 8}) {
        auto d = attach_rays(example_family(k, 0.7));
        auto rep = necksizes(d);
        CHECK(rep.sum_even_applicable);
        CHECK(rep.sum_even_pass);
        CHECK(rep.pass());
        CHECK(rep.cylindrical_count == k - 2);
    }
}

TEST_CASE("vertex_distance") {
    CHECK(vertex_distance(octant_metric()) == doctest::Approx(kPi / 2));
    double n = 0.8;
    auto d = attach_rays(example_family(4, n));
    // corners develop to three points with pairwise distances n, pi-n, pi
    CHECK(vertex_distance(d) == doctest::Approx(std::min(n, kPi - n)).epsilon(1e-9));
    // random tuples: oracle = min over pairs
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<UnitVec> pts;
        for (int i = 0; i < 5; ++i) pts.push_back(oracles::random_unit(rng));
        KTuple t;
        try {
            t = make_ktuple(pts);
        } catch (const Error&) {
            continue;
        }
        KPointMetric dd;
        try {
            dd = build_metric_for_tuple(t);
        } catch (const Error&) {
            continue;
        }
        double expect = kPi;
        for (size_t i = 0; i < t.points.size(); ++i)
            for (size_t j = i + 1; j < t.points.size(); ++j)
                expect = std::min(expect, dist(t.points[i], t.points[j]));
        CHECK(vertex_distance(dd) == doctest::Approx(expect).epsilon(1e-7));
    }
}

TEST_CASE("equatorial profile m = 0..3") {
    for (int m = 0; m <= 3; ++m) {
        auto d = equatorial_with_m(m);
        REQUIRE(d.core.validate().empty());
        auto prof = equatorial_profile(d);
        CHECK(prof.m == m);
        CHECK(prof.hemisphere_piece >= 0);
        int hemis = 0;
        for (const auto& p : prof.decomposition.pieces)
            hemis += piece_isometric_to_hemisphere(p) ? 1 : 0;
        CHECK(hemis == 1);
    }
}

TEST_CASE("equatorial profile rejects antipodal pairs") {
    auto d = attach_rays(example_family(4, 0.9));
    CHECK_THROWS_AS(equatorial_profile(d), PiDiagonalPresent);
}

TEST_CASE("equatorial profile rejects non-equatorial tuples") {
    CHECK_THROWS_AS(equatorial_profile(octant_metric()), NotEquatorial);
}

TEST_CASE("slit_move: insert then remove at the same diagonal is the identity") {
    auto d1 = equatorial_with_m(1);
    auto ds1 = diagonals(d1.core);
    REQUIRE(!ds1.empty());
    const Diagonal* seam = nullptr;
    for (const auto& diag : ds1)
        if (!diag.family) seam = &diag;
    REQUIRE(seam != nullptr);
    // insert a sphere along the seam: m goes 1 -> 2
    auto d2 = slit_move(d1, *seam, SlitMoveDir::Insert);
    CHECK(tuples_equal(project_tuple(d2), project_tuple(d1), 1e-9));
    CHECK(equatorial_profile(d2).m == 2);
    // remove it again at the matching diagonal
    bool back_ok = false;
    for (const auto& diag : diagonals(d2.core)) {
        if (diag.family || std::fabs(diag.length - seam->length) > 1e-9) continue;
        try {
            auto back = slit_move(d2, diag, SlitMoveDir::Remove);
            if (isometric(back, d1, 1e-7)) back_ok = true;
        } catch (const NoSlitSphereAtDiagonal&) {
        }
        if (back_ok) break;
    }
    CHECK(back_ok);
}

TEST_CASE("slit_move remove migrates marks; span insert restores them") {
    auto d1 = equatorial_with_m(1);
    auto ds1 = diagonals(d1.core);
    REQUIRE(!ds1.empty());
    KPointMetric removed = slit_move(d1, ds1.front(), SlitMoveDir::Remove);
    CHECK(equatorial_profile(removed).m == 0);
    CHECK(tuples_equal(project_tuple(removed), project_tuple(d1), 1e-9));
    // the removed metric is the bare hemisphere over the same tuple
    CHECK(removed.core.area() == doctest::Approx(kTwoPi).epsilon(1e-8));
    // re-insert over the span corner 0 .. corner 2 (through the migrated mark)
    auto back = slit_insert_at_edge_span(removed, 0, 2);
    CHECK(tuples_equal(project_tuple(back), project_tuple(d1), 1e-9));
    CHECK(equatorial_profile(back).m == 1);
    CHECK(isometric(back, d1, 1e-7));
}

TEST_CASE("slit_move remove fails on diagonals without flush spheres") {
    // convex square: diagonals bounded by two triangles
    std::vector<UnitVec> pts;
    for (double az : {0.25, 1.8, 3.3, 4.9}) {
        double col = 0.6;
        pts.push_back(UnitVec(std::sin(col) * std::cos(az), std::sin(col) * std::sin(az),
                              std::cos(col)));
    }
    auto t1 = make_piece(PieceSpec::small_triangle(pts[0], pts[1], pts[2]));
    auto t2 = make_piece(PieceSpec::small_triangle(pts[0], pts[2], pts[3]));
    auto g = assemble({t1, t2}, {{0, 2, 1, 0}});
    auto d = attach_rays(g);
    auto ds = diagonals(d.core);
    REQUIRE(!ds.empty());
    CHECK_THROWS_AS(slit_move(d, ds.front(), SlitMoveDir::Remove), NoSlitSphereAtDiagonal);
}

TEST_CASE("telescope: monotone removals to m = 0") {
    for (int m = 0; m <= 3; ++m) {
        auto d = equatorial_with_m(m);
        auto res = telescope(d);
        REQUIRE((int)res.m_values.size() == m + 1);
        for (int j = 0; j <= m; ++j) CHECK(res.m_values[j] == m - j);
        // tuple is fixed throughout
        auto t0 = project_tuple(d);
        for (const auto& stage : res.stages)
            CHECK(tuples_equal(project_tuple(stage), t0, 1e-9));
    }
}

TEST_CASE("build_metric_for_tuple round-trips random tuples") {
    std::mt19937_64 rng(2024);
    int done = 0, attempts = 0;
    while (done < 120 && attempts < 400) {
        ++attempts;
        int k = 3 + (int)(rng() % 5); // 3..7
        std::vector<UnitVec> pts;
        for (int i = 0; i < k; ++i) pts.push_back(oracles::random_unit(rng));
        KTuple t;
        try {
            t = make_ktuple(pts);
        } catch (const Error&) {
            continue;
        }
        auto d = build_metric_for_tuple(t);
        REQUIRE(d.core.validate().empty());
        auto t2 = project_tuple(d);
        REQUIRE(t2.k() == k);
        for (int i = 0; i < k; ++i) CHECK(dist(t.points[i], t2.points[i]) < 1e-9);
        ++done;
    }
    CHECK(done >= 120);
}

TEST_CASE("build_metric_for_tuple: octant triple") {
    auto t = make_ktuple({ez(), ex(), ey()});
    auto d = build_metric_for_tuple(t);
    CHECK(d.k() == 3);
    CHECK(d.core.area() == doctest::Approx(kPi / 2).epsilon(1e-9));
    CHECK(isometric(d, octant_metric(), 1e-7));
}

TEST_CASE("build_metric_for_tuple: clockwise triple gives the concave side") {
    auto t = make_ktuple({ez(), ey(), ex()}); // negatively oriented octant corners
    auto d = build_metric_for_tuple(t);
    CHECK(d.core.area() == doctest::Approx(4 * kPi - kPi / 2).epsilon(1e-8));
    CHECK(tuples_equal(project_tuple(d), t, 1e-9));
}

TEST_CASE("lift of a constant path is constant") {
    auto d = octant_metric();
    std::vector<UnitVec> pts;
    for (VertexId v : d.core.corners) pts.push_back(d.core.complex.pos(v));
    std::vector<std::vector<UnitVec>> path(5, pts);
    auto lifted = lift_path(d, path);
    REQUIRE(lifted.size() == 5);
    for (const auto& stage : lifted) {
        CHECK(isometric(stage, d, 1e-9));
        CHECK(tuples_equal(project_tuple(stage), project_tuple(d), 1e-12));
    }
}

TEST_CASE("lift of a small rotation path tracks the tuple") {
    auto d = octant_metric();
    std::vector<UnitVec> pts;
    for (VertexId v : d.core.corners) pts.push_back(d.core.complex.pos(v));
    std::vector<std::vector<UnitVec>> path;
    int steps = 24;
    for (int j = 0; j <= steps; ++j) {
        // move p1 along a small circle; p2, p3 fixed
        double s = 0.35 * j / steps;
        Rotation R = Rotation::about_axis(ey(), s);
        path.push_back({R.apply(pts[0]), pts[1], pts[2]});
    }
    auto lifted = lift_path(d, path);
    REQUIRE(lifted.size() == path.size());
    for (size_t j = 0; j < path.size(); ++j) {
        auto tj = project_tuple(lifted[j]);
        auto expect = make_ktuple(path[j]);
        CHECK(tuples_equal(tj, expect, 1e-7));
        CHECK(lifted[j].core.validate().empty());
    }
}

TEST_CASE("d4 coords: chart values") {
    // (p1, p2, p3, p4) = (1, 2, 0, inf)
    auto tup = make_ktuple(d4::basepoint_tuple());
    auto co = d4_coords(tup);
    CHECK(!co.z.infinite);
    CHECK(co.z.re == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::fabs(co.z.im) < 1e-9);
    CHECK(co.t == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-9));
}

TEST_CASE("d4 coords on the gamma arcs") {
    // (0, p2, 0, inf): p1 = p3 -> t = -log(1 + 1/|p2|), z = 0
    double r2 = 2.0;
    std::vector<UnitVec> pts = {ez().antipode(), d4::chart_point(r2, 0), ez().antipode(),
                                ez()};
    // p1 == p3 coincident is allowed in T_4 (not T_4*): build the tuple raw
    KTuple t;
    t.points = canonical_rotation(pts).points;
    auto co = d4_coords(t);
    CHECK(co.z.abs() < 1e-9);
    CHECK(co.t == doctest::Approx(-std::log1p(1.0 / r2)).epsilon(1e-9));

    // (p1, inf, 0, inf): p2 = p4 -> t = log(1 + |p1|)
    double r1 = 1.5;
    std::vector<UnitVec> pts2 = {d4::chart_point(r1, 0), ez(), ez().antipode(), ez()};
    KTuple t2;
    t2.points = canonical_rotation(pts2).points;
    auto co2 = d4_coords(t2);
    CHECK(co2.z.abs() < 1e-9);
    CHECK(co2.t == doctest::Approx(std::log1p(r1)).epsilon(1e-9));
}

TEST_CASE("d4 coords requires an antipodal pair") {
    auto t = make_ktuple({ez(), ex(), ey(), UnitVec(1, 1, 1)});
    CHECK_THROWS_AS(d4_coords(t), NotAntipodalPair);
}

TEST_CASE("d4 basepoint labels") {
    for (long n : {1L, -1L, 3L, -3L, 5L}) {
        auto d = d4::basepoint_metric(n);
        CHECK(d.core.validate().empty());
        CHECK(d4_label(d).n == n);
        // two 3-gons plus (|n|-1)/2 slit spheres, each worth 4pi
        double spheres = 2 + (std::labs(n) - 1) / 2.0;
        CHECK(d.core.area() == doctest::Approx(4 * kPi * spheres).epsilon(1e-8));
    }
}

TEST_CASE("d4 label is truncation independent") {
    auto d = d4::basepoint_metric(1);
    auto fat = absorb_from_ray(absorb_from_ray(absorb_from_ray(d, 0), 2), 3);
    CHECK(d4_label(fat).n == 1);
    auto fat2 = absorb_from_ray(fat, 1);
    CHECK(d4_label(fat2).n == 1);
}

TEST_CASE("d4 monodromy: beta shifts the label by -2, gamma fixes it") {
    auto d1 = d4::basepoint_metric(1);
    auto beta = d4::loop_beta(256);
    auto lifted = lift_path(d1, beta);
    auto dn = lifted.back();
    CHECK(tuples_equal(project_tuple(dn), project_tuple(d1), 1e-7));
    long n_after = d4_label(dn).n;
    CHECK(n_after == -1);

    auto gamma = d4::loop_gamma(256);
    auto gend = d4::lift_loop(d1, gamma);
    CHECK(d4_label(gend).n == 1);
    CHECK(isometric(gend, d1, 1e-7));
}
