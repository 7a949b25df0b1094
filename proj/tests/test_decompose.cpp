#include "doctest.h"

#include "spheremoduli/decompose.hpp"
#include "oracles.hpp"

using namespace spheremoduli;

namespace {

KGon octant_kgon() {
    auto t = make_piece(PieceSpec::small_triangle(ez(), ex(), ey()));
    return KGon{t.complex, t.corners};
}

// convex square: four points around the north pole, all edges < pi/2
KGon convex_square() {
    std::vector<UnitVec> pts;
    for (double az : {0.25, 1.8, 3.3, 4.9}) {
        double col = 0.6 + 0.07 * std::cos(az * 2);
        pts.push_back(UnitVec(std::sin(col) * std::cos(az), std::sin(col) * std::sin(az),
                              std::cos(col)));
    }
    auto t1 = make_piece(PieceSpec::small_triangle(pts[0], pts[1], pts[2]));
    auto t2 = make_piece(PieceSpec::small_triangle(pts[0], pts[2], pts[3]));
    return assemble({t1, t2}, {{0, 2, 1, 0}});
}

int count_type(const Decomposition& dec, PieceType t) {
    int n = 0;
    for (const auto& p : dec.pieces) n += p.type == t ? 1 : 0;
    return n;
}

} // namespace

TEST_CASE("small triangle has no diagonals") {
    auto g = octant_kgon();
    CHECK(diagonals(g).empty());
    CHECK(classify_no_diagonal(g) == NoDiagonalClass::SmallTriangle);
}

TEST_CASE("convex square has exactly two diagonals") {
    auto g = convex_square();
    REQUIRE(g.validate().empty());
    auto ds = diagonals(g);
    // brute-force check against the shooting oracle on each corner pair
    CHECK(ds.size() == 2);
    for (const auto& d : ds) {
        CHECK(!d.family);
        CHECK(!d.consecutive(g.k()));
        CHECK(d.length < kPi);
        // soundness: re-trace the representative
        auto tr = trace_geodesic(g.complex, d.from, d.theta);
        CHECK(tr.hit.kind == GeodesicHit::Kind::VertexHit);
        CHECK(tr.hit.vertex == d.to);
        CHECK(tr.hit.length == doctest::Approx(d.length).epsilon(1e-9));
    }
}

TEST_CASE("lune of angle pi/3 reports one family of measure pi/3") {
    auto p = make_piece(PieceSpec::marked_lune(kPi / 3, {}));
    KGon g{p.complex, p.corners};
    auto ds = diagonals(g);
    REQUIRE(ds.size() == 1);
    REQUIRE(ds[0].family.has_value());
    double measure = ds[0].family->second - ds[0].family->first;
    CHECK(measure == doctest::Approx(kPi / 3).epsilon(1e-6));
    CHECK(ds[0].length == doctest::Approx(kPi));
}

TEST_CASE("slit sphere classification") {
    auto p = make_piece(PieceSpec::slit_sphere(1.1));
    KGon g{p.complex, p.corners};
    CHECK(diagonals(g).empty());
    CHECK(classify_no_diagonal(g) == NoDiagonalClass::ConcaveEmbedded);
}

TEST_CASE("hemisphere with marks classifies as hemisphere-concave") {
    auto p = make_piece(PieceSpec::hemisphere({0.1, 1.3, 2.8, 4.5}));
    KGon g{p.complex, p.corners};
    CHECK(diagonals(g).empty());
    CHECK(classify_no_diagonal(g) == NoDiagonalClass::HemisphereConcave);
}

TEST_CASE("classify_no_diagonal rejects metrics with diagonals") {
    auto g = convex_square();
    CHECK_THROWS_AS(classify_no_diagonal(g), HasDiagonal);
}

TEST_CASE("decompose convex square into two small triangles") {
    auto g = convex_square();
    auto dec = decompose_core(g);
    REQUIRE(dec.pieces.size() == 2);
    CHECK(dec.pieces[0].type == PieceType::SmallTriangle);
    CHECK(dec.pieces[1].type == PieceType::SmallTriangle);
    REQUIRE(dec.dual_edges.size() == 1);
    CHECK(dec.piece_area_sum() == doctest::Approx(g.area()).epsilon(1e-9));
    // cut-and-reassemble is isometric to the input
    auto re = assemble_decomposition(dec);
    CHECK(isometric(attach_rays(re), attach_rays(g), 1e-7));
}

TEST_CASE("decompose a chain of slit spheres") {
    auto s1 = make_piece(PieceSpec::slit_sphere(0.9));
    auto s2 = make_piece(PieceSpec::slit_sphere(0.9));
    auto s3 = make_piece(PieceSpec::slit_sphere(0.9));
    auto g = assemble({s1, s2, s3}, {{0, 1, 1, 0}, {1, 1, 2, 0}});
    auto dec = decompose_core(g);
    CHECK(dec.pieces.size() == 3);
    for (const auto& p : dec.pieces) {
        CHECK(p.type == PieceType::SlitSphere);
        CHECK(p.param == doctest::Approx(0.9).epsilon(1e-9));
    }
    CHECK(dec.dual_edges.size() == 2);
    CHECK(dec.piece_area_sum() == doctest::Approx(12 * kPi).epsilon(1e-8));
}

TEST_CASE("decompose octant + slit sphere assembly") {
    auto t = make_piece(PieceSpec::small_triangle(ez(), ex(), ey()));
    auto s = make_piece(PieceSpec::slit_sphere(kPi / 2));
    auto g = assemble({t, s}, {{0, 0, 1, 0}});
    auto dec = decompose_core(g);
    REQUIRE(dec.pieces.size() == 2);
    CHECK(count_type(dec, PieceType::SmallTriangle) == 1);
    CHECK(count_type(dec, PieceType::SlitSphere) == 1);
    CHECK(dec.piece_area_sum() == doctest::Approx(g.area()).epsilon(1e-9));
    auto re = assemble_decomposition(dec);
    CHECK(isometric(attach_rays(re), attach_rays(g), 1e-7));
}

TEST_CASE("small truncation round-trips a clean metric") {
    auto g = convex_square();
    auto d = attach_rays(g);
    auto tr = small_truncation(d);
    for (int r : tr.removed) CHECK(r == 0);
    CHECK(isometric(tr.metric, d, 1e-9));
}

TEST_CASE("small truncation peels a boundary slit sphere") {
    // hemisphere 3-gon with an extra slit sphere glued on one boundary edge
    auto hemi = make_piece(PieceSpec::hemisphere({0.0, 2.0, 4.0}));
    auto s = make_piece(PieceSpec::slit_sphere(2.0));
    auto g = assemble({hemi, s}, {{0, 0, 1, 0}});
    REQUIRE(g.validate().empty());
    auto d = attach_rays(g);
    auto tr = small_truncation(d);
    CHECK(tr.removed[0] == 1);
    CHECK(tr.removed[1] == 0);
    CHECK(tr.removed[2] == 0);
    CHECK(tr.metric.core.area() == doctest::Approx(2 * kPi).epsilon(1e-8));
    // the bare hemisphere comes back
    auto bare = attach_rays(KGon{hemi.complex, hemi.corners});
    CHECK(isometric(tr.metric, bare, 1e-7));
}

TEST_CASE("small truncation of the example family uses the canonical pi cut") {
    auto g = example_family(4, 0.9);
    auto d = attach_rays(g);
    auto tr = small_truncation(d);
    for (int r : tr.removed) CHECK(r == 0);
    auto lens = tr.metric.core.edge_lengths();
    CHECK(lens[0] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(lens[1] == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(lens[2] == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(lens[3] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("absorb then truncate recovers the original") {
    auto g = convex_square();
    auto d = attach_rays(g);
    auto fat = absorb_from_ray(absorb_from_ray(d, 0), 2);
    auto tr = small_truncation(fat);
    CHECK(tr.removed[0] == 1);
    CHECK(tr.removed[2] == 1);
    CHECK(isometric(tr.metric, d, 1e-7));
}

TEST_CASE("decompose_full: octant metric has one triangle and three rays") {
    auto d = attach_rays(octant_kgon());
    auto dec = decompose_full(d);
    CHECK(count_type(dec, PieceType::SmallTriangle) == 1);
    CHECK(count_type(dec, PieceType::Ray) == 3);
    CHECK((int)dec.pieces.size() == 4);
    CHECK(dec.dual_edges.size() == 3);
}

TEST_CASE("fig-ex6pt: 2 triangles, 3 slit spheres, 1 concave 4-gon, 6 rays") {
    // central embedded concave 4-gon (complement of a convex quadrilateral),
    // one chain of two slit spheres ending in a triangle, one chain of one
    // slit sphere ending in a triangle
    std::vector<UnitVec> quad;
    std::vector<double> azs = {0.3, 1.7, 3.1, 4.7};
    for (double az : azs) {
        double col = 0.5 + 0.08 * std::sin(az);
        quad.push_back(UnitVec(std::sin(col) * std::cos(az), std::sin(col) * std::sin(az),
                               std::cos(col)));
    }
    std::vector<UnitVec> cc(quad.rbegin(), quad.rend());
    auto c4 = make_piece(PieceSpec::concave(cc));
    // edge 0 of the concave piece runs cc[0] -> cc[1] = quad[3] -> quad[2]
    double L0 = dist(cc[0], cc[1]);
    double L1 = dist(cc[1], cc[2]);
    auto s1 = make_piece(PieceSpec::slit_sphere(L0));
    auto s2 = make_piece(PieceSpec::slit_sphere(L0));
    auto t1 = make_piece(PieceSpec::small_triangle(
        ez(), ex(), UnitVec(0.3, 0.8, 0.52)));
    // triangle with one edge of length L0: construct explicitly
    {
        UnitVec a = cc[0], b = cc[1];
        Vec3 tdir = tangent_toward(a, b);
        Vec3 nrm = a.vec().cross(tdir);
        UnitVec apex(a.vec() * 0.35 + b.vec() * 0.35 + nrm * 0.75);
        t1 = make_piece(PieceSpec::small_triangle(a, b, apex));
    }
    auto t2 = make_piece(PieceSpec::small_triangle(cc[1], cc[2], [&] {
        UnitVec a = cc[1], b = cc[2];
        Vec3 tdir = tangent_toward(a, b);
        Vec3 nrm = a.vec().cross(tdir);
        return UnitVec(a.vec() * 0.3 + b.vec() * 0.3 + nrm * 0.8);
    }()));
    // tree: c4.e0 - s1 - s2 - t1 ; c4.e1 - s3 - t2
    auto s3 = make_piece(PieceSpec::slit_sphere(L1));
    auto g = assemble({c4, s1, s2, t1, s3, t2},
                      {{0, 0, 1, 0}, {1, 1, 2, 0}, {2, 1, 3, 0}, {0, 1, 4, 0}, {4, 1, 5, 0}});
    REQUIRE(g.validate().empty());
    CHECK(g.k() == 6);
    auto d = attach_rays(g);
    auto dec = decompose_full(d);
    CHECK(count_type(dec, PieceType::SmallTriangle) == 2);
    CHECK(count_type(dec, PieceType::SlitSphere) == 3);
    CHECK(count_type(dec, PieceType::ConcaveEmbedded) == 1);
    CHECK(count_type(dec, PieceType::Ray) == 6);
    CHECK(count_type(dec, PieceType::MarkedLune) == 0);
    CHECK(count_type(dec, PieceType::Hemisphere) == 0);
    CHECK((int)dec.pieces.size() == 12);
}

namespace {

// Sweep oracle: classify the hit feature along a fine direction sweep and
// bisect every transition; vertex hits surface either directly or as the
// limit feature at a transition.
std::set<std::pair<int, int>> sweep_diagonal_pairs(const KGon& g, int samples) {
    std::set<std::pair<int, int>> pairs;
    auto corner_index = [&](VertexId v) {
        for (int cj = 0; cj < g.k(); ++cj)
            if (g.corners[cj] == v) return cj;
        return -1;
    };
    for (int ci = 0; ci < g.k(); ++ci) {
        VertexId v = g.corners[ci];
        double alpha = g.complex.vertex_angle(v);
        auto feature = [&](double th) -> std::pair<int, long> {
            // kind 0: vertex hit (id); 1: edge hit; 2: conjugate. The landing
            // triangle distinguishes sheets, so a diagonal flanked by
            // same-kind hits still produces a transition.
            try {
                auto tr = trace_geodesic(g.complex, v, th);
                long sheet = tr.steps.empty() ? -1 : (long)tr.steps.back().tri;
                if (tr.hit.kind == GeodesicHit::Kind::VertexHit)
                    return {0, tr.hit.vertex};
                if (tr.hit.kind == GeodesicHit::Kind::EdgeHit)
                    return {1, ((long)tr.hit.edge.first * 100000 + tr.hit.edge.second) *
                                   100000 +
                               sheet};
                return {2, sheet};
            } catch (const Error&) {
                return {3, 0};
            }
        };
        auto note = [&](const std::pair<int, long>& f) {
            if (f.first != 0) return;
            int cj = corner_index((VertexId)f.second);
            if (cj >= 0 && cj != ci) pairs.insert({std::min(ci, cj), std::max(ci, cj)});
        };
        double prev_th = alpha * 1e-7;
        auto prev = feature(prev_th);
        note(prev);
        for (int j = 1; j <= samples; ++j) {
            double th = alpha * (j == samples ? 1 - 1e-7 : (double)j / samples);
            auto cur = feature(th);
            note(cur);
            if (cur != prev) {
                double lo = prev_th, hi = th;
                auto flo = prev;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    auto fm = feature(mid);
                    note(fm);
                    if (fm == flo)
                        lo = mid;
                    else
                        hi = mid;
                }
                note(feature(0.5 * (lo + hi)));
            }
            prev = cur;
            prev_th = th;
        }
    }
    return pairs;
}

} // namespace

TEST_CASE("diagonal completeness against the sweep oracle") {
    std::vector<KGon> metrics;
    metrics.push_back(convex_square());
    {
        auto t = make_piece(PieceSpec::small_triangle(ez(), ex(), ey()));
        auto s = make_piece(PieceSpec::slit_sphere(kPi / 2));
        metrics.push_back(assemble({t, s}, {{0, 1, 1, 0}}));
    }
    {
        auto s1 = make_piece(PieceSpec::slit_sphere(1.3));
        auto s2 = make_piece(PieceSpec::slit_sphere(1.3));
        metrics.push_back(assemble({s1, s2}, {{0, 1, 1, 0}}));
    }
    {
        auto hemi = make_piece(PieceSpec::hemisphere({0.2, 1.5, 3.6}));
        auto s = make_piece(PieceSpec::slit_sphere(1.3));
        metrics.push_back(assemble({hemi, s}, {{0, 0, 1, 0}}));
    }
    for (const auto& g : metrics) {
        auto ds = diagonals(g);
        std::set<std::pair<int, int>> reported;
        for (const auto& d : ds)
            reported.insert({std::min(d.from_corner, d.to_corner),
                             std::max(d.from_corner, d.to_corner)});
        // sweep step 1e-4 rad, refined by bisection at every transition
        double max_alpha = 0;
        for (int ci = 0; ci < g.k(); ++ci)
            max_alpha = std::max(max_alpha, g.complex.vertex_angle(g.corners[ci]));
        auto swept = sweep_diagonal_pairs(g, (int)std::ceil(max_alpha / 1e-4));
        CHECK(reported == swept);
    }
}
