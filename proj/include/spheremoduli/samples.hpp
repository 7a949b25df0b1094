#pragma once

#include "spheremoduli/moduli.hpp"

namespace spheremoduli::samples {

inline KPointMetric octant_metric() {
    auto t = make_piece(PieceSpec::small_triangle(ez(), ex(), ey()));
    return attach_rays(KGon{t.complex, t.corners});
}

inline KPointMetric family_metric(int k, double n) {
    return attach_rays(example_family(k, n));
}

inline KPointMetric hemisphere_metric(int k) {
    if (k < 3) throw ParamOutOfRange("need k >= 3");
    std::vector<double> az;
    for (int i = 0; i < k; ++i) az.push_back(kTwoPi * i / k + 0.1);
    auto p = make_piece(PieceSpec::hemisphere(az));
    return attach_rays(KGon{p.complex, p.corners});
}

// Equatorial metric with decomposition number m: a hemisphere whose corners
// sit on its equator, plus a chain of m slit spheres glued inside one
// diagonal; the innermost sphere carries one completion mark on its free slit
// copy so the chain stays interior to the truncation.
inline KPointMetric equatorial_metric(int m, double gap = 1.1) {
    auto hemi = make_piece(PieceSpec::hemisphere({0.0, gap, 2.6, 4.4}));
    if (m == 0) return attach_rays(KGon{hemi.complex, hemi.corners});
    std::vector<Piece> pieces = {hemi};
    std::vector<Gluing> gluings;
    for (int j = 0; j < m; ++j) {
        Piece s;
        if (j + 1 == m) {
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
        int prev = j == 0 ? 0 : j;
        int prev_edge = j == 0 ? 0 : (int)pieces[prev].corners.size() - 1;
        gluings.push_back({prev, prev_edge, j + 1, j + 1 == m ? 2 : 0});
    }
    return attach_rays(assemble(pieces, gluings));
}

// The six-point metric of the decomposition figure: a central embedded
// concave 4-gon, one midsegment of two slit spheres ending in a triangle, a
// second midsegment of one slit sphere ending in another triangle.
inline KPointMetric six_point_metric() {
    std::vector<UnitVec> quad;
    for (double az : {0.3, 1.7, 3.1, 4.7}) {
        double col = 0.5 + 0.08 * std::sin(az);
        quad.push_back(UnitVec(std::sin(col) * std::cos(az), std::sin(col) * std::sin(az),
                               std::cos(col)));
    }
    std::vector<UnitVec> cc(quad.rbegin(), quad.rend());
    auto c4 = make_piece(PieceSpec::concave(cc));
    double L0 = dist(cc[0], cc[1]);
    double L1 = dist(cc[1], cc[2]);
    auto s1 = make_piece(PieceSpec::slit_sphere(L0));
    auto s2 = make_piece(PieceSpec::slit_sphere(L0));
    auto s3 = make_piece(PieceSpec::slit_sphere(L1));
    auto apex = [](const UnitVec& a, const UnitVec& b, double w, double h) {
        Vec3 t = tangent_toward(a, b);
        Vec3 nrm = a.vec().cross(t);
        return UnitVec(a.vec() * w + b.vec() * w + nrm * h);
    };
    auto t1 = make_piece(PieceSpec::small_triangle(cc[0], cc[1], apex(cc[0], cc[1], 0.35, 0.75)));
    auto t2 = make_piece(PieceSpec::small_triangle(cc[1], cc[2], apex(cc[1], cc[2], 0.3, 0.8)));
    auto g = assemble({c4, s1, s2, t1, s3, t2},
                      {{0, 0, 1, 0}, {1, 1, 2, 0}, {2, 1, 3, 0}, {0, 1, 4, 0}, {4, 1, 5, 0}});
    return attach_rays(g);
}

} // namespace spheremoduli::samples
