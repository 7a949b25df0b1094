#pragma once

#include <cstdint>
#include <cstdio>

#include "spheremoduli/decompose.hpp"

namespace spheremoduli {

// ---------------------------------------------------------------------------
// tuples
// ---------------------------------------------------------------------------

// Labelled k-tuple of sequentially distinct points modulo rotation, stored in
// canonical form (p1 at the north pole, first off-axis point on the {y=0,x>0}
// half-plane). Alternating even tuples (p,q,p,q,...) are excluded.
struct KTuple {
    std::vector<UnitVec> points;
    int k() const { return (int)points.size(); }
};

inline bool tuple_alternating(const std::vector<UnitVec>& pts, double tol) {
    if (pts.size() % 2 != 0 || pts.size() < 4) return false;
    for (size_t i = 2; i < pts.size(); ++i)
        if (!same_point(pts[i], pts[i - 2], tol)) return false;
    return true;
}

inline KTuple make_ktuple(const std::vector<UnitVec>& raw) {
    const double tol = geom_tolerance();
    if (raw.size() < 3) throw InvalidTuple("need k >= 3");
    for (size_t i = 0; i < raw.size(); ++i)
        if (same_point(raw[i], raw[(i + 1) % raw.size()], tol))
            throw InvalidTuple("consecutive points coincide");
    if (tuple_alternating(raw, tol))
        throw InvalidTuple("alternating tuple lies in the excluded set");
    KTuple t;
    t.points = canonical_rotation(raw).points;
    return t;
}

// Developed completion-vertex positions of a k-point metric, canonically
// rotated. For a valid metric the result always satisfies the tuple
// invariants; a violation signals a broken input representation.
inline KTuple project_tuple(const KPointMetric& d) {
    std::vector<UnitVec> pts;
    for (VertexId v : d.core.corners) pts.push_back(d.core.complex.pos(v));
    try {
        return make_ktuple(pts);
    } catch (const InvalidTuple& e) {
        throw InvalidMetric(e.what());
    } catch (const UnresolvedSymmetry& e) {
        throw InvalidMetric(e.what());
    }
}

inline bool tuples_equal(const KTuple& a, const KTuple& b, double tol = 1e-9) {
    if (a.k() != b.k()) return false;
    for (int i = 0; i < a.k(); ++i)
        if (dist(a.points[i], b.points[i]) > tol) return false;
    return true;
}

// ---------------------------------------------------------------------------
// necksizes and the odd-subset inequalities
// ---------------------------------------------------------------------------

struct InequalityResult {
    std::uint32_t subset; // bitmask over edge indices
    double lhs, rhs;
    bool pass;
};

struct NecksizeReport {
    std::vector<double> necksizes; // n[i] = dist(p_i, p_{i+1}), cyclic
    std::vector<InequalityResult> odd_subsets;
    bool all_subsets_pass = true;
    bool sum_odd_applicable = false; // k odd: sum <= (k-1) pi
    bool sum_odd_pass = true;
    bool sum_odd_equality = false;
    bool sum_even_applicable = false; // k >= 4 even: sum < k pi, strict
    bool sum_even_pass = true;
    int cylindrical_count = 0; // necksizes equal to pi
    bool cylindrical_ok = true;
    double sum = 0;

    bool pass() const {
        return all_subsets_pass && sum_odd_pass && sum_even_pass && cylindrical_ok;
    }
};

// Pure checker over a list of putative necksizes.
inline NecksizeReport check_necksizes(const std::vector<double>& n, double tol = 1e-9) {
    int k = (int)n.size();
    NecksizeReport rep;
    rep.necksizes = n;
    for (double v : n) {
        rep.sum += v;
        if (v >= kPi - tol) rep.cylindrical_count++;
    }
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        int bits = __builtin_popcount(mask);
        if (bits % 2 == 0) continue;
        double lhs = 0, rhs = (bits - 1) * kPi;
        for (int i = 0; i < k; ++i)
            (mask >> i & 1 ? lhs : rhs) += n[i];
        bool pass = lhs <= rhs + tol;
        rep.odd_subsets.push_back({mask, lhs, rhs, pass});
        rep.all_subsets_pass &= pass;
    }
    if (k % 2 == 1) {
        rep.sum_odd_applicable = true;
        rep.sum_odd_pass = rep.sum <= (k - 1) * kPi + tol;
        rep.sum_odd_equality = std::fabs(rep.sum - (k - 1) * kPi) <= tol;
    } else if (k >= 4) {
        rep.sum_even_applicable = true;
        rep.sum_even_pass = rep.sum < k * kPi - tol;
    }
    rep.cylindrical_ok = rep.cylindrical_count <= k - 2;
    return rep;
}

// Necksizes of a metric: the consecutive distances of its projected tuple
// (identical to the core edge lengths).
inline NecksizeReport necksizes(const KPointMetric& d, double tol = 1e-9) {
    std::vector<double> n;
    for (int i = 0; i < d.k(); ++i) n.push_back(d.core.edge_length(i));
    return check_necksizes(n, tol);
}

// Minimum spherical distance over pairs of distinct developed vertex images.
inline double vertex_distance(const KPointMetric& d) {
    double best = kPi;
    const auto& c = d.core.complex;
    for (size_t i = 0; i < d.core.corners.size(); ++i)
        for (size_t j = i + 1; j < d.core.corners.size(); ++j) {
            double dd = dist(c.pos(d.core.corners[i]), c.pos(d.core.corners[j]));
            if (dd > geom_tolerance()) best = std::min(best, dd);
        }
    return best;
}

// ---------------------------------------------------------------------------
// equatorial metrics: m(D) and telescoping
// ---------------------------------------------------------------------------

struct EquatorialProfile {
    int m = 0;               // slit-sphere pieces in the small truncation
    int hemisphere_piece = -1;
    Decomposition decomposition; // of the small truncation
    KPointMetric truncated;
};

// Membership in E_k: all developed vertices on one great circle, in strictly
// counterclockwise order with consecutive gaps in (0, pi).
inline bool equatorial_tuple(const std::vector<UnitVec>& pts, UnitVec* pole_out = nullptr,
                             double tol = 1e-7) {
    int k = (int)pts.size();
    UnitVec n = ez();
    bool have_n = false;
    for (int i = 0; i < k && !have_n; ++i) {
        Vec3 cr = pts[i].cross(pts[(i + 1) % k]);
        if (cr.norm() > 1e-6) {
            n = UnitVec(cr);
            have_n = true;
        }
    }
    if (!have_n) return false;
    for (const auto& p : pts)
        if (std::fabs(p.dot(n)) > tol) return false;
    // gaps around n in tuple order
    Vec3 e1 = pts[0].vec();
    Vec3 e2 = n.vec().cross(e1);
    auto az = [&](const UnitVec& p) {
        double a = std::atan2(p.vec().dot(e2), p.vec().dot(e1));
        return a < 0 ? a + kTwoPi : a;
    };
    double total = 0;
    for (int i = 0; i < k; ++i) {
        double gap = az(pts[(i + 1) % k]) - az(pts[i]);
        if (gap <= 0) gap += kTwoPi;
        if (gap <= tol || gap >= kPi - tol) return false;
        total += gap;
    }
    if (std::fabs(total - kTwoPi) > 1e-6) return false;
    if (pole_out) *pole_out = n;
    return true;
}

// A decomposition piece whose underlying metric is a slit sphere: either a
// bare 2-gon slit sphere or a concave piece of area 4pi whose extra corners
// are straight marks on the slit.
inline bool piece_isometric_to_slit_sphere(const DecompPiece& p) {
    if (p.type == PieceType::SlitSphere) return true;
    if (p.type != PieceType::ConcaveEmbedded) return false;
    if (std::fabs(p.area - 4 * kPi) > 1e-6) return false;
    KGon g{p.complex, p.corners};
    int reflex = 0, marks = 0;
    for (int i = 0; i < g.k(); ++i) {
        double a = g.corner_angle_at(i);
        if (std::fabs(a - kTwoPi) < 1e-7)
            ++reflex;
        else if (std::fabs(a - kPi) < 1e-7)
            ++marks;
        else
            return false;
    }
    return reflex == 2 && reflex + marks == g.k();
}

inline bool piece_isometric_to_hemisphere(const DecompPiece& p) {
    if (p.type == PieceType::Hemisphere) return true;
    if (std::fabs(p.area - kTwoPi) > 1e-6) return false;
    KGon g{p.complex, p.corners};
    for (int i = 0; i < g.k(); ++i)
        if (std::fabs(g.corner_angle_at(i) - kPi) > 1e-7) return false;
    return true;
}

// Lemma `equatorial`: under the preconditions the truncation decomposes as
// exactly one hemisphere plus m(D) pieces isometric to slit spheres, uniquely.
inline EquatorialProfile equatorial_profile(const KPointMetric& d) {
    std::vector<UnitVec> pts;
    for (VertexId v : d.core.corners) pts.push_back(d.core.complex.pos(v));
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            if (antipodal(pts[i], pts[j], 1e-9))
                throw PiDiagonalPresent("antipodal vertex pair admits a pi diagonal");
    if (!equatorial_tuple(pts))
        throw NotEquatorial("projected tuple is not equatorial counterclockwise");

    EquatorialProfile out;
    auto tr = small_truncation(d);
    out.truncated = tr.metric;
    out.decomposition = decompose_core(tr.metric.core);
    for (size_t i = 0; i < out.decomposition.pieces.size(); ++i) {
        const auto& p = out.decomposition.pieces[i];
        if (piece_isometric_to_hemisphere(p)) {
            if (out.hemisphere_piece != -1)
                throw InternalError("two hemisphere pieces in an equatorial metric");
            out.hemisphere_piece = (int)i;
        } else if (piece_isometric_to_slit_sphere(p)) {
            out.m++;
        } else {
            throw InternalError("unexpected piece type in an equatorial decomposition");
        }
    }
    if (out.hemisphere_piece == -1)
        throw InternalError("no hemisphere piece in an equatorial decomposition");
    return out;
}

// ---------------------------------------------------------------------------
// slit moves (deck transformations over a fixed tuple)
// ---------------------------------------------------------------------------

enum class SlitMoveDir { Insert, Remove };

namespace detail {

// rebuild the k-gon wrapper after surgery, preserving corner labels
inline KGon remap_kgon(const KGon& old, const MetricComplex& complex,
                       const std::vector<VertexId>& vmap) {
    KGon g;
    g.complex = complex;
    for (VertexId corner : old.corners) {
        if (vmap[corner] < 0) throw InternalError("corner lost in surgery");
        g.corners.push_back(vmap[corner]);
    }
    return g;
}

// Angle of the cut arc's initial direction at the image of the trace source,
// measured in the given complex's fan.
inline double cut_arc_angle(const MetricComplex& c, const std::vector<VertexId>& cutpath) {
    return azimuth_at(c, cutpath.front(), c.pos(cutpath[1]));
}

// Orient a cut path as a directed boundary sub-arc (disk on the left).
inline std::pair<VertexId, VertexId> boundary_arc_of(const MetricComplex& c,
                                                     const std::vector<VertexId>& path) {
    if (c.boundary_next(path[0]) == path[1]) return {path.front(), path.back()};
    return {path.back(), path.front()};
}

} // namespace detail

// Remove (excise) or insert one slit sphere along a diagonal. The projected
// tuple is unchanged: slit copies develop identically, so regluing reseats
// nothing.
inline KPointMetric slit_move(const KPointMetric& d, const Diagonal& diag,
                              SlitMoveDir dir) {
    const KGon& g = d.core;
    if (dir == SlitMoveDir::Insert) {
        auto cut = cut_along(g.complex, diag.trace);
        double len = diag.length;
        UnitVec A = g.complex.pos(diag.from);
        UnitVec mid = cut.left.pos(cut.lcut[cut.lcut.size() / 2]);
        auto sphere = meshing::slit_sphere_at(A, mid, len);
        // glue the sphere's copy A onto the left side's cut arc, then the
        // right side onto the remaining sphere boundary
        auto [lf, lt] = detail::boundary_arc_of(cut.left, cut.lcut);
        // sphere corner_a sits at the source position; match endpoints so the
        // re-seating rotation is the identity and the tuple stays fixed
        bool forward = same_point(cut.left.pos(lt), sphere.complex.pos(sphere.corner_b), 1e-7);
        VertexId s_from = forward ? sphere.corner_b : sphere.corner_a;
        VertexId s_to = forward ? sphere.corner_a : sphere.corner_b;
        auto g1 = glue(cut.left, lf, lt, sphere.complex, s_from, s_to);
        VertexId sa = g1.map2[s_to];
        VertexId sb = g1.map2[s_from];
        // free sphere boundary: the other slit copy, running s_to -> s_from
        auto [rf, rt] = detail::boundary_arc_of(cut.right, cut.rcut);
        auto g2 = glue(g1.complex, sa, sb, cut.right, rf, rt);
        KPointMetric out = d;
        KGon ng;
        ng.complex = g2.complex;
        for (VertexId corner : g.corners) {
            VertexId img = cut.lmap[corner] >= 0 ? g2.map1[g1.map1[cut.lmap[corner]]]
                                                 : g2.map2[cut.rmap[corner]];
            ng.corners.push_back(img);
        }
        out.core = ng;
        auto report = out.core.validate();
        if (!report.empty())
            throw InternalError("slit insert produced invalid core: " + report.front().kind);
        return out;
    }

    // Remove: find the slit sphere flush against the diagonal on either side.
    auto cut = cut_along(g.complex, diag.trace);
    for (int side = 0; side < 2; ++side) {
        const MetricComplex& S = side == 0 ? cut.left : cut.right;
        const std::vector<VertexId>& smap = side == 0 ? cut.lmap : cut.rmap;
        const std::vector<VertexId>& scut = side == 0 ? cut.lcut : cut.rcut;
        const MetricComplex& O = side == 0 ? cut.right : cut.left;
        const std::vector<VertexId>& omap = side == 0 ? cut.rmap : cut.lmap;
        const std::vector<VertexId>& ocut = side == 0 ? cut.rcut : cut.lcut;

        VertexId v = scut.front(), w = scut.back();
        // the parallel diagonal copy nearest the cut: trace 2pi inward from it
        double base = detail::cut_arc_angle(S, scut);
        double alpha = S.vertex_angle(v);
        double theta = -1;
        for (double cand : {base + kTwoPi, base - kTwoPi})
            if (cand > 1e-9 && cand < alpha - 1e-9) theta = cand;
        if (theta < 0) continue;
        TraceResult tr;
        if (!detail::trace_reaches(S, v, theta, w, &tr)) continue;
        if (std::fabs(tr.hit.length - diag.length) > 1e-7) continue;
        auto cut2 = cut_along(S, tr);
        // the slit sphere is the side of cut2 keeping the old cut arc; decide
        // combinatorially (both cut arcs develop onto the same great arc, so
        // positions cannot distinguish the sides)
        bool sphere_is_left;
        {
            VertexId a = scut[0], b2 = scut[1];
            bool lhas = cut2.lmap[a] >= 0 && cut2.lmap[b2] >= 0 &&
                        cut2.left.edge(cut2.lmap[a], cut2.lmap[b2]) != nullptr;
            bool rhas = cut2.rmap[a] >= 0 && cut2.rmap[b2] >= 0 &&
                        cut2.right.edge(cut2.rmap[a], cut2.rmap[b2]) != nullptr;
            if (lhas == rhas) throw InternalError("slit remove: ambiguous sphere side");
            sphere_is_left = lhas;
        }
        const MetricComplex& sphere = sphere_is_left ? cut2.left : cut2.right;
        const MetricComplex& rest = sphere_is_left ? cut2.right : cut2.left;
        const std::vector<VertexId>& restmap = sphere_is_left ? cut2.rmap : cut2.lmap;
        const std::vector<VertexId>& restcut = sphere_is_left ? cut2.rcut : cut2.lcut;
        if (std::fabs(sphere.total_area() - 4 * kPi) > 1e-6)
            continue; // flush region is not a single slit sphere
        // reglue: rest's new cut arc onto O's cut arc
        auto [nf, nt] = detail::boundary_arc_of(rest, restcut);
        auto [of, ot] = detail::boundary_arc_of(O, ocut);
        auto g2 = glue(rest, nf, nt, O, of, ot);
        KPointMetric out = d;
        KGon ng;
        ng.complex = g2.complex;
        for (VertexId corner : g.corners) {
            VertexId img;
            if (smap[corner] >= 0 && restmap[smap[corner]] >= 0)
                img = g2.map1[restmap[smap[corner]]];
            else if (omap[corner] >= 0)
                img = g2.map2[omap[corner]];
            else
                throw InternalError("slit remove lost a corner");
            ng.corners.push_back(img);
        }
        out.core = ng;
        auto report = out.core.validate();
        if (!report.empty())
            throw InternalError("slit remove produced invalid core: " + report.front().kind);
        return out;
    }

    // One whole side may itself be the slit sphere (its free boundary is the
    // parallel copy). Excising it leaves the other side, with the sphere's
    // completion marks migrating onto the seam, which becomes boundary.
    for (int side = 0; side < 2; ++side) {
        const MetricComplex& S = side == 0 ? cut.left : cut.right;
        const std::vector<VertexId>& smap = side == 0 ? cut.lmap : cut.rmap;
        const std::vector<VertexId>& scut = side == 0 ? cut.lcut : cut.rcut;
        const MetricComplex& O = side == 0 ? cut.right : cut.left;
        const std::vector<VertexId>& omap = side == 0 ? cut.rmap : cut.lmap;
        const std::vector<VertexId>& ocut = side == 0 ? cut.rcut : cut.lcut;
        if (std::fabs(S.total_area() - 4 * kPi) > 1e-6) continue;

        VertexId v = scut.front(), w = scut.back();
        bool shaped = std::fabs(S.vertex_angle(v) - kTwoPi) < 1e-6 &&
                      std::fabs(S.vertex_angle(w) - kTwoPi) < 1e-6;
        std::vector<double> mark_params; // arclength from the seam start (diag.from)
        std::vector<VertexId> mark_sources;
        for (VertexId corner : g.corners) {
            if (corner == diag.from || corner == diag.to) continue;
            if (smap[corner] < 0) continue;
            if (omap[corner] >= 0) continue;
            VertexId sc = smap[corner];
            shaped &= std::fabs(S.vertex_angle(sc) - kPi) < 1e-6;
            mark_params.push_back(dist(g.complex.pos(diag.from), g.complex.pos(corner)));
            mark_sources.push_back(corner);
        }
        if (!shaped) continue;

        auto [of, ot] = detail::boundary_arc_of(O, ocut);
        bool from_is_source = of == omap[diag.from];
        std::vector<double> params;
        for (double s : mark_params) params.push_back(from_is_source ? s : diag.length - s);
        auto rr = refine_boundary_arc(O, of, ot, params, 1e-9);
        // promote the vertices at the mark positions
        MetricComplexBuilder b;
        for (VertexId vv = 0; vv < rr.complex.vertex_count(); ++vv)
            b.add_vertex(rr.complex.role(vv), rr.complex.pos(vv));
        std::vector<VertexId> promoted(mark_sources.size(), -1);
        {
            auto path = boundary_path(rr.complex, rr.vmap[of] >= 0 ? rr.vmap[of] : of,
                                      rr.vmap[ot] >= 0 ? rr.vmap[ot] : ot);
            for (size_t mi = 0; mi < mark_sources.size(); ++mi) {
                UnitVec target = g.complex.pos(mark_sources[mi]);
                for (VertexId pv : path)
                    if (same_point(rr.complex.pos(pv), target, 1e-8)) promoted[mi] = pv;
                if (promoted[mi] < 0)
                    throw InternalError("migrated mark not found on the seam");
                b.set_role(promoted[mi], VertexRole::Completion);
            }
        }
        for (const auto& tr2 : rr.complex.triangles())
            b.add_triangle(tr2.v[0], tr2.v[1], tr2.v[2]);
        MetricComplex closed = b.build();

        KPointMetric out = d;
        KGon ng;
        ng.complex = closed;
        for (VertexId corner : g.corners) {
            if (omap[corner] >= 0) {
                ng.corners.push_back(rr.vmap[omap[corner]]);
            } else {
                bool found = false;
                for (size_t mi = 0; mi < mark_sources.size() && !found; ++mi)
                    if (mark_sources[mi] == corner) {
                        ng.corners.push_back(promoted[mi]);
                        found = true;
                    }
                if (!found) throw InternalError("slit remove lost a corner");
            }
        }
        out.core = ng;
        auto report = out.core.validate();
        if (!report.empty())
            throw InternalError("slit remove (whole side) produced invalid core: " +
                                report.front().kind);
        return out;
    }
    throw NoSlitSphereAtDiagonal("no slit sphere is flush against this diagonal");
}

// Inverse of the whole-side removal: glue a slit sphere over the boundary
// span between two corners. Marks strictly inside the span migrate to the new
// sphere's free copy (the old boundary becomes interior and smooth).
inline KPointMetric slit_insert_at_edge_span(const KPointMetric& d, int from_corner,
                                             int to_corner) {
    const KGon& g = d.core;
    VertexId v = g.corners[from_corner], w = g.corners[to_corner];
    auto path = boundary_path(g.complex, v, w);
    double L = path_length(g.complex, path);
    if (L > kPi + 1e-9)
        throw NotLengthPi("boundary span longer than pi cannot bound a slit sphere");
    // corners strictly inside the span
    std::vector<VertexId> inside;
    std::vector<double> params;
    {
        double s = 0;
        for (size_t i = 1; i + 1 < path.size(); ++i) {
            s += g.complex.edge_length(path[i - 1], path[i]);
            if (std::find(g.corners.begin(), g.corners.end(), path[i]) != g.corners.end()) {
                inside.push_back(path[i]);
                params.push_back(s);
            }
        }
    }
    UnitVec via = point_along_path(g.complex, path, L / 2);
    auto sphere = meshing::slit_sphere_at(g.complex.pos(v), via, L, params, {});
    MetricComplex sc;
    {
        MetricComplexBuilder b;
        for (VertexId vv = 0; vv < sphere.complex.vertex_count(); ++vv)
            b.add_vertex(sphere.complex.role(vv), sphere.complex.pos(vv));
        for (VertexId m : sphere.marks_a) b.set_role(m, VertexRole::Completion);
        for (const auto& tr : sphere.complex.triangles())
            b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        sc = b.build();
    }
    // glue the sphere's unmarked copy (B) over the span
    auto res = glue(g.complex, v, w, sc, sphere.corner_b, sphere.corner_a);
    KPointMetric out = d;
    KGon ng;
    ng.complex = res.complex;
    for (VertexId corner : g.corners) {
        auto it = std::find(inside.begin(), inside.end(), corner);
        if (it == inside.end()) {
            ng.corners.push_back(res.map1[corner]);
        } else {
            size_t idx = (size_t)(it - inside.begin());
            ng.corners.push_back(res.map2[sphere.marks_a[idx]]);
        }
    }
    out.core = ng;
    auto report = out.core.validate();
    if (!report.empty())
        throw InternalError("span insert produced invalid core: " + report.front().kind);
    return out;
}

struct TelescopeResult {
    std::vector<KPointMetric> stages; // m+1 metrics, m decreasing to 0
    std::vector<int> m_values;
};

// Telescoping move sequence of Thm. `connected`: remove slit spheres one at a
// time until the equatorial metric reaches m = 0.
inline TelescopeResult telescope(const KPointMetric& d) {
    TelescopeResult out;
    auto prof = equatorial_profile(d);
    KPointMetric cur = prof.truncated;
    out.stages.push_back(cur);
    out.m_values.push_back(prof.m);
    int guard = 64;
    while (out.m_values.back() > 0 && guard-- > 0) {
        // remove at any diagonal bounding a slit sphere
        auto ds = diagonals(cur.core);
        bool removed = false;
        for (const auto& diag : ds) {
            if (diag.family) continue;
            try {
                KPointMetric next = slit_move(cur, diag, SlitMoveDir::Remove);
                auto p = equatorial_profile(next);
                cur = p.truncated;
                out.stages.push_back(cur);
                out.m_values.push_back(p.m);
                removed = true;
                break;
            } catch (const NoSlitSphereAtDiagonal&) {
            }
        }
        if (!removed) throw InternalError("telescope found no removable slit sphere");
    }
    return out;
}

// ---------------------------------------------------------------------------
// building a metric over a tuple (surjectivity of the projection)
// ---------------------------------------------------------------------------

namespace detail {

inline KGon triangle_gon_for(const UnitVec& a, const UnitVec& b, const UnitVec& c) {
    double det = det3(a.vec(), b.vec(), c.vec());
    if (det > 1e-9) {
        auto p = make_piece(PieceSpec::small_triangle(a, b, c));
        return KGon{p.complex, p.corners};
    }
    if (det < -1e-9) {
        auto msh = meshing::concave_at({a, b, c});
        return KGon{msh.complex, msh.corners};
    }
    // collinear: signed minimizing steps around the common circle
    Vec3 nv;
    {
        Vec3 c1 = a.cross(b), c2 = b.cross(c), c3 = c.cross(a);
        nv = c1.norm() > c2.norm() ? (c1.norm() > c3.norm() ? c1 : c3)
                                   : (c2.norm() > c3.norm() ? c2 : c3);
        if (nv.norm() < 1e-9) throw InvalidTuple("tuple too degenerate");
    }
    UnitVec n(nv);
    Vec3 e1 = a.vec();
    Vec3 e2 = n.vec().cross(e1);
    auto az = [&](const UnitVec& p) { return std::atan2(p.vec().dot(e2), p.vec().dot(e1)); };
    const UnitVec* pts[3] = {&a, &b, &c};
    auto step = [&](int i, int sign_pref) {
        double s = az(*pts[(i + 1) % 3]) - az(*pts[i]);
        while (s > kPi + 1e-12) s -= kTwoPi;
        while (s < -kPi - 1e-12) s += kTwoPi;
        if (std::fabs(std::fabs(s) - kPi) < 1e-9) s = sign_pref * kPi; // antipodal: choose
        return s;
    };
    for (int mask = 0; mask < 8; ++mask) {
        double s[3];
        for (int i = 0; i < 3; ++i) s[i] = step(i, (mask >> i & 1) ? 1 : -1);
        double W = (s[0] + s[1] + s[2]) / kTwoPi;
        if (std::fabs(W - 1) < 1e-6 && s[0] > 0 && s[1] > 0 && s[2] > 0) {
            auto msh = meshing::hemisphere_fan_at(n, {a, b, c});
            return KGon{msh.complex, msh.corners};
        }
        if (std::fabs(W + 1) < 1e-6 && s[0] < 0 && s[1] < 0 && s[2] < 0) {
            auto msh = meshing::hemisphere_fan_at(n.antipode(), {a, b, c});
            return KGon{msh.complex, msh.corners};
        }
        if (std::fabs(W) < 1e-6) {
            // slit sphere with a mark: span of the walk must be under pi
            double azs[3] = {az(a), az(b), az(c)};
            int lo = 0, hi = 0, mid;
            for (int i = 1; i < 3; ++i) {
                if (azs[i] < azs[lo]) lo = i;
                if (azs[i] > azs[hi]) hi = i;
            }
            mid = 3 - lo - hi;
            double span = azs[hi] - azs[lo];
            if (span <= 1e-9 || span >= kPi + 1e-9) continue;
            for (int copy = 0; copy < 2; ++copy) {
                std::vector<double> marksA, marksB;
                (copy == 0 ? marksA : marksB).push_back(azs[mid] - azs[lo]);
                auto msh = meshing::slit_sphere_at(*pts[lo], *pts[mid], span, marksA, marksB);
                VertexId markv = copy == 0 ? msh.marks_a[0] : msh.marks_b[0];
                MetricComplexBuilder bb;
                for (VertexId vv = 0; vv < msh.complex.vertex_count(); ++vv)
                    bb.add_vertex(msh.complex.role(vv), msh.complex.pos(vv));
                bb.set_role(markv, VertexRole::Completion);
                for (const auto& trr : msh.complex.triangles())
                    bb.add_triangle(trr.v[0], trr.v[1], trr.v[2]);
                MetricComplex cc = bb.build();
                VertexId ids[3];
                ids[lo] = msh.corner_a;
                ids[hi] = msh.corner_b;
                ids[mid] = markv;
                KGon g = kgon_from_complex(cc, ids[0]);
                if (g.k() != 3) continue;
                if (g.corners[1] == ids[1] && g.corners[2] == ids[2] &&
                    g.validate().empty())
                    return g;
            }
        }
    }
    throw InvalidTuple("no 3-gon realization found for this collinear triple");
}

} // namespace detail

// A k-point metric projecting to the given tuple (Prop. dk2tk surjectivity):
// base geodesic triangles joined along diagonals at nonconsecutive pairs.
inline KGon build_core_for_tuple(const std::vector<UnitVec>& pts) {
    int k = (int)pts.size();
    if (k == 3) return detail::triangle_gon_for(pts[0], pts[1], pts[2]);

    // choose a nonconsecutive split pair with usable geometry
    for (int span = 2; span <= k - 2; ++span) {
        for (int i = 0; i < k; ++i) {
            int j = (i + span) % k;
            if (j == (i + 1) % k || i == (j + 1) % k) continue;
            double dd = dist(pts[i], pts[j]);
            if (dd <= 1e-6 || dd >= kPi - 1e-6) continue;
            std::vector<UnitVec> t1, t2;
            for (int a = i;; a = (a + 1) % k) {
                t1.push_back(pts[a]);
                if (a == j) break;
            }
            for (int a = j;; a = (a + 1) % k) {
                t2.push_back(pts[a]);
                if (a == i) break;
            }
            if (tuple_alternating(t1, geom_tolerance()) ||
                tuple_alternating(t2, geom_tolerance()))
                continue;
            try {
                KGon g1 = build_core_for_tuple(t1);
                KGon g2 = build_core_for_tuple(t2);
                // glue along the closing edges (the split diagonal)
                int k1 = g1.k(), k2 = g2.k();
                auto res = glue(g1.complex, g1.corners[k1 - 1], g1.corners[0], g2.complex,
                                g2.corners[k2 - 1], g2.corners[0]);
                KGon g = kgon_from_complex(res.complex, res.map1[g1.corners[0]]);
                if (g.k() != k || !g.validate().empty()) continue;
                // rotate labels so corner 0 is pts[0]
                int shift = (k - i) % k;
                g = relabel(g, shift % k);
                bool ok = true;
                for (int a = 0; a < k; ++a)
                    ok &= same_point(g.complex.pos(g.corners[a]), pts[a], 1e-7);
                if (ok) return g;
            } catch (const Error&) {
                continue;
            }
        }
    }
    throw InvalidTuple("no split pair admits a construction");
}

inline KPointMetric build_metric_for_tuple(const KTuple& t) {
    return attach_rays(build_core_for_tuple(t.points));
}

// ---------------------------------------------------------------------------
// path lifting over tuple space
// ---------------------------------------------------------------------------

struct LiftOptions {
    int max_bisection_depth = 20;
    double angle_margin = 2.0; // absorb ray spheres when a corner angle drops below
    double waypoint_tol = 1e-7;
};

namespace detail {

// Rebuild with selected vertex positions replaced; everything else untouched.
inline MetricComplex with_positions(const MetricComplex& c,
                                    const std::map<VertexId, UnitVec>& targets) {
    MetricComplexBuilder b;
    for (VertexId v = 0; v < c.vertex_count(); ++v) {
        auto it = targets.find(v);
        b.add_vertex(c.role(v), it == targets.end() ? c.pos(v) : it->second);
    }
    for (const auto& tr : c.triangles()) b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
    return b.build();
}

// Repair standard, slightly stricter than validate()'s acceptance thresholds
// so a mesh accepted at one step is not already borderline for the next.
inline bool triangle_geometry_ok(const MetricComplex& c, TriId t) {
    const auto& tr = c.triangles()[t];
    const UnitVec &a = c.pos(tr.v[0]), &b = c.pos(tr.v[1]), &cc = c.pos(tr.v[2]);
    double dab = dist(a, b), dbc = dist(b, cc), dca = dist(cc, a);
    if (dab <= 1e-9 || dbc <= 1e-9 || dca <= 1e-9) return false;
    if (dab >= kPi - 1e-9 || dbc >= kPi - 1e-9 || dca >= kPi - 1e-9) return false;
    if (det3(a.vec(), b.vec(), cc.vec()) <= 1e-15) return false;
    double excess =
        corner_angle(a, b, cc) + corner_angle(b, cc, a) + corner_angle(cc, a, b) - kPi;
    return excess > 5e-12;
}

// Flip or refine link edges until every triangle incident to a moved corner
// is valid, or no operation makes progress. Flips that would create a
// parallel edge (the representation keys edges by vertex pair) fall back to
// an edge split, which also helps non-convex link quads.
inline bool repair_by_flips(MetricComplex& c, std::vector<VertexId>& moved) {
    for (int pass = 0; pass < 400; ++pass) {
        if (c.vertex_count() > 4000) return false;
        TriId bad = kNoTriangle;
        for (TriId t = 0; t < c.triangle_count() && bad == kNoTriangle; ++t)
            if (!triangle_geometry_ok(c, t)) bad = t;
        if (bad == kNoTriangle) return true;
        const auto tr = c.triangles()[bad]; // copy: c is reassigned below
        bool progressed = false;
        auto try_flip = [&](VertexId a, VertexId b) {
            const EdgeInfo* e = c.edge(a, b);
            if (!e || e->boundary()) return false;
            auto third = [&](TriId t) {
                for (VertexId w : c.triangles()[t].v)
                    if (w != a && w != b) return w;
                return kNoTriangle;
            };
            VertexId c1 = third(e->tris[0]), c2 = third(e->tris[1]);
            if (c1 == c2) return false;
            if (c.edge(c1, c2)) {
                // another sheet already uses this vertex pair; split that edge
                // to free the name, then retry on a later pass
                const EdgeInfo* dup = c.edge(c1, c2);
                if (c.edge_length(c1, c2) <= 1e-6) return false;
                UnitVec mid = slerp(c.pos(c1), c.pos(c2), 0.5);
                auto sr = dup->boundary() ? split_boundary_edge(c, c1, c2, mid)
                                          : split_interior_edge(c, c1, c2, mid);
                c = sr.complex;
                return true;
            }
            try {
                c = flip_edge(c, a, b);
                return true;
            } catch (const ChartDegeneracy&) {
                return false;
            }
        };
        for (VertexId v : moved) {
            int ci = tr.corner_of(v);
            if (ci < 0) continue;
            VertexId a = tr.v[(ci + 1) % 3], b = tr.v[(ci + 2) % 3];
            // prefer the edge opposite the moved vertex, then the side edges
            if (try_flip(a, b) || try_flip(v, a) || try_flip(v, b)) {
                progressed = true;
                break;
            }
            // last resort: refine the opposite edge (interior only; splitting
            // boundary edges spirals into sliver fans)
            const EdgeInfo* e = c.edge(a, b);
            if (e && !e->boundary() && c.edge_length(a, b) > 1e-4) {
                auto sr = split_interior_edge(c, a, b, slerp(c.pos(a), c.pos(b), 0.5));
                c = sr.complex;
                progressed = true;
                break;
            }
        }
        if (!progressed) {
            // stage 2: hill-climb over every flippable edge at the moved
            // vertices, accepting any strict decrease in total badness
            auto badness = [&](const MetricComplex& cc) {
                double s = 0;
                for (TriId t = 0; t < cc.triangle_count(); ++t) {
                    if (triangle_geometry_ok(cc, t)) continue;
                    const auto& tv = cc.triangles()[t];
                    double det = det3(cc.pos(tv.v[0]).vec(), cc.pos(tv.v[1]).vec(),
                                      cc.pos(tv.v[2]).vec());
                    s += 1.0 + std::max(0.0, -det);
                }
                return s;
            };
            double cur_bad = badness(c);
            bool improved = false;
            for (VertexId v : moved) {
                for (const auto& fe : c.fan(v)) {
                    for (VertexId u : c.triangles()[fe.tri].v) {
                        if (u == v) continue;
                        const EdgeInfo* e = c.edge(v, u);
                        if (!e || e->boundary()) continue;
                        auto third = [&](TriId t) {
                            for (VertexId w : c.triangles()[t].v)
                                if (w != v && w != u) return w;
                            return kNoTriangle;
                        };
                        VertexId c1 = third(e->tris[0]), c2 = third(e->tris[1]);
                        if (c1 == c2 || c.edge(c1, c2)) continue;
                        try {
                            MetricComplex flipped = flip_edge(c, v, u);
                            if (badness(flipped) < cur_bad - 1e-12) {
                                c = flipped;
                                improved = true;
                            }
                        } catch (const ChartDegeneracy&) {
                        }
                        if (improved) break;
                    }
                    if (improved) break;
                }
                if (improved) break;
            }
            if (!improved) return false;
        }
    }
    return false;
}

// Detach every EdgeMark adjacent through the interior to a moving corner:
// flip the connecting edge away, or split it (splitting removes the
// co-occurrence). Marks on moving polygon edges are handled by sliding and
// are skipped here.
inline bool protect_marks(KPointMetric& d, const std::vector<int>& moving,
                          const std::set<VertexId>& sliding) {
    for (int pass = 0; pass < 400; ++pass) {
        MetricComplex& c = d.core.complex;
        if (c.vertex_count() > 4000) return false;
        VertexId mark = -1, corner = -1;
        for (VertexId m = 0; m < c.vertex_count() && mark == -1; ++m) {
            if (c.role(m) != VertexRole::EdgeMark || sliding.count(m)) continue;
            for (const auto& fe : c.fan(m)) {
                const auto& tr = c.triangles()[fe.tri];
                for (VertexId v : tr.v) {
                    for (int mi : moving)
                        if (d.core.corners[mi] == v) {
                            mark = m;
                            corner = v;
                        }
                }
            }
        }
        if (mark == -1) return true;
        const EdgeInfo* e = c.edge(mark, corner);
        if (!e) return false; // adjacency through a shared triangle only: bisect
        if (e->boundary()) return false;
        auto third = [&](TriId t) {
            for (VertexId w : c.triangles()[t].v)
                if (w != mark && w != corner) return w;
            return kNoTriangle;
        };
        VertexId c1 = third(e->tris[0]), c2 = third(e->tris[1]);
        if (c.edge(c1, c2) && c.edge_length(c1, c2) > 1e-6) {
            const EdgeInfo* dup = c.edge(c1, c2);
            UnitVec mid = slerp(c.pos(c1), c.pos(c2), 0.5);
            auto sr = dup->boundary() ? split_boundary_edge(c, c1, c2, mid)
                                      : split_interior_edge(c, c1, c2, mid);
            d.core.complex = sr.complex;
            continue;
        }
        if (!c.edge(c1, c2)) {
            try {
                d.core.complex = flip_edge(c, mark, corner);
                continue;
            } catch (const ChartDegeneracy&) {
            }
        }
        if (c.edge_length(mark, corner) > 1e-6) {
            auto sr = split_interior_edge(c, mark, corner,
                                          slerp(c.pos(mark), c.pos(corner), 0.5));
            d.core.complex = sr.complex;
            continue;
        }
        return false;
    }
    return false;
}

inline void absorb_slack(KPointMetric& d, double margin) {
    for (int pass = 0; pass < 16; ++pass) {
        int weakest = -1;
        double worst = margin;
        for (int i = 0; i < d.k(); ++i) {
            double a = d.core.corner_angle_at(i);
            if (a < worst) {
                worst = a;
                weakest = i;
            }
        }
        if (weakest < 0) return;
        // absorbing at edge i boosts corners i and i+1
        int prev_edge = (weakest + d.k() - 1) % d.k();
        double other_prev = d.core.corner_angle_at(prev_edge);
        double other_next = d.core.corner_angle_at((weakest + 1) % d.k());
        int edge = other_prev < other_next ? prev_edge : weakest;
        d = absorb_from_ray(d, edge);
    }
}

inline bool lift_step_once(KPointMetric& d, const std::vector<UnitVec>& targets,
                           int* stuck_boundary_edge = nullptr) {
    if (stuck_boundary_edge) *stuck_boundary_edge = -1;
    std::vector<int> moving;
    for (int i = 0; i < d.k(); ++i)
        if (dist(d.core.complex.pos(d.core.corners[i]), targets[i]) > 1e-13)
            moving.push_back(i);
    if (moving.empty()) return true;
    KPointMetric work = d;

    // a moving polygon edge shorter than pi is simplest as one mesh edge:
    // drop its marks (link re-triangulation, metric unchanged) so the sweep
    // only has to carry the corners
    for (int i = 0; i < work.k(); ++i) {
        int j = (i + 1) % work.k();
        bool moves = false;
        for (int mi : moving) moves |= mi == i || mi == j;
        if (!moves) continue;
        for (int pass = 0; pass < 64; ++pass) {
            if (work.core.edge_length(i) >= kPi - 0.05) break;
            auto path = work.core.edge_path(i);
            if (path.size() <= 2) break;
            try {
                auto rem = remove_boundary_vertex(work.core.complex, path[1]);
                work.core = remap_kgon(work.core, rem.complex, rem.vmap);
            } catch (const Error&) {
                break; // keep remaining marks; they will slide instead
            }
        }
    }

    // marks slide to uniform positions along their polygon edge's arc (a pure
    // re-triangulation of the same region, so the metric is unchanged); this
    // also clears clustered retriangulation debris on static edges
    std::map<VertexId, UnitVec> target_map;
    std::set<VertexId> sliding;
    for (int i = 0; i < work.k(); ++i)
        target_map[work.core.corners[i]] = targets[i];
    for (int i = 0; i < work.k(); ++i) {
        int j = (i + 1) % work.k();
        bool moves = false;
        for (int mi : moving) moves |= mi == i || mi == j;
        auto path = work.core.edge_path(i);
        if (path.size() <= 2) continue;
        const UnitVec &qa = targets[i], &qb = targets[j];
        double Lnew = dist(qa, qb);
        Vec3 dir;
        if (Lnew <= geom_tolerance()) return false;
        if (Lnew < kPi - 1e-12) {
            dir = tangent_toward(qa, qb);
        } else if (!moves) {
            // static length-pi edge: respace along its own semicircle
            Lnew = kPi;
            dir = tangent_toward(qa, work.core.complex.pos(path[1]));
        } else {
            return false; // moving edge through length pi: refine instead
        }
        size_t nmarks = path.size() - 2;
        for (size_t p = 1; p + 1 < path.size(); ++p) {
            double frac = (double)p / (double)(nmarks + 1);
            target_map[path[p]] = walk(qa, dir, frac * Lnew);
            sliding.insert(path[p]);
        }
    }

    if (!protect_marks(work, moving, sliding)) return false;
    MetricComplex moved = with_positions(work.core.complex, target_map);
    std::vector<VertexId> moved_ids;
    for (int i : moving) moved_ids.push_back(work.core.corners[i]);
    for (VertexId sv : sliding) moved_ids.push_back(sv);
    if (!repair_by_flips(moved, moved_ids)) {
#ifdef SPHEREMODULI_LIFT_DEBUG
        std::fprintf(stderr, "[lift] repair failed; bad triangles:\n");
        for (TriId t = 0; t < moved.triangle_count(); ++t) {
            if (triangle_geometry_ok(moved, t)) continue;
            const auto& tr = moved.triangles()[t];
            std::fprintf(stderr, "  t%d (%d,%d,%d) roles(%d,%d,%d)", t, tr.v[0], tr.v[1],
                         tr.v[2], (int)moved.role(tr.v[0]), (int)moved.role(tr.v[1]),
                         (int)moved.role(tr.v[2]));
            for (int e = 0; e < 3; ++e) {
                const EdgeInfo* ei = moved.edge(tr.v[e], tr.v[(e + 1) % 3]);
                std::fprintf(stderr, " e(%d,%d)%s", tr.v[e], tr.v[(e + 1) % 3],
                             ei && ei->boundary() ? "B" : "i");
            }
            std::fprintf(stderr, " det=%.2e\n",
                         det3(moved.pos(tr.v[0]).vec(), moved.pos(tr.v[1]).vec(),
                              moved.pos(tr.v[2]).vec()));
        }
#endif
        // a moving corner pinching against the stored truncation boundary
        // cannot be flipped away; report the edge so the caller can absorb a
        // slit sphere from that ray (a re-truncation, not a metric change)
        if (stuck_boundary_edge) {
            for (TriId t = 0; t < moved.triangle_count() && *stuck_boundary_edge < 0; ++t) {
                if (triangle_geometry_ok(moved, t)) continue;
                const auto& tr = moved.triangles()[t];
                bool has_moved = false;
                for (VertexId mv : moved_ids) has_moved |= tr.corner_of(mv) >= 0;
                if (!has_moved) continue;
                for (int e = 0; e < 3 && *stuck_boundary_edge < 0; ++e) {
                    VertexId a = tr.v[e], b = tr.v[(e + 1) % 3];
                    const EdgeInfo* ei = moved.edge(a, b);
                    if (!ei || !ei->boundary()) continue;
                    // locate the polygon edge whose path contains this mesh edge
                    for (int pe = 0; pe < work.k() && *stuck_boundary_edge < 0; ++pe) {
                        auto path = work.core.edge_path(pe);
                        for (size_t p = 0; p + 1 < path.size(); ++p)
                            if ((path[p] == a && path[p + 1] == b) ||
                                (path[p] == b && path[p + 1] == a))
                                *stuck_boundary_edge = pe;
                    }
                }
            }
        }
        return false;
    }
    KGon g;
    g.complex = moved;
    g.corners = work.core.corners;
    if (!g.validate().empty()) return false;
    work.core = g;
    for (int i = 0; i < work.k(); ++i)
        work.ray_slit_lengths[i] = work.core.edge_length(i);
    d = work;
    return true;
}

// Rebuild the core mesh from its canonical decomposition: the same metric on
// a fresh triangulation, re-seated into the current developed frame.
inline bool renormalize_mesh(KPointMetric& d) {
    try {
        auto dec = decompose_core(d.core);
        KGon re = assemble_decomposition(dec);
        if (re.k() != d.k()) return false;
        std::vector<UnitVec> want, have;
        for (int i = 0; i < d.k(); ++i) {
            want.push_back(d.core.complex.pos(d.core.corners[i]));
            have.push_back(re.complex.pos(re.corners[i]));
        }
        auto cfw = canonical_rotation(want);
        auto cfh = canonical_rotation(have);
        for (int i = 0; i < d.k(); ++i)
            if (dist(cfw.points[i], cfh.points[i]) > 1e-7) return false;
        Rotation R = cfw.rotation.transpose().compose(cfh.rotation);
        MetricComplexBuilder b;
        for (VertexId v = 0; v < re.complex.vertex_count(); ++v)
            b.add_vertex(re.complex.role(v), R.apply(re.complex.pos(v)));
        for (const auto& tr : re.complex.triangles())
            b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        re.complex = b.build();
        if (!re.validate().empty()) return false;
        d.core = re;
        return true;
    } catch (const Error&) {
        return false;
    }
}

inline void lift_step(KPointMetric& d, const std::vector<UnitVec>& targets, int depth,
                      const LiftOptions& opt) {
    int stuck_edge = -1;
    if (lift_step_once(d, targets, &stuck_edge)) {
        absorb_slack(d, opt.angle_margin);
        return;
    }
    // re-truncate: a corner pinned against the stored boundary gets clearance
    // by absorbing one slit sphere from that ray (the metric is unchanged)
    for (int tries = 0; stuck_edge >= 0 && tries < 2 * d.k(); ++tries) {
        d = absorb_from_ray(d, stuck_edge);
        if (lift_step_once(d, targets, &stuck_edge)) {
            absorb_slack(d, opt.angle_margin);
            return;
        }
    }
    // clear interior mesh vertices sitting on the track of a moving corner or
    // inside the region swept by a moving polygon edge (link re-triangulation;
    // the metric is unchanged)
    {
        KPointMetric cleared = d;
        bool any = false;
        auto arc_distance = [](const UnitVec& q, const UnitVec& a, const UnitVec& b) {
            double L = dist(a, b);
            if (L < 1e-12) return dist(q, a);
            Vec3 n = a.cross(b).normalized();
            double off = std::asin(clamp1(std::fabs(q.vec().dot(n))));
            if (dist(a, q) <= L + 1e-9 && dist(q, b) <= L + 1e-9) return off;
            return std::min(dist(q, a), dist(q, b));
        };
        for (int pass = 0; pass < 12; ++pass) {
            const MetricComplex& c = cleared.core.complex;
            VertexId victim = -1;
            for (int i = 0; i < cleared.k() && victim < 0; ++i) {
                int j = (i + 1) % cleared.k();
                VertexId ci = cleared.core.corners[i], cj = cleared.core.corners[j];
                double step = std::max(dist(c.pos(ci), targets[i]),
                                       dist(c.pos(cj), targets[j]));
                if (step < 1e-13) continue;
                double gate = 3 * step + 1e-3;
                for (VertexId v = 0; v < c.vertex_count() && victim < 0; ++v) {
                    if (c.role(v) != VertexRole::Interior) continue;
                    double dd = std::min(
                        {arc_distance(c.pos(v), c.pos(ci), c.pos(cj)),
                         arc_distance(c.pos(v), targets[i], targets[j])});
                    if (dd < gate) victim = v;
                }
            }
            if (victim < 0) break;
            try {
                auto rem = remove_interior_vertex(cleared.core.complex, victim);
                cleared.core = detail::remap_kgon(cleared.core, rem.complex, rem.vmap);
                any = true;
            } catch (const Error&) {
                break;
            }
        }
        if (any && cleared.core.validate().empty() && lift_step_once(cleared, targets)) {
            d = cleared;
            absorb_slack(d, opt.angle_margin);
            return;
        }
    }
    // re-chart: rebuild the triangulation from the canonical decomposition
    // and retry before refining the step
    {
        KPointMetric fresh = d;
        if (renormalize_mesh(fresh) && lift_step_once(fresh, targets)) {
            d = fresh;
            absorb_slack(d, opt.angle_margin);
            return;
        }
    }
    if (depth >= opt.max_bisection_depth)
        throw StepTooLarge("path step exceeds the chart radius; refine the path");
    std::vector<UnitVec> mid;
    for (int i = 0; i < d.k(); ++i)
        mid.push_back(slerp(d.core.complex.pos(d.core.corners[i]), targets[i], 0.5));
    lift_step(d, mid, depth + 1, opt);
    lift_step(d, targets, depth + 1, opt);
}

} // namespace detail

// Unique continuous lift of a tuple path starting at d0. Waypoints are raw
// labelled tuples; consecutive waypoints must stay within the current charts
// (automatic bisection refines in between). Only triangles incident to
// completion vertices are re-developed; internal retriangulation (edge flips,
// mark removal, ray absorption) changes the representation, never the metric.
inline std::vector<KPointMetric> lift_path(const KPointMetric& d0,
                                           const std::vector<std::vector<UnitVec>>& path,
                                           const LiftOptions& opt = {}) {
    if (path.empty()) return {d0};
    int k = d0.k();
    for (const auto& wp : path)
        if ((int)wp.size() != k) throw InvalidTuple("waypoint arity mismatch");

    // frame alignment: waypoint coordinates -> metric coordinates
    std::vector<UnitVec> cur_pts;
    for (VertexId v : d0.core.corners) cur_pts.push_back(d0.core.complex.pos(v));
    auto cfD = canonical_rotation(cur_pts);
    auto cfW = canonical_rotation(path[0]);
    for (int i = 0; i < k; ++i)
        if (dist(cfD.points[i], cfW.points[i]) > opt.waypoint_tol)
            throw InvalidTuple("path[0] does not match the projected tuple");
    Rotation R = cfD.rotation.transpose().compose(cfW.rotation);

    std::vector<KPointMetric> out;
    out.push_back(d0);
    KPointMetric cur = d0;
    detail::absorb_slack(cur, opt.angle_margin);
    // retriangulation debris (flip/split byproducts) is cleared by rebuilding
    // the mesh canonically whenever a step grew it
    int baseline = cur.core.complex.vertex_count();
    for (size_t j = 1; j < path.size(); ++j) {
        if (cur.core.complex.vertex_count() > baseline) {
            KPointMetric fresh = cur;
            if (detail::renormalize_mesh(fresh)) {
                cur = fresh;
                detail::absorb_slack(cur, opt.angle_margin);
            }
            baseline = cur.core.complex.vertex_count();
        }
        std::vector<UnitVec> targets;
        for (const auto& p : path[j]) targets.push_back(R.apply(p));
        detail::lift_step(cur, targets, 0, opt);
        out.push_back(cur);
    }
    return out;
}

inline std::vector<KPointMetric> lift_path(const KPointMetric& d0,
                                           const std::vector<KTuple>& path,
                                           const LiftOptions& opt = {}) {
    std::vector<std::vector<UnitVec>> raw;
    for (const auto& t : path) raw.push_back(t.points);
    return lift_path(d0, raw, opt);
}

// ---------------------------------------------------------------------------
// the space D_4: cross-ratio chart and the odd fiber label
// ---------------------------------------------------------------------------

struct D4Coords {
    ExtendedComplex z;
    double t = 0;
};

struct D4Label {
    long n = 0;
};

// Chart coordinates on X_4: rotate p4 to infinity and p3 to zero, then
// z = p1/p2 and t = log(1+|p1|) - log(1+1/|p2|).
inline D4Coords d4_coords(const KTuple& tup) {
    if (tup.k() != 4) throw NotAntipodalPair("chart requires k = 4");
    const auto& p = tup.points;
    if (!antipodal(p[2], p[3], 1e-7))
        throw NotAntipodalPair("p3 and p4 must be antipodal");
    Rotation R = Rotation::align(p[3], ez());
    auto w1 = stereo(R.apply(p[0]), ez());
    auto w2 = stereo(R.apply(p[1]), ez());
    D4Coords out;
    // z = w1 / w2 in extended arithmetic (w1 finite since p1 != p4)
    if (w1.infinite) throw InternalError("p1 at the pole");
    if (w2.infinite) {
        out.z = ExtendedComplex::of(0, 0);
    } else {
        double n2 = w2.re * w2.re + w2.im * w2.im;
        if (n2 < 1e-300) throw InternalError("p2 coincides with p3");
        out.z = ExtendedComplex::of((w1.re * w2.re + w1.im * w2.im) / n2,
                                    (w1.im * w2.re - w1.re * w2.im) / n2);
    }
    double a1 = w1.abs();
    double inv2 = w2.infinite ? 0.0 : 1.0 / w2.abs();
    out.t = std::log1p(a1) - std::log1p(inv2);
    return out;
}

// Odd fiber label over the D_4 basepoint locus: the alternating angle sum of
// any truncation whose p3-p4 edge follows the semicircle convention,
// n = (a1 - a2 + a3 - a4) / 2pi. Truncation-independent.
inline D4Label d4_label(const KPointMetric& d) {
    if (d.k() != 4) throw NotAntipodalPair("label requires k = 4");
    const auto& c = d.core.complex;
    if (!antipodal(c.pos(d.core.corners[2]), c.pos(d.core.corners[3]), 1e-7))
        throw NotAntipodalPair("p3 and p4 must develop antipodally");
    double alt = d.core.corner_angle_at(0) - d.core.corner_angle_at(1) +
                 d.core.corner_angle_at(2) - d.core.corner_angle_at(3);
    double n = alt / kTwoPi;
    long rounded = std::lround(n);
    if (std::fabs(n - (double)rounded) > 1e-6 || rounded % 2 == 0)
        throw NonOddLabel("alternating angle sum is not an odd multiple of 2pi: " +
                          std::to_string(n));
    return {rounded};
}

namespace d4 {

inline UnitVec chart_point(double re, double im) {
    return stereo_inverse(ExtendedComplex::of(re, im), ez());
}

// the basepoint tuple (1, 2, 0, infinity) in chart coordinates
inline std::vector<UnitVec> basepoint_tuple() {
    return {chart_point(1, 0), chart_point(2, 0), ez().antipode(), ez()};
}

// D_n over the basepoint: two slit-sphere 3-gons joined along the diagonal
// p1p3 (n > 0) or p2p4 (n < 0), with (|n|-1)/2 slit spheres between.
inline KPointMetric basepoint_metric(long n) {
    if (n % 2 == 0) throw NonOddLabel("fiber labels are odd");
    auto pts = basepoint_tuple();
    const UnitVec& p1 = pts[0];
    const UnitVec& p2 = pts[1];
    const UnitVec& p3 = pts[2];
    const UnitVec& p4 = pts[3];
    double beta = dist(p3, p2); // arc position of p2 on the real meridian

    auto promote = [](MetricComplex c, std::initializer_list<VertexId> vs) {
        MetricComplexBuilder b;
        for (VertexId v = 0; v < c.vertex_count(); ++v) b.add_vertex(c.role(v), c.pos(v));
        for (VertexId v : vs) b.set_role(v, VertexRole::Completion);
        for (const auto& tr : c.triangles()) b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        return b.build();
    };

    MetricComplex merged;
    std::vector<VertexId> corner_ids(4); // image ids of p1..p4
    long m = (std::labs(n) - 1) / 2;

    // subdivision marks on the real-semicircle pieces sit off the chart's
    // special positions (p1 returns exactly to azimuth pi/2 under the loops)
    const std::vector<double> off_axis = {0.9, 2.3};

    if (n > 0) {
        // piece A: sphere slit p3->p1->p2, marked at p1 on copy A
        auto A = meshing::slit_sphere_at(p3, p1, beta, {kPi / 2}, {});
        MetricComplex cA = promote(A.complex, {A.marks_a[0]});
        // piece B: sphere slit along the real semicircle, marked at p1 on copy B
        auto B = meshing::slit_sphere_at(p3, p1, kPi, off_axis, {kPi / 2});
        MetricComplex cB = promote(B.complex, {B.marks_b[0]});

        MetricComplex cur = cA;
        VertexId arc_from = A.corner_a;    // p3
        VertexId arc_to = A.marks_a[0];    // p1 (glue arc runs p3 -> p1 on copy A)
        VertexId p2_id = A.corner_b;
        for (long j = 0; j < m; ++j) {
            auto S = meshing::slit_sphere_at(p3, p1, kPi / 2);
            auto g = glue(cur, arc_from, arc_to, S.complex, S.corner_b, S.corner_a);
            cur = g.complex;
            p2_id = g.map1[p2_id];
            // free arc: S's copy A, p3 -> p1
            arc_from = g.map2[S.corner_a];
            arc_to = g.map2[S.corner_b];
        }
        auto g = glue(cur, arc_from, arc_to, cB, B.marks_b[0], B.corner_a);
        merged = g.complex;
        corner_ids[0] = g.map2[B.marks_b[0]];
        corner_ids[1] = g.map1[p2_id];
        corner_ids[2] = g.map2[B.corner_a];
        corner_ids[3] = g.map2[B.corner_b];
    } else {
        double d24 = dist(p2, p4);
        // piece C: real-semicircle slit sphere marked at p2 on copy B
        auto C = meshing::slit_sphere_at(p3, p1, kPi, off_axis, {beta});
        MetricComplex cC = promote(C.complex, {C.marks_b[0]});
        // piece D: sphere slit p1->p2->p4, marked at p2 on copy A
        auto Dp = meshing::slit_sphere_at(p1, p2, kPi / 2, {beta - kPi / 2}, {});
        MetricComplex cD = promote(Dp.complex, {Dp.marks_a[0]});

        MetricComplex cur = cD;
        VertexId arc_from = Dp.marks_a[0]; // p2
        VertexId arc_to = Dp.corner_b;     // p4 (glue arc runs p2 -> p4 on copy A)
        VertexId p1_id = Dp.corner_a;
        for (long j = 0; j < m; ++j) {
            UnitVec via = walk(p2, tangent_toward(p2, p4), d24 / 2);
            auto S = meshing::slit_sphere_at(p2, via, d24);
            auto g = glue(cur, arc_from, arc_to, S.complex, S.corner_b, S.corner_a);
            cur = g.complex;
            p1_id = g.map1[p1_id];
            arc_from = g.map2[S.corner_a];
            arc_to = g.map2[S.corner_b];
        }
        auto g = glue(cur, arc_from, arc_to, cC, C.corner_b, C.marks_b[0]);
        merged = g.complex;
        corner_ids[0] = g.map1[p1_id];
        corner_ids[1] = g.map2[C.marks_b[0]];
        corner_ids[2] = g.map2[C.corner_a];
        corner_ids[3] = g.map2[C.corner_b];
    }

    KGon g;
    g.complex = merged;
    g.corners = corner_ids;
    auto report = g.validate();
    if (!report.empty())
        throw InternalError("basepoint metric invalid: " + report.front().kind + " " +
                            report.front().detail);
    auto d = attach_rays(g);
    auto label = d4_label(d);
    if (label.n != n)
        throw InternalError("basepoint label mismatch: built " + std::to_string(label.n) +
                            " wanted " + std::to_string(n));
    return d;
}

// Interior samples sit half a step off the uniform grid so the track's
// crossings of the real meridian (where the whole tuple is concircular and
// triangulations degenerate) fall between waypoints, not on them.
inline double loop_phase(int j, int steps) {
    if (j <= 0) return 0;
    if (j >= steps) return 1;
    return (j - 0.5) / steps;
}

// beta: p1 circles counterclockwise around p2 = 2 (chart radius 1); its lift
// takes the fiber label n to n - 2
inline std::vector<std::vector<UnitVec>> loop_beta(int steps) {
    std::vector<std::vector<UnitVec>> path;
    for (int j = 0; j <= steps; ++j) {
        double th = kPi - kTwoPi * loop_phase(j, steps);
        path.push_back({chart_point(2 + std::cos(th), std::sin(th)), chart_point(2, 0),
                        ez().antipode(), ez()});
    }
    return path;
}

// gamma: p1 circles clockwise around p3 = 0; the chart circle is centered
// slightly off zero so the track avoids the developed positions of the
// canonical mesh poles at chart +-i. Lifts of gamma are loops.
inline std::vector<std::vector<UnitVec>> loop_gamma(int steps) {
    std::vector<std::vector<UnitVec>> path;
    for (int j = 0; j <= steps; ++j) {
        double th = -kTwoPi * loop_phase(j, steps);
        path.push_back({chart_point(0.1 + 0.9 * std::cos(th), 0.9 * std::sin(th)),
                        chart_point(2, 0), ez().antipode(), ez()});
    }
    return path;
}

// Lift a based loop starting and ending over the basepoint. Plain path
// lifting is tried first; if a waypoint deep in the loop resists the mesh
// machinery, the terminal sheet is identified instead by backward-lifting
// every candidate fiber metric from the basepoint along the unlifted tail and
// matching it isometrically against the forward lift at the meeting waypoint
// (two lifts of a path agreeing at one point agree everywhere).
inline KPointMetric lift_loop(const KPointMetric& d,
                              const std::vector<std::vector<UnitVec>>& path,
                              const LiftOptions& opt = {}) {
    try {
        return lift_path(d, path, opt).back();
    } catch (const StepTooLarge&) {
    } catch (const ChartDegeneracy&) {
    }

    // forward-lift as far as possible
    KPointMetric fwd = d;
    size_t reached = 0; // index of the last lifted waypoint
    {
        std::vector<UnitVec> cur_pts;
        for (VertexId v : d.core.corners) cur_pts.push_back(d.core.complex.pos(v));
        auto cfD = canonical_rotation(cur_pts);
        auto cfW = canonical_rotation(path[0]);
        Rotation R = cfD.rotation.transpose().compose(cfW.rotation);
        detail::absorb_slack(fwd, opt.angle_margin);
        int baseline = fwd.core.complex.vertex_count();
        for (size_t j = 1; j < path.size(); ++j) {
            if (fwd.core.complex.vertex_count() > baseline) {
                KPointMetric fresh = fwd;
                if (detail::renormalize_mesh(fresh)) {
                    fwd = fresh;
                    detail::absorb_slack(fwd, opt.angle_margin);
                }
                baseline = fwd.core.complex.vertex_count();
            }
            std::vector<UnitVec> targets;
            for (const auto& p : path[j]) targets.push_back(R.apply(p));
            try {
                KPointMetric attempt = fwd; // steps must not partially apply
                detail::lift_step(attempt, targets, 0, opt);
                fwd = attempt;
            } catch (const Error&) {
                break;
            }
            reached = j;
        }
    }
    if (reached + 1 >= path.size()) return fwd;
    if (reached == 0) throw StepTooLarge("loop lift failed at the first step");

    long n0 = d4_label(d).n;
    std::vector<std::vector<UnitVec>> tail(path.rbegin(),
                                           path.rbegin() + (long)(path.size() - reached));
    for (long dm : {0L, -2L, 2L, -4L, 4L}) {
        long m = n0 + dm;
        if (m % 2 == 0) continue;
        KPointMetric candidate;
        std::vector<KPointMetric> back;
        try {
            candidate = d4::basepoint_metric(m);
            back = lift_path(candidate, tail, opt);
        } catch (const Error&) {
            continue;
        }
        if (isometric(back.back(), fwd, 1e-7)) return candidate;
    }
    throw StepTooLarge("loop lift could not identify the terminal sheet");
}

} // namespace d4

} // namespace spheremoduli
