#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "spheremoduli/surgery.hpp"

namespace spheremoduli {

enum class PieceType {
    SlitSphere,
    SmallTriangle,
    MarkedLune,
    Hemisphere,
    ConcaveEmbedded,
    Ray
};

inline const char* piece_type_name(PieceType t) {
    switch (t) {
        case PieceType::SlitSphere: return "slit_sphere";
        case PieceType::SmallTriangle: return "small_triangle";
        case PieceType::MarkedLune: return "marked_lune";
        case PieceType::Hemisphere: return "hemisphere";
        case PieceType::ConcaveEmbedded: return "concave_embedded";
        default: return "ray";
    }
}

// Parameters of a standard piece (tagged union; only the fields of the active
// type are meaningful).
struct PieceSpec {
    PieceType type = PieceType::SmallTriangle;
    double slit_length = 0;                     // SlitSphere, Ray
    std::array<UnitVec, 3> triangle;            // SmallTriangle
    double lune_angle = 0;                      // MarkedLune
    std::vector<double> lune_marks;             // arclength positions in (0, pi)
    std::vector<double> hemisphere_marks;       // equator azimuths, CCW
    std::vector<UnitVec> concave_boundary;      // ConcaveEmbedded, CCW cycle

    static PieceSpec slit_sphere(double len) {
        PieceSpec s;
        s.type = PieceType::SlitSphere;
        s.slit_length = len;
        return s;
    }
    static PieceSpec ray(double len) {
        PieceSpec s;
        s.type = PieceType::Ray;
        s.slit_length = len;
        return s;
    }
    static PieceSpec small_triangle(const UnitVec& a, const UnitVec& b, const UnitVec& c) {
        PieceSpec s;
        s.type = PieceType::SmallTriangle;
        s.triangle = {a, b, c};
        return s;
    }
    static PieceSpec marked_lune(double angle, std::vector<double> marks) {
        PieceSpec s;
        s.type = PieceType::MarkedLune;
        s.lune_angle = angle;
        s.lune_marks = std::move(marks);
        return s;
    }
    static PieceSpec hemisphere(std::vector<double> azimuths) {
        PieceSpec s;
        s.type = PieceType::Hemisphere;
        s.hemisphere_marks = std::move(azimuths);
        return s;
    }
    static PieceSpec concave(std::vector<UnitVec> boundary) {
        PieceSpec s;
        s.type = PieceType::ConcaveEmbedded;
        s.concave_boundary = std::move(boundary);
        return s;
    }
};

// Realized standard piece: a polygonal metric with labelled corners.
// Ray pieces stay symbolic (empty complex).
struct Piece {
    PieceSpec spec;
    MetricComplex complex;
    std::vector<VertexId> corners; // CCW boundary corners
    bool symbolic() const { return spec.type == PieceType::Ray; }
};

// ---------------------------------------------------------------------------
// mesh builders
// ---------------------------------------------------------------------------

namespace meshing {

// Fill angular gaps so no consecutive pair exceeds `max_gap`.
inline std::vector<double> fill_params(double from, double to, double max_gap,
                                       const std::vector<double>& interior) {
    std::vector<double> seq = {from};
    for (double m : interior) seq.push_back(m);
    seq.push_back(to);
    std::sort(seq.begin(), seq.end());
    std::vector<double> out;
    for (size_t i = 0; i + 1 < seq.size(); ++i) {
        out.push_back(seq[i]);
        double gap = seq[i + 1] - seq[i];
        int extra = (int)std::ceil(gap / max_gap) - 1;
        for (int j = 1; j <= extra; ++j)
            out.push_back(seq[i] + gap * j / (extra + 1));
    }
    out.push_back(seq.back());
    return out;
}

struct SlitSphereMesh {
    MetricComplex complex;
    VertexId corner_a, corner_b;      // slit endpoints (angle 2pi)
    std::vector<VertexId> marks_a;    // requested marks on boundary copy A
    std::vector<VertexId> marks_b;    // and on copy B
};

// Sphere slit along the arc from A, rotating toward `via`, of length `len`
// (the minimizing arc when len < pi; for len == pi, `via` selects the
// semicircle). Copy A of the slit is the boundary run A->..->B whose interior
// lies on the `A x via` side.
inline SlitSphereMesh slit_sphere_at(const UnitVec& A, const UnitVec& via, double len,
                                     const std::vector<double>& marks_on_a = {},
                                     const std::vector<double>& marks_on_b = {}) {
    if (!(len > geom_tolerance() && len <= kPi + geom_tolerance()))
        throw InvalidPieceParams("slit length must lie in (0, pi]");
    len = std::min(len, kPi);
    for (const auto* marks : {&marks_on_a, &marks_on_b})
        for (double m : *marks)
            if (!(m > geom_tolerance() && m < len - geom_tolerance()))
                throw InvalidPieceParams("slit marks must lie strictly inside the slit");

    Vec3 t0 = tangent_toward(A, via);
    UnitVec h(A.cross(UnitVec(t0))); // pole of the slit circle
    auto at = [&](double phi) { return walk(A, t0, phi); };

    const double max_gap = kPi / 2;
    auto seqA = fill_params(0, len, max_gap, marks_on_a);
    auto seqB = fill_params(0, len, max_gap, marks_on_b);
    auto seqC = fill_params(len, kTwoPi, max_gap, {});
    // each slit copy needs an interior vertex, or the copies would share one
    // mesh edge and the slit would seal shut
    if (seqA.size() == 2) seqA = {0, len / 2, len};
    if (seqB.size() == 2) seqB = {0, len / 2, len};

    MetricComplexBuilder b;
    VertexId va = b.add_vertex(VertexRole::Completion, A);
    VertexId vb = b.add_vertex(VertexRole::Completion, at(len));
    VertexId ph = b.add_vertex(VertexRole::Interior, h);
    VertexId pl = b.add_vertex(VertexRole::Interior, h.antipode());

    SlitSphereMesh out;
    auto make_side = [&](const std::vector<double>& seq, bool side_a,
                         const std::vector<double>& marks) {
        std::vector<VertexId> ids;
        std::vector<VertexId> mark_ids;
        for (double phi : seq) {
            if (phi <= geom_tolerance()) {
                ids.push_back(va);
            } else if (phi >= len - geom_tolerance()) {
                ids.push_back(vb);
            } else {
                VertexId v = b.add_vertex(VertexRole::EdgeMark, at(phi));
                ids.push_back(v);
                for (double m : marks)
                    if (std::fabs(m - phi) < 1e-12) mark_ids.push_back(v);
            }
        }
        (void)side_a;
        return std::pair(ids, mark_ids);
    };
    auto [idsA, marksA] = make_side(seqA, true, marks_on_a);
    auto [idsB, marksB] = make_side(seqB, false, marks_on_b);
    std::vector<VertexId> idsC;
    for (double phi : seqC) {
        if (phi <= len + geom_tolerance())
            idsC.push_back(vb);
        else if (phi >= kTwoPi - geom_tolerance())
            idsC.push_back(va);
        else
            idsC.push_back(b.add_vertex(VertexRole::Interior, at(phi)));
    }

    // upper fan (pole h) over copy A + complement; lower fan over copy B + complement
    std::vector<VertexId> upper = idsA;
    upper.insert(upper.end(), idsC.begin() + 1, idsC.end());
    std::vector<VertexId> lower = idsB;
    lower.insert(lower.end(), idsC.begin() + 1, idsC.end());
    for (size_t i = 0; i + 1 < upper.size(); ++i) b.add_triangle(ph, upper[i], upper[i + 1]);
    for (size_t i = 0; i + 1 < lower.size(); ++i) b.add_triangle(pl, lower[i + 1], lower[i]);

    out.complex = b.build();
    out.corner_a = va;
    out.corner_b = vb;
    out.marks_a = marksA;
    out.marks_b = marksB;
    return out;
}

struct HemisphereMesh {
    MetricComplex complex;
    std::vector<VertexId> corners; // at the requested azimuths, CCW
};

// Hemisphere around `pole`, corners on its equator at the given CCW azimuths
// (measured from an arbitrary but fixed meridian).
inline HemisphereMesh hemisphere_at(const UnitVec& pole, std::vector<double> azimuths) {
    if (azimuths.size() < 2) throw InvalidPieceParams("hemisphere needs >= 2 marks");
    std::sort(azimuths.begin(), azimuths.end());
    if (azimuths.back() - azimuths.front() >= kTwoPi - geom_tolerance())
        throw InvalidPieceParams("azimuths must span less than a full turn");
    Vec3 ref = std::fabs(pole.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 e1 = UnitVec(ref - pole.vec() * pole.vec().dot(ref)).vec();
    Vec3 e2 = pole.vec().cross(e1);
    auto at = [&](double az) {
        return UnitVec(e1 * std::cos(az) + e2 * std::sin(az));
    };

    MetricComplexBuilder b;
    VertexId ph = b.add_vertex(VertexRole::Interior, pole);
    std::vector<double> full = azimuths;
    full.push_back(azimuths.front() + kTwoPi);
    HemisphereMesh out;
    std::vector<VertexId> ring;
    std::vector<size_t> corner_slots;
    for (size_t i = 0; i + 1 < full.size(); ++i) {
        auto seg = fill_params(full[i], full[i + 1], kPi / 2, {});
        for (size_t j = 0; j + 1 < seg.size(); ++j) {
            VertexRole role = (j == 0) ? VertexRole::Completion : VertexRole::EdgeMark;
            if (j == 0) corner_slots.push_back(ring.size());
            ring.push_back(b.add_vertex(role, at(seg[j])));
        }
    }
    for (size_t i = 0; i < ring.size(); ++i)
        b.add_triangle(ph, ring[i], ring[(i + 1) % ring.size()]);
    out.complex = b.build();
    for (size_t s : corner_slots) out.corners.push_back(ring[s]);
    return out;
}

// Fan over explicitly-positioned equator points (CCW around the pole).
// The points must lie on the pole's equator within tolerance.
inline HemisphereMesh hemisphere_fan_at(const UnitVec& pole,
                                        const std::vector<UnitVec>& points) {
    if (points.size() < 2) throw InvalidPieceParams("hemisphere needs >= 2 marks");
    for (const auto& p : points)
        if (std::fabs(p.dot(pole)) > 1e-7)
            throw InvalidPieceParams("hemisphere mark off the equator");
    Vec3 e1 = points[0].vec();
    Vec3 e2 = pole.vec().cross(e1);
    std::vector<double> az;
    double prev = 0;
    az.push_back(0);
    for (size_t i = 1; i < points.size(); ++i) {
        double a = std::atan2(points[i].vec().dot(e2), points[i].vec().dot(e1));
        while (a < prev + 1e-12) a += kTwoPi;
        if (a >= kTwoPi) throw InvalidPieceParams("marks not in CCW order");
        az.push_back(a);
        prev = a;
    }
    MetricComplexBuilder b;
    VertexId ph = b.add_vertex(VertexRole::Interior, pole);
    auto at = [&](double a) {
        return UnitVec(e1 * std::cos(a) + e2 * std::sin(a));
    };
    HemisphereMesh out;
    std::vector<VertexId> ring;
    std::vector<size_t> corner_slots;
    std::vector<double> full = az;
    full.push_back(az.front() + kTwoPi);
    for (size_t i = 0; i + 1 < full.size(); ++i) {
        auto seg = fill_params(full[i], full[i + 1], kPi / 2, {});
        for (size_t j = 0; j + 1 < seg.size(); ++j) {
            VertexRole role = (j == 0) ? VertexRole::Completion : VertexRole::EdgeMark;
            if (j == 0) corner_slots.push_back(ring.size());
            ring.push_back(b.add_vertex(role, j == 0 ? points[i] : at(seg[j])));
        }
    }
    for (size_t i = 0; i < ring.size(); ++i)
        b.add_triangle(ph, ring[i], ring[(i + 1) % ring.size()]);
    out.complex = b.build();
    for (size_t s : corner_slots) out.corners.push_back(ring[s]);
    return out;
}

struct LuneMesh {
    MetricComplex complex;
    VertexId north, south;
    std::vector<VertexId> marks; // on the first edge (north -> south)
};

// Lune of the given angle with vertices at +-ez; the first boundary edge runs
// from north to south through the meridian of ex, optionally subdivided by
// marks at the given arclengths from north.
inline LuneMesh lune_at(double angle, const std::vector<double>& marks) {
    if (!(angle > geom_tolerance() && angle <= kTwoPi + geom_tolerance()))
        throw InvalidPieceParams("lune angle must lie in (0, 2pi]");
    angle = std::min(angle, kTwoPi);
    for (double m : marks)
        if (!(m > geom_tolerance() && m < kPi - geom_tolerance()))
            throw InvalidPieceParams("lune marks must lie strictly inside the edge");

    int wedges = std::max(1, (int)std::ceil(angle / (kPi / 2)));
    MetricComplexBuilder b;
    VertexId n = b.add_vertex(VertexRole::Completion, ez());
    VertexId s = b.add_vertex(VertexRole::Completion, ez().antipode());
    std::vector<VertexId> eq;
    for (int j = 0; j <= wedges; ++j) {
        double az = angle * j / wedges;
        VertexRole role =
            (j == 0 || j == wedges) ? VertexRole::EdgeMark : VertexRole::Interior;
        eq.push_back(b.add_vertex(role, UnitVec(std::cos(az), std::sin(az), 0)));
    }
    // boundary cycle: north -> (meridian az 0) -> south -> (meridian az angle) -> north
    for (int j = 0; j < wedges; ++j) {
        b.add_triangle(n, eq[j], eq[j + 1]);
        b.add_triangle(s, eq[j + 1], eq[j]);
    }
    MetricComplex c = b.build();

    LuneMesh out;
    out.north = n;
    out.south = s;
    // insert marks on the north->south edge at azimuth 0 (path n, eq[0], s)
    std::vector<double> ms = marks;
    std::sort(ms.begin(), ms.end());
    std::vector<VertexId> vmap(c.vertex_count());
    for (VertexId v = 0; v < c.vertex_count(); ++v) vmap[v] = v;
    for (double m : ms) {
        auto path = boundary_path(c, vmap[n], vmap[s]); // the az-0 meridian edge
        double acc = 0;
        for (size_t i = 0; i + 1 < path.size(); ++i) {
            double L = c.edge_length(path[i], path[i + 1]);
            if (m <= acc + 1e-9) {
                out.marks.push_back(path[i]); // mark sits on an existing vertex
                break;
            }
            if (m < acc + L - 1e-9) {
                UnitVec p = walk(c.pos(path[i]),
                                 tangent_toward(c.pos(path[i]), c.pos(path[i + 1])),
                                 m - acc);
                auto sr = split_boundary_edge(c, path[i], path[i + 1], p);
                c = sr.complex;
                for (auto& mm : vmap) mm = sr.vmap[mm];
                for (auto& mm : out.marks) mm = sr.vmap[mm];
                out.marks.push_back(sr.vmap.back());
                break;
            }
            acc += L;
        }
    }
    out.complex = c;
    out.north = vmap[n];
    out.south = vmap[s];
    return out;
}

struct ConcaveMesh {
    MetricComplex complex;
    std::vector<VertexId> corners;
};

inline bool arcs_cross(const UnitVec& a, const UnitVec& b, const UnitVec& c,
                       const UnitVec& d) {
    // proper crossing of minor arcs ab and cd (shared endpoints do not count)
    Vec3 n1 = a.cross(b), n2 = c.cross(d);
    double da = n2.dot(a.vec()), db = n2.dot(b.vec());
    double dc = n1.dot(c.vec()), dd = n1.dot(d.vec());
    const double eps = 1e-12;
    if (da * db > -eps || dc * dd > -eps) return false;
    // both straddle: intersection point must lie on both minor arcs
    Vec3 u = n1.cross(n2);
    if (u.norm() < 1e-14) return false;
    UnitVec q(u);
    auto on_arc = [&](const UnitVec& x, const UnitVec& y, const UnitVec& p) {
        return dist(x, p) + dist(p, y) <= dist(x, y) + 1e-9;
    };
    if (on_arc(a, b, q) && on_arc(c, d, q)) return true;
    UnitVec q2 = q.antipode();
    return on_arc(a, b, q2) && on_arc(c, d, q2);
}

inline bool polygon_embedded(const std::vector<UnitVec>& w) {
    size_t m = w.size();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j) {
            bool adjacent = (j == i + 1) || (i == 0 && j == m - 1);
            if (adjacent) continue;
            if (arcs_cross(w[i], w[(i + 1) % m], w[j], w[(j + 1) % m])) return false;
        }
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j)
            if (same_point(w[i], w[j], 1e-9) &&
                !(j == i + 1 || (i == 0 && j == m - 1)))
                return false;
    return true;
}

// Region to the LEFT of the CCW cycle `w`, all of whose interior angles are
// at least pi (the complement of the convex polygon to the right). Meshed as
// subdivided cone wedges from the antipode of a point inside the complement.
inline ConcaveMesh concave_at(const std::vector<UnitVec>& w) {
    const double tol = geom_tolerance();
    size_t m = w.size();
    if (m < 2) throw InvalidPieceParams("concave polygon needs >= 2 vertices");
    for (size_t i = 0; i < m; ++i) {
        double L = dist(w[i], w[(i + 1) % m]);
        if (L <= tol) throw InvalidPieceParams("zero-length boundary edge");
        if (L >= kPi - tol) throw InvalidPieceParams("concave polygon edge of length pi");
    }
    if (!polygon_embedded(w)) throw InvalidPieceParams("boundary polygon not embedded");
    for (size_t i = 0; i < m && m > 2; ++i) {
        double ang = ccw_angle(w[i], w[(i + 1) % m], w[(i + m - 1) % m]);
        if (ang < kPi - 1e-7)
            throw InvalidPieceParams("interior angle below pi at corner " +
                                     std::to_string(i));
    }

    // center of the convex complement: try several candidates and keep the
    // first strictly inside (right of every cycle edge)
    auto strictly_inside = [&](const UnitVec& c) {
        for (size_t i = 0; i < m; ++i)
            if (det3(w[i].vec(), w[(i + 1) % m].vec(), c.vec()) >= -1e-12) return false;
        return true;
    };
    std::optional<UnitVec> c_in;
    {
        std::vector<Vec3> cands;
        Vec3 acc{0, 0, 0};
        for (size_t i = 0; i < m; ++i) acc = acc - w[i].cross(w[(i + 1) % m]);
        cands.push_back(acc);
        Vec3 accn{0, 0, 0};
        for (size_t i = 0; i < m; ++i) {
            Vec3 cr = w[(i + 1) % m].cross(w[i]);
            if (cr.norm() > 1e-12) accn = accn + cr.normalized();
        }
        cands.push_back(accn);
        Vec3 cent{0, 0, 0};
        for (const auto& p : w) cent = cent + p.vec();
        cands.push_back(cent);
        // inward offsets from edge midpoints of the complement cycle
        for (size_t i = 0; i < m; ++i) {
            UnitVec mid = slerp(w[i], w[(i + 1) % m], 0.5);
            Vec3 inward = w[(i + 1) % m].cross(w[i]).normalized();
            for (double eps : {0.3, 0.1, 0.02})
                cands.push_back(mid.vec() * std::cos(eps) + inward * std::sin(eps));
        }
        for (const auto& cand : cands) {
            if (cand.norm() < 1e-12) continue;
            UnitVec c(cand);
            if (strictly_inside(c)) {
                c_in = c;
                break;
            }
        }
    }
    if (!c_in) throw InvalidPieceParams("no interior center for the complement");
    UnitVec apex = c_in->antipode();

    MetricComplexBuilder b;
    VertexId va = b.add_vertex(VertexRole::Interior, apex);
    ConcaveMesh out;
    std::vector<VertexId> ring;          // full subdivided boundary ring
    std::vector<size_t> corner_slots;
    std::vector<UnitVec> ring_pos;
    for (size_t i = 0; i < m; ++i) {
        const UnitVec &A = w[i], &B = w[(i + 1) % m];
        double L = dist(A, B);
        int segs = std::max(1, (int)std::ceil(L / 1.2));
        corner_slots.push_back(ring.size());
        for (int j = 0; j < segs; ++j) {
            UnitVec p = slerp(A, B, (double)j / segs);
            ring.push_back(b.add_vertex(j == 0 ? VertexRole::Completion
                                               : VertexRole::EdgeMark,
                                        p));
            ring_pos.push_back(p);
        }
    }
    size_t R = ring.size();
    // rows between apex and ring: fractions of each ray
    double maxlen = 0;
    for (const auto& p : ring_pos) maxlen = std::max(maxlen, dist(apex, p));
    int rows = std::max(1, (int)std::ceil(maxlen / 1.2));
    std::vector<std::vector<VertexId>> grid(rows + 1);
    grid[rows] = ring;
    grid[0] = std::vector<VertexId>(R, va);
    for (int r = 1; r < rows; ++r) {
        grid[r].resize(R);
        for (size_t i = 0; i < R; ++i) {
            double len = dist(apex, ring_pos[i]);
            UnitVec p = walk(apex, tangent_toward(apex, ring_pos[i]), len * r / rows);
            grid[r][i] = b.add_vertex(VertexRole::Interior, p);
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (size_t i = 0; i < R; ++i) {
            size_t j = (i + 1) % R;
            VertexId a0 = grid[r][i], a1 = grid[r][j];
            VertexId b0 = grid[r + 1][i], b1 = grid[r + 1][j];
            if (r == 0) {
                b.add_triangle(va, b0, b1);
            } else {
                b.add_triangle(a0, b0, b1);
                b.add_triangle(a0, b1, a1);
            }
        }
    }
    out.complex = b.build();
    for (size_t s : corner_slots) out.corners.push_back(ring[s]);
    return out;
}

} // namespace meshing

// ---------------------------------------------------------------------------
// make_piece
// ---------------------------------------------------------------------------

inline Piece make_piece(const PieceSpec& spec) {
    Piece p;
    p.spec = spec;
    switch (spec.type) {
        case PieceType::Ray: {
            if (!(spec.slit_length > geom_tolerance() &&
                  spec.slit_length <= kPi + geom_tolerance()))
                throw InvalidPieceParams("ray slit length must lie in (0, pi]");
            return p; // symbolic
        }
        case PieceType::SlitSphere: {
            auto msh = meshing::slit_sphere_at(ez(), ex(), spec.slit_length);
            p.complex = msh.complex;
            p.corners = {msh.corner_a, msh.corner_b};
            break;
        }
        case PieceType::SmallTriangle: {
            const auto& t = spec.triangle;
            auto meas = triangle_measures(t[0], t[1], t[2]); // throws if degenerate
            if (meas.orientation <= 0)
                throw InvalidPieceParams("triangle vertices must be CCW");
            for (double a : meas.angles)
                if (a >= kPi - geom_tolerance())
                    throw InvalidPieceParams("small triangle needs angles < pi");
            MetricComplexBuilder b;
            VertexId v0 = b.add_vertex(VertexRole::Completion, t[0]);
            VertexId v1 = b.add_vertex(VertexRole::Completion, t[1]);
            VertexId v2 = b.add_vertex(VertexRole::Completion, t[2]);
            b.add_triangle(v0, v1, v2);
            p.complex = b.build();
            p.corners = {v0, v1, v2};
            break;
        }
        case PieceType::MarkedLune: {
            auto msh = meshing::lune_at(spec.lune_angle, spec.lune_marks);
            p.complex = msh.complex;
            p.corners = {msh.north};
            // marks are corners of the piece, in boundary order north -> south
            {
                // promote marks to Completion
                MetricComplexBuilder b;
                for (VertexId v = 0; v < p.complex.vertex_count(); ++v)
                    b.add_vertex(p.complex.role(v), p.complex.pos(v));
                for (VertexId mrk : msh.marks) b.set_role(mrk, VertexRole::Completion);
                for (const auto& tr : p.complex.triangles())
                    b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
                p.complex = b.build();
            }
            std::vector<VertexId> sorted_marks = msh.marks;
            std::sort(sorted_marks.begin(), sorted_marks.end(),
                      [&](VertexId a, VertexId bb) {
                          return dist(p.complex.pos(msh.north), p.complex.pos(a)) <
                                 dist(p.complex.pos(msh.north), p.complex.pos(bb));
                      });
            for (VertexId mrk : sorted_marks) p.corners.push_back(mrk);
            p.corners.push_back(msh.south);
            break;
        }
        case PieceType::Hemisphere: {
            auto msh = meshing::hemisphere_at(ez(), spec.hemisphere_marks);
            p.complex = msh.complex;
            p.corners = msh.corners;
            break;
        }
        case PieceType::ConcaveEmbedded: {
            auto msh = meshing::concave_at(spec.concave_boundary);
            p.complex = msh.complex;
            p.corners = msh.corners;
            break;
        }
    }
    auto report = p.complex.validate();
    if (!report.empty())
        throw InvalidPieceParams("piece realization invalid: " + report.front().kind +
                                 " (" + report.front().detail + ")");
    return p;
}

// ---------------------------------------------------------------------------
// KGon / KPointMetric
// ---------------------------------------------------------------------------

// Compact polygonal metric: a valid disk complex plus its CCW corner cycle.
struct KGon {
    MetricComplex complex;
    std::vector<VertexId> corners;

    int k() const { return (int)corners.size(); }

    std::vector<VertexId> edge_path(int i) const {
        return boundary_path(complex, corners[i], corners[(i + 1) % k()]);
    }
    double edge_length(int i) const { return path_length(complex, edge_path(i)); }
    std::vector<double> edge_lengths() const {
        std::vector<double> out;
        for (int i = 0; i < k(); ++i) out.push_back(edge_length(i));
        return out;
    }
    double corner_angle_at(int i) const { return complex.vertex_angle(corners[i]); }
    double area() const { return complex.total_area(); }

    std::vector<Violation> validate() const {
        auto report = complex.validate();
        if (!report.empty()) return report;
        if (corners.size() < 2) {
            report.push_back({"BadPolygon", "fewer than 2 corners"});
            return report;
        }
        // corners must be exactly the Completion vertices, in boundary order
        for (VertexId v = 0; v < complex.vertex_count(); ++v) {
            bool is_corner =
                std::find(corners.begin(), corners.end(), v) != corners.end();
            bool is_completion =
                complex.on_boundary(v) && complex.role(v) == VertexRole::Completion;
            if (is_corner != is_completion)
                report.push_back({"BadPolygon",
                                  "corner list does not match completion vertices"});
        }
        if (!report.empty()) return report;
        for (int i = 0; i < k(); ++i) {
            auto path = edge_path(i);
            for (size_t j = 1; j + 1 < path.size(); ++j)
                if (std::find(corners.begin(), corners.end(), path[j]) != corners.end())
                    report.push_back({"BadPolygon", "corner inside an edge path"});
            double L = path_length(complex, path);
            if (L <= geom_tolerance() || L > kPi + 1e-9)
                report.push_back({"BadPolygon",
                                  "edge " + std::to_string(i) + " length " +
                                      std::to_string(L) + " outside (0, pi]"});
        }
        return report;
    }
};

// Build the KGon wrapper around a complex: corners are the boundary
// Completion vertices in CCW order, starting at `start` (or the smallest id).
inline KGon kgon_from_complex(const MetricComplex& c, VertexId start = -1) {
    std::vector<VertexId> bverts;
    VertexId v0 = -1;
    for (VertexId v = 0; v < c.vertex_count(); ++v)
        if (c.on_boundary(v) && c.role(v) == VertexRole::Completion) {
            if (v0 == -1 || v < v0) v0 = v;
        }
    if (start != -1) v0 = start;
    if (v0 == -1) throw InternalError("no completion vertices on boundary");
    KGon g;
    g.complex = c;
    VertexId v = v0;
    int guard = c.vertex_count() + 1;
    do {
        if (c.role(v) == VertexRole::Completion) g.corners.push_back(v);
        v = c.boundary_next(v);
    } while (v != v0 && guard-- > 0);
    return g;
}

// Non-compact k-point metric: compact core + one symbolic ray of slit spheres
// per edge. `excess[i]` counts slit spheres absorbed into the stored core
// beyond the small truncation at edge i.
struct KPointMetric {
    KGon core;
    std::vector<double> ray_slit_lengths;
    std::vector<int> excess;

    int k() const { return core.k(); }
};

inline KPointMetric attach_rays(const KGon& g) {
    if (g.k() < 3) throw InvalidPieceParams("k-point metrics need k >= 3");
    KPointMetric d;
    d.core = g;
    for (int i = 0; i < g.k(); ++i) {
        double L = g.edge_length(i);
        if (L <= geom_tolerance()) throw ZeroLengthEdge("edge " + std::to_string(i));
        d.ray_slit_lengths.push_back(L);
    }
    d.excess.assign(g.k(), 0);
    return d;
}

// ---------------------------------------------------------------------------
// assemble
// ---------------------------------------------------------------------------

struct Gluing {
    int piece_a; // edge (corner index -> next corner) of piece_a
    int edge_a;
    int piece_b;
    int edge_b;
};

struct AssembleResult {
    KGon kgon;
    std::vector<std::vector<VertexId>> maps; // per piece: old vertex -> merged id
};

// Glue pieces along whole polygon edges; the gluing graph must be a tree.
// Returns the assembled polygonal metric with corners relabelled CCW from the
// surviving image of piece 0's first corner, plus per-piece vertex maps.
inline AssembleResult assemble_with_maps(const std::vector<Piece>& pieces,
                                         const std::vector<Gluing>& gluings) {
    if (pieces.empty()) throw InvalidPieceParams("no pieces");
    for (const auto& p : pieces)
        if (p.symbolic()) throw InvalidPieceParams("cannot assemble symbolic rays");

    size_t n = pieces.size();
    // tree check
    {
        std::vector<int> parent(n);
        for (size_t i = 0; i < n; ++i) parent[i] = (int)i;
        std::function<int(int)> find = [&](int x) {
            return parent[x] == x ? x : parent[x] = find(parent[x]);
        };
        if (gluings.size() != n - 1) throw GluingCycle("gluing graph is not a tree");
        for (const auto& g : gluings) {
            int a = find(g.piece_a), b = find(g.piece_b);
            if (a == b) throw GluingCycle("cycle in gluing graph");
            parent[a] = b;
        }
        std::set<std::pair<int, int>> used;
        for (const auto& g : gluings) {
            if (!used.insert({g.piece_a, g.edge_a}).second ||
                !used.insert({g.piece_b, g.edge_b}).second)
                throw GluingCycle("edge glued twice");
        }
    }

    // BFS attach order from piece 0
    std::vector<std::vector<int>> adj(n);
    for (size_t gi = 0; gi < gluings.size(); ++gi) {
        adj[gluings[gi].piece_a].push_back((int)gi);
        adj[gluings[gi].piece_b].push_back((int)gi);
    }
    std::vector<bool> attached(n, false);
    std::vector<std::vector<VertexId>> maps(n); // piece vertex -> merged vertex
    MetricComplex merged = pieces[0].complex;
    attached[0] = true;
    maps[0].resize(pieces[0].complex.vertex_count());
    for (VertexId v = 0; v < pieces[0].complex.vertex_count(); ++v) maps[0][v] = v;

    std::vector<int> frontier = {0};
    std::vector<bool> gdone(gluings.size(), false);
    while (!frontier.empty()) {
        int cur = frontier.back();
        frontier.pop_back();
        for (int gi : adj[cur]) {
            if (gdone[gi]) continue;
            const auto& g = gluings[gi];
            int other = g.piece_a == cur ? g.piece_b : g.piece_a;
            if (attached[other]) continue;
            gdone[gi] = true;
            // arc on the merged complex (image of cur's edge) and on `other`
            int edge_cur = g.piece_a == cur ? g.edge_a : g.edge_b;
            int edge_oth = g.piece_a == cur ? g.edge_b : g.edge_a;
            const Piece& pc = pieces[cur];
            const Piece& po = pieces[other];
            VertexId a_from = maps[cur][pc.corners[edge_cur]];
            VertexId a_to = maps[cur][pc.corners[(edge_cur + 1) % pc.corners.size()]];
            VertexId b_from = po.corners[edge_oth];
            VertexId b_to = po.corners[(edge_oth + 1) % po.corners.size()];
            auto res = glue(merged, a_from, a_to, po.complex, b_from, b_to);
            merged = res.complex;
            // update all existing maps, set the new one
            for (size_t pi = 0; pi < n; ++pi)
                if (attached[pi])
                    for (auto& mv : maps[pi]) mv = res.map1[mv];
            maps[other] = res.map2;
            attached[other] = true;
            frontier.push_back(cur);
            frontier.push_back(other);
            break; // restart scanning from the frontier
        }
    }
    for (size_t i = 0; i < n; ++i)
        if (!attached[i]) throw GluingCycle("gluing graph not connected");

    // start corner: surviving image of piece 0's first corner that is still a corner
    VertexId start = -1;
    for (size_t pi = 0; pi < n && start == -1; ++pi)
        for (VertexId corner : pieces[pi].corners) {
            VertexId v = maps[pi][corner];
            if (merged.on_boundary(v) && merged.role(v) == VertexRole::Completion) {
                start = v;
                break;
            }
        }
    KGon out = kgon_from_complex(merged, start);
    auto report = out.validate();
    if (!report.empty())
        throw NotDiskResult("assembled metric invalid: " + report.front().kind + " " +
                            report.front().detail);
    return {out, maps};
}

inline KGon assemble(const std::vector<Piece>& pieces, const std::vector<Gluing>& gluings) {
    return assemble_with_maps(pieces, gluings).kgon;
}

// Rotate corner labels so that `corner_index` becomes corner 0.
inline KGon relabel(const KGon& g, int corner_index) {
    KGon out = g;
    std::rotate(out.corners.begin(), out.corners.begin() + corner_index,
                out.corners.end());
    return out;
}

// ---------------------------------------------------------------------------
// example family: k-gons with k-2 edges of length pi
// ---------------------------------------------------------------------------

// Hemisphere 3-gon with edges (pi, n, pi-n), grown by repeated reflection to a
// k-gon with k-2 edges of length pi (remaining edges n,n for k even and
// n,pi-n for k odd). Corner labels start so the edge pattern reads
// (n, pi, ..., pi, n|pi-n).
inline KGon example_family(int kk, double n) {
    if (kk < 3 || !(n > geom_tolerance() && n < kPi - geom_tolerance()))
        throw ParamOutOfRange("need k >= 3 and n in (0, pi)");

    // hemisphere 3-gons; the mirror copy realizes the paper's reflection
    auto base = [&](bool mirror) {
        std::vector<double> az =
            mirror ? std::vector<double>{0, kPi - n, kPi} : std::vector<double>{0, kPi, kPi + n};
        auto msh = meshing::hemisphere_at(ez(), az);
        Piece p;
        p.spec = PieceSpec::hemisphere(az);
        p.complex = msh.complex;
        p.corners = msh.corners;
        return p;
    };

    // the three developed base points, in the frame of the first piece
    std::vector<UnitVec> base_points = {UnitVec(1, 0, 0),
                                        UnitVec(std::cos(kPi), std::sin(kPi), 0),
                                        UnitVec(std::cos(kPi + n), std::sin(kPi + n), 0)};
    auto develops_to_base = [&](const KGon& g) {
        for (VertexId v : g.corners) {
            bool ok = false;
            for (const auto& bp : base_points) ok |= same_point(g.complex.pos(v), bp, 1e-7);
            if (!ok) return false;
        }
        return true;
    };
    auto pattern_ok = [&](const KGon& g, int k_target) {
        auto lens = g.edge_lengths();
        int pis = 0, ns = 0, cs = 0;
        for (double L : lens) {
            if (std::fabs(L - kPi) < 1e-7)
                ++pis;
            else if (std::fabs(L - n) < 1e-7)
                ++ns;
            else if (std::fabs(L - (kPi - n)) < 1e-7)
                ++cs;
        }
        if ((int)lens.size() != k_target || pis != k_target - 2) return false;
        if (std::fabs(n - (kPi - n)) < 1e-7) return ns + cs == 2;
        return k_target % 2 == 0 ? (ns == 2) : (ns == 1 && cs == 1);
    };

    KGon g;
    {
        Piece p = base(false);
        g.complex = p.complex;
        g.corners = p.corners;
    }
    const double tol = 1e-9;
    for (int k_cur = 3; k_cur < kk; ++k_cur) {
        double want = (k_cur % 2 == 1) ? kPi - n : n;
        bool grown = false;
        for (bool mirror : {true, false}) {
            Piece p = base(mirror);
            std::vector<double> plen;
            for (size_t i = 0; i < p.corners.size(); ++i)
                plen.push_back(path_length(
                    p.complex, boundary_path(p.complex, p.corners[i],
                                             p.corners[(i + 1) % p.corners.size()])));
            for (int edge = 0; edge < g.k() && !grown; ++edge) {
                if (std::fabs(g.edge_length(edge) - want) > tol) continue;
                for (size_t pe = 0; pe < plen.size() && !grown; ++pe) {
                    if (std::fabs(plen[pe] - want) > tol) continue;
                    auto res = glue(g.complex, g.corners[edge],
                                    g.corners[(edge + 1) % g.k()], p.complex,
                                    p.corners[pe], p.corners[(pe + 1) % p.corners.size()]);
                    KGon cand = kgon_from_complex(res.complex);
                    if (pattern_ok(cand, k_cur + 1) && develops_to_base(cand)) {
                        g = cand;
                        grown = true;
                    }
                }
            }
            if (grown) break;
        }
        if (!grown) throw InternalError("example family growth step failed");
    }

    // snap coordinate dust so the k-2 length-pi edges measure exactly pi (the
    // construction's corners sit at azimuths 0, pi, pi+n on an exact equator)
    {
        MetricComplexBuilder b;
        for (VertexId v = 0; v < g.complex.vertex_count(); ++v) {
            UnitVec p = g.complex.pos(v);
            auto snap = [](double x) {
                if (std::fabs(x) < 1e-14) return 0.0;
                if (std::fabs(x - 1) < 1e-14) return 1.0;
                if (std::fabs(x + 1) < 1e-14) return -1.0;
                return x;
            };
            b.add_vertex(g.complex.role(v), UnitVec(snap(p.x), snap(p.y), snap(p.z)));
        }
        for (const auto& tr : g.complex.triangles())
            b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        g.complex = b.build();
    }

    // rotate labels: start at a corner whose outgoing edge has length n and
    // whose incoming edge is the non-pi tail (pattern n, pi, ..., pi, tail)
    for (int i = 0; i < g.k(); ++i) {
        double out_len = g.edge_length(i);
        double in_len = g.edge_length((i + g.k() - 1) % g.k());
        if (std::fabs(out_len - n) < 1e-7 && std::fabs(in_len - kPi) > 1e-7)
            return relabel(g, i);
    }
    return g;
}

// Absorb one slit sphere from the ray at edge i into the stored core (a
// representation change: the underlying k-point metric is unchanged).
inline KPointMetric absorb_from_ray(const KPointMetric& d, int edge) {
    const KGon& g = d.core;
    auto path = g.edge_path(edge);
    double L = path_length(g.complex, path);
    UnitVec A = g.complex.pos(path.front());
    UnitVec mid = point_along_path(g.complex, path, L / 2);
    auto msh = meshing::slit_sphere_at(A, mid, L);
    auto res = glue(g.complex, path.front(), path.back(), msh.complex, msh.corner_a,
                    msh.corner_b);
    KPointMetric out = d;
    out.core.complex = res.complex;
    for (auto& v : out.core.corners) v = res.map1[v];
    out.excess[edge] += 1;
    // corner list unchanged as labels; verify polygon intact
    auto report = out.core.validate();
    if (!report.empty())
        throw InternalError("absorb produced invalid core: " + report.front().kind);
    return out;
}

} // namespace spheremoduli
