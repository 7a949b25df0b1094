#pragma once

#include <optional>

#include "spheremoduli/pieces.hpp"

namespace spheremoduli {

// Geodesic of length <= pi joining two completion vertices through the
// interior. A continuous lune family is reported once, with the theta
// interval it sweeps at `from`.
struct Diagonal {
    int from_corner = -1, to_corner = -1; // polygon corner indices
    VertexId from = -1, to = -1;
    double length = 0;
    double theta = 0; // representative trace angle at `from`
    std::optional<std::pair<double, double>> family;
    TraceResult trace;
    bool consecutive(int k) const {
        int d = std::abs(from_corner - to_corner);
        return d == 1 || d == k - 1;
    }
};

namespace detail {

inline double azimuth_at(const MetricComplex& c, VertexId v, const UnitVec& target) {
    auto f = c.fan(v);
    Vec3 d0 = tangent_toward(c.pos(v), c.pos(f.front().from));
    Vec3 t = tangent_toward(c.pos(v), target);
    double ang = std::atan2(c.pos(v).vec().dot(d0.cross(t)), d0.dot(t));
    if (ang < 0) ang += kTwoPi;
    return ang;
}

// reversal-invariant signature of a traced path, for deduplication
inline std::vector<EdgeKey> path_signature(const TraceResult& tr) {
    std::vector<EdgeKey> sig;
    for (const auto& st : tr.steps) {
        if (st.enter_edge.first >= 0) sig.push_back(st.enter_edge);
        if (st.exit_edge.first >= 0) sig.push_back(st.exit_edge);
    }
    std::sort(sig.begin(), sig.end());
    sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
    return sig;
}

inline bool trace_reaches(const MetricComplex& c, VertexId v, double theta, VertexId w,
                          TraceResult* out = nullptr) {
    try {
        auto tr = trace_geodesic(c, v, theta);
        bool ok = tr.hit.kind == GeodesicHit::Kind::VertexHit && tr.hit.vertex == w;
        if (ok && out) *out = tr;
        return ok;
    } catch (const Error&) {
        return false;
    }
}

// angles at which the trace from v grazes some boundary vertex: the hit type
// is constant between consecutive breakpoints
inline std::vector<double> sweep_breakpoints(const MetricComplex& c, VertexId v) {
    double alpha = c.vertex_angle(v);
    std::vector<double> bp = {0.0, alpha};
    for (VertexId u = 0; u < c.vertex_count(); ++u) {
        if (u == v || !c.on_boundary(u)) continue;
        double du = dist(c.pos(v), c.pos(u));
        if (du <= geom_tolerance() || du >= kPi - geom_tolerance()) continue;
        double psi = azimuth_at(c, v, c.pos(u));
        for (double th = psi; th < alpha; th += kTwoPi)
            if (th > 1e-12) bp.push_back(th);
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
             bp.end());
    return bp;
}

} // namespace detail

// All diagonals of a polygonal metric, complete up to families: isolated
// diagonals are listed once each; each continuous family appears once with a
// nonempty theta interval. Sorted by (length, corner ids, theta).
inline std::vector<Diagonal> diagonals(const KGon& g) {
    const MetricComplex& c = g.complex;
    const double tol = geom_tolerance();
    int k = g.k();
    std::vector<Diagonal> found;

    for (int ci = 0; ci < k; ++ci) {
        VertexId v = g.corners[ci];
        const UnitVec& P = c.pos(v);
        double alpha = c.vertex_angle(v);
        std::vector<double> breakpoints; // computed lazily for families
        for (int cj = 0; cj < k; ++cj) {
            if (cj == ci) continue;
            VertexId w = g.corners[cj];
            const UnitVec& Q = c.pos(w);
            double d = dist(P, Q);
            if (d <= tol) continue;
            if (d < kPi - tol) {
                double psi = detail::azimuth_at(c, v, Q);
                for (double th = psi; th < alpha - 1e-12; th += kTwoPi) {
                    if (th < 1e-12) continue;
                    TraceResult tr;
                    if (!detail::trace_reaches(c, v, th, w, &tr)) continue;
                    if (std::fabs(tr.hit.length - d) > 1e-7) continue;
                    Diagonal diag;
                    diag.from_corner = ci;
                    diag.to_corner = cj;
                    diag.from = v;
                    diag.to = w;
                    diag.length = d;
                    diag.theta = th;
                    diag.trace = tr;
                    found.push_back(std::move(diag));
                }
            } else {
                // antipodal pair: scan for family intervals
                if (breakpoints.empty()) breakpoints = detail::sweep_breakpoints(c, v);
                const auto& bp = breakpoints;
                std::vector<char> reach(bp.size() - 1, 0);
                for (size_t gi = 0; gi + 1 < bp.size(); ++gi) {
                    double mid = 0.5 * (bp[gi] + bp[gi + 1]);
                    reach[gi] = detail::trace_reaches(c, v, mid, w) ? 1 : 0;
                }
                size_t gi = 0;
                while (gi < reach.size()) {
                    if (!reach[gi]) {
                        ++gi;
                        continue;
                    }
                    size_t ge = gi;
                    while (ge + 1 < reach.size() && reach[ge + 1]) ++ge;
                    double lo = bp[gi], hi = bp[ge + 1];
                    // refine the open endpoints by bisection
                    auto refine = [&](double bad, double good) {
                        for (int it = 0; it < 50; ++it) {
                            double m = 0.5 * (bad + good);
                            if (detail::trace_reaches(c, v, m, w))
                                good = m;
                            else
                                bad = m;
                        }
                        return good;
                    };
                    if (gi > 0 && !reach[gi - 1])
                        lo = refine(0.5 * (bp[gi - 1] + bp[gi]), 0.5 * (bp[gi] + bp[gi + 1]));
                    if (ge + 1 < reach.size() && !reach[ge + 1])
                        hi = refine(0.5 * (bp[ge + 1] + bp[ge + 2]),
                                    0.5 * (bp[ge] + bp[ge + 1]));
                    double mid = 0.5 * (lo + hi);
                    TraceResult tr;
                    if (detail::trace_reaches(c, v, mid, w, &tr)) {
                        Diagonal diag;
                        diag.from_corner = ci;
                        diag.to_corner = cj;
                        diag.from = v;
                        diag.to = w;
                        diag.length = kPi;
                        diag.theta = mid;
                        diag.family = std::make_pair(lo, hi);
                        diag.trace = tr;
                        found.push_back(std::move(diag));
                    }
                    gi = ge + 1;
                }
            }
        }
    }

    // deduplicate: each diagonal is found from both endpoints
    std::vector<Diagonal> out;
    std::vector<std::vector<EdgeKey>> sigs;
    for (auto& d : found) {
        auto sig = detail::path_signature(d.trace);
        bool dup = false;
        for (size_t i = 0; i < out.size() && !dup; ++i) {
            const auto& o = out[i];
            if (std::min(o.from_corner, o.to_corner) != std::min(d.from_corner, d.to_corner) ||
                std::max(o.from_corner, o.to_corner) != std::max(d.from_corner, d.to_corner))
                continue;
            if (std::fabs(o.length - d.length) > 1e-7) continue;
            if ((bool)o.family != (bool)d.family) continue;
            if (sigs[i] == sig) dup = true;
        }
        if (!dup) {
            out.push_back(d);
            sigs.push_back(std::move(sig));
        }
    }
    std::sort(out.begin(), out.end(), [](const Diagonal& a, const Diagonal& b) {
        if (std::fabs(a.length - b.length) > 1e-9) return a.length < b.length;
        int amin = std::min(a.from_corner, a.to_corner), bmin = std::min(b.from_corner, b.to_corner);
        if (amin != bmin) return amin < bmin;
        int amax = std::max(a.from_corner, a.to_corner), bmax = std::max(b.from_corner, b.to_corner);
        if (amax != bmax) return amax < bmax;
        return a.theta < b.theta;
    });
    return out;
}

enum class NoDiagonalClass { SmallTriangle, ConcaveEmbedded, HemisphereConcave };

// Classification of a polygonal metric without diagonals: a small triangle,
// or an embedded concave polygon (hemispheres reported separately).
inline NoDiagonalClass classify_no_diagonal(const KGon& g) {
    if (!diagonals(g).empty()) throw HasDiagonal("metric has a diagonal");
    const MetricComplex& c = g.complex;
    int k = g.k();
    std::vector<double> angles;
    for (int i = 0; i < k; ++i) angles.push_back(g.corner_angle_at(i));

    if (k == 3) {
        bool small = true;
        for (double a : angles) small &= a < kPi - 1e-9;
        if (small) return NoDiagonalClass::SmallTriangle;
    }
    bool hemi = true;
    for (double a : angles) hemi &= std::fabs(a - kPi) < 1e-7;
    if (hemi && std::fabs(c.total_area() - kTwoPi) < 1e-7)
        return NoDiagonalClass::HemisphereConcave;

    for (double a : angles)
        if (a < kPi - 1e-7)
            throw HasDiagonal("angle below pi implies a diagonal exists");
    // Embeddedness of the developed boundary (asserted by the theory; failure
    // signals a bug or tolerance breakdown, never a valid state)
    if (k > 2) {
        std::vector<UnitVec> poly;
        for (VertexId v : g.corners) poly.push_back(c.pos(v));
        if (!meshing::polygon_embedded(poly))
            throw EmbeddingCheckFailed("concave boundary develops with crossings");
    }
    return NoDiagonalClass::ConcaveEmbedded;
}

// ---------------------------------------------------------------------------
// canonical decomposition
// ---------------------------------------------------------------------------

struct DecompPiece {
    PieceType type = PieceType::SmallTriangle;
    MetricComplex complex;           // empty for rays
    std::vector<VertexId> corners;
    std::vector<int> src_corners;    // piece corner -> source corner index
    std::vector<TriId> provenance;   // piece triangle -> source triangle
    double param = 0;                // slit length / lune angle / ray slit length
    double area = 0;

    int k() const { return (int)corners.size(); }
};

struct DualEdge {
    int piece_a = -1, edge_a = -1;
    int piece_b = -1, edge_b = -1;
};

struct Decomposition {
    std::vector<DecompPiece> pieces;
    std::vector<DualEdge> dual_edges;
    double piece_area_sum() const {
        double s = 0;
        for (const auto& p : pieces)
            if (p.type != PieceType::Ray) s += p.area;
        return s;
    }
    std::vector<int> type_counts() const {
        std::vector<int> n(6, 0);
        for (const auto& p : pieces) n[(int)p.type]++;
        return n;
    }
};

namespace detail {

inline bool path_contains_point(const MetricComplex& c, const std::vector<VertexId>& path,
                                const UnitVec& q, double tol = 1e-9) {
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const UnitVec& a = c.pos(path[i]);
        const UnitVec& b = c.pos(path[i + 1]);
        if (dist(a, q) + dist(q, b) <= dist(a, b) + tol) return true;
    }
    return false;
}

struct PendingArc {
    int dual_index;
    bool as_a;                  // resolve into piece_a side of the dual edge
    std::vector<VertexId> path; // arc vertex ids in the owning item's complex
};

struct WorkItem {
    KGon g;
    std::vector<int> src;        // corner index -> source corner index
    std::vector<TriId> prov;     // triangle -> source triangle
    std::vector<PendingArc> pending;
};

// Does the child complex keep this boundary arc intact (ids mapped, edges
// present)? Boundary edges are never crossed by cuts, so an arc lies wholly
// in exactly one side.
inline bool arc_survives(const MetricComplex& child, const std::vector<VertexId>& vmap,
                         const std::vector<VertexId>& arc) {
    for (VertexId v : arc)
        if (v < 0 || v >= (int)vmap.size() || vmap[v] < 0) return false;
    for (size_t i = 0; i + 1 < arc.size(); ++i) {
        const EdgeInfo* e = child.edge(vmap[arc[i]], vmap[arc[i + 1]]);
        if (!e) return false;
    }
    return true;
}

inline std::vector<VertexId> map_arc(const std::vector<VertexId>& vmap,
                                     const std::vector<VertexId>& arc) {
    std::vector<VertexId> out;
    for (VertexId v : arc) out.push_back(vmap[v]);
    return out;
}

// Piece-local edge index whose path equals the arc (forward or reversed).
inline int locate_arc_edge(const KGon& g, const std::vector<VertexId>& arc) {
    for (int i = 0; i < g.k(); ++i) {
        auto path = g.edge_path(i);
        if (path == arc) return i;
        std::vector<VertexId> rev(arc.rbegin(), arc.rend());
        if (path == rev) return i;
    }
    return -1;
}

// child work item after a cut: corners relabelled CCW from the cut source
inline WorkItem make_child(const WorkItem& parent, const MetricComplex& side,
                           const std::vector<VertexId>& vmap,
                           const std::vector<TriId>& tmap, VertexId new_start) {
    WorkItem child;
    child.g = kgon_from_complex(side, new_start);
    // invert vmap for corner source lookup
    std::vector<int> inv(side.vertex_count(), -1);
    for (VertexId old = 0; old < (int)vmap.size(); ++old)
        if (vmap[old] >= 0) inv[vmap[old]] = old;
    for (VertexId corner : child.g.corners) {
        VertexId old = inv[corner];
        int src = -1;
        for (size_t i = 0; i < parent.g.corners.size(); ++i)
            if (parent.g.corners[i] == old) src = parent.src[i];
        child.src.push_back(src);
    }
    child.prov.resize(side.triangle_count());
    for (TriId t = 0; t < side.triangle_count(); ++t)
        child.prov[t] = parent.prov[tmap[t]];
    return child;
}

} // namespace detail

// Canonical decomposition of a polygonal metric into slit spheres, small
// triangles, embedded concave polygons without diagonals, and marked lunes,
// glued along a dual tree. Deterministic: cuts take the shortest diagonal
// (ties by corner ids then sweep angle); isolated diagonals are preferred to
// families, and lune families are cut at their interval midpoint.
inline Decomposition decompose_core(const KGon& g0) {
    Decomposition out;
    std::vector<detail::WorkItem> stack;
    {
        detail::WorkItem root;
        root.g = g0;
        for (int i = 0; i < g0.k(); ++i) root.src.push_back(i);
        root.prov.resize(g0.complex.triangle_count());
        for (TriId t = 0; t < g0.complex.triangle_count(); ++t) root.prov[t] = t;
        stack.push_back(std::move(root));
    }

    auto src_key = [](const detail::WorkItem& it, const Diagonal& d) {
        int a = it.src[d.from_corner], b = it.src[d.to_corner];
        return std::make_pair(std::min(a, b), std::max(a, b));
    };

    int guard = 4096;
    while (!stack.empty() && guard-- > 0) {
        detail::WorkItem item = std::move(stack.back());
        stack.pop_back();
        auto ds = diagonals(item.g);

        const Diagonal* chosen = nullptr;
        bool lune_endgame = false;
        // precedence: isolated cuts, then nonconsecutive families, then the
        // marked-lune endgame on consecutive families
        auto better = [&](const Diagonal& d, const Diagonal& cur) {
            if (std::fabs(d.length - cur.length) > 1e-9) return d.length < cur.length;
            if (src_key(item, d) != src_key(item, cur))
                return src_key(item, d) < src_key(item, cur);
            return d.theta < cur.theta;
        };
        for (const auto& d : ds)
            if (!d.family && (!chosen || better(d, *chosen))) chosen = &d;
        if (!chosen)
            for (const auto& d : ds)
                if (d.family && !d.consecutive(item.g.k()) && (!chosen || better(d, *chosen)))
                    chosen = &d;
        if (!chosen && !ds.empty()) lune_endgame = true;

        if (!chosen && !lune_endgame) {
            // terminal piece
            NoDiagonalClass cls = [&] {
                if (item.g.k() == 2) return NoDiagonalClass::ConcaveEmbedded;
                return classify_no_diagonal(item.g);
            }();
            DecompPiece piece;
            piece.complex = item.g.complex;
            piece.corners = item.g.corners;
            piece.src_corners = item.src;
            piece.provenance = item.prov;
            piece.area = item.g.area();
            if (item.g.k() == 2) {
                piece.type = PieceType::SlitSphere;
                piece.param = item.g.edge_length(0);
                if (std::fabs(piece.area - 4 * kPi) > 1e-7)
                    throw InternalError("2-gon without diagonals is not a slit sphere");
            } else if (cls == NoDiagonalClass::SmallTriangle) {
                piece.type = PieceType::SmallTriangle;
            } else if (cls == NoDiagonalClass::HemisphereConcave) {
                piece.type = PieceType::Hemisphere;
            } else {
                piece.type = PieceType::ConcaveEmbedded;
            }
            int pid = (int)out.pieces.size();
            for (const auto& pa : item.pending) {
                int e = detail::locate_arc_edge(item.g, pa.path);
                if (e < 0) throw InternalError("pending seam not on piece boundary");
                auto& de = out.dual_edges[pa.dual_index];
                (pa.as_a ? de.piece_a : de.piece_b) = pid;
                (pa.as_a ? de.edge_a : de.edge_b) = e;
            }
            out.pieces.push_back(std::move(piece));
            continue;
        }

        if (lune_endgame) {
            // all diagonals are consecutive families: marked lune, angle may
            // exceed 2pi; peel slit spheres from the clean-edge side
            const Diagonal* fam = nullptr;
            for (const auto& d : ds) {
                int k = item.g.k();
                int ci = d.from_corner, cj = d.to_corner;
                bool fwd = (cj == (ci + 1) % k);
                if (!fwd) continue; // use the orientation with theta from the edge
                if (!fam || src_key(item, d) < src_key(item, *fam)) fam = &d;
            }
            if (!fam) throw InternalError("no oriented consecutive family found");
            VertexId v = fam->from;
            double alpha = item.g.complex.vertex_angle(v);
            if (alpha > kTwoPi + 1e-9) {
                // cut off one full slit sphere at theta = 2pi from the edge
                TraceResult tr;
                if (!detail::trace_reaches(item.g.complex, v, kTwoPi, fam->to, &tr))
                    throw NumericalStall("lune peel trace failed");
                auto cut = cut_along(item.g.complex, tr);
                auto left = detail::make_child(item, cut.left, cut.lmap, cut.ltris,
                                               cut.lmap[v]);
                auto right = detail::make_child(item, cut.right, cut.rmap, cut.rtris,
                                                cut.rmap[v]);
                bool left_is_sphere = left.g.k() == 2;
                detail::WorkItem& sphere = left_is_sphere ? left : right;
                detail::WorkItem& rest = left_is_sphere ? right : left;
                const auto& smap = left_is_sphere ? cut.lmap : cut.rmap;
                const auto& rmap = left_is_sphere ? cut.rmap : cut.lmap;
                const auto& scut = left_is_sphere ? cut.lcut : cut.rcut;
                const auto& rcut = left_is_sphere ? cut.rcut : cut.lcut;
                int dual_index = (int)out.dual_edges.size();
                out.dual_edges.push_back({});
                sphere.pending.push_back({dual_index, true, scut});
                rest.pending.push_back({dual_index, false, rcut});
                // distribute parent's pending arcs combinatorially
                for (const auto& pa : item.pending) {
                    if (detail::arc_survives(sphere.g.complex, smap, pa.path))
                        sphere.pending.push_back(
                            {pa.dual_index, pa.as_a, detail::map_arc(smap, pa.path)});
                    else if (detail::arc_survives(rest.g.complex, rmap, pa.path))
                        rest.pending.push_back(
                            {pa.dual_index, pa.as_a, detail::map_arc(rmap, pa.path)});
                    else
                        throw InternalError("pending arc lost in lune peel");
                }
                stack.push_back(std::move(rest));
                stack.push_back(std::move(sphere));
                continue;
            }
            // terminal marked lune of angle <= 2pi
            DecompPiece piece;
            piece.type = PieceType::MarkedLune;
            piece.complex = item.g.complex;
            piece.corners = item.g.corners;
            piece.src_corners = item.src;
            piece.provenance = item.prov;
            piece.param = alpha;
            piece.area = item.g.area();
            int pid = (int)out.pieces.size();
            for (const auto& pa : item.pending) {
                int e = detail::locate_arc_edge(item.g, pa.path);
                if (e < 0) throw InternalError("pending seam not on lune boundary");
                auto& de = out.dual_edges[pa.dual_index];
                (pa.as_a ? de.piece_a : de.piece_b) = pid;
                (pa.as_a ? de.edge_a : de.edge_b) = e;
            }
            out.pieces.push_back(std::move(piece));
            continue;
        }

        // cut along the chosen diagonal (families at their midpoint member)
        auto cut = cut_along(item.g.complex, chosen->trace);
        auto childL = detail::make_child(item, cut.left, cut.lmap, cut.ltris,
                                         cut.lmap[chosen->from]);
        auto childR = detail::make_child(item, cut.right, cut.rmap, cut.rtris,
                                         cut.rmap[chosen->from]);
        int dual_index = (int)out.dual_edges.size();
        out.dual_edges.push_back({});
        childL.pending.push_back({dual_index, true, cut.lcut});
        childR.pending.push_back({dual_index, false, cut.rcut});
        for (const auto& pa : item.pending) {
            if (detail::arc_survives(childL.g.complex, cut.lmap, pa.path))
                childL.pending.push_back(
                    {pa.dual_index, pa.as_a, detail::map_arc(cut.lmap, pa.path)});
            else if (detail::arc_survives(childR.g.complex, cut.rmap, pa.path))
                childR.pending.push_back(
                    {pa.dual_index, pa.as_a, detail::map_arc(cut.rmap, pa.path)});
            else
                throw InternalError("pending arc lost in cut");
        }
        stack.push_back(std::move(childR));
        stack.push_back(std::move(childL));
    }
    if (guard <= 0) throw NumericalStall("decomposition did not terminate");

    for (const auto& de : out.dual_edges)
        if (de.piece_a < 0 || de.piece_b < 0)
            throw InternalError("unresolved dual edge");
    return out;
}

// Reassemble a decomposition (inverse of the cuts); rays are ignored. Corner
// labels are restored from the pieces' source-corner provenance.
inline KGon assemble_decomposition(const Decomposition& dec) {
    std::vector<Piece> pieces;
    std::vector<int> index_map(dec.pieces.size(), -1);
    for (size_t i = 0; i < dec.pieces.size(); ++i) {
        const auto& dp = dec.pieces[i];
        if (dp.type == PieceType::Ray) continue;
        Piece p;
        p.spec.type = dp.type;
        p.complex = dp.complex;
        p.corners = dp.corners;
        index_map[i] = (int)pieces.size();
        pieces.push_back(std::move(p));
    }
    std::vector<Gluing> gluings;
    for (const auto& de : dec.dual_edges) {
        if (index_map[de.piece_a] < 0 || index_map[de.piece_b] < 0) continue;
        gluings.push_back(
            {index_map[de.piece_a], de.edge_a, index_map[de.piece_b], de.edge_b});
    }
    auto res = assemble_with_maps(pieces, gluings);
    // rotate labels so corner 0 is the image of source corner 0
    for (size_t i = 0; i < dec.pieces.size(); ++i) {
        const auto& dp = dec.pieces[i];
        if (index_map[i] < 0) continue;
        for (size_t ci = 0; ci < dp.src_corners.size(); ++ci) {
            if (dp.src_corners[ci] != 0) continue;
            VertexId v = res.maps[index_map[i]][dp.corners[ci]];
            for (int j = 0; j < res.kgon.k(); ++j)
                if (res.kgon.corners[j] == v) return relabel(res.kgon, j);
        }
    }
    return res.kgon;
}

// ---------------------------------------------------------------------------
// small truncation
// ---------------------------------------------------------------------------

struct TruncationResult {
    KPointMetric metric;      // minimal core; excess ledger reset to zero
    std::vector<int> removed; // slit spheres peeled per edge
};

// Canonical compact core: peel boundary-incident slit spheres until none is
// incident to a bounding edge. At a length-pi edge the cut is taken exactly
// 2pi into the metric, leaving zero lune excess on the ray side.
inline TruncationResult small_truncation(const KPointMetric& d) {
    TruncationResult out;
    out.metric = d;
    out.removed.assign(d.k(), 0);

    bool changed = true;
    int guard = 1024;
    while (changed && guard-- > 0) {
        changed = false;
        KGon& g = out.metric.core;
        const MetricComplex& c = g.complex;
        for (int i = 0; i < g.k() && !changed; ++i) {
            VertexId v = g.corners[i];
            VertexId w = g.corners[(i + 1) % g.k()];
            double L = g.edge_length(i);
            double alpha = c.vertex_angle(v);
            TraceResult tr;
            bool peel = false;
            if (L < kPi - geom_tolerance()) {
                // smallest-theta diagonal copy bounding a slit sphere with edge i
                double psi = detail::azimuth_at(c, v, c.pos(w));
                for (double th = psi; th < alpha - 1e-12 && !peel; th += kTwoPi) {
                    if (th < 1e-9) continue;
                    if (detail::trace_reaches(c, v, th, w, &tr) &&
                        std::fabs(tr.hit.length - L) < 1e-7)
                        peel = true;
                }
            } else if (alpha > kTwoPi + 1e-9) {
                // pi edge: a whole slit sphere sits at the boundary iff the
                // lune family extends past 2pi
                peel = detail::trace_reaches(c, v, kTwoPi, w, &tr);
            }
            if (!peel) continue;
            auto cut = cut_along(c, tr);
            bool left_is_sphere = [&] {
                KGon lg = kgon_from_complex(cut.left, cut.lmap[v]);
                return lg.k() == 2 && std::fabs(lg.area() - 4 * kPi) < 1e-6;
            }();
            const MetricComplex& keep = left_is_sphere ? cut.right : cut.left;
            const std::vector<VertexId>& kmap = left_is_sphere ? cut.rmap : cut.lmap;
            const MetricComplex& drop = left_is_sphere ? cut.left : cut.right;
            if (std::fabs(drop.total_area() - 4 * kPi) > 1e-6)
                throw InternalError("truncation peel did not remove one slit sphere");
            KGon ng;
            ng.complex = keep;
            for (VertexId corner : g.corners) ng.corners.push_back(kmap[corner]);
            auto report = ng.validate();
            if (!report.empty())
                throw InternalError("truncation produced invalid core: " +
                                    report.front().kind);
            out.metric.core = ng;
            out.removed[i] += 1;
            changed = true;
        }
    }
    if (guard <= 0) throw NumericalStall("truncation did not terminate");
    out.metric.excess.assign(d.k(), 0);
    for (int i = 0; i < d.k(); ++i)
        out.metric.ray_slit_lengths[i] = out.metric.core.edge_length(i);
    return out;
}

// Decomposition of the whole k-point metric: the truncated core's pieces plus
// the peeled slit spheres and one symbolic ray per edge, all spanning one
// dual tree.
inline Decomposition decompose_full(const KPointMetric& d) {
    auto tr = small_truncation(d);
    Decomposition dec = decompose_core(tr.metric.core);
    for (int i = 0; i < d.k(); ++i) {
        double len = tr.metric.core.edge_length(i);
        // piece owning core edge i: its consecutive corners carry the source
        // labels (i, i+1) and the connecting edge is not a seam
        int pid = -1, pedge = -1;
        int inext = (i + 1) % d.k();
        for (size_t p = 0; p < dec.pieces.size() && pid < 0; ++p) {
            const auto& piece = dec.pieces[p];
            if (piece.type == PieceType::Ray) continue;
            for (int e = 0; e < piece.k(); ++e) {
                if (piece.src_corners[e] != i) continue;
                if (piece.src_corners[(e + 1) % piece.k()] != inext) continue;
                bool seam = false;
                for (const auto& de : dec.dual_edges) {
                    if ((de.piece_a == (int)p && de.edge_a == e) ||
                        (de.piece_b == (int)p && de.edge_b == e))
                        seam = true;
                }
                if (!seam) {
                    pid = (int)p;
                    pedge = e;
                    break;
                }
            }
        }
        if (pid < 0) throw InternalError("ray attachment edge not found");
        int prev_piece = pid, prev_edge = pedge;
        int total_excess = tr.removed[i];
        for (int j = 0; j < total_excess; ++j) {
            DecompPiece sphere;
            sphere.type = PieceType::SlitSphere;
            auto mp = make_piece(PieceSpec::slit_sphere(len));
            sphere.complex = mp.complex;
            sphere.corners = mp.corners;
            sphere.src_corners = {i, (i + 1) % d.k()};
            sphere.param = len;
            sphere.area = 4 * kPi;
            int sid = (int)dec.pieces.size();
            dec.pieces.push_back(std::move(sphere));
            dec.dual_edges.push_back({prev_piece, prev_edge, sid, 0});
            prev_piece = sid;
            prev_edge = 1;
        }
        DecompPiece ray;
        ray.type = PieceType::Ray;
        ray.param = len;
        ray.src_corners = {i, (i + 1) % d.k()};
        int rid = (int)dec.pieces.size();
        dec.pieces.push_back(std::move(ray));
        dec.dual_edges.push_back({prev_piece, prev_edge, rid, 0});
    }
    return dec;
}

// ---------------------------------------------------------------------------
// isometry predicate
// ---------------------------------------------------------------------------

namespace detail {

struct MetricSignature {
    std::vector<double> numbers;
    std::vector<int> ints;
};

inline MetricSignature metric_signature(const KPointMetric& d) {
    MetricSignature sig;
    auto tr = small_truncation(d);
    const KGon& g = tr.metric.core;
    std::vector<UnitVec> tuple;
    for (VertexId v : g.corners) tuple.push_back(g.complex.pos(v));
    auto cf = canonical_rotation(tuple);
    for (const auto& p : cf.points) {
        sig.numbers.push_back(p.x);
        sig.numbers.push_back(p.y);
        sig.numbers.push_back(p.z);
    }
    auto dec = decompose_core(g);
    sig.ints.push_back((int)dec.pieces.size());
    for (const auto& piece : dec.pieces) {
        sig.ints.push_back((int)piece.type);
        sig.ints.push_back(piece.k());
        for (int s : piece.src_corners) sig.ints.push_back(s);
        sig.numbers.push_back(piece.area);
        sig.numbers.push_back(piece.param);
        KGon pg{piece.complex, piece.corners};
        for (int e = 0; e < pg.k(); ++e) sig.numbers.push_back(pg.edge_length(e));
        for (int e = 0; e < pg.k(); ++e) sig.numbers.push_back(pg.corner_angle_at(e));
    }
    std::vector<std::array<int, 4>> des;
    for (const auto& de : dec.dual_edges)
        des.push_back({de.piece_a, de.edge_a, de.piece_b, de.edge_b});
    std::sort(des.begin(), des.end());
    for (const auto& de : des)
        for (int x : de) sig.ints.push_back(x);
    return sig;
}

} // namespace detail

// Labelled isometry of k-point metrics: equality of canonical tuples and of
// canonical decompositions, within `tol`.
inline bool isometric(const KPointMetric& a, const KPointMetric& b, double tol = 1e-7) {
    if (a.k() != b.k()) return false;
    detail::MetricSignature sa, sb;
    try {
        sa = detail::metric_signature(a);
        sb = detail::metric_signature(b);
    } catch (const Error&) {
        return false;
    }
    if (sa.ints != sb.ints) return false;
    if (sa.numbers.size() != sb.numbers.size()) return false;
    for (size_t i = 0; i < sa.numbers.size(); ++i)
        if (std::fabs(sa.numbers[i] - sb.numbers[i]) > tol) return false;
    return true;
}

} // namespace spheremoduli
