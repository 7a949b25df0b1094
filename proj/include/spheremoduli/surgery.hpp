#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "spheremoduli/complex.hpp"
#include "spheremoduli/trace.hpp"

namespace spheremoduli {

// Directed walk along the CCW boundary from `from` to `to` (inclusive).
inline std::vector<VertexId> boundary_path(const MetricComplex& c, VertexId from,
                                           VertexId to) {
    if (!c.on_boundary(from) || !c.on_boundary(to))
        throw InternalError("arc endpoints must be boundary vertices");
    std::vector<VertexId> path = {from};
    VertexId v = from;
    int guard = c.vertex_count() + 1;
    do {
        v = c.boundary_next(v);
        path.push_back(v);
        if (v == to) return path;
    } while (v != from && guard-- > 0);
    throw InternalError("boundary walk did not reach target");
}

inline double path_length(const MetricComplex& c, const std::vector<VertexId>& path) {
    double s = 0;
    for (size_t i = 0; i + 1 < path.size(); ++i)
        s += c.edge_length(path[i], path[i + 1]);
    return s;
}

// Arc is geodesic iff every interior vertex is straight (angle pi).
inline bool path_is_geodesic(const MetricComplex& c, const std::vector<VertexId>& path,
                             double tol = 1e-7) {
    for (size_t i = 1; i + 1 < path.size(); ++i)
        if (std::fabs(c.vertex_angle(path[i]) - kPi) > tol) return false;
    return true;
}

inline UnitVec point_along_path(const MetricComplex& c,
                                const std::vector<VertexId>& path, double s) {
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        double L = c.edge_length(path[i], path[i + 1]);
        if (s <= L || i + 2 == path.size())
            return walk(c.pos(path[i]),
                        tangent_toward(c.pos(path[i]), c.pos(path[i + 1])),
                        std::min(s, L));
        s -= L;
    }
    return c.pos(path.back());
}

struct SurgeryResult {
    MetricComplex complex;
    std::vector<VertexId> vmap; // old vertex id -> new id
};

namespace detail {
inline constexpr double kStrictInteriorEps = 1e-13;
}

namespace detail {

inline MetricComplexBuilder builder_from(const MetricComplex& c,
                                         std::vector<VertexId>& vmap) {
    MetricComplexBuilder b;
    vmap.resize(c.vertex_count());
    for (VertexId v = 0; v < c.vertex_count(); ++v)
        vmap[v] = b.add_vertex(c.role(v), c.pos(v));
    return b;
}

} // namespace detail

// Insert an EdgeMark vertex at `p` in the interior of the boundary mesh edge
// (u,w); the incident triangle is split in two.
inline SurgeryResult split_boundary_edge(const MetricComplex& c, VertexId u, VertexId w,
                                         const UnitVec& p) {
    const EdgeInfo* e = c.edge(u, w);
    if (!e || !e->boundary()) throw InternalError("not a boundary edge");
    TriId t = e->tris[0];

    SurgeryResult out;
    std::vector<VertexId>& vmap = out.vmap;
    MetricComplexBuilder b = detail::builder_from(c, vmap);
    VertexId m = b.add_vertex(VertexRole::EdgeMark, p);
    for (TriId i = 0; i < c.triangle_count(); ++i) {
        const auto& tr = c.triangles()[i];
        if (i != t) {
            b.add_triangle(vmap[tr.v[0]], vmap[tr.v[1]], vmap[tr.v[2]]);
            continue;
        }
        // rotate so the split edge is (v0, v1)
        std::array<VertexId, 3> v = tr.v;
        while (!((v[0] == u && v[1] == w) || (v[0] == w && v[1] == u)))
            v = {v[1], v[2], v[0]};
        b.add_triangle(vmap[v[0]], m, vmap[v[2]]);
        b.add_triangle(m, vmap[v[1]], vmap[v[2]]);
    }
    out.complex = b.build();
    out.vmap.push_back(m); // position vertex_count(): the new vertex id
    return out;
}

// Refine the boundary arc from..to so that vertices exist at every arclength
// in `params` (measured from `from`). Returns the refined complex, the vertex
// map, and the refined path.
struct RefineResult {
    MetricComplex complex;
    std::vector<VertexId> vmap;
    std::vector<VertexId> path;
};

inline RefineResult refine_boundary_arc(const MetricComplex& c0, VertexId from,
                                        VertexId to, std::vector<double> params,
                                        double tol) {
    RefineResult r;
    r.complex = c0;
    r.vmap.resize(c0.vertex_count());
    for (VertexId v = 0; v < c0.vertex_count(); ++v) r.vmap[v] = v;
    std::sort(params.begin(), params.end());

    VertexId cur_from = from, cur_to = to;
    for (double target : params) {
        auto path = boundary_path(r.complex, cur_from, cur_to);
        double s = 0;
        bool done = false;
        for (size_t i = 0; i + 1 < path.size() && !done; ++i) {
            double L = r.complex.edge_length(path[i], path[i + 1]);
            if (target <= s + tol) {
                done = true; // coincides with an existing vertex
            } else if (target < s + L - tol) {
                UnitVec p = walk(r.complex.pos(path[i]),
                                 tangent_toward(r.complex.pos(path[i]),
                                                r.complex.pos(path[i + 1])),
                                 target - s);
                auto sr = split_boundary_edge(r.complex, path[i], path[i + 1], p);
                r.complex = sr.complex;
                for (auto& m : r.vmap) m = sr.vmap[m];
                cur_from = sr.vmap[cur_from];
                cur_to = sr.vmap[cur_to];
                done = true;
            }
            s += L;
        }
    }
    r.path = boundary_path(r.complex, cur_from, cur_to);
    return r;
}

struct GlueResult {
    MetricComplex complex;
    std::vector<VertexId> map1, map2; // old vertex ids -> new ids
};

// Glue two disk complexes along boundary arcs of equal length; c2 is re-seated
// by the unique rotation matching arc2 (reversed) onto arc1. Merged arc
// interior vertices become Interior; endpoint roles are kept Completion if
// either side was one.
inline GlueResult glue(const MetricComplex& c1in, VertexId from1, VertexId to1,
                       const MetricComplex& c2in, VertexId from2, VertexId to2) {
    const double tol = geom_tolerance();
    if (from1 == to1 || from2 == to2)
        throw NotDiskResult("gluing arc must be a proper sub-arc of the boundary");

    auto p1 = boundary_path(c1in, from1, to1);
    auto p2 = boundary_path(c2in, from2, to2);
    double L1 = path_length(c1in, p1);
    double L2 = path_length(c2in, p2);
    if (std::fabs(L1 - L2) > std::max(tol * 10, 1e-9))
        throw LengthMismatch("arc lengths " + std::to_string(L1) + " vs " +
                             std::to_string(L2));
    if (!path_is_geodesic(c1in, p1) || !path_is_geodesic(c2in, p2))
        throw InternalError("gluing arcs must be geodesic");
    double L = L1;

    // re-seat c2: start of arc2 -> end of arc1, midpoints correspond
    MetricComplex c2 = c2in;
    {
        UnitVec a2 = c2in.pos(from2);
        UnitVec m2 = point_along_path(c2in, p2, L / 2);
        UnitVec b1 = c1in.pos(to1);
        UnitVec m1 = point_along_path(c1in, p1, L / 2);
        Rotation R = Rotation::align_pair(a2, m2, b1, m1);
        MetricComplexBuilder b;
        for (VertexId v = 0; v < c2in.vertex_count(); ++v)
            b.add_vertex(c2in.role(v), R.apply(c2in.pos(v)));
        for (const auto& tr : c2in.triangles()) b.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        c2 = b.build();
    }

    // common subdivision: arc1 param s matches arc2 param L-s
    std::vector<double> s1, s2r;
    {
        double s = 0;
        s1.push_back(0);
        for (size_t i = 0; i + 1 < p1.size(); ++i) {
            s += c1in.edge_length(p1[i], p1[i + 1]);
            s1.push_back(s);
        }
        s = 0;
        std::vector<double> tmp = {0.0};
        for (size_t i = 0; i + 1 < p2.size(); ++i) {
            s += c2.edge_length(p2[i], p2[i + 1]);
            tmp.push_back(s);
        }
        for (double v : tmp) s2r.push_back(L - v);
        std::sort(s2r.begin(), s2r.end());
    }
    std::vector<double> common;
    for (double v : s1) common.push_back(v);
    for (double v : s2r) common.push_back(v);
    std::sort(common.begin(), common.end());
    common.erase(std::unique(common.begin(), common.end(),
                             [&](double a, double b) { return std::fabs(a - b) < 1e-9; }),
                 common.end());

    auto r1 = refine_boundary_arc(c1in, from1, to1, common, 1e-9);
    std::vector<double> common_rev;
    for (double v : common) common_rev.push_back(L - v);
    std::sort(common_rev.begin(), common_rev.end());
    auto r2 = refine_boundary_arc(c2, from2, to2, common_rev, 1e-9);

    if (r1.path.size() != r2.path.size())
        throw InternalError("arc refinement mismatch");
    size_t n = r1.path.size();

    // merged complex: c1 vertices + c2 vertices, with arc2[i] = arc1[n-1-i]
    GlueResult out;
    MetricComplexBuilder b;
    std::vector<VertexId> nmap1(r1.complex.vertex_count(), -1);
    std::vector<VertexId> nmap2(r2.complex.vertex_count(), -1);
    for (VertexId v = 0; v < r1.complex.vertex_count(); ++v)
        nmap1[v] = b.add_vertex(r1.complex.role(v), r1.complex.pos(v));
    for (size_t i = 0; i < n; ++i) nmap2[r2.path[i]] = nmap1[r1.path[n - 1 - i]];
    for (VertexId v = 0; v < r2.complex.vertex_count(); ++v)
        if (nmap2[v] == -1) nmap2[v] = b.add_vertex(r2.complex.role(v), r2.complex.pos(v));
    for (const auto& tr : r1.complex.triangles())
        b.add_triangle(nmap1[tr.v[0]], nmap1[tr.v[1]], nmap1[tr.v[2]]);
    for (const auto& tr : r2.complex.triangles())
        b.add_triangle(nmap2[tr.v[0]], nmap2[tr.v[1]], nmap2[tr.v[2]]);

    MetricComplex merged = b.build();

    // role fixes on the seam
    {
        MetricComplexBuilder fix;
        for (VertexId v = 0; v < merged.vertex_count(); ++v) {
            VertexRole role = merged.vertex(v).role;
            fix.add_vertex(role, merged.pos(v));
        }
        for (size_t i = 0; i < n; ++i) {
            VertexId v = nmap1[r1.path[n - 1 - i]];
            bool endpoint = (i == 0 || i == n - 1);
            if (!merged.on_boundary(v)) {
                fix.set_role(v, VertexRole::Interior);
            } else if (endpoint) {
                VertexRole role1 = r1.complex.role(r1.path[n - 1 - i]);
                VertexRole role2 = r2.complex.role(r2.path[i]);
                bool comp = role1 == VertexRole::Completion || role2 == VertexRole::Completion;
                fix.set_role(v, comp ? VertexRole::Completion : VertexRole::EdgeMark);
            }
        }
        for (const auto& tr : merged.triangles())
            fix.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
        merged = fix.build();
    }

    // must still be a disk
    for (const auto& viol : merged.validate())
        if (viol.kind == "NotDisk" || viol.kind == "NotConnected")
            throw NotDiskResult(viol.detail);

    out.complex = merged;
    out.map1.resize(c1in.vertex_count());
    for (VertexId v = 0; v < c1in.vertex_count(); ++v) out.map1[v] = nmap1[r1.vmap[v]];
    out.map2.resize(c2in.vertex_count());
    for (VertexId v = 0; v < c2in.vertex_count(); ++v) out.map2[v] = nmap2[r2.vmap[v]];
    return out;
}

// Identify two disjoint boundary arcs of a single complex. The arcs must
// already develop onto each other reversed (no re-seating is possible).
// Almost always produces a handle or annulus and therefore NotDiskResult.
inline MetricComplex glue_self(const MetricComplex& c, VertexId from1, VertexId to1,
                               VertexId from2, VertexId to2) {
    auto p1 = boundary_path(c, from1, to1);
    auto p2 = boundary_path(c, from2, to2);
    if (p1.size() != p2.size()) throw LengthMismatch("arc subdivisions differ");
    size_t n = p1.size();
    for (size_t i = 0; i < n; ++i)
        if (dist(c.pos(p1[i]), c.pos(p2[n - 1 - i])) > 1e-7)
            throw LengthMismatch("self-glue arcs do not develop onto each other");
    std::vector<VertexId> remap(c.vertex_count());
    for (VertexId v = 0; v < c.vertex_count(); ++v) remap[v] = v;
    for (size_t i = 0; i < n; ++i) remap[p2[n - 1 - i]] = p1[i];
    MetricComplexBuilder b;
    for (VertexId v = 0; v < c.vertex_count(); ++v) b.add_vertex(c.role(v), c.pos(v));
    for (const auto& tr : c.triangles())
        b.add_triangle(remap[tr.v[0]], remap[tr.v[1]], remap[tr.v[2]]);
    MetricComplex merged = b.build();
    for (const auto& viol : merged.validate())
        if (viol.kind == "NotDisk" || viol.kind == "NotConnected")
            throw NotDiskResult(viol.detail);
    return merged;
}

// ---------------------------------------------------------------------------
// Cutting along a traced diagonal
// ---------------------------------------------------------------------------

struct CutResult {
    MetricComplex left, right;           // left = side of positive circle normal
    std::vector<VertexId> lmap, rmap;    // old vertex id -> new id (-1 if absent)
    std::vector<VertexId> lcut, rcut;    // cut path vertex ids (source..target)
    std::vector<TriId> ltris, rtris;     // new triangle -> source triangle
};

namespace detail {

struct SidePolygonPoint {
    bool is_vertex;
    VertexId v;       // original id when is_vertex
    int crossing = -1; // index into crossing table otherwise
};

} // namespace detail

// Cut the complex along a traced geodesic that starts and ends at boundary
// vertices (a diagonal). Returns the two sub-disks; the source vertex angle
// splits between them.
inline CutResult cut_along(const MetricComplex& c, const TraceResult& tr) {
    const double tol = geom_tolerance();
    if (tr.hit.kind != GeodesicHit::Kind::VertexHit)
        throw InternalError("cut requires a vertex-to-vertex trace");
    VertexId target = tr.hit.vertex;
    if (!c.on_boundary(tr.source) || !c.on_boundary(target))
        throw InternalError("cut endpoints must be boundary vertices");

    const Vec3 n = tr.source_pos.vec().cross(tr.direction); // left = positive side

    // crossing table: one entry per crossed interior edge
    struct Crossing {
        EdgeKey edge;
        UnitVec point;
    };
    std::vector<Crossing> crossings;
    std::map<EdgeKey, int> crossing_of_edge;
    // path vertices (source, target, pass-throughs, along-edge stops)
    std::vector<VertexId> path_vertices;
    auto note_vertex = [&](VertexId v) {
        if (std::find(path_vertices.begin(), path_vertices.end(), v) == path_vertices.end())
            path_vertices.push_back(v);
    };
    note_vertex(tr.source);
    std::set<EdgeKey> along_edges; // edges the path runs along
    for (const auto& st : tr.steps) {
        if (st.enter_vertex >= 0) note_vertex(st.enter_vertex);
        if (st.exit_vertex >= 0) note_vertex(st.exit_vertex);
        if (st.enter_vertex >= 0 && st.exit_vertex >= 0) {
            if (c.edge(st.enter_vertex, st.exit_vertex))
                along_edges.insert(edge_key(st.enter_vertex, st.exit_vertex));
        }
        for (const EdgeKey* ek : {&st.enter_edge, &st.exit_edge}) {
            if (ek->first < 0) continue;
            if (!crossing_of_edge.count(*ek)) {
                crossing_of_edge[*ek] = (int)crossings.size();
                const UnitVec& pt = (ek == &st.enter_edge) ? st.enter_point : st.exit_point;
                crossings.push_back({*ek, pt});
            }
        }
    }

    auto side_of = [&](VertexId v) -> int {
        if (std::find(path_vertices.begin(), path_vertices.end(), v) != path_vertices.end())
            return 0;
        double d = c.pos(v).vec().dot(n);
        if (std::fabs(d) <= tol) {
            // on the circle but off the chord: classify by position; genuine
            // ambiguity here means the trace should have reported a vertex
            throw NumericalStall("vertex ambiguously on the cutting circle");
        }
        return d > 0 ? 1 : -1;
    };

    // visited triangles and their chords
    std::map<TriId, const TraceStep*> visited;
    for (const auto& st : tr.steps) {
        bool along = st.enter_vertex >= 0 && st.exit_vertex >= 0 &&
                     c.edge(st.enter_vertex, st.exit_vertex);
        if (!along) visited[st.tri] = &st;
    }

    // region assignment: +1 left, -1 right
    std::vector<int> region(c.triangle_count(), 0);
    std::vector<TriId> stack;
    auto seed = [&](TriId t, int s) {
        if (t == kNoTriangle || s == 0) return;
        if (region[t] == 0) {
            region[t] = s;
            stack.push_back(t);
        } else if (region[t] != s) {
            throw NumericalStall("cut region conflict");
        }
    };
    // seeds from along-edge steps
    for (const auto& st : tr.steps) {
        if (!(st.enter_vertex >= 0 && st.exit_vertex >= 0)) continue;
        const EdgeInfo* e = c.edge(st.enter_vertex, st.exit_vertex);
        if (!e) continue;
        for (int k = 0; k < e->count; ++k) {
            TriId t = e->tris[k];
            if (visited.count(t)) continue;
            const auto& trv = c.triangles()[t];
            for (int i = 0; i < 3; ++i) {
                int s = (trv.v[i] == st.enter_vertex || trv.v[i] == st.exit_vertex)
                            ? 0
                            : side_of(trv.v[i]);
                if (s != 0) seed(t, s);
            }
        }
    }
    // flood from visited triangle neighbors across non-path edges
    auto flood_from_parts = [&]() {
        for (const auto& [t, stp] : visited) {
            const auto& trv = c.triangles()[t];
            for (int i = 0; i < 3; ++i) {
                VertexId A = trv.v[i], B = trv.v[(i + 1) % 3];
                EdgeKey ek = edge_key(A, B);
                if (crossing_of_edge.count(ek) || along_edges.count(ek)) continue;
                const EdgeInfo* e = c.edge(A, B);
                TriId o = e->other(t);
                if (o == kNoTriangle || visited.count(o)) continue;
                // side of this whole edge: side of either non-path endpoint
                int s = side_of(A);
                if (s == 0) s = side_of(B);
                if (s == 0) {
                    // both endpoints on the path: edge parallel to an along
                    // edge; treat via its interior point
                    UnitVec mid = slerp(c.pos(A), c.pos(B), 0.5);
                    double d = mid.vec().dot(n);
                    if (std::fabs(d) <= tol) throw NumericalStall("cut side ambiguity");
                    s = d > 0 ? 1 : -1;
                }
                seed(o, s);
            }
        }
        while (!stack.empty()) {
            TriId t = stack.back();
            stack.pop_back();
            const auto& trv = c.triangles()[t];
            for (int i = 0; i < 3; ++i) {
                VertexId A = trv.v[i], B = trv.v[(i + 1) % 3];
                EdgeKey ek = edge_key(A, B);
                if (along_edges.count(ek)) continue;
                const EdgeInfo* e = c.edge(A, B);
                TriId o = e->other(t);
                if (o != kNoTriangle && !visited.count(o)) seed(o, region[t]);
            }
        }
    };
    flood_from_parts();
    for (TriId t = 0; t < c.triangle_count(); ++t)
        if (!visited.count(t) && region[t] == 0)
            throw NumericalStall("cut left an unassigned triangle");

    // cut path in order: source, one feature per step exit, ending at target
    std::vector<std::pair<int, int>> path_features; // (0=vertex,1=crossing, id)
    path_features.push_back({0, tr.source});
    for (const auto& st : tr.steps) {
        if (st.exit_vertex >= 0)
            path_features.push_back({0, st.exit_vertex});
        else if (st.exit_edge.first >= 0)
            path_features.push_back({1, crossing_of_edge.at(st.exit_edge)});
    }

    // build the two sides
    CutResult out;
    for (int side = 1; side >= -1; side -= 2) {
        MetricComplexBuilder b;
        std::vector<TriId> tprov;
        std::vector<VertexId> vmap(c.vertex_count(), -1);
        std::vector<VertexId> xmap(crossings.size(), -1);
        auto use_vertex = [&](VertexId v) {
            if (vmap[v] == -1) {
                VertexRole role = c.role(v);
                bool on_path =
                    std::find(path_vertices.begin(), path_vertices.end(), v) !=
                    path_vertices.end();
                if (on_path && role == VertexRole::Interior) role = VertexRole::EdgeMark;
                vmap[v] = b.add_vertex(role, c.pos(v));
            }
            return vmap[v];
        };
        auto use_crossing = [&](int i) {
            if (xmap[i] == -1)
                xmap[i] = b.add_vertex(VertexRole::EdgeMark, crossings[i].point);
            return xmap[i];
        };

        for (TriId t = 0; t < c.triangle_count(); ++t) {
            if (!visited.count(t)) {
                if (region[t] != side) continue;
                const auto& trv = c.triangles()[t];
                b.add_triangle(use_vertex(trv.v[0]), use_vertex(trv.v[1]),
                               use_vertex(trv.v[2]));
                tprov.push_back(t);
                continue;
            }
            // split a visited triangle: walk its cycle inserting crossings
            const auto& trv = c.triangles()[t];
            std::vector<std::pair<int, int>> cycle; // (kind 0=vertex,1=crossing, id)
            for (int i = 0; i < 3; ++i) {
                cycle.push_back({0, trv.v[i]});
                EdgeKey ek = edge_key(trv.v[i], trv.v[(i + 1) % 3]);
                auto it = crossing_of_edge.find(ek);
                if (it != crossing_of_edge.end()) cycle.push_back({1, it->second});
            }
            // chord endpoints in the cycle
            const TraceStep* st = visited.at(t);
            auto idx_of = [&](bool entry) -> int {
                for (size_t i = 0; i < cycle.size(); ++i) {
                    const auto& [kind, id] = cycle[i];
                    if (entry) {
                        if (st->enter_vertex >= 0 && kind == 0 && id == st->enter_vertex)
                            return (int)i;
                        if (st->enter_vertex < 0 && kind == 1 &&
                            crossings[id].edge == st->enter_edge)
                            return (int)i;
                    } else {
                        if (st->exit_vertex >= 0 && kind == 0 && id == st->exit_vertex)
                            return (int)i;
                        if (st->exit_vertex < 0 && kind == 1 &&
                            crossings[id].edge == st->exit_edge)
                            return (int)i;
                    }
                }
                return -1;
            };
            int ie = idx_of(true), ix = idx_of(false);
            if (ie < 0 || ix < 0) throw NumericalStall("cut chord endpoints not found");
            // two chains: ie..ix and ix..ie (cyclic)
            for (int which = 0; which < 2; ++which) {
                int a = which == 0 ? ie : ix;
                int z = which == 0 ? ix : ie;
                std::vector<std::pair<int, int>> chain;
                for (int i = a;; i = (i + 1) % (int)cycle.size()) {
                    chain.push_back(cycle[i]);
                    if (i == z) break;
                }
                if (chain.size() < 3) continue; // degenerate side (chord on an edge)
                // side of this chain: any interior (non-chord-endpoint) member
                int s = 0;
                for (size_t i = 1; i + 1 < chain.size() && s == 0; ++i) {
                    if (chain[i].first == 0)
                        s = side_of(chain[i].second);
                    else {
                        double d = crossings[chain[i].second].point.vec().dot(n);
                        s = d > 0 ? 1 : (d < 0 ? -1 : 0);
                    }
                }
                if (s == 0) throw NumericalStall("cut chain side ambiguity");
                if (s != side) continue;
                // fan-triangulate the chain polygon from the chord start
                auto vid = [&](const std::pair<int, int>& pt) {
                    return pt.first == 0 ? use_vertex(pt.second) : use_crossing(pt.second);
                };
                for (size_t i = 1; i + 1 < chain.size(); ++i) {
                    b.add_triangle(vid(chain[0]), vid(chain[i]), vid(chain[i + 1]));
                    tprov.push_back(t);
                }
            }
        }

        MetricComplex piece = b.build();
        std::vector<VertexId> cutpath;
        for (const auto& [kind, id] : path_features)
            cutpath.push_back(kind == 0 ? vmap[id] : xmap[id]);
        if (side == 1) {
            out.left = piece;
            out.lmap = vmap;
            out.lcut = cutpath;
            out.ltris = tprov;
        } else {
            out.right = piece;
            out.rmap = vmap;
            out.rcut = cutpath;
            out.rtris = tprov;
        }
    }
    return out;
}

// Split an interior edge (a,b) at a point on its arc, replacing the two
// incident triangles by four. The new vertex is Interior; the metric is
// unchanged.
inline SurgeryResult split_interior_edge(const MetricComplex& c, VertexId a, VertexId b,
                                         const UnitVec& p) {
    const EdgeInfo* e = c.edge(a, b);
    if (!e || e->boundary()) throw InternalError("not an interior edge");
    SurgeryResult out;
    MetricComplexBuilder bld = detail::builder_from(c, out.vmap);
    VertexId m = bld.add_vertex(VertexRole::Interior, p);
    for (TriId t = 0; t < c.triangle_count(); ++t) {
        const auto& tr = c.triangles()[t];
        if (t != e->tris[0] && t != e->tris[1]) {
            bld.add_triangle(out.vmap[tr.v[0]], out.vmap[tr.v[1]], out.vmap[tr.v[2]]);
            continue;
        }
        std::array<VertexId, 3> v = tr.v;
        while (!((v[0] == a && v[1] == b) || (v[0] == b && v[1] == a)))
            v = {v[1], v[2], v[0]};
        bld.add_triangle(out.vmap[v[0]], m, out.vmap[v[2]]);
        bld.add_triangle(m, out.vmap[v[1]], out.vmap[v[2]]);
    }
    out.complex = bld.build();
    out.vmap.push_back(m);
    return out;
}

// Split a triangle at an interior point into three. The new vertex is
// Interior; the metric is unchanged.
inline SurgeryResult split_triangle_at(const MetricComplex& c, TriId t, const UnitVec& p) {
    SurgeryResult out;
    MetricComplexBuilder bld = detail::builder_from(c, out.vmap);
    VertexId m = bld.add_vertex(VertexRole::Interior, p);
    for (TriId i = 0; i < c.triangle_count(); ++i) {
        const auto& tr = c.triangles()[i];
        if (i != t) {
            bld.add_triangle(out.vmap[tr.v[0]], out.vmap[tr.v[1]], out.vmap[tr.v[2]]);
            continue;
        }
        bld.add_triangle(out.vmap[tr.v[0]], out.vmap[tr.v[1]], m);
        bld.add_triangle(out.vmap[tr.v[1]], out.vmap[tr.v[2]], m);
        bld.add_triangle(out.vmap[tr.v[2]], out.vmap[tr.v[0]], m);
    }
    out.complex = bld.build();
    out.vmap.push_back(m);
    return out;
}

// Flip an interior edge (a,b): replace the two incident triangles by the two
// triangles on the cross diagonal. Vertex ids are unchanged.
inline MetricComplex flip_edge(const MetricComplex& c, VertexId a, VertexId b) {
    const EdgeInfo* e = c.edge(a, b);
    if (!e || e->boundary()) throw InternalError("flip requires an interior edge");
    TriId t1 = e->tris[0], t2 = e->tris[1];
    auto third = [&](TriId t) {
        for (VertexId v : c.triangles()[t].v)
            if (v != a && v != b) return v;
        throw InternalError("flip: degenerate triangle");
    };
    VertexId p = third(t1), q = third(t2);
    // orient: t1 contains directed edge (a,b) or (b,a)
    bool t1_forward = false;
    {
        const auto& tr = c.triangles()[t1];
        for (int i = 0; i < 3; ++i)
            if (tr.v[i] == a && tr.v[(i + 1) % 3] == b) t1_forward = true;
    }
    VertexId c1 = t1_forward ? p : q; // apex left of a->b
    VertexId c2 = t1_forward ? q : p;
    // both new triangles must stay positively oriented small
    for (auto [x, y, z] : {std::array<VertexId, 3>{c1, a, c2},
                           std::array<VertexId, 3>{c2, b, c1}}) {
        const UnitVec &A = c.pos(x), &B = c.pos(y), &C = c.pos(z);
        if (det3(A.vec(), B.vec(), C.vec()) <= 1e-14)
            throw ChartDegeneracy("flip would invert a triangle");
        double excess =
            corner_angle(A, B, C) + corner_angle(B, C, A) + corner_angle(C, A, B) - kPi;
        if (excess < 1e-12) throw ChartDegeneracy("flip would create a degenerate triangle");
    }
    MetricComplexBuilder bld;
    for (VertexId v = 0; v < c.vertex_count(); ++v) bld.add_vertex(c.role(v), c.pos(v));
    for (TriId t = 0; t < c.triangle_count(); ++t) {
        if (t == t1 || t == t2) continue;
        const auto& tr = c.triangles()[t];
        bld.add_triangle(tr.v[0], tr.v[1], tr.v[2]);
    }
    bld.add_triangle(c1, a, c2);
    bld.add_triangle(c2, b, c1);
    return bld.build();
}

// Remove an interior vertex by ear-clipping its link polygon (the same
// region, re-triangulated without the vertex).
inline SurgeryResult remove_interior_vertex(const MetricComplex& c, VertexId v) {
    if (c.on_boundary(v)) throw InternalError("vertex is on the boundary");
    auto f = c.fan(v);
    std::vector<VertexId> link;
    for (const auto& fe : f) link.push_back(fe.from);
    size_t m = link.size();
    if (m < 3) throw ChartDegeneracy("degenerate link");
    {
        std::set<VertexId> uniq(link.begin(), link.end());
        if (uniq.size() != m)
            throw ChartDegeneracy("link revisits a vertex; cannot ear-clip");
    }

    std::vector<std::array<VertexId, 3>> ears;
    std::set<EdgeKey> new_chords;
    std::vector<VertexId> poly = link;
    int guard = (int)m * (int)m + 8;
    while (poly.size() > 3 && guard-- > 0) {
        bool clipped = false;
        for (size_t i = 0; i < poly.size(); ++i) {
            VertexId A = poly[i], B = poly[(i + 1) % poly.size()],
                     C = poly[(i + 2) % poly.size()];
            const UnitVec &pa = c.pos(A), &pb = c.pos(B), &pc = c.pos(C);
            if (det3(pa.vec(), pb.vec(), pc.vec()) <= 1e-13) continue;
            double excess = corner_angle(pa, pb, pc) + corner_angle(pb, pc, pa) +
                            corner_angle(pc, pa, pb) - kPi;
            if (excess < 1e-11) continue;
            EdgeKey chord = edge_key(A, C);
            if (c.edge(chord.first, chord.second) || new_chords.count(chord)) continue;
            bool blocked = false;
            for (size_t j = 0; j < poly.size() && !blocked; ++j) {
                if (poly[j] == A || poly[j] == B || poly[j] == C) continue;
                const UnitVec& Q = c.pos(poly[j]);
                if (det3(pa.vec(), pb.vec(), Q.vec()) > detail::kStrictInteriorEps &&
                    det3(pb.vec(), pc.vec(), Q.vec()) > detail::kStrictInteriorEps &&
                    det3(pc.vec(), pa.vec(), Q.vec()) > detail::kStrictInteriorEps)
                    blocked = true;
            }
            if (blocked) continue;
            ears.push_back({A, B, C});
            new_chords.insert(chord);
            poly.erase(poly.begin() + (long)((i + 1) % poly.size()));
            clipped = true;
            break;
        }
        if (!clipped) throw ChartDegeneracy("could not retriangulate interior link");
    }
    {
        const UnitVec &pa = c.pos(poly[0]), &pb = c.pos(poly[1]), &pc = c.pos(poly[2]);
        if (det3(pa.vec(), pb.vec(), pc.vec()) <= 1e-13)
            throw ChartDegeneracy("final link triangle degenerate");
        ears.push_back({poly[0], poly[1], poly[2]});
    }

    SurgeryResult out;
    MetricComplexBuilder b;
    out.vmap.assign(c.vertex_count(), -1);
    for (VertexId w = 0; w < c.vertex_count(); ++w)
        if (w != v) out.vmap[w] = b.add_vertex(c.role(w), c.pos(w));
    std::set<TriId> removed;
    for (const auto& fe : f) removed.insert(fe.tri);
    for (TriId t = 0; t < c.triangle_count(); ++t) {
        if (removed.count(t)) continue;
        const auto& tr = c.triangles()[t];
        b.add_triangle(out.vmap[tr.v[0]], out.vmap[tr.v[1]], out.vmap[tr.v[2]]);
    }
    for (const auto& ear : ears)
        b.add_triangle(out.vmap[ear[0]], out.vmap[ear[1]], out.vmap[ear[2]]);
    out.complex = b.build();
    return out;
}

// Remove a straight boundary vertex (angle pi) by ear-clipping its fan hole.
// Requires the merged boundary edge to stay shorter than pi.
inline SurgeryResult remove_boundary_vertex(const MetricComplex& c, VertexId v) {
    if (!c.on_boundary(v)) throw InternalError("not a boundary vertex");
    if (std::fabs(c.vertex_angle(v) - kPi) > 1e-7)
        throw ChartDegeneracy("vertex is not straight");
    auto f = c.fan(v);
    std::vector<VertexId> link;
    link.push_back(f.front().from);
    for (const auto& fe : f) link.push_back(fe.to);
    if (dist(c.pos(link.front()), c.pos(link.back())) >= kPi - 1e-9)
        throw ChartDegeneracy("merged edge would reach length pi");

    // hole polygon CCW: link[0]..link[m], then closing edge back to link[0]
    std::vector<VertexId> poly = link;
    std::vector<std::array<VertexId, 3>> ears;
    std::set<EdgeKey> new_chords;
    int guard = (int)poly.size() * (int)poly.size() + 8;
    while (poly.size() > 2 && guard-- > 0) {
        bool clipped = false;
        for (size_t i = 0; i + 2 < poly.size(); ++i) {
            const UnitVec &A = c.pos(poly[i]), &B = c.pos(poly[i + 1]),
                          &C = c.pos(poly[i + 2]);
            if (det3(A.vec(), B.vec(), C.vec()) <= 1e-14) continue;
            double excess = corner_angle(A, B, C) + corner_angle(B, C, A) +
                            corner_angle(C, A, B) - kPi;
            if (excess < 1e-11) continue;
            // the chord may not duplicate an existing edge of another sheet
            EdgeKey chord = edge_key(poly[i], poly[i + 2]);
            bool final_ear = poly.size() == 3;
            bool dup = c.edge(chord.first, chord.second) || new_chords.count(chord);
            if (dup) {
                if (final_ear)
                    throw ChartDegeneracy("closing edge duplicates an existing pair");
                continue;
            }
            // ear must not contain other polygon vertices
            bool blocked = false;
            for (size_t j = 0; j < poly.size() && !blocked; ++j) {
                if (j >= i && j <= i + 2) continue;
                const UnitVec& Q = c.pos(poly[j]);
                if (det3(A.vec(), B.vec(), Q.vec()) > detail::kStrictInteriorEps &&
                    det3(B.vec(), C.vec(), Q.vec()) > detail::kStrictInteriorEps &&
                    det3(C.vec(), A.vec(), Q.vec()) > detail::kStrictInteriorEps)
                    blocked = true;
            }
            if (blocked) continue;
            ears.push_back({poly[i], poly[i + 1], poly[i + 2]});
            if (!final_ear) new_chords.insert(chord);
            poly.erase(poly.begin() + (long)i + 1);
            clipped = true;
            break;
        }
        if (!clipped) throw ChartDegeneracy("could not retriangulate boundary fan");
    }

    SurgeryResult out;
    MetricComplexBuilder b;
    out.vmap.assign(c.vertex_count(), -1);
    for (VertexId w = 0; w < c.vertex_count(); ++w)
        if (w != v) out.vmap[w] = b.add_vertex(c.role(w), c.pos(w));
    std::set<TriId> removed;
    for (const auto& fe : f) removed.insert(fe.tri);
    for (TriId t = 0; t < c.triangle_count(); ++t) {
        if (removed.count(t)) continue;
        const auto& tr = c.triangles()[t];
        b.add_triangle(out.vmap[tr.v[0]], out.vmap[tr.v[1]], out.vmap[tr.v[2]]);
    }
    for (const auto& ear : ears)
        b.add_triangle(out.vmap[ear[0]], out.vmap[ear[1]], out.vmap[ear[2]]);
    out.complex = b.build();
    return out;
}

} // namespace spheremoduli
