#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spheremoduli/geom.hpp"

namespace spheremoduli {

using VertexId = int;
using TriId = int;
inline constexpr TriId kNoTriangle = -1;

enum class VertexRole { Completion, EdgeMark, Interior };

inline const char* role_name(VertexRole r) {
    switch (r) {
        case VertexRole::Completion: return "completion";
        case VertexRole::EdgeMark: return "edgemark";
        default: return "interior";
    }
}

struct MeshVertex {
    VertexRole role = VertexRole::Interior;
    UnitVec pos;
};

struct MeshTriangle {
    std::array<VertexId, 3> v;
    int corner_of(VertexId w) const {
        for (int i = 0; i < 3; ++i)
            if (v[i] == w) return i;
        return -1;
    }
};

using EdgeKey = std::pair<VertexId, VertexId>; // ordered: first < second

inline EdgeKey edge_key(VertexId a, VertexId b) {
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

struct EdgeInfo {
    TriId tris[2] = {kNoTriangle, kNoTriangle}; // incident triangles
    int count = 0;
    bool boundary() const { return count == 1; }
    TriId other(TriId t) const { return tris[0] == t ? tris[1] : tris[0]; }
};

struct Violation {
    std::string kind;
    std::string detail;
};

struct FanEntry {
    TriId tri;
    VertexId from; // corner sweep starts toward this vertex
    VertexId to;   // and ends toward this one (CCW)
};

// Triangulated spherical metric on the oriented disk, with one absolute
// developed position per vertex (valid because the disk is simply connected,
// so the developing map is global). Immutable after build().
class MetricComplex {
public:
    const std::vector<MeshVertex>& vertices() const { return verts_; }
    const std::vector<MeshTriangle>& triangles() const { return tris_; }
    const std::map<EdgeKey, EdgeInfo>& edges() const { return edges_; }

    int vertex_count() const { return (int)verts_.size(); }
    int triangle_count() const { return (int)tris_.size(); }
    const MeshVertex& vertex(VertexId v) const { return verts_[v]; }
    const UnitVec& pos(VertexId v) const { return verts_[v].pos; }
    VertexRole role(VertexId v) const { return verts_[v].role; }

    const EdgeInfo* edge(VertexId a, VertexId b) const {
        auto it = edges_.find(edge_key(a, b));
        return it == edges_.end() ? nullptr : &it->second;
    }
    double edge_length(VertexId a, VertexId b) const {
        return dist(verts_[a].pos, verts_[b].pos);
    }

    bool on_boundary(VertexId v) const { return boundary_next_[v] != -1; }
    // successor of v along the CCW boundary cycle (-1 for interior vertices)
    VertexId boundary_next(VertexId v) const { return boundary_next_[v]; }
    VertexId boundary_prev(VertexId v) const { return boundary_prev_[v]; }
    // every directed boundary edge, disk on the left
    std::vector<std::pair<VertexId, VertexId>> boundary_edges() const {
        std::vector<std::pair<VertexId, VertexId>> out;
        for (VertexId v = 0; v < vertex_count(); ++v)
            if (boundary_next_[v] != -1) out.push_back({v, boundary_next_[v]});
        return out;
    }

    // Triangles around v in CCW order. For a boundary vertex the fan runs
    // from the outgoing boundary edge to the incoming one; for an interior
    // vertex it is the full cycle starting at an arbitrary triangle.
    std::vector<FanEntry> fan(VertexId v) const;

    double corner_angle_in(TriId t, VertexId v) const {
        const auto& tr = tris_[t];
        int i = tr.corner_of(v);
        return corner_angle(verts_[tr.v[i]].pos, verts_[tr.v[(i + 1) % 3]].pos,
                            verts_[tr.v[(i + 2) % 3]].pos);
    }

    // Total interior angle at any vertex (sum over the fan).
    double vertex_angle(VertexId v) const {
        double s = 0;
        for (const auto& f : fan(v)) s += corner_angle_in(f.tri, v);
        return s;
    }

    double triangle_area(TriId t) const {
        const auto& tr = tris_[t];
        return triangle_measures(verts_[tr.v[0]].pos, verts_[tr.v[1]].pos,
                                 verts_[tr.v[2]].pos)
            .area;
    }

    double total_area() const {
        double s = 0;
        for (TriId t = 0; t < triangle_count(); ++t) s += triangle_area(t);
        return s;
    }

    std::vector<Violation> validate(double tol = geom_tolerance()) const;
    bool valid(double tol = geom_tolerance()) const { return validate(tol).empty(); }

private:
    friend class MetricComplexBuilder;
    std::vector<MeshVertex> verts_;
    std::vector<MeshTriangle> tris_;
    std::map<EdgeKey, EdgeInfo> edges_;
    std::vector<VertexId> boundary_next_;
    std::vector<VertexId> boundary_prev_;
    bool topology_ok_ = false; // adjacency and boundary structures coherent
    std::string topology_reason_;
    // test hook: per-corner claimed positions (see DevelopmentMismatch)
    std::vector<std::pair<std::pair<TriId, int>, UnitVec>> corner_claims_;
};

class MetricComplexBuilder {
public:
    VertexId add_vertex(VertexRole role, const UnitVec& pos) {
        verts_.push_back({role, pos});
        return (VertexId)verts_.size() - 1;
    }
    TriId add_triangle(VertexId a, VertexId b, VertexId c) {
        tris_.push_back({{a, b, c}});
        return (TriId)tris_.size() - 1;
    }
    // Declare the developed position a triangle corner believes it has.
    // validate() reports DevelopmentMismatch if it disagrees with the shared
    // vertex position.
    void claim_corner_position(TriId t, int corner, const UnitVec& p) {
        claims_.push_back({{t, corner}, p});
    }
    void set_role(VertexId v, VertexRole role) { verts_[v].role = role; }
    const std::vector<MeshVertex>& vertices() const { return verts_; }

    MetricComplex build() const;

private:
    std::vector<MeshVertex> verts_;
    std::vector<MeshTriangle> tris_;
    std::vector<std::pair<std::pair<TriId, int>, UnitVec>> claims_;
};

inline MetricComplex MetricComplexBuilder::build() const {
    MetricComplex c;
    c.verts_ = verts_;
    c.tris_ = tris_;
    c.corner_claims_ = claims_;
    c.boundary_next_.assign(verts_.size(), -1);
    c.boundary_prev_.assign(verts_.size(), -1);
    c.topology_ok_ = true;

    std::map<std::pair<VertexId, VertexId>, int> directed;
    for (TriId t = 0; t < (int)tris_.size(); ++t) {
        const auto& tr = tris_[t];
        if (tr.v[0] == tr.v[1] || tr.v[1] == tr.v[2] || tr.v[0] == tr.v[2]) {
            c.topology_ok_ = false;
            c.topology_reason_ = "repeated vertex in triangle " + std::to_string(t);
            continue;
        }
        for (int i = 0; i < 3; ++i) {
            VertexId a = tr.v[i], b = tr.v[(i + 1) % 3];
            auto& e = c.edges_[edge_key(a, b)];
            if (e.count < 2) e.tris[e.count] = t;
            e.count++;
            if (++directed[{a, b}] > 1) {
                c.topology_ok_ = false; // orientation clash
                c.topology_reason_ = "directed edge (" + std::to_string(a) + "," +
                                     std::to_string(b) + ") repeated";
            }
        }
    }
    for (const auto& [k, e] : c.edges_)
        if (e.count > 2) {
            c.topology_ok_ = false;
            c.topology_reason_ = "edge (" + std::to_string(k.first) + "," +
                                 std::to_string(k.second) + ") has " +
                                 std::to_string(e.count) + " triangles";
        }

    if (c.topology_ok_) {
        // boundary links: a directed edge with no reverse is a boundary edge
        for (const auto& [de, n] : directed) {
            (void)n;
            if (!directed.count({de.second, de.first})) {
                if (c.boundary_next_[de.first] != -1 || c.boundary_prev_[de.second] != -1) {
                    c.topology_ok_ = false; // pinched boundary
                    c.topology_reason_ = "pinched boundary at vertex " +
                                         std::to_string(c.boundary_next_[de.first] != -1
                                                            ? de.first
                                                            : de.second);
                    break;
                }
                c.boundary_next_[de.first] = de.second;
                c.boundary_prev_[de.second] = de.first;
            }
        }
    }
    if (!c.topology_ok_) {
        c.boundary_next_.assign(verts_.size(), -1);
        c.boundary_prev_.assign(verts_.size(), -1);
    }
    return c;
}

inline std::vector<FanEntry> MetricComplex::fan(VertexId v) const {
    std::vector<FanEntry> out;
    if (!topology_ok_) return out;
    // corner sweeps at v: from-vertex -> (tri, to-vertex)
    std::map<VertexId, std::pair<TriId, VertexId>> by_from;
    for (TriId t = 0; t < triangle_count(); ++t) {
        int i = tris_[t].corner_of(v);
        if (i < 0) continue;
        VertexId from = tris_[t].v[(i + 1) % 3];
        VertexId to = tris_[t].v[(i + 2) % 3];
        by_from[from] = {t, to};
    }
    if (by_from.empty()) return out;

    VertexId start;
    if (on_boundary(v)) {
        start = boundary_next_[v]; // outgoing boundary edge: first fan triangle
    } else {
        start = by_from.begin()->first;
    }
    VertexId cur = start;
    for (size_t guard = 0; guard <= by_from.size(); ++guard) {
        auto it = by_from.find(cur);
        if (it == by_from.end()) break;
        out.push_back({it->second.first, cur, it->second.second});
        cur = it->second.second;
        if (!on_boundary(v) && cur == start) break;
        if (out.size() == by_from.size()) break;
    }
    return out;
}

inline std::vector<Violation> MetricComplex::validate(double tol) const {
    std::vector<Violation> report;
    auto add = [&](const std::string& kind, const std::string& detail) {
        report.push_back({kind, detail});
    };

    if (triangle_count() == 0) {
        add("NotDisk", "no triangles");
        return report;
    }
    if (!topology_ok_) {
        add("NotDisk", topology_reason_.empty()
                           ? "non-manifold, non-orientable, or pinched complex"
                           : topology_reason_);
        return report;
    }

    // connectivity over shared edges
    {
        std::vector<int> comp(triangle_count(), -1);
        std::vector<TriId> stack = {0};
        comp[0] = 0;
        while (!stack.empty()) {
            TriId t = stack.back();
            stack.pop_back();
            const auto& tr = tris_[t];
            for (int i = 0; i < 3; ++i) {
                const EdgeInfo* e = edge(tr.v[i], tr.v[(i + 1) % 3]);
                TriId o = e->other(t);
                if (o != kNoTriangle && comp[o] == -1) {
                    comp[o] = 0;
                    stack.push_back(o);
                }
            }
        }
        for (TriId t = 0; t < triangle_count(); ++t)
            if (comp[t] == -1) {
                add("NotConnected", "triangle " + std::to_string(t) + " unreachable");
                return report;
            }
    }

    // Euler characteristic of a disk
    {
        int V = vertex_count(), E = (int)edges_.size(), F = triangle_count();
        int used = 0;
        for (VertexId v = 0; v < V; ++v) {
            bool touched = false;
            for (const auto& t : tris_)
                if (t.corner_of(v) >= 0) {
                    touched = true;
                    break;
                }
            if (touched) ++used;
        }
        if (used != V) add("NotDisk", "isolated vertices present");
        if (V - E + F != 1)
            add("NotDisk", "Euler characteristic " + std::to_string(V - E + F));
        int cycles = 0;
        std::vector<bool> seen(V, false);
        for (VertexId v = 0; v < V; ++v) {
            if (boundary_next_[v] == -1 || seen[v]) continue;
            ++cycles;
            VertexId w = v;
            while (!seen[w]) {
                seen[w] = true;
                w = boundary_next_[w];
            }
        }
        if (cycles != 1) add("NotDisk", std::to_string(cycles) + " boundary cycles");
    }
    if (!report.empty()) return report;

    // umbrella condition: the fan must reach every incident triangle
    for (VertexId v = 0; v < vertex_count(); ++v) {
        int incident = 0;
        for (const auto& t : tris_)
            if (t.corner_of(v) >= 0) ++incident;
        if ((int)fan(v).size() != incident) {
            add("NotDisk", "vertex " + std::to_string(v) + " has a split umbrella");
            return report;
        }
    }

    // per-triangle geometry
    for (TriId t = 0; t < triangle_count(); ++t) {
        const auto& tr = tris_[t];
        const UnitVec &a = verts_[tr.v[0]].pos, &b = verts_[tr.v[1]].pos,
                      &c = verts_[tr.v[2]].pos;
        double dab = dist(a, b), dbc = dist(b, c), dca = dist(c, a);
        if (dab <= tol || dbc <= tol || dca <= tol ||
            dab >= kPi - tol || dbc >= kPi - tol || dca >= kPi - tol) {
            add("DegenerateTriangle", "triangle " + std::to_string(t) + " edge degenerate");
            continue;
        }
        double d = det3(a.vec(), b.vec(), c.vec());
        if (d <= 0) {
            add("NegativeOrientation", "triangle " + std::to_string(t));
            continue;
        }
        double excess = corner_angle(a, b, c) + corner_angle(b, c, a) +
                        corner_angle(c, a, b) - kPi;
        if (excess < 1e-12)
            add("DegenerateTriangle", "triangle " + std::to_string(t) + " near-zero excess");
    }
    if (!report.empty()) return report;

    // roles and angle sums
    double angle_tol = std::max(tol, 1e-9) * 10;
    for (VertexId v = 0; v < vertex_count(); ++v) {
        bool bdry = on_boundary(v);
        VertexRole r = verts_[v].role;
        if (bdry && r == VertexRole::Interior)
            add("RoleViolation", "interior-role vertex " + std::to_string(v) + " on boundary");
        if (!bdry && r != VertexRole::Interior)
            add("RoleViolation", "boundary-role vertex " + std::to_string(v) + " off boundary");
        double s = vertex_angle(v);
        if (!bdry && std::fabs(s - kTwoPi) > angle_tol)
            add("ConeAngleViolation",
                "vertex " + std::to_string(v) + " angle " + std::to_string(s));
        if (bdry && r == VertexRole::EdgeMark && std::fabs(s - kPi) > angle_tol)
            add("EdgeMarkAngleViolation",
                "vertex " + std::to_string(v) + " angle " + std::to_string(s));
        if (r == VertexRole::Completion && s <= 0)
            add("NonPositiveCompletionAngle", "vertex " + std::to_string(v));
    }

    // claimed corner positions (exercised by tests and the glue machinery)
    for (const auto& [where, claimed] : corner_claims_) {
        VertexId v = tris_[where.first].v[where.second];
        if (dist(verts_[v].pos, claimed) > tol)
            add("DevelopmentMismatch",
                "triangle " + std::to_string(where.first) + " corner " +
                    std::to_string(where.second));
    }

    return report;
}

// Interior angle at a completion vertex (the paper's alpha(v)).
inline double interior_angle(const MetricComplex& c, VertexId v) {
    if (c.role(v) != VertexRole::Completion)
        throw NotCompletionVertex("vertex " + std::to_string(v));
    return c.vertex_angle(v);
}

// Gauss-Bonnet right-hand side for a complex whose boundary is a polygon with
// corners `corners`: sum of corner angles minus (k-2)pi.
inline double polygon_gauss_bonnet(const MetricComplex& c,
                                   const std::vector<VertexId>& corners) {
    double s = 0;
    for (VertexId v : corners) s += c.vertex_angle(v);
    return s - ((double)corners.size() - 2.0) * kPi;
}

} // namespace spheremoduli
