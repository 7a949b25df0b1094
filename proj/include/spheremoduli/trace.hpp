#pragma once

#include <optional>
#include <vector>

#include "spheremoduli/complex.hpp"

namespace spheremoduli {

struct GeodesicHit {
    enum class Kind { VertexHit, EdgeHit, ConjugateHit };
    Kind kind;
    VertexId vertex = -1;        // VertexHit: the boundary mesh vertex reached
    EdgeKey edge{-1, -1};        // EdgeHit: the boundary mesh edge crossed
    double edge_param = 0;       // EdgeHit: position along the directed edge, in (0,1)
    UnitVec point;               // developed end point
    double length = 0;           // traced length, in (0, pi]
};

// One triangle crossed by a trace; entry/exit are either vertices of the
// triangle (id >= 0) or points in edge interiors.
struct TraceStep {
    TriId tri = kNoTriangle;
    double s_in = 0, s_out = 0;
    VertexId enter_vertex = -1;
    EdgeKey enter_edge{-1, -1};
    VertexId exit_vertex = -1;
    EdgeKey exit_edge{-1, -1};
    UnitVec enter_point, exit_point;
};

struct TraceResult {
    GeodesicHit hit;
    std::vector<TraceStep> steps;
    VertexId source = -1;
    double theta = 0;
    UnitVec source_pos;
    Vec3 direction; // unit tangent at the source
};

namespace detail {

inline double circle_param(const UnitVec& q, const UnitVec& origin, const Vec3& dir) {
    return std::atan2(q.vec().dot(dir), q.dot(origin));
}

} // namespace detail

// Developed direction of the trace from vertex v at angle theta, measured CCW
// from the outgoing boundary edge at v ("the edge after v").
inline Vec3 trace_direction(const MetricComplex& c, VertexId v, double theta) {
    auto f = c.fan(v);
    if (f.empty()) throw InternalError("empty fan");
    Vec3 t0 = tangent_toward(c.pos(v), c.pos(f.front().from));
    return Rotation::about_axis(c.pos(v), theta).apply(t0);
}

// Unit-speed geodesic from completion vertex v at angle theta in
// (0, vertex_angle(v)), traced through the triangle fan until the first
// boundary contact or, failing that, length pi (where every great circle
// through v refocuses at the antipode).
inline TraceResult trace_geodesic(const MetricComplex& c, VertexId v, double theta,
                                  double max_len = kPi) {
    const double tol = geom_tolerance();
    if (c.role(v) != VertexRole::Completion)
        throw NotCompletionVertex("trace source must be a completion vertex");
    double alpha = c.vertex_angle(v);
    if (!(theta > 0 && theta < alpha))
        throw AngleOutOfRange("theta outside (0, vertex angle)");
    if (max_len < kPi - tol)
        throw AngleOutOfRange("only traces to length pi are meaningful");

    auto f = c.fan(v);
    // locate the fan triangle containing theta
    TriId cur = kNoTriangle;
    {
        double acc = 0;
        for (const auto& fe : f) {
            double a = c.corner_angle_in(fe.tri, v);
            if (theta <= acc + a || &fe == &f.back()) {
                cur = fe.tri;
                break;
            }
            acc += a;
        }
    }

    TraceResult res;
    res.source = v;
    res.theta = theta;
    res.source_pos = c.pos(v);
    res.direction = trace_direction(c, v, theta);

    const UnitVec P = res.source_pos;
    const Vec3 D = res.direction;
    const Vec3 n = P.vec().cross(D); // unit normal of the trace circle

    double s_cur = 0;
    VertexId enter_vertex = v;
    EdgeKey enter_edge{-1, -1};
    UnitVec enter_point = P;

    int guard = 4 * c.triangle_count() + 4 * c.vertex_count() + 64;
    while (guard-- > 0) {
        const auto& tr = c.triangles()[cur];

        // nearest upcoming event in this triangle: either a vertex of the
        // triangle lying on the circle, or a crossing of a non-entry edge
        double best_s = kTwoPi;
        int best_vertex = -1;
        EdgeKey best_edge{-1, -1};
        UnitVec best_point = P;

        for (int i = 0; i < 3; ++i) {
            VertexId V = tr.v[i];
            if (V == enter_vertex) continue;
            const UnitVec& Q = c.pos(V);
            if (std::fabs(Q.vec().dot(n)) > tol) continue; // off the circle
            double s = detail::circle_param(Q, P, D);
            if (s <= s_cur + tol || s > kPi + tol) continue;
            if (s < best_s - tol) {
                best_s = s;
                best_vertex = V;
                best_edge = {-1, -1};
                best_point = Q;
            }
        }
        for (int i = 0; i < 3; ++i) {
            VertexId A = tr.v[i], B = tr.v[(i + 1) % 3];
            EdgeKey ek = edge_key(A, B);
            if (ek == enter_edge) continue;
            if (A == enter_vertex || B == enter_vertex) continue; // meets circle at +-P only
            Vec3 m = c.pos(A).cross(c.pos(B));
            Vec3 u = n.cross(m);
            double un = u.norm();
            if (un < 1e-14) continue; // path runs along this edge: vertex events cover it
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                UnitVec q(u * (double(sgn) / un));
                double s = detail::circle_param(q, P, D);
                if (s <= s_cur + tol || s > kPi + tol) continue;
                // on-arc test
                double dAB = c.edge_length(A, B);
                if (dist(c.pos(A), q) + dist(q, c.pos(B)) > dAB + 1e-7) continue;
                // vertex snap: treat near-endpoint crossings as vertex events
                if (dist(q, c.pos(A)) <= tol || dist(q, c.pos(B)) <= tol) continue;
                if (s < best_s - tol) {
                    best_s = s;
                    best_vertex = -1;
                    best_edge = ek;
                    best_point = q;
                }
            }
        }

        if (best_s > kPi - tol) {
            // no contact before length pi: conjugate point at the antipode
            TraceStep step;
            step.tri = cur;
            step.s_in = s_cur;
            step.s_out = kPi;
            step.enter_vertex = enter_vertex;
            step.enter_edge = enter_edge;
            step.enter_point = enter_point;
            UnitVec anti = P.antipode();
            // the conjugate point may coincide with a mesh vertex of this fan
            VertexId at = -1;
            for (int i = 0; i < 3; ++i)
                if (dist(c.pos(tr.v[i]), anti) <= tol) at = tr.v[i];
            step.exit_point = anti;
            if (at >= 0 && c.on_boundary(at)) {
                step.exit_vertex = at;
                res.steps.push_back(step);
                res.hit = {GeodesicHit::Kind::VertexHit, at, {-1, -1}, 0, anti, kPi};
            } else {
                res.steps.push_back(step);
                res.hit = {GeodesicHit::Kind::ConjugateHit, -1, {-1, -1}, 0, anti, kPi};
            }
            return res;
        }

        TraceStep step;
        step.tri = cur;
        step.s_in = s_cur;
        step.s_out = best_s;
        step.enter_vertex = enter_vertex;
        step.enter_edge = enter_edge;
        step.enter_point = enter_point;
        step.exit_point = best_point;

        if (best_vertex >= 0) {
            step.exit_vertex = best_vertex;
            res.steps.push_back(step);
            if (c.on_boundary(best_vertex)) {
                res.hit = {GeodesicHit::Kind::VertexHit, best_vertex, {-1, -1}, 0,
                           best_point, best_s};
                return res;
            }
            // pass through an interior vertex: continue on the same circle
            Vec3 t_out = D * std::cos(best_s) - P.vec() * std::sin(best_s);
            TriId next = kNoTriangle;
            double best_margin = -1e9;
            for (const auto& fe : c.fan(best_vertex)) {
                double span = c.corner_angle_in(fe.tri, best_vertex);
                Vec3 ta = tangent_toward(c.pos(best_vertex), c.pos(fe.from));
                double phi = std::atan2(c.pos(best_vertex).vec().dot(ta.cross(t_out)),
                                        ta.dot(t_out));
                if (phi < 0) phi += kTwoPi;
                double margin = std::min(phi, span - phi);
                if (phi <= span + tol && margin > best_margin) {
                    best_margin = margin;
                    next = fe.tri;
                }
            }
            if (next == kNoTriangle)
                throw NumericalStall("no continuation triangle at interior vertex");
            cur = next;
            s_cur = best_s;
            enter_vertex = best_vertex;
            enter_edge = {-1, -1};
            enter_point = best_point;
            continue;
        }

        // edge crossing
        const EdgeInfo* e = c.edge(best_edge.first, best_edge.second);
        step.exit_edge = best_edge;
        res.steps.push_back(step);
        if (e->boundary()) {
            // orient the edge as the boundary traverses it
            VertexId u = best_edge.first, w = best_edge.second;
            if (c.boundary_next(u) != w) std::swap(u, w);
            double t = dist(c.pos(u), best_point) / c.edge_length(u, w);
            res.hit = {GeodesicHit::Kind::EdgeHit, -1, edge_key(u, w), t, best_point,
                       best_s};
            return res;
        }
        cur = e->other(cur);
        if (cur == kNoTriangle) throw NumericalStall("dangling interior edge");
        s_cur = best_s;
        enter_vertex = -1;
        enter_edge = best_edge;
        enter_point = best_point;
    }
    throw NumericalStall("trace did not terminate");
}

} // namespace spheremoduli
