#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "spheremoduli/decompose.hpp"

namespace spheremoduli {

// Deterministic SVG rendering of a developed metric: two orthographic
// hemispheres side by side (front x >= 0 on the left, back on the right),
// thick strokes on the truncation boundary, labelled tuple points.
struct RenderSpec {
    enum class Projection { TwoHemisphere, Stereographic };
    Projection projection = Projection::TwoHemisphere;
    bool show_mesh = true;      // interior mesh edges, thin
    bool show_tuple = true;     // labelled completion points
    bool show_diagonals = false; // traced diagonals, dashed
    bool show_rays = true;      // ray labels on the truncation edges
    double radius = 200;        // hemisphere disk radius in px
    double boundary_stroke = 3.0;
    double mesh_stroke = 0.6;
};

namespace render_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

struct Mapper {
    const RenderSpec& spec;
    // front disk center (R+10, R+10); back disk center (3R+30, R+10)
    std::pair<double, double> map(const UnitVec& p, bool* front) const {
        double R = spec.radius;
        if (spec.projection == RenderSpec::Projection::Stereographic) {
            if (front) *front = true;
            auto z = stereo(p, ez());
            double lim = 4;
            double re = z.infinite ? lim : std::max(-lim, std::min(lim, z.re));
            double im = z.infinite ? lim : std::max(-lim, std::min(lim, z.im));
            return {R + 10 + re * R / lim, R + 10 - im * R / lim};
        }
        bool f = p.x >= 0;
        if (front) *front = f;
        double cx = f ? R + 10 : 3 * R + 30;
        return {cx + (f ? p.y : -p.y) * R, R + 10 - p.z * R};
    }
};

inline void emit_arc_path(std::string& out, const Mapper& m, const UnitVec& a,
                          const UnitVec& b, const char* cls, double stroke) {
    int segs = 16;
    out += "<path class=\"";
    out += cls;
    out += "\" fill=\"none\" stroke=\"black\" stroke-width=\"";
    out += fmt(stroke);
    out += "\" d=\"";
    bool prev_front = true;
    for (int i = 0; i <= segs; ++i) {
        UnitVec q = slerp(a, b, (double)i / segs);
        bool front;
        auto [x, y] = m.map(q, &front);
        if (i == 0 || front != prev_front)
            out += "M " + fmt(x) + " " + fmt(y) + " ";
        else
            out += "L " + fmt(x) + " " + fmt(y) + " ";
        prev_front = front;
    }
    out += "\"/>\n";
}

} // namespace render_detail

inline std::string render_svg(const KPointMetric& d, const RenderSpec& spec = {}) {
    using namespace render_detail;
    auto report = d.core.validate();
    if (!report.empty())
        throw InvalidDocument("cannot render an invalid metric: " + report.front().kind);
    const MetricComplex& c = d.core.complex;
    Mapper m{spec};
    double W = spec.projection == RenderSpec::Projection::TwoHemisphere
                   ? 4 * spec.radius + 40
                   : 2 * spec.radius + 20;
    double H = 2 * spec.radius + 20;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) +
           "\" height=\"" + fmt(H) + "\" viewBox=\"0 0 " + fmt(W) + " " + fmt(H) +
           "\">\n";
    // hemisphere outlines
    if (spec.projection == RenderSpec::Projection::TwoHemisphere) {
        for (double cx : {spec.radius + 10, 3 * spec.radius + 30})
            out += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(spec.radius + 10) +
                   "\" r=\"" + fmt(spec.radius) +
                   "\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    }
    if (spec.show_mesh) {
        for (const auto& [key, e] : c.edges()) {
            if (e.boundary()) continue;
            emit_arc_path(out, m, c.pos(key.first), c.pos(key.second), "mesh",
                          spec.mesh_stroke);
        }
    }
    // truncation boundary: one thick path per polygon edge
    for (int i = 0; i < d.k(); ++i) {
        auto path = d.core.edge_path(i);
        std::string dstr;
        out += "<path class=\"boundary\" fill=\"none\" stroke=\"black\" stroke-width=\"" +
               fmt(spec.boundary_stroke) + "\" d=\"";
        bool first = true;
        bool prev_front = true;
        for (size_t s = 0; s + 1 < path.size(); ++s) {
            UnitVec a = c.pos(path[s]), b = c.pos(path[s + 1]);
            int segs = 16;
            for (int t = (s == 0 ? 0 : 1); t <= segs; ++t) {
                UnitVec q = slerp(a, b, (double)t / segs);
                bool front;
                auto [x, y] = m.map(q, &front);
                if (first || front != prev_front)
                    out += "M " + fmt(x) + " " + fmt(y) + " ";
                else
                    out += "L " + fmt(x) + " " + fmt(y) + " ";
                first = false;
                prev_front = front;
            }
        }
        out += "\"/>\n";
    }
    if (spec.show_diagonals) {
        for (const auto& diag : diagonals(d.core)) {
            out += "<path class=\"diagonal\" fill=\"none\" stroke=\"black\" "
                   "stroke-dasharray=\"6 3\" stroke-width=\"" +
                   fmt(spec.boundary_stroke / 2) + "\" d=\"";
            bool first = true;
            bool prev_front = true;
            for (const auto& st : diag.trace.steps) {
                int segs = 8;
                for (int t = first ? 0 : 1; t <= segs; ++t) {
                    UnitVec q = slerp(st.enter_point, st.exit_point, (double)t / segs);
                    bool front;
                    auto [x, y] = m.map(q, &front);
                    if (first || front != prev_front)
                        out += "M " + fmt(x) + " " + fmt(y) + " ";
                    else
                        out += "L " + fmt(x) + " " + fmt(y) + " ";
                    first = false;
                    prev_front = front;
                }
            }
            out += "\"/>\n";
        }
    }
    if (spec.show_rays) {
        for (int i = 0; i < d.k(); ++i) {
            auto path = d.core.edge_path(i);
            UnitVec mid = point_along_path(c, path, d.core.edge_length(i) / 2);
            bool front;
            auto [x, y] = m.map(mid, &front);
            out += "<text class=\"ray-label\" x=\"" + fmt(x + 4) + "\" y=\"" +
                   fmt(y + 4) + "\" font-size=\"10\">ray " + std::to_string(i) +
                   "</text>\n";
        }
    }
    if (spec.show_tuple) {
        for (int i = 0; i < d.k(); ++i) {
            const UnitVec& p = c.pos(d.core.corners[i]);
            bool front;
            auto [x, y] = m.map(p, &front);
            out += "<circle class=\"tuple\" cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) +
                   "\" r=\"4\" fill=\"black\"/>\n";
            out += "<text class=\"tuple-label\" x=\"" + fmt(x + 6) + "\" y=\"" +
                   fmt(y - 6) + "\" font-size=\"14\">p" + std::to_string(i + 1) +
                   "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

} // namespace spheremoduli
