#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spheremoduli/decompose.hpp"
#include "spheremoduli/moduli.hpp"

namespace spheremoduli {

using nlohmann::json;

inline constexpr int kDocumentVersion = 1;

// ---------------------------------------------------------------------------
// MetricDocument: the on-disk form of a KGon / KPointMetric
// ---------------------------------------------------------------------------

inline json to_json(const KPointMetric& d) {
    const MetricComplex& c = d.core.complex;
    json doc;
    doc["version"] = kDocumentVersion;
    doc["kind"] = "k_point_metric";
    json verts = json::array();
    for (VertexId v = 0; v < c.vertex_count(); ++v) {
        json jv;
        jv["id"] = v;
        jv["role"] = role_name(c.role(v));
        for (int i = 0; i < d.k(); ++i)
            if (d.core.corners[i] == v) jv["index"] = i + 1;
        jv["pos"] = {c.pos(v).x, c.pos(v).y, c.pos(v).z};
        verts.push_back(std::move(jv));
    }
    doc["vertices"] = std::move(verts);
    json tris = json::array();
    for (const auto& t : c.triangles()) tris.push_back({t.v[0], t.v[1], t.v[2]});
    doc["triangles"] = std::move(tris);
    json rays = json::array();
    for (int i = 0; i < d.k(); ++i)
        rays.push_back({{"edge", i}, {"slit_length", d.ray_slit_lengths[i]}});
    doc["rays"] = std::move(rays);
    doc["excess"] = d.excess;
    json tuple = json::array();
    try {
        for (const auto& p : project_tuple(d).points) tuple.push_back({p.x, p.y, p.z});
        doc["tuple"] = std::move(tuple);
    } catch (const Error&) {
        // annotation only; invalid representations are still serializable
    }
    return doc;
}

inline KPointMetric metric_from_json(const json& doc) {
    if (!doc.contains("vertices") || !doc.contains("triangles"))
        throw InvalidDocument("missing vertices or triangles");
    MetricComplexBuilder b;
    std::map<int, VertexId> idmap;
    std::map<int, VertexId> corner_by_index;
    for (const auto& jv : doc.at("vertices")) {
        std::string role = jv.at("role").get<std::string>();
        VertexRole r = role == "completion"  ? VertexRole::Completion
                       : role == "edgemark"  ? VertexRole::EdgeMark
                       : role == "interior"  ? VertexRole::Interior
                                             : throw InvalidDocument("bad role " + role);
        auto pos = jv.at("pos");
        VertexId v = b.add_vertex(r, UnitVec(pos.at(0).get<double>(),
                                             pos.at(1).get<double>(),
                                             pos.at(2).get<double>()));
        idmap[jv.at("id").get<int>()] = v;
        if (jv.contains("index")) corner_by_index[jv.at("index").get<int>()] = v;
    }
    for (const auto& jt : doc.at("triangles")) {
        auto at = [&](int i) {
            auto it = idmap.find(jt.at(i).get<int>());
            if (it == idmap.end()) throw InvalidDocument("triangle references unknown vertex");
            return it->second;
        };
        b.add_triangle(at(0), at(1), at(2));
    }
    MetricComplex c = b.build();
    if (corner_by_index.empty()) throw InvalidDocument("no completion indices");
    KGon g;
    g.complex = c;
    for (auto& [idx, v] : corner_by_index) {
        (void)idx;
        g.corners.push_back(v);
    }
    // corner_by_index is ordered by label; verify it matches the boundary cycle
    auto report = g.validate();
    if (!report.empty())
        throw InvalidDocument("document does not encode a valid metric: " +
                              report.front().kind + " " + report.front().detail);
    KPointMetric d;
    d.core = g;
    if (doc.contains("rays")) {
        d.ray_slit_lengths.resize(g.k());
        for (const auto& jr : doc.at("rays"))
            d.ray_slit_lengths.at(jr.at("edge").get<int>()) =
                jr.at("slit_length").get<double>();
    } else {
        for (int i = 0; i < g.k(); ++i) d.ray_slit_lengths.push_back(g.edge_length(i));
    }
    if (doc.contains("excess"))
        d.excess = doc.at("excess").get<std::vector<int>>();
    else
        d.excess.assign(g.k(), 0);
    for (int i = 0; i < g.k(); ++i)
        if (std::fabs(d.ray_slit_lengths[i] - g.edge_length(i)) > 1e-7)
            throw InvalidDocument("ray slit length disagrees with edge " + std::to_string(i));
    return d;
}

// ---------------------------------------------------------------------------
// Decomposition and necksize reports
// ---------------------------------------------------------------------------

inline json to_json(const Decomposition& dec) {
    json doc;
    doc["version"] = kDocumentVersion;
    doc["kind"] = "decomposition";
    json pieces = json::array();
    for (const auto& p : dec.pieces) {
        json jp;
        jp["type"] = piece_type_name(p.type);
        jp["k"] = p.k();
        jp["area"] = p.type == PieceType::Ray ? 0.0 : p.area;
        jp["param"] = p.param;
        jp["source_corners"] = p.src_corners;
        pieces.push_back(std::move(jp));
    }
    doc["pieces"] = std::move(pieces);
    json duals = json::array();
    for (const auto& de : dec.dual_edges)
        duals.push_back({{"piece_a", de.piece_a},
                         {"edge_a", de.edge_a},
                         {"piece_b", de.piece_b},
                         {"edge_b", de.edge_b}});
    doc["dual_tree"] = std::move(duals);
    json counts;
    counts["slit_spheres"] = dec.type_counts()[(int)PieceType::SlitSphere];
    counts["small_triangles"] = dec.type_counts()[(int)PieceType::SmallTriangle];
    counts["marked_lunes"] = dec.type_counts()[(int)PieceType::MarkedLune];
    counts["hemispheres"] = dec.type_counts()[(int)PieceType::Hemisphere];
    counts["concave_polygons"] = dec.type_counts()[(int)PieceType::ConcaveEmbedded];
    counts["rays"] = dec.type_counts()[(int)PieceType::Ray];
    doc["counts"] = std::move(counts);
    return doc;
}

inline json to_json(const NecksizeReport& rep) {
    json doc;
    doc["version"] = kDocumentVersion;
    doc["kind"] = "necksize_report";
    doc["necksizes"] = rep.necksizes;
    doc["sum"] = rep.sum;
    doc["pass"] = rep.pass();
    json subs = json::array();
    for (const auto& s : rep.odd_subsets)
        subs.push_back(
            {{"subset", s.subset}, {"lhs", s.lhs}, {"rhs", s.rhs}, {"pass", s.pass}});
    doc["odd_subset_inequalities"] = std::move(subs);
    if (rep.sum_odd_applicable) {
        doc["odd_sum_bound"] = {{"pass", rep.sum_odd_pass},
                                {"equality", rep.sum_odd_equality}};
    }
    if (rep.sum_even_applicable) doc["even_sum_bound"] = {{"pass", rep.sum_even_pass}};
    doc["cylindrical_count"] = rep.cylindrical_count;
    doc["cylindrical_ok"] = rep.cylindrical_ok;
    return doc;
}

// ---------------------------------------------------------------------------
// files
// ---------------------------------------------------------------------------

inline std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

inline void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw InvalidDocument("cannot open " + path + " for writing");
    out << dump_json(doc);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidDocument("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw InvalidDocument(std::string("parse error: ") + e.what());
    }
    return doc;
}

} // namespace spheremoduli
