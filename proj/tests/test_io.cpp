#include "doctest.h"

#include "spheremoduli/io.hpp"
#include "spheremoduli/render.hpp"
#include "spheremoduli/samples.hpp"

using namespace spheremoduli;

TEST_CASE("metric JSON round-trip is field-for-field") {
    for (auto metric : {samples::octant_metric(), samples::family_metric(4, 0.8),
                        samples::equatorial_metric(1)}) {
        json doc = to_json(metric);
        auto back = metric_from_json(doc);
        json doc2 = to_json(back);
        CHECK(doc == doc2);
        CHECK(isometric(metric, back, 1e-12));
    }
}

TEST_CASE("serialization is deterministic") {
    auto d = samples::six_point_metric();
    CHECK(dump_json(to_json(d)) == dump_json(to_json(d)));
    CHECK(render_svg(d) == render_svg(d));
}

TEST_CASE("documents carry the tuple annotation") {
    auto doc = to_json(samples::octant_metric());
    REQUIRE(doc.contains("tuple"));
    CHECK(doc.at("tuple").size() == 3);
    CHECK(doc.at("excess").size() == 3);
    CHECK(doc.at("rays").size() == 3);
}

TEST_CASE("broken documents are rejected") {
    auto doc = to_json(samples::octant_metric());
    SUBCASE("missing triangles") {
        doc.erase("triangles");
        CHECK_THROWS_AS(metric_from_json(doc), InvalidDocument);
    }
    SUBCASE("bad role") {
        doc["vertices"][0]["role"] = "nonsense";
        CHECK_THROWS_AS(metric_from_json(doc), InvalidDocument);
    }
    SUBCASE("ray length mismatch") {
        doc["rays"][0]["slit_length"] = 2.22;
        CHECK_THROWS_AS(metric_from_json(doc), InvalidDocument);
    }
    SUBCASE("orientation flip breaks validation") {
        auto t = doc["triangles"][0];
        doc["triangles"][0] = {t[0], t[2], t[1]};
        CHECK_THROWS_AS(metric_from_json(doc), InvalidDocument);
    }
}

TEST_CASE("octant SVG has three boundary arcs and three labels") {
    auto svg = render_svg(samples::octant_metric());
    auto count = [&](const std::string& needle) {
        size_t n = 0, pos = 0;
        while ((pos = svg.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    CHECK(count("class=\"boundary\"") == 3);
    CHECK(count("class=\"tuple-label\"") == 3);
}

TEST_CASE("six-point SVG has six thick truncation arcs") {
    auto svg = render_svg(samples::six_point_metric());
    size_t n = 0, pos = 0;
    while ((pos = svg.find("class=\"boundary\"", pos)) != std::string::npos) {
        ++n;
        pos += 10;
    }
    CHECK(n == 6);
}

TEST_CASE("decomposition and necksize reports serialize") {
    auto d = samples::six_point_metric();
    auto dec = decompose_full(d);
    json jd = to_json(dec);
    CHECK(jd.at("counts").at("slit_spheres") == 3);
    CHECK(jd.at("counts").at("small_triangles") == 2);
    CHECK(jd.at("counts").at("concave_polygons") == 1);
    CHECK(jd.at("counts").at("rays") == 6);
    json jn = to_json(necksizes(d));
    CHECK(jn.at("pass") == true);
    CHECK(jn.at("necksizes").size() == 6);
}
