// Command-line front end: construction, decomposition, truncation,
// projection, necksize checks, path lifting, the 4-point fiber tools, and
// SVG rendering of developed metrics.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "spheremoduli/io.hpp"
#include "spheremoduli/render.hpp"
#include "spheremoduli/samples.hpp"

using namespace spheremoduli;

namespace {

KPointMetric load_metric(const std::string& path) {
    return metric_from_json(read_json_file(path));
}

std::vector<double> parse_csv(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "pi")
            out.push_back(kPi);
        else if (item == "pi/2")
            out.push_back(kPi / 2);
        else
            out.push_back(std::stod(item));
    }
    return out;
}

std::vector<UnitVec> parse_points(const std::string& s) {
    std::vector<UnitVec> pts;
    std::stringstream ss(s);
    std::string triple;
    while (std::getline(ss, triple, ';')) {
        auto v = parse_csv(triple);
        if (v.size() != 3) throw InvalidDocument("points need x,y,z triples");
        pts.push_back(UnitVec(v[0], v[1], v[2]));
    }
    return pts;
}

void print_report(const NecksizeReport& rep) {
    std::printf("necksizes:");
    for (double n : rep.necksizes) std::printf(" %.12g", n);
    std::printf("\nsum = %.12g\n", rep.sum);
    int failed = 0;
    for (const auto& s : rep.odd_subsets) failed += s.pass ? 0 : 1;
    std::printf("odd-subset inequalities: %zu checked, %d failed\n",
                rep.odd_subsets.size(), failed);
    if (rep.sum_odd_applicable)
        std::printf("odd-k bound sum <= (k-1)pi: %s%s\n", rep.sum_odd_pass ? "pass" : "FAIL",
                    rep.sum_odd_equality ? " (equality)" : "");
    if (rep.sum_even_applicable)
        std::printf("even-k strict bound sum < k pi: %s\n",
                    rep.sum_even_pass ? "pass" : "FAIL");
    std::printf("cylindrical ends: %d (%s)\n", rep.cylindrical_count,
                rep.cylindrical_ok ? "ok" : "too many");
    std::printf("overall: %s\n", rep.pass() ? "pass" : "FAIL");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spherical k-point metrics: construction, decomposition, moduli"};
    app.require_subcommand(1);

    // ---- build ----------------------------------------------------------
    auto* build = app.add_subcommand("build", "construct a named metric");
    std::string build_what = "octant", build_out = "metric.json";
    int build_k = 4, build_m = 1;
    double build_n = kPi / 2;
    long build_label = 1;
    std::string build_points;
    build->add_option("generator", build_what,
                      "octant|family|hemisphere|equatorial|fig6pt|d4base|tuple");
    build->add_option("-o,--out", build_out, "output metric JSON");
    build->add_option("-k", build_k, "number of ends");
    build->add_option("-n", build_n, "family edge parameter in (0, pi)");
    build->add_option("-m", build_m, "equatorial slit-sphere count");
    build->add_option("--label", build_label, "odd fiber label for d4base");
    build->add_option("--points", build_points, "x,y,z;... tuple for `tuple`");

    // ---- decompose ------------------------------------------------------
    auto* dec = app.add_subcommand("decompose", "canonical decomposition");
    std::string dec_in, dec_out;
    dec->add_option("input", dec_in)->required();
    dec->add_option("-o,--out", dec_out, "decomposition JSON");

    // ---- truncate -------------------------------------------------------
    auto* trunc = app.add_subcommand("truncate", "small truncation");
    std::string trunc_in, trunc_out;
    trunc->add_option("input", trunc_in)->required();
    trunc->add_option("-o,--out", trunc_out, "truncated metric JSON");

    // ---- project --------------------------------------------------------
    auto* proj = app.add_subcommand("project", "developed tuple (canonical form)");
    std::string proj_in;
    proj->add_option("input", proj_in)->required();

    // ---- necksizes ------------------------------------------------------
    auto* necks = app.add_subcommand("necksizes", "necksizes and inequality report");
    std::string necks_in, necks_out;
    necks->add_option("input", necks_in)->required();
    necks->add_option("-o,--out", necks_out, "report JSON");

    // ---- check ----------------------------------------------------------
    auto* check = app.add_subcommand("check", "validate a metric document or necksizes");
    std::string check_in, check_necks;
    check->add_option("input", check_in, "metric JSON");
    check->add_option("--necksizes", check_necks, "comma list (accepts pi, pi/2)");

    // ---- lift -----------------------------------------------------------
    auto* lift = app.add_subcommand("lift", "lift a tuple path");
    std::string lift_in, lift_path_file, lift_out, lift_prefix;
    lift->add_option("input", lift_in)->required();
    lift->add_option("--path", lift_path_file, "JSON {\"waypoints\":[[[x,y,z]x k]...]}")
        ->required();
    lift->add_option("-o,--out", lift_out, "final metric JSON");
    lift->add_option("--out-prefix", lift_prefix, "write every lifted stage");

    // ---- d4 -------------------------------------------------------------
    auto* d4cmd = app.add_subcommand("d4", "4-point fiber tools");
    std::string d4_what, d4_in, d4_out = "d4.json", d4_which = "beta";
    long d4_n = 1;
    int d4_steps = 256;
    d4cmd->add_option("action", d4_what, "label|coords|base|loop")->required();
    d4cmd->add_option("input", d4_in, "metric JSON (label, coords, loop)");
    d4cmd->add_option("-o,--out", d4_out, "output metric JSON (base, loop)");
    d4cmd->add_option("--label", d4_n, "odd label for `base`");
    d4cmd->add_option("--which", d4_which, "beta|gamma for `loop`");
    d4cmd->add_option("--steps", d4_steps, "loop discretization");

    // ---- telescope ------------------------------------------------------
    auto* tel = app.add_subcommand("telescope", "remove slit spheres to m = 0");
    std::string tel_in, tel_out;
    tel->add_option("input", tel_in)->required();
    tel->add_option("-o,--out", tel_out, "terminal metric JSON");

    // ---- render ---------------------------------------------------------
    auto* rend = app.add_subcommand("render", "SVG of the developed metric");
    std::string rend_in, rend_out = "metric.svg", rend_proj = "two-hemisphere";
    bool rend_nomesh = false, rend_diag = false, rend_norays = false;
    rend->add_option("input", rend_in)->required();
    rend->add_option("-o,--out", rend_out, "output SVG");
    rend->add_option("--projection", rend_proj, "two-hemisphere|stereographic");
    rend->add_flag("--no-mesh", rend_nomesh, "hide interior mesh edges");
    rend->add_flag("--diagonals", rend_diag, "overlay traced diagonals");
    rend->add_flag("--no-rays", rend_norays, "hide ray labels");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) {
            KPointMetric d;
            if (build_what == "octant")
                d = samples::octant_metric();
            else if (build_what == "family")
                d = samples::family_metric(build_k, build_n);
            else if (build_what == "hemisphere")
                d = samples::hemisphere_metric(build_k);
            else if (build_what == "equatorial")
                d = samples::equatorial_metric(build_m);
            else if (build_what == "fig6pt")
                d = samples::six_point_metric();
            else if (build_what == "d4base")
                d = d4::basepoint_metric(build_label);
            else if (build_what == "tuple")
                d = build_metric_for_tuple(make_ktuple(parse_points(build_points)));
            else
                throw InvalidDocument("unknown generator " + build_what);
            write_json_file(build_out, to_json(d));
            std::printf("wrote %s (k = %d, area = %.9g)\n", build_out.c_str(), d.k(),
                        d.core.area());
        } else if (*dec) {
            auto d = load_metric(dec_in);
            auto decomposition = decompose_full(d);
            json doc = to_json(decomposition);
            if (!dec_out.empty()) write_json_file(dec_out, doc);
            std::cout << doc.at("counts").dump(2) << "\n";
        } else if (*trunc) {
            auto d = load_metric(trunc_in);
            auto res = small_truncation(d);
            std::printf("removed slit spheres per edge:");
            for (int r : res.removed) std::printf(" %d", r);
            std::printf("\n");
            if (!trunc_out.empty()) write_json_file(trunc_out, to_json(res.metric));
        } else if (*proj) {
            auto t = project_tuple(load_metric(proj_in));
            json doc;
            doc["kind"] = "tuple";
            json pts = json::array();
            for (const auto& p : t.points) pts.push_back({p.x, p.y, p.z});
            doc["points"] = std::move(pts);
            std::cout << dump_json(doc);
        } else if (*necks) {
            auto rep = necksizes(load_metric(necks_in));
            print_report(rep);
            if (!necks_out.empty()) write_json_file(necks_out, to_json(rep));
        } else if (*check) {
            NecksizeReport rep;
            if (!check_necks.empty()) {
                rep = check_necksizes(parse_csv(check_necks));
            } else if (!check_in.empty()) {
                json doc = read_json_file(check_in); // IO/parse errors exit 1
                try {
                    rep = necksizes(metric_from_json(doc));
                } catch (const InvalidDocument& e) {
                    std::fprintf(stderr, "validation failed: %s\n", e.what());
                    return 2;
                }
            } else {
                std::fprintf(stderr, "check needs a metric file or --necksizes\n");
                return 1;
            }
            print_report(rep);
            if (!rep.pass()) return 2;
        } else if (*lift) {
            auto d = load_metric(lift_in);
            json pdoc = read_json_file(lift_path_file);
            std::vector<std::vector<UnitVec>> waypoints;
            for (const auto& wp : pdoc.at("waypoints")) {
                std::vector<UnitVec> tuple;
                for (const auto& p : wp)
                    tuple.push_back(UnitVec(p.at(0).get<double>(), p.at(1).get<double>(),
                                            p.at(2).get<double>()));
                waypoints.push_back(std::move(tuple));
            }
            auto stages = lift_path(d, waypoints);
            if (!lift_prefix.empty())
                for (size_t i = 0; i < stages.size(); ++i)
                    write_json_file(lift_prefix + std::to_string(i) + ".json",
                                    to_json(stages[i]));
            if (!lift_out.empty()) write_json_file(lift_out, to_json(stages.back()));
            std::printf("lifted %zu waypoints\n", stages.size());
        } else if (*d4cmd) {
            if (d4_what == "base") {
                auto d = d4::basepoint_metric(d4_n);
                write_json_file(d4_out, to_json(d));
                std::printf("wrote %s (n = %ld)\n", d4_out.c_str(), d4_n);
            } else if (d4_what == "label") {
                auto d = load_metric(d4_in);
                std::printf("n = %ld\n", d4_label(d).n);
            } else if (d4_what == "coords") {
                auto t = project_tuple(load_metric(d4_in));
                auto co = d4_coords(t);
                if (co.z.infinite)
                    std::printf("z = inf\n");
                else
                    std::printf("z = %.12g + %.12gi\n", co.z.re, co.z.im);
                std::printf("t = %.12g\n", co.t);
            } else if (d4_what == "loop") {
                auto d = load_metric(d4_in);
                auto path = d4_which == "gamma" ? d4::loop_gamma(d4_steps)
                                                : d4::loop_beta(d4_steps);
                auto end = d4::lift_loop(d, path);
                std::printf("label: %ld -> %ld\n", d4_label(d).n, d4_label(end).n);
                if (!d4_out.empty()) write_json_file(d4_out, to_json(end));
            } else {
                throw InvalidDocument("unknown d4 action " + d4_what);
            }
        } else if (*tel) {
            auto d = load_metric(tel_in);
            auto res = telescope(d);
            std::printf("m sequence:");
            for (int mval : res.m_values) std::printf(" %d", mval);
            std::printf("\n");
            if (!tel_out.empty()) write_json_file(tel_out, to_json(res.stages.back()));
        } else if (*rend) {
            auto d = load_metric(rend_in);
            RenderSpec spec;
            spec.show_mesh = !rend_nomesh;
            spec.show_diagonals = rend_diag;
            spec.show_rays = !rend_norays;
            if (rend_proj == "stereographic")
                spec.projection = RenderSpec::Projection::Stereographic;
            else if (rend_proj != "two-hemisphere")
                throw InvalidDocument("unknown projection " + rend_proj);
            std::string svg = render_svg(d, spec); // throws before any file output
            std::ofstream out(rend_out);
            if (!out) throw InvalidDocument("cannot open " + rend_out);
            out << svg;
            std::printf("wrote %s\n", rend_out.c_str());
        }
    } catch (const InvalidDocument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
