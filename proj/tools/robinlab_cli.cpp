#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "robinlab/experiment.hpp"

using namespace rml;

namespace {

PolygonalDomain load_domain(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open domain file " + path);
    return read_domain(in);
}

BoundaryMeasure sigma_for(const PolygonalDomain& d, const std::string& rule) {
    return attach_sigma(d, rule.empty() ? default_sigma_rule(d.family()) : sigma_rule_from_string(rule));
}

Vec2 parse_point(const std::string& s) {
    std::istringstream in(s);
    Vec2 p;
    char comma = 0;
    if (!(in >> p.x >> comma >> p.y) || comma != ',') throw Error(ErrorKind::InvalidArgument, "expected x,y but got " + s);
    return p;
}

void write_out(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    write_file_atomic(path, content);
}

struct MeshArgs {
    std::string domain, sigma;
    double h = 1.0 / 16.0;
    int refinements = 0;

    void add(CLI::App* app) {
        app->add_option("--domain", domain, "domain file (RMLDOM)")->required()->check(CLI::ExistingFile);
        app->add_option("--target-h", h, "target element size")->check(CLI::PositiveNumber);
        app->add_option("--sigma", sigma, "sigma rule (default by family)");
        app->add_option("--refine", refinements, "red refinements after meshing")->check(CLI::NonNegativeNumber);
    }

    std::shared_ptr<const Mesh> build(const PolygonalDomain& d, const BoundaryMeasure& s) const {
        Mesh m = cached_triangulate(d, s, h);
        for (int k = 0; k < refinements; ++k) m = refine(m);
        return std::make_shared<const Mesh>(std::move(m));
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robin harmonic measure experiments"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a domain file");
    std::string family, gen_out, gen_sigma_out, gen_sigma;
    int generation = 0, edges = 0;
    double base_scale = 1.0, outer_radius = 2.0;
    gen->add_option("--family", family, "cantor | koch | square | disk")->required();
    gen->add_option("--generation", generation)->check(CLI::NonNegativeNumber);
    gen->add_option("--base-scale", base_scale)->check(CLI::PositiveNumber);
    gen->add_option("--outer-radius", outer_radius, "Cantor outer square half-width in units of L")
        ->check(CLI::PositiveNumber);
    gen->add_option("--edges", edges, "disk polygon edge count");
    gen->add_option("--out", gen_out, "output domain file")->required();
    gen->add_option("--sigma-out", gen_sigma_out, "also write the boundary measure");
    gen->add_option("--sigma", gen_sigma, "sigma rule (default by family)");

    // mesh
    auto* mesh_cmd = app.add_subcommand("mesh", "triangulate a domain");
    MeshArgs mesh_args;
    std::string mesh_out;
    mesh_args.add(mesh_cmd);
    mesh_cmd->add_option("--out", mesh_out, "output mesh file (RMLB1)")->required();

    // solve
    auto* solve = app.add_subcommand("solve", "solve the Robin problem B u = M f");
    MeshArgs solve_args;
    double solve_a = 1.0;
    std::string data = "cos", solve_out = "solution.csv", config_path;
    solve_args.add(solve);
    solve->add_option("--a", solve_a)->check(CLI::PositiveNumber);
    solve->add_option("--data", data, "boundary data: one | x | y | cos");
    solve->add_option("--coeff-config", config_path, "JSON config whose coefficient block is used");
    solve->add_option("--out", solve_out, "CSV (vertex,x,y,value), '-' for stdout");

    // measure
    auto* measure = app.add_subcommand("measure", "harmonic measure density for a pole");
    MeshArgs measure_args;
    double measure_a = 1.0;
    std::string pole_s, measure_out = "density.csv";
    measure_args.add(measure);
    measure->add_option("--a", measure_a)->check(CLI::PositiveNumber);
    measure->add_option("--pole", pole_s, "pole x,y")->required();
    measure->add_option("--out", measure_out, "CSV (vertex,x,y,sigma,w), '-' for stdout");

    // scan
    auto* scan = app.add_subcommand("scan", "run an experiment config into a report directory");
    std::string scan_config, scan_out;
    scan->add_option("--config", scan_config, "experiment JSON")->required()->check(CLI::ExistingFile);
    scan->add_option("--out", scan_out, "override output_dir");

    // walk
    auto* walk_cmd = app.add_subcommand("walk", "absorption histogram of the Robin random walk");
    MeshArgs walk_args;
    walk_args.h = 0.125;
    double walk_a = 1.0;
    std::uint64_t n_walks = 100000, seed = 1;
    std::string start_s, walk_out = "histogram.csv";
    walk_args.add(walk_cmd);
    walk_cmd->add_option("--a", walk_a)->check(CLI::PositiveNumber);
    walk_cmd->add_option("--n", n_walks, "number of walks (>= 1000)");
    walk_cmd->add_option("--seed", seed);
    walk_cmd->add_option("--start", start_s, "start point x,y (nearest interior vertex); default box center");
    walk_cmd->add_option("--out", walk_out, "CSV (vertex,count,sigma,density), '-' for stdout");

    // report
    auto* report = app.add_subcommand("report", "redraw SVG figures from the CSV files of a report");
    std::string report_dir;
    report->add_option("--dir", report_dir, "report directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            DomainSpec spec;
            spec.family = family_from_string(family);
            spec.generation = generation;
            spec.base_scale = base_scale;
            spec.outer_radius = outer_radius;
            spec.edges = edges;
            auto d = make_domain(spec);
            std::ostringstream os;
            write_domain(os, d);
            write_out(gen_out, os.str());
            if (!gen_sigma_out.empty()) {
                std::ostringstream ss;
                write_sigma(ss, sigma_for(d, gen_sigma));
                write_out(gen_sigma_out, ss.str());
            }
            std::cerr << to_string(d.family()) << " generation " << d.generation() << ": " << d.edges().size()
                      << " edges, " << d.components().size() << " components\n";
        } else if (mesh_cmd->parsed()) {
            auto d = load_domain(mesh_args.domain);
            auto m = mesh_args.build(d, sigma_for(d, mesh_args.sigma));
            std::ostringstream os;
            write_mesh(os, *m);
            write_out(mesh_out, os.str());
            std::cout << "vertices " << m->vertex_count() << "\ntriangles " << m->triangles.size()
                      << "\nboundary_edges " << m->boundary_edges.size() << "\nmax_angle_deg "
                      << m->max_angle_degrees() << "\nboundary_h " << m->boundary_h() << "\nsigma_total "
                      << m->total_sigma() << '\n';
        } else if (solve->parsed()) {
            auto d = load_domain(solve_args.domain);
            auto m = solve_args.build(d, sigma_for(d, solve_args.sigma));
            CoefficientField coeff = CoefficientField::identity();
            if (!config_path.empty()) coeff = make_coefficient(load_config(config_path).coefficient);
            std::function<double(Vec2)> f;
            if (data == "one")
                f = [](Vec2) { return 1.0; };
            else if (data == "x")
                f = [](Vec2 p) { return p.x; };
            else if (data == "y")
                f = [](Vec2 p) { return p.y; };
            else if (data == "cos")
                f = [](Vec2 p) {
                    double r = norm(p);
                    return r > 0.0 ? p.x / r : 0.0;
                };
            else
                throw Error(ErrorKind::InvalidArgument, "unknown data '" + data + "'");
            auto sys = assemble(m, coeff, solve_a);
            auto u = solve_robin(sys, nodal_data(*m, f));
            std::ostringstream os;
            write_solution_csv(os, *m, u);
            write_out(solve_out, os.str());
            std::cerr << "residual " << u.residual_norm << " backward_error " << u.backward_error << " iterations "
                      << u.iterations << '\n';
        } else if (measure->parsed()) {
            auto d = load_domain(measure_args.domain);
            auto m = measure_args.build(d, sigma_for(d, measure_args.sigma));
            auto sys = assemble(m, CoefficientField::identity(), measure_a);
            auto dens = harmonic_measure_density(sys, parse_point(pole_s));
            std::ostringstream os;
            write_density_csv(os, dens);
            write_out(measure_out, os.str());
            std::cerr << "total " << dens.total << " residual " << dens.residual_norm << '\n';
        } else if (scan->parsed()) {
            auto cfg = load_config(scan_config);
            if (!scan_out.empty()) cfg.output_dir = scan_out;
            auto rep = run(cfg);
            std::cout << report_json(rep) << '\n';
            return rep.status == "ok" ? 0 : 3;
        } else if (walk_cmd->parsed()) {
            auto d = load_domain(walk_args.domain);
            auto m = walk_args.build(d, sigma_for(d, walk_args.sigma));
            auto sys = assemble(m, CoefficientField::identity(), walk_a);
            auto chain = build_chain(sys);
            Box b = d.bounding_box();
            Vec2 start = start_s.empty() ? Vec2{0.5 * (b.lo.x + b.hi.x), 0.5 * (b.lo.y + b.hi.y)} : parse_point(start_s);
            auto v = interior_vertex(*m, start);
            auto hist = absorption_histogram(chain, v, n_walks, seed);
            std::ostringstream os;
            write_histogram_csv(os, *m, hist);
            write_out(walk_out, os.str());
            std::cerr << "start vertex " << v << " mean steps " << hist.mean_steps << '\n';
        } else if (report->parsed()) {
            for (const auto& p : regenerate_figures(report_dir)) std::cout << p << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::ConfigInvalid || e.kind() == ErrorKind::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
