#include "robinlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "robinlab/svg.hpp"

namespace rml {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::pair<Experiment, const char*> kExperimentNames[] = {
    {Experiment::Oracle, "oracle"},
    {Experiment::RatioScan, "ratio_scan"},
    {Experiment::HarnackScan, "harnack_scan"},
    {Experiment::DensityScan, "density_scan"},
    {Experiment::ActiveBoundary, "active_boundary"},
    {Experiment::DirichletCompare, "dirichlet_compare"},
    {Experiment::MonteCarloCheck, "monte_carlo_check"},
    {Experiment::Regularity, "regularity"},
};

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) invalid(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) invalid("unknown key '" + key + "' in " + where);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) invalid(where + " must be a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) invalid(where + " must be an integer");
    return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) invalid(where + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

template <std::size_t N>
std::array<double, N> fixed(const json& j, const std::string& where) {
    auto v = numbers(j, where);
    if (v.size() != N) invalid(where + " must have " + std::to_string(N) + " entries");
    std::array<double, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) invalid(where + " must be a string");
    return j.get<std::string>();
}

template <class F>
auto named(F&& f, const std::string& where) {
    try {
        return f();
    } catch (const Error& e) {
        invalid(where + ": " + e.what());
    }
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.experiment);
    j["domain"] = {{"family", to_string(c.domain.family)},
                   {"generation", c.domain.generation},
                   {"base_scale", c.domain.base_scale},
                   {"outer_radius", c.domain.outer_radius},
                   {"edges", c.domain.edges}};
    if (c.sigma) j["sigma"] = to_string(*c.sigma);
    j["coefficient"] = {{"kind", to_string(c.coefficient.kind)},
                        {"matrix", c.coefficient.matrix},
                        {"matrix2", c.coefficient.matrix2},
                        {"scale", c.coefficient.scale},
                        {"amplitude", c.coefficient.amplitude},
                        {"frequency", c.coefficient.frequency}};
    j["a_grid"] = c.a_grid;
    j["mesh"] = {{"target_h", c.target_h}, {"refinements", c.refinements}};
    json scan = {{"centers", c.centers}, {"radii", c.radii},     {"scales", c.scales},
                 {"c_pole", c.c_pole},   {"r", c.r},             {"A_param", c.A_param},
                 {"group_edges", c.group_edges}};
    if (c.x0) scan["x0"] = {c.x0->x, c.x0->y};
    if (c.pole) scan["pole"] = {c.pole->x, c.pole->y};
    if (c.ball) scan["ball"] = *c.ball;
    j["scan"] = scan;
    j["walk"] = {{"seed", c.seed}, {"n_walks", c.n_walks}, {"repetitions", c.repetitions}};
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig from_json(const json& j) {
    check_keys(j, {"experiment", "domain", "sigma", "coefficient", "a_grid", "mesh", "scan", "walk", "output_dir"},
               "config");
    ExperimentConfig c;
    if (!j.contains("experiment")) invalid("config needs an 'experiment'");
    c.experiment = named([&] { return experiment_from_string(text(j["experiment"], "experiment")); }, "experiment");
    if (j.contains("domain")) {
        const json& d = j["domain"];
        check_keys(d, {"family", "generation", "base_scale", "outer_radius", "edges"}, "domain");
        if (d.contains("family"))
            c.domain.family = named([&] { return family_from_string(text(d["family"], "domain.family")); }, "domain");
        if (d.contains("generation")) c.domain.generation = integer(d["generation"], "domain.generation");
        if (d.contains("base_scale")) c.domain.base_scale = number(d["base_scale"], "domain.base_scale");
        if (d.contains("outer_radius")) c.domain.outer_radius = number(d["outer_radius"], "domain.outer_radius");
        if (d.contains("edges")) c.domain.edges = integer(d["edges"], "domain.edges");
    }
    if (j.contains("sigma"))
        c.sigma = named([&] { return sigma_rule_from_string(text(j["sigma"], "sigma")); }, "sigma");
    if (j.contains("coefficient")) {
        const json& k = j["coefficient"];
        check_keys(k, {"kind", "matrix", "matrix2", "scale", "amplitude", "frequency"}, "coefficient");
        if (k.contains("kind"))
            c.coefficient.kind =
                named([&] { return coeff_kind_from_string(text(k["kind"], "coefficient.kind")); }, "coefficient");
        if (k.contains("matrix")) c.coefficient.matrix = fixed<4>(k["matrix"], "coefficient.matrix");
        if (k.contains("matrix2")) c.coefficient.matrix2 = fixed<4>(k["matrix2"], "coefficient.matrix2");
        if (k.contains("scale")) c.coefficient.scale = number(k["scale"], "coefficient.scale");
        if (k.contains("amplitude")) c.coefficient.amplitude = number(k["amplitude"], "coefficient.amplitude");
        if (k.contains("frequency")) c.coefficient.frequency = number(k["frequency"], "coefficient.frequency");
    }
    if (j.contains("a_grid")) c.a_grid = numbers(j["a_grid"], "a_grid");
    if (j.contains("mesh")) {
        const json& m = j["mesh"];
        check_keys(m, {"target_h", "refinements"}, "mesh");
        if (m.contains("target_h")) c.target_h = number(m["target_h"], "mesh.target_h");
        if (m.contains("refinements")) c.refinements = integer(m["refinements"], "mesh.refinements");
    }
    if (j.contains("scan")) {
        const json& s = j["scan"];
        check_keys(s, {"centers", "radii", "scales", "c_pole", "x0", "r", "A_param", "pole", "ball", "group_edges"},
                   "scan");
        if (s.contains("centers")) c.centers = integer(s["centers"], "scan.centers");
        if (s.contains("radii")) c.radii = numbers(s["radii"], "scan.radii");
        if (s.contains("scales")) c.scales = integer(s["scales"], "scan.scales");
        if (s.contains("c_pole")) c.c_pole = numbers(s["c_pole"], "scan.c_pole");
        if (s.contains("x0")) {
            auto p = fixed<2>(s["x0"], "scan.x0");
            c.x0 = Vec2{p[0], p[1]};
        }
        if (s.contains("r")) c.r = number(s["r"], "scan.r");
        if (s.contains("A_param")) c.A_param = number(s["A_param"], "scan.A_param");
        if (s.contains("pole")) {
            auto p = fixed<2>(s["pole"], "scan.pole");
            c.pole = Vec2{p[0], p[1]};
        }
        if (s.contains("ball")) c.ball = fixed<3>(s["ball"], "scan.ball");
        if (s.contains("group_edges")) c.group_edges = integer(s["group_edges"], "scan.group_edges");
    }
    if (j.contains("walk")) {
        const json& w = j["walk"];
        check_keys(w, {"seed", "n_walks", "repetitions"}, "walk");
        if (w.contains("seed")) {
            if (!w["seed"].is_number_unsigned()) invalid("walk.seed must be a nonnegative integer");
            c.seed = w["seed"].get<std::uint64_t>();
        }
        if (w.contains("n_walks")) {
            if (!w["n_walks"].is_number_unsigned()) invalid("walk.n_walks must be a positive integer");
            c.n_walks = w["n_walks"].get<std::uint64_t>();
        }
        if (w.contains("repetitions")) c.repetitions = integer(w["repetitions"], "walk.repetitions");
    }
    if (j.contains("output_dir")) c.output_dir = text(j["output_dir"], "output_dir");
    validate(c);
    return c;
}

// ---- CSV tables -------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw Error(ErrorKind::Io, "CSV has no column '" + name + "'");
    }
    std::vector<double> column(const std::string& name) const {
        const int k = index(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(std::stod(r.at(static_cast<std::size_t>(k))));
        return out;
    }
    std::vector<std::string> strings(const std::string& name) const {
        const int k = index(name);
        std::vector<std::string> out;
        for (const auto& r : rows) out.push_back(r.at(static_cast<std::size_t>(k)));
        return out;
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    return out;
}

Table read_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, path.string() + " is empty");
    t.header = split(line);
    while (std::getline(in, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

std::string fmt(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

// ---- figures ----------------------------------------------------------------

std::string ratio_figure(const Table& t) {
    auto a = t.column("a"), A = t.column("A_param"), R = t.column("R"), C = t.column("C_pole");
    const double c0 = C.empty() ? 0.0 : C.front();
    std::map<double, PlotSeries> by_a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (C[i] != c0) continue;
        auto& s = by_a[a[i]];
        s.name = "a = " + fmt(a[i]);
        s.x.push_back(A[i]);
        s.y.push_back(R[i]);
    }
    std::vector<PlotSeries> series;
    for (auto& [_, s] : by_a) series.push_back(std::move(s));
    PlotSpec spec{"R = (omega(E)/omega(Delta)) / (sigma(E)/sigma(Delta)), C_pole = " + fmt(c0), "A_param",
                  "R", true, true};
    return render_svg(spec, series);
}

std::string oracle_figure(const Table& t) {
    PlotSeries err{"L2 error", t.column("h"), t.column("l2_error"), true, ""};
    PlotSeries ref{"h^2 reference", err.x, {}, true, "#999999"};
    for (double h : err.x) ref.y.push_back(err.y.front() * (h / err.x.front()) * (h / err.x.front()));
    return render_svg({"Disk oracle", "h", "L2 error", true, true}, {err, ref});
}

std::string harnack_figure(const Table& t) {
    PlotSeries s{"inf/sup", t.column("a"), t.column("ratio"), true, ""};
    return render_svg({"Harnack ratio at matched A_param", "a", "inf/sup on B(x0, r)", true, false}, {s});
}

std::string density_figure(const Table& t) {
    auto as = t.column("a_sigma");
    PlotSeries s{"m(a)", {}, t.column("m"), true, ""};
    for (double v : as) s.x.push_back(1.0 / v);
    return render_svg({"Density lower bound", "1 / (a sigma(B))", "min u on B(x0, r)", false, true}, {s});
}

std::string active_figure(const Table& t) {
    PlotSeries s{"min over boundary", t.column("a"), t.column("delta"), true, ""};
    return render_svg({"Active boundary", "a", "delta", true, true}, {s});
}

std::string lorenz_figure(const Table& t) {
    auto a = t.column("a");
    auto which = t.strings("measure");
    auto sx = t.column("sigma_fraction"), my = t.column("measure_fraction");
    std::map<std::pair<double, std::string>, PlotSeries> curves;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& s = curves[{a[i], which[i]}];
        s.name = which[i] + ", a = " + fmt(a[i]);
        s.line = true;
        s.x.push_back(sx[i]);
        s.y.push_back(my[i]);
    }
    std::vector<PlotSeries> series{{"uniform", {0.0, 1.0}, {0.0, 1.0}, true, "#999999"}};
    for (auto& [_, s] : curves) series.push_back(std::move(s));
    return render_svg({"Concentration curves", "fraction of sigma", "fraction of measure", false, false}, series);
}

const std::pair<const char*, std::pair<const char*, std::string (*)(const Table&)>> kFigures[] = {
    {"scan.csv", {"ratio.svg", ratio_figure}},
    {"oracle.csv", {"oracle.svg", oracle_figure}},
    {"harnack.csv", {"harnack.svg", harnack_figure}},
    {"density_scan.csv", {"density_scan.svg", density_figure}},
    {"active.csv", {"active.svg", active_figure}},
    {"lorenz.csv", {"lorenz.svg", lorenz_figure}},
};

// ---- running ----------------------------------------------------------------

struct Context {
    const ExperimentConfig& cfg;
    PolygonalDomain domain;
    BoundaryMeasure sigma;
    CoefficientField coeff;
    fs::path work;   // partial directory
    fs::path final;  // output directory
    ExperimentReport& rep;

    std::shared_ptr<const Mesh> mesh(double h, const MeshOptions& opt = {}) const {
        Mesh m = cached_triangulate(domain, sigma, h, opt);
        for (int k = 0; k < cfg.refinements; ++k) m = refine(m, opt.max_vertices);
        return std::make_shared<const Mesh>(std::move(m));
    }

    void note_solve(double residual) {
        ++rep.solves;
        rep.max_residual = std::max(rep.max_residual, residual);
    }

    void emit_csv(const std::string& name, const std::string& content) {
        write_file_atomic(work / name, content);
        rep.csv.push_back((final / name).string());
        for (const auto& [csv, fig] : kFigures)
            if (name == csv) {
                write_file_atomic(work / fig.first, fig.second(read_table(work / name)));
                rep.svg.push_back((final / fig.first).string());
            }
    }

    std::vector<Vec2> centers() const {
        std::vector<Vec2> out;
        for (auto bp : sample_centers(domain, cfg.centers)) out.push_back(domain.point_at(bp));
        return out;
    }

    Vec2 x0() const { return cfg.x0 ? *cfg.x0 : centers().front(); }

    Box fractal_box() const {
        const double inf = std::numeric_limits<double>::infinity();
        Box b{{inf, inf}, {-inf, -inf}};
        for (int c : domain.fractal_components())
            for (Vec2 p : domain.components()[static_cast<std::size_t>(c)]) {
                b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
                b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
            }
        return b;
    }
};

void run_oracle(Context& ctx) {
    if (ctx.domain.family() != Family::DiskPolygon) invalid("the oracle experiment runs on the disk family");
    std::vector<double> hs;
    for (int k = 0; k <= std::max(ctx.cfg.refinements, 2); ++k) hs.push_back(std::ldexp(ctx.cfg.target_h, -k));
    auto rows = disk_oracle(hs, ctx.cfg.domain.edges);
    std::ostringstream csv;
    csv << "n_edges,h,vertices,l2_error,ratio,residual\n";
    bool ratios_ok = true;
    for (const auto& r : rows) {
        csv << r.n_edges << ',' << fmt(r.h) << ',' << r.vertices << ',' << fmt(r.l2_error) << ',' << fmt(r.ratio)
            << ',' << fmt(r.residual) << '\n';
        ctx.note_solve(r.residual);
        if (r.ratio != 0.0 && (r.ratio < 3.5 || r.ratio > 4.5)) ratios_ok = false;
    }
    ctx.emit_csv("oracle.csv", csv.str());
    ctx.rep.metrics["final_l2_error"] = rows.back().l2_error;
    ctx.rep.metrics["final_ratio"] = rows.back().ratio;
    ctx.rep.checks["error_ratio_in_3.5_4.5"] = ratios_ok;
}

void run_ratio_scan(Context& ctx) {
    const auto& cfg = ctx.cfg;
    ScanSetup setup;
    setup.a_grid = cfg.a_grid;
    setup.centers = ctx.centers();
    setup.c_poles = cfg.c_pole;
    setup.radii = cfg.radii;
    if (setup.radii.empty()) {
        const double r_max = ctx.domain.fractal_diameter() / 10.0;
        for (int k = 0; k < cfg.scales; ++k) setup.radii.push_back(std::ldexp(r_max, -k));
    }
    const double r_min = *std::min_element(setup.radii.begin(), setup.radii.end());
    auto plan = scan_mesh_plan(ctx.domain, setup.centers, r_min, cfg.target_h);
    auto mesh = ctx.mesh(plan.target_h, plan.options);
    ScanReport scan = ratio_scan(ctx.domain, mesh, ctx.coeff, setup);
    for (const auto& f : scan.failures) ctx.rep.errors.push_back(f);
    if (scan.records.empty()) throw Error(ErrorKind::InsufficientData, "every scan record failed");
    std::ostringstream csv;
    write_scan_csv(csv, scan.records);
    ctx.emit_csv("scan.csv", csv.str());

    bool sandwich = true;
    std::set<std::tuple<double, int, double, double>> solves;
    for (const auto& r : scan.records) {
        const double k = r.w_max / r.w_min;
        if (!(r.R >= (1.0 - 1e-9) / k && r.R <= (1.0 + 1e-9) * k)) sandwich = false;
        if (solves.insert({r.a, r.x0_id, r.r, r.C_pole}).second) ctx.note_solve(r.residual);
    }
    const auto& s = scan.summary;
    auto& m = ctx.rep.metrics;
    m["records"] = static_cast<double>(scan.records.size());
    m["mesh_vertices"] = static_cast<double>(mesh->vertex_count());
    m["max_abs_log_R_small"] = s.max_abs_log_R_small;
    m["small_count"] = static_cast<double>(s.small_count);
    m["large_count"] = static_cast<double>(s.large_count);
    ctx.rep.checks["sandwich"] = sandwich;
    if (s.small_trend.n >= 2) {
        m["small_trend_slope"] = s.small_trend.slope;
        ctx.rep.checks["small_scale_trend_within_0.05"] = std::abs(s.small_trend.slope) <= 0.05;
    }
    if (s.gamma) {
        m["gamma"] = s.gamma->slope;
        m["gamma_band_lo"] = s.gamma->band_lo;
        m["gamma_band_hi"] = s.gamma->band_hi;
        m["gamma_rel_residual"] = s.gamma->rel_residual;
        ctx.rep.checks["gamma_fit_residual_within_0.25"] =
            std::isfinite(s.gamma->slope) && s.gamma->rel_residual <= 0.25;
    }
    if (cfg.c_pole.size() >= 2) {
        const double f = pole_robustness(scan.records, cfg.c_pole[0], cfg.c_pole[1]);
        m["pole_robustness"] = f;
        ctx.rep.checks["pole_robustness_within_3"] = f <= 3.0;
    }
}

void run_harnack(Context& ctx) {
    const auto& cfg = ctx.cfg;
    auto recs = harnack_scan(ctx.domain, ctx.sigma, ctx.coeff, cfg.a_grid, ctx.x0(), cfg.A_param, cfg.c_pole.front(),
                             cfg.target_h);
    std::ostringstream csv;
    csv << "a,r,A_param,ratio,residual\n";
    double lo = 1.0, mean = 0.0;
    for (const auto& r : recs) {
        csv << fmt(r.a) << ',' << fmt(r.r) << ',' << fmt(r.A_param) << ',' << fmt(r.ratio) << ',' << fmt(r.residual)
            << '\n';
        ctx.note_solve(r.residual);
        lo = std::min(lo, r.ratio);
        mean += r.ratio / static_cast<double>(recs.size());
    }
    double spread = 0.0;
    for (const auto& r : recs) spread = std::max(spread, std::abs(r.ratio / mean - 1.0));
    ctx.emit_csv("harnack.csv", csv.str());
    ctx.rep.metrics["min_ratio"] = lo;
    ctx.rep.metrics["max_relative_spread"] = spread;
    ctx.rep.checks["ratio_at_least_0.01"] = lo >= 0.01;
    ctx.rep.checks["stable_within_30pct"] = spread <= 0.3;
}

void run_density(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const Vec2 x0 = ctx.x0();
    MeshOptions opt;
    if (ctx.domain.family() == Family::Square || ctx.domain.family() == Family::CantorComplement) {
        opt.focus_points = {x0};
        opt.focus_h = cfg.r / 16.0;
    }
    auto mesh = ctx.mesh(cfg.target_h, opt);
    auto scan = density_bound_scan(mesh, ctx.coeff, cfg.a_grid, x0, cfg.r, cfg.c_pole.front());
    std::ostringstream csv;
    csv << "a,a_sigma,m,residual\n";
    for (const auto& r : scan.rows) {
        csv << fmt(r.a) << ',' << fmt(r.a_sigma) << ',' << fmt(r.m) << ',' << fmt(r.residual) << '\n';
        ctx.note_solve(r.residual);
    }
    ctx.emit_csv("density_scan.csv", csv.str());
    ctx.rep.metrics["slope"] = scan.fit.slope;
    ctx.rep.metrics["intercept"] = scan.fit.intercept;
    ctx.rep.metrics["rel_residual"] = scan.fit.rel_residual;
    ctx.rep.checks["affine_negative_slope"] = scan.fit.slope < 0.0 && scan.fit.rel_residual <= 0.1;
}

void run_active(Context& ctx) {
    const auto& cfg = ctx.cfg;
    std::array<double, 3> ball{};
    if (cfg.ball) {
        ball = *cfg.ball;
    } else {
        Box b = ctx.fractal_box();
        ball = {0.5 * (b.lo.x + b.hi.x), 0.5 * (b.lo.y + b.hi.y), 0.25 * cfg.domain.base_scale};
    }
    MeshOptions opt;
    opt.carve = {{{ball[0], ball[1]}, ball[2]}};
    auto mesh = ctx.mesh(cfg.target_h, opt);
    std::vector<std::pair<double, double>> rows;
    for (double a : cfg.a_grid) {
        rows.emplace_back(a, active_boundary(assemble(mesh, ctx.coeff, a)));
        ++ctx.rep.solves;
    }
    std::sort(rows.begin(), rows.end());
    std::ostringstream csv;
    csv << "a,delta\n";
    bool positive = true, monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        csv << fmt(rows[i].first) << ',' << fmt(rows[i].second) << '\n';
        positive = positive && rows[i].second >= 1e-6;
        if (i > 0 && !(rows[i].second < rows[i - 1].second)) monotone = false;
    }
    ctx.emit_csv("active.csv", csv.str());
    ctx.rep.metrics["min_delta"] = rows.back().second;
    ctx.rep.checks["delta_at_least_1e-6"] = positive;
    ctx.rep.checks["delta_increases_as_a_decreases"] = monotone;
}

void run_dirichlet(Context& ctx) {
    const auto& cfg = ctx.cfg;
    Vec2 pole;
    if (cfg.pole) {
        pole = *cfg.pole;
    } else {
        Box b = ctx.fractal_box();
        pole = {0.5 * (b.lo.x + b.hi.x), 0.5 * (b.lo.y + b.hi.y)};
    }
    auto mesh = ctx.mesh(cfg.target_h);
    std::ostringstream csv;
    csv << "a,measure,sigma_fraction,measure_fraction\n" << std::setprecision(17);
    for (double a : cfg.a_grid) {
        auto dc = dirichlet_compare(ctx.domain, mesh, ctx.coeff, a, pole, cfg.group_edges);
        ctx.note_solve(dc.robin_residual);
        ctx.rep.solves += dc.groups;
        for (const auto& [name, lz] : {std::pair{"robin", &dc.robin}, std::pair{"dirichlet", &dc.dirichlet}})
            for (std::size_t i = 0; i < lz->sigma_fraction.size(); ++i)
                csv << a << ',' << name << ',' << lz->sigma_fraction[i] << ',' << lz->measure_fraction[i] << '\n';
        ctx.rep.metrics["s99_robin_a=" + fmt(a)] = dc.robin.s99;
        ctx.rep.metrics["s99_dirichlet"] = dc.dirichlet.s99;
        ctx.rep.metrics["groups"] = static_cast<double>(dc.groups);
    }
    ctx.emit_csv("lorenz.csv", csv.str());
}

void run_monte_carlo(Context& ctx) {
    const auto& cfg = ctx.cfg;
    auto mesh = ctx.mesh(cfg.target_h);
    Box b = ctx.domain.bounding_box();
    const Vec2 start_point = cfg.x0 ? *cfg.x0 : Vec2{0.5 * (b.lo.x + b.hi.x), 0.5 * (b.lo.y + b.hi.y)};
    const std::uint32_t start = interior_vertex(*mesh, start_point);
    const EdgeSet E = ball_edges(*mesh, ctx.centers().front(), cfg.r);
    std::ostringstream csv;
    csv << "a,rep,seed,estimate,stderr,exact,z,mean_steps\n";
    std::size_t inside = 0, total = 0;
    for (double a : cfg.a_grid) {
        auto sys = assemble(mesh, ctx.coeff, a);
        auto chain = build_chain(sys);
        auto dens = harmonic_measure_density(sys, mesh->vertices[start]);
        ctx.note_solve(dens.residual_norm);
        const double exact = omega(dens, E);
        for (int r = 0; r < cfg.repetitions; ++r) {
            const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
            auto est = estimate_omega_mc(chain, start, E, cfg.n_walks, seed);
            const double z = est.stderr_ > 0.0 ? (est.estimate - exact) / est.stderr_ : 0.0;
            inside += std::abs(est.estimate - exact) <= 4.0 * est.stderr_;
            ++total;
            csv << fmt(a) << ',' << r << ',' << seed << ',' << fmt(est.estimate) << ',' << fmt(est.stderr_) << ','
                << fmt(exact) << ',' << fmt(z) << ',' << fmt(est.mean_steps) << '\n';
        }
        if (a == cfg.a_grid.front()) {
            auto hist = absorption_histogram(chain, start, cfg.n_walks, cfg.seed);
            std::ostringstream h;
            write_histogram_csv(h, *mesh, hist);
            ctx.emit_csv("histogram.csv", h.str());
            ctx.rep.metrics["chi2_distance"] = chi2_distance(hist, dens);
        }
    }
    ctx.emit_csv("mc.csv", csv.str());
    const double coverage = static_cast<double>(inside) / static_cast<double>(total);
    ctx.rep.metrics["coverage_4se"] = coverage;
    ctx.rep.checks["coverage_at_least_0.95"] = coverage >= 0.95;
}

void run_regularity(Context& ctx) {
    const auto& cfg = ctx.cfg;
    auto ah = check_ahlfors(ctx.domain, ctx.sigma, cfg.centers, cfg.scales);
    std::ostringstream csv;
    csv << "quantity,value\n";
    auto put = [&](const std::string& k, double v) {
        csv << k << ',' << fmt(v) << '\n';
        ctx.rep.metrics[k] = v;
    };
    put("estimated_d", ah.estimated_d);
    put("dimension_d", ctx.sigma.dimension_d);
    put("lower_const", ah.lower_const);
    put("upper_const", ah.upper_const);
    put("doubling_const", ah.doubling_const);
    put("r_min", ah.r_min);
    put("r_max", ah.r_max);
    auto ck = check_corkscrew(ctx.domain, cfg.centers, cfg.scales);
    if (ck.corkscrew_M) put("corkscrew_M", *ck.corkscrew_M);
    ctx.emit_csv("regularity.csv", csv.str());
    ctx.rep.checks["estimated_d_within_0.1"] = std::abs(ah.estimated_d - ctx.sigma.dimension_d) <= 0.1;
}

json report_to_json(const ExperimentReport& r) {
    json checks = json::object(), metrics = json::object();
    for (const auto& [k, v] : r.checks) checks[k] = v;
    for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(nullptr);
    return {{"config", to_json(r.config)},
            {"config_hash", r.hash},
            {"status", r.status},
            {"complete", true},
            {"csv", r.csv},
            {"svg", r.svg},
            {"wall_seconds", r.wall_seconds},
            {"solves", r.solves},
            {"max_residual", r.max_residual},
            {"metrics", metrics},
            {"checks", checks},
            {"errors", r.errors}};
}

}  // namespace

std::string to_string(Experiment e) {
    for (const auto& [k, name] : kExperimentNames)
        if (k == e) return name;
    return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
    for (const auto& [k, n] : kExperimentNames)
        if (name == n) return k;
    throw Error(ErrorKind::InvalidArgument, "unknown experiment '" + name + "'");
}

SigmaRule default_sigma_rule(Family family) {
    switch (family) {
        case Family::CantorComplement: return SigmaRule::ComponentUniform;
        case Family::KochSnowflake: return SigmaRule::EdgeScaled;
        default: return SigmaRule::Arclength;
    }
}

void validate(const ExperimentConfig& c) {
    auto positive = [](double v, const std::string& what) {
        if (!(v > 0.0) || !std::isfinite(v)) invalid(what + " must be positive");
    };
    if (c.a_grid.empty()) invalid("a_grid must not be empty");
    for (double a : c.a_grid) positive(a, "a_grid entries");
    positive(c.target_h, "mesh.target_h");
    positive(c.domain.base_scale, "domain.base_scale");
    positive(c.domain.outer_radius, "domain.outer_radius");
    if (c.domain.generation < 0) invalid("domain.generation must be nonnegative");
    if (c.domain.edges < 0 || (c.domain.edges > 0 && c.domain.edges < 3)) invalid("domain.edges must be 0 or >= 3");
    if (c.refinements < 0) invalid("mesh.refinements must be nonnegative");
    if (c.centers < 1) invalid("scan.centers must be positive");
    if (c.scales < 1) invalid("scan.scales must be positive");
    for (double r : c.radii) positive(r, "scan.radii entries");
    if (c.c_pole.empty()) invalid("scan.c_pole must not be empty");
    for (double v : c.c_pole) positive(v, "scan.c_pole entries");
    positive(c.r, "scan.r");
    positive(c.A_param, "scan.A_param");
    if (c.ball) positive((*c.ball)[2], "scan.ball radius");
    if (c.group_edges < 1) invalid("scan.group_edges must be positive");
    if (c.n_walks < 1000) invalid("walk.n_walks must be at least 1000");
    if (c.repetitions < 1) invalid("walk.repetitions must be positive");
    if (c.output_dir.empty()) invalid("output_dir must not be empty");
    named([&] { return make_coefficient(c.coefficient); }, "coefficient");
    if (c.sigma && *c.sigma == SigmaRule::ComponentUniform && c.domain.family != Family::CantorComplement)
        invalid("sigma rule component_uniform needs the cantor family");
    if (c.sigma && *c.sigma == SigmaRule::EdgeScaled && c.domain.family != Family::KochSnowflake)
        invalid("sigma rule edge_scaled needs the koch family");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        invalid(std::string("malformed JSON: ") + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        invalid(e.what());
    }
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_json_string(const ExperimentConfig& config, int indent) { return to_json(config).dump(indent); }

std::string config_hash(const ExperimentConfig& config) {
    Hasher h;
    h.str(to_json(config).dump());
    return hex64(h.value());
}

PolygonalDomain make_domain(const DomainSpec& spec) {
    switch (spec.family) {
        case Family::CantorComplement:
            return gen_cantor_complement(spec.generation, spec.outer_radius * spec.base_scale, spec.base_scale);
        case Family::KochSnowflake: return gen_koch_snowflake(spec.generation, spec.base_scale);
        case Family::Square: {
            auto d = gen_reference(Family::Square);
            return spec.base_scale == 1.0 ? d : d.scaled(spec.base_scale);
        }
        case Family::DiskPolygon: {
            auto d = gen_reference(Family::DiskPolygon, spec.edges > 0 ? spec.edges : 256);
            return spec.base_scale == 1.0 ? d : d.scaled(spec.base_scale);
        }
    }
    throw Error(ErrorKind::InvalidArgument, "unknown family");
}

CoefficientField make_coefficient(const CoeffSpec& s) {
    auto mat = [](const std::array<double, 4>& m) { return Mat2{m[0], m[1], m[2], m[3]}; };
    switch (s.kind) {
        case CoeffKind::Identity: return CoefficientField::identity();
        case CoeffKind::ConstantMatrix: return CoefficientField::constant(mat(s.matrix));
        case CoeffKind::Checkerboard: return CoefficientField::checkerboard(s.scale, mat(s.matrix), mat(s.matrix2));
        case CoeffKind::RadialOscillatory: return CoefficientField::radial_oscillatory(s.amplitude, s.frequency);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown coefficient kind");
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string report_json(const ExperimentReport& report) { return report_to_json(report).dump(2); }

ExperimentReport read_report(const fs::path& dir) {
    std::ifstream in(dir / "report.json");
    if (!in) throw Error(ErrorKind::Io, "no report.json in " + dir.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, std::string("bad report.json: ") + e.what());
    }
    ExperimentReport r;
    r.config = from_json(j.at("config"));
    r.hash = j.at("config_hash").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.csv = j.at("csv").get<std::vector<std::string>>();
    r.svg = j.at("svg").get<std::vector<std::string>>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.solves = j.at("solves").get<std::size_t>();
    r.max_residual = j.at("max_residual").get<double>();
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.is_null() ? NAN : v.get<double>();
    for (const auto& [k, v] : j.at("checks").items()) r.checks[k] = v.get<bool>();
    r.errors = j.at("errors").get<std::vector<std::string>>();
    return r;
}

ExperimentReport run(const ExperimentConfig& config) {
    validate(config);
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path out = config.output_dir;
    if (fs::exists(out) && !fs::exists(out / "report.json"))
        invalid("output directory " + out.string() + " exists and is not a report directory");
    fs::path work = out;
    work += ".partial";
    fs::remove_all(work);
    fs::create_directories(work);

    ExperimentReport rep;
    rep.config = config;
    rep.hash = config_hash(config);
    try {
        Context ctx{config,
                    make_domain(config.domain),
                    {},
                    make_coefficient(config.coefficient),
                    work,
                    out,
                    rep};
        ctx.sigma = attach_sigma(ctx.domain, config.sigma ? *config.sigma : default_sigma_rule(config.domain.family));
        switch (config.experiment) {
            case Experiment::Oracle: run_oracle(ctx); break;
            case Experiment::RatioScan: run_ratio_scan(ctx); break;
            case Experiment::HarnackScan: run_harnack(ctx); break;
            case Experiment::DensityScan: run_density(ctx); break;
            case Experiment::ActiveBoundary: run_active(ctx); break;
            case Experiment::DirichletCompare: run_dirichlet(ctx); break;
            case Experiment::MonteCarloCheck: run_monte_carlo(ctx); break;
            case Experiment::Regularity: run_regularity(ctx); break;
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigInvalid) {
            fs::remove_all(work);
            throw;
        }
        rep.status = "error";
        rep.errors.push_back(std::string("[") + to_string(config.experiment) + "] " + e.what());
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomic(work / "config.json", to_json_string(config) + "\n");
    write_file_atomic(work / "report.json", report_json(rep) + "\n");
    fs::remove_all(out);
    fs::rename(work, out);
    return rep;
}

std::vector<std::string> regenerate_figures(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + " is not a directory");
    std::vector<std::string> written;
    for (const auto& [csv, fig] : kFigures) {
        if (!fs::exists(dir / csv)) continue;
        write_file_atomic(dir / fig.first, fig.second(read_table(dir / csv)));
        written.push_back((dir / fig.first).string());
    }
    return written;
}

}  // namespace rml
