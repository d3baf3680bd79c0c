#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robinlab/experiment.hpp"

namespace py = pybind11;
using namespace rml;

namespace {

using Point = std::array<double, 2>;
Vec2 vec(Point p) { return {p[0], p[1]}; }

py::array_t<double> points_array(const std::vector<Vec2>& pts) {
    py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
    auto m = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(pts.size()); ++i) {
        m(i, 0) = pts[static_cast<std::size_t>(i)].x;
        m(i, 1) = pts[static_cast<std::size_t>(i)].y;
    }
    return out;
}

template <class T>
py::array_t<T> vector_array(const std::vector<T>& v) {
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

std::vector<double> as_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw Error(ErrorKind::InvalidArgument, "expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

py::dict record_dict(const RatioRecord& r) {
    py::dict d;
    d["a"] = r.a;
    d["x0_id"] = r.x0_id;
    d["r"] = r.r;
    d["E_id"] = r.E_id;
    d["sigma_ratio"] = r.sigma_ratio;
    d["omega_ratio"] = r.omega_ratio;
    d["R"] = r.R;
    d["A_param"] = r.A_param;
    d["residual"] = r.residual;
    d["C_pole"] = r.C_pole;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Robin harmonic measure on rough planar domains";

    static py::exception<Error> error(m, "RobinlabError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<PolygonalDomain>(m, "Domain")
        .def_property_readonly("family", [](const PolygonalDomain& d) { return to_string(d.family()); })
        .def_property_readonly("generation", &PolygonalDomain::generation)
        .def_property_readonly("lattice_pitch", &PolygonalDomain::lattice_pitch)
        .def_property_readonly("base_scale", &PolygonalDomain::base_scale)
        .def_property_readonly("hole_count", &PolygonalDomain::hole_count)
        .def_property_readonly("edge_count", [](const PolygonalDomain& d) { return d.edges().size(); })
        .def_property_readonly("components",
                               [](const PolygonalDomain& d) {
                                   py::list out;
                                   for (const auto& c : d.components()) out.append(points_array(c));
                                   return out;
                               })
        .def("perimeter", &PolygonalDomain::perimeter)
        .def("area", &PolygonalDomain::area)
        .def("diameter", &PolygonalDomain::diameter)
        .def("fractal_diameter", &PolygonalDomain::fractal_diameter)
        .def("contains", [](const PolygonalDomain& d, Point p) { return d.contains(vec(p)); })
        .def("sample_centers", [](const PolygonalDomain& d, int n) {
            std::vector<Vec2> pts;
            for (auto bp : sample_centers(d, n)) pts.push_back(d.point_at(bp));
            return points_array(pts);
        });

    m.def("gen_cantor", &gen_cantor_complement, py::arg("generation"), py::arg("outer_radius") = 2.0,
          py::arg("base_scale") = 1.0);
    m.def("gen_koch", &gen_koch_snowflake, py::arg("generation"), py::arg("base_scale") = 1.0);
    m.def(
        "gen_reference", [](const std::string& family, int n) { return gen_reference(family_from_string(family), n); },
        py::arg("family"), py::arg("n_edges") = 0);

    py::class_<BoundaryMeasure>(m, "BoundaryMeasure")
        .def_readonly("total_mass", &BoundaryMeasure::total_mass)
        .def_readonly("dimension_d", &BoundaryMeasure::dimension_d)
        .def_property_readonly("rule", [](const BoundaryMeasure& s) { return to_string(s.rule); })
        .def_property_readonly("density", [](const BoundaryMeasure& s) { return vector_array(s.density); });
    m.def(
        "attach_sigma",
        [](const PolygonalDomain& d, std::optional<std::string> rule) {
            return attach_sigma(d, rule ? sigma_rule_from_string(*rule) : default_sigma_rule(d.family()));
        },
        py::arg("domain"), py::arg("rule") = py::none());
    m.def(
        "sigma_ball_mass",
        [](const PolygonalDomain& d, const BoundaryMeasure& s, Point c, double r) {
            return sigma_ball_mass(d, s, vec(c), r);
        },
        py::arg("domain"), py::arg("sigma"), py::arg("center"), py::arg("r"));
    m.def(
        "check_regularity",
        [](const PolygonalDomain& d, const BoundaryMeasure& s, int centers, int scales) {
            auto a = check_ahlfors(d, s, centers, scales);
            auto c = check_corkscrew(d, centers, scales);
            py::dict out;
            out["estimated_d"] = a.estimated_d;
            out["lower_const"] = a.lower_const;
            out["upper_const"] = a.upper_const;
            out["doubling_const"] = a.doubling_const;
            out["corkscrew_M"] = c.corkscrew_M ? py::object(py::float_(*c.corkscrew_M)) : py::object(py::none());
            return out;
        },
        py::arg("domain"), py::arg("sigma"), py::arg("centers") = 8, py::arg("scales") = 8);

    py::class_<Mesh, std::shared_ptr<Mesh>>(m, "Mesh")
        .def_property_readonly("vertices", [](const Mesh& me) { return points_array(me.vertices); })
        .def_property_readonly("triangles",
                               [](const Mesh& me) {
                                   py::array_t<std::uint32_t> out(
                                       {static_cast<py::ssize_t>(me.triangles.size()), py::ssize_t{3}});
                                   auto a = out.mutable_unchecked<2>();
                                   for (std::size_t i = 0; i < me.triangles.size(); ++i)
                                       for (int k = 0; k < 3; ++k)
                                           a(static_cast<py::ssize_t>(i), k) = me.triangles[i][static_cast<std::size_t>(k)];
                                   return out;
                               })
        .def_property_readonly("boundary_vertices", [](const Mesh& me) { return vector_array(me.boundary_vertices); })
        .def_property_readonly("sigma_weights", [](const Mesh& me) { return vector_array(me.sigma_weights); })
        .def_readonly("h", &Mesh::h)
        .def_property_readonly("vertex_count", &Mesh::vertex_count)
        .def("total_sigma", &Mesh::total_sigma)
        .def("area", &Mesh::area)
        .def("max_angle_degrees", &Mesh::max_angle_degrees);

    m.def(
        "triangulate",
        [](const PolygonalDomain& d, const BoundaryMeasure& s, double h, std::vector<Point> focus, double focus_h,
           std::vector<std::array<double, 3>> carve) {
            MeshOptions opt;
            for (auto p : focus) opt.focus_points.push_back(vec(p));
            opt.focus_h = focus_h;
            for (auto c : carve) opt.carve.push_back({{c[0], c[1]}, c[2]});
            return std::make_shared<Mesh>(triangulate(d, s, h, opt));
        },
        py::arg("domain"), py::arg("sigma"), py::arg("target_h"), py::arg("focus_points") = std::vector<Point>{},
        py::arg("focus_h") = 0.0, py::arg("carve") = std::vector<std::array<double, 3>>{});
    m.def(
        "refine", [](const Mesh& me) { return std::make_shared<Mesh>(refine(me)); }, py::arg("mesh"));

    py::class_<CoefficientField>(m, "Coefficient")
        .def_static("identity", &CoefficientField::identity)
        .def_static("constant", [](double a11, double a12, double a21,
                                   double a22) { return CoefficientField::constant({a11, a12, a21, a22}); })
        .def_static("checkerboard",
                    [](double scale, std::array<double, 4> m1, std::array<double, 4> m2) {
                        return CoefficientField::checkerboard(scale, {m1[0], m1[1], m1[2], m1[3]},
                                                              {m2[0], m2[1], m2[2], m2[3]});
                    })
        .def_static("radial_oscillatory", &CoefficientField::radial_oscillatory)
        .def_property_readonly("kind", [](const CoefficientField& c) { return to_string(c.kind()); })
        .def_property_readonly("symmetric", &CoefficientField::symmetric)
        .def_property_readonly("ellipticity", [](const CoefficientField& c) {
            return std::pair{c.lambda(), c.Lambda()};
        });

    py::class_<RobinSystem>(m, "RobinSystem")
        .def_readonly("a", &RobinSystem::a)
        .def_readonly("symmetric", &RobinSystem::symmetric)
        .def_property_readonly("mesh", [](const RobinSystem& s) { return std::const_pointer_cast<Mesh>(s.mesh); });
    m.def(
        "assemble",
        [](std::shared_ptr<Mesh> me, const CoefficientField& c, double a) {
            return assemble(std::shared_ptr<const Mesh>(me), c, a);
        },
        py::arg("mesh"), py::arg("coeff"), py::arg("a"));
    m.def(
        "solve_robin",
        [](const RobinSystem& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& f) {
            auto sol = solve_robin(s, as_vector(f));
            return py::make_tuple(vector_array(sol.values), sol.residual_norm);
        },
        py::arg("system"), py::arg("f"), "Returns (values, relative residual).");
    m.def(
        "evaluate",
        [](const Mesh& me, const py::array_t<double, py::array::c_style | py::array::forcecast>& u, Point x) {
            return evaluate(me, as_vector(u), vec(x));
        },
        py::arg("mesh"), py::arg("values"), py::arg("point"));

    py::class_<MeasureDensity>(m, "MeasureDensity")
        .def_property_readonly("w", [](const MeasureDensity& d) { return vector_array(d.w); })
        .def_readonly("total", &MeasureDensity::total)
        .def_readonly("residual_norm", &MeasureDensity::residual_norm)
        .def_readonly("a", &MeasureDensity::a);
    m.def(
        "harmonic_measure_density",
        [](const RobinSystem& s, Point x) { return harmonic_measure_density(s, vec(x)); }, py::arg("system"),
        py::arg("pole"));
    m.def(
        "omega_ball", [](const MeasureDensity& d, Point c, double r) { return omega(d, vec(c), r); },
        py::arg("density"), py::arg("center"), py::arg("r"));

    m.def(
        "ratio_scan",
        [](const PolygonalDomain& d, std::shared_ptr<Mesh> me, const CoefficientField& c, std::vector<double> a_grid,
           std::vector<double> radii, std::vector<Point> centers, std::vector<double> c_poles) {
            ScanSetup setup;
            setup.a_grid = std::move(a_grid);
            setup.radii = std::move(radii);
            for (auto p : centers) setup.centers.push_back(vec(p));
            setup.c_poles = std::move(c_poles);
            auto rep = ratio_scan(d, me, c, setup);
            py::list out;
            for (const auto& r : rep.records) out.append(record_dict(r));
            return out;
        },
        py::arg("domain"), py::arg("mesh"), py::arg("coeff"), py::arg("a_grid"), py::arg("radii"),
        py::arg("centers"), py::arg("c_poles") = std::vector<double>{4.0, 10.0});

    m.def(
        "disk_oracle",
        [](std::vector<double> hs, int n_edges) {
            py::list out;
            for (const auto& r : disk_oracle(hs, n_edges)) {
                py::dict d;
                d["n_edges"] = r.n_edges;
                d["h"] = r.h;
                d["vertices"] = r.vertices;
                d["l2_error"] = r.l2_error;
                d["ratio"] = r.ratio;
                out.append(d);
            }
            return out;
        },
        py::arg("h_list"), py::arg("n_edges") = 0);

    py::class_<WalkChain>(m, "WalkChain")
        .def_property_readonly("q", [](const WalkChain& c) { return vector_array(c.q); })
        .def_readonly("a", &WalkChain::a);
    m.def("build_chain", &build_chain, py::arg("system"));
    m.def(
        "interior_vertex", [](const Mesh& me, Point x) { return interior_vertex(me, vec(x)); }, py::arg("mesh"),
        py::arg("point"));
    m.def(
        "estimate_omega_mc",
        [](const WalkChain& chain, std::uint32_t start, Point c, double r, std::size_t n, std::uint64_t seed) {
            auto est = estimate_omega_mc(chain, start, ball_edges(*chain.mesh, vec(c), r), n, seed);
            return py::make_tuple(est.estimate, est.stderr_);
        },
        py::arg("chain"), py::arg("start"), py::arg("center"), py::arg("r"), py::arg("n_walks"), py::arg("seed"),
        "Returns (estimate, stderr) for omega of the boundary ball B(center, r).");

    m.def(
        "canonical_config", [](const std::string& text) { return to_json_string(parse_config(text)); },
        py::arg("json_text"));
    m.def(
        "run_experiment",
        [](const std::string& text) {
            ExperimentReport rep;
            {
                py::gil_scoped_release release;
                rep = run(parse_config(text));
            }
            return report_json(rep);
        },
        py::arg("json_text"), "Runs an experiment config; returns the report as JSON text.");
}
