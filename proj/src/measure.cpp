#include "robinlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

namespace rml {

MeasureDensity harmonic_measure_density(const RobinSystem& system, Vec2 X, const SolverSettings& settings) {
    AdjointSolve s = adjoint_solve(system, X, settings);
    const Mesh& mesh = *system.mesh;
    MeasureDensity d;
    d.mesh = system.mesh;
    d.pole = X;
    d.a = system.a;
    d.residual_norm = s.residual_norm;
    d.w.assign(mesh.vertices.size(), 0.0);
    for (auto v : mesh.boundary_vertices) {
        d.w[v] = s.z[v];
        d.total += s.z[v] * mesh.sigma_weights[v];
    }
    return d;
}

EdgeSet ball_edges(const Mesh& mesh, Vec2 center, double r) {
    EdgeSet out;
    for (std::uint32_t e = 0; e < mesh.boundary_edges.size(); ++e) {
        const auto& be = mesh.boundary_edges[e];
        if (be.parent < 0) continue;
        double f = clip_fraction(mesh.vertices[be.v0], mesh.vertices[be.v1], center, r);
        if (f > 0.0) out.push_back({e, f});
    }
    return out;
}

EdgeSet all_edges(const Mesh& mesh) {
    EdgeSet out;
    for (std::uint32_t e = 0; e < mesh.boundary_edges.size(); ++e)
        if (mesh.boundary_edges[e].parent >= 0) out.push_back({e, 1.0});
    return out;
}

double sigma_of(const Mesh& mesh, const EdgeSet& set) {
    double s = 0.0;
    for (const auto& we : set) s += we.weight * mesh.boundary_edges[we.edge].sigma_mass;
    return s;
}

double omega(const MeasureDensity& density, const EdgeSet& set) {
    const Mesh& mesh = *density.mesh;
    double s = 0.0;
    for (const auto& we : set) {
        const auto& be = mesh.boundary_edges[we.edge];
        s += we.weight * 0.5 * be.sigma_mass * (density.w[be.v0] + density.w[be.v1]);
    }
    return s;
}

double omega(const MeasureDensity& density, Vec2 center, double r) {
    return omega(density, ball_edges(*density.mesh, center, r));
}

std::vector<double> vertex_coverage(const Mesh& mesh, const EdgeSet& set) {
    std::vector<double> c(mesh.vertices.size(), 0.0);
    for (const auto& we : set) {
        const auto& be = mesh.boundary_edges[we.edge];
        c[be.v0] += 0.5 * we.weight * be.sigma_mass;
        c[be.v1] += 0.5 * we.weight * be.sigma_mass;
    }
    for (std::size_t v = 0; v < c.size(); ++v)
        if (c[v] > 0.0) c[v] = std::min(1.0, c[v] / mesh.sigma_weights[v]);
    return c;
}

std::vector<NamedSet> e_sets(const Mesh& mesh, Vec2 x0, double r) {
    std::vector<NamedSet> out;
    EdgeSet delta = ball_edges(mesh, x0, r);
    if (delta.empty()) return out;
    out.push_back({"ball", delta});
    EdgeSet sub = ball_edges(mesh, x0, r / 4.0);
    if (!sub.empty()) out.push_back({"sub4", sub});

    // Angles are measured from the inward normal of the edge nearest x0, where
    // the boundary does not pass, so the cut never splits a boundary arc.
    const MeshBoundaryEdge* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& we : delta) {
        const auto& be = mesh.boundary_edges[we.edge];
        double d = distance((mesh.vertices[be.v0] + mesh.vertices[be.v1]) * 0.5, x0);
        if (d < best) {
            best = d;
            nearest = &be;
        }
    }
    Vec2 t = mesh.vertices[nearest->v1] - mesh.vertices[nearest->v0];
    Vec2 n{-t.y, t.x};
    std::vector<std::pair<double, WeightedEdge>> order;
    for (const auto& we : delta) {
        const auto& be = mesh.boundary_edges[we.edge];
        Vec2 d = (mesh.vertices[be.v0] + mesh.vertices[be.v1]) * 0.5 - x0;
        order.push_back({std::atan2(cross(n, d), dot(n, d)), we});
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
    double total = 0.0;
    for (const auto& [ang, we] : order) total += we.weight * mesh.boundary_edges[we.edge].sigma_mass;

    const std::pair<int, const char*> splits[] = {{2, "half"}, {4, "quarter"}, {8, "eighth"}};
    for (auto [k, name] : splits) {
        std::vector<EdgeSet> groups(k);
        double cum = 0.0;
        for (const auto& [ang, we] : order) {
            double m = we.weight * mesh.boundary_edges[we.edge].sigma_mass;
            int g = std::min(k - 1, static_cast<int>(std::floor(k * (cum + 0.5 * m) / total)));
            groups[g].push_back(we);
            cum += m;
        }
        for (int g = 0; g < k; ++g)
            if (!groups[g].empty()) out.push_back({std::string(name) + std::to_string(g), std::move(groups[g])});
    }
    return out;
}

Vec2 far_pole(const PolygonalDomain& domain, Vec2 x0, double d) {
    Vec2 best_p;
    double best = -1.0;
    for (int i = 0; i <= 4; ++i) {
        double rho = d * (1.0 + 0.25 * i);
        for (int k = 0; k < 64; ++k) {
            double t = 2.0 * std::numbers::pi * k / 64.0;
            Vec2 p{x0.x + rho * std::cos(t), x0.y + rho * std::sin(t)};
            if (!domain.contains(p)) continue;
            double dist = domain.distance_to_boundary(p);
            if (dist > best) {
                best = dist;
                best_p = p;
            }
        }
    }
    if (best < 0.0) throw Error(ErrorKind::InvalidArgument, "no interior pole candidate at the requested distance");
    return best_p;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InsufficientData, "line fit needs two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientData, "line fit needs distinct abscissae");
    LineFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double e = y[i] - (f.intercept + f.slope * x[i]);
        ssr += e * e;
    }
    f.rms_residual = std::sqrt(ssr / n);
    f.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    double rise = std::abs(f.slope) * (*hi - *lo);
    f.rel_residual = rise > 0.0 ? f.rms_residual / rise : std::numeric_limits<double>::infinity();
    f.band_lo = f.slope - 2.0 * f.slope_stderr;
    f.band_hi = f.slope + 2.0 * f.slope_stderr;
    return f;
}

namespace {

using BallKey = std::tuple<double, int, double>;  // (a, center, r)

bool same_pole(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

ScanSummary summarize(const std::vector<RatioRecord>& records, double c_pole) {
    ScanSummary s;
    std::map<BallKey, std::pair<double, double>> max_log, max_R;
    for (const auto& rec : records) {
        if (!same_pole(rec.C_pole, c_pole)) continue;
        BallKey key{rec.a, rec.x0_id, rec.r};
        double l = std::abs(std::log(rec.R));
        auto& ml = max_log.try_emplace(key, rec.A_param, 0.0).first->second;
        ml.second = std::max(ml.second, l);
        auto& mr = max_R.try_emplace(key, rec.A_param, 0.0).first->second;
        mr.second = std::max(mr.second, rec.R);
        if (rec.A_param <= 1.0) {
            s.max_abs_log_R_small = std::max(s.max_abs_log_R_small, l);
            ++s.small_count;
        } else {
            ++s.large_count;
        }
    }
    std::vector<double> x, y;
    for (const auto& [key, v] : max_log)
        if (v.first <= 1.0) {
            x.push_back(std::log(v.first));
            y.push_back(v.second);
        }
    if (x.size() >= 2) s.small_trend = fit_line(x, y);
    try {
        s.gamma = fit_gamma(records, c_pole);
    } catch (const Error&) {
        s.gamma.reset();
    }
    return s;
}

LineFit fit_gamma(const std::vector<RatioRecord>& records, double c_pole) {
    std::map<BallKey, std::pair<double, double>> max_R;
    for (const auto& rec : records) {
        if (!same_pole(rec.C_pole, c_pole)) continue;
        if (!(rec.A_param > 1.0 && rec.A_param <= 1e3)) continue;
        auto& mr = max_R.try_emplace(BallKey{rec.a, rec.x0_id, rec.r}, rec.A_param, 0.0).first->second;
        mr.second = std::max(mr.second, rec.R);
    }
    if (max_R.size() < 8)
        throw Error(ErrorKind::InsufficientData,
                    "gamma fit needs 8 balls with A_param in (1, 1e3], have " + std::to_string(max_R.size()));
    std::vector<double> x, y;
    for (const auto& [key, v] : max_R) {
        x.push_back(std::log(v.first));
        y.push_back(std::log(v.second));
    }
    return fit_line(x, y);
}

double max_abs_log_R(const std::vector<RatioRecord>& records, double a, double c_pole, double lo, double hi) {
    double m = 0.0;
    for (const auto& rec : records)
        if (same_pole(rec.a, a) && same_pole(rec.C_pole, c_pole) && rec.A_param >= lo && rec.A_param <= hi)
            m = std::max(m, std::abs(std::log(rec.R)));
    return m;
}

double pole_robustness(const std::vector<RatioRecord>& records, double c1, double c2) {
    std::map<std::tuple<double, int, double, std::string>, double> first;
    for (const auto& rec : records)
        if (same_pole(rec.C_pole, c1) && rec.A_param <= 1.0) first[{rec.a, rec.x0_id, rec.r, rec.E_id}] = rec.R;
    double worst = 1.0;
    for (const auto& rec : records) {
        if (!same_pole(rec.C_pole, c2) || rec.A_param > 1.0) continue;
        auto it = first.find({rec.a, rec.x0_id, rec.r, rec.E_id});
        if (it == first.end()) continue;
        worst = std::max(worst, std::max(it->second / rec.R, rec.R / it->second));
    }
    return worst;
}

ScanMeshPlan scan_mesh_plan(const PolygonalDomain& domain, const std::vector<Vec2>& centers, double r_min,
                            double target_h, std::size_t max_vertices) {
    ScanMeshPlan plan;
    plan.options.max_vertices = max_vertices;
    if (domain.family() == Family::Square || domain.family() == Family::CantorComplement) {
        plan.target_h = target_h;
        plan.options.focus_points = centers;
        plan.options.focus_h = r_min / 8.0;
    } else {
        plan.target_h = std::min(target_h, r_min / 8.0);
    }
    return plan;
}

Mesh scan_mesh(const PolygonalDomain& domain, const BoundaryMeasure& sigma, const std::vector<Vec2>& centers,
               double r_min, double target_h, std::size_t max_vertices) {
    auto plan = scan_mesh_plan(domain, centers, r_min, target_h, max_vertices);
    return triangulate(domain, sigma, plan.target_h, plan.options);
}

ScanReport ratio_scan(const PolygonalDomain& domain, std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff,
                      const ScanSetup& setup) {
    if (setup.a_grid.empty() || setup.radii.empty() || setup.centers.empty() || setup.c_poles.empty())
        throw Error(ErrorKind::InvalidArgument, "ratio scan needs a values, radii, centers and pole multipliers");
    ScanReport rep;
    rep.domain = to_string(domain.family());
    rep.generation = domain.generation();
    rep.mesh_h = mesh->boundary_h();
    rep.a_grid = setup.a_grid;
    rep.c_poles = setup.c_poles;

    std::vector<std::vector<std::vector<NamedSet>>> sets(setup.centers.size());
    for (std::size_t i = 0; i < setup.centers.size(); ++i)
        for (double r : setup.radii) sets[i].push_back(e_sets(*mesh, setup.centers[i], r));
    // One pole per (center, r, C) at distance C r: balls of different sizes then
    // see their pole in the same relative position.
    std::vector<std::vector<std::vector<std::optional<Vec2>>>> poles(setup.centers.size());
    for (std::size_t i = 0; i < setup.centers.size(); ++i)
        for (double r : setup.radii) {
            auto& row = poles[i].emplace_back();
            for (double c : setup.c_poles) {
                try {
                    row.push_back(far_pole(domain, setup.centers[i], c * r));
                } catch (const Error& e) {
                    row.push_back(std::nullopt);
                    std::ostringstream msg;
                    msg << "center " << i << " r " << r << " C_pole " << c << ": " << e.what();
                    rep.failures.push_back(msg.str());
                }
            }
        }

    for (double a : setup.a_grid) {
        RobinSystem sys = assemble(mesh, coeff, a);
        for (std::size_t i = 0; i < setup.centers.size(); ++i)
            for (std::size_t k = 0; k < setup.radii.size(); ++k) {
                const auto& fam = sets[i][k];
                if (fam.empty()) continue;
                const EdgeSet& delta = fam.front().edges;
                const double s_delta = sigma_of(*mesh, delta);
                for (std::size_t c = 0; c < setup.c_poles.size(); ++c) {
                    if (!poles[i][k][c]) continue;
                    MeasureDensity dens;
                    try {
                        dens = harmonic_measure_density(sys, *poles[i][k][c], setup.solver);
                    } catch (const Error& e) {
                        std::ostringstream msg;
                        msg << "a " << a << " center " << i << " r " << setup.radii[k] << " C_pole " << setup.c_poles[c]
                            << ": " << e.what();
                        rep.failures.push_back(msg.str());
                        continue;
                    }
                    const double w_delta = omega(dens, delta);
                    double w_lo = std::numeric_limits<double>::infinity(), w_hi = -w_lo;
                    for (const auto& we : delta) {
                        const auto& be = mesh->boundary_edges[we.edge];
                        for (auto v : {be.v0, be.v1}) {
                            w_lo = std::min(w_lo, dens.w[v]);
                            w_hi = std::max(w_hi, dens.w[v]);
                        }
                    }
                    for (const auto& named : fam) {
                        double s_e = sigma_of(*mesh, named.edges);
                        if (!(s_e > 0.0)) continue;
                        RatioRecord rec;
                        rec.a = a;
                        rec.x0_id = static_cast<int>(i);
                        rec.x0 = setup.centers[i];
                        rec.r = setup.radii[k];
                        rec.E_id = named.id;
                        rec.sigma_ratio = s_e / s_delta;
                        rec.omega_ratio = omega(dens, named.edges) / w_delta;
                        rec.R = rec.omega_ratio / rec.sigma_ratio;
                        rec.A_param = a * s_delta;
                        rec.residual = dens.residual_norm;
                        rec.C_pole = setup.c_poles[c];
                        rec.w_min = w_lo;
                        rec.w_max = w_hi;
                        rep.records.push_back(std::move(rec));
                    }
                }
            }
    }
    std::stable_sort(rep.records.begin(), rep.records.end(), [](const RatioRecord& p, const RatioRecord& q) {
        return std::tie(p.a, p.x0_id, p.r, p.E_id, p.C_pole) < std::tie(q.a, q.x0_id, q.r, q.E_id, q.C_pole);
    });
    rep.summary = summarize(rep.records, setup.c_poles.front());
    return rep;
}

AUniformity a_uniformity(const PolygonalDomain& domain, const BoundaryMeasure& sigma, const CoefficientField& coeff,
                         double a, double factor, const std::vector<Vec2>& centers, const std::vector<double>& radii,
                         double c_pole, double target_h, const SolverSettings& settings) {
    if (!(a > 0.0) || !(factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "a and factor must be positive");
    AUniformity out;
    out.a = a;
    out.factor = factor;
    // Per center: base radii with A <= 1 and their matched radii at factor * a.
    std::vector<std::vector<double>> base_r(centers.size()), scaled_r(centers.size());
    double r_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (double r : radii) {
            double A = a * sigma_ball_mass(domain, sigma, centers[i], r);
            if (!(A > 0.0) || A > 1.0) continue;
            double r2 = radius_for_phase(domain, sigma, centers[i], a * factor, A);
            base_r[i].push_back(r);
            scaled_r[i].push_back(r2);
            r_min = std::min({r_min, r, r2});
        }
    if (!std::isfinite(r_min)) throw Error(ErrorKind::InsufficientData, "no ball has A_param <= 1");
    auto mesh = std::make_shared<const Mesh>(scan_mesh(domain, sigma, centers, r_min, target_h));
    auto run = [&](double aa, const std::vector<std::vector<double>>& rr, std::vector<RatioRecord>& dst) {
        for (std::size_t i = 0; i < centers.size(); ++i) {
            if (rr[i].empty()) continue;
            ScanSetup setup;
            setup.a_grid = {aa};
            setup.radii = rr[i];
            setup.centers = {centers[i]};
            setup.c_poles = {c_pole};
            setup.solver = settings;
            auto rep = ratio_scan(domain, mesh, coeff, setup);
            for (auto& rec : rep.records) {
                rec.x0_id = static_cast<int>(i);
                dst.push_back(std::move(rec));
            }
        }
    };
    run(a, base_r, out.base);
    run(a * factor, scaled_r, out.scaled);
    auto worst = [](const std::vector<RatioRecord>& recs) {
        double m = 0.0;
        for (const auto& r : recs)
            if (r.A_param <= 1.0 * (1.0 + 1e-9)) m = std::max(m, std::abs(std::log(r.R)));
        return m;
    };
    out.base_max = worst(out.base);
    out.scaled_max = worst(out.scaled);
    out.rel_change = out.base_max > 0.0 ? std::abs(out.scaled_max - out.base_max) / out.base_max : 0.0;
    return out;
}

double harnack_ratio(const Mesh& mesh, const std::vector<double>& values, Vec2 x0, double r, Vec2 pole,
                     double exclude) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        Vec2 p = mesh.vertices[v];
        if (distance(p, x0) >= r || distance(p, pole) < exclude) continue;
        lo = std::min(lo, values[v]);
        hi = std::max(hi, values[v]);
    }
    if (!(hi > 0.0)) return hi == lo ? 1.0 : 0.0;
    return std::max(0.0, lo) / hi;
}

double radius_for_phase(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0, double a,
                        double A_param) {
    double lo = 1e-12, hi = 2.0 * domain.diameter();
    if (a * sigma_ball_mass(domain, sigma, x0, hi) < A_param)
        throw Error(ErrorKind::InvalidArgument, "A_param exceeds a * sigma(boundary)");
    for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        if (a * sigma_ball_mass(domain, sigma, x0, mid) < A_param)
            lo = mid;
        else
            hi = mid;
        if (hi / lo < 1.0 + 1e-12) break;
    }
    return hi;
}

std::vector<HarnackRecord> harnack_scan(const PolygonalDomain& domain, const BoundaryMeasure& sigma,
                                        const CoefficientField& coeff, const std::vector<double>& a_grid, Vec2 x0,
                                        double A_param, double c_pole, double target_h, const SolverSettings& settings) {
    std::vector<HarnackRecord> out;
    for (double a : a_grid) {
        double r = radius_for_phase(domain, sigma, x0, a, A_param);
        Vec2 pole = far_pole(domain, x0, c_pole * r);
        MeshOptions opt;
        opt.focus_points = {x0, pole};
        opt.focus_h = r / 8.0;
        auto mesh = std::make_shared<const Mesh>(triangulate(domain, sigma, target_h, opt));
        RobinSystem sys = assemble(mesh, coeff, a);
        Solution g = green_column(sys, pole, settings);
        HarnackRecord rec;
        rec.a = a;
        rec.r = r;
        rec.A_param = a * sigma_of(*mesh, ball_edges(*mesh, x0, r));
        rec.ratio = harnack_ratio(*mesh, g.values, x0, r, pole, 4.0 * opt.focus_h);
        rec.residual = g.residual_norm;
        out.push_back(rec);
    }
    return out;
}

DensityScan density_bound_scan(std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff,
                               const std::vector<double>& a_grid, Vec2 x0, double r, double K,
                               const SolverSettings& settings) {
    DensityScan out;
    const double s_ball = sigma_of(*mesh, ball_edges(*mesh, x0, r));
    std::vector<double> f(mesh->vertices.size(), 0.0);
    for (auto v : mesh->boundary_vertices)
        if (distance(mesh->vertices[v], x0) < K * r) f[v] = 1.0;
    std::vector<double> x, y;
    for (double a : a_grid) {
        RobinSystem sys = assemble(mesh, coeff, a);
        Solution u = solve_robin(sys, f, {}, settings);
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < mesh->vertices.size(); ++v)
            if (distance(mesh->vertices[v], x0) < r) m = std::min(m, u.values[v]);
        out.rows.push_back({a, a * s_ball, m, u.residual_norm});
        if (m > 0.0) {
            x.push_back(1.0 / (a * s_ball));
            y.push_back(std::log(m));
        }
    }
    if (x.size() >= 2) out.fit = fit_line(x, y);
    return out;
}

double active_boundary(const RobinSystem& system, const SolverSettings& settings) {
    const Mesh& mesh = *system.mesh;
    if (mesh.constrained_vertices.empty())
        throw Error(ErrorKind::InvalidArgument, "active boundary needs a mesh with a carved ball");
    std::vector<double> f(mesh.vertices.size(), 0.0), one(mesh.vertices.size(), 1.0);
    Solution u = solve_robin(system, f, one, settings);
    double m = std::numeric_limits<double>::infinity();
    for (auto v : mesh.boundary_vertices) m = std::min(m, u.values[v]);
    return m;
}

Lorenz lorenz_curve(const std::vector<double>& sigma_mass, const std::vector<double>& measure_mass) {
    if (sigma_mass.size() != measure_mass.size() || sigma_mass.empty())
        throw Error(ErrorKind::InvalidArgument, "lorenz curve needs matching nonempty pieces");
    double s_tot = 0.0, m_tot = 0.0;
    for (std::size_t i = 0; i < sigma_mass.size(); ++i) {
        if (!(sigma_mass[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "pieces need positive sigma mass");
        s_tot += sigma_mass[i];
        m_tot += std::max(0.0, measure_mass[i]);
    }
    std::vector<std::size_t> idx(sigma_mass.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto dens = [&](std::size_t i) { return std::max(0.0, measure_mass[i]) / sigma_mass[i]; };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return dens(p) > dens(q); });
    Lorenz L;
    L.sigma_fraction.push_back(0.0);
    L.measure_fraction.push_back(0.0);
    double s = 0.0, m = 0.0;
    bool found = false;
    for (std::size_t i : idx) {
        double ds = sigma_mass[i] / s_tot, dm = std::max(0.0, measure_mass[i]) / m_tot;
        if (!found && m + dm >= 0.99) {
            L.s99 = s + ds * (0.99 - m) / dm;
            found = true;
        }
        s += ds;
        m += dm;
        L.sigma_fraction.push_back(s);
        L.measure_fraction.push_back(m);
    }
    if (!found) L.s99 = 1.0;
    return L;
}

DirichletCompare dirichlet_compare(const PolygonalDomain& domain, std::shared_ptr<const Mesh> mesh,
                                   const CoefficientField& coeff, double a, Vec2 pole, int group_edges,
                                   const SolverSettings& settings) {
    if (group_edges < 1) throw Error(ErrorKind::InvalidArgument, "group size must be positive");
    RobinSystem sys = assemble(mesh, coeff, a);
    MeasureDensity dens = harmonic_measure_density(sys, pole, settings);
    std::vector<double> rep = dirichlet_representer(*mesh, coeff, pole, settings);

    std::vector<char> fractal(domain.components().size(), 0);
    for (int c : domain.fractal_components()) fractal[c] = 1;
    // Mesh edges per component in boundary order: by parent edge, then along it.
    std::map<int, std::vector<std::pair<std::pair<int, double>, std::uint32_t>>> chains;
    for (std::uint32_t e = 0; e < mesh->boundary_edges.size(); ++e) {
        const auto& be = mesh->boundary_edges[e];
        if (be.parent < 0) continue;
        const auto& de = domain.edges()[be.parent];
        if (!fractal[de.component]) continue;
        Vec2 mid = (mesh->vertices[be.v0] + mesh->vertices[be.v1]) * 0.5;
        double t = dot(mid - de.a, de.b - de.a);
        chains[de.component].push_back({{be.parent, t}, e});
    }
    std::vector<double> s_piece, r_piece, d_piece;
    for (auto& [comp, chain] : chains) {
        std::sort(chain.begin(), chain.end());
        const std::size_t m = chain.size();
        const std::size_t ng = (m + group_edges - 1) / group_edges;
        const std::size_t base = s_piece.size();
        s_piece.resize(base + ng, 0.0);
        r_piece.resize(base + ng, 0.0);
        d_piece.resize(base + ng, 0.0);
        auto add = [&](std::size_t g, std::uint32_t v, double share) {
            s_piece[base + g] += share * mesh->sigma_weights[v];
            r_piece[base + g] += share * dens.w[v] * mesh->sigma_weights[v];
            d_piece[base + g] += share * rep[v];
        };
        for (std::size_t k = 0; k < m; ++k) {
            std::uint32_t v = mesh->boundary_edges[chain[k].second].v0;
            std::size_t g = k / group_edges;
            if (k % group_edges == 0 && ng > 1) {
                add(g, v, 0.5);
                add((g + ng - 1) % ng, v, 0.5);
            } else {
                add(g, v, 1.0);
            }
        }
    }
    DirichletCompare out;
    out.groups = s_piece.size();
    out.robin = lorenz_curve(s_piece, r_piece);
    out.dirichlet = lorenz_curve(s_piece, d_piece);
    out.robin_residual = dens.residual_norm;
    return out;
}

OscillationProfile oscillation_decay(const Mesh& mesh, const std::vector<double>& values, Vec2 x0, double r,
                                     int levels) {
    OscillationProfile p;
    std::vector<double> ks, logs;
    for (int k = 0; k < levels; ++k) {
        double rk = std::ldexp(r, -k);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        int count = 0;
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
            if (distance(mesh.vertices[v], x0) < rk) {
                lo = std::min(lo, values[v]);
                hi = std::max(hi, values[v]);
                ++count;
            }
        if (count < 3 || !(hi > lo)) break;
        p.radii.push_back(rk);
        p.osc.push_back(hi - lo);
        ks.push_back(k);
        logs.push_back(std::log(hi - lo));
    }
    if (ks.size() >= 2) p.eta = std::exp(fit_line(ks, logs).slope);
    return p;
}

void write_scan_csv(std::ostream& out, const std::vector<RatioRecord>& records) {
    out << "a,x0_id,r,E_id,sigma_ratio,omega_ratio,R,A_param,residual,C_pole\n" << std::setprecision(17);
    for (const auto& r : records)
        out << r.a << ',' << r.x0_id << ',' << r.r << ',' << r.E_id << ',' << r.sigma_ratio << ',' << r.omega_ratio
            << ',' << r.R << ',' << r.A_param << ',' << r.residual << ',' << r.C_pole << '\n';
}

std::vector<RatioRecord> read_scan_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("a,x0_id,r,E_id", 0) != 0)
        throw Error(ErrorKind::Io, "not a ratio scan CSV");
    std::vector<RatioRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 10) throw Error(ErrorKind::Io, "ratio scan CSV row has " + std::to_string(f.size()) + " fields");
        RatioRecord r;
        try {
            r.a = std::stod(f[0]);
            r.x0_id = std::stoi(f[1]);
            r.r = std::stod(f[2]);
            r.E_id = f[3];
            r.sigma_ratio = std::stod(f[4]);
            r.omega_ratio = std::stod(f[5]);
            r.R = std::stod(f[6]);
            r.A_param = std::stod(f[7]);
            r.residual = std::stod(f[8]);
            r.C_pole = std::stod(f[9]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Io, "malformed ratio scan CSV row: " + line);
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_density_csv(std::ostream& out, const MeasureDensity& density) {
    const Mesh& mesh = *density.mesh;
    out << "vertex,x,y,sigma,w\n" << std::setprecision(17);
    for (auto v : mesh.boundary_vertices)
        out << v << ',' << mesh.vertices[v].x << ',' << mesh.vertices[v].y << ',' << mesh.sigma_weights[v] << ','
            << density.w[v] << '\n';
}

}  // namespace rml
