// Acceptance run: one PASS/FAIL line per criterion. `acceptance 3 7` runs a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "robinlab/walker.hpp"

using namespace rml;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::shared_ptr<const Mesh> mesh_of(const PolygonalDomain& d, SigmaRule rule, double h, const MeshOptions& o = {}) {
    return std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, rule), h, o));
}

// P1 L2 error with the exact field sampled at vertices; exact mass-matrix
// quadrature of the interpolated difference.
double l2_diff(const Mesh& m, const std::vector<double>& u, const std::function<double(Vec2)>& exact) {
    double s = 0.0;
    for (const auto& t : m.triangles) {
        double e[3];
        for (int k = 0; k < 3; ++k) e[k] = u[t[k]] - exact(m.vertices[t[k]]);
        double area = 0.5 * cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
        s += area / 6.0 * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[0] * e[1] + e[1] * e[2] + e[0] * e[2]);
    }
    return std::sqrt(s);
}

std::vector<double> uniform_data(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> f(n);
    for (auto& v : f) v = U(rng);
    return f;
}

std::vector<Vec2> centers_of(const PolygonalDomain& d, int n) {
    std::vector<Vec2> c;
    for (const auto& bp : sample_centers(d, n)) c.push_back(d.point_at(bp));
    return c;
}

// ---- criteria ---------------------------------------------------------------

Outcome disk_oracle_check() {
    Clock clock;
    const double a = 1.0, R = 1.0;
    // separation of variables: u = a / (1 + a R) * r cos(theta)
    auto exact = [&](Vec2 p) { return a / (1.0 + a * R) * p.x; };
    std::vector<double> err;
    for (double h : {1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0}) {
        auto d = gen_reference(Family::DiskPolygon, static_cast<int>(std::lround(4.0 / h)));
        auto m = mesh_of(d, SigmaRule::Arclength, h);
        auto f = nodal_data(*m, [](Vec2 p) {
            double r = norm(p);
            return r > 0.0 ? p.x / r : 0.0;
        });
        err.push_back(l2_diff(*m, solve_robin(assemble(m, CoefficientField::identity(), a), f).values, exact));
    }
    double r1 = err[0] / err[1], r2 = err[1] / err[2];
    double t = clock.seconds();
    bool ok = err[2] <= 5e-4 && r1 >= 3.5 && r1 <= 4.5 && r2 >= 3.5 && r2 <= 4.5 && t <= 30.0;
    return {ok, fmt("L2 error at h=1/64 (256-gon) %.3e, ratios %.3f %.3f, %.1f s", err[2], r1, r2, t)};
}

Outcome probability_check() {
    double worst_total = 0.0, worst_neg = 0.0, worst_add = 0.0;
    int count = 0;
    struct Case {
        PolygonalDomain d;
        SigmaRule rule;
        double h;
        Vec2 X;
    };
    std::vector<Case> cases{{gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0, {0.3, 0.6}},
                            {gen_reference(Family::DiskPolygon, 128), SigmaRule::Arclength, 1.0 / 32.0, {0.2, -0.1}},
                            {gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 128.0, {0.5, 0.5}},
                            {gen_koch_snowflake(3), SigmaRule::EdgeScaled, 1.0 / 54.0, {0.5, 0.3}}};
    for (auto& c : cases) {
        auto m = mesh_of(c.d, c.rule, c.h);
        auto centers = centers_of(c.d, 2);
        for (double a : {1e-2, 1.0, 1e2}) {
            auto dens = harmonic_measure_density(assemble(m, CoefficientField::identity(), a), c.X);
            ++count;
            worst_total = std::max(worst_total, std::abs(dens.total - 1.0));
            worst_total = std::max(worst_total, std::abs(omega(dens, all_edges(*m)) - 1.0));
            for (double w : dens.w) worst_neg = std::max(worst_neg, -w);
            // disjoint pieces: the angular split of a ball, and two far-apart balls
            auto sets = e_sets(*m, centers[0], 0.1);
            double whole = omega(dens, sets.front().edges), parts = 0.0;
            for (const auto& s : sets)
                if (s.id.rfind("quarter", 0) == 0) parts += omega(dens, s.edges);
            worst_add = std::max(worst_add, std::abs(whole - parts));
            auto e1 = ball_edges(*m, centers[0], 0.02), e2 = ball_edges(*m, centers[1], 0.02);
            std::set<std::uint32_t> used;
            bool disjoint = true;
            for (auto& e : e1) used.insert(e.edge);
            for (auto& e : e2) disjoint = disjoint && !used.count(e.edge);
            if (disjoint) {
                EdgeSet both = e1;
                both.insert(both.end(), e2.begin(), e2.end());
                worst_add = std::max(worst_add, std::abs(omega(dens, both) - omega(dens, e1) - omega(dens, e2)));
            }
        }
    }
    bool ok = worst_total <= 1e-6 && worst_neg <= 1e-10 && worst_add <= 1e-14;
    return {ok, fmt("%d densities: max |total-1| %.1e, max negative part %.1e, additivity defect %.1e", count,
                    worst_total, worst_neg, worst_add)};
}

Outcome representation_check() {
    Clock clock;
    double worst = 0.0;
    std::mt19937_64 rng(2024);
    for (auto [d, rule, h] : {std::tuple{gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 64.0},
                              std::tuple{gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 128.0}}) {
        auto m = mesh_of(d, rule, h);
        auto sys = assemble(m, CoefficientField::identity(), 1.0);
        const Vec2 X{0.5, 0.5};
        auto dens = harmonic_measure_density(sys, X);
        for (int k = 0; k < 10; ++k) {
            auto f = uniform_data(m->vertices.size(), rng);
            double pair = 0.0;
            for (auto v : m->boundary_vertices) pair += dens.w[v] * m->sigma_weights[v] * f[v];
            worst = std::max(worst, std::abs(pair - evaluate(*m, solve_robin(sys, f).values, X)));
        }
    }
    double t = clock.seconds();
    return {worst <= 1e-8 && t <= 60.0, fmt("max |<w,f> - u(X)| %.2e over 20 data vectors, %.1f s", worst, t)};
}

Outcome max_principle_check() {
    struct Case {
        const char* name;
        PolygonalDomain d;
        SigmaRule rule;
        double h;
        CoefficientField coeff;
    };
    std::vector<Case> cases{
        {"square", gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0, CoefficientField::identity()},
        {"disk", gen_reference(Family::DiskPolygon, 128), SigmaRule::Arclength, 1.0 / 32.0, CoefficientField::identity()},
        {"cantor", gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 64.0, CoefficientField::identity()},
        {"koch", gen_koch_snowflake(3), SigmaRule::EdgeScaled, 1.0 / 54.0, CoefficientField::identity()},
        {"checkerboard", gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0,
         CoefficientField::checkerboard(0.25, {1, 0, 0, 1}, {10, 0, 0, 10})},
        {"nonsymmetric", gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0,
         CoefficientField::constant({2.0, 0.5, -0.5, 1.0})},
    };
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> loga(-2.0, 2.0);
    int violations = 0, solves = 0;
    double worst = 0.0;
    for (auto& c : cases) {
        auto m = mesh_of(c.d, c.rule, c.h);
        for (int k = 0; k < 50; ++k) {
            auto f = uniform_data(m->vertices.size(), rng);
            auto sys = assemble(m, c.coeff, std::pow(10.0, loga(rng)));
            auto u = solve_robin(sys, f);
            ++solves;
            double lo = 1e300, hi = -1e300;
            for (auto v : m->boundary_vertices) {
                lo = std::min(lo, f[v]);
                hi = std::max(hi, f[v]);
            }
            double eps = 10.0 * std::min(u.residual_norm, u.backward_error) * std::max(std::abs(lo), std::abs(hi));
            for (double x : u.values) {
                double over = std::max(lo - x, x - hi);
                worst = std::max(worst, over);
                if (over > eps + 1e-15) ++violations;
            }
        }
    }
    return {violations == 0, fmt("%d solves over 4 families plus checkerboard and nonsymmetric A: %d violations, "
                                 "largest excursion %.1e", solves, violations, worst)};
}

struct CantorScan {
    ScanReport report;
    std::vector<AUniformity> uniform;
    double seconds = 0.0;
};

CantorScan& cantor_scan() {
    static CantorScan cs = [] {
        Clock clock;
        CantorScan out;
        auto d = gen_cantor_complement(4);
        auto s = attach_sigma(d, SigmaRule::ComponentUniform);
        auto centers = centers_of(d, 6);
        std::vector<double> radii;
        const double r_max = d.fractal_diameter() / 10.0;
        for (int k = 0; k < 12; ++k) radii.push_back(std::ldexp(r_max, -k));
        auto mesh = std::make_shared<const Mesh>(scan_mesh(d, s, centers, radii.back(), std::ldexp(1.0, -8) / 2.0));
        ScanSetup setup;
        setup.a_grid = {1.0, 10.0, 100.0, 1e3, 1e4};
        setup.radii = radii;
        setup.centers = centers;
        out.report = ratio_scan(d, mesh, CoefficientField::identity(), setup);
        for (double a : {1.0, 10.0, 100.0})
            out.uniform.push_back(
                a_uniformity(d, s, CoefficientField::identity(), a, 100.0, centers, radii, 4.0, 1.0 / 512.0));
        out.seconds = clock.seconds();
        return out;
    }();
    return cs;
}

Outcome small_scale_check() {
    auto& cs = cantor_scan();
    const auto& S = cs.report.summary;
    bool flat = std::abs(S.small_trend.slope) <= 0.05;
    bool uniform = true;
    std::ostringstream changes;
    for (const auto& u : cs.uniform) {
        uniform = uniform && u.rel_change < 0.25;
        changes << fmt(" a=%g:%.2f", u.a, u.rel_change);
    }
    return {flat && uniform && cs.seconds <= 600.0,
            fmt("Cantor g=4, %zu records (%zu with A<=1): |log R| trend slope %.4f, max|log R| %.3f; "
                "relative change at 100a matched A:%s; %.0f s",
                cs.report.records.size(), S.small_count, S.small_trend.slope, S.max_abs_log_R_small,
                changes.str().c_str(), cs.seconds)};
}

Outcome large_scale_check() {
    auto& cs = cantor_scan();
    const auto& S = cs.report.summary;
    if (!S.gamma) return {false, "fewer than 8 balls with A_param in (1, 1e3]"};
    const auto& g = *S.gamma;
    bool ok = std::isfinite(g.slope) && g.rel_residual <= 0.25;
    double robust = pole_robustness(cs.report.records, 4.0, 10.0);
    return {ok, fmt("gamma %.4f [%.4f, %.4f] from %zu balls, fit residual %.3f of slope; pole robustness factor %.2f",
                    g.slope, g.band_lo, g.band_hi, g.n, g.rel_residual, robust)};
}

Outcome harnack_check() {
    auto I = CoefficientField::identity();
    auto stable = [](const std::vector<HarnackRecord>& rs, double& lo) {
        double mean = 0.0;
        lo = 1.0;
        for (auto& r : rs) {
            mean += r.ratio;
            lo = std::min(lo, r.ratio);
        }
        mean /= static_cast<double>(rs.size());
        bool ok = true;
        for (auto& r : rs) ok = ok && std::abs(r.ratio / mean - 1.0) <= 0.3;
        return ok;
    };
    auto sq = gen_reference(Family::Square);
    auto hs = harnack_scan(sq, attach_sigma(sq, SigmaRule::Arclength), I, {1, 10, 100}, {0.5, 0.0}, 1e-2, 4, 1.0 / 16);
    auto c3 = gen_cantor_complement(3);
    auto hc = harnack_scan(c3, attach_sigma(c3, SigmaRule::ComponentUniform), I, {1, 10, 100}, centers_of(c3, 1)[0],
                           1e-2, 4, 1.0 / 64);
    double lo_s = 0, lo_c = 0;
    bool ok = stable(hs, lo_s) && stable(hc, lo_c);
    ok = ok && lo_s >= 0.01 && lo_c >= 0.01;
    std::ostringstream d;
    d << "A_param 1e-2, a in {1,10,100}; square ratios";
    for (auto& r : hs) d << fmt(" %.3f", r.ratio);
    d << "; Cantor g=3 ratios";
    for (auto& r : hc) d << fmt(" %.3f", r.ratio);
    return {ok, d.str()};
}

Outcome density_form_check() {
    auto sq = gen_reference(Family::Square);
    MeshOptions o;
    o.focus_points = {{0.5, 0.0}};
    o.focus_h = 0.1 / 16.0;
    auto m = mesh_of(sq, SigmaRule::Arclength, 1.0 / 32.0, o);
    const double r = 0.1;
    const double s_ball = 2.0 * r;  // sigma(B) on a side, mid-edge
    std::vector<double> a_grid;
    for (int k = 0; k <= 8; ++k) a_grid.push_back(std::pow(10.0, -2.0 + 0.25 * k) / s_ball);
    auto ds = density_bound_scan(m, CoefficientField::identity(), a_grid, {0.5, 0.0}, r, 4.0);
    bool ok = ds.fit.slope < 0.0 && ds.fit.rel_residual <= 0.10;
    return {ok, fmt("log m vs 1/(a sigma(B)) over a sigma(B) in [1e-2, 1]: m %.3f..%.3f, slope %.4g, residual %.2f of "
                    "slope (limit 0.10)",
                    ds.rows.front().m, ds.rows.back().m, ds.fit.slope, ds.fit.rel_residual)};
}

Outcome active_boundary_check() {
    auto c3 = gen_cantor_complement(3);
    MeshOptions o;
    o.carve = {{{0.5, 0.5}, 0.25}};
    auto m = mesh_of(c3, SigmaRule::ComponentUniform, 1.0 / 128.0, o);
    std::vector<double> delta;
    for (double a : {10.0, 1.0, 0.1}) delta.push_back(active_boundary(assemble(m, CoefficientField::identity(), a)));
    bool ok = delta[0] >= 1e-6 && delta[1] > delta[0] && delta[2] > delta[1];
    return {ok, fmt("min over boundary of u: %.3e (a=10), %.3e (a=1), %.3e (a=0.1)", delta[0], delta[1], delta[2])};
}

Outcome dimension_drop_check() {
    Clock clock;
    std::vector<double> sr, sd;
    for (int g : {2, 3, 4}) {
        auto d = gen_cantor_complement(g);
        auto m = mesh_of(d, SigmaRule::ComponentUniform, std::ldexp(1.0, -2 * g) / 2.0);
        auto dc = dirichlet_compare(d, m, CoefficientField::identity(), 1.0, {0.5, 0.5});
        sr.push_back(dc.robin.s99);
        sd.push_back(dc.dirichlet.s99);
    }
    double drop = 1.0 - sd[2] / sd[0];
    double change = std::abs(sr[2] / sr[0] - 1.0);
    double t = clock.seconds();
    bool ok = drop >= 0.20 && change <= 0.10 && t <= 900.0;
    return {ok, fmt("s99 Dirichlet %.4f %.4f %.4f (drop %.1f%%, need 20%%); Robin %.4f %.4f %.4f (change %.2f%%); "
                    "%.0f s",
                    sd[0], sd[1], sd[2], 100 * drop, sr[0], sr[1], sr[2], 100 * change, t)};
}

Outcome monte_carlo_check() {
    Clock clock;
    auto sq = gen_reference(Family::Square);
    auto m = mesh_of(sq, SigmaRule::Arclength, 1.0 / 8.0);
    auto sys = assemble(m, CoefficientField::identity(), 1.0);
    auto chain = build_chain(sys);
    auto start = interior_vertex(*m, {0.5, 0.5});
    auto E = ball_edges(*m, {0.5, 0.0}, 0.3);
    const double exact = omega(harmonic_measure_density(sys, m->vertices[start]), E);
    int inside = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        auto est = estimate_omega_mc(chain, start, E, 100000, 1000 + rep);
        if (std::abs(est.estimate - exact) <= 4.0 * est.stderr_) ++inside;
    }
    auto a1 = estimate_omega_mc(chain, start, E, 100000, 4242), a2 = estimate_omega_mc(chain, start, E, 100000, 4242);
    bool bitwise = a1.estimate == a2.estimate && a1.mean_steps == a2.mean_steps;
    return {inside >= 95 && bitwise, fmt("omega(E) %.5f; %d/100 repetitions within 4 stderr; fixed seed %s; %.0f s",
                                         exact, inside, bitwise ? "bitwise identical" : "NOT reproducible",
                                         clock.seconds())};
}

Outcome limits_check() {
    auto sq = gen_reference(Family::Square);
    auto m = mesh_of(sq, SigmaRule::Arclength, 1.0 / 64.0);
    std::mt19937_64 rng(5);
    double worst_n = 0.0, worst_d = 0.0;
    for (int k = 0; k < 3; ++k) {
        auto f = k == 0 ? nodal_data(*m, [](Vec2 p) { return std::cos(3.0 * p.x) + p.y; })
                        : uniform_data(m->vertices.size(), rng);
        double mean = 0.0;
        for (auto v : m->boundary_vertices) mean += f[v] * m->sigma_weights[v];
        mean /= m->total_sigma();
        auto un = solve_robin(assemble(m, CoefficientField::identity(), 1e-6), f);
        for (double x : un.values) worst_n = std::max(worst_n, std::abs(x - mean));
        auto ur = solve_robin(assemble(m, CoefficientField::identity(), 1e6), f);
        auto ud = solve_dirichlet(*m, CoefficientField::identity(), f);
        for (std::size_t v = 0; v < f.size(); ++v) worst_d = std::max(worst_d, std::abs(ur.values[v] - ud.values[v]));
    }
    return {worst_n <= 1e-4 && worst_d <= 1e-3,
            fmt("a=1e-6: max deviation from sigma-mean %.2e; a=1e6: max deviation from Dirichlet %.2e", worst_n, worst_d)};
}

Outcome geometry_check() {
    auto k5 = gen_koch_snowflake(5);
    double dk = check_ahlfors(k5, attach_sigma(k5, SigmaRule::EdgeScaled), 8, 8).estimated_d;
    auto c5 = gen_cantor_complement(5);
    double dc = check_ahlfors(c5, attach_sigma(c5, SigmaRule::ComponentUniform), 8, 8).estimated_d;
    std::vector<double> M;
    for (int g : {2, 3, 4}) M.push_back(check_corkscrew(gen_cantor_complement(g), 8, 6).corkscrew_M.value_or(NAN));
    double mean = (M[0] + M[1] + M[2]) / 3.0;
    bool stable = true;
    for (double v : M) stable = stable && std::abs(v / mean - 1.0) <= 0.25;
    bool ok = std::abs(dk - std::log(4.0) / std::log(3.0)) <= 0.1 && std::abs(dc - 1.0) <= 0.1 && stable;
    return {ok, fmt("Koch g=5 d=%.4f (target %.4f); Cantor g=5 d=%.4f; corkscrew M %.3f %.3f %.3f", dk,
                    std::log(4.0) / std::log(3.0), dc, M[0], M[1], M[2])};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"disk oracle", disk_oracle_check},
        {"probability-measure identities", probability_check},
        {"representation identity", representation_check},
        {"maximum principle", max_principle_check},
        {"small-scale flatness", small_scale_check},
        {"large-scale degeneracy", large_scale_check},
        {"boundary Harnack", harnack_check},
        {"density functional form", density_form_check},
        {"active boundary", active_boundary_check},
        {"dimension-drop contrast", dimension_drop_check},
        {"Monte Carlo equivalence", monte_carlo_check},
        {"Neumann and Dirichlet limits", limits_check},
        {"geometry regularity", geometry_check},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
