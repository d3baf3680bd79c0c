#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "robinlab/measure.hpp"

using namespace rml;

namespace {

std::shared_ptr<const Mesh> build(const PolygonalDomain& d, SigmaRule rule, double h, const MeshOptions& opt = {}) {
    return std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, rule), h, opt));
}

// Boundary edges of the disk polygon whose midpoints have angle in [lo, hi).
EdgeSet arc(const Mesh& m, double lo, double hi) {
    EdgeSet e;
    for (std::uint32_t i = 0; i < m.boundary_edges.size(); ++i) {
        Vec2 mid = (m.vertices[m.boundary_edges[i].v0] + m.vertices[m.boundary_edges[i].v1]) * 0.5;
        double t = std::atan2(mid.y, mid.x);
        if (t < 0) t += 2.0 * std::numbers::pi;
        if (t >= lo && t < hi) e.push_back({i, 1.0});
    }
    return e;
}

RatioRecord synthetic(double a, int ball, double A, double R) {
    RatioRecord r;
    r.a = a;
    r.x0_id = ball;
    r.r = 0.01 * (ball + 1);
    r.E_id = "half0";
    r.A_param = A;
    r.R = R;
    r.C_pole = 4.0;
    r.sigma_ratio = 0.5;
    r.omega_ratio = 0.5 * R;
    return r;
}

}  // namespace

TEST_CASE("density is a probability measure on every family") {
    std::vector<std::pair<std::shared_ptr<const Mesh>, Vec2>> cases{
        {build(gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 16.0), {0.3, 0.7}},
        {build(gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 64.0), {0.5, 0.5}},
        {build(gen_koch_snowflake(3), SigmaRule::EdgeScaled, 1.0 / 54.0), {0.5, 0.3}},
    };
    for (auto& [m, X] : cases)
        for (double a : {0.01, 1.0, 100.0}) {
            auto dens = harmonic_measure_density(assemble(m, CoefficientField::identity(), a), X);
            CHECK(std::abs(dens.total - 1.0) <= 1e-6);
            CHECK(omega(dens, all_edges(*m)) == doctest::Approx(1.0).epsilon(1e-6));
            for (double w : dens.w) CHECK(w >= -1e-10);

            // additivity over two disjoint balls, and over a ball split into pieces
            auto sets = e_sets(*m, m->vertices[m->boundary_vertices[0]], 0.2);
            double parts = 0.0, whole = omega(dens, sets.front().edges);
            for (const auto& s : sets)
                if (s.id.rfind("half", 0) == 0) parts += omega(dens, s.edges);
            CHECK(parts == doctest::Approx(whole).epsilon(1e-12));
        }
}

TEST_CASE("disk with the pole at the center") {
    auto m = build(gen_reference(Family::DiskPolygon, 64), SigmaRule::Arclength, 0.1);
    auto dens = harmonic_measure_density(assemble(m, CoefficientField::identity(), 1.0), {0.0, 0.0});
    double lo = 1e300, hi = 0.0;
    for (auto v : m->boundary_vertices) {
        lo = std::min(lo, dens.w[v]);
        hi = std::max(hi, dens.w[v]);
    }
    CHECK((hi - lo) / hi <= 1e-6);
    const double q = 0.5 * std::numbers::pi;
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
        double w = omega(dens, arc(*m, k * q, (k + 1) * q));
        CHECK(std::abs(w - 0.25) <= 1e-3);
        total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("density is a times the Green function") {
    auto m = build(gen_cantor_complement(2), SigmaRule::ComponentUniform, 1.0 / 32.0);
    const double a = 7.0;
    auto sys = assemble(m, CoefficientField::identity(), a);
    Vec2 X{0.53, 0.47};
    auto dens = harmonic_measure_density(sys, X);
    auto G = green_column(sys, X);
    for (auto v : m->boundary_vertices) CHECK(dens.w[v] == doctest::Approx(a * G.values[v]).epsilon(1e-8));
}

TEST_CASE("representation identity with random data") {
    for (auto [d, rule, h] : {std::tuple{gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0},
                              std::tuple{gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 64.0}}) {
        auto m = build(d, rule, h);
        auto sys = assemble(m, CoefficientField::identity(), 1.0);
        Vec2 X{0.5, 0.5};
        auto dens = harmonic_measure_density(sys, X);
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> f(m->vertices.size());
            for (auto& v : f) v = U(rng);
            double pair = 0.0;
            for (auto v : m->boundary_vertices) pair += dens.w[v] * m->sigma_weights[v] * f[v];
            double direct = evaluate(*m, solve_robin(sys, f).values, X);
            CHECK(std::abs(pair - direct) <= 1e-8);
        }
    }
}

TEST_CASE("ratios: the full ball gives one and the sandwich holds") {
    auto m = build(gen_cantor_complement(3), SigmaRule::ComponentUniform, 1.0 / 64.0);
    auto dens = harmonic_measure_density(assemble(m, CoefficientField::identity(), 3.0), {0.5, 0.5});
    auto d = gen_cantor_complement(3);
    for (const auto& bp : sample_centers(d, 3)) {
        const Vec2 x0 = d.point_at(bp);
        const double r = 0.1;
        auto sets = e_sets(*m, x0, r);
        REQUIRE(!sets.empty());
        REQUIRE(sets.front().id == "ball");
        const auto& delta = sets.front().edges;
        double s_d = sigma_of(*m, delta), w_d = omega(dens, delta);
        CHECK((w_d / w_d) / (s_d / s_d) == 1.0);
        auto cov = vertex_coverage(*m, delta);
        double wmin = 1e300, wmax = 0.0;
        for (std::size_t v = 0; v < cov.size(); ++v)
            if (cov[v] > 0.0) {
                wmin = std::min(wmin, dens.w[v]);
                wmax = std::max(wmax, dens.w[v]);
            }
        for (const auto& s : sets) {
            double sr = sigma_of(*m, s.edges) / s_d, wr = omega(dens, s.edges) / w_d;
            CHECK(wr >= (wmin / wmax) * sr * (1.0 - 1e-12));
            CHECK(wr <= (wmax / wmin) * sr * (1.0 + 1e-12));
        }
        // coverage reproduces sigma of the set
        double sc = 0.0;
        for (std::size_t v = 0; v < cov.size(); ++v) sc += cov[v] * m->sigma_weights[v];
        CHECK(sc == doctest::Approx(s_d).epsilon(1e-12));
    }
}

TEST_CASE("ball edges clip partially covered edges") {
    auto m = build(gen_reference(Family::Square), SigmaRule::Arclength, 0.25);
    // radius 0.3 around (0.5, 0): covers [0.2, 0.8] of the bottom side
    CHECK(sigma_of(*m, ball_edges(*m, {0.5, 0.0}, 0.3)) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(sigma_of(*m, all_edges(*m)) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("fit_gamma on constructed records") {
    std::vector<RatioRecord> recs, flat;
    for (int b = 0; b < 10; ++b) {
        double A = std::pow(10.0, 0.25 * (b + 1));
        recs.push_back(synthetic(1.0, b, A, std::sqrt(A)));
        flat.push_back(synthetic(1.0, b, A, 3.0));
    }
    auto g = fit_gamma(recs, 4.0);
    CHECK(std::abs(g.slope - 0.5) <= 1e-6);
    CHECK(g.band_lo <= g.slope);
    CHECK(g.band_hi >= g.slope);
    CHECK(std::abs(fit_gamma(flat, 4.0).slope) <= 1e-6);
    recs.resize(5);
    CHECK_THROWS_AS(fit_gamma(recs, 4.0), Error);
}

TEST_CASE("line fit") {
    auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.rms_residual == doctest::Approx(0.0));
    CHECK(f.n == 4);
}

TEST_CASE("pole robustness of identical records is one") {
    std::vector<RatioRecord> recs;
    for (int b = 0; b < 4; ++b) {
        auto r = synthetic(1.0, b, 0.1, 1.3);
        recs.push_back(r);
        r.C_pole = 10.0;
        recs.push_back(r);
    }
    CHECK(pole_robustness(recs, 4.0, 10.0) == doctest::Approx(1.0));
    recs.back().R = 3.9;
    CHECK(pole_robustness(recs, 4.0, 10.0) == doctest::Approx(3.0));
}

TEST_CASE("far pole and phase radius") {
    auto d = gen_cantor_complement(3);
    for (double dist : {0.05, 0.2, 0.4}) {
        Vec2 X = far_pole(d, {0.0, 0.0}, dist);
        CHECK(d.contains(X));
        CHECK(distance(X, {0.0, 0.0}) >= dist * (1.0 - 1e-9));
        CHECK(distance(X, {0.0, 0.0}) <= 2.0 * dist * (1.0 + 1e-9));
    }
    auto sq = gen_reference(Family::Square);
    auto s = attach_sigma(sq, SigmaRule::Arclength);
    // mid-edge: sigma(B) = 2r, so a * 2r = A
    CHECK(radius_for_phase(sq, s, {0.5, 0.0}, 10.0, 0.5) == doctest::Approx(0.025).epsilon(1e-6));
}

TEST_CASE("Harnack ratio") {
    auto m = build(gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 32.0);
    std::vector<double> one(m->vertices.size(), 1.0);
    CHECK(harnack_ratio(*m, one, {0.5, 0.0}, 0.2, {0.5, 0.9}, 0.1) == 1.0);
    auto G = green_column(assemble(m, CoefficientField::identity(), 1.0), {0.5, 0.9});
    double hr = harnack_ratio(*m, G.values, {0.5, 0.0}, 0.1, {0.5, 0.9}, 4.0 / 32.0);
    CHECK(hr > 0.0);
    CHECK(hr <= 1.0);
}

TEST_CASE("oscillation profile of a far-pole Green function") {
    auto m = build(gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 128.0);
    auto G = green_column(assemble(m, CoefficientField::identity(), 1.0), {0.5, 0.9});
    auto prof = oscillation_decay(*m, G.values, {0.5, 0.0}, 0.25, 5);
    REQUIRE(prof.osc.size() == 5);
    CHECK(prof.eta <= 0.95);
    CHECK(prof.eta > 0.0);
}

TEST_CASE("density scan with data on the whole boundary") {
    auto m = build(gen_reference(Family::Square), SigmaRule::Arclength, 1.0 / 16.0);
    auto scan = density_bound_scan(m, CoefficientField::identity(), {0.1, 1.0, 10.0}, {0.5, 0.0}, 0.1, 100.0);
    for (const auto& row : scan.rows) CHECK(row.m == doctest::Approx(1.0).epsilon(1e-8));
    // local data: m grows with a and stays below one
    auto local = density_bound_scan(m, CoefficientField::identity(), {0.1, 1.0, 10.0}, {0.5, 0.0}, 0.1, 4.0);
    for (std::size_t i = 1; i < local.rows.size(); ++i) CHECK(local.rows[i].m > local.rows[i - 1].m);
    for (const auto& row : local.rows) CHECK(row.m <= 1.0 + 1e-9);
}

TEST_CASE("active boundary: positive, increasing as a falls, monotone in the ball") {
    auto d = gen_cantor_complement(2);
    auto with_ball = [&](double radius) {
        MeshOptions opt;
        opt.carve.push_back({{0.5, 0.5}, radius});
        return build(d, SigmaRule::ComponentUniform, 1.0 / 32.0, opt);
    };
    auto m = with_ball(0.2);
    double prev = 0.0;
    for (double a : {10.0, 1.0, 0.1, 1e-4}) {
        double delta = active_boundary(assemble(m, CoefficientField::identity(), a));
        CHECK(delta > prev);
        CHECK(delta <= 1.0 + 1e-9);
        prev = delta;
    }
    CHECK(prev > 0.99);  // Neumann limit
    double small = active_boundary(assemble(with_ball(0.1), CoefficientField::identity(), 1.0));
    double large = active_boundary(assemble(with_ball(0.2), CoefficientField::identity(), 1.0));
    CHECK(small > 0.0);
    CHECK(large >= small);
    auto plain = build(d, SigmaRule::ComponentUniform, 1.0 / 32.0);
    CHECK_THROWS_AS(active_boundary(assemble(plain, CoefficientField::identity(), 1.0)), Error);
}

TEST_CASE("Lorenz curve of uniform measure is the diagonal") {
    std::vector<double> s(200, 0.5), w(200, 2.0);
    auto L = lorenz_curve(s, w);
    CHECK(L.s99 == doctest::Approx(0.99).epsilon(1e-9));
    for (std::size_t i = 0; i < L.sigma_fraction.size(); ++i)
        CHECK(L.measure_fraction[i] == doctest::Approx(L.sigma_fraction[i]).epsilon(1e-12));
    // all mass on one of ten equal pieces
    std::vector<double> s10(10, 1.0), w10(10, 0.0);
    w10[3] = 1.0;
    CHECK(lorenz_curve(s10, w10).s99 == doctest::Approx(0.099).epsilon(1e-9));
}

TEST_CASE("Robin measure is less concentrated than the Dirichlet one") {
    auto d = gen_cantor_complement(2);
    auto m = build(d, SigmaRule::ComponentUniform, 1.0 / 64.0);
    auto cmp = dirichlet_compare(d, m, CoefficientField::identity(), 1.0, {0.5, 0.5});
    CHECK(cmp.groups > 0);
    CHECK(cmp.robin.s99 > cmp.dirichlet.s99);
    CHECK(cmp.robin.s99 <= 0.99 + 1e-9);
}

TEST_CASE("scan CSV round trip") {
    std::vector<RatioRecord> recs{synthetic(1.0, 0, 0.5, 1.1), synthetic(10.0, 2, 5.0, 2.5)};
    std::stringstream buf;
    write_scan_csv(buf, recs);
    std::string header;
    std::getline(std::stringstream(buf.str()), header);
    CHECK(header.rfind("a,x0_id,r,E_id,sigma_ratio,omega_ratio,R,A_param,residual", 0) == 0);
    auto back = read_scan_csv(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[1].a == 10.0);
    CHECK(back[1].x0_id == 2);
    CHECK(back[1].E_id == "half0");
    CHECK(back[1].R == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("ratio scan on the square: small scales are flat") {
    auto sq = gen_reference(Family::Square);
    auto m = build(sq, SigmaRule::Arclength, 1.0 / 64.0);
    ScanSetup setup;
    setup.a_grid = {0.1, 1.0, 10.0};
    setup.radii = {0.2, 0.1, 0.05};
    setup.centers = {{0.5, 0.0}, {0.0, 0.3}};
    auto rep = ratio_scan(sq, m, CoefficientField::identity(), setup);
    // C = 10 at r = 0.2 puts the pole outside the unit square: recorded, scan continues
    CHECK(rep.failures.size() == 2);
    for (const auto& f : rep.failures) CHECK(f.find("r 0.2 C_pole 10") != std::string::npos);
    CHECK(!rep.records.empty());
    for (const auto& rec : rep.records) {
        CHECK(std::isfinite(rec.R));
        CHECK(rec.R > 0.0);
        CHECK(rec.A_param == doctest::Approx(rec.a * 2.0 * rec.r).epsilon(1e-9));  // sigma(B) = 2r on a side
        if (rec.E_id == "ball") CHECK(rec.R == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rec.R >= rec.w_min / rec.w_max * (1.0 - 1e-12));
        CHECK(rec.R <= rec.w_max / rec.w_min * (1.0 + 1e-12));
    }
    // records are in canonical order
    CHECK(std::is_sorted(rep.records.begin(), rep.records.end(), [](const RatioRecord& p, const RatioRecord& q) {
        return std::tie(p.a, p.x0_id, p.r, p.E_id, p.C_pole) < std::tie(q.a, q.x0_id, q.r, q.E_id, q.C_pole);
    }));
    CHECK(rep.summary.max_abs_log_R_small < std::log(3.0));
}
