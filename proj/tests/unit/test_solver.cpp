#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "robinlab/solver.hpp"

using namespace rml;

namespace {

std::shared_ptr<const Mesh> square_mesh(double h) {
    auto sq = gen_reference(Family::Square);
    return std::make_shared<const Mesh>(triangulate(sq, attach_sigma(sq, SigmaRule::Arclength), h));
}

double entry(const SparseMatrix& m, int i, int j) { return m.coeff(i, j); }

std::vector<double> noise(const Mesh& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> f(m.vertices.size());
    for (auto& v : f) v = u(rng);
    return f;
}

double sigma_pair(const Mesh& m, const std::vector<double>& w, const std::vector<double>& f) {
    double s = 0.0;
    for (auto v : m.boundary_vertices) s += w[v] * m.sigma_weights[v] * f[v];
    return s;
}

std::uint32_t nearest_vertex(const Mesh& m, Vec2 p) {
    std::uint32_t best = 0;
    for (std::uint32_t v = 1; v < m.vertices.size(); ++v)
        if (distance(m.vertices[v], p) < distance(m.vertices[best], p)) best = v;
    return best;
}

}  // namespace

TEST_CASE("stiffness of the two-triangle square patch") {
    auto m = square_mesh(1.0);
    REQUIRE(m->vertices.size() == 4);
    REQUIRE(m->triangles.size() == 2);
    auto K = stiffness(*m, CoefficientField::identity());
    // Right-isoceles pair: legs couple with -1/2, the split diagonal with 0 and
    // the opposite diagonal is not an edge; every vertex has diagonal entry 1.
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double d = distance(m->vertices[i], m->vertices[j]);
            double expect = i == j ? 1.0 : (std::abs(d - 1.0) < 1e-12 ? -0.5 : 0.0);
            CHECK(entry(K, i, j) == doctest::Approx(expect).epsilon(1e-14));
        }
}

TEST_CASE("interior rows reproduce the five-point stencil") {
    auto m = square_mesh(0.25);
    auto K = stiffness(*m, CoefficientField::identity());
    auto mask = m->boundary_mask();
    int checked = 0;
    for (std::uint32_t v = 0; v < m->vertices.size(); ++v) {
        if (mask[v]) continue;
        ++checked;
        CHECK(entry(K, v, v) == doctest::Approx(4.0));
        for (std::uint32_t w = 0; w < m->vertices.size(); ++w) {
            if (w == v) continue;
            double d = distance(m->vertices[v], m->vertices[w]);
            double expect = std::abs(d - 0.25) < 1e-12 ? -1.0 : 0.0;
            CHECK(entry(K, v, w) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
    CHECK(checked == 9);
}

TEST_CASE("assembly invariants") {
    auto d = gen_cantor_complement(2);
    auto m = std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, SigmaRule::ComponentUniform), 1.0 / 32.0));
    for (const auto& coeff : {CoefficientField::identity(), CoefficientField::radial_oscillatory(0.5, 10.0),
                              CoefficientField::constant({2.0, 0.5, -0.3, 1.0}),
                              CoefficientField::checkerboard(0.25, {1, 0, 0, 1}, {10, 0, 0, 10})}) {
        auto sys = assemble(m, coeff, 3.0);
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(sys.K.rows());
        CHECK((sys.K * ones).cwiseAbs().maxCoeff() <= 1e-10);
        SparseMatrix diff = SparseMatrix(sys.B - SparseMatrix(sys.B.transpose()));
        double asym = diff.coeffs().size() ? diff.coeffs().cwiseAbs().maxCoeff() : 0.0;
        CHECK(sys.symmetric == coeff.symmetric());
        if (coeff.symmetric())
            CHECK(asym <= 1e-12);
        else
            CHECK(asym > 1e-6);
        if (coeff.scalar())
            for (int k = 0; k < sys.B.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(sys.B, k); it; ++it)
                    if (it.row() != it.col()) CHECK(it.value() <= 1e-14);
    }
    CHECK_THROWS_AS(assemble(m, CoefficientField::identity(), 0.0), Error);
    CHECK_THROWS_AS(assemble(m, CoefficientField::identity(), -1.0), Error);
    CHECK_THROWS_AS(assemble(m, CoefficientField::identity(), std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("coefficient fields") {
    CHECK_THROWS_AS(CoefficientField::radial_oscillatory(1.0, 3.0), Error);
    CHECK_THROWS_AS(CoefficientField::constant({1.0, 0.0, 0.0, -1.0}), Error);
    auto c = CoefficientField::constant({2.0, 1.0, -1.0, 2.0});
    CHECK(!c.symmetric());
    CHECK(c.lambda() == doctest::Approx(2.0));  // symmetric part is 2 I
    auto cb = CoefficientField::checkerboard(0.5, {1, 0, 0, 1}, {4, 0, 0, 4});
    CHECK(cb.at({0.1, 0.1}).a11 == 1.0);
    CHECK(cb.at({0.6, 0.1}).a11 == 4.0);
    CHECK(cb.at({0.6, 0.6}).a11 == 1.0);
    CHECK(cb.Lambda() == doctest::Approx(4.0));
    auto ro = CoefficientField::radial_oscillatory(0.5, 2.0);
    CHECK(ro.at({1.0, 0.0}).a11 == doctest::Approx(1.0 + 0.5 * std::sin(2.0)));
    CHECK(ro.scalar());
}

TEST_CASE("a to infinity leaves the boundary mass") {
    auto m = square_mesh(0.125);
    auto sys = assemble(m, CoefficientField::identity(), 1e12);
    for (int k = 0; k < sys.B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sys.B, k); it; ++it) {
            double expect = it.row() == it.col() ? sys.m_sigma[static_cast<std::size_t>(it.row())] : 0.0;
            CHECK(std::abs(it.value() - expect) <= 1e-11);
        }
}

TEST_CASE("constants are exact solutions") {
    auto d = gen_koch_snowflake(2);
    auto m = std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, SigmaRule::EdgeScaled), 1.0 / 27.0));
    for (double a : {1e-3, 1.0, 1e3})
        for (const auto& coeff : {CoefficientField::identity(), CoefficientField::constant({2.0, 1.0, -1.0, 2.0})}) {
            auto sys = assemble(m, coeff, a);
            auto u = solve_robin(sys, std::vector<double>(m->vertices.size(), 2.5));
            for (double v : u.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-8));
            CHECK(std::min(u.residual_norm, u.backward_error) <= 1e-10);
        }
    auto g = solve_dirichlet(*m, CoefficientField::identity(), std::vector<double>(m->vertices.size(), -1.0));
    for (double v : g.values) CHECK(v == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("disk oracle converges at second order") {
    // Independent oracle: separation of variables gives u = a/(1+aR) r cos(theta),
    // here a = R = 1.
    auto rows = disk_oracle({1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0});
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].ratio >= 3.5);
        CHECK(rows[i].ratio <= 4.5);
        CHECK(rows[i].ratio == doctest::Approx(rows[i - 1].l2_error / rows[i].l2_error));
    }
    CHECK(rows.back().l2_error < 1e-3);
}

TEST_CASE("l2 error of simple fields") {
    auto m = square_mesh(0.125);
    std::vector<double> zero(m->vertices.size(), 0.0);
    CHECK(l2_error(*m, zero, [](Vec2) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l2_error(*m, zero, [](Vec2) { return 0.0; }) == 0.0);
    // x is linear, so its interpolant is exact and the norm is sqrt(1/3)
    CHECK(l2_error(*m, zero, [](Vec2 p) { return p.x; }) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("Neumann limit gives the sigma mean") {
    auto d = gen_cantor_complement(1);
    auto s = attach_sigma(d, SigmaRule::ComponentUniform);
    auto m = std::make_shared<const Mesh>(triangulate(d, s, 1.0 / 16.0));
    auto f = nodal_data(*m, [](Vec2 p) { return std::sin(3.0 * p.x) + p.y * p.y; });
    double mean = 0.0;
    for (auto v : m->boundary_vertices) mean += f[v] * m->sigma_weights[v];
    mean /= m->total_sigma();
    auto u = solve_robin(assemble(m, CoefficientField::identity(), 1e-6), f);
    for (double v : u.values) CHECK(std::abs(v - mean) <= 1e-4);
}

TEST_CASE("Dirichlet baseline with a harmonic polynomial") {
    auto exact = [](Vec2 p) { return p.x * p.x - p.y * p.y; };
    std::vector<double> err;
    for (double h : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
        auto m = square_mesh(h);
        auto u = solve_dirichlet(*m, CoefficientField::identity(), nodal_data(*m, exact));
        double lo = 1e9, hi = -1e9;
        for (auto v : m->boundary_vertices) {
            double g = exact(m->vertices[v]);
            lo = std::min(lo, g);
            hi = std::max(hi, g);
            CHECK(u.values[v] == doctest::Approx(g));
        }
        for (double v : u.values) {
            CHECK(v >= lo - 1e-9);
            CHECK(v <= hi + 1e-9);
        }
        err.push_back(l2_error(*m, u.values, exact));
    }
    // Either superconvergent (nodally exact) or second order.
    for (std::size_t i = 1; i < err.size(); ++i) CHECK((err[i] < 1e-9 || err[i - 1] / err[i] >= 3.5));
}

TEST_CASE("maximum principle and monotonicity") {
    auto d = gen_cantor_complement(2);
    auto m = std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, SigmaRule::ComponentUniform), 1.0 / 16.0));
    for (double a : {0.1, 10.0}) {
        auto sys = assemble(m, CoefficientField::identity(), a);
        auto f1 = noise(*m, 11);
        auto f2 = f1;
        for (auto& v : f2) v += 0.3;
        auto u1 = solve_robin(sys, f1), u2 = solve_robin(sys, f2);
        double lo = 1e9, hi = -1e9;
        for (auto v : m->boundary_vertices) {
            lo = std::min(lo, f1[v]);
            hi = std::max(hi, f1[v]);
        }
        double eps = 10.0 * std::max(u1.residual_norm, 1e-12);
        for (std::size_t v = 0; v < u1.values.size(); ++v) {
            CHECK(u1.values[v] >= lo - eps);
            CHECK(u1.values[v] <= hi + eps);
            CHECK(u1.values[v] <= u2.values[v] + 1e-9);
        }
    }
}

TEST_CASE("Dirichlet limit as a grows") {
    auto m = square_mesh(1.0 / 16.0);
    auto f = nodal_data(*m, [](Vec2 p) { return std::cos(2.0 * p.x) * p.y; });
    auto ud = solve_dirichlet(*m, CoefficientField::identity(), f);
    double prev = 1e9;
    for (double a : {1.0, 1e2, 1e4, 1e6}) {
        auto u = solve_robin(assemble(m, CoefficientField::identity(), a), f);
        double dev = 0.0;
        for (std::size_t v = 0; v < f.size(); ++v) dev = std::max(dev, std::abs(u.values[v] - ud.values[v]));
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("adjoint solve represents point values") {
    auto d = gen_koch_snowflake(2);
    auto m = std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, SigmaRule::EdgeScaled), 1.0 / 27.0));
    Vec2 X{0.5, 0.31};
    for (const auto& coeff : {CoefficientField::identity(), CoefficientField::constant({2.0, 0.7, -0.7, 1.0})}) {
        auto sys = assemble(m, coeff, 2.0);
        auto z = adjoint_solve(sys, X);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto f = noise(*m, seed);
            double direct = evaluate(*m, solve_robin(sys, f).values, X);
            CHECK(sigma_pair(*m, z.z, f) == doctest::Approx(direct).epsilon(1e-8));
        }
    }
}

TEST_CASE("point functional is barycentric") {
    auto m = square_mesh(0.25);
    auto pf = point_functional(*m, {0.3, 0.6});
    double sum = 0.0;
    Vec2 q{0, 0};
    for (auto [v, w] : pf) {
        sum += w;
        q = q + m->vertices[v] * w;
    }
    CHECK(sum == doctest::Approx(1.0));
    CHECK(distance(q, {0.3, 0.6}) < 1e-12);
    CHECK_THROWS_AS(point_functional(*m, {2.0, 2.0}), Error);
}

TEST_CASE("Green function: sign, symmetry and unit mass") {
    auto m = square_mesh(1.0 / 16.0);
    const double a = 5.0;
    auto sys = assemble(m, CoefficientField::identity(), a);
    Vec2 x{0.25, 0.375}, y{0.6875, 0.625};
    auto gx = green_column(sys, x), gy = green_column(sys, y);
    for (double v : gy.values) CHECK(v >= -1e-10);
    auto ix = nearest_vertex(*m, x), iy = nearest_vertex(*m, y);
    REQUIRE(distance(m->vertices[ix], x) < 1e-12);
    CHECK(gy.values[ix] == doctest::Approx(gx.values[iy]).epsilon(1e-8));
    Eigen::Map<const Eigen::VectorXd> G(gy.values.data(), static_cast<Eigen::Index>(gy.values.size()));
    Eigen::VectorXd btg = sys.B.transpose() * G;
    CHECK(a * btg.sum() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("oscillation of a far-pole Green function decays geometrically") {
    auto m = square_mesh(1.0 / 128.0);
    const double a = 1.0, r = 0.25;
    const Vec2 x0{0.5, 0.0};
    auto sys = assemble(m, CoefficientField::identity(), a);
    auto G = green_column(sys, {0.5, 0.9});
    std::vector<double> osc;
    for (int k = 0; k <= 4; ++k) {
        double rad = r * std::ldexp(1.0, -k);
        // homogeneous phase: a * rad * sigma(B) = 2 a rad^2 stays below 1
        REQUIRE(2.0 * a * rad * rad <= 1.0);
        double lo = 1e300, hi = -1e300;
        for (std::size_t v = 0; v < m->vertices.size(); ++v)
            if (distance(m->vertices[v], x0) <= rad) {
                lo = std::min(lo, G.values[v]);
                hi = std::max(hi, G.values[v]);
            }
        osc.push_back(hi - lo);
    }
    // least-squares slope of log osc against k
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < static_cast<int>(osc.size()); ++k) {
        double yk = std::log(osc[static_cast<std::size_t>(k)]);
        sx += k;
        sy += yk;
        sxx += k * k;
        sxy += k * yk;
    }
    double n = static_cast<double>(osc.size());
    double eta = std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
    CHECK(eta <= 0.95);
    for (std::size_t k = 1; k < osc.size(); ++k) CHECK(osc[k] < osc[k - 1]);
}

TEST_CASE("nonsymmetric systems converge") {
    auto d = gen_cantor_complement(2);
    auto m = std::make_shared<const Mesh>(triangulate(d, attach_sigma(d, SigmaRule::ComponentUniform), 1.0 / 32.0));
    auto sys = assemble(m, CoefficientField::constant({1.0, 0.9, -0.9, 1.0}), 1.0);
    CHECK(!sys.symmetric);
    auto f = noise(*m, 3);
    auto u = solve_robin(sys, f);
    Eigen::Map<const Eigen::VectorXd> U(u.values.data(), static_cast<Eigen::Index>(u.values.size()));
    Eigen::VectorXd rhs(U.size());
    for (Eigen::Index i = 0; i < U.size(); ++i) rhs[i] = sys.m_sigma[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
    CHECK((sys.B * U - rhs).norm() / rhs.norm() <= 1e-9);
}
