#include "robinlab/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>

namespace rml {

std::string to_string(CoeffKind kind) {
    switch (kind) {
        case CoeffKind::Identity: return "identity";
        case CoeffKind::ConstantMatrix: return "constant";
        case CoeffKind::Checkerboard: return "checkerboard";
        case CoeffKind::RadialOscillatory: return "radial_oscillatory";
    }
    return "?";
}

CoeffKind coeff_kind_from_string(const std::string& name) {
    if (name == "identity") return CoeffKind::Identity;
    if (name == "constant") return CoeffKind::ConstantMatrix;
    if (name == "checkerboard") return CoeffKind::Checkerboard;
    if (name == "radial_oscillatory") return CoeffKind::RadialOscillatory;
    throw Error(ErrorKind::InvalidArgument, "unknown coefficient kind '" + name + "'");
}

namespace {

// Eigenvalues of the symmetric part, ascending.
std::pair<double, double> sym_eigs(Mat2 m) {
    double p = m.a11, q = 0.5 * (m.a12 + m.a21), r = m.a22;
    double mean = 0.5 * (p + r);
    double rad = std::hypot(0.5 * (p - r), q);
    return {mean - rad, mean + rad};
}

bool is_sym(Mat2 m) { return std::abs(m.a12 - m.a21) <= 1e-12 * (std::abs(m.a11) + std::abs(m.a22)); }
bool is_scalar(Mat2 m) { return m.a12 == 0.0 && m.a21 == 0.0 && m.a11 == m.a22 && m.a11 > 0.0; }

}  // namespace

void CoefficientField::set_bounds(std::initializer_list<Mat2> ms) {
    lambda_ = std::numeric_limits<double>::infinity();
    Lambda_ = 0.0;
    for (Mat2 m : ms) {
        if (!std::isfinite(m.a11) || !std::isfinite(m.a12) || !std::isfinite(m.a21) || !std::isfinite(m.a22))
            throw Error(ErrorKind::InvalidArgument, "coefficient entries must be finite");
        auto [lo, hi] = sym_eigs(m);
        lambda_ = std::min(lambda_, lo);
        Lambda_ = std::max(Lambda_, hi);
    }
    if (!(lambda_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "coefficient matrix is not uniformly elliptic");
}

CoefficientField CoefficientField::identity() {
    CoefficientField c;
    c.kind_ = CoeffKind::Identity;
    return c;
}

CoefficientField CoefficientField::constant(Mat2 m) {
    CoefficientField c;
    c.kind_ = CoeffKind::ConstantMatrix;
    c.m1_ = c.m2_ = m;
    c.set_bounds({m});
    return c;
}

CoefficientField CoefficientField::checkerboard(double scale, Mat2 a1, Mat2 a2) {
    if (!(scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "checkerboard scale must be positive");
    CoefficientField c;
    c.kind_ = CoeffKind::Checkerboard;
    c.scale_ = scale;
    c.m1_ = a1;
    c.m2_ = a2;
    c.set_bounds({a1, a2});
    return c;
}

CoefficientField CoefficientField::radial_oscillatory(double amplitude, double frequency) {
    if (!(std::abs(amplitude) < 1.0) || !std::isfinite(frequency))
        throw Error(ErrorKind::InvalidArgument, "radial oscillation needs |amplitude| < 1");
    CoefficientField c;
    c.kind_ = CoeffKind::RadialOscillatory;
    c.amplitude_ = amplitude;
    c.frequency_ = frequency;
    c.lambda_ = 1.0 - std::abs(amplitude);
    c.Lambda_ = 1.0 + std::abs(amplitude);
    return c;
}

Mat2 CoefficientField::at(Vec2 x) const {
    switch (kind_) {
        case CoeffKind::Identity: return {};
        case CoeffKind::ConstantMatrix: return m1_;
        case CoeffKind::Checkerboard: {
            auto i = static_cast<long long>(std::floor(x.x / scale_));
            auto j = static_cast<long long>(std::floor(x.y / scale_));
            return ((i + j) % 2 == 0) ? m1_ : m2_;
        }
        case CoeffKind::RadialOscillatory: {
            double s = 1.0 + amplitude_ * std::sin(frequency_ * norm(x));
            return {s, 0.0, 0.0, s};
        }
    }
    return {};
}

bool CoefficientField::symmetric() const {
    switch (kind_) {
        case CoeffKind::ConstantMatrix: return is_sym(m1_);
        case CoeffKind::Checkerboard: return is_sym(m1_) && is_sym(m2_);
        default: return true;
    }
}

bool CoefficientField::scalar() const {
    switch (kind_) {
        case CoeffKind::ConstantMatrix: return is_scalar(m1_);
        case CoeffKind::Checkerboard: return is_scalar(m1_) && is_scalar(m2_);
        default: return true;
    }
}

SparseMatrix stiffness(const Mesh& mesh, const CoefficientField& coeff) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        Vec2 p[3] = {mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]};
        double area2 = cross(p[1] - p[0], p[2] - p[0]);
        if (!(area2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "degenerate or clockwise triangle");
        Vec2 grad[3];
        for (int i = 0; i < 3; ++i) {
            Vec2 pj = p[(i + 1) % 3], pk = p[(i + 2) % 3];
            grad[i] = {(pj.y - pk.y) / area2, (pk.x - pj.x) / area2};
        }
        Mat2 A = coeff.at((p[0] + p[1] + p[2]) * (1.0 / 3.0));
        double area = 0.5 * area2;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(t[i], t[j], area * dot(A.apply(grad[j]), grad[i]));
    }
    SparseMatrix K(static_cast<Eigen::Index>(mesh.vertices.size()), static_cast<Eigen::Index>(mesh.vertices.size()));
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    return K;
}

RobinSystem assemble(std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorKind::InvalidArgument, "Robin parameter a must be positive");
    RobinSystem sys;
    sys.mesh = std::move(mesh);
    sys.coeff = coeff;
    sys.a = a;
    sys.symmetric = coeff.symmetric();
    sys.K = stiffness(*sys.mesh, coeff);
    sys.m_sigma = sys.mesh->sigma_weights;
    SparseMatrix M(sys.K.rows(), sys.K.cols());
    std::vector<Eigen::Triplet<double>> diag;
    for (std::uint32_t v : sys.mesh->boundary_vertices) diag.emplace_back(v, v, sys.m_sigma[v]);
    M.setFromTriplets(diag.begin(), diag.end());
    sys.B = sys.K / a + M;
    sys.B.makeCompressed();
    if (!sys.symmetric) {
        sys.Bt = sys.B.transpose();
        sys.Bt.makeCompressed();
    }
    return sys;
}

RobinSystem assemble(const Mesh& mesh, const CoefficientField& coeff, double a) {
    return assemble(std::make_shared<const Mesh>(mesh), coeff, a);
}

std::vector<double> nodal_data(const Mesh& mesh, const std::function<double(Vec2)>& f) {
    std::vector<double> out(mesh.vertices.size());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = f(mesh.vertices[v]);
    return out;
}

namespace {

// Jacobi plus an additive correction on the constant vector. Near the Neumann
// limit the constant mode of B is nearly singular and plain Jacobi stalls on it.
class CoarseJacobi {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = typename SparseMatrix::StorageIndex;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    CoarseJacobi() = default;
    template <class M>
    explicit CoarseJacobi(const M& m) {
        compute(m);
    }
    template <class M>
    CoarseJacobi& analyzePattern(const M&) {
        return *this;
    }
    template <class M>
    CoarseJacobi& factorize(const M& m) {
        inv_diag_.resize(m.rows());
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            double d = m.coeff(i, i);
            inv_diag_[i] = d != 0.0 ? 1.0 / d : 1.0;
        }
        double total = 0.0;
        for (Eigen::Index k = 0; k < m.outerSize(); ++k)
            for (typename M::InnerIterator it(m, k); it; ++it) total += it.value();
        inv_total_ = total > 0.0 ? 1.0 / total : 0.0;
        return *this;
    }
    template <class M>
    CoarseJacobi& compute(const M& m) {
        return factorize(m);
    }
    template <class R>
    Eigen::VectorXd solve(const R& b) const {
        Eigen::VectorXd z = inv_diag_.cwiseProduct(b);
        z.array() += b.sum() * inv_total_;
        return z;
    }
    Eigen::ComputationInfo info() { return Eigen::Success; }

private:
    Eigen::VectorXd inv_diag_;
    double inv_total_ = 0.0;
};

struct LinearResult {
    Eigen::VectorXd x;
    double residual = 0.0;
    double backward_error = 0.0;
    int iterations = 0;
};

std::string fmt_sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

template <class Solver>
LinearResult run_iterative(Solver& solver, const SparseMatrix& A, const Eigen::VectorXd& b, const SolverSettings& s) {
    LinearResult r;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        r.x = Eigen::VectorXd::Zero(b.size());
        return r;
    }
    const auto max_iter = static_cast<Eigen::Index>(
        std::ceil(s.iteration_factor * std::sqrt(static_cast<double>(std::max<Eigen::Index>(b.size(), 1)))));
    solver.setTolerance(s.tolerance);
    solver.setMaxIterations(max_iter);
    solver.compute(A);
    r.x = solver.solve(b);
    r.iterations = static_cast<int>(solver.iterations());
    // Near the Neumann limit |B| |u| dwarfs |b| and the relative residual has a
    // rounding floor above the tolerance; the normwise backward error does not.
    double a_inf = 0.0;
    for (Eigen::Index i = 0; i < A.outerSize(); ++i) {
        double row = 0.0;
        for (SparseMatrix::InnerIterator it(A, i); it; ++it) row += std::abs(it.value());
        a_inf = std::max(a_inf, row);
    }
    auto measure = [&] {
        Eigen::VectorXd res = b - A * r.x;
        r.residual = res.norm() / bnorm;
        r.backward_error = res.lpNorm<Eigen::Infinity>() /
                           (a_inf * r.x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>());
    };
    measure();
    auto converged = [&] { return r.residual <= s.tolerance || r.backward_error <= s.tolerance; };
    // Recurrence residuals drift from true ones; warm restarts close the gap.
    for (int restart = 0; restart < 3 && !converged() && r.iterations < max_iter; ++restart) {
        r.x = solver.solveWithGuess(b, r.x);
        r.iterations += static_cast<int>(solver.iterations());
        measure();
    }
    if (!converged())
        throw Error(ErrorKind::NoConvergence, "linear solve stopped after " + std::to_string(r.iterations) +
                                                  " iterations with relative residual " + fmt_sci(r.residual));
    return r;
}

LinearResult solve_linear(const SparseMatrix& A, const Eigen::VectorXd& b, bool symmetric, const SolverSettings& s) {
    if (symmetric) {
        Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, CoarseJacobi> cg;
        return run_iterative(cg, A, b, s);
    }
    Eigen::BiCGSTAB<SparseMatrix, CoarseJacobi> bicg;
    return run_iterative(bicg, A, b, s);
}

// Solves A x = b with x prescribed on the fixed nodes.
LinearResult solve_fixed(const SparseMatrix& A, const Eigen::VectorXd& b, const std::vector<char>& fixed,
                         const Eigen::VectorXd& x_fixed, bool symmetric, const SolverSettings& s) {
    const auto n = static_cast<std::size_t>(A.rows());
    bool any = false;
    for (char f : fixed) any = any || f;
    if (!any) return solve_linear(A, b, symmetric, s);

    std::vector<Eigen::Index> index(n, -1);
    Eigen::Index m = 0;
    for (std::size_t v = 0; v < n; ++v)
        if (!fixed[v]) index[v] = m++;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(A.nonZeros()));
    Eigen::VectorXd rhs(m);
    for (std::size_t v = 0; v < n; ++v) {
        if (fixed[v]) continue;
        double r = b[static_cast<Eigen::Index>(v)];
        for (SparseMatrix::InnerIterator it(A, static_cast<Eigen::Index>(v)); it; ++it) {
            auto c = static_cast<std::size_t>(it.col());
            if (fixed[c])
                r -= it.value() * x_fixed[it.col()];
            else
                trips.emplace_back(index[v], index[c], it.value());
        }
        rhs[index[v]] = r;
    }
    SparseMatrix sub(m, m);
    sub.setFromTriplets(trips.begin(), trips.end());
    LinearResult red = m > 0 ? solve_linear(sub, rhs, symmetric, s) : LinearResult{Eigen::VectorXd(0), 0.0, 0};
    LinearResult out;
    out.x = x_fixed;
    for (std::size_t v = 0; v < n; ++v)
        if (!fixed[v]) out.x[static_cast<Eigen::Index>(v)] = red.x[index[v]];
    out.residual = red.residual;
    out.backward_error = red.backward_error;
    out.iterations = red.iterations;
    return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be finite");
}

}  // namespace

Solution solve_robin(const RobinSystem& system, const std::vector<double>& f, const std::vector<double>& constrained,
                     const SolverSettings& settings) {
    const Mesh& mesh = *system.mesh;
    const std::size_t n = mesh.vertices.size();
    if (f.size() != n) throw Error(ErrorKind::InvalidArgument, "boundary data must have one value per vertex");
    if (!constrained.empty() && constrained.size() != n)
        throw Error(ErrorKind::InvalidArgument, "constrained values must have one value per vertex");
    check_finite(f, "boundary data");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::uint32_t v : mesh.boundary_vertices) rhs[v] = system.m_sigma[v] * f[v];
    Eigen::VectorXd fixed_values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (!constrained.empty())
        for (std::uint32_t v : mesh.constrained_vertices) fixed_values[v] = constrained[v];
    auto r = solve_fixed(system.B, rhs, mesh.constrained_mask(), fixed_values, system.symmetric, settings);
    return {to_std(r.x), r.residual, r.backward_error, r.iterations, system.a, "robin"};
}

Solution solve_dirichlet(const Mesh& mesh, const CoefficientField& coeff, const std::vector<double>& g,
                         const SolverSettings& settings) {
    const std::size_t n = mesh.vertices.size();
    if (g.size() != n) throw Error(ErrorKind::InvalidArgument, "boundary data must have one value per vertex");
    check_finite(g, "boundary data");
    SparseMatrix K = stiffness(mesh, coeff);
    std::vector<char> fixed = mesh.boundary_mask();
    for (auto v : mesh.constrained_vertices) fixed[v] = 1;
    Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v)
        if (fixed[v]) values[static_cast<Eigen::Index>(v)] = g[v];
    auto r = solve_fixed(K, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), fixed, values, coeff.symmetric(), settings);
    return {to_std(r.x), r.residual, r.backward_error, r.iterations, std::numeric_limits<double>::infinity(), "dirichlet"};
}

std::vector<std::pair<std::uint32_t, double>> point_functional(const Mesh& mesh, Vec2 X) {
    Location loc = mesh.locate(X);
    std::vector<std::pair<std::uint32_t, double>> out;
    for (int k = 0; k < 3; ++k)
        if (loc.bary[k] != 0.0) out.emplace_back(mesh.triangles[loc.triangle][k], loc.bary[k]);
    return out;
}

double evaluate(const Mesh& mesh, const std::vector<double>& values, Vec2 X) {
    double s = 0.0;
    for (auto [v, w] : point_functional(mesh, X)) s += w * values[v];
    return s;
}

std::vector<double> dirichlet_representer(const Mesh& mesh, const CoefficientField& coeff, Vec2 X,
                                          const SolverSettings& settings) {
    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    SparseMatrix K = stiffness(mesh, coeff);
    SparseMatrix Kt = K.transpose();
    std::vector<char> fixed = mesh.boundary_mask();
    for (auto v : mesh.constrained_vertices) fixed[v] = 1;
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(n);
    for (auto [v, w] : point_functional(mesh, X)) ell[v] += w;
    auto r = solve_fixed(Kt, ell, fixed, Eigen::VectorXd::Zero(n), coeff.symmetric(), settings);
    Eigen::VectorXd ktz = Kt * r.x;
    std::vector<double> rep(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index v = 0; v < n; ++v)
        if (fixed[static_cast<std::size_t>(v)]) rep[static_cast<std::size_t>(v)] = ell[v] - ktz[v];
    return rep;
}

AdjointSolve adjoint_solve(const RobinSystem& system, Vec2 X, const SolverSettings& settings) {
    const Mesh& mesh = *system.mesh;
    const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(n);
    for (auto [v, w] : point_functional(mesh, X)) ell[v] += w;
    auto fixed = mesh.constrained_mask();
    // The functional's share on Dirichlet nodes does not see the Robin data.
    for (Eigen::Index v = 0; v < n; ++v)
        if (fixed[static_cast<std::size_t>(v)]) ell[v] = 0.0;
    auto r = solve_fixed(system.adjoint(), ell, fixed, Eigen::VectorXd::Zero(n), system.symmetric, settings);
    return {to_std(r.x), r.residual, r.backward_error, r.iterations};
}

Solution green_column(const RobinSystem& system, Vec2 y, const SolverSettings& settings) {
    AdjointSolve s = adjoint_solve(system, y, settings);
    for (double& v : s.z) v /= system.a;
    return {std::move(s.z), s.residual_norm, s.backward_error, s.iterations, system.a, "green"};
}

void write_solution_csv(std::ostream& out, const Mesh& mesh, const Solution& solution) {
    out << "vertex,x,y,value\n" << std::setprecision(17);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        out << v << ',' << mesh.vertices[v].x << ',' << mesh.vertices[v].y << ',' << solution.values[v] << '\n';
}

double l2_error(const Mesh& mesh, const std::vector<double>& values, const std::function<double(Vec2)>& exact) {
    double sum = 0.0;
    for (const auto& t : mesh.triangles) {
        double e[3];
        for (int k = 0; k < 3; ++k) e[k] = values[t[k]] - exact(mesh.vertices[t[k]]);
        const Vec2 p0 = mesh.vertices[t[0]];
        const double area = 0.5 * std::abs(cross(mesh.vertices[t[1]] - p0, mesh.vertices[t[2]] - p0));
        sum += area / 6.0 * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[0] * e[1] + e[1] * e[2] + e[0] * e[2]);
    }
    return std::sqrt(sum);
}

std::vector<OracleRow> disk_oracle(const std::vector<double>& h_list, int n_edges, const SolverSettings& settings) {
    std::vector<OracleRow> rows;
    for (double h : h_list) {
        if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "oracle mesh sizes must be positive");
        OracleRow row;
        row.h = h;
        row.n_edges = n_edges > 0 ? n_edges : static_cast<int>(std::lround(4.0 / h));
        auto domain = gen_reference(Family::DiskPolygon, row.n_edges);
        auto sigma = attach_sigma(domain, SigmaRule::Arclength);
        auto mesh = std::make_shared<const Mesh>(triangulate(domain, sigma, h));
        auto sys = assemble(mesh, CoefficientField::identity(), 1.0);
        auto f = nodal_data(*mesh, [](Vec2 p) {
            double r = norm(p);
            return r > 0.0 ? p.x / r : 0.0;
        });
        Solution u = solve_robin(sys, f, {}, settings);
        row.vertices = mesh->vertex_count();
        row.l2_error = l2_error(*mesh, u.values, [](Vec2 p) { return 0.5 * p.x; });
        row.residual = u.residual_norm;
        if (!rows.empty()) row.ratio = rows.back().l2_error / row.l2_error;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rml
