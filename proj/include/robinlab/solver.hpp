#pragma once

#include <Eigen/SparseCore>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "robinlab/mesh.hpp"

namespace rml {

struct Mat2 {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
};

enum class CoeffKind { Identity, ConstantMatrix, Checkerboard, RadialOscillatory };

std::string to_string(CoeffKind kind);
CoeffKind coeff_kind_from_string(const std::string& name);

/// Bounded measurable, uniformly elliptic coefficient matrix A(x), possibly nonsymmetric.
class CoefficientField {
public:
    static CoefficientField identity();
    static CoefficientField constant(Mat2 m);
    // A1 on cells floor(x/s)+floor(y/s) even, A2 on the others.
    static CoefficientField checkerboard(double scale, Mat2 a1, Mat2 a2);
    // (1 + amplitude sin(frequency |x|)) I, requires |amplitude| < 1.
    static CoefficientField radial_oscillatory(double amplitude, double frequency);

    Mat2 at(Vec2 x) const;
    CoeffKind kind() const { return kind_; }
    bool symmetric() const;
    // A(x) is a positive multiple of the identity everywhere.
    bool scalar() const;
    double lambda() const { return lambda_; }
    double Lambda() const { return Lambda_; }

    double scale() const { return scale_; }
    Mat2 first() const { return m1_; }
    Mat2 second() const { return m2_; }
    double amplitude() const { return amplitude_; }
    double frequency() const { return frequency_; }

private:
    CoefficientField() = default;
    void set_bounds(std::initializer_list<Mat2> ms);

    CoeffKind kind_ = CoeffKind::Identity;
    Mat2 m1_{}, m2_{};
    double scale_ = 1.0;
    double amplitude_ = 0.0;
    double frequency_ = 0.0;
    double lambda_ = 1.0;
    double Lambda_ = 1.0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// B = K/a + M_sigma on the vertex space of a mesh. Constrained (carved)
/// vertices of the mesh are treated as Dirichlet nodes by every solve.
struct RobinSystem {
    std::shared_ptr<const Mesh> mesh;
    CoefficientField coeff = CoefficientField::identity();
    double a = 1.0;
    SparseMatrix K;
    SparseMatrix B;
    SparseMatrix Bt;  // transpose, filled only for nonsymmetric A
    std::vector<double> m_sigma;
    bool symmetric = true;

    const SparseMatrix& adjoint() const { return symmetric ? B : Bt; }
};

// A solve is accepted when residual_norm (|b - Bu| / |b|) or the normwise
// backward error (inf-norms, |b - Bu| / (|B| |u| + |b|)) is within tolerance.
struct Solution {
    std::vector<double> values;
    double residual_norm = 0.0;
    double backward_error = 0.0;
    int iterations = 0;
    double a = 0.0;
    std::string description;
};

struct SolverSettings {
    double tolerance = 1e-10;
    double iteration_factor = 20.0;  // max iterations = factor * sqrt(unknowns)
};

RobinSystem assemble(std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff, double a);
RobinSystem assemble(const Mesh& mesh, const CoefficientField& coeff, double a);
SparseMatrix stiffness(const Mesh& mesh, const CoefficientField& coeff);

// Per-vertex data from a function; off-boundary entries are ignored by the solves.
std::vector<double> nodal_data(const Mesh& mesh, const std::function<double(Vec2)>& f);

// Solves B u = M_sigma f. Constrained vertices take the values in `constrained`
// (zero when empty, otherwise one value per vertex).
Solution solve_robin(const RobinSystem& system, const std::vector<double>& f,
                     const std::vector<double>& constrained = {}, const SolverSettings& settings = {});

// Finite element Dirichlet problem K u = 0 with u = g on every boundary vertex.
Solution solve_dirichlet(const Mesh& mesh, const CoefficientField& coeff, const std::vector<double>& g,
                         const SolverSettings& settings = {});

// Weights over boundary vertices so that u(X) = sum_v r_v g_v for the Dirichlet
// solve with data g; one adjoint solve.
std::vector<double> dirichlet_representer(const Mesh& mesh, const CoefficientField& coeff, Vec2 X,
                                          const SolverSettings& settings = {});

// Barycentric evaluation functional at X as sparse (vertex, weight) pairs.
std::vector<std::pair<std::uint32_t, double>> point_functional(const Mesh& mesh, Vec2 X);
double evaluate(const Mesh& mesh, const std::vector<double>& values, Vec2 X);

struct AdjointSolve {
    std::vector<double> z;  // B^-T e_X
    double residual_norm = 0.0;
    double backward_error = 0.0;
    int iterations = 0;
};

AdjointSolve adjoint_solve(const RobinSystem& system, Vec2 X, const SolverSettings& settings = {});

// G_R(., y) = B^-T e_y / a.
Solution green_column(const RobinSystem& system, Vec2 y, const SolverSettings& settings = {});

// L2 norm over the mesh of (u_h - exact), exact interpolated at vertices and
// integrated with the P1 mass matrix.
double l2_error(const Mesh& mesh, const std::vector<double>& values, const std::function<double(Vec2)>& exact);

struct OracleRow {
    int n_edges = 0;
    double h = 0.0;
    std::size_t vertices = 0;
    double l2_error = 0.0;
    double ratio = 0.0;  // previous error / this error, 0 on the first row
    double residual = 0.0;
};

// Robin problem on the regular n-gon inscribed in the unit disk, A = I, a = 1,
// f = cos(theta); exact solution (r/2) cos(theta). With n_edges = 0 the polygon
// is refined with the mesh (n = 4/h), otherwise it stays fixed.
std::vector<OracleRow> disk_oracle(const std::vector<double>& h_list, int n_edges = 0,
                                   const SolverSettings& settings = {});

void write_solution_csv(std::ostream& out, const Mesh& mesh, const Solution& solution);

}  // namespace rml
