#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robinlab/solver.hpp"

namespace rml {

/// Discrete Robin harmonic measure: omega^X(E) = sum_v w_v sigma_v over E.
struct MeasureDensity {
    std::shared_ptr<const Mesh> mesh;
    std::vector<double> w;  // per vertex, zero off the sigma boundary
    Vec2 pole;
    double a = 0.0;
    double total = 0.0;
    double residual_norm = 0.0;
};

MeasureDensity harmonic_measure_density(const RobinSystem& system, Vec2 X, const SolverSettings& settings = {});

// A boundary subset as mesh boundary edges with coverage fractions in (0, 1].
struct WeightedEdge {
    std::uint32_t edge = 0;
    double weight = 1.0;
};
using EdgeSet = std::vector<WeightedEdge>;

EdgeSet ball_edges(const Mesh& mesh, Vec2 center, double r);
EdgeSet all_edges(const Mesh& mesh);
double sigma_of(const Mesh& mesh, const EdgeSet& set);
double omega(const MeasureDensity& density, const EdgeSet& set);
double omega(const MeasureDensity& density, Vec2 center, double r);
// Per-vertex share c_v of sigma_v that belongs to the set, so omega(E) = sum c_v w_v sigma_v.
std::vector<double> vertex_coverage(const Mesh& mesh, const EdgeSet& set);

struct NamedSet {
    std::string id;
    EdgeSet edges;
};

// Delta itself, the sub-ball B(x0, r/4), and splits of Delta into 2, 4 and 8
// consecutive groups of equal sigma mass ordered by angle about x0.
std::vector<NamedSet> e_sets(const Mesh& mesh, Vec2 x0, double r);

// Interior point with distance from x0 in [d, 2d] that lies farthest from the boundary.
Vec2 far_pole(const PolygonalDomain& domain, Vec2 x0, double d);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double rms_residual = 0.0;
    // rms residual relative to the rise |slope| * (x_max - x_min) explained by the fit.
    double rel_residual = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;  // slope -+ 2 standard errors
    std::size_t n = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct RatioRecord {
    double a = 0.0;
    int x0_id = 0;
    Vec2 x0;
    double r = 0.0;
    std::string E_id;
    double sigma_ratio = 0.0;
    double omega_ratio = 0.0;
    double R = 0.0;
    double A_param = 0.0;
    double residual = 0.0;
    double C_pole = 0.0;
    // Sandwich bounds from the density extremes on Delta.
    double w_min = 0.0;
    double w_max = 0.0;
};

struct ScanSummary {
    double max_abs_log_R_small = 0.0;  // records with A_param <= 1
    LineFit small_trend;                // per-ball max |log R| against log A_param
    std::optional<LineFit> gamma;       // log max R against log A_param on (1, 1e3]
    std::size_t small_count = 0;
    std::size_t large_count = 0;
};

struct ScanReport {
    std::vector<RatioRecord> records;
    std::vector<std::string> failures;
    ScanSummary summary;
    std::string domain;
    int generation = 0;
    double mesh_h = 0.0;
    std::vector<double> a_grid;
    std::vector<double> c_poles;
};

struct ScanSetup {
    std::vector<double> a_grid;
    std::vector<double> radii;
    std::vector<Vec2> centers;
    std::vector<double> c_poles{4.0, 10.0};  // pole at distance C r per ball; first entry drives the summary
    SolverSettings solver;
};

ScanReport ratio_scan(const PolygonalDomain& domain, std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff,
                      const ScanSetup& setup);
// Mesh graded toward the centers so the smallest radius spans about eight elements.
struct ScanMeshPlan {
    double target_h = 0.0;
    MeshOptions options;
};
ScanMeshPlan scan_mesh_plan(const PolygonalDomain& domain, const std::vector<Vec2>& centers, double r_min,
                            double target_h, std::size_t max_vertices = 300000);
Mesh scan_mesh(const PolygonalDomain& domain, const BoundaryMeasure& sigma, const std::vector<Vec2>& centers,
               double r_min, double target_h, std::size_t max_vertices = 300000);

ScanSummary summarize(const std::vector<RatioRecord>& records, double c_pole);
LineFit fit_gamma(const std::vector<RatioRecord>& records, double c_pole);
inline LineFit fit_gamma(const ScanReport& report) {
    return fit_gamma(report.records, report.c_poles.empty() ? 0.0 : report.c_poles.front());
}
// max |log R| for records of one a with A_param in [lo, hi].
double max_abs_log_R(const std::vector<RatioRecord>& records, double a, double c_pole, double lo, double hi);
// Largest factor by which R differs between two pole multipliers on small-scale records.
double pole_robustness(const std::vector<RatioRecord>& records, double c1, double c2);

struct AUniformity {
    double a = 0.0;
    double factor = 0.0;
    double base_max = 0.0;    // max |log R| over A_param <= 1 records at a
    double scaled_max = 0.0;  // same records re-matched on A_param at factor * a
    double rel_change = 0.0;
    std::vector<RatioRecord> base;
    std::vector<RatioRecord> scaled;
};

// Balls with A_param <= 1 at a are rerun at factor * a with radii re-solved so
// every ball keeps its A_param; compares the two max |log R| summaries.
AUniformity a_uniformity(const PolygonalDomain& domain, const BoundaryMeasure& sigma, const CoefficientField& coeff,
                         double a, double factor, const std::vector<Vec2>& centers, const std::vector<double>& radii,
                         double c_pole, double target_h, const SolverSettings& settings = {});

// min/max of the values over mesh vertices in B(x0, r), skipping vertices within `exclude` of the pole.
double harnack_ratio(const Mesh& mesh, const std::vector<double>& values, Vec2 x0, double r, Vec2 pole,
                     double exclude);
// Radius with a * sigma(B(x0, r)) = A_param, by bisection.
double radius_for_phase(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0, double a,
                        double A_param);

struct HarnackRecord {
    double a = 0.0;
    double r = 0.0;
    double A_param = 0.0;
    double ratio = 0.0;
    double residual = 0.0;
};

// Green functions with pole at distance c_pole * r from x0, one per a, with r
// matched so every record has the same A_param.
std::vector<HarnackRecord> harnack_scan(const PolygonalDomain& domain, const BoundaryMeasure& sigma,
                                        const CoefficientField& coeff, const std::vector<double>& a_grid, Vec2 x0,
                                        double A_param, double c_pole, double target_h, const SolverSettings& settings = {});

struct DensityRow {
    double a = 0.0;
    double a_sigma = 0.0;  // a * sigma(B(x0, r))
    double m = 0.0;        // min of u over vertices in B(x0, r)
    double residual = 0.0;
};

struct DensityScan {
    std::vector<DensityRow> rows;
    LineFit fit;  // log m against 1 / (a sigma(B))
};

DensityScan density_bound_scan(std::shared_ptr<const Mesh> mesh, const CoefficientField& coeff,
                               const std::vector<double>& a_grid, Vec2 x0, double r, double K,
                               const SolverSettings& settings = {});

// Homogeneous Robin data on the sigma boundary, u = 1 on the carved ball; returns
// the minimum of u over sigma-boundary vertices.
double active_boundary(const RobinSystem& system, const SolverSettings& settings = {});

struct Lorenz {
    std::vector<double> sigma_fraction;
    std::vector<double> measure_fraction;
    double s99 = 0.0;
};

// Pieces with sigma mass and measure mass; sorted by density, cumulative curves.
Lorenz lorenz_curve(const std::vector<double>& sigma_mass, const std::vector<double>& measure_mass);

struct DirichletCompare {
    Lorenz robin;
    Lorenz dirichlet;
    std::size_t groups = 0;
    double robin_residual = 0.0;
};

// Both measures grouped into hat pieces of `group_edges` mesh edges along each
// fractal component, restricted to those components and renormalized.
DirichletCompare dirichlet_compare(const PolygonalDomain& domain, std::shared_ptr<const Mesh> mesh,
                                   const CoefficientField& coeff, double a, Vec2 pole, int group_edges = 8,
                                   const SolverSettings& settings = {});

struct OscillationProfile {
    std::vector<double> radii;
    std::vector<double> osc;
    double eta = 0.0;  // fitted geometric decay ratio per halving
};

OscillationProfile oscillation_decay(const Mesh& mesh, const std::vector<double>& values, Vec2 x0, double r,
                                     int levels);

void write_scan_csv(std::ostream& out, const std::vector<RatioRecord>& records);
std::vector<RatioRecord> read_scan_csv(std::istream& in);
void write_density_csv(std::ostream& out, const MeasureDensity& density);

}  // namespace rml
