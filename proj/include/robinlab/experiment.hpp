#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "robinlab/walker.hpp"

namespace rml {

enum class Experiment {
    Oracle,
    RatioScan,
    HarnackScan,
    DensityScan,
    ActiveBoundary,
    DirichletCompare,
    MonteCarloCheck,
    Regularity,
};

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

SigmaRule default_sigma_rule(Family family);

struct DomainSpec {
    Family family = Family::Square;
    int generation = 0;
    double base_scale = 1.0;
    double outer_radius = 2.0;  // Cantor only
    int edges = 0;              // disk polygon; 0 means the default 256-gon (oracle: refined with the mesh)

    bool operator==(const DomainSpec&) const = default;
};

struct CoeffSpec {
    CoeffKind kind = CoeffKind::Identity;
    std::array<double, 4> matrix{1.0, 0.0, 0.0, 1.0};   // a11 a12 a21 a22
    std::array<double, 4> matrix2{1.0, 0.0, 0.0, 1.0};  // second checkerboard phase
    double scale = 0.25;
    double amplitude = 0.5;
    double frequency = 10.0;

    bool operator==(const CoeffSpec&) const = default;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::Oracle;
    DomainSpec domain;
    std::optional<SigmaRule> sigma;  // family default when absent
    CoeffSpec coefficient;
    std::vector<double> a_grid{1.0};
    double target_h = 1.0 / 16.0;
    int refinements = 0;
    // Scan geometry.
    int centers = 4;
    std::vector<double> radii;  // empty: diam/10 * 2^-k for k < scales
    int scales = 8;
    std::vector<double> c_pole{4.0, 10.0};
    std::optional<Vec2> x0;    // default: first sample center
    double r = 0.1;
    double A_param = 1e-2;
    std::optional<Vec2> pole;  // Dirichlet compare; default: center of the fractal part
    std::optional<std::array<double, 3>> ball;  // carved ball (x, y, radius)
    int group_edges = 8;
    // Walks.
    std::uint64_t seed = 1;
    std::uint64_t n_walks = 100000;
    int repetitions = 1;
    std::string output_dir = "out";

    bool operator==(const ExperimentConfig&) const = default;
};

// Unknown keys, wrong types and nonpositive numeric fields raise ConfigInvalid.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json_string(const ExperimentConfig& config, int indent = 2);
void validate(const ExperimentConfig& config);
// Hash of the canonical serialization.
std::string config_hash(const ExperimentConfig& config);

PolygonalDomain make_domain(const DomainSpec& spec);
CoefficientField make_coefficient(const CoeffSpec& spec);

struct ExperimentReport {
    ExperimentConfig config;
    std::string hash;
    std::string status = "ok";  // "ok" or "error"
    std::vector<std::string> csv;
    std::vector<std::string> svg;
    double wall_seconds = 0.0;
    std::size_t solves = 0;
    double max_residual = 0.0;
    std::map<std::string, double> metrics;
    std::map<std::string, bool> checks;
    std::vector<std::string> errors;
};

// Runs the experiment into `<output_dir>.partial` and renames it to output_dir
// once report.json is written. Experiment failures (NoConvergence, SizeExceeded,
// ...) end up in the report with status "error"; configuration problems throw.
ExperimentReport run(const ExperimentConfig& config);

std::string report_json(const ExperimentReport& report);
ExperimentReport read_report(const std::filesystem::path& dir);

// Redraws the SVG figures of a report directory from its CSV files; returns the paths written.
std::vector<std::string> regenerate_figures(const std::filesystem::path& dir);

// Temp-file-then-rename write.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace rml
