#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "robinlab/geometry.hpp"

namespace rml {

struct MeshBoundaryEdge {
    std::uint32_t v0 = 0;
    std::uint32_t v1 = 0;
    int parent = -1;  // domain edge id; -1 for a constrained (carved) edge
    double sigma_mass = 0.0;
};

struct CarveDisk {
    Vec2 center;
    double radius = 0.0;
};

struct MeshOptions {
    double h_max = 0.0;  // coarsest element size; 0 picks a family default
    double grading = 0.5;  // element size allowed per unit distance from refinement targets
    std::vector<Vec2> focus_points;
    double focus_h = 0.0;
    std::vector<CarveDisk> carve;
    std::size_t max_vertices = 300000;
};

class TriangleLocator;

struct Location {
    std::uint32_t triangle = 0;
    std::array<double, 3> bary{};
};

/// Conforming nonobtuse triangulation whose boundary edges tile the domain
/// boundary exactly. Vertices carved out by MeshOptions::carve form a separate
/// constrained boundary that carries no sigma mass.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<std::uint32_t> boundary_vertices;     // sorted, sigma-carrying
    std::vector<MeshBoundaryEdge> boundary_edges;
    std::vector<std::uint32_t> constrained_vertices;  // sorted
    std::vector<double> sigma_weights;                // per vertex, zero off the boundary
    double h = 0.0;
    std::size_t hole_count = 0;

    std::size_t vertex_count() const { return vertices.size(); }
    double total_sigma() const;
    double area() const;
    double max_angle_degrees() const;
    // Smallest edge length of the triangles touching the sigma boundary.
    double boundary_h() const;
    std::vector<char> boundary_mask() const;
    std::vector<char> constrained_mask() const;

    Location locate(Vec2 p) const;
    void build_locator();

    std::shared_ptr<const TriangleLocator> locator;
};

Mesh triangulate(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h,
                 const MeshOptions& options = {});
Mesh refine(const Mesh& mesh, std::size_t max_vertices = 300000);
inline Location locate(const Mesh& mesh, Vec2 p) { return mesh.locate(p); }

void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

// Cached triangulation keyed by (domain hash, target_h, options, sigma). The
// cache directory comes from $ROBINLAB_CACHE_DIR when `dir` is empty; with no
// directory at all the mesh is simply built.
Mesh cached_triangulate(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h,
                        const MeshOptions& options = {}, const std::filesystem::path& dir = {});

}  // namespace rml
