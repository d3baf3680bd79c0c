#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robinlab/common.hpp"

namespace rml {

enum class Family { CantorComplement, KochSnowflake, Square, DiskPolygon };
enum class SigmaRule { Arclength, ComponentUniform, EdgeScaled };

std::string to_string(Family family);
std::string to_string(SigmaRule rule);
Family family_from_string(const std::string& name);
SigmaRule sigma_rule_from_string(const std::string& name);

using Polyline = std::vector<Vec2>;

struct DomainEdge {
    Vec2 a;
    Vec2 b;
    int component = 0;

    double length() const { return distance(a, b); }
    Vec2 midpoint() const { return (a + b) * 0.5; }
};

// A point of the boundary given by edge id and the affine parameter along it.
struct BoundaryPoint {
    int edge = 0;
    double t = 0.0;
};

struct NearestEdge {
    double distance = std::numeric_limits<double>::infinity();
    int edge = -1;
    double t = 0.0;
    bool inside = false;
};

class EdgeIndex;

/// A bounded planar region: component 0 is the outer boundary (counterclockwise),
/// the remaining components are holes (clockwise). The region lies to the left
/// of every edge.
class PolygonalDomain {
public:
    PolygonalDomain(std::vector<Polyline> components, Family family, int generation,
                    double lattice_pitch, double base_scale);

    const std::vector<Polyline>& components() const { return components_; }
    Family family() const { return family_; }
    int generation() const { return generation_; }
    double lattice_pitch() const { return lattice_pitch_; }
    double base_scale() const { return base_scale_; }
    std::size_t hole_count() const { return components_.size() - 1; }

    const std::vector<DomainEdge>& edges() const { return edges_; }
    int edge_offset(int component) const { return offsets_[component]; }
    int next_edge(int edge) const;
    int prev_edge(int edge) const;

    double perimeter() const;
    double area() const;
    double diameter() const;
    Box bounding_box() const { return bbox_; }

    // Components that carry the rough part of the boundary: the holes of a Cantor
    // complement, every component otherwise.
    std::vector<int> fractal_components() const;
    double fractal_diameter() const;
    // Lower end of the scale window on which fractal regularity is meaningful.
    double scale_window_min() const;

    bool contains(Vec2 p) const;
    NearestEdge nearest(Vec2 p, double cutoff = std::numeric_limits<double>::infinity()) const;
    // Positive inside the open region, negative outside, saturated at +-cutoff.
    double signed_distance(Vec2 p, double cutoff = std::numeric_limits<double>::infinity()) const;
    double distance_to_boundary(Vec2 p) const { return nearest(p).distance; }

    Vec2 point_at(BoundaryPoint bp) const;
    // Edges whose axis-aligned bounding box meets the given box.
    std::vector<int> edges_near(Box box) const;

    PolygonalDomain scaled(double lambda) const;
    std::uint64_t content_hash() const;

private:
    std::vector<Polyline> components_;
    Family family_;
    int generation_;
    double lattice_pitch_;
    double base_scale_;
    std::vector<DomainEdge> edges_;
    std::vector<int> offsets_;
    Box bbox_;
    std::shared_ptr<const EdgeIndex> index_;
};

PolygonalDomain gen_cantor_complement(int generation, double outer_radius = 2.0,
                                      double base_scale = 1.0);
PolygonalDomain gen_koch_snowflake(int generation, double base_scale = 1.0);
PolygonalDomain gen_reference(Family kind, int n_edges = 0);

/// The boundary measure sigma, stored as a constant density per domain edge.
struct BoundaryMeasure {
    std::vector<double> density;
    double total_mass = 0.0;
    double dimension_d = 1.0;
    SigmaRule rule = SigmaRule::Arclength;

    double edge_mass(const PolygonalDomain& domain, int edge) const {
        return density[edge] * domain.edges()[edge].length();
    }
};

BoundaryMeasure attach_sigma(const PolygonalDomain& domain, SigmaRule rule);

// Fraction of the segment [a,b] lying in the open disk B(c, r).
double clip_fraction(Vec2 a, Vec2 b, Vec2 c, double r);

struct BoundaryBall {
    Vec2 center;
    double radius = 0.0;
    std::vector<int> edge_set;  // edges whose midpoint lies strictly inside
    double sigma_mass = 0.0;    // exact clipped mass
};

BoundaryBall ball_trace(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0,
                        double r);
double sigma_ball_mass(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0,
                       double r);

struct RegularityReport {
    double estimated_d = 0.0;
    double lower_const = 0.0;
    double upper_const = 0.0;
    double doubling_const = 1.0;
    std::optional<double> corkscrew_M;
    std::size_t samples = 0;
    double r_min = 0.0;
    double r_max = 0.0;
};

// van der Corput radical inverse in base 2.
double van_der_corput(std::uint64_t index);
// Deterministic boundary sample points spread over the fractal components.
std::vector<BoundaryPoint> sample_centers(const PolygonalDomain& domain, int n_centers);
// Geometric ladder r_k = diam/10 * 2^-k restricted to the regularity window.
std::vector<double> scale_ladder(const PolygonalDomain& domain, int scales_per_center);

RegularityReport check_ahlfors(const PolygonalDomain& domain, const BoundaryMeasure& sigma,
                               int n_centers, int scales_per_center);
RegularityReport check_corkscrew(const PolygonalDomain& domain, int n_centers,
                                 int scales_per_center);
/// Interior point of B(x0, r) maximizing the distance to the boundary, found by
/// exhaustive search of the grid x0 + (r/64) Z^2.
Vec2 corkscrew_point(const PolygonalDomain& domain, Vec2 x0, double r);

void write_domain(std::ostream& out, const PolygonalDomain& domain);
PolygonalDomain read_domain(std::istream& in);
void write_sigma(std::ostream& out, const BoundaryMeasure& sigma);
BoundaryMeasure read_sigma(std::istream& in, const PolygonalDomain& domain);

}  // namespace rml
