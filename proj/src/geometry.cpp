#include "robinlab/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rml {

std::string to_string(Family family) {
    switch (family) {
        case Family::CantorComplement: return "cantor";
        case Family::KochSnowflake: return "koch";
        case Family::Square: return "square";
        case Family::DiskPolygon: return "disk";
    }
    return "unknown";
}

std::string to_string(SigmaRule rule) {
    switch (rule) {
        case SigmaRule::Arclength: return "arclength";
        case SigmaRule::ComponentUniform: return "component_uniform";
        case SigmaRule::EdgeScaled: return "edge_scaled";
    }
    return "unknown";
}

Family family_from_string(const std::string& name) {
    if (name == "cantor") return Family::CantorComplement;
    if (name == "koch") return Family::KochSnowflake;
    if (name == "square") return Family::Square;
    if (name == "disk") return Family::DiskPolygon;
    throw Error(ErrorKind::InvalidArgument, "unknown domain family '" + name + "'");
}

SigmaRule sigma_rule_from_string(const std::string& name) {
    if (name == "arclength") return SigmaRule::Arclength;
    if (name == "component_uniform") return SigmaRule::ComponentUniform;
    if (name == "edge_scaled") return SigmaRule::EdgeScaled;
    throw Error(ErrorKind::InvalidArgument, "unknown sigma rule '" + name + "'");
}

// Uniform bucket grid over edge bounding boxes.
class EdgeIndex {
public:
    EdgeIndex(const std::vector<DomainEdge>& edges, Box bbox) {
        double extent = std::max(bbox.width(), bbox.height());
        double mean_len = 0.0;
        for (const auto& e : edges) mean_len += e.length();
        mean_len /= static_cast<double>(std::max<std::size_t>(edges.size(), 1));
        cell_ = std::max(extent / 512.0, mean_len);
        origin_ = bbox.lo;
        nx_ = std::max(1, static_cast<int>(std::ceil(bbox.width() / cell_)) + 1);
        ny_ = std::max(1, static_cast<int>(std::ceil(bbox.height() / cell_)) + 1);

        std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nx_) * ny_);
        for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
            const auto& e = edges[k];
            auto [i0, j0] = cell_of({std::min(e.a.x, e.b.x), std::min(e.a.y, e.b.y)});
            auto [i1, j1] = cell_of({std::max(e.a.x, e.b.x), std::max(e.a.y, e.b.y)});
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) buckets[index(i, j)].push_back(k);
        }
        start_.resize(buckets.size() + 1, 0);
        for (std::size_t c = 0; c < buckets.size(); ++c) start_[c + 1] = start_[c] + buckets[c].size();
        items_.reserve(start_.back());
        for (auto& b : buckets) items_.insert(items_.end(), b.begin(), b.end());
    }

    std::array<int, 2> cell_of(Vec2 p) const {
        int i = static_cast<int>(std::floor((p.x - origin_.x) / cell_));
        int j = static_cast<int>(std::floor((p.y - origin_.y) / cell_));
        return {std::clamp(i, 0, nx_ - 1), std::clamp(j, 0, ny_ - 1)};
    }

    bool in_grid(Vec2 p) const {
        return p.x >= origin_.x && p.y >= origin_.y && p.x <= origin_.x + nx_ * cell_ &&
               p.y <= origin_.y + ny_ * cell_;
    }

    template <class F>
    void visit_cell(int i, int j, F&& f) const {
        std::size_t c = index(i, j);
        for (std::size_t k = start_[c]; k < start_[c + 1]; ++k) f(items_[k]);
    }

    template <class F>
    void visit_box(Box b, F&& f) const {
        auto [i0, j0] = cell_of(b.lo);
        auto [i1, j1] = cell_of(b.hi);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) visit_cell(i, j, f);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double cell() const { return cell_; }

private:
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ny_ + j; }

    Vec2 origin_;
    double cell_ = 1.0;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<std::size_t> start_;
    std::vector<int> items_;
};

namespace {

double shoelace(const Polyline& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * s;
}

struct SegmentFoot {
    double distance;
    double t;
};

SegmentFoot foot(const DomainEdge& e, Vec2 p) {
    Vec2 d = e.b - e.a;
    double len2 = dot(d, d);
    double t = len2 > 0.0 ? std::clamp(dot(p - e.a, d) / len2, 0.0, 1.0) : 0.0;
    return {distance(p, e.a + d * t), t};
}

double diameter_of(const std::vector<Vec2>& pts) {
    // Boundaries here have at most a few thousand vertices per component set.
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::max(best, distance(pts[i], pts[j]));
    return best;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    if (pts.size() < 3) return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

PolygonalDomain::PolygonalDomain(std::vector<Polyline> components, Family family, int generation,
                                 double lattice_pitch, double base_scale)
    : components_(std::move(components)),
      family_(family),
      generation_(generation),
      lattice_pitch_(lattice_pitch),
      base_scale_(base_scale) {
    if (components_.empty()) throw Error(ErrorKind::InvalidArgument, "domain without boundary");
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const auto& poly = components_[c];
        if (poly.size() < 3) throw Error(ErrorKind::InvalidArgument, "component with fewer than 3 vertices");
        double a = shoelace(poly);
        if ((c == 0 && a <= 0.0) || (c > 0 && a >= 0.0))
            throw Error(ErrorKind::InvalidArgument,
                        "component " + std::to_string(c) + " has the wrong orientation");
        offsets_.push_back(static_cast<int>(edges_.size()));
        for (std::size_t i = 0; i < poly.size(); ++i)
            edges_.push_back({poly[i], poly[(i + 1) % poly.size()], static_cast<int>(c)});
    }
    offsets_.push_back(static_cast<int>(edges_.size()));

    bbox_ = {components_[0][0], components_[0][0]};
    for (const auto& poly : components_)
        for (Vec2 p : poly) {
            bbox_.lo = {std::min(bbox_.lo.x, p.x), std::min(bbox_.lo.y, p.y)};
            bbox_.hi = {std::max(bbox_.hi.x, p.x), std::max(bbox_.hi.y, p.y)};
        }
    index_ = std::make_shared<EdgeIndex>(edges_, bbox_);
}

int PolygonalDomain::next_edge(int edge) const {
    int c = edges_[edge].component;
    int n = offsets_[c + 1] - offsets_[c];
    return offsets_[c] + (edge - offsets_[c] + 1) % n;
}

int PolygonalDomain::prev_edge(int edge) const {
    int c = edges_[edge].component;
    int n = offsets_[c + 1] - offsets_[c];
    return offsets_[c] + (edge - offsets_[c] + n - 1) % n;
}

double PolygonalDomain::perimeter() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.length();
    return s;
}

double PolygonalDomain::area() const {
    double s = 0.0;
    for (const auto& poly : components_) s += shoelace(poly);
    return s;
}

double PolygonalDomain::diameter() const { return diameter_of(convex_hull(components_[0])); }

std::vector<int> PolygonalDomain::fractal_components() const {
    std::vector<int> out;
    if (family_ == Family::CantorComplement) {
        for (std::size_t c = 1; c < components_.size(); ++c) out.push_back(static_cast<int>(c));
    } else {
        for (std::size_t c = 0; c < components_.size(); ++c) out.push_back(static_cast<int>(c));
    }
    return out;
}

double PolygonalDomain::fractal_diameter() const {
    std::vector<Vec2> pts;
    for (int c : fractal_components()) pts.insert(pts.end(), components_[c].begin(), components_[c].end());
    return diameter_of(convex_hull(std::move(pts)));
}

double PolygonalDomain::scale_window_min() const {
    if (family_ == Family::CantorComplement || family_ == Family::KochSnowflake) return lattice_pitch_;
    return 0.0;
}

NearestEdge PolygonalDomain::nearest(Vec2 p, double cutoff) const {
    NearestEdge best;
    best.distance = cutoff;
    auto consider = [&](int k) {
        SegmentFoot f = foot(edges_[k], p);
        if (f.distance < best.distance || (f.distance == best.distance && best.edge >= 0 && k < best.edge)) {
            best.distance = f.distance;
            best.edge = k;
            best.t = f.t;
        }
    };

    if (index_->in_grid(p)) {
        auto [ci, cj] = index_->cell_of(p);
        int max_ring = std::max(index_->nx(), index_->ny());
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (ring >= 1 && (ring - 1) * index_->cell() > best.distance) break;
            for (int i = ci - ring; i <= ci + ring; ++i) {
                if (i < 0 || i >= index_->nx()) continue;
                bool edge_row = (i == ci - ring || i == ci + ring);
                for (int j = cj - ring; j <= cj + ring; ++j) {
                    if (j < 0 || j >= index_->ny()) continue;
                    if (!edge_row && j != cj - ring && j != cj + ring) continue;
                    index_->visit_cell(i, j, consider);
                }
            }
        }
    } else {
        for (int k = 0; k < static_cast<int>(edges_.size()); ++k) consider(k);
    }

    if (best.edge < 0) return best;  // nothing within cutoff

    const double vertex_tol = 1e-12;
    int e_in = -1;
    int e_out = -1;
    if (best.t <= vertex_tol) {
        e_in = prev_edge(best.edge);
        e_out = best.edge;
    } else if (best.t >= 1.0 - vertex_tol) {
        e_in = best.edge;
        e_out = next_edge(best.edge);
    }
    auto left_of = [&](int k) {
        const auto& e = edges_[k];
        return cross(e.b - e.a, p - e.a) > 0.0;
    };
    if (e_in < 0) {
        best.inside = left_of(best.edge);
    } else {
        const auto& a = edges_[e_in];
        const auto& b = edges_[e_out];
        bool convex = cross(a.b - a.a, b.b - b.a) > 0.0;
        best.inside = convex ? (left_of(e_in) && left_of(e_out)) : (left_of(e_in) || left_of(e_out));
    }
    if (best.distance == 0.0) best.inside = false;
    return best;
}

double PolygonalDomain::signed_distance(Vec2 p, double cutoff) const {
    NearestEdge n = nearest(p, cutoff);
    if (n.edge < 0) {
        // Farther than cutoff from every edge; decide the side by a full query.
        return contains(p) ? cutoff : -cutoff;
    }
    return n.inside ? n.distance : -n.distance;
}

bool PolygonalDomain::contains(Vec2 p) const {
    NearestEdge n = nearest(p);
    return n.inside;
}

Vec2 PolygonalDomain::point_at(BoundaryPoint bp) const {
    const auto& e = edges_.at(bp.edge);
    return e.a + (e.b - e.a) * bp.t;
}

std::vector<int> PolygonalDomain::edges_near(Box box) const {
    std::vector<int> out;
    index_->visit_box(box, [&](int k) {
        const auto& e = edges_[k];
        if (std::max(e.a.x, e.b.x) < box.lo.x || std::min(e.a.x, e.b.x) > box.hi.x) return;
        if (std::max(e.a.y, e.b.y) < box.lo.y || std::min(e.a.y, e.b.y) > box.hi.y) return;
        out.push_back(k);
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

PolygonalDomain PolygonalDomain::scaled(double lambda) const {
    std::vector<Polyline> comps = components_;
    for (auto& poly : comps)
        for (auto& p : poly) p = p * lambda;
    return PolygonalDomain(std::move(comps), family_, generation_, lattice_pitch_ * lambda,
                           base_scale_ * lambda);
}

std::uint64_t PolygonalDomain::content_hash() const {
    Hasher h;
    h.str(to_string(family_));
    h.u64(static_cast<std::uint64_t>(generation_));
    h.f64(lattice_pitch_);
    h.f64(base_scale_);
    for (const auto& poly : components_) {
        h.u64(poly.size());
        for (Vec2 p : poly) {
            h.f64(p.x);
            h.f64(p.y);
        }
    }
    return h.value();
}

PolygonalDomain gen_cantor_complement(int generation, double outer_radius, double base_scale) {
    if (generation < 0) throw Error(ErrorKind::InvalidArgument, "negative generation");
    if (generation > 8) throw Error(ErrorKind::InvalidArgument, "Cantor generation > 8 exceeds the mesh budget");
    const double L = base_scale;
    if (outer_radius < 2.0 * L)
        throw Error(ErrorKind::InvalidArgument, "outer_radius must be at least 2 * base_scale");
    double halves = outer_radius / (0.5 * L);
    if (std::abs(halves - std::round(halves)) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "outer_radius must be a multiple of base_scale / 2");

    // Squares in units of L * 4^-g, lower-left corner + side.
    long side0 = 1;
    for (int k = 0; k < generation; ++k) side0 *= 4;
    std::vector<std::array<long, 3>> squares{{0, 0, side0}};
    for (int k = 0; k < generation; ++k) {
        std::vector<std::array<long, 3>> next;
        next.reserve(squares.size() * 4);
        for (auto [x, y, s] : squares) {
            long c = s / 4;
            long far = s - c;
            next.push_back({x, y, c});
            next.push_back({x + far, y, c});
            next.push_back({x, y + far, c});
            next.push_back({x + far, y + far, c});
        }
        squares = std::move(next);
    }

    const double unit = L / static_cast<double>(side0);
    const double c = 0.5 * L;
    std::vector<Polyline> comps;
    comps.push_back({{c - outer_radius, c - outer_radius},
                     {c + outer_radius, c - outer_radius},
                     {c + outer_radius, c + outer_radius},
                     {c - outer_radius, c + outer_radius}});
    for (auto [x, y, s] : squares) {
        double x0 = x * unit, y0 = y * unit, w = s * unit;
        comps.push_back({{x0, y0}, {x0, y0 + w}, {x0 + w, y0 + w}, {x0 + w, y0}});
    }
    return PolygonalDomain(std::move(comps), Family::CantorComplement, generation, unit, L);
}

PolygonalDomain gen_koch_snowflake(int generation, double base_scale) {
    if (generation < 0) throw Error(ErrorKind::InvalidArgument, "negative generation");
    if (generation > 6) throw Error(ErrorKind::InvalidArgument, "Koch generation > 6 exceeds the mesh budget");
    // Directions are multiples of 60 degrees; the curve is traced on the
    // triangular lattice spanned by (1,0) and (1/2, sqrt(3)/2).
    std::vector<int> dirs{0, 2, 4};
    for (int k = 0; k < generation; ++k) {
        std::vector<int> next;
        next.reserve(dirs.size() * 4);
        for (int d : dirs) {
            next.push_back(d);
            next.push_back((d + 5) % 6);
            next.push_back((d + 1) % 6);
            next.push_back(d);
        }
        dirs = std::move(next);
    }
    static constexpr int step[6][2] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};
    const double pitch = base_scale / std::pow(3.0, generation);
    const double h = std::sqrt(3.0) / 2.0;
    Polyline poly;
    poly.reserve(dirs.size());
    long i = 0, j = 0;
    for (int d : dirs) {
        poly.push_back({(static_cast<double>(i) + 0.5 * static_cast<double>(j)) * pitch,
                        h * static_cast<double>(j) * pitch});
        i += step[d][0];
        j += step[d][1];
    }
    return PolygonalDomain({std::move(poly)}, Family::KochSnowflake, generation, pitch, base_scale);
}

PolygonalDomain gen_reference(Family kind, int n_edges) {
    if (kind == Family::Square) {
        return PolygonalDomain({{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}, Family::Square, 0, 1.0, 1.0);
    }
    if (kind == Family::DiskPolygon) {
        if (n_edges < 3) throw Error(ErrorKind::InvalidArgument, "disk polygon needs at least 3 edges");
        Polyline poly;
        for (int k = 0; k < n_edges; ++k) {
            double t = 2.0 * std::numbers::pi * k / n_edges;
            poly.push_back({std::cos(t), std::sin(t)});
        }
        double edge = 2.0 * std::sin(std::numbers::pi / n_edges);
        return PolygonalDomain({std::move(poly)}, Family::DiskPolygon, 0, edge, 1.0);
    }
    throw Error(ErrorKind::InvalidArgument, "gen_reference supports Square and DiskPolygon only");
}

BoundaryMeasure attach_sigma(const PolygonalDomain& domain, SigmaRule rule) {
    BoundaryMeasure sigma;
    sigma.rule = rule;
    const auto& edges = domain.edges();
    sigma.density.assign(edges.size(), 1.0);
    const int g = domain.generation();

    switch (rule) {
        case SigmaRule::Arclength:
            sigma.dimension_d = 1.0;
            break;
        case SigmaRule::ComponentUniform: {
            if (domain.family() != Family::CantorComplement)
                throw Error(ErrorKind::IncompatibleRule, "ComponentUniform applies to Cantor complements only");
            const double curve_mass = std::pow(4.0, -g);
            for (std::size_t c = 1; c < domain.components().size(); ++c) {
                double len = 0.0;
                for (int k = domain.edge_offset(static_cast<int>(c)); k < domain.edge_offset(static_cast<int>(c) + 1); ++k)
                    len += edges[k].length();
                for (int k = domain.edge_offset(static_cast<int>(c)); k < domain.edge_offset(static_cast<int>(c) + 1); ++k)
                    sigma.density[k] = curve_mass / len;
            }
            sigma.dimension_d = 1.0;
            break;
        }
        case SigmaRule::EdgeScaled: {
            if (domain.family() != Family::KochSnowflake)
                throw Error(ErrorKind::IncompatibleRule, "EdgeScaled applies to Koch snowflakes only");
            const double edge_mass = std::pow(4.0, -g);
            for (std::size_t k = 0; k < edges.size(); ++k) sigma.density[k] = edge_mass / edges[k].length();
            sigma.dimension_d = std::log(4.0) / std::log(3.0);
            break;
        }
    }
    for (std::size_t k = 0; k < edges.size(); ++k) sigma.total_mass += sigma.density[k] * edges[k].length();
    return sigma;
}

double clip_fraction(Vec2 a, Vec2 b, Vec2 c, double r) {
    Vec2 d = b - a;
    Vec2 f = a - c;
    double A = dot(d, d);
    if (A == 0.0) return 0.0;
    double B = 2.0 * dot(f, d);
    double C = dot(f, f) - r * r;
    double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0) return 0.0;
    double sq = std::sqrt(disc);
    double t0 = (-B - sq) / (2.0 * A);
    double t1 = (-B + sq) / (2.0 * A);
    double lo = std::max(t0, 0.0);
    double hi = std::min(t1, 1.0);
    return hi > lo ? hi - lo : 0.0;
}

double sigma_ball_mass(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0, double r) {
    double mass = 0.0;
    for (int k : domain.edges_near({{x0.x - r, x0.y - r}, {x0.x + r, x0.y + r}})) {
        const auto& e = domain.edges()[k];
        mass += sigma.density[k] * e.length() * clip_fraction(e.a, e.b, x0, r);
    }
    return mass;
}

BoundaryBall ball_trace(const PolygonalDomain& domain, const BoundaryMeasure& sigma, Vec2 x0, double r) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "ball radius must be positive");
    BoundaryBall ball;
    ball.center = x0;
    ball.radius = r;
    for (int k : domain.edges_near({{x0.x - r, x0.y - r}, {x0.x + r, x0.y + r}})) {
        const auto& e = domain.edges()[k];
        if (distance(e.midpoint(), x0) < r) ball.edge_set.push_back(k);
        ball.sigma_mass += sigma.density[k] * e.length() * clip_fraction(e.a, e.b, x0, r);
    }
    return ball;
}

double van_der_corput(std::uint64_t index) {
    double result = 0.0;
    double f = 0.5;
    while (index > 0) {
        if (index & 1u) result += f;
        index >>= 1;
        f *= 0.5;
    }
    return result;
}

std::vector<BoundaryPoint> sample_centers(const PolygonalDomain& domain, int n_centers) {
    std::vector<int> edge_ids;
    std::vector<double> cumulative{0.0};
    for (int c : domain.fractal_components())
        for (int k = domain.edge_offset(c); k < domain.edge_offset(c + 1); ++k) {
            edge_ids.push_back(k);
            cumulative.push_back(cumulative.back() + domain.edges()[k].length());
        }
    std::vector<BoundaryPoint> out;
    for (int i = 0; i < n_centers; ++i) {
        // A ternary offset keeps samples off the dyadic lattice, where the
        // prefractals put their corners.
        double u = van_der_corput(static_cast<std::uint64_t>(i) + 1) + 1.0 / (3.0 * n_centers);
        double s = (u - std::floor(u)) * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
        std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()) - 1, edge_ids.size() - 1);
        double len = cumulative[idx + 1] - cumulative[idx];
        out.push_back({edge_ids[idx], std::clamp((s - cumulative[idx]) / len, 0.0, 1.0)});
    }
    return out;
}

std::vector<double> scale_ladder(const PolygonalDomain& domain, int scales_per_center) {
    const double r_max = domain.fractal_diameter() / 10.0;
    const double r_min = domain.scale_window_min();
    std::vector<double> out;
    for (int k = 0; k < scales_per_center; ++k) {
        double r = r_max * std::ldexp(1.0, -k);
        if (r < r_min) break;
        out.push_back(r);
    }
    return out;
}

RegularityReport check_ahlfors(const PolygonalDomain& domain, const BoundaryMeasure& sigma, int n_centers,
                               int scales_per_center) {
    RegularityReport rep;
    const auto centers = sample_centers(domain, n_centers);
    const auto scales = scale_ladder(domain, scales_per_center);
    if (scales.size() < 2) throw Error(ErrorKind::InsufficientData, "fewer than two scales in the regularity window");
    rep.r_max = scales.front();
    rep.r_min = scales.back();
    rep.lower_const = std::numeric_limits<double>::infinity();
    rep.upper_const = 0.0;

    double sxy = 0.0, sxx = 0.0;
    for (const auto& bp : centers) {
        Vec2 q = domain.point_at(bp);
        std::vector<double> xs, ys;
        for (double r : scales) {
            double m = sigma_ball_mass(domain, sigma, q, r);
            double m2 = sigma_ball_mass(domain, sigma, q, 2.0 * r);
            double ratio = m / std::pow(r, sigma.dimension_d);
            rep.lower_const = std::min(rep.lower_const, ratio);
            rep.upper_const = std::max(rep.upper_const, ratio);
            rep.doubling_const = std::max(rep.doubling_const, m2 / m);
            xs.push_back(std::log(r));
            ys.push_back(std::log(m));
            ++rep.samples;
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            mx += xs[k];
            my += ys[k];
        }
        mx /= static_cast<double>(xs.size());
        my /= static_cast<double>(ys.size());
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sxy += (xs[k] - mx) * (ys[k] - my);
            sxx += (xs[k] - mx) * (xs[k] - mx);
        }
    }
    rep.estimated_d = sxy / sxx;
    return rep;
}

Vec2 corkscrew_point(const PolygonalDomain& domain, Vec2 x0, double r) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "corkscrew radius must be positive");
    constexpr int fine = 64;
    constexpr int block = 4;  // fine points per coarse block side
    const double step = r / fine;
    // Signed distance is 1-Lipschitz: a coarse sample bounds every fine point of its
    // block, so blocks that cannot beat the incumbent are skipped without changing
    // the maximizer of the exhaustive fine search.
    struct Best {
        double value = -std::numeric_limits<double>::infinity();
        int i = 0, j = 0;
        bool found = false;
    } best;
    auto offer = [&](int i, int j) {
        if (i * i + j * j >= fine * fine) return;
        Vec2 p{x0.x + i * step, x0.y + j * step};
        double d = domain.signed_distance(p, r);
        if (d <= 0.0) return;
        bool better = d > best.value ||
                      (d == best.value && (i < best.i || (i == best.i && j < best.j)));
        if (better) best = {d, i, j, true};
    };

    struct Block {
        double bound;
        int i0, j0;
    };
    std::vector<Block> blocks;
    const double half_diag = std::sqrt(2.0) * (block / 2.0) * step;
    for (int bi = -fine; bi <= fine; bi += block)
        for (int bj = -fine; bj <= fine; bj += block) {
            Vec2 c{x0.x + (bi + block / 2.0) * step, x0.y + (bj + block / 2.0) * step};
            double d = domain.signed_distance(c, 2.0 * r);
            blocks.push_back({d + half_diag, bi, bj});
        }
    std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
        return a.bound > b.bound || (a.bound == b.bound && (a.i0 < b.i0 || (a.i0 == b.i0 && a.j0 < b.j0)));
    });
    for (const auto& b : blocks) {
        if (best.found && b.bound < best.value) break;
        if (b.bound <= 0.0) break;
        for (int i = b.i0; i < b.i0 + block && i <= fine; ++i)
            for (int j = b.j0; j < b.j0 + block && j <= fine; ++j) offer(i, j);
    }
    if (!best.found)
        throw Error(ErrorKind::PointOutside, "no interior grid point in B(x0, r)");
    return {x0.x + best.i * step, x0.y + best.j * step};
}

RegularityReport check_corkscrew(const PolygonalDomain& domain, int n_centers, int scales_per_center) {
    RegularityReport rep;
    const auto centers = sample_centers(domain, n_centers);
    const auto scales = scale_ladder(domain, scales_per_center);
    if (scales.empty()) throw Error(ErrorKind::InsufficientData, "empty scale window");
    rep.r_max = scales.front();
    rep.r_min = scales.back();
    double worst = 1.0;
    for (const auto& bp : centers) {
        Vec2 q = domain.point_at(bp);
        for (double r : scales) {
            Vec2 p = corkscrew_point(domain, q, r);
            worst = std::max(worst, r / domain.distance_to_boundary(p));
            ++rep.samples;
        }
    }
    rep.corkscrew_M = worst;
    return rep;
}

void write_domain(std::ostream& out, const PolygonalDomain& domain) {
    out << "RMLDOM 1\n";
    out << std::setprecision(17);
    out << "# family " << to_string(domain.family()) << " generation " << domain.generation()
        << " lattice_pitch " << domain.lattice_pitch() << " base_scale " << domain.base_scale() << "\n";
    for (std::size_t c = 0; c < domain.components().size(); ++c) {
        const auto& poly = domain.components()[c];
        out << (c == 0 ? "outer" : "hole") << ' ' << poly.size();
        for (Vec2 p : poly) out << ' ' << p.x << ' ' << p.y;
        out << '\n';
    }
}

PolygonalDomain read_domain(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "RMLDOM 1")
        throw Error(ErrorKind::Io, "missing RMLDOM 1 header");
    Family family = Family::Square;
    int generation = 0;
    double pitch = 1.0, base = 1.0;
    std::vector<Polyline> comps;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "#") {
            std::string key;
            while (ls >> key) {
                if (key == "family") {
                    std::string name;
                    ls >> name;
                    family = family_from_string(name);
                } else if (key == "generation") {
                    ls >> generation;
                } else if (key == "lattice_pitch") {
                    ls >> pitch;
                } else if (key == "base_scale") {
                    ls >> base;
                }
            }
            continue;
        }
        if (kind != "outer" && kind != "hole") throw Error(ErrorKind::Io, "unknown component kind '" + kind + "'");
        if ((kind == "outer") != comps.empty()) throw Error(ErrorKind::Io, "outer component must come first");
        std::size_t n = 0;
        ls >> n;
        Polyline poly(n);
        for (auto& p : poly) ls >> p.x >> p.y;
        if (!ls) throw Error(ErrorKind::Io, "truncated component line");
        comps.push_back(std::move(poly));
    }
    return PolygonalDomain(std::move(comps), family, generation, pitch, base);
}

void write_sigma(std::ostream& out, const BoundaryMeasure& sigma) {
    out << "RMLSIG 1\n" << std::setprecision(17);
    out << "# rule " << to_string(sigma.rule) << " dimension_d " << sigma.dimension_d << " total_mass "
        << sigma.total_mass << "\n";
    for (std::size_t k = 0; k < sigma.density.size(); ++k) out << k << ' ' << sigma.density[k] << '\n';
}

BoundaryMeasure read_sigma(std::istream& in, const PolygonalDomain& domain) {
    std::string line;
    if (!std::getline(in, line) || line != "RMLSIG 1") throw Error(ErrorKind::Io, "missing RMLSIG 1 header");
    BoundaryMeasure sigma;
    sigma.density.assign(domain.edges().size(), 0.0);
    std::vector<bool> seen(domain.edges().size(), false);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash;
            while (ls >> key) {
                if (key == "rule") {
                    std::string name;
                    ls >> name;
                    sigma.rule = sigma_rule_from_string(name);
                } else if (key == "dimension_d") {
                    ls >> sigma.dimension_d;
                } else if (key == "total_mass") {
                    double ignored;
                    ls >> ignored;
                }
            }
            continue;
        }
        std::size_t id = 0;
        double dens = 0.0;
        ls >> id >> dens;
        if (!ls || id >= sigma.density.size()) throw Error(ErrorKind::Io, "bad sigma line: " + line);
        if (!(dens > 0.0)) throw Error(ErrorKind::Io, "sigma density must be positive");
        sigma.density[id] = dens;
        seen[id] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw Error(ErrorKind::Io, "sigma file does not cover every edge");
    for (std::size_t k = 0; k < sigma.density.size(); ++k)
        sigma.total_mass += sigma.density[k] * domain.edges()[k].length();
    return sigma;
}

}  // namespace rml
