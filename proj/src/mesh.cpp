#include "robinlab/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace rml {

Mesh refine(const Mesh& mesh, std::size_t max_vertices);

class TriangleLocator {
public:
    explicit TriangleLocator(const Mesh& mesh) {
        box_ = {mesh.vertices.front(), mesh.vertices.front()};
        for (Vec2 p : mesh.vertices) {
            box_.lo = {std::min(box_.lo.x, p.x), std::min(box_.lo.y, p.y)};
            box_.hi = {std::max(box_.hi.x, p.x), std::max(box_.hi.y, p.y)};
        }
        double cells = std::max(1.0, std::sqrt(static_cast<double>(mesh.triangles.size()) / 2.0));
        n_ = std::clamp(static_cast<int>(cells), 1, 2048);
        cw_ = std::max(box_.width(), 1e-300) / n_;
        ch_ = std::max(box_.height(), 1e-300) / n_;
        std::vector<std::vector<std::uint32_t>> buckets(static_cast<std::size_t>(n_) * n_);
        for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
            Box b = tri_box(mesh, t);
            auto [i0, j0] = cell(b.lo);
            auto [i1, j1] = cell(b.hi);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) buckets[static_cast<std::size_t>(i) * n_ + j].push_back(t);
        }
        start_.assign(buckets.size() + 1, 0);
        for (std::size_t c = 0; c < buckets.size(); ++c) start_[c + 1] = start_[c] + buckets[c].size();
        for (auto& b : buckets) items_.insert(items_.end(), b.begin(), b.end());
    }

    Location locate(const Mesh& mesh, Vec2 p) const {
        const double tol = 1e-12;
        if (p.x < box_.lo.x - tol || p.y < box_.lo.y - tol || p.x > box_.hi.x + tol || p.y > box_.hi.y + tol)
            throw Error(ErrorKind::PointOutside, "point outside the mesh bounding box");
        auto [i, j] = cell(p);
        std::size_t c = static_cast<std::size_t>(i) * n_ + j;
        double best_min = -std::numeric_limits<double>::infinity();
        Location best;
        for (std::size_t k = start_[c]; k < start_[c + 1]; ++k) {
            std::uint32_t t = items_[k];
            const auto& tri = mesh.triangles[t];
            Vec2 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], q = mesh.vertices[tri[2]];
            double area2 = cross(b - a, q - a);
            std::array<double, 3> l{cross(b - p, q - p) / area2, cross(q - p, a - p) / area2,
                                    cross(a - p, b - p) / area2};
            double m = std::min({l[0], l[1], l[2]});
            if (m > best_min) {
                best_min = m;
                best = {t, l};
            }
        }
        if (best_min < -1e-10) throw Error(ErrorKind::PointOutside, "point is not inside any triangle");
        double s = 0.0;
        for (double& v : best.bary) {
            v = std::clamp(v, 0.0, 1.0);
            s += v;
        }
        for (double& v : best.bary) v /= s;
        return best;
    }

private:
    static Box tri_box(const Mesh& mesh, std::uint32_t t) {
        const auto& tri = mesh.triangles[t];
        Box b{mesh.vertices[tri[0]], mesh.vertices[tri[0]]};
        for (int k = 1; k < 3; ++k) {
            Vec2 p = mesh.vertices[tri[k]];
            b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
            b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
        }
        return b;
    }

    std::array<int, 2> cell(Vec2 p) const {
        int i = static_cast<int>(std::floor((p.x - box_.lo.x) / cw_));
        int j = static_cast<int>(std::floor((p.y - box_.lo.y) / ch_));
        return {std::clamp(i, 0, n_ - 1), std::clamp(j, 0, n_ - 1)};
    }

    Box box_;
    int n_ = 1;
    double cw_ = 1.0, ch_ = 1.0;
    std::vector<std::size_t> start_;
    std::vector<std::uint32_t> items_;
};

double Mesh::total_sigma() const {
    double s = 0.0;
    for (double w : sigma_weights) s += w;
    return s;
}

double Mesh::area() const {
    double s = 0.0;
    for (const auto& t : triangles)
        s += 0.5 * cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]);
    return s;
}

double Mesh::max_angle_degrees() const {
    double worst = 0.0;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            Vec2 p = vertices[t[k]];
            Vec2 u = vertices[t[(k + 1) % 3]] - p;
            Vec2 w = vertices[t[(k + 2) % 3]] - p;
            double c = std::clamp(dot(u, w) / (norm(u) * norm(w)), -1.0, 1.0);
            worst = std::max(worst, std::acos(c) * 180.0 / std::numbers::pi);
        }
    return worst;
}

double Mesh::boundary_h() const {
    double h_min = std::numeric_limits<double>::infinity();
    for (const auto& e : boundary_edges)
        if (e.parent >= 0) h_min = std::min(h_min, distance(vertices[e.v0], vertices[e.v1]));
    return h_min;
}

std::vector<char> Mesh::boundary_mask() const {
    std::vector<char> mask(vertices.size(), 0);
    for (auto v : boundary_vertices) mask[v] = 1;
    return mask;
}

std::vector<char> Mesh::constrained_mask() const {
    std::vector<char> mask(vertices.size(), 0);
    for (auto v : constrained_vertices) mask[v] = 1;
    return mask;
}

Location Mesh::locate(Vec2 p) const {
    if (!locator) throw Error(ErrorKind::InvalidArgument, "mesh locator not built");
    return locator->locate(*this, p);
}

void Mesh::build_locator() { locator = std::make_shared<TriangleLocator>(*this); }

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

void check_budget(std::size_t estimate, std::size_t max_vertices) {
    if (estimate > max_vertices)
        throw Error(ErrorKind::SizeExceeded, "mesh would have about " + std::to_string(estimate) +
                                                 " vertices, budget is " + std::to_string(max_vertices));
}

// Derives boundary edges, parents, sigma weights and verifies the mesh
// invariants that every mesher must satisfy.
void finish_mesh(Mesh& mesh, const PolygonalDomain& domain, const BoundaryMeasure& sigma) {
    std::unordered_map<std::uint64_t, std::pair<int, std::array<std::uint32_t, 2>>> count;
    count.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            auto a = t[k], b = t[(k + 1) % 3];
            auto& slot = count[edge_key(a, b)];
            slot.first += 1;
            slot.second = {a, b};
        }

    const double scale = std::max(domain.bounding_box().width(), domain.bounding_box().height());
    const double tol = 1e-9 * scale;
    mesh.boundary_edges.clear();
    std::vector<char> on_sigma(mesh.vertices.size(), 0), constrained(mesh.vertices.size(), 0);
    std::vector<std::pair<std::uint64_t, std::array<std::uint32_t, 2>>> bnd;
    for (const auto& [key, slot] : count) {
        if (slot.first > 2) throw Error(ErrorKind::InvalidArgument, "non-manifold triangulation");
        if (slot.first == 1) bnd.push_back({key, slot.second});
    }
    std::sort(bnd.begin(), bnd.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

    std::vector<double> child_length(domain.edges().size(), 0.0);
    for (const auto& [key, ends] : bnd) {
        Vec2 a = mesh.vertices[ends[0]], b = mesh.vertices[ends[1]];
        MeshBoundaryEdge e{ends[0], ends[1], -1, 0.0};
        NearestEdge n = domain.nearest((a + b) * 0.5, 10 * tol);
        if (n.edge >= 0) {
            const auto& de = domain.edges()[n.edge];
            auto off_line = [&](Vec2 p) { return std::abs(cross(de.b - de.a, p - de.a)) / de.length(); };
            if (off_line(a) <= tol && off_line(b) <= tol) e.parent = n.edge;
        }
        if (e.parent >= 0) {
            double len = distance(a, b);
            e.sigma_mass = sigma.density[e.parent] * len;
            child_length[e.parent] += len;
            on_sigma[e.v0] = on_sigma[e.v1] = 1;
        } else {
            constrained[e.v0] = constrained[e.v1] = 1;
        }
        mesh.boundary_edges.push_back(e);
    }
    for (std::size_t k = 0; k < child_length.size(); ++k) {
        double len = domain.edges()[k].length();
        if (std::abs(child_length[k] - len) > 1e-12 * std::max(1.0, len) * 16)
            throw Error(ErrorKind::InvalidArgument,
                        "domain edge " + std::to_string(k) + " is not tiled by boundary mesh edges");
    }

    mesh.sigma_weights.assign(mesh.vertices.size(), 0.0);
    for (const auto& e : mesh.boundary_edges) {
        if (e.parent < 0) continue;
        mesh.sigma_weights[e.v0] += 0.5 * e.sigma_mass;
        mesh.sigma_weights[e.v1] += 0.5 * e.sigma_mass;
    }
    mesh.boundary_vertices.clear();
    mesh.constrained_vertices.clear();
    for (std::uint32_t v = 0; v < mesh.vertices.size(); ++v) {
        if (on_sigma[v]) mesh.boundary_vertices.push_back(v);
        if (constrained[v]) mesh.constrained_vertices.push_back(v);
    }

    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            Vec2 p = mesh.vertices[t[k]];
            Vec2 u = mesh.vertices[t[(k + 1) % 3]] - p, w = mesh.vertices[t[(k + 2) % 3]] - p;
            if (dot(u, w) < -1e-9 * norm(u) * norm(w)) {
                double deg = std::acos(std::clamp(dot(u, w) / (norm(u) * norm(w)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
                throw Error(ErrorKind::NonobtuseViolation, "triangle angle " + std::to_string(deg) + " degrees at (" +
                                                               std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
            }
        }
    mesh.build_locator();
}

// ---------------------------------------------------------------------------
// Balanced quadtree mesher for axis-aligned domains (square, Cantor complement).

using CellKey = std::uint64_t;
constexpr std::uint64_t kMask29 = (1ull << 29) - 1;

CellKey cell_key(int level, std::uint64_t i, std::uint64_t j) {
    return (static_cast<std::uint64_t>(level) << 58) | (i << 29) | j;
}
int key_level(CellKey k) { return static_cast<int>(k >> 58); }
std::uint64_t key_i(CellKey k) { return (k >> 29) & kMask29; }
std::uint64_t key_j(CellKey k) { return k & kMask29; }

class RectIndex {
public:
    RectIndex(std::vector<Box> rects, Box root) : rects_(std::move(rects)), root_(root) {
        n_ = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(rects_.size()))) * 2, 1, 512);
        cw_ = root.width() / n_;
        ch_ = root.height() / n_;
        buckets_.resize(static_cast<std::size_t>(n_) * n_);
        for (std::size_t r = 0; r < rects_.size(); ++r) {
            auto [i0, j0] = cell(rects_[r].lo);
            auto [i1, j1] = cell(rects_[r].hi);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(i) * n_ + j].push_back(static_cast<int>(r));
        }
    }

    template <class F>
    bool any(Box b, F&& pred) const {
        auto [i0, j0] = cell(b.lo);
        auto [i1, j1] = cell(b.hi);
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                for (int r : buckets_[static_cast<std::size_t>(i) * n_ + j])
                    if (pred(rects_[r])) return true;
        return false;
    }

private:
    std::array<int, 2> cell(Vec2 p) const {
        int i = static_cast<int>(std::floor((p.x - root_.lo.x) / cw_));
        int j = static_cast<int>(std::floor((p.y - root_.lo.y) / ch_));
        return {std::clamp(i, 0, n_ - 1), std::clamp(j, 0, n_ - 1)};
    }

    std::vector<Box> rects_;
    Box root_;
    int n_ = 1;
    double cw_ = 1.0, ch_ = 1.0;
    std::vector<std::vector<int>> buckets_;
};

double box_distance(Box b, Vec2 p) {
    double dx = std::max({b.lo.x - p.x, 0.0, p.x - b.hi.x});
    double dy = std::max({b.lo.y - p.y, 0.0, p.y - b.hi.y});
    return std::hypot(dx, dy);
}

double box_far_distance(Box b, Vec2 p) {
    double dx = std::max(std::abs(p.x - b.lo.x), std::abs(p.x - b.hi.x));
    double dy = std::max(std::abs(p.y - b.lo.y), std::abs(p.y - b.hi.y));
    return std::hypot(dx, dy);
}

Box rect_of(const Polyline& poly) {
    if (poly.size() != 4) throw Error(ErrorKind::InvalidArgument, "quadtree mesher needs rectangular components");
    Box b{poly[0], poly[0]};
    for (Vec2 p : poly) {
        b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y)};
        b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y)};
    }
    for (Vec2 p : poly)
        if ((p.x != b.lo.x && p.x != b.hi.x) || (p.y != b.lo.y && p.y != b.hi.y))
            throw Error(ErrorKind::InvalidArgument, "quadtree mesher needs axis-aligned rectangles");
    return b;
}

class QuadMesher {
public:
    QuadMesher(const PolygonalDomain& domain, double target_h, const MeshOptions& opt)
        : domain_(domain), opt_(opt), outer_(rect_of(domain.components()[0])) {
        std::vector<Box> holes;
        for (std::size_t c = 1; c < domain.components().size(); ++c) holes.push_back(rect_of(domain.components()[c]));

        // Dyadic root square anchored at the outer lower-left corner; hole and outer
        // coordinates are dyadic multiples of the base scale, so cells align exactly.
        const double L = domain.base_scale();
        double extent = std::max(outer_.width(), outer_.height());
        side_ = L * std::exp2(std::ceil(std::log2(extent / L) - 1e-12));
        root_ = {outer_.lo, {outer_.lo.x + side_, outer_.lo.y + side_}};
        holes_ = std::make_unique<RectIndex>(std::move(holes), root_);

        fine_level_ = level_for(std::min(target_h, domain.lattice_pitch()));
        h_fine_ = side_ * std::ldexp(1.0, -fine_level_);
        double h_max = opt.h_max > 0.0 ? opt.h_max
                       : domain.family() == Family::Square ? h_fine_
                                                           : 0.25 * L;
        max_level_cap_ = level_for(std::max(h_max, h_fine_));
        focus_level_ = opt.focus_h > 0.0 ? level_for(opt.focus_h) : fine_level_;
        hole_rich_ = domain.hole_count() > 0;
    }

    double h_fine() const { return h_fine_; }

    Mesh build(const BoundaryMeasure& sigma) {
        refine_tree();
        balance();
        return emit(sigma);
    }

private:
    int level_for(double h) const {
        int l = 0;
        while (side_ * std::ldexp(1.0, -l) > h * (1.0 + 1e-12) && l < 28) ++l;
        return l;
    }

    Box cell_box(CellKey k) const {
        double s = side_ * std::ldexp(1.0, -key_level(k));
        Vec2 lo{root_.lo.x + static_cast<double>(key_i(k)) * s, root_.lo.y + static_cast<double>(key_j(k)) * s};
        return {lo, {lo.x + s, lo.y + s}};
    }

    bool removed(CellKey k) const {
        Box c = cell_box(k);
        if (c.hi.x <= outer_.lo.x || c.lo.x >= outer_.hi.x || c.hi.y <= outer_.lo.y || c.lo.y >= outer_.hi.y)
            return true;
        if (holes_->any(c, [&](const Box& r) {
                return r.lo.x <= c.lo.x && r.lo.y <= c.lo.y && c.hi.x <= r.hi.x && c.hi.y <= r.hi.y;
            }))
            return true;
        Vec2 mid = (c.lo + c.hi) * 0.5;
        for (const auto& d : opt_.carve)
            if (distance(mid, d.center) < d.radius) return true;
        return false;
    }

    bool needs_split(CellKey k) const {
        int level = key_level(k);
        Box c = cell_box(k);
        double s = c.width();
        // Partially outside the outer rectangle or partially inside a hole.
        bool outside_part = c.lo.x < outer_.lo.x || c.lo.y < outer_.lo.y || c.hi.x > outer_.hi.x || c.hi.y > outer_.hi.y;
        bool inside_outer = c.hi.x > outer_.lo.x && c.lo.x < outer_.hi.x && c.hi.y > outer_.lo.y && c.lo.y < outer_.hi.y;
        if (outside_part && inside_outer) return true;
        if (!inside_outer) return false;
        bool in_hole = holes_->any(c, [&](const Box& r) {
            return r.lo.x <= c.lo.x && r.lo.y <= c.lo.y && c.hi.x <= r.hi.x && c.hi.y <= r.hi.y;
        });
        if (in_hole) return false;
        bool straddle = holes_->any(c, [&](const Box& r) {
            return r.lo.x < c.hi.x && c.lo.x < r.hi.x && r.lo.y < c.hi.y && c.lo.y < r.hi.y;
        });
        if (straddle) return true;
        if (level < max_level_cap_) return true;

        const double reach = s / opt_.grading;
        if (level < fine_level_ && hole_rich_) {
            Box grown{{c.lo.x - reach, c.lo.y - reach}, {c.hi.x + reach, c.hi.y + reach}};
            if (holes_->any(grown, [&](const Box& r) {
                    double dx = std::max({r.lo.x - c.hi.x, 0.0, c.lo.x - r.hi.x});
                    double dy = std::max({r.lo.y - c.hi.y, 0.0, c.lo.y - r.hi.y});
                    return std::hypot(dx, dy) < reach;
                }))
                return true;
        }
        if (level < focus_level_)
            for (Vec2 f : opt_.focus_points)
                if (box_distance(c, f) < reach) return true;
        if (level < fine_level_)
            for (const auto& d : opt_.carve) {
                if (box_far_distance(c, d.center) <= d.radius) continue;  // swallowed by the disk
                double gap = std::max(0.0, box_distance(c, d.center) - d.radius);
                if (gap < reach) return true;
            }
        return false;
    }

    void refine_tree() {
        std::deque<CellKey> work{cell_key(0, 0, 0)};
        while (!work.empty()) {
            CellKey k = work.front();
            work.pop_front();
            if (key_level(k) < 28 && needs_split(k)) {
                split_into(k, work);
            } else {
                leaves_.insert(k);
                check_budget(leaves_.size(), opt_.max_vertices);
            }
        }
    }

    void split_into(CellKey k, std::deque<CellKey>& out) {
        int l = key_level(k) + 1;
        std::uint64_t i = key_i(k) * 2, j = key_j(k) * 2;
        for (std::uint64_t di = 0; di < 2; ++di)
            for (std::uint64_t dj = 0; dj < 2; ++dj) out.push_back(cell_key(l, i + di, j + dj));
    }

    std::optional<CellKey> leaf_containing(int level, std::int64_t i, std::int64_t j) const {
        std::int64_t n = std::int64_t{1} << level;
        if (i < 0 || j < 0 || i >= n || j >= n) return std::nullopt;
        for (int l = level; l >= 0; --l) {
            CellKey k = cell_key(l, static_cast<std::uint64_t>(i >> (level - l)), static_cast<std::uint64_t>(j >> (level - l)));
            if (leaves_.count(k)) return k;
        }
        return std::nullopt;
    }

    // 2:1 balance across cell sides.
    void balance() {
        std::deque<CellKey> work(leaves_.begin(), leaves_.end());
        std::sort(work.begin(), work.end());
        while (!work.empty()) {
            CellKey k = work.front();
            work.pop_front();
            if (!leaves_.count(k)) continue;
            int l = key_level(k);
            auto i = static_cast<std::int64_t>(key_i(k)), j = static_cast<std::int64_t>(key_j(k));
            const std::int64_t nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& q : nb) {
                auto coarse = leaf_containing(l, q[0], q[1]);
                if (!coarse || key_level(*coarse) > l - 2) continue;
                leaves_.erase(*coarse);
                std::deque<CellKey> kids;
                split_into(*coarse, kids);
                for (CellKey c : kids) {
                    leaves_.insert(c);
                    work.push_back(c);
                }
                work.push_back(k);
                check_budget(leaves_.size(), opt_.max_vertices);
            }
        }
    }

    Mesh emit(const BoundaryMeasure& sigma) {
        std::vector<CellKey> kept;
        int deepest = 0;
        for (CellKey k : leaves_)
            if (!removed(k)) {
                kept.push_back(k);
                deepest = std::max(deepest, key_level(k));
            }
        std::sort(kept.begin(), kept.end());
        const int top = deepest + 1;  // integer grid resolves cell centers
        const double unit = side_ * std::ldexp(1.0, -top);

        Mesh mesh;
        std::unordered_map<std::uint64_t, std::uint32_t> ids;
        ids.reserve(kept.size() * 2);
        auto vertex = [&](std::uint64_t I, std::uint64_t J, bool create) -> std::optional<std::uint32_t> {
            std::uint64_t key = (I << 32) | J;
            auto it = ids.find(key);
            if (it != ids.end()) return it->second;
            if (!create) return std::nullopt;
            auto id = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back({root_.lo.x + static_cast<double>(I) * unit, root_.lo.y + static_cast<double>(J) * unit});
            ids.emplace(key, id);
            return id;
        };
        auto corners = [&](CellKey k) {
            std::uint64_t s = std::uint64_t{1} << (top - key_level(k));
            std::uint64_t I = key_i(k) * s, J = key_j(k) * s;
            return std::array<std::uint64_t, 3>{I, J, s};
        };
        for (CellKey k : kept) {
            auto [I, J, s] = corners(k);
            vertex(I, J, true);
            vertex(I + s, J, true);
            vertex(I + s, J + s, true);
            vertex(I, J + s, true);
        }
        check_budget(mesh.vertices.size() + kept.size(), opt_.max_vertices);

        for (CellKey k : kept) {
            auto [I, J, s] = corners(k);
            std::uint64_t hs = s / 2;
            std::uint32_t c00 = *vertex(I, J, false), c10 = *vertex(I + s, J, false);
            std::uint32_t c11 = *vertex(I + s, J + s, false), c01 = *vertex(I, J + s, false);
            auto mb = vertex(I + hs, J, false), mr = vertex(I + s, J + hs, false);
            auto mt = vertex(I + hs, J + s, false), ml = vertex(I, J + hs, false);
            if (!mb && !mr && !mt && !ml) {
                mesh.triangles.push_back({c00, c10, c11});
                mesh.triangles.push_back({c00, c11, c01});
                continue;
            }
            std::uint32_t center = *vertex(I + hs, J + hs, true);
            std::vector<std::uint32_t> ring{c00};
            if (mb) ring.push_back(*mb);
            ring.push_back(c10);
            if (mr) ring.push_back(*mr);
            ring.push_back(c11);
            if (mt) ring.push_back(*mt);
            ring.push_back(c01);
            if (ml) ring.push_back(*ml);
            for (std::size_t q = 0; q < ring.size(); ++q)
                mesh.triangles.push_back({center, ring[q], ring[(q + 1) % ring.size()]});
        }
        check_budget(mesh.vertices.size(), opt_.max_vertices);
        mesh.h = h_fine_;
        mesh.hole_count = domain_.hole_count() + opt_.carve.size();
        finish_mesh(mesh, domain_, sigma);
        return mesh;
    }

    const PolygonalDomain& domain_;
    const MeshOptions& opt_;
    Box outer_;
    Box root_;
    double side_ = 1.0;
    double h_fine_ = 1.0;
    int fine_level_ = 0;
    int max_level_cap_ = 0;
    int focus_level_ = 0;
    bool hole_rich_ = false;
    std::unique_ptr<RectIndex> holes_;
    std::unordered_set<CellKey> leaves_;
};

// ---------------------------------------------------------------------------
// Equilateral lattice mesher for Koch prefractals.

Mesh koch_mesh(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h, const MeshOptions& opt) {
    const int m = std::max(1, static_cast<int>(std::ceil(domain.lattice_pitch() / target_h - 1e-12)));
    const double s = domain.lattice_pitch() / m;
    const double hy = std::sqrt(3.0) / 2.0;
    const double tri_area = hy * s * s / 2.0;
    check_budget(static_cast<std::size_t>(domain.area() / tri_area / 2.0), opt.max_vertices);

    Box bb = domain.bounding_box();
    // Lattice point (i, j) sits at (i + j/2) s, j * hy * s; the curve starts at the origin.
    const long j0 = static_cast<long>(std::floor(bb.lo.y / (hy * s))) - 1;
    const long j1 = static_cast<long>(std::ceil(bb.hi.y / (hy * s))) + 1;
    Mesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    auto vertex = [&](long i, long j) {
        std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
                            static_cast<std::uint32_t>(j);
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back({(static_cast<double>(i) + 0.5 * static_cast<double>(j)) * s, hy * static_cast<double>(j) * s});
        ids.emplace(key, id);
        return id;
    };
    for (long j = j0; j <= j1; ++j) {
        const double y = static_cast<double>(j) * hy * s;
        const long i0 = static_cast<long>(std::floor(bb.lo.x / s - 0.5 * static_cast<double>(j))) - 2;
        const long i1 = static_cast<long>(std::ceil(bb.hi.x / s - 0.5 * static_cast<double>(j))) + 2;
        for (long i = i0; i <= i1; ++i) {
            const double x = (static_cast<double>(i) + 0.5 * static_cast<double>(j)) * s;
            Vec2 up{x + 0.5 * s, y + hy * s / 3.0};
            Vec2 down{x + s, y + 2.0 * hy * s / 3.0};
            if (domain.contains(up)) mesh.triangles.push_back({vertex(i, j), vertex(i + 1, j), vertex(i, j + 1)});
            if (domain.contains(down))
                mesh.triangles.push_back({vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1)});
        }
    }
    check_budget(mesh.vertices.size(), opt.max_vertices);
    mesh.h = s;
    mesh.hole_count = 0;
    finish_mesh(mesh, domain, sigma);
    return mesh;
}

// ---------------------------------------------------------------------------
// Staggered ring mesher for polygonal disks. Consecutive rings either carry the
// same node count (offset by half a step) or the outer ring doubles the inner
// one; both strip patterns are nonobtuse while chords stay below twice the ring gap.

double polygon_radius(const Polyline& poly, double theta) {
    Vec2 dir{std::cos(theta), std::sin(theta)};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < poly.size(); ++k) {
        Vec2 a = poly[k], b = poly[(k + 1) % poly.size()];
        Vec2 e = b - a;
        double den = cross(dir, e);
        if (std::abs(den) < 1e-300) continue;
        double t = cross(a, e) / den;     // distance along the ray
        double u = cross(a, dir) / den;   // parameter along the edge
        if (t > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) best = std::min(best, t);
    }
    return best;
}

Mesh disk_mesh_attempt(const PolygonalDomain& domain, const BoundaryMeasure& sigma, int K, const MeshOptions& opt) {
    const Polyline& poly = domain.components()[0];
    const int n = static_cast<int>(poly.size());
    const double gap = 1.0 / K;
    double perimeter = domain.perimeter();
    const int per_edge = std::max(1, static_cast<int>(std::lround(perimeter / n / gap)));
    check_budget(static_cast<std::size_t>(3.2 * K * K) + 1, opt.max_vertices);

    Mesh mesh;
    mesh.vertices.push_back({0.0, 0.0});
    std::vector<std::vector<std::uint32_t>> rings(K + 1);
    rings[0] = {0};

    std::vector<double> angles;
    std::vector<std::uint32_t> outer_ids;
    for (int e = 0; e < n; ++e) {
        Vec2 a = poly[e], b = poly[(e + 1) % n];
        for (int q = 0; q < per_edge; ++q) {
            Vec2 p = a + (b - a) * (static_cast<double>(q) / per_edge);
            double t = std::atan2(p.y, p.x);
            if (!angles.empty())
                while (t < angles.back()) t += 2.0 * std::numbers::pi;
            angles.push_back(t);
            outer_ids.push_back(static_cast<std::uint32_t>(mesh.vertices.size()));
            mesh.vertices.push_back(p);
        }
    }
    std::vector<std::vector<double>> ring_angles(K + 1);
    std::vector<bool> doubles(K + 1, false);
    ring_angles[K] = angles;
    for (int k = K - 1; k >= 1; --k) {
        const auto& out = ring_angles[k + 1];
        const std::size_t m = out.size();
        const double rho = k * gap;
        std::vector<double> inner;
        bool halve = m % 2 == 0 && m / 2 >= 6 &&
                     2.0 * std::numbers::pi * rho / static_cast<double>(m / 2) <= 1.5 * gap &&
                     2.0 * std::numbers::pi * rho / static_cast<double>(m) < 0.75 * gap;
        if (halve) {
            for (std::size_t i = 0; i < m; i += 2) inner.push_back(out[i]);
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                double next = i + 1 < m ? out[i + 1] : out[0] + 2.0 * std::numbers::pi;
                inner.push_back(0.5 * (out[i] + next));
            }
        }
        doubles[k + 1] = halve;
        ring_angles[k] = std::move(inner);
    }
    // Interior rings are circles when they clear the polygon; scaled copies of
    // the polygon would tilt chords at its corners and spoil right angles.
    double r_in = std::numeric_limits<double>::infinity(), r_out = 0.0;
    for (int e = 0; e < n; ++e) {
        Vec2 a = poly[e], b = poly[(e + 1) % n];
        r_in = std::min(r_in, std::abs(cross(b - a, Vec2{0.0, 0.0} - a)) / distance(a, b));
        r_out = std::max(r_out, norm(a));
    }
    const bool circles = (K - 1.0) / K * r_out < r_in - 0.25 * gap;
    for (int k = 1; k < K; ++k) {
        for (double t : ring_angles[k]) {
            double rho = static_cast<double>(k) / K * (circles ? r_out : polygon_radius(poly, t));
            rings[k].push_back(static_cast<std::uint32_t>(mesh.vertices.size()));
            mesh.vertices.push_back({rho * std::cos(t), rho * std::sin(t)});
        }
    }
    rings[K] = outer_ids;

    auto push = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        if (cross(mesh.vertices[b] - mesh.vertices[a], mesh.vertices[c] - mesh.vertices[a]) < 0.0) std::swap(b, c);
        mesh.triangles.push_back({a, b, c});
    };
    for (int k = 1; k <= K; ++k) {
        const auto& A = rings[k - 1];
        const auto& B = rings[k];
        const std::size_t ma = A.size(), mb = B.size();
        if (k == 1) {
            for (std::size_t j = 0; j < mb; ++j) push(0, B[j], B[(j + 1) % mb]);
        } else if (doubles[k]) {
            for (std::size_t i = 0; i < ma; ++i) {
                push(A[i], B[2 * i], B[2 * i + 1]);
                push(A[i], B[2 * i + 1], A[(i + 1) % ma]);
                push(A[(i + 1) % ma], B[2 * i + 1], B[(2 * i + 2) % mb]);
            }
        } else {
            for (std::size_t i = 0; i < mb; ++i) {
                push(B[i], B[(i + 1) % mb], A[i]);
                push(A[i], B[(i + 1) % mb], A[(i + 1) % ma]);
            }
        }
    }
    check_budget(mesh.vertices.size(), opt.max_vertices);
    mesh.h = gap;
    mesh.hole_count = 0;
    finish_mesh(mesh, domain, sigma);
    return mesh;
}

Mesh disk_mesh(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h, const MeshOptions& opt) {
    const int K = std::max(2, static_cast<int>(std::ceil(1.0 / target_h - 1e-12)));
    try {
        return disk_mesh_attempt(domain, sigma, K, opt);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonobtuseViolation) throw;
    }
    try {
        return disk_mesh_attempt(domain, sigma, 2 * K, opt);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonobtuseViolation) throw;
    }
    // Coarse polygons: fan of isosceles triangles with apex 2 pi / n, refined
    // uniformly. Red refinement keeps every child similar to its parent.
    const Polyline& poly = domain.components()[0];
    const auto n = static_cast<std::uint32_t>(poly.size());
    if (n < 4) throw Error(ErrorKind::NonobtuseViolation, "polygon fan would be obtuse");
    Mesh mesh;
    mesh.vertices.push_back({0.0, 0.0});
    mesh.vertices.insert(mesh.vertices.end(), poly.begin(), poly.end());
    for (std::uint32_t k = 0; k < n; ++k) mesh.triangles.push_back({0, 1 + k, 1 + (k + 1) % n});
    double edge = 0.0;
    for (Vec2 p : poly) edge = std::max(edge, norm(p));
    for (std::uint32_t k = 0; k < n; ++k) edge = std::max(edge, distance(poly[k], poly[(k + 1) % n]));
    mesh.h = edge;
    finish_mesh(mesh, domain, sigma);
    while (mesh.h > target_h * (1.0 + 1e-12)) mesh = refine(mesh, opt.max_vertices);
    return mesh;
}

}  // namespace

Mesh triangulate(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h,
                 const MeshOptions& options) {
    if (!(target_h > 0.0)) throw Error(ErrorKind::InvalidArgument, "target_h must be positive");
    if (sigma.density.size() != domain.edges().size())
        throw Error(ErrorKind::InvalidArgument, "sigma does not match the domain");
    if (options.grading <= 0.0) throw Error(ErrorKind::InvalidArgument, "grading must be positive");
    switch (domain.family()) {
        case Family::Square:
        case Family::CantorComplement: {
            if (target_h > domain.lattice_pitch() * (1 + 1e-12))
                throw Error(ErrorKind::InvalidArgument, "target_h must not exceed the lattice pitch");
            QuadMesher mesher(domain, target_h, options);
            return mesher.build(sigma);
        }
        case Family::KochSnowflake:
            if (!options.carve.empty()) throw Error(ErrorKind::InvalidArgument, "carving is supported on quadtree meshes only");
            if (target_h > domain.lattice_pitch() * (1 + 1e-12))
                throw Error(ErrorKind::InvalidArgument, "target_h must not exceed the lattice pitch");
            return koch_mesh(domain, sigma, target_h, options);
        case Family::DiskPolygon:
            if (!options.carve.empty()) throw Error(ErrorKind::InvalidArgument, "carving is supported on quadtree meshes only");
            return disk_mesh(domain, sigma, target_h, options);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown family");
}

Mesh refine(const Mesh& mesh, std::size_t max_vertices) {
    // V' = V + E; E = (3T + B) / 2.
    std::size_t edges = (3 * mesh.triangles.size() + mesh.boundary_edges.size()) / 2;
    check_budget(mesh.vertices.size() + edges, max_vertices);

    Mesh out;
    out.vertices = mesh.vertices;
    out.h = mesh.h / 2.0;
    out.hole_count = mesh.hole_count;
    std::unordered_map<std::uint64_t, std::uint32_t> mid;
    mid.reserve(edges);
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
        auto key = edge_key(a, b);
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        auto id = static_cast<std::uint32_t>(out.vertices.size());
        out.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
        mid.emplace(key, id);
        return id;
    };
    out.triangles.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
        auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
        out.triangles.push_back({t[0], ab, ca});
        out.triangles.push_back({ab, t[1], bc});
        out.triangles.push_back({ca, bc, t[2]});
        out.triangles.push_back({ab, bc, ca});
    }
    std::vector<char> on_sigma(out.vertices.size(), 0), constrained(out.vertices.size(), 0);
    out.sigma_weights.assign(out.vertices.size(), 0.0);
    for (const auto& e : mesh.boundary_edges) {
        auto m = midpoint(e.v0, e.v1);
        for (auto [a, b] : {std::pair{e.v0, m}, std::pair{m, e.v1}}) {
            MeshBoundaryEdge child{a, b, e.parent, 0.5 * e.sigma_mass};
            out.boundary_edges.push_back(child);
            if (e.parent >= 0) {
                out.sigma_weights[a] += 0.5 * child.sigma_mass;
                out.sigma_weights[b] += 0.5 * child.sigma_mass;
                on_sigma[a] = on_sigma[b] = 1;
            } else {
                constrained[a] = constrained[b] = 1;
            }
        }
    }
    for (std::uint32_t v = 0; v < out.vertices.size(); ++v) {
        if (on_sigma[v]) out.boundary_vertices.push_back(v);
        if (constrained[v]) out.constrained_vertices.push_back(v);
    }
    out.build_locator();
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "mesh cache format is little-endian");

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(ErrorKind::Io, "truncated mesh file");
    return v;
}

}  // namespace

void write_mesh(std::ostream& out, const Mesh& mesh) {
    out.write("RMLB1", 5);
    put<std::uint64_t>(out, mesh.vertices.size());
    put<std::uint64_t>(out, mesh.triangles.size());
    put<std::uint64_t>(out, mesh.boundary_edges.size());
    put<std::uint64_t>(out, mesh.constrained_vertices.size());
    put<double>(out, mesh.h);
    put<std::uint64_t>(out, mesh.hole_count);
    for (Vec2 p : mesh.vertices) {
        put(out, p.x);
        put(out, p.y);
    }
    for (const auto& t : mesh.triangles)
        for (auto v : t) put<std::uint32_t>(out, v);
    for (const auto& e : mesh.boundary_edges) {
        put<std::uint32_t>(out, e.v0);
        put<std::uint32_t>(out, e.v1);
        put<std::int32_t>(out, e.parent);
        put<double>(out, e.sigma_mass);
    }
    for (double w : mesh.sigma_weights) put(out, w);
    for (auto v : mesh.constrained_vertices) put<std::uint32_t>(out, v);
}

Mesh read_mesh(std::istream& in) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::string(magic, 5) != "RMLB1") throw Error(ErrorKind::Io, "not an RMLB1 mesh file");
    Mesh mesh;
    auto nv = get<std::uint64_t>(in), nt = get<std::uint64_t>(in);
    auto nb = get<std::uint64_t>(in), nc = get<std::uint64_t>(in);
    mesh.h = get<double>(in);
    mesh.hole_count = get<std::uint64_t>(in);
    mesh.vertices.resize(nv);
    for (auto& p : mesh.vertices) {
        p.x = get<double>(in);
        p.y = get<double>(in);
    }
    mesh.triangles.resize(nt);
    for (auto& t : mesh.triangles)
        for (auto& v : t) v = get<std::uint32_t>(in);
    mesh.boundary_edges.resize(nb);
    std::vector<char> on_sigma(nv, 0);
    for (auto& e : mesh.boundary_edges) {
        e.v0 = get<std::uint32_t>(in);
        e.v1 = get<std::uint32_t>(in);
        e.parent = get<std::int32_t>(in);
        e.sigma_mass = get<double>(in);
        if (e.v0 >= nv || e.v1 >= nv) throw Error(ErrorKind::Io, "boundary edge index out of range");
        if (e.parent >= 0) on_sigma[e.v0] = on_sigma[e.v1] = 1;
    }
    mesh.sigma_weights.resize(nv);
    for (auto& w : mesh.sigma_weights) w = get<double>(in);
    mesh.constrained_vertices.resize(nc);
    for (auto& v : mesh.constrained_vertices) v = get<std::uint32_t>(in);
    for (std::uint32_t v = 0; v < nv; ++v)
        if (on_sigma[v]) mesh.boundary_vertices.push_back(v);
    for (const auto& t : mesh.triangles)
        for (auto v : t)
            if (v >= nv) throw Error(ErrorKind::Io, "triangle index out of range");
    mesh.build_locator();
    return mesh;
}

Mesh cached_triangulate(const PolygonalDomain& domain, const BoundaryMeasure& sigma, double target_h,
                        const MeshOptions& options, const std::filesystem::path& dir) {
    std::filesystem::path cache = dir;
    if (cache.empty()) {
        if (const char* env = std::getenv("ROBINLAB_CACHE_DIR")) cache = env;
    }
    if (cache.empty()) return triangulate(domain, sigma, target_h, options);

    Hasher h;
    h.u64(domain.content_hash());
    h.f64(target_h);
    h.f64(options.h_max);
    h.f64(options.grading);
    h.f64(options.focus_h);
    for (Vec2 p : options.focus_points) {
        h.f64(p.x);
        h.f64(p.y);
    }
    for (const auto& d : options.carve) {
        h.f64(d.center.x);
        h.f64(d.center.y);
        h.f64(d.radius);
    }
    for (double d : sigma.density) h.f64(d);
    const auto path = cache / ("mesh_" + hex64(h.value()) + ".rmlb");
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        return read_mesh(in);
    }
    Mesh mesh = triangulate(domain, sigma, target_h, options);
    std::filesystem::create_directories(cache);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        write_mesh(out, mesh);
        if (!out) throw Error(ErrorKind::Io, "cannot write mesh cache " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    return mesh;
}

}  // namespace rml
