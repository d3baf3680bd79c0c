#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "robinlab/measure.hpp"

namespace rml {

// Random walk on mesh vertices read off the rows of B: from vertex i the walk
// is absorbed with probability q_i = M_ii / B_ii, otherwise it jumps to j with
// probability -B_ij / B_ii. Absorption at v happens with probability w_v sigma_v.
struct WalkChain {
    std::shared_ptr<const Mesh> mesh;
    double a = 0.0;
    std::vector<std::uint32_t> offsets;  // CSR rows, size n + 1
    std::vector<std::uint32_t> targets;
    std::vector<double> p;    // jump probabilities, parallel to targets
    std::vector<double> cdf;  // q_i + running sum of p over the row
    std::vector<double> q;    // absorption probability per vertex

    std::size_t vertex_count() const { return q.size(); }
};

// Fails with NotMMatrix on a positive off-diagonal entry of B. Meshes with
// carved (Dirichlet) vertices are rejected.
WalkChain build_chain(const RobinSystem& system);

// Counter-based stream: the state of trajectory k is derived from (seed, k)
// alone, so runs split in any order give identical results.
class SplitMix64 {
public:
    SplitMix64(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next();
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline constexpr std::uint64_t kWalkCap = 100'000'000;

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;  // sqrt(p(1-p)/n)
    std::size_t n = 0;
    double mean_steps = 0.0;
};

// Absorption at v scores the share c_v of sigma_v that lies in E, so the
// expectation is exactly omega(E) including clipped edges.
McEstimate estimate_omega_mc(const WalkChain& chain, std::uint32_t start, const EdgeSet& E, std::size_t n_walks,
                             std::uint64_t seed);

struct AbsorptionHistogram {
    std::vector<std::uint64_t> counts;  // per vertex
    std::size_t n_walks = 0;
    double mean_steps = 0.0;
};

AbsorptionHistogram absorption_histogram(const WalkChain& chain, std::uint32_t start, std::size_t n_walks,
                                         std::uint64_t seed);

// Chi-squared distance sum_v (phat_v - p_v)^2 / p_v against exact absorption
// probabilities p_v = w_v sigma_v, over vertices with p_v > 0.
double chi2_distance(const AbsorptionHistogram& hist, const MeasureDensity& density);

// Nearest vertex to X that is neither on the sigma boundary nor carved.
std::uint32_t interior_vertex(const Mesh& mesh, Vec2 X);

// Columns: vertex,count,sigma,density (density = count / (n sigma)).
void write_histogram_csv(std::ostream& out, const Mesh& mesh, const AbsorptionHistogram& hist);

}  // namespace rml
