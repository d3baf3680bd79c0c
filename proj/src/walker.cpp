#include "robinlab/walker.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace rml {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// One trajectory; returns the absorbing vertex and adds the step count.
std::uint32_t walk(const WalkChain& chain, std::uint32_t start, SplitMix64& rng, std::uint64_t& steps) {
    std::uint32_t v = start;
    for (std::uint64_t k = 0; k < kWalkCap; ++k) {
        const double u = rng.uniform();
        const double qv = chain.q[v];
        if (u < qv) {
            steps += k;
            return v;
        }
        const std::uint32_t lo = chain.offsets[v], hi = chain.offsets[v + 1];
        std::uint32_t j = lo;
        while (j + 1 < hi && u >= chain.cdf[j]) ++j;
        v = chain.targets[j];
    }
    std::ostringstream msg;
    msg << "trajectory from vertex " << start << " exceeded " << kWalkCap << " steps (a = " << chain.a << ")";
    throw Error(ErrorKind::CapExceeded, msg.str());
}

void check_start(const WalkChain& chain, std::uint32_t start, std::size_t n_walks) {
    if (start >= chain.vertex_count()) throw Error(ErrorKind::InvalidArgument, "start vertex out of range");
    if (chain.q[start] > 0.0) throw Error(ErrorKind::InvalidArgument, "start vertex lies on the boundary");
    if (n_walks < 1000) throw Error(ErrorKind::InvalidArgument, "need at least 1000 walks");
}

}  // namespace

SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ (stream * 0xd1b54a32d192ed03ULL + 1))) {}

std::uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

WalkChain build_chain(const RobinSystem& system) {
    const Mesh& mesh = *system.mesh;
    if (!mesh.constrained_vertices.empty())
        throw Error(ErrorKind::InvalidArgument, "walks need a mesh without carved vertices");
    const auto n = static_cast<std::uint32_t>(mesh.vertex_count());
    WalkChain chain;
    chain.mesh = system.mesh;
    chain.a = system.a;
    chain.offsets.assign(n + 1, 0);
    chain.q.assign(n, 0.0);
    const SparseMatrix& B = system.B;
    for (std::uint32_t i = 0; i < n; ++i) {
        double diag = 0.0;
        for (SparseMatrix::InnerIterator it(B, i); it; ++it)
            if (static_cast<std::uint32_t>(it.col()) == i) diag = it.value();
        if (!(diag > 0.0)) {
            std::ostringstream msg;
            msg << "B(" << i << "," << i << ") = " << diag << " is not positive";
            throw Error(ErrorKind::NotMMatrix, msg.str());
        }
        const double qi = system.m_sigma[i] / diag;
        chain.q[i] = qi;
        double run = qi;
        for (SparseMatrix::InnerIterator it(B, i); it; ++it) {
            const auto j = static_cast<std::uint32_t>(it.col());
            if (j == i) continue;
            // Round-off level positives come from right angles, where the exact entry is 0.
            const double tol = 1e-12 * diag;
            if (it.value() > tol) {
                std::ostringstream msg;
                msg << "B(" << i << "," << j << ") = " << it.value() << " > 0";
                throw Error(ErrorKind::NotMMatrix, msg.str());
            }
            if (it.value() >= -tol) continue;
            const double pij = -it.value() / diag;
            run += pij;
            chain.targets.push_back(j);
            chain.p.push_back(pij);
            chain.cdf.push_back(run);
        }
        chain.offsets[i + 1] = static_cast<std::uint32_t>(chain.targets.size());
        if (std::abs(run - 1.0) > 1e-10) {
            std::ostringstream msg;
            msg << "row " << i << " of the chain sums to " << run;
            throw Error(ErrorKind::NotMMatrix, msg.str());
        }
    }
    return chain;
}

McEstimate estimate_omega_mc(const WalkChain& chain, std::uint32_t start, const EdgeSet& E, std::size_t n_walks,
                             std::uint64_t seed) {
    check_start(chain, start, n_walks);
    const std::vector<double> cover = vertex_coverage(*chain.mesh, E);
    double score = 0.0;
    std::uint64_t steps = 0;
    for (std::size_t k = 0; k < n_walks; ++k) {
        SplitMix64 rng(seed, k);
        score += cover[walk(chain, start, rng, steps)];
    }
    McEstimate est;
    est.n = n_walks;
    est.estimate = score / static_cast<double>(n_walks);
    const double p = std::clamp(est.estimate, 0.0, 1.0);
    est.stderr_ = std::sqrt(p * (1.0 - p) / static_cast<double>(n_walks));
    est.mean_steps = static_cast<double>(steps) / static_cast<double>(n_walks);
    return est;
}

AbsorptionHistogram absorption_histogram(const WalkChain& chain, std::uint32_t start, std::size_t n_walks,
                                         std::uint64_t seed) {
    check_start(chain, start, n_walks);
    AbsorptionHistogram hist;
    hist.counts.assign(chain.vertex_count(), 0);
    hist.n_walks = n_walks;
    std::uint64_t steps = 0;
    for (std::size_t k = 0; k < n_walks; ++k) {
        SplitMix64 rng(seed, k);
        ++hist.counts[walk(chain, start, rng, steps)];
    }
    hist.mean_steps = static_cast<double>(steps) / static_cast<double>(n_walks);
    return hist;
}

double chi2_distance(const AbsorptionHistogram& hist, const MeasureDensity& density) {
    const Mesh& mesh = *density.mesh;
    double d = 0.0;
    for (auto v : mesh.boundary_vertices) {
        const double p = density.w[v] * mesh.sigma_weights[v];
        if (!(p > 0.0)) continue;
        const double ph = static_cast<double>(hist.counts[v]) / static_cast<double>(hist.n_walks);
        d += (ph - p) * (ph - p) / p;
    }
    return d;
}

std::uint32_t interior_vertex(const Mesh& mesh, Vec2 X) {
    const auto bmask = mesh.boundary_mask();
    const auto cmask = mesh.constrained_mask();
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t v = 0; v < mesh.vertex_count(); ++v) {
        if (bmask[v] || cmask[v]) continue;
        const double d = distance(mesh.vertices[v], X);
        if (d < best_d) {
            best_d = d;
            best = v;
        }
    }
    if (!std::isfinite(best_d)) throw Error(ErrorKind::InvalidArgument, "mesh has no interior vertex");
    return best;
}

void write_histogram_csv(std::ostream& out, const Mesh& mesh, const AbsorptionHistogram& hist) {
    out << "vertex,count,sigma,density\n";
    out.precision(17);
    const double n = static_cast<double>(hist.n_walks);
    for (auto v : mesh.boundary_vertices) {
        const double s = mesh.sigma_weights[v];
        out << v << ',' << hist.counts[v] << ',' << s << ',' << (s > 0.0 ? hist.counts[v] / (n * s) : 0.0) << '\n';
    }
}

}  // namespace rml
