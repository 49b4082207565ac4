#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coalsim/config.hpp"
#include "coalsim/covariance.hpp"
#include "coalsim/field.hpp"
#include "coalsim/vec.hpp"

namespace coalsim {

// Radial interaction kernel on the unit ball, scaled by eps at use sites.
// Profiles vanish at the origin and at the support edge and integrate to one
// over the ball.
class KernelTheta {
  public:
    static KernelTheta from_json(const json& j);
    static KernelTheta quartic_shell();

    // Unit profile theta(r) for r = |x|; zero for r >= 1.
    double operator()(double r) const;
    // Scaled kernel theta_eps(d) = eps^-3 theta(d/eps).
    double scaled(double dist, double eps) const { return (*this)(dist / eps) / (eps * eps * eps); }
    double max_value() const { return max_value_; }
    const std::string& kind() const { return kind_; }
    json to_json() const { return json{{"kind", kind_}}; }

  private:
    explicit KernelTheta(std::string kind);
    std::string kind_;
    double norm_ = 1.0;      // profile prefactor fixing the ball integral to 1
    double max_value_ = 0.0; // sup of the unit profile, for rate bounds
};

struct SimConfig {
    int n = 0;                 // particle count
    double eps = 0.0;          // interaction radius
    std::string scaling_mode;  // "paper" couples eps = 1/N; "fixed_eps" decouples them
    double xi = 1.0;           // common-noise scale ratio
    double sigma = 0.0;        // common-noise amplitude
    double sigma0 = 1.0;       // idiosyncratic amplitude
    double r0 = 1.0;           // coalescence rate modulator
    double dt = 0.0;
    double t_end = 0.0;
    KernelTheta theta = KernelTheta::quartic_shell();
    double f0_radius = 1.0;    // initial positions uniform in B(0, f0_radius)
    std::uint64_t seed = 0;

    static SimConfig from_json(const json& j);
    json to_json() const;

    // Largest single-pair coalescence rate, (R0/N) eps^-3 max(theta).
    double max_pair_rate() const;
};

struct ParticleSystemState {
    std::vector<Vec3> positions;
    std::vector<std::uint8_t> alive;
    double t = 0.0;
    std::int64_t step = 0; // completed step count, indexes the RNG streams
    int n_alive = 0;

    std::uint64_t key_field = 0; // common-noise realizations
    std::uint64_t key_brown = 0; // per-particle Brownian increments
    std::uint64_t key_jump = 0;  // coalescence thinning and pair shuffling
};

struct Histogram3D {
    Vec3 origin{};
    double h = 0.0;
    int nx = 0, ny = 0, nz = 0;
    double t = 0.0;
    std::vector<double> density; // nx*ny*nz, x fastest

    double& at(int ix, int iy, int iz) { return density[ix + nx * (iy + ny * iz)]; }
    double at(int ix, int iy, int iz) const { return density[ix + nx * (iy + ny * iz)]; }
};

struct EmpiricalSeries {
    std::vector<double> times;
    std::vector<double> masses; // alive fraction of the initial N
    std::vector<Histogram3D> histograms;
    std::vector<std::int64_t> pair_counts; // near-contact pairs per snapshot
};

ParticleSystemState init_state(const SimConfig& cfg);

// One Euler-Maruyama diffusion step: a shared divergence-free field increment
// evaluated at each alive particle plus an independent Gaussian per particle.
void step_diffusion(ParticleSystemState& state, const SimConfig& cfg,
                    const CovarianceModel& model, Exec exec = Exec::parallel);

// One thinning step over near-contact pairs: each unordered alive pair within
// eps fires with probability 1 - exp(-rate dt) in a shuffled deterministic
// order; a fired pair dies together and stale pairs are skipped.
void step_coalescence(ParticleSystemState& state, const SimConfig& cfg);

// Unordered index pairs of alive particles within distance eps, sorted
// lexicographically. The cell-list path is the production one; the quadratic
// path is the oracle it is tested against.
std::vector<std::pair<std::uint32_t, std::uint32_t>>
neighbor_pairs(const std::vector<Vec3>& positions, const std::vector<std::uint8_t>& alive,
               double eps);
std::vector<std::pair<std::uint32_t, std::uint32_t>>
neighbor_pairs_bruteforce(const std::vector<Vec3>& positions,
                          const std::vector<std::uint8_t>& alive, double eps);

// Density histogram of the alive particles with the N^(-1/5) bandwidth rule;
// density integrates to the alive fraction.
Histogram3D make_histogram(const ParticleSystemState& state, int n_initial, double t);

// Full run: alternating diffusion and coalescence steps, mass recorded every
// step, histograms and pair counts at the requested snapshot times. With
// interact = false the coalescence step is skipped (free auxiliary system).
EmpiricalSeries run(const SimConfig& cfg, const CovarianceModel& model,
                    const std::vector<double>& snapshot_times, bool interact = true,
                    Exec exec = Exec::parallel);

} // namespace coalsim
