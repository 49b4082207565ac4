#pragma once

#include <cstdint>
#include <vector>

#include "coalsim/covariance.hpp"
#include "coalsim/vec.hpp"

namespace coalsim {

/// Kernel execution policy. Every hot kernel has a serial reference and an
/// OpenMP variant; tests assert they agree exactly, benchmarks compare
/// their throughput. Results are bit-identical by construction (each output
/// element is computed by exactly one thread, RNG is counter-based).
enum class Exec { serial, parallel };

/// One time-step increment of the synthesized velocity field:
///   dW(x) = sum_j [ a_j cos(s k_j . x) + b_j sin(s k_j . x) ],
/// with a_j, b_j independent N(0, w_j dt P_j) vectors (P_j the transverse
/// projector) and s the spatial rescaling. Increments sampled this way have
/// E[dW(x) dW(y)^T] = C(s (x - y)) dt with C the model covariance, and are
/// exactly divergence-free in x mode by mode.
/// Mode data is kept in flat arrays (wavenumbers pre-scaled by s) because
/// evaluation over points x modes is the hottest loop in the project.
struct FieldRealization {
    double dt = 0.0;
    double scale = 1.0;
    int n_modes = 0;
    // Pre-scaled wavenumbers s * k_j.
    std::vector<double> kx, ky, kz;
    // Amplitude pairs, premultiplied by sqrt(w_j dt) and projected.
    std::vector<double> ax, ay, az, bx, by, bz;
};

/// Draws the amplitude pairs for one step. `key` identifies the stream
/// (seed and purpose), `step` the time index; every (step, mode) pair maps
/// to its own counter slot, so sampling is reproducible and order-free.
FieldRealization sample_increment(const CovarianceModel& model, double scale, double dt,
                                  std::uint64_t key, std::uint64_t step);

/// Evaluates the increment at each point. out[i] += is not used: slots are
/// overwritten. Cost O(n_points * n_modes).
void evaluate_field(const FieldRealization& real, const Vec3* points, Vec3* out,
                    std::size_t n, Exec exec = Exec::parallel);

Vec3 evaluate_field_at(const FieldRealization& real, const Vec3& point);

} // namespace coalsim
