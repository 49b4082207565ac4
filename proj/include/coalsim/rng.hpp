#pragma once

#include <cmath>
#include <cstdint>

#include "coalsim/vec.hpp"

namespace coalsim {

/// Counter-based random numbers built on splitmix64. Every draw is a pure
/// function of (stream key, counter), so parallel loops can generate their
/// own numbers without shared state and the results cannot depend on the
/// thread count or iteration order. That property is load-bearing: the
/// determinism contract says identical (config, model, seed) must give
/// bit-identical output, and the serial/OpenMP kernel pairs are tested for
/// exact agreement.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a stream key from a base seed and a purpose tag, so e.g. the
/// Brownian draws and the thinning draws never share numbers.
inline std::uint64_t stream(std::uint64_t seed, std::uint64_t purpose) {
    return splitmix64(splitmix64(seed) ^ (0x632be59bd9b4e019ULL * (purpose + 1)));
}

inline std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
    return splitmix64(key ^ splitmix64(counter * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
}

/// Uniform in (0, 1); never returns 0 so logs are safe.
inline double uniform(std::uint64_t key, std::uint64_t counter) {
    return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal pair via Box-Muller on two counter slots.
/// Callers advance the counter by 2 per pair.
inline void normal_pair(std::uint64_t key, std::uint64_t counter, double& n0, double& n1) {
    const double u1 = uniform(key, counter);
    const double u2 = uniform(key, counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    n0 = r * std::cos(a);
    n1 = r * std::sin(a);
}

inline double normal(std::uint64_t key, std::uint64_t counter) {
    double n0, n1;
    normal_pair(key, 2 * counter, n0, n1);
    return n0;
}

inline Vec3 normal_vec3(std::uint64_t key, std::uint64_t counter) {
    double n0, n1, n2, n3;
    normal_pair(key, 4 * counter, n0, n1);
    normal_pair(key, 4 * counter + 2, n2, n3);
    return {n0, n1, n2};
}

/// Haar-distributed random rotation from a uniformly random unit quaternion
/// (four normals, normalized).
inline Mat3 haar_rotation(std::uint64_t key, std::uint64_t counter) {
    double q0, q1, q2, q3;
    normal_pair(key, 4 * counter, q0, q1);
    normal_pair(key, 4 * counter + 2, q2, q3);
    const double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
    return rotation_from_quaternion(q0 / n, q1 / n, q2 / n, q3 / n);
}

} // namespace rng
} // namespace coalsim
