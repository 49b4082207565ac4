#include "coalsim/field.hpp"

#include <cmath>

#include "coalsim/fast_trig.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

FieldRealization sample_increment(const CovarianceModel& model, double scale, double dt,
                                  std::uint64_t key, std::uint64_t step) {
    const auto& modes = model.modes();
    const int m = static_cast<int>(modes.size());
    FieldRealization r;
    r.dt = dt;
    r.scale = scale;
    r.n_modes = m;
    r.kx.resize(m); r.ky.resize(m); r.kz.resize(m);
    r.ax.resize(m); r.ay.resize(m); r.az.resize(m);
    r.bx.resize(m); r.by.resize(m); r.bz.resize(m);

    const std::uint64_t base = 2ULL * (step * static_cast<std::uint64_t>(m));
    const double sqdt = std::sqrt(dt);
    for (int j = 0; j < m; ++j) {
        const Mode& mode = modes[j];
        const double amp = std::sqrt(mode.w) * sqdt;
        const Vec3 khat = (1.0 / norm(mode.k)) * mode.k;
        Vec3 a = rng::normal_vec3(key, base + 2 * j);
        Vec3 b = rng::normal_vec3(key, base + 2 * j + 1);
        a -= dot(khat, a) * khat;
        b -= dot(khat, b) * khat;
        r.kx[j] = scale * mode.k.x;
        r.ky[j] = scale * mode.k.y;
        r.kz[j] = scale * mode.k.z;
        r.ax[j] = amp * a.x; r.ay[j] = amp * a.y; r.az[j] = amp * a.z;
        r.bx[j] = amp * b.x; r.by[j] = amp * b.y; r.bz[j] = amp * b.z;
    }
    return r;
}

namespace kernels {

// Shared inner loop: one point against all modes. Serial and OpenMP
// variants differ only in how points are distributed, so outputs agree
// bitwise.
inline Vec3 eval_point(const FieldRealization& r, const Vec3& p) {
    double ox = 0.0, oy = 0.0, oz = 0.0;
    const int m = r.n_modes;
    const double* kx = r.kx.data(); const double* ky = r.ky.data(); const double* kz = r.kz.data();
    const double* ax = r.ax.data(); const double* ay = r.ay.data(); const double* az = r.az.data();
    const double* bx = r.bx.data(); const double* by = r.by.data(); const double* bz = r.bz.data();
    for (int j = 0; j < m; ++j) {
        const double phase = kx[j] * p.x + ky[j] * p.y + kz[j] * p.z;
        double s, c;
        fast_sincos(phase, s, c);
        ox += ax[j] * c + bx[j] * s;
        oy += ay[j] * c + by[j] * s;
        oz += az[j] * c + bz[j] * s;
    }
    return {ox, oy, oz};
}

void field_eval_serial(const FieldRealization& r, const Vec3* points, Vec3* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = eval_point(r, points[i]);
}

void field_eval_openmp(const FieldRealization& r, const Vec3* points, Vec3* out, std::size_t n) {
    const std::int64_t nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < nn; ++i)
        out[i] = eval_point(r, points[i]);
}

} // namespace kernels

void evaluate_field(const FieldRealization& real, const Vec3* points, Vec3* out,
                    std::size_t n, Exec exec) {
    if (exec == Exec::serial)
        kernels::field_eval_serial(real, points, out, n);
    else
        kernels::field_eval_openmp(real, points, out, n);
}

Vec3 evaluate_field_at(const FieldRealization& real, const Vec3& point) {
    return kernels::eval_point(real, point);
}

} // namespace coalsim
