#include <doctest.h>

#include <cmath>
#include <vector>

#include "coalsim/covariance.hpp"
#include "coalsim/field.hpp"
#include "coalsim/rng.hpp"

#include <omp.h>

using namespace coalsim;

namespace {

CovarianceModel small_model(int n_modes = 384, std::uint64_t seed = 5) {
    return CovarianceModel::build(SpectralDensity("gaussian_bump", 1.0, 6.0), n_modes, seed);
}

} // namespace

TEST_CASE("amplitudes are solenoidal to 1e-12") {
    const CovarianceModel model = small_model();
    const FieldRealization r = sample_increment(model, 1.7, 0.01, rng::stream(1, 50), 3);
    for (int j = 0; j < r.n_modes; ++j) {
        // Stored wavenumbers carry the spatial scale; orthogonality is
        // scale-invariant.
        const double ka = r.kx[j] * r.ax[j] + r.ky[j] * r.ay[j] + r.kz[j] * r.az[j];
        const double kb = r.kx[j] * r.bx[j] + r.ky[j] * r.by[j] + r.kz[j] * r.bz[j];
        const double kn = std::sqrt(r.kx[j] * r.kx[j] + r.ky[j] * r.ky[j] + r.kz[j] * r.kz[j]);
        const double an = std::sqrt(r.ax[j] * r.ax[j] + r.ay[j] * r.ay[j] + r.az[j] * r.az[j]);
        const double bn = std::sqrt(r.bx[j] * r.bx[j] + r.by[j] * r.by[j] + r.bz[j] * r.bz[j]);
        CHECK(std::fabs(ka) <= 1e-12 * std::fmax(1e-300, kn * an));
        CHECK(std::fabs(kb) <= 1e-12 * std::fmax(1e-300, kn * bn));
    }
}

TEST_CASE("evaluated field is divergence-free to stencil accuracy") {
    const CovarianceModel model = small_model();
    const FieldRealization r = sample_increment(model, 1.0, 1.0, rng::stream(2, 50), 0);
    const std::uint64_t key = rng::stream(3, 51);
    const double h = 1e-3;
    for (int i = 0; i < 20; ++i) {
        const Vec3 p = rng::normal_vec3(key, i);
        double div = 0.0, mag = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 pp = p, pm = p, p2p = p, p2m = p;
            pp[axis] += h; pm[axis] -= h;
            p2p[axis] += 2 * h; p2m[axis] -= 2 * h;
            // 4th-order central difference of the axis component.
            const double d = (-evaluate_field_at(r, p2p)[axis] + 8.0 * evaluate_field_at(r, pp)[axis]
                              - 8.0 * evaluate_field_at(r, pm)[axis] + evaluate_field_at(r, p2m)[axis])
                             / (12.0 * h);
            div += d;
            mag = std::fmax(mag, norm(evaluate_field_at(r, pp)));
        }
        CHECK(std::fabs(div) <= 1e-6 * std::fmax(mag, 1e-30));
    }
}

TEST_CASE("increment statistics match the covariance quadrature") {
    const CovarianceModel model = small_model(300, 9);
    const double dt = 0.02;
    const double scale = 2.0;
    const Vec3 x{0.12, -0.30, 0.05};
    const Vec3 y{0.32, -0.05, -0.20};
    const int samples = 6000;

    // Cross-covariance estimate of (dW(x), dW(y)) over independent steps.
    double acc[3][3] = {{0}};
    double var_x = 0.0;
    const std::uint64_t key = rng::stream(77, 52);
    for (int s = 0; s < samples; ++s) {
        const FieldRealization r = sample_increment(model, scale, dt, key, s);
        const Vec3 wx = evaluate_field_at(r, x);
        const Vec3 wy = evaluate_field_at(r, y);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                acc[a][b] += wx[a] * wy[b];
        var_x += norm2(wx);
    }
    const Sym3 expected = model.evaluate_covariance(scale * (x - y));
    const double exp_ab[3][3] = {{expected.xx, expected.xy, expected.xz},
                                 {expected.xy, expected.yy, expected.yz},
                                 {expected.xz, expected.yz, expected.zz}};
    // Product of two zero-mean increments has std ~ dt per sample; 4 sigma band.
    const double se = 4.0 * dt / std::sqrt(double(samples));
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            CHECK(std::fabs(acc[a][b] / samples - dt * exp_ab[a][b]) < se);
    // Per-component variance at a single point is C(0) dt = dt (trace 3 dt).
    CHECK(std::fabs(var_x / samples - 3.0 * dt) < 4.0 * dt * std::sqrt(6.0 / samples));
}

TEST_CASE("serial and OpenMP field evaluation agree bitwise") {
    const CovarianceModel model = small_model(513, 21);
    const FieldRealization r = sample_increment(model, 0.8, 0.05, rng::stream(4, 53), 12);
    const std::uint64_t key = rng::stream(5, 54);
    const int n = 1000;
    std::vector<Vec3> pts(n), out_s(n), out_p(n);
    for (int i = 0; i < n; ++i)
        pts[i] = rng::normal_vec3(key, i);

    const int saved = omp_get_max_threads();
    omp_set_num_threads(4); // oversubscribe on purpose; results must not change
    evaluate_field(r, pts.data(), out_p.data(), n, Exec::parallel);
    omp_set_num_threads(saved);
    evaluate_field(r, pts.data(), out_s.data(), n, Exec::serial);

    for (int i = 0; i < n; ++i) {
        CHECK(out_s[i].x == out_p[i].x);
        CHECK(out_s[i].y == out_p[i].y);
        CHECK(out_s[i].z == out_p[i].z);
    }
}

TEST_CASE("realizations are reproducible by (key, step)") {
    const CovarianceModel model = small_model(96, 2);
    const std::uint64_t key = rng::stream(10, 55);
    const FieldRealization a = sample_increment(model, 1.0, 0.1, key, 7);
    const FieldRealization b = sample_increment(model, 1.0, 0.1, key, 7);
    const FieldRealization c = sample_increment(model, 1.0, 0.1, key, 8);
    bool same = true, differ = false;
    for (int j = 0; j < a.n_modes; ++j) {
        same = same && a.ax[j] == b.ax[j] && a.bz[j] == b.bz[j];
        differ = differ || a.ax[j] != c.ax[j];
    }
    CHECK(same);
    CHECK(differ);
}
