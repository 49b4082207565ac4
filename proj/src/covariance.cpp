#include "coalsim/covariance.hpp"

#include <cmath>
#include <stdexcept>

#include "coalsim/fast_trig.hpp"
#include "coalsim/quadrature.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

namespace {

double gaussian_bump(double k, double kappa) {
    return std::exp(-0.5 * k * k / (kappa * kappa));
}

// Angular factors of the transform with the azimuthal integral done
// analytically. a = |k| r.
//   I_par(a)  = int_{-1}^{1} (1 - mu^2)    cos(a mu) dmu
//   I_perp(a) = int_{-1}^{1} (1 + mu^2)/2  cos(a mu) dmu
// Series below |a| = 0.05 to avoid cancellation; truncation error ~a^6/1e4.
double angular_par(double a) {
    if (std::fabs(a) < 0.05) {
        const double a2 = a * a;
        return 4.0 / 3.0 - 2.0 * a2 / 15.0 + a2 * a2 / 210.0;
    }
    return 4.0 * (std::sin(a) - a * std::cos(a)) / (a * a * a);
}

double angular_perp(double a) {
    if (std::fabs(a) < 0.05) {
        const double a2 = a * a;
        return 4.0 / 3.0 - 4.0 * a2 / 15.0 + a2 * a2 / 70.0;
    }
    const double sa = std::sin(a), ca = std::cos(a);
    return sa / a + ((a * a - 2.0) * sa + 2.0 * a * ca) / (a * a * a);
}

} // namespace

SpectralDensity::SpectralDensity(std::string kind, double kappa, double cutoff_k)
    : kind_(std::move(kind)), kappa_(kappa), cutoff_k_(cutoff_k), amplitude_(0.0) {
    if (kind_ != "gaussian_bump")
        throw ConfigError("spectral density: unknown kind \"" + kind_ +
                          "\" (supported: gaussian_bump)");
    if (!(kappa_ > 0.0) || !(cutoff_k_ > 0.0))
        throw ConfigError("spectral density: kappa and cutoff_k must be positive");
    const double radial = quad::integrate(
        [this](double k) { return gaussian_bump(k, kappa_) * k * k; }, 0.0, cutoff_k_);
    if (!(radial > 0.0) || !std::isfinite(radial))
        throw ConfigError("spectral density: profile not normalizable on [0, cutoff_k]");
    // (1/3) * 4 pi * amplitude * radial = 1.
    amplitude_ = 3.0 / (4.0 * M_PI * radial);
}

SpectralDensity SpectralDensity::from_json(const json& j) {
    cfg::check_keys(j, "covariance", {"kind", "kappa", "cutoff_k", "n_modes", "seed"});
    const std::string kind = cfg::get_str_or(j, "kind", "gaussian_bump");
    const double kappa = cfg::get_num_or(j, "kappa", 1.0);
    const double cutoff = cfg::get_num_or(j, "cutoff_k", 6.0 * kappa);
    return SpectralDensity(kind, kappa, cutoff);
}

double SpectralDensity::operator()(double k) const {
    if (k > cutoff_k_)
        return 0.0;
    return amplitude_ * gaussian_bump(k, kappa_);
}

double SpectralDensity::l1_norm() const {
    // Deliberately a different rule (composite Gauss-Legendre) than the
    // adaptive Simpson used to fix the amplitude, so the normalization
    // invariant is checked by an independent route.
    const double radial = quad::gauss_legendre(
        [this](double k) { return (*this)(k) * k * k; }, 0.0, cutoff_k_, 128);
    return 4.0 * M_PI * radial;
}

json SpectralDensity::to_json() const {
    return json{{"kind", kind_}, {"kappa", kappa_}, {"cutoff_k", cutoff_k_}};
}

RadialCovariance radial_covariance(const SpectralDensity& sd, double r) {
    // The integrands oscillate with wavelength 2pi/r in k. Chunk the range so
    // each adaptive call sees at most a quarter period; a single adaptive pass
    // over [0, K] can alias the oscillation and converge to garbage.
    const double K = sd.cutoff_k();
    const int chunks = std::max(4, static_cast<int>(std::ceil(2.0 * K * r / M_PI)));
    double par = 0.0;
    double perp = 0.0;
    for (int i = 0; i < chunks; ++i) {
        const double a = K * i / chunks;
        const double b = K * (i + 1) / chunks;
        par += quad::integrate(
            [&](double k) { return sd(k) * k * k * angular_par(k * r); }, a, b, 1e-13);
        perp += quad::integrate(
            [&](double k) { return sd(k) * k * k * angular_perp(k * r); }, a, b, 1e-13);
    }
    return {M_PI * par, M_PI * perp};
}

namespace {

bool radial_above(const SpectralDensity& sd, double r, double tol) {
    const RadialCovariance c = radial_covariance(sd, r);
    return std::fmax(std::fabs(c.c_par), std::fabs(c.c_perp)) > tol;
}

} // namespace

double correlation_radius(const SpectralDensity& sd, double tol) {
    // The transform of a smooth cutoff profile decays monotonically up to
    // ringing near the tol scale, so the last crossing is found by a coarse
    // outward scan refined locally. The coarse step stays below the ringing
    // lobe width pi/K so no lobe is stepped over.
    const double r_max = 40.0 / sd.kappa();
    const double dr_coarse = std::fmin(0.2 / sd.kappa(), 2.5 / sd.cutoff_k());
    double last_above = 0.0;
    for (double r = dr_coarse; r <= r_max; r += dr_coarse)
        if (radial_above(sd, r, tol))
            last_above = r;
    const double dr = dr_coarse / 16.0;
    double refined = last_above;
    for (double r = last_above + dr; r <= last_above + dr_coarse; r += dr)
        if (radial_above(sd, r, tol))
            refined = r;
    return refined + dr;
}

CovarianceConfig CovarianceConfig::from_json(const json& j) {
    SpectralDensity sd = SpectralDensity::from_json(j);
    const int n_modes = static_cast<int>(cfg::get_int_or(j, "n_modes", 1024));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg::get_int_or(j, "seed", 1234));
    if (n_modes < 8)
        throw ConfigError("covariance.n_modes: need at least 8 modes");
    return CovarianceConfig{std::move(sd), n_modes, seed};
}

json CovarianceConfig::to_json() const {
    json j = density.to_json();
    j["n_modes"] = n_modes;
    j["seed"] = seed;
    return j;
}

CovarianceModel CovarianceModel::build(const CovarianceConfig& cfg) {
    return build(cfg.density, cfg.n_modes, cfg.seed);
}

namespace {

// Representative radius for the shell [r_lo, r_hi]: the point where g equals
// its volume average over the shell, so one equal-weight node reproduces the
// shell's mass exactly. Falls back to the volume midpoint when g is flat
// enough (deep tail shells) that no bracket survives roundoff.
double mean_value_radius(const SpectralDensity& sd, double r_lo, double r_hi) {
    const double mass =
        quad::integrate([&sd](double k) { return sd(k) * k * k; }, r_lo, r_hi, 1e-13);
    const double vol3 = (r_hi * r_hi * r_hi - r_lo * r_lo * r_lo) / 3.0;
    const double target = mass / vol3;

    const int scan = 16;
    double a = r_lo;
    double fa = sd(a) - target;
    for (int i = 1; i <= scan; ++i) {
        const double b = r_lo + (r_hi - r_lo) * i / scan;
        const double fb = sd(b) - target;
        if (fa == 0.0)
            return a;
        if ((fa < 0.0) != (fb < 0.0)) {
            double lo = a, hi = b;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = sd(mid) - target;
                if ((fm < 0.0) == (fa < 0.0))
                    lo = mid;
                else
                    hi = mid;
            }
            return 0.5 * (lo + hi);
        }
        a = b;
        fa = fb;
    }
    return std::cbrt(0.5 * (r_lo * r_lo * r_lo + r_hi * r_hi * r_hi));
}

} // namespace

CovarianceModel CovarianceModel::build(const SpectralDensity& sd, int n_modes,
                                       std::uint64_t seed) {
    if (n_modes < 8)
        throw std::invalid_argument("CovarianceModel: need at least 8 modes");
    CovarianceModel m(sd);
    m.seed_ = seed;

    const int shells = (n_modes + 11) / 12;
    const double K = sd.cutoff_k();
    const double vol = 4.0 * M_PI * K * K * K / 3.0;
    const double d3k = vol / (3 * shells); // volume carried by one direction

    const std::uint64_t key_q = rng::stream(seed, 0x726f7461);   // triple rotations

    m.modes_.reserve(12 * shells);
    double g_quad = 0.0; // equal-weight quadrature of g over the ball
    double c0 = 0.0;     // scalar part of the discrete C(0) before renorm
    for (int t = 0; t < shells; ++t) {
        // One radius per equal-volume shell, placed where g equals its shell
        // average. The equal-weight sum then reproduces the L1 norm of g to
        // quadrature precision at any mode count; volume midpoints instead
        // would need thousands of modes to get under 1e-3.
        const double r_lo = K * std::cbrt(static_cast<double>(t) / shells);
        const double r_hi = K * std::cbrt(static_cast<double>(t + 1) / shells);
        const double r = mean_value_radius(sd, r_lo, r_hi);
        const double g = sd(r);
        const Mat3 rot = rng::haar_rotation(key_q, t);
        for (int i = 0; i < 3; ++i) {
            const Vec3 k = r * rot.row(i);
            // Each direction enters with its sign-flip images in x and y,
            // weight split evenly. Flipping z as well only repeats the
            // antipodes, whose cosine and projector are identical, so four
            // images close the set under all three coordinate reflections.
            // The exact covariance has those symmetries; keeping them in
            // the sample removes the odd half of the direction noise and
            // lets the elliptic solvers mirror-reduce their domains.
            for (int s = 0; s < 4; ++s) {
                const Vec3 ks{(s & 1) ? -k.x : k.x, (s & 2) ? -k.y : k.y, k.z};
                m.modes_.push_back({ks, 0.125 * g * d3k});
            }
        }
        g_quad += 3.0 * g * d3k;
        // Each direction contributes (1/2) g d3k * (I3 - khat khat^T),
        // averaged over images; a whole triple sums to g d3k * I3.
        c0 += g * d3k;
    }

    m.quad_l1_err_ = std::fabs(g_quad - sd.l1_norm()) / sd.l1_norm();
    if (m.quad_l1_err_ > 1e-3)
        throw std::runtime_error("CovarianceModel: mode quadrature misses the L1 norm of g "
                                 "by more than 0.1%; increase n_modes");

    // One scalar factor pins the discrete C(0) at exactly I3.
    for (Mode& mode : m.modes_)
        mode.w /= c0;

    m.r_c_ = coalsim::correlation_radius(sd);
    m.taper_end_ = 1.2 * m.r_c_;
    return m;
}

Sym3 CovarianceModel::evaluate_covariance(const Vec3& x) const {
    Sym3 acc{};
    for (const Mode& mode : modes_) {
        const double k2 = norm2(mode.k);
        const double wc = mode.w * std::cos(dot(mode.k, x));
        // w cos * (I3 - khat khat^T)
        acc.xx += wc * (1.0 - mode.k.x * mode.k.x / k2);
        acc.yy += wc * (1.0 - mode.k.y * mode.k.y / k2);
        acc.zz += wc * (1.0 - mode.k.z * mode.k.z / k2);
        acc.xy -= wc * mode.k.x * mode.k.y / k2;
        acc.xz -= wc * mode.k.x * mode.k.z / k2;
        acc.yz -= wc * mode.k.y * mode.k.z / k2;
    }
    return acc;
}

Sym3 CovarianceModel::omega_raw(const Vec3& x) const {
    // sum_j w_j (1 - cos(k.x)) P_j with 1 - cos = 2 sin^2(k.x/2): each term
    // is PSD and the small-|x| cancellation of I3 - C(x) never happens.
    Sym3 acc{};
    for (const Mode& mode : modes_) {
        const double k2 = norm2(mode.k);
        double s, c;
        fast_sincos(0.5 * dot(mode.k, x), s, c);
        const double wv = mode.w * 2.0 * s * s;
        acc.xx += wv * (1.0 - mode.k.x * mode.k.x / k2);
        acc.yy += wv * (1.0 - mode.k.y * mode.k.y / k2);
        acc.zz += wv * (1.0 - mode.k.z * mode.k.z / k2);
        acc.xy -= wv * mode.k.x * mode.k.y / k2;
        acc.xz -= wv * mode.k.x * mode.k.z / k2;
        acc.yz -= wv * mode.k.y * mode.k.z / k2;
    }
    return acc;
}

Sym3 CovarianceModel::omega(const Vec3& x) const {
    const double r = norm(x);
    if (r >= taper_end_)
        return Sym3::identity();
    Sym3 w = omega_raw(x);
    if (r <= r_c_)
        return w;
    const double s = (r - r_c_) / (taper_end_ - r_c_);
    const double tau = std::cos(0.5 * M_PI * s);
    const double tau2 = tau * tau;
    // (1 - tau) I3 + tau omega: convex, so PSD survives the blend.
    Sym3 out = tau2 * w;
    out.xx += 1.0 - tau2;
    out.yy += 1.0 - tau2;
    out.zz += 1.0 - tau2;
    return out;
}

} // namespace coalsim
