#pragma once

#include <cmath>
#include <stdexcept>

namespace coalsim {

/// Adaptive Simpson integration on [a, b]. Used for the radial integrals
/// that fix normalization constants (spectral density, interaction kernel)
/// and for the direct-transform covariance oracle. The integrands here are
/// smooth, so plain Simpson bisection converges fast.
namespace quad {

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adapt(F&& f, double a, double fa, double b, double fb, double m, double fm,
             double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0)
        throw std::runtime_error("quad::integrate: max recursion depth reached");
    if (std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
         + adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace detail

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-11, int max_depth = 48) {
    if (!(b > a))
        return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = detail::simpson(a, fa, b, fb, fm);
    return detail::adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

/// Fixed-order composite Gauss-Legendre (5-point panels). Kept as an
/// independent rule so normalization invariants can be cross-checked
/// against integrate() by a genuinely different quadrature.
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels = 64) {
    // 5-point Gauss-Legendre abscissas/weights on [-1, 1].
    static const double xs[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                 0.5384693101056831, 0.9061798459386640};
    static const double ws[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        double s = 0.0;
        for (int i = 0; i < 5; ++i)
            s += ws[i] * f(c + 0.5 * h * xs[i]);
        total += 0.5 * h * s;
    }
    return total;
}

} // namespace quad
} // namespace coalsim
