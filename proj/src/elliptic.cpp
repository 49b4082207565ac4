#include "coalsim/elliptic.hpp"

#include <cmath>
#include <cstdio>
#include <omp.h>

namespace coalsim {
namespace {

// PSD test with a relative slack for roundoff. Strictly positive leading
// minors prove definiteness cheaply (Sylvester); anything borderline falls
// back to the closed-form minimum eigenvalue, since the minors test alone
// cannot reject degenerate-indefinite matrices. The physical coefficients
// are sums sigma0^2 I + sigma^2 omega with omega PSD by construction, so a
// failure here means a broken coefficient callback.
bool minors_psd(const Sym3& a) {
    const double m2 = a.xx * a.yy - a.xy * a.xy;
    const double det = a.xx * (a.yy * a.zz - a.yz * a.yz) - a.xy * (a.xy * a.zz - a.yz * a.xz) +
                       a.xz * (a.xy * a.yz - a.yy * a.xz);
    if (a.xx > 0 && m2 > 0 && det > 0)
        return true;
    const double scale =
        std::fmax(std::fmax(std::fabs(a.xx), std::fabs(a.yy)), std::fabs(a.zz)) + 1e-300;
    return min_eigenvalue(a) >= -1e-10 * scale;
}

[[noreturn]] void throw_face_psd(const char* axis, int i, int j, int k) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "face-averaged coefficient matrix not PSD at %s-face of node (%d,%d,%d)", axis,
                  i, j, k);
    throw SolverError(buf);
}

} // namespace

EllipticOperator EllipticOperator::assemble(const TensorGrid3& grid, const CoeffFn& a,
                                            const AbsorbFn& absorption, bool mirror_low) {
    EllipticOperator op;
    op.grid_ = grid;
    op.mirror_low_ = mirror_low;
    const int n = grid.n;
    const auto& x = grid.axis.coords();
    const std::size_t sz = grid.size();
    const std::size_t nn = static_cast<std::size_t>(n) * n;

    std::vector<Sym3> anode(sz);
#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                anode[grid.idx(i, j, k)] = a(Vec3{x[i], x[j], x[k]});

    op.cfx_.assign(sz, 0.0);
    op.cfy_.assign(sz, 0.0);
    op.cfz_.assign(sz, 0.0);
    op.cxy_.assign(sz, 0.0);
    op.cxz_.assign(sz, 0.0);
    op.cyz_.assign(sz, 0.0);
    op.absorb_.assign(sz, 0.0);
    op.diag_.assign(sz, 0.0);
    op.den_.assign(n, 0.0);
    for (int i = 1; i < n - 1; ++i)
        op.den_[i] = x[i + 1] - x[i - 1];

    // Failures are recorded and thrown after the loop: an exception may not
    // escape an OpenMP parallel region.
    bool cross = false;
    int bad_axis = -1, bad_i = 0, bad_j = 0, bad_k = 0;
    bool bad_absorb = false;
#pragma omp parallel for collapse(2) schedule(static) reduction(|| : cross, bad_absorb)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            const double dj = grid.axis.dual(j), dk = grid.axis.dual(k);
            for (int i = 0; i < n; ++i) {
                const std::size_t m = grid.idx(i, j, k);
                const double di = grid.axis.dual(i);
                int fail = -1;
                if (i + 1 < n) {
                    const Sym3 avg = 0.5 * (anode[m] + anode[m + 1]);
                    if (!minors_psd(avg))
                        fail = 0;
                    op.cfx_[m] = avg.xx * dj * dk / (x[i + 1] - x[i]);
                }
                if (j + 1 < n) {
                    const Sym3 avg = 0.5 * (anode[m] + anode[m + n]);
                    if (!minors_psd(avg))
                        fail = 1;
                    op.cfy_[m] = avg.yy * di * dk / (x[j + 1] - x[j]);
                }
                if (k + 1 < n) {
                    const Sym3 avg = 0.5 * (anode[m] + anode[m + nn]);
                    if (!minors_psd(avg))
                        fail = 2;
                    op.cfz_[m] = avg.zz * di * dj / (x[k + 1] - x[k]);
                }
                if (fail >= 0) {
#pragma omp critical(coalsim_elliptic_psd)
                    if (bad_axis < 0) {
                        bad_axis = fail;
                        bad_i = i;
                        bad_j = j;
                        bad_k = k;
                    }
                }
                // Mirror planes host gradients like interior nodes; their
                // pinned-to-zero components are handled at application time.
                const bool host = i < n - 1 && j < n - 1 && k < n - 1 &&
                                  (mirror_low || (i > 0 && j > 0 && k > 0));
                if (host) {
                    const double vol = di * dj * dk;
                    op.cxy_[m] = anode[m].xy * vol;
                    op.cxz_[m] = anode[m].xz * vol;
                    op.cyz_[m] = anode[m].yz * vol;
                    cross = cross || op.cxy_[m] != 0.0 || op.cxz_[m] != 0.0 || op.cyz_[m] != 0.0;
                }
                if (absorption) {
                    const double d = absorption(Vec3{x[i], x[j], x[k]});
                    bad_absorb = bad_absorb || d < 0;
                    op.absorb_[m] = d * di * dj * dk;
                }
            }
        }
    if (bad_axis >= 0)
        throw_face_psd(bad_axis == 0 ? "x" : bad_axis == 1 ? "y" : "z", bad_i, bad_j, bad_k);
    if (bad_absorb)
        throw ConfigError("absorption coefficient must be nonnegative");
    op.has_cross_ = cross;

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t m = grid.idx(i, j, k);
                double d = op.absorb_[m];
                if (i > 0)
                    d += op.cfx_[m - 1];
                if (i + 1 < n)
                    d += op.cfx_[m];
                if (j > 0)
                    d += op.cfy_[m - n];
                if (j + 1 < n)
                    d += op.cfy_[m];
                if (k > 0)
                    d += op.cfz_[m - nn];
                if (k + 1 < n)
                    d += op.cfz_[m];
                op.diag_[m] = d;
            }
    return op;
}

EllipticOperator EllipticOperator::with_absorption(const AbsorbFn& absorption) const {
    EllipticOperator op = *this;
    op.set_absorption(absorption);
    return op;
}

void EllipticOperator::set_absorption(const AbsorbFn& absorption) {
    const int n = grid_.n;
    const auto& x = grid_.axis.coords();
    bool bad_absorb = false;
#pragma omp parallel for collapse(2) schedule(static) reduction(|| : bad_absorb)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t m = grid_.idx(i, j, k);
                double d = 0.0;
                if (absorption) {
                    d = absorption(Vec3{x[i], x[j], x[k]});
                    bad_absorb = bad_absorb || d < 0;
                    d *= grid_.vol(i, j, k);
                }
                diag_[m] += d - absorb_[m];
                absorb_[m] = d;
            }
    if (bad_absorb)
        throw ConfigError("absorption coefficient must be nonnegative");
}

void EllipticOperator::apply(const std::vector<double>& u, std::vector<double>& out,
                             Exec exec) const {
    const int n = grid_.n;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    out.resize(u.size());
    const bool par = exec == Exec::parallel;
#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            const std::size_t row = grid_.idx(0, j, k);
            for (int i = 0; i < n; ++i) {
                const std::size_t m = row + i;
                double acc = diag_[m] * u[m];
                if (i > 0)
                    acc -= cfx_[m - 1] * u[m - 1];
                if (i + 1 < n)
                    acc -= cfx_[m] * u[m + 1];
                if (j > 0)
                    acc -= cfy_[m - n] * u[m - n];
                if (j + 1 < n)
                    acc -= cfy_[m] * u[m + n];
                if (k > 0)
                    acc -= cfz_[m - nn] * u[m - nn];
                if (k + 1 < n)
                    acc -= cfz_[m] * u[m + nn];
                out[m] = acc;
            }
        }
    if (has_cross_)
        apply_cross(u, out, par);
}

void EllipticOperator::apply_cross(const std::vector<double>& u, std::vector<double>& out,
                                   bool par) const {
    const int n = grid_.n;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    px_.assign(u.size(), 0.0);
    py_.assign(u.size(), 0.0);
    pz_.assign(u.size(), 0.0);
    // On mirror planes the gradient component across the plane is zero for
    // the even solution, so such a host neither reads nor scatters along
    // that axis; the other components work as in the interior.
    const int lo = mirror_low_ ? 0 : 1;
#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int k = lo; k < n - 1; ++k)
        for (int j = lo; j < n - 1; ++j)
            for (int i = lo; i < n - 1; ++i) {
                const std::size_t m = grid_.idx(i, j, k);
                const double gx = i > 0 ? (u[m + 1] - u[m - 1]) / den_[i] : 0.0;
                const double gy = j > 0 ? (u[m + n] - u[m - n]) / den_[j] : 0.0;
                const double gz = k > 0 ? (u[m + nn] - u[m - nn]) / den_[k] : 0.0;
                if (i > 0)
                    px_[m] = (cxy_[m] * gy + cxz_[m] * gz) / den_[i];
                if (j > 0)
                    py_[m] = (cxy_[m] * gx + cyz_[m] * gz) / den_[j];
                if (k > 0)
                    pz_[m] = (cxz_[m] * gx + cyz_[m] * gy) / den_[k];
            }
#pragma omp parallel for collapse(2) schedule(static) if (par)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t m = grid_.idx(i, j, k);
                double acc = 0.0;
                if (i > 0)
                    acc += px_[m - 1];
                if (i + 1 < n)
                    acc -= px_[m + 1];
                if (j > 0)
                    acc += py_[m - n];
                if (j + 1 < n)
                    acc -= py_[m + n];
                if (k > 0)
                    acc += pz_[m - nn];
                if (k + 1 < n)
                    acc -= pz_[m + nn];
                out[m] += acc;
            }
}

double EllipticOperator::energy(const std::vector<double>& u) const {
    const int n = grid_.n;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    double e = 0.0;
#pragma omp parallel for collapse(2) schedule(static) reduction(+ : e)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t m = grid_.idx(i, j, k);
                if (i + 1 < n) {
                    const double d = u[m + 1] - u[m];
                    e += cfx_[m] * d * d;
                }
                if (j + 1 < n) {
                    const double d = u[m + n] - u[m];
                    e += cfy_[m] * d * d;
                }
                if (k + 1 < n) {
                    const double d = u[m + nn] - u[m];
                    e += cfz_[m] * d * d;
                }
                e += absorb_[m] * u[m] * u[m];
                const bool host = i < n - 1 && j < n - 1 && k < n - 1 &&
                                  (mirror_low_ || (i > 0 && j > 0 && k > 0));
                if (host && has_cross_) {
                    const double gx = i > 0 ? (u[m + 1] - u[m - 1]) / den_[i] : 0.0;
                    const double gy = j > 0 ? (u[m + n] - u[m - n]) / den_[j] : 0.0;
                    const double gz = k > 0 ? (u[m + nn] - u[m - nn]) / den_[k] : 0.0;
                    e += 2.0 * (cxy_[m] * gx * gy + cxz_[m] * gx * gz + cyz_[m] * gy * gz);
                }
            }
    return e;
}

void EllipticOperator::sgs_precondition(const std::vector<double>& r, std::vector<double>& z,
                                        const std::vector<std::uint8_t>& free_mask,
                                        bool par) const {
    const int n = grid_.n;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    z.assign(r.size(), 0.0);

    // Symmetric Gauss-Seidel on the 7-point part in red-black order: with
    // unknowns colored by node parity, the forward solve touches red rows
    // trivially and black rows once, and the backward solve updates red rows
    // from the black values. Each color sweep is embarrassingly parallel.
    const auto sweep = [&](int color, bool add_neighbors) {
#pragma omp parallel for collapse(2) schedule(static) if (par)
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) {
                const int start = (color + j + k) & 1;
                const std::size_t row = grid_.idx(0, j, k);
                for (int i = start; i < n; i += 2) {
                    const std::size_t m = row + i;
                    if (!free_mask[m])
                        continue;
                    double acc = r[m];
                    if (add_neighbors) {
                        if (i > 0)
                            acc += cfx_[m - 1] * z[m - 1];
                        if (i + 1 < n)
                            acc += cfx_[m] * z[m + 1];
                        if (j > 0)
                            acc += cfy_[m - n] * z[m - n];
                        if (j + 1 < n)
                            acc += cfy_[m] * z[m + n];
                        if (k > 0)
                            acc += cfz_[m - nn] * z[m - nn];
                        if (k + 1 < n)
                            acc += cfz_[m] * z[m + nn];
                    }
                    z[m] = acc / diag_[m];
                }
            }
    };
    sweep(0, false); // red rows of the forward solve
    sweep(1, true);  // black rows see the red values
    sweep(0, true);  // backward solve updates red from black
}

SolveStats EllipticOperator::solve(DirichletProblem& p, double tol, int max_iter,
                                   Exec exec) const {
    const std::size_t sz = grid_.size();
    if (p.free_mask.size() != sz || p.field.size() != sz || p.rhs.size() != sz)
        throw SolverError("dirichlet problem arrays do not match the grid");
    const bool par = exec == Exec::parallel;

    for (std::size_t m = 0; m < sz; ++m)
        if (p.free_mask[m] && diag_[m] <= 0)
            throw SolverError("operator diagonal not positive on a free node");

    // Split the field into fixed data and the free-node iterate; the fixed
    // part enters through the right-hand side.
    std::vector<double> ufix(sz, 0.0), w(sz, 0.0);
    for (std::size_t m = 0; m < sz; ++m) {
        if (p.free_mask[m])
            w[m] = p.field[m]; // warm start from the incoming field
        else
            ufix[m] = p.field[m];
    }

    std::vector<double> tmp(sz), b(sz, 0.0), r(sz, 0.0), z(sz), pvec(sz, 0.0), ap(sz);
    apply(ufix, tmp, exec);
    double bnorm2 = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : bnorm2) if (par)
    for (std::size_t m = 0; m < sz; ++m) {
        b[m] = p.free_mask[m] ? p.rhs[m] - tmp[m] : 0.0;
        bnorm2 += b[m] * b[m];
    }
    if (bnorm2 == 0.0) {
        p.field = ufix;
        return SolveStats{0, 0.0};
    }

    apply(w, tmp, exec);
    double rnorm2 = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : rnorm2) if (par)
    for (std::size_t m = 0; m < sz; ++m) {
        r[m] = p.free_mask[m] ? b[m] - tmp[m] : 0.0;
        rnorm2 += r[m] * r[m];
    }

    const double stop2 = tol * tol * bnorm2;
    sgs_precondition(r, z, p.free_mask, par);
    double rz = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : rz) if (par)
    for (std::size_t m = 0; m < sz; ++m)
        rz += r[m] * z[m];
    pvec = z;

    int it = 0;
    while (rnorm2 > stop2) {
        if (++it > max_iter)
            throw SolverError("no convergence: CG iteration cap reached");
        apply(pvec, ap, exec);
        double pap = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : pap) if (par)
        for (std::size_t m = 0; m < sz; ++m) {
            if (!p.free_mask[m])
                ap[m] = 0.0;
            pap += pvec[m] * ap[m];
        }
        if (!(pap > 0))
            throw SolverError("operator not positive definite on the free nodes");
        const double alpha = rz / pap;
        rnorm2 = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : rnorm2) if (par)
        for (std::size_t m = 0; m < sz; ++m) {
            w[m] += alpha * pvec[m];
            r[m] -= alpha * ap[m];
            rnorm2 += r[m] * r[m];
        }
        if (rnorm2 <= stop2)
            break;
        sgs_precondition(r, z, p.free_mask, par);
        double rz_new = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : rz_new) if (par)
        for (std::size_t m = 0; m < sz; ++m)
            rz_new += r[m] * z[m];
        const double beta = rz_new / rz;
        rz = rz_new;
#pragma omp parallel for schedule(static) if (par)
        for (std::size_t m = 0; m < sz; ++m)
            pvec[m] = z[m] + beta * pvec[m];
    }

    for (std::size_t m = 0; m < sz; ++m)
        p.field[m] = ufix[m] + w[m];
    return SolveStats{it, std::sqrt(rnorm2 / bnorm2)};
}

} // namespace coalsim
