#include <doctest.h>

#include <cmath>
#include <vector>

#include "coalsim/elliptic.hpp"
#include "coalsim/grid.hpp"
#include "coalsim/rng.hpp"

using namespace coalsim;

namespace {

std::vector<double> random_field(const TensorGrid3& g, std::uint64_t salt) {
    const std::uint64_t key = rng::stream(99, salt);
    std::vector<double> u(g.size());
    for (std::size_t m = 0; m < u.size(); ++m)
        u[m] = rng::uniform(key, m) - 0.5;
    return u;
}

double dot_all(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m)
        s += a[m] * b[m];
    return s;
}

// Smooth uniformly elliptic coefficient with large off-diagonal content:
// 0.3 I3 plus two spatially rotating rank-one terms.
Sym3 swirling_coeff(const Vec3& x) {
    const Vec3 v{std::sin(x.x + 0.3), std::cos(x.y - 0.7), 0.5 * x.z};
    const Vec3 w{0.4, std::sin(x.y * x.z), std::cos(0.5 * x.x)};
    Sym3 a = 0.3 * Sym3::identity();
    a += Sym3::outer(v, 0.8);
    a += Sym3::outer(w, 0.6);
    return a;
}

} // namespace

TEST_CASE("graded axis is symmetric, ordered and capped by the stretch ratio") {
    const Grid1D g = Grid1D::graded(0.1, 1.0, 1.1, 30.0);
    const auto& x = g.coords();
    const int n = g.n();
    REQUIRE(n >= 5);
    CHECK(x.front() == -30.0);
    CHECK(x.back() == 30.0);
    for (int i = 0; i < n; ++i)
        CHECK(x[i] == -x[n - 1 - i]); // built by mirroring, exact
    for (int i = 1; i < n; ++i)
        CHECK(x[i] > x[i - 1]);
    // Core spacing h, growth never above the stretch ratio.
    for (int i = 2; i < n - 1; ++i) {
        const double prev = x[i] - x[i - 1], next = x[i + 1] - x[i];
        CHECK(next / prev < 1.1 + 1e-12);
    }
    // Dual cells tile the interval exactly.
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        total += g.dual(i);
    CHECK(total == doctest::Approx(60.0).epsilon(1e-13));

    CHECK_THROWS_AS(Grid1D::graded(-0.1, 1.0, 1.1, 30.0), ConfigError);
    CHECK_THROWS_AS(Grid1D::graded(0.1, 1.0, 0.9, 30.0), ConfigError);
    CHECK_THROWS_AS(Grid1D::graded(0.1, 1.0, 1.1, 0.5), ConfigError);

    const Grid1D u = Grid1D::uniform(11, 2.0);
    CHECK(u.n() == 11);
    CHECK(u.coords()[5] == doctest::Approx(0.0));
    CHECK(u.dual(5) == doctest::Approx(0.4));
    CHECK(u.dual(0) == doctest::Approx(0.2));
}

TEST_CASE("constant diagonal coefficients give the volume-weighted 7-point Laplacian") {
    const double s2 = 0.49; // sigma0^2
    const TensorGrid3 g = TensorGrid3::make(Grid1D::uniform(17, 1.0));
    const double h = 2.0 / 16;
    const EllipticOperator op = EllipticOperator::assemble(
        g, [&](const Vec3&) { return s2 * Sym3::identity(); });
    CHECK_FALSE(op.has_cross_terms());

    const std::vector<double> u = random_field(g, 1);
    std::vector<double> lu;
    op.apply(u, lu);

    // Interior rows equal -s2 * h^3 * (standard 7-point Laplacian).
    for (int k = 1; k < g.n - 1; ++k)
        for (int j = 1; j < g.n - 1; ++j)
            for (int i = 1; i < g.n - 1; ++i) {
                const std::size_t m = g.idx(i, j, k);
                const double lap7 =
                    (u[g.idx(i + 1, j, k)] + u[g.idx(i - 1, j, k)] + u[g.idx(i, j + 1, k)] +
                     u[g.idx(i, j - 1, k)] + u[g.idx(i, j, k + 1)] + u[g.idx(i, j, k - 1)] -
                     6.0 * u[m]) /
                    (h * h);
                CHECK(lu[m] == doctest::Approx(-s2 * h * h * h * lap7).epsilon(1e-12));
            }

    // Flux row sums vanish: the operator annihilates constants exactly.
    const std::vector<double> ones(g.size(), 1.0);
    std::vector<double> lones;
    op.apply(ones, lones);
    for (const double v : lones)
        CHECK(std::fabs(v) < 1e-13);

    // With absorption, constants map to the volume-weighted absorption.
    const EllipticOperator opd = EllipticOperator::assemble(
        g, [&](const Vec3&) { return s2 * Sym3::identity(); },
        [](const Vec3& x) { return 2.0 + x.x; });
    opd.apply(ones, lones);
    for (int k = 1; k < g.n - 1; ++k)
        for (int j = 1; j < g.n - 1; ++j)
            for (int i = 1; i < g.n - 1; ++i) {
                const std::size_t m = g.idx(i, j, k);
                const double xc = g.axis.coords()[i];
                CHECK(lones[m] == doctest::Approx((2.0 + xc) * h * h * h).epsilon(1e-12));
            }
}

TEST_CASE("full-tensor assembly is symmetric and positive semi-definite") {
    const TensorGrid3 g = TensorGrid3::make(Grid1D::uniform(13, 1.5));
    const EllipticOperator op = EllipticOperator::assemble(g, swirling_coeff);
    REQUIRE(op.has_cross_terms());

    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<double> u = random_field(g, 10 + trial);
        const std::vector<double> v = random_field(g, 20 + trial);
        std::vector<double> lu, lv;
        op.apply(u, lu);
        op.apply(v, lv);
        const double vlu = dot_all(v, lu), ulv = dot_all(u, lv);
        CHECK(vlu == doctest::Approx(ulv).epsilon(1e-12));
        // Two independent codings of the quadratic form.
        CHECK(op.energy(u) == doctest::Approx(dot_all(u, lu)).epsilon(1e-12));
        CHECK(dot_all(u, lu) >= 0.0);
    }

    // Checkerboard: worst case for cell-centered gradient schemes, which the
    // two-point diagonal part must keep positive.
    std::vector<double> cb(g.size());
    for (int k = 0; k < g.n; ++k)
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i)
                cb[g.idx(i, j, k)] = ((i + j + k) & 1) ? 1.0 : -1.0;
    CHECK(op.energy(cb) > 0.0);

    // Constants stay in the kernel of the flux part even with cross terms.
    const std::vector<double> ones(g.size(), 1.0);
    std::vector<double> lones;
    op.apply(ones, lones);
    for (const double v : lones)
        CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("assembly rejects coefficient matrices that lose PSD") {
    const TensorGrid3 g = TensorGrid3::make(Grid1D::uniform(5, 1.0));
    CHECK_THROWS_AS(EllipticOperator::assemble(g,
                                               [](const Vec3&) {
                                                   Sym3 a = Sym3::identity();
                                                   a.zz = -0.05;
                                                   return a;
                                               }),
                    SolverError);
    // Degenerate-indefinite case that leading minors alone would accept.
    CHECK_THROWS_AS(EllipticOperator::assemble(g,
                                               [](const Vec3&) {
                                                   Sym3 a;
                                                   a.xx = 0.0;
                                                   a.yy = 0.0;
                                                   a.zz = -1.0;
                                                   return a;
                                               }),
                    SolverError);
    CHECK_THROWS_AS(EllipticOperator::assemble(
                        g, [](const Vec3&) { return Sym3::identity(); },
                        [](const Vec3&) { return -1.0; }),
                    ConfigError);
}

TEST_CASE("manufactured solution converges at second order") {
    // u* = exp(-|x|^2) with A = I3: -div(grad u*) = -(4 |x|^2 - 6) exp(-|x|^2).
    const auto u_star = [](const Vec3& x) { return std::exp(-dot(x, x)); };
    const auto rhs_fn = [&](const Vec3& x) {
        const double r2 = dot(x, x);
        return -(4.0 * r2 - 6.0) * std::exp(-r2);
    };

    std::vector<double> errs;
    for (const int n : {17, 33, 65}) {
        const TensorGrid3 g = TensorGrid3::make(Grid1D::uniform(n, 4.0));
        const EllipticOperator op =
            EllipticOperator::assemble(g, [](const Vec3&) { return Sym3::identity(); });
        DirichletProblem p;
        p.free_mask.assign(g.size(), 0);
        p.field.assign(g.size(), 0.0);
        p.rhs.assign(g.size(), 0.0);
        const auto& x = g.axis.coords();
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const std::size_t m = g.idx(i, j, k);
                    const Vec3 xc{x[i], x[j], x[k]};
                    if (g.boundary(i, j, k)) {
                        p.field[m] = u_star(xc); // exact Dirichlet data
                    } else {
                        p.free_mask[m] = 1;
                        p.rhs[m] = rhs_fn(xc) * g.vol(i, j, k);
                    }
                }
        const SolveStats st = op.solve(p, 1e-11);
        CHECK(st.rel_residual <= 1e-11);
        double err = 0.0;
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    err = std::fmax(err, std::fabs(p.field[g.idx(i, j, k)] -
                                                   u_star(Vec3{x[i], x[j], x[k]})));
        errs.push_back(err);
    }
    const double order1 = std::log2(errs[0] / errs[1]);
    const double order2 = std::log2(errs[1] / errs[2]);
    CHECK(order1 >= 1.9);
    CHECK(order2 >= 1.9);
}

TEST_CASE("solver reports stats, supports warm starts and enforces its caps") {
    const TensorGrid3 g = TensorGrid3::make(Grid1D::uniform(15, 1.0));
    const EllipticOperator op = EllipticOperator::assemble(g, swirling_coeff);

    DirichletProblem p;
    p.free_mask.assign(g.size(), 0);
    p.field.assign(g.size(), 0.0);
    p.rhs.assign(g.size(), 0.0);
    for (int k = 1; k < g.n - 1; ++k)
        for (int j = 1; j < g.n - 1; ++j)
            for (int i = 1; i < g.n - 1; ++i) {
                const std::size_t m = g.idx(i, j, k);
                p.free_mask[m] = 1;
                p.rhs[m] = g.vol(i, j, k);
            }

    DirichletProblem cold = p;
    const SolveStats st = op.solve(cold, 1e-10);
    CHECK(st.iterations > 0);
    CHECK(st.rel_residual <= 1e-10);

    // Warm start from the converged field: the residual is already small.
    DirichletProblem warm = cold;
    warm.rhs = p.rhs;
    const SolveStats st2 = op.solve(warm, 1e-10);
    CHECK(st2.iterations <= 2);
    for (std::size_t m = 0; m < warm.field.size(); ++m)
        CHECK(warm.field[m] == doctest::Approx(cold.field[m]).epsilon(1e-8));

    DirichletProblem capped = p;
    CHECK_THROWS_WITH_AS(op.solve(capped, 1e-12, 2), doctest::Contains("no convergence"),
                         SolverError);

    // Serial and parallel execution agree to solver tolerance.
    DirichletProblem serial = p;
    op.solve(serial, 1e-10, 20000, Exec::serial);
    for (std::size_t m = 0; m < serial.field.size(); ++m)
        CHECK(serial.field[m] == doctest::Approx(cold.field[m]).epsilon(1e-7));
}

TEST_CASE("mirror-plane assembly restricts the full operator to even fields") {
    // Coefficient with the parities of a reflection-invariant tensor field:
    // diagonal entries even per axis, each off-diagonal odd in exactly its
    // two axes. Entry sizes keep every matrix diagonally dominant, so the
    // PSD gate stays happy.
    const auto even_coeff = [](const Vec3& x) {
        Sym3 a = 0.4 * Sym3::identity();
        a.xx += 0.2 * std::cos(x.x) * std::cos(2.0 * x.y);
        a.yy += 0.15 * std::cos(x.y) * std::cos(x.z);
        a.zz += 0.1 * std::cos(0.5 * x.x);
        a.xy = 0.10 * std::sin(x.x) * std::sin(x.y) * std::cos(x.z);
        a.xz = 0.08 * std::sin(x.x) * std::cos(x.y) * std::sin(x.z);
        a.yz = 0.12 * std::cos(x.x) * std::sin(x.y) * std::sin(x.z);
        return a;
    };
    const auto absorb = [](const Vec3& x) { return 0.3 * std::exp(-dot(x, x)); };
    const auto source = [](const Vec3& x) { return std::exp(-0.5 * dot(x, x)); };

    const TensorGrid3 full = TensorGrid3::make(Grid1D::graded(0.25, 1.0, 1.2, 6.0));
    const int n = full.n;
    const int c = (n - 1) / 2; // index of x = 0 on the symmetric axis
    REQUIRE(full.axis.coords()[c] == 0.0);
    const EllipticOperator full_op = EllipticOperator::assemble(full, even_coeff, absorb);

    const auto& xs = full.axis.coords();
    const TensorGrid3 oct = TensorGrid3::make(
        Grid1D::from_coords(std::vector<double>(xs.begin() + c, xs.end())));
    const EllipticOperator oct_op =
        EllipticOperator::assemble(oct, even_coeff, absorb, /*mirror_low=*/true);

    // Rowwise restriction identity on a random even field: the full-grid
    // residual at a node sitting on p symmetry planes is 2^p times the
    // octant residual, because the octant row sees clipped dual volumes.
    std::vector<double> ue(full.size());
    {
        const std::vector<double> uo = random_field(oct, 17);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                    ue[full.idx(i, j, k)] =
                        uo[oct.idx(std::abs(i - c), std::abs(j - c), std::abs(k - c))];
        std::vector<double> au_full(full.size()), au_oct(oct.size());
        full_op.apply(ue, au_full);
        oct_op.apply(uo, au_oct);
        double worst = 0.0;
        for (int k = 0; k < oct.n; ++k)
            for (int j = 0; j < oct.n; ++j)
                for (int i = 0; i < oct.n; ++i) {
                    const int planes = (i == 0) + (j == 0) + (k == 0);
                    const double lhs = au_full[full.idx(c + i, c + j, c + k)];
                    const double rhs = double(1 << planes) * au_oct[oct.idx(i, j, k)];
                    worst = std::fmax(worst, std::fabs(lhs - rhs));
                }
        CHECK(worst < 1e-12);
        // Same identity summed: the even field's energy is eight octants.
        CHECK(full_op.energy(ue) ==
              doctest::Approx(8.0 * oct_op.energy(uo)).epsilon(1e-12));
    }

    // End to end: the octant solve, mirrored out, is the full-grid solve.
    DirichletProblem pf;
    pf.free_mask.assign(full.size(), 0);
    pf.field.assign(full.size(), 0.0);
    pf.rhs.assign(full.size(), 0.0);
    for (int k = 1; k < n - 1; ++k)
        for (int j = 1; j < n - 1; ++j)
            for (int i = 1; i < n - 1; ++i) {
                const std::size_t m = full.idx(i, j, k);
                pf.free_mask[m] = 1;
                pf.rhs[m] = source(Vec3{xs[i], xs[j], xs[k]}) * full.vol(i, j, k);
            }
    full_op.solve(pf, 1e-12);

    DirichletProblem po;
    po.free_mask.assign(oct.size(), 0);
    po.field.assign(oct.size(), 0.0);
    po.rhs.assign(oct.size(), 0.0);
    const auto& xo = oct.axis.coords();
    for (int k = 0; k < oct.n - 1; ++k)
        for (int j = 0; j < oct.n - 1; ++j)
            for (int i = 0; i < oct.n - 1; ++i) {
                const std::size_t m = oct.idx(i, j, k);
                po.free_mask[m] = 1;
                po.rhs[m] = source(Vec3{xo[i], xo[j], xo[k]}) * oct.vol(i, j, k);
            }
    oct_op.solve(po, 1e-12);

    double umax = 0.0, diff = 0.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double f = pf.field[full.idx(i, j, k)];
                const double o =
                    po.field[oct.idx(std::abs(i - c), std::abs(j - c), std::abs(k - c))];
                umax = std::fmax(umax, std::fabs(f));
                diff = std::fmax(diff, std::fabs(f - o));
            }
    CHECK(diff < 1e-9 * umax);
}
