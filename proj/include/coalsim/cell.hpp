#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "coalsim/elliptic.hpp"
#include "coalsim/grid.hpp"
#include "coalsim/particles.hpp"

namespace coalsim {

/// One auxiliary two-point problem: find the vanishing-at-infinity u with
///   sigma0^2 lap(u) + sigma^2 div(omega(xi x) grad u) = R0 theta(|x|) (1 + u).
/// The domain is truncated at the grid boundary with homogeneous Dirichlet
/// data, justified by the 1/|x| decay of u and enforced post hoc by the
/// boundary-layer guard.
struct CellProblem {
    double sigma0 = 1.0;
    double sigma = 0.0;
    double xi = 1.0;
    double r0 = 1.0;
    KernelTheta theta = KernelTheta::quartic_shell();
    /// omega(y), evaluated by the problem at y = xi * x. Required when
    /// sigma > 0; the coefficient is A(x) = sigma0^2 I3 + sigma^2 omega(xi x).
    std::function<Sym3(const Vec3&)> omega;
    TensorGrid3 grid;
    /// Truncation guard: reject the solve when max |u| on the layer next to
    /// the boundary exceeds this fraction of max |u|.
    double boundary_tol = 1e-3;

    void validate() const;
};

struct CellSolution {
    TensorGrid3 grid;
    std::vector<double> u;
    /// Relative residual of the returned field, always measured against the
    /// full-grid operator (also when the solve ran mirror-reduced).
    double residual_norm = 0.0;
    int iterations = 0;
    double rbar_theta = 0.0;
    double rbar_laplace = 0.0;
    /// True when the solve ran on the nonnegative octant and was mirrored
    /// out, which the symmetric grids and coefficient fields of production
    /// problems permit at an eighth of the unknowns.
    bool mirror_reduced = false;
};

/// Flux part of the cell operator (no absorption): reusable across scans in
/// the interaction strength R0, which only changes the absorption diagonal.
EllipticOperator assemble_cell_operator(const CellProblem& prob);

/// Assemble, solve to relative residual 1e-9, and fill in both collision
/// rate estimates. Throws SolverError on non-convergence or when the
/// boundary-layer guard finds the domain too small.
///
/// Solves exploit symmetry: the coefficient field of every production
/// problem is even in each coordinate (omega comes from a mirror-symmetric
/// covariance, theta is radial), so the solve runs on the nonnegative
/// octant with no-flux symmetry planes and the field is mirrored out.
/// Correctness never rests on that assumption: the mirrored field's
/// residual is verified against the full-grid operator, and a miss (an
/// asymmetric omega callback, an asymmetric grid) falls back to the plain
/// full-grid solve.
CellSolution solve_cell(const CellProblem& prob, Exec exec = Exec::parallel);

/// Solve across a list of R0 values, reusing the flux assembly and warm
/// starting each solve from the previous solution. Order of results matches
/// the input order.
std::vector<CellSolution> solve_cell_scan(const CellProblem& prob,
                                          const std::vector<double>& r0_values,
                                          Exec exec = Exec::parallel);

/// Both collision-rate quadratures for a given solution field:
/// rate integral of R0 theta (1+u), and (sigma0^2 + sigma^2) times the
/// volume sum of the plain 7-point Laplacian of u (not the full operator;
/// the far-field coefficient is (sigma0^2 + sigma^2) I3, which makes the two
/// agree by parts on a large enough domain).
std::pair<double, double> compute_rbar(const TensorGrid3& grid, const std::vector<double>& u,
                                       const CellProblem& prob);

/// The solution viewed at particle radius eps: u_eps(x) = u(x/eps) / eps on
/// the grid scaled by eps. Diagnostic for the decay bound |u_eps| <= M /
/// max(|x|, eps).
struct RescaledField {
    TensorGrid3 grid;
    std::vector<double> u;
};

RescaledField rescale_solution(const CellSolution& sol, double eps_radius);

} // namespace coalsim
