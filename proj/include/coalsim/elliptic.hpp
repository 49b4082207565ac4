#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "coalsim/field.hpp"
#include "coalsim/grid.hpp"
#include "coalsim/vec.hpp"

namespace coalsim {

/// Linear-solver and assembly failures (non-PSD coefficients, breakdown,
/// iteration caps). Configuration mistakes keep using ConfigError; this type
/// marks numerical trouble discovered after a config was accepted.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SolveStats {
    int iterations = 0;
    double rel_residual = 0.0;
};

/// Boundary data and unknowns for one Dirichlet solve. `field` carries the
/// prescribed values at fixed nodes on entry and the complete solution on
/// exit; `rhs` is the volume-weighted source, read at free nodes only.
struct DirichletProblem {
    std::vector<std::uint8_t> free_mask;
    std::vector<double> field;
    std::vector<double> rhs;
};

/// Symmetric positive semi-definite discretization of
///   u  ->  -div(A(x) grad u) + d(x) u
/// on a tensor grid, volume-weighted (the matrix is the Hessian of the
/// discrete energy, so it carries the control-volume metric).
///
/// The axis-diagonal part of A uses conservative two-point fluxes with
/// arithmetically averaged face coefficients: for constant diagonal A this
/// is exactly the volume-weighted 7-point Laplacian, and flux row sums
/// vanish away from the boundary. The off-diagonal part enters through the
/// quadratic form sum_n vol_n (grad0 u)^T A_off (grad0 u) with centered
/// nodal gradients, which keeps the matrix symmetric; positivity of the
/// total follows from the symbol bound |centered difference| <= |two-point
/// difference| per axis whenever every A(x) is PSD. Definiteness on the
/// free nodes comes from the diagonal part (min eigenvalue of A bounded
/// below) plus the Dirichlet boundary.
class EllipticOperator {
  public:
    using CoeffFn = std::function<Sym3(const Vec3&)>;
    using AbsorbFn = std::function<double(const Vec3&)>;

    /// Assemble from the coefficient callback and an optional nonnegative
    /// absorption d(x). Throws SolverError if any face-averaged coefficient
    /// matrix fails the PSD test, or ConfigError if absorption is negative.
    ///
    /// `mirror_low` declares the low face of every axis a symmetry plane of
    /// an even solution instead of a Dirichlet face: nodes there host
    /// cross-term gradients with the mirrored component pinned at zero,
    /// which is the exact restriction of a full-grid operator to even
    /// fields (the one-sided fluxes and clipped dual volumes already handle
    /// the rest). The octant-reduced solves rely on it.
    static EllipticOperator assemble(const TensorGrid3& grid, const CoeffFn& a,
                                     const AbsorbFn& absorption = {},
                                     bool mirror_low = false);

    const TensorGrid3& grid() const { return grid_; }

    /// Copy of this operator with the absorption term replaced. The flux
    /// coefficients (the expensive part when A comes from a mode sum) are
    /// reused as is; scans over the absorption strength stay cheap.
    EllipticOperator with_absorption(const AbsorbFn& absorption) const;

    /// In-place version of with_absorption, for callers that own the
    /// operator and scan many absorption strengths without copying. If the
    /// callback turns out negative somewhere the ConfigError leaves the
    /// absorption state unspecified; discard the operator in that case.
    void set_absorption(const AbsorbFn& absorption);

    /// out = L u on the full node set (fixed nodes included; their rows are
    /// the same flux rows, masking is the solver's business).
    void apply(const std::vector<double>& u, std::vector<double>& out,
               Exec exec = Exec::parallel) const;

    /// Quadratic-form energy u^T L u by direct quadrature of face fluxes and
    /// nodal gradients. Independent loop from apply(); used to cross-check
    /// operator assembly against the variational definition.
    double energy(const std::vector<double>& u) const;

    /// Preconditioned CG on the free nodes of `p` to relative residual
    /// `tol`: symmetric Gauss-Seidel sweeps over the 7-point part in
    /// red-black order precondition the full stencil. Throws SolverError on
    /// iteration cap or on a direction of nonpositive curvature (operator
    /// not positive definite on the free set).
    SolveStats solve(DirichletProblem& p, double tol = 1e-9, int max_iter = 20000,
                     Exec exec = Exec::parallel) const;

    bool has_cross_terms() const { return has_cross_; }

  private:
    EllipticOperator() = default;

    void apply_cross(const std::vector<double>& u, std::vector<double>& out, bool par) const;
    void sgs_precondition(const std::vector<double>& r, std::vector<double>& z,
                          const std::vector<std::uint8_t>& free_mask, bool par) const;

    TensorGrid3 grid_;
    bool mirror_low_ = false;
    // Face coupling between node (i,j,k) and its +x/+y/+z neighbor; the
    // entry at the last slab of each axis is unused and stays zero.
    std::vector<double> cfx_, cfy_, cfz_;
    // Off-diagonal coefficients times control volume, per node.
    std::vector<double> cxy_, cxz_, cyz_;
    // Centered-difference denominators per axis position.
    std::vector<double> den_;
    // Absorption times control volume, and the full matrix diagonal.
    std::vector<double> absorb_, diag_;
    bool has_cross_ = false;
    // Scratch for the gradient fields of the cross-term pass; solve() is
    // single-entry (one control thread), which makes mutable scratch safe.
    mutable std::vector<double> px_, py_, pz_;
};

} // namespace coalsim
