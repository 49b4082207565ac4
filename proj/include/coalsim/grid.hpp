#pragma once

#include <cstddef>
#include <vector>

#include "coalsim/config.hpp"

namespace coalsim {

/// One graded coordinate axis, symmetric about the origin: uniform spacing
/// h_core on [-core_radius, core_radius], then geometrically stretched cells
/// (ratio `stretch`) out to +-l_dom. The outermost nodes land exactly on
/// +-l_dom; the last spacing is clipped, never expanded, so the nominal
/// stretch ratio is an upper bound on neighboring-cell growth.
class Grid1D {
  public:
    static Grid1D graded(double h_core, double core_radius, double stretch, double l_dom);
    /// Uniform axis with n nodes spanning [-l_dom, l_dom].
    static Grid1D uniform(int n, double l_dom);
    /// Axis from explicit node coordinates (strictly increasing, >= 2 of
    /// them). Used by the mirror reduction of symmetric solves, which keeps
    /// the nonnegative half of an axis.
    static Grid1D from_coords(std::vector<double> coords);

    /// Same nodes with every coordinate multiplied by s > 0.
    Grid1D scaled(double s) const;

    const std::vector<double>& coords() const { return x_; }
    int n() const { return static_cast<int>(x_.size()); }
    double l_dom() const { return x_.back(); }

    /// Width of the dual (control-volume) cell around node i: half the span
    /// between the two neighboring nodes, clipped at the domain ends.
    double dual(int i) const;

  private:
    std::vector<double> x_;
};

/// Tensor-product grid using the same graded axis in x, y and z. Nodes are
/// indexed x-fastest; the boundary layer (outermost node on each face) is
/// reserved for Dirichlet data throughout the elliptic machinery.
struct TensorGrid3 {
    Grid1D axis;
    int n = 0; // nodes per axis

    static TensorGrid3 make(Grid1D axis);
    static TensorGrid3 from_json(const json& j);
    json to_json() const;

    std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }
    std::size_t idx(int i, int j, int k) const {
        return static_cast<std::size_t>(k) * n * n + static_cast<std::size_t>(j) * n + i;
    }
    bool boundary(int i, int j, int k) const {
        return i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
    }
    double vol(int i, int j, int k) const {
        return axis.dual(i) * axis.dual(j) * axis.dual(k);
    }

    // Grid parameters kept for reporting and refinement studies.
    double h_core = 0.0;
    double core_radius = 0.0;
    double stretch = 1.0;
};

} // namespace coalsim
