#include "coalsim/grid.hpp"

#include <algorithm>
#include <cmath>

namespace coalsim {

Grid1D Grid1D::graded(double h_core, double core_radius, double stretch, double l_dom) {
    if (h_core <= 0)
        throw ConfigError("grid.h_core: must be positive");
    if (stretch < 1.0)
        throw ConfigError("grid.stretch: must be >= 1");
    if (core_radius < h_core)
        throw ConfigError("grid.core_radius: must cover at least one core cell");
    if (l_dom <= core_radius)
        throw ConfigError("grid.l_dom: must exceed core_radius");

    std::vector<double> pos{0.0};
    const int n_core = std::max(1, static_cast<int>(std::lround(core_radius / h_core)));
    for (int i = 1; i <= n_core; ++i)
        pos.push_back(i * h_core);

    double delta = h_core;
    while (pos.back() < l_dom) {
        delta *= stretch;
        double next = pos.back() + delta;
        // Snap the final node onto the boundary instead of leaving a sliver.
        if (next >= l_dom - 0.3 * delta)
            next = l_dom;
        pos.push_back(next);
    }

    Grid1D g;
    g.x_.reserve(2 * pos.size() - 1);
    for (std::size_t i = pos.size(); i-- > 1;)
        g.x_.push_back(-pos[i]);
    for (const double x : pos)
        g.x_.push_back(x);
    return g;
}

Grid1D Grid1D::uniform(int n, double l_dom) {
    if (n < 3)
        throw ConfigError("grid.n: need at least 3 nodes per axis");
    if (l_dom <= 0)
        throw ConfigError("grid.l_dom: must be positive");
    Grid1D g;
    g.x_.resize(n);
    for (int i = 0; i < n; ++i)
        g.x_[i] = -l_dom + 2.0 * l_dom * i / (n - 1);
    g.x_.front() = -l_dom;
    g.x_.back() = l_dom;
    return g;
}

Grid1D Grid1D::from_coords(std::vector<double> coords) {
    if (coords.size() < 2)
        throw ConfigError("grid axis needs at least 2 nodes");
    for (std::size_t i = 1; i < coords.size(); ++i)
        if (!(coords[i] > coords[i - 1]))
            throw ConfigError("grid axis coordinates must be strictly increasing");
    Grid1D g;
    g.x_ = std::move(coords);
    return g;
}

Grid1D Grid1D::scaled(double s) const {
    if (s <= 0)
        throw ConfigError("grid scale factor must be positive");
    Grid1D g = *this;
    for (double& x : g.x_)
        x *= s;
    return g;
}

double Grid1D::dual(int i) const {
    const int last = n() - 1;
    const double lo = i == 0 ? x_[0] : 0.5 * (x_[i - 1] + x_[i]);
    const double hi = i == last ? x_[last] : 0.5 * (x_[i] + x_[i + 1]);
    return hi - lo;
}

TensorGrid3 TensorGrid3::make(Grid1D axis) {
    TensorGrid3 g;
    g.n = axis.n();
    g.axis = std::move(axis);
    return g;
}

TensorGrid3 TensorGrid3::from_json(const json& j) {
    cfg::check_keys(j, "grid", {"h_core", "core_radius", "stretch", "l_dom", "uniform_n"});
    const double l_dom = cfg::get_num(j, "l_dom", "grid");
    if (j.contains("uniform_n")) {
        TensorGrid3 g = make(Grid1D::uniform(
            static_cast<int>(cfg::get_int(j, "uniform_n", "grid")), l_dom));
        g.h_core = 2.0 * l_dom / (g.n - 1);
        g.core_radius = l_dom;
        g.stretch = 1.0;
        return g;
    }
    const double h = cfg::get_num(j, "h_core", "grid");
    const double core = cfg::get_num(j, "core_radius", "grid");
    const double stretch = cfg::get_num_or(j, "stretch", 1.08);
    TensorGrid3 g = make(Grid1D::graded(h, core, stretch, l_dom));
    g.h_core = h;
    g.core_radius = core;
    g.stretch = stretch;
    return g;
}

json TensorGrid3::to_json() const {
    if (stretch == 1.0 && core_radius == axis.l_dom())
        return json{{"uniform_n", n}, {"l_dom", axis.l_dom()}};
    return json{{"h_core", h_core},
                {"core_radius", core_radius},
                {"stretch", stretch},
                {"l_dom", axis.l_dom()}};
}

} // namespace coalsim
