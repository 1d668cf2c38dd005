#pragma once

#include <vector>

#include "radial_grid.hpp"

namespace critwave {

// Stored solution pair at time t: u and v = d_t u in physical time, whichever
// direction the run was integrated in.
struct Snapshot {
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> v;
};

struct SnapshotSet {
    GridPtr grid;
    std::vector<Snapshot> frames;

    bool empty() const { return frames.empty(); }
    std::size_t size() const { return frames.size(); }
    RadialField u(std::size_t i) const { return RadialField(grid, frames[i].u); }
    RadialField v(std::size_t i) const { return RadialField(grid, frames[i].v); }
    double t(std::size_t i) const { return frames[i].t; }
    // signed spacing; uniform by construction
    double dt() const { return frames.size() > 1 ? frames[1].t - frames[0].t : 0.0; }
};

} // namespace critwave
