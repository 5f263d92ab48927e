#pragma once

#include <cstdint>
#include <vector>

#include "cihj/grid.hpp"

namespace cihj {

/// Finite, enumerable compact family of grid paths closed under stopping
/// and under constant-velocity extension by alphabet velocities: the grid
/// analogue of the compact sets D of Lipschitz paths.
struct PathFamily {
    GridSpec spec;
    double start_box = 0.0;    ///< bound on ||x(-h)||
    double slope_bound = 0.0;  ///< Lipschitz budget L on [0, T]
    std::vector<std::vector<double>> velocity_alphabet; ///< each entry in R^n, ||v|| <= slope_bound
    std::vector<std::vector<double>> start_values;      ///< start lattice inside the start box
    std::uint64_t cap = 1'000'000;

    void validate() const;

    /// Alphabet with the zero velocity appended when absent; stopping
    /// closure forces 0 into the velocity set.
    std::vector<std::vector<double>> effective_alphabet() const;
};

/// Enumerates every path whose per-interval velocity (past and future
/// intervals alike) lies in the effective alphabet and whose start lies on
/// the start lattice. Deterministic order: start index, then velocity word
/// as a base-|alphabet| counter with the last interval fastest. Throws
/// CapError when the family would exceed the cap.
std::vector<GridPath> enumerate_family(const PathFamily& family);

/// A family together with its enumeration; most sweeps want both.
struct EnumeratedFamily {
    PathFamily def;
    std::vector<GridPath> paths;

    static EnumeratedFamily build(const PathFamily& family);

    const GridSpec& spec() const { return def.spec; }
    int first_future() const { return def.spec.first_future_node(); }
    int last_node() const { return def.spec.last_node(); }
    /// Number of (path, future node) points.
    std::int64_t point_count() const {
        return static_cast<std::int64_t>(paths.size()) * (def.spec.m_fut + 1);
    }
};

} // namespace cihj
