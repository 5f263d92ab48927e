#pragma once

#include <span>
#include <vector>

#include "cihj/errors.hpp"

namespace cihj {

/// Uniform grid on [-h, 0] (m_past intervals) glued to a uniform grid on
/// [0, T] (m_fut intervals). t = 0 is always the node with index m_past.
struct GridSpec {
    double h = 0.0;   ///< delay length, >= 0
    double T = 1.0;   ///< horizon, > 0
    int n = 1;        ///< state dimension
    int m_past = 0;   ///< intervals on [-h, 0]; 0 iff h == 0
    int m_fut = 1;    ///< intervals on [0, T]

    void validate() const;

    int node_count() const { return m_past + m_fut + 1; }
    int first_future_node() const { return m_past; }
    int last_node() const { return m_past + m_fut; }
    double dt_future() const { return T / m_fut; }
    double dt_past() const { return m_past > 0 ? h / m_past : 0.0; }

    /// Node time; endpoints -h, 0, T are exact.
    double time_at(int node) const;

    bool is_future_node(int node) const { return node >= m_past && node <= last_node(); }

    bool operator==(const GridSpec& o) const {
        return h == o.h && T == o.T && n == o.n && m_past == o.m_past && m_fut == o.m_fut;
    }
};

/// Sampled continuous function on [-h, T]; linear interpolation between
/// nodes. Immutable after construction.
class GridPath {
public:
    GridPath(GridSpec spec, std::vector<double> samples);

    const GridSpec& spec() const { return spec_; }
    int nodes() const { return spec_.node_count(); }

    /// Coordinates at a node (length n).
    std::span<const double> at(int node) const {
        return {samples_.data() + static_cast<std::size_t>(node) * spec_.n,
                static_cast<std::size_t>(spec_.n)};
    }

    /// Scalar value at a node; requires n == 1.
    double value(int node) const { return samples_[static_cast<std::size_t>(node)]; }

    /// Value at an arbitrary time in [-h, T] via linear interpolation
    /// (exact at nodes). Writes n coordinates into out.
    void value_at_time(double t, std::span<double> out) const;

    std::span<const double> samples() const { return samples_; }

    bool operator==(const GridPath& o) const {
        return spec_ == o.spec_ && samples_ == o.samples_;
    }

private:
    GridSpec spec_;
    std::vector<double> samples_; // node_count * n, node-major
};

/// Pair (t, x(.)) with t a node in [0, T].
struct PointedPath {
    GridPath path;
    int t_idx;
};

/// x(. ^ t): agrees with x on [-h, t], constantly x(t) after.
GridPath stop(const GridPath& x, int t_idx);

/// max over nodes xi <= t of ||x(xi) - y(xi)|| (Euclidean).
double sup_dist_upto(const GridPath& x, const GridPath& y, int t_idx);

/// ||x(. ^ t) - y(. ^ tau)||_inf over all grid nodes, without
/// materialising the stopped paths.
double sup_dist_stopped(const GridPath& x, int t_idx, const GridPath& y, int tau_idx);

/// The path z_{t,x,v}: x(. ^ t) on [-h, t], then x(t) + v (xi - t).
GridPath lip_extension(int t_idx, const GridPath& x, std::span<const double> v);

/// Lipschitz constant of the piecewise-linear path restricted to [0, T]:
/// max difference quotient over consecutive future nodes.
double lip_constant(const GridPath& x);

/// Euclidean norm of a coordinate vector.
double norm(std::span<const double> v);

/// Euclidean distance between two coordinate vectors of equal length.
double dist(std::span<const double> a, std::span<const double> b);

} // namespace cihj
