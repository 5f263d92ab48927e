#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cihj/grid.hpp"

namespace cihj {

/// Exact coinvariant derivative pair (time derivative, gradient).
struct CiPair {
    double dt = 0.0;
    std::vector<double> grad;
};

/// A non-anticipative evaluator phi(t, x(.)) over grid times and paths,
/// with optional exact ci-derivative fields. exact_ci returns nullopt at
/// points where the derivative formula's hypotheses fail.
struct Functional {
    std::function<double(int t_idx, const GridPath&)> eval;
    std::function<std::optional<CiPair>(int t_idx, const GridPath&)> exact_ci;
    bool claims_non_anticipative = false;

    double operator()(int t_idx, const GridPath& x) const { return eval(t_idx, x); }
};

} // namespace cihj
