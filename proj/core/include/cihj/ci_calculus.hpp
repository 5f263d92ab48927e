#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cihj/family.hpp"
#include "cihj/functional.hpp"

namespace cihj {

/// One-sided difference-quotient decomposition of a functional along
/// constant-velocity extensions. residual is the worst affine-fit error
/// over the probe set {0, +-e_i}; it certifies affineness only over those
/// probes, a necessary condition for ci-differentiability.
struct CiDerivative {
    double dt = 0.0;
    std::vector<double> grad;
    double residual = 0.0;
};

/// Probes q(v) = [F(t+step, z_{t,x,v}) - F(t,x)] / step for v in
/// {0, +-e_1, ..., +-e_n} and returns dt = q(0),
/// grad_i = (q(e_i) - q(-e_i)) / 2, residual = max_v |q(v) - dt - <grad,v>|.
/// step must be a positive multiple of the future grid spacing and
/// t + step <= T.
CiDerivative ci_derivative_fd(const Functional& F, const GridPath& x, int t_idx, double step);

/// max over samples of |F(t, x) - F(t, stop(x, t))|; zero certifies
/// non-anticipativity on the sample.
double check_non_anticipative(const Functional& F, std::span<const PointedPath> samples);

/// Discrete L_{phi,D}: max over enumerated (t, x) with t < T, probe v, and
/// grid steps delta = k*dt in (0, T-t] of
/// |F(t+delta, z_{t,x,v}) - F(t,x)| / delta.
/// Throws CapError when the sweep would exceed work_cap evaluations.
double lphi_constant(const Functional& F, const EnumeratedFamily& fam,
                     std::span<const std::vector<double>> probes,
                     std::uint64_t work_cap = 100'000'000);

} // namespace cihj
