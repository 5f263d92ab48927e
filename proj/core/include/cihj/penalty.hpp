#pragma once

#include <memory>
#include <vector>

#include "cihj/functional.hpp"
#include "cihj/grid.hpp"

namespace cihj {

/// Slope parameter of the penalty; instantiated as the family's slope
/// bound L_D when used by the doubling engine.
struct PenaltyParams {
    double L = 0.0;
};

/// Value/time-derivative/gradient triple for V1, V3 or V^L.
struct PenaltyEval {
    double V = 0.0;
    double P = 0.0;
    std::vector<double> Q;
};

/// Exact sample-wise equality of (t, x(.^t)) and (tau, y(.^tau)); no
/// epsilon, grid paths are exact data.
bool diagonal_pair(int t_idx, const GridPath& x, int tau_idx, const GridPath& y);

/// V1 = (2L^2+1)(t-tau)^2 + 2||x(t)-y(tau)||^2, with
/// P1 = 2(2L^2+1)(t-tau) and Q1 = 4(x(t)-y(tau)).
PenaltyEval v1(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params);

/// V2 = max(V1, sup-dist up to t^tau squared).
double v2(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
          const PenaltyParams& params);

/// Corrected sup-norm term: off the diagonal V3 = (V2-V1)^2/V2 with
/// P3 = -2 (V2-V1)/V2 P1 and Q3 = -2 (V2-V1)/V2 Q1; (0,0,0) on the
/// diagonal. When V2 < 1e-300 the ratio is clamped to [0,1] (sound, since
/// V3 <= V2).
PenaltyEval v3(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params);

/// The penalty functional: componentwise V3 + 2 V1. Off the diagonal the
/// value is cross-checked against the direct form V2 + V1^2/V2 to within
/// 8 ulps; a mismatch throws InternalError.
PenaltyEval vL(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params);

/// Lower-bound check V^L >= ||x(.^t) - y(.^tau)||_inf^2 and
/// V^L >= (t-tau)^2. The precondition (one path's increment over
/// [t^tau, t v tau] bounded by L|t-tau|) is verified at grid nodes with
/// exact comparisons; when it fails the result is marked not applicable
/// rather than failed.
struct LowerBoundCheck {
    bool applicable = false;
    double margin_norm = 0.0; ///< V^L - sup-dist(stopped)^2
    double margin_time = 0.0; ///< V^L - (t-tau)^2
    bool pass() const { return !applicable || (margin_norm >= 0.0 && margin_time >= 0.0); }
};
LowerBoundCheck check_lower_bounds(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
                                   const PenaltyParams& params);

/// Derivative-bound check |P^L| <= 4(2L^2+1)|t-tau| and
/// ||Q^L|| <= 8||x(t)-y(tau)||.
struct DerivativeBoundCheck {
    double margin_p = 0.0;
    double margin_q = 0.0;
    bool pass() const { return margin_p >= 0.0 && margin_q >= 0.0; }
};
DerivativeBoundCheck check_derivative_bounds(int t_idx, const GridPath& x, int tau_idx,
                                             const GridPath& y, const PenaltyParams& params);

enum class SliceSide { left, right };

/// Anchored slice of the penalty.
/// left:  v(t, x) = V^L(t, x, anchor_t, anchor), exact ci = (P^L, Q^L);
/// right: v(tau, y) = V^L(anchor_t, anchor, tau, y), exact ci = (-P^L, -Q^L).
/// exact_ci yields a value only at points satisfying the one-sided
/// Lipschitz hypothesis (checked at grid nodes): for the left slice,
/// t >= anchor_t, or t < anchor_t with ||anchor(xi) - anchor(t)|| <=
/// L (xi - t) on [t, anchor_t]; mirrored for the right slice.
Functional slice_functional(const GridPath& anchor, int anchor_t, SliceSide side,
                            const PenaltyParams& params);

} // namespace cihj
