#include "cihj/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cihj {

namespace {

constexpr double kTinyV2 = 1e-300;

void require_same_spec(const GridPath& x, const GridPath& y) {
    if (!(x.spec() == y.spec())) throw SpecMismatchError("penalty: paths on different grids");
}

double time_gap(const GridPath& x, int t_idx, int tau_idx) {
    return x.spec().time_at(t_idx) - x.spec().time_at(tau_idx);
}

} // namespace

bool diagonal_pair(int t_idx, const GridPath& x, int tau_idx, const GridPath& y) {
    require_same_spec(x, y);
    if (t_idx != tau_idx) return false;
    for (int j = 0; j <= t_idx; ++j) {
        auto a = x.at(j);
        auto b = y.at(j);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] != b[i]) return false;
        }
    }
    return true;
}

PenaltyEval v1(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params) {
    require_same_spec(x, y);
    const double coef = 2.0 * params.L * params.L + 1.0;
    const double dt = time_gap(x, t_idx, tau_idx);
    auto xt = x.at(t_idx);
    auto yt = y.at(tau_idx);
    const double d = dist(xt, yt);
    PenaltyEval e;
    e.V = coef * dt * dt + 2.0 * d * d;
    e.P = 2.0 * coef * dt;
    e.Q.resize(xt.size());
    for (std::size_t i = 0; i < xt.size(); ++i) e.Q[i] = 4.0 * (xt[i] - yt[i]);
    return e;
}

double v2(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
          const PenaltyParams& params) {
    const double v1_val = v1(t_idx, x, tau_idx, y, params).V;
    const double sd = sup_dist_upto(x, y, std::min(t_idx, tau_idx));
    return std::max(v1_val, sd * sd);
}

PenaltyEval v3(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params) {
    PenaltyEval e;
    e.Q.assign(static_cast<std::size_t>(x.spec().n), 0.0);
    if (diagonal_pair(t_idx, x, tau_idx, y)) return e;

    const PenaltyEval e1 = v1(t_idx, x, tau_idx, y, params);
    const double V2 = v2(t_idx, x, tau_idx, y, params);
    const double diff = V2 - e1.V;
    if (V2 < kTinyV2) {
        // near-diagonal policy: clamp the ratio to [0,1]; V3 <= V2 keeps
        // the clamp sound even when V2 underflows
        const double ratio = V2 > 0.0 ? std::clamp(diff / V2, 0.0, 1.0) : 0.0;
        e.V = std::min(ratio * diff, V2);
        e.P = -2.0 * ratio * e1.P;
        for (std::size_t i = 0; i < e.Q.size(); ++i) e.Q[i] = -2.0 * ratio * e1.Q[i];
        return e;
    }
    const double ratio = diff / V2;
    e.V = diff * diff / V2;
    e.P = -2.0 * ratio * e1.P;
    for (std::size_t i = 0; i < e.Q.size(); ++i) e.Q[i] = -2.0 * ratio * e1.Q[i];
    return e;
}

PenaltyEval vL(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
               const PenaltyParams& params) {
    PenaltyEval e;
    e.Q.assign(static_cast<std::size_t>(x.spec().n), 0.0);
    if (diagonal_pair(t_idx, x, tau_idx, y)) return e;

    const PenaltyEval e1 = v1(t_idx, x, tau_idx, y, params);
    const PenaltyEval e3 = v3(t_idx, x, tau_idx, y, params);
    e.V = e3.V + 2.0 * e1.V;
    e.P = e3.P + 2.0 * e1.P;
    for (std::size_t i = 0; i < e.Q.size(); ++i) e.Q[i] = e3.Q[i] + 2.0 * e1.Q[i];

    const double V2 = v2(t_idx, x, tau_idx, y, params);
    if (V2 >= kTinyV2) {
        const double direct = V2 + e1.V * e1.V / V2;
        const double tol = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(e.V), std::abs(direct));
        if (std::abs(e.V - direct) > tol) {
            std::ostringstream os;
            os << "vL: two-form cross-check failed, V3+2V1 = " << e.V << " vs V2+V1^2/V2 = "
               << direct;
            throw InternalError(os.str());
        }
    }
    return e;
}

LowerBoundCheck check_lower_bounds(int t_idx, const GridPath& x, int tau_idx, const GridPath& y,
                                   const PenaltyParams& params) {
    require_same_spec(x, y);
    const double t = x.spec().time_at(t_idx);
    const double tau = x.spec().time_at(tau_idx);
    const double gap = std::abs(t - tau);

    bool applicable = false;
    if (tau_idx >= t_idx) {
        // ||y(tau) - y(xi)|| <= L (tau - t) on [t, tau]
        applicable = true;
        auto y_tau = y.at(tau_idx);
        for (int j = t_idx; j <= tau_idx && applicable; ++j) {
            if (dist(y_tau, y.at(j)) > params.L * gap) applicable = false;
        }
    }
    if (!applicable && t_idx >= tau_idx) {
        applicable = true;
        auto x_t = x.at(t_idx);
        for (int j = tau_idx; j <= t_idx && applicable; ++j) {
            if (dist(x_t, x.at(j)) > params.L * gap) applicable = false;
        }
    }

    LowerBoundCheck out;
    out.applicable = applicable;
    if (!applicable) return out;
    const double V = vL(t_idx, x, tau_idx, y, params).V;
    const double sd = sup_dist_stopped(x, t_idx, y, tau_idx);
    out.margin_norm = V - sd * sd;
    out.margin_time = V - (t - tau) * (t - tau);
    return out;
}

DerivativeBoundCheck check_derivative_bounds(int t_idx, const GridPath& x, int tau_idx,
                                             const GridPath& y, const PenaltyParams& params) {
    const PenaltyEval e = vL(t_idx, x, tau_idx, y, params);
    const double coef = 2.0 * params.L * params.L + 1.0;
    const double gap = std::abs(time_gap(x, t_idx, tau_idx));
    DerivativeBoundCheck out;
    out.margin_p = 4.0 * coef * gap - std::abs(e.P);
    out.margin_q = 8.0 * dist(x.at(t_idx), y.at(tau_idx)) - norm(e.Q);
    return out;
}

namespace {

/// Hypothesis of Theorem-(v)/(vi)-style slice differentiability at a grid
/// point: probe >= anchor time, or the anchor path climbs away from its
/// probe-time value no faster than L (xi - probe time) up to the anchor.
bool slice_hypothesis(const GridPath& anchor, int anchor_t, int probe_t, double L) {
    if (probe_t >= anchor_t) return true;
    const GridSpec& g = anchor.spec();
    auto base = anchor.at(probe_t);
    const double t = g.time_at(probe_t);
    for (int j = probe_t; j <= anchor_t; ++j) {
        if (dist(anchor.at(j), base) > L * (g.time_at(j) - t)) return false;
    }
    return true;
}

} // namespace

Functional slice_functional(const GridPath& anchor, int anchor_t, SliceSide side,
                            const PenaltyParams& params) {
    if (!anchor.spec().is_future_node(anchor_t))
        throw GridError("slice_functional: anchor time is not a node in [0, T]");
    auto anchor_ptr = std::make_shared<const GridPath>(anchor);

    Functional F;
    F.claims_non_anticipative = true;
    if (side == SliceSide::left) {
        F.eval = [anchor_ptr, anchor_t, params](int t_idx, const GridPath& x) {
            return vL(t_idx, x, anchor_t, *anchor_ptr, params).V;
        };
        F.exact_ci = [anchor_ptr, anchor_t, params](
                         int t_idx, const GridPath& x) -> std::optional<CiPair> {
            if (!slice_hypothesis(*anchor_ptr, anchor_t, t_idx, params.L)) return std::nullopt;
            PenaltyEval e = vL(t_idx, x, anchor_t, *anchor_ptr, params);
            return CiPair{e.P, std::move(e.Q)};
        };
    } else {
        F.eval = [anchor_ptr, anchor_t, params](int tau_idx, const GridPath& y) {
            return vL(anchor_t, *anchor_ptr, tau_idx, y, params).V;
        };
        F.exact_ci = [anchor_ptr, anchor_t, params](
                         int tau_idx, const GridPath& y) -> std::optional<CiPair> {
            if (!slice_hypothesis(*anchor_ptr, anchor_t, tau_idx, params.L)) return std::nullopt;
            PenaltyEval e = vL(anchor_t, *anchor_ptr, tau_idx, y, params);
            CiPair ci;
            ci.dt = -e.P;
            ci.grad.resize(e.Q.size());
            for (std::size_t i = 0; i < e.Q.size(); ++i) ci.grad[i] = -e.Q[i];
            return ci;
        };
    }
    return F;
}

} // namespace cihj
