#include <cmath>
#include <doctest.h>
#include <limits>

#include "cihj/ci_calculus.hpp"
#include "cihj/penalty.hpp"
#include "helpers.hpp"

using namespace cihj;
using namespace cihj::test;

namespace {

// grid for the printed hand examples with t = 1, tau = 0
struct HandPair {
    GridSpec g = spec1(1.0, 1.0, 1, 1); // nodes -1, 0, 1
    GridPath x;
    GridPath y;
    int t_idx = 2;   // time 1
    int tau_idx = 1; // time 0
    HandPair() : x(constant_path(g, 2.0)), y(constant_path(g, 0.0)) {}
};

} // namespace

TEST_CASE("v1 hand values: L=1, t=1, tau=0, x(1)=2, y(0)=0 -> (11, 6, 8)") {
    HandPair hp;
    const PenaltyEval e = v1(hp.t_idx, hp.x, hp.tau_idx, hp.y, PenaltyParams{1.0});
    CHECK(e.V == 11.0);
    CHECK(e.P == 6.0);
    CHECK(e.Q[0] == 8.0);
}

TEST_CASE("v1 vanishes when t = tau and x(t) = y(tau)") {
    GridSpec g = spec1(0.0, 1.0, 0, 1);
    GridPath x = path1(g, {5.0, 1.0});
    GridPath y = path1(g, {-3.0, 1.0});
    const PenaltyEval e = v1(1, x, 1, y, PenaltyParams{2.0});
    CHECK(e.V == 0.0);
    CHECK(e.P == 0.0);
    CHECK(e.Q[0] == 0.0);
}

TEST_CASE("v2 hand values") {
    SUBCASE("constants x=2, y=0 on [-1,1]: max(11, 4) = 11") {
        HandPair hp;
        CHECK(v2(hp.t_idx, hp.x, hp.tau_idx, hp.y, PenaltyParams{1.0}) == 11.0);
    }
    SUBCASE("L=0, t=tau=1, x=0, y(0)=3, y(1)=0: max(0, 9) = 9") {
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = constant_path(g, 0.0);
        GridPath y = path1(g, {3.0, 0.0});
        CHECK(v2(1, x, 1, y, PenaltyParams{0.0}) == 9.0);
    }
}

TEST_CASE("v2 = 0 iff diagonal (enumerated sweep)") {
    GridSpec g = spec1(0.5, 0.5, 1, 2);
    auto fam = EnumeratedFamily::build(family1(g, {-1.0, 0.0, 1.0}, 1.0));
    const PenaltyParams params{1.0};
    for (std::size_t i = 0; i < fam.paths.size(); ++i) {
        for (std::size_t j = 0; j < fam.paths.size(); ++j) {
            for (int t = g.first_future_node(); t <= g.last_node(); ++t) {
                for (int tau = g.first_future_node(); tau <= g.last_node(); ++tau) {
                    const bool diag = diagonal_pair(t, fam.paths[i], tau, fam.paths[j]);
                    const double val = v2(t, fam.paths[i], tau, fam.paths[j], params);
                    if (diag)
                        CHECK(val == 0.0);
                    else
                        CHECK(val > 0.0);
                }
            }
        }
    }
}

TEST_CASE("v3 hand values and bounds") {
    SUBCASE("branch-equal case gives (0, 0, 0)") {
        HandPair hp; // V2 = V1 = 11
        const PenaltyEval e = v3(hp.t_idx, hp.x, hp.tau_idx, hp.y, PenaltyParams{1.0});
        CHECK(e.V == 0.0);
        CHECK(e.P == 0.0);
        CHECK(e.Q[0] == 0.0);
    }
    SUBCASE("L=0, V1=0, V2=9 -> V3 = 81/9 = 9, P3 = Q3 = 0") {
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = constant_path(g, 0.0);
        GridPath y = path1(g, {3.0, 0.0});
        const PenaltyEval e = v3(1, x, 1, y, PenaltyParams{0.0});
        CHECK(e.V == 9.0);
        CHECK(e.P == 0.0);
        CHECK(e.Q[0] == 0.0);
    }
}

TEST_CASE("vL hand values") {
    SUBCASE("diagonal -> (0, 0, 0)") {
        GridSpec g = spec1(0.5, 1.0, 1, 2);
        GridPath x = path1(g, {1.0, 0.5, 1.0, 2.0});
        const PenaltyEval e = vL(2, x, 2, x, PenaltyParams{1.0});
        CHECK(e.V == 0.0);
        CHECK(e.P == 0.0);
        CHECK(e.Q[0] == 0.0);
    }
    SUBCASE("L=1 constants: V = 22 = 11 + 121/11, P = 12, Q = 16") {
        HandPair hp;
        const PenaltyEval e = vL(hp.t_idx, hp.x, hp.tau_idx, hp.y, PenaltyParams{1.0});
        CHECK(e.V == 22.0);
        CHECK(e.P == 12.0);
        CHECK(e.Q[0] == 16.0);
    }
    SUBCASE("L=0 past-heavy pair: V = 9, P = 0, Q = 0") {
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = constant_path(g, 0.0);
        GridPath y = path1(g, {3.0, 0.0});
        const PenaltyEval e = vL(1, x, 1, y, PenaltyParams{0.0});
        CHECK(e.V == 9.0);
        CHECK(e.P == 0.0);
        CHECK(e.Q[0] == 0.0);
    }
}

TEST_CASE("penalty property sweep on an enumerated family") {
    GridSpec g = spec1(0.5, 0.5, 1, 2);
    auto fam = EnumeratedFamily::build(family1(g, {-1.0, 0.0, 1.0}, 1.0));
    const PenaltyParams params{1.0};
    const double eps = std::numeric_limits<double>::epsilon();
    const int ff = g.first_future_node();

    for (std::size_t i = 0; i < fam.paths.size(); ++i) {
        for (std::size_t j = i; j < fam.paths.size(); ++j) {
            const GridPath& x = fam.paths[i];
            const GridPath& y = fam.paths[j];
            for (int t = ff; t <= g.last_node(); ++t) {
                for (int tau = ff; tau <= g.last_node(); ++tau) {
                    const PenaltyEval fwd = vL(t, x, tau, y, params);
                    const PenaltyEval rev = vL(tau, y, t, x, params);
                    const PenaltyEval e1 = v1(t, x, tau, y, params);
                    const PenaltyEval e3 = v3(t, x, tau, y, params);
                    const double V2 = v2(t, x, tau, y, params);

                    // non-negativity
                    CHECK(e1.V >= 0.0);
                    CHECK(V2 >= 0.0);
                    CHECK(e3.V >= 0.0);
                    CHECK(fwd.V >= 0.0);

                    // symmetry within 4 ulps
                    CHECK(std::abs(fwd.V - rev.V) <= 4.0 * eps * std::abs(fwd.V));
                    CHECK(std::abs(fwd.P + rev.P) <= 4.0 * eps * std::abs(fwd.P));
                    CHECK(std::abs(fwd.Q[0] + rev.Q[0]) <= 4.0 * eps * std::abs(fwd.Q[0]));

                    // non-anticipativity, exact
                    const PenaltyEval stopped_eval =
                        vL(t, stop(x, t), tau, stop(y, tau), params);
                    CHECK(fwd.V == stopped_eval.V);
                    CHECK(fwd.P == stopped_eval.P);
                    CHECK(fwd.Q[0] == stopped_eval.Q[0]);

                    // zero characterization
                    if (diagonal_pair(t, x, tau, y))
                        CHECK(fwd.V == 0.0);
                    else
                        CHECK(fwd.V > 0.0);

                    // V3 estimates
                    CHECK(e3.V <= V2);
                    CHECK(std::abs(e3.P) <= 2.0 * std::abs(e1.P) * (1.0 + 4.0 * eps));
                    CHECK(std::abs(e3.Q[0]) <= 2.0 * std::abs(e1.Q[0]) * (1.0 + 4.0 * eps));

                    // two-form consistency
                    if (!diagonal_pair(t, x, tau, y)) {
                        const double direct = V2 + e1.V * e1.V / V2;
                        CHECK(std::abs(fwd.V - direct) <=
                              1e-12 * std::max(std::abs(fwd.V), std::abs(direct)));
                    }

                    // lower bounds hold for every family pair (slope <= L)
                    const LowerBoundCheck lb = check_lower_bounds(t, x, tau, y, params);
                    CHECK(lb.applicable);
                    CHECK(lb.margin_norm >= 0.0);
                    CHECK(lb.margin_time >= 0.0);

                    // derivative bounds
                    const DerivativeBoundCheck db = check_derivative_bounds(t, x, tau, y, params);
                    CHECK(db.margin_p >= 0.0);
                    CHECK(db.margin_q >= 0.0);
                }
            }
        }
    }
}

TEST_CASE("check_lower_bounds details") {
    SUBCASE("t = tau is always applicable") {
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = path1(g, {0.0, 1.0});
        GridPath y = path1(g, {0.5, -1.0});
        const LowerBoundCheck lb = check_lower_bounds(1, x, 1, y, PenaltyParams{0.0});
        CHECK(lb.applicable);
        CHECK(lb.margin_time >= 0.0);
    }
    SUBCASE("tight case: V = 9 >= 9") {
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = constant_path(g, 0.0);
        GridPath y = path1(g, {3.0, 0.0});
        const LowerBoundCheck lb = check_lower_bounds(1, x, 1, y, PenaltyParams{0.0});
        CHECK(lb.applicable);
        CHECK(lb.margin_norm == 0.0);
        CHECK(lb.margin_time == 9.0);
    }
    SUBCASE("condition not applicable reported, not failed") {
        // y jumps by 3 over [t, tau] while L |t - tau| = 1
        GridSpec g = spec1(0.0, 1.0, 0, 1);
        GridPath x = constant_path(g, 0.0);
        GridPath y = path1(g, {0.0, 3.0});
        const LowerBoundCheck lb = check_lower_bounds(0, x, 1, y, PenaltyParams{1.0});
        CHECK(!lb.applicable);
        CHECK(lb.pass());
    }
}

TEST_CASE("check_derivative_bounds tight case") {
    HandPair hp;
    const DerivativeBoundCheck db =
        check_derivative_bounds(hp.t_idx, hp.x, hp.tau_idx, hp.y, PenaltyParams{1.0});
    CHECK(db.margin_p == 0.0); // |12| <= 12
    CHECK(db.margin_q == 0.0); // 16 <= 16

    GridSpec g = spec1(0.0, 1.0, 0, 1);
    GridPath x = constant_path(g, 1.0);
    const DerivativeBoundCheck diag = check_derivative_bounds(1, x, 1, x, PenaltyParams{1.0});
    CHECK(diag.margin_p == 0.0);
    CHECK(diag.margin_q == 0.0);
}

TEST_CASE("slice_functional exact ci fields") {
    SUBCASE("diagonal anchor point gives (0, 0)") {
        GridSpec g = spec1(0.0, 1.0, 0, 2);
        GridPath y = path1(g, {0.0, 0.5, 1.0});
        const Functional f = slice_functional(y, 1, SliceSide::left, PenaltyParams{1.0});
        const auto ci = f.exact_ci(1, y);
        REQUIRE(ci.has_value());
        CHECK(ci->dt == 0.0);
        CHECK(ci->grad[0] == 0.0);
    }
    SUBCASE("left slice at t >= anchor reproduces (P, Q) = (12, 16)") {
        HandPair hp;
        const Functional f =
            slice_functional(hp.y, hp.tau_idx, SliceSide::left, PenaltyParams{1.0});
        CHECK(f.eval(hp.t_idx, hp.x) == 22.0);
        const auto ci = f.exact_ci(hp.t_idx, hp.x);
        REQUIRE(ci.has_value());
        CHECK(ci->dt == 12.0);
        CHECK(ci->grad[0] == 16.0);
    }
    SUBCASE("right slice negates the pair") {
        HandPair hp;
        const Functional f = slice_functional(hp.x, hp.t_idx, SliceSide::right, PenaltyParams{1.0});
        const auto ci = f.exact_ci(hp.tau_idx, hp.y);
        REQUIRE(ci.has_value());
        CHECK(ci->dt == -12.0);
        CHECK(ci->grad[0] == -16.0);
    }
    SUBCASE("hypothesis failure yields no exact ci") {
        // anchor rises at slope 3 > L between the probe time and the anchor
        GridSpec g = spec1(0.0, 1.0, 0, 2);
        GridPath anchor = path1(g, {0.0, 1.5, 3.0});
        const Functional f = slice_functional(anchor, 2, SliceSide::left, PenaltyParams{1.0});
        CHECK(!f.exact_ci(0, constant_path(g, 0.0)).has_value());
        CHECK(f.exact_ci(2, constant_path(g, 0.0)).has_value()); // t >= anchor_t is always valid
    }
}

TEST_CASE("fd agreement with slice exact ci at hypothesis points") {
    GridSpec g = spec1(0.0, 0.0625, 0, 8);
    auto fam = EnumeratedFamily::build(family1(g, {-0.5, 0.0, 0.5}, 0.5));
    const PenaltyParams params{0.5};
    int checked = 0;
    for (std::size_t a = 0; a < fam.paths.size(); a += 1371) {
        for (std::size_t p = 0; p < fam.paths.size(); p += 977) {
            const Functional f = slice_functional(fam.paths[a], 5, SliceSide::left, params);
            const int t_idx = 3;
            const auto ci = f.exact_ci(t_idx, fam.paths[p]);
            if (!ci) continue;
            const double scale = 1.0 + std::abs(ci->dt) + std::abs(ci->grad[0]);
            double err = 0.0, prev = -1.0;
            for (int k : {4, 2, 1}) {
                const CiDerivative fd =
                    ci_derivative_fd(f, fam.paths[p], t_idx, k * g.dt_future());
                err = std::abs(fd.dt - ci->dt) + std::abs(fd.grad[0] - ci->grad[0]);
                if (prev >= 0.0) CHECK(err <= 2.0 * prev + 1e-13); // halving, factor-4 allowance
                prev = err;
            }
            CHECK(err <= 0.05 * scale);
            ++checked;
        }
    }
    CHECK(checked > 4);
}

TEST_CASE("V3 continuity at the diagonal: constructed convergent sequence") {
    GridSpec g = spec1(0.0, 1.0, 0, 2);
    GridPath y = path1(g, {0.0, 0.5, 1.0});
    const PenaltyParams params{1.0};
    double prev_v = std::numeric_limits<double>::infinity();
    double prev_p = std::numeric_limits<double>::infinity();
    double prev_q = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 30; ++k) {
        const double bump = std::ldexp(1.0, -k); // 2^-k
        GridPath xk = path1(g, {0.0 + bump, 0.5 + bump, 1.0 + bump});
        const PenaltyEval e = v3(1, xk, 1, y, params);
        CHECK(e.V <= prev_v);
        CHECK(std::abs(e.P) <= prev_p + 1e-15);
        CHECK(std::abs(e.Q[0]) <= prev_q + 1e-15);
        prev_v = e.V;
        prev_p = std::abs(e.P);
        prev_q = std::abs(e.Q[0]);
    }
    CHECK(prev_v <= 1e-12);
    CHECK(prev_q <= 1e-6);
}

TEST_CASE("near-diagonal floating-point policy avoids 0/0") {
    GridSpec g = spec1(0.0, 1.0, 0, 1);
    GridPath x = constant_path(g, 0.0);
    GridPath y = constant_path(g, 1e-160); // V2 ~ 2e-320 < 1e-300
    const PenaltyEval e3 = v3(1, x, 1, y, PenaltyParams{0.0});
    CHECK(std::isfinite(e3.V));
    CHECK(e3.V >= 0.0);
    CHECK(e3.V <= v2(1, x, 1, y, PenaltyParams{0.0}));
    const PenaltyEval e = vL(1, x, 1, y, PenaltyParams{0.0});
    CHECK(std::isfinite(e.V));
    CHECK(e.V > 0.0);
}

TEST_CASE("naive doubled sup-norm fails the affine probe fit where vL passes") {
    GridSpec g = spec1(0.0, 1.0, 0, 512);
    const GridPath y_hat = constant_path(g, 0.0);
    const GridPath x_one = constant_path(g, 1.0);
    const int anchor = g.last_node();
    const int probe = 256;

    Functional naive;
    naive.eval = [&y_hat, anchor](int t_idx, const GridPath& x) {
        const double sd = sup_dist_upto(x, y_hat, std::min(t_idx, anchor));
        return sd * sd;
    };
    const Functional smooth = slice_functional(y_hat, anchor, SliceSide::left, PenaltyParams{1.0});

    double smooth_res = 1.0;
    for (int k : {4, 2, 1}) {
        const double step = k * g.dt_future();
        CHECK(ci_derivative_fd(naive, x_one, probe, step).residual > 0.1);
        smooth_res = ci_derivative_fd(smooth, x_one, probe, step).residual;
    }
    CHECK(smooth_res < 0.01);
}
