#include "cihj/doubling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cihj/ci_calculus.hpp"
#include "cihj/parallel.hpp"

namespace cihj {

void validate_schedule(const std::vector<std::pair<double, double>>& schedule) {
    if (schedule.empty()) throw ConfigError("schedule must be non-empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].first > 0.0) || !(schedule[i].second > 0.0))
            throw ConfigError("schedule entries must be positive");
        if (i > 0 && !(schedule[i].first < schedule[i - 1].first &&
                       schedule[i].second < schedule[i - 1].second))
            throw ConfigError("schedule must be strictly decreasing in both coordinates");
    }
}

void DoublingConfig::validate() const {
    if (!(epsilon > 0.0) || !(delta > 0.0)) throw ConfigError("DoublingConfig: epsilon, delta must be > 0");
    if (!(alpha > 0.0)) throw ConfigError("DoublingConfig: alpha must be > 0");
    if (!schedule.empty()) validate_schedule(schedule);
}

double phi_eps_delta(const Functional& phi1, const Functional& phi2, const DoublingConfig& cfg,
                     double L, int t_idx, const GridPath& x, int tau_idx, const GridPath& y) {
    const GridSpec& g = x.spec();
    const double t = g.time_at(t_idx);
    const double tau = g.time_at(tau_idx);
    const double penalty = vL(t_idx, x, tau_idx, y, PenaltyParams{L}).V;
    return phi1(t_idx, x) - phi2(tau_idx, y) - cfg.alpha * (2.0 * g.T - t - tau) -
           (t - tau) * (t - tau) / cfg.delta - penalty / cfg.epsilon;
}

// ---------------------------------------------------------------------------
// DoublingEngine

int DoublingEngine::point_index(int path, int node) const {
    return path * n_nodes_ + (node - fam_.first_future());
}

DoublingEngine::DoublingEngine(Functional phi1, Functional phi2, const EnumeratedFamily& fam,
                               int threads, std::uint64_t work_cap)
    : phi1_(std::move(phi1)), phi2_(std::move(phi2)), fam_(fam), threads_(threads),
      n_nodes_(fam.spec().m_fut + 1) {
    const std::int64_t npts = fam_.point_count();
    phi1_pts_.resize(static_cast<std::size_t>(npts));
    phi2_pts_.resize(static_cast<std::size_t>(npts));
    const int ff = fam_.first_future();
    for (std::size_t p = 0; p < fam_.paths.size(); ++p) {
        for (int k = 0; k < n_nodes_; ++k) {
            const int idx = point_index(static_cast<int>(p), ff + k);
            phi1_pts_[static_cast<std::size_t>(idx)] = phi1_(ff + k, fam_.paths[p]);
            phi2_pts_[static_cast<std::size_t>(idx)] = phi2_(ff + k, fam_.paths[p]);
        }
    }
    double b = -std::numeric_limits<double>::infinity();
    double max1 = b, min2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < phi1_pts_.size(); ++i) {
        b = std::max(b, phi1_pts_[i] - phi2_pts_[i]);
        max1 = std::max(max1, phi1_pts_[i]);
        min2 = std::min(min2, phi2_pts_[i]);
    }
    b_ = b;
    c_ = max1 - min2; // max over the product of phi1(t,x) - phi2(tau,y)
    alpha_ = b_ > 0.0 ? b_ / (4.0 * fam_.spec().T) : 0.0;
    build_moduli(work_cap);
    if (b_ > 0.0) compute_eps_star();
}

void DoublingEngine::build_moduli(std::uint64_t work_cap) {
    const std::int64_t npts = fam_.point_count();
    const std::uint64_t pairs =
        static_cast<std::uint64_t>(npts) * static_cast<std::uint64_t>(npts + 1) / 2;
    if (pairs > work_cap) {
        std::ostringstream os;
        os << "DoublingEngine: modulus sweep of " << pairs << " pairs exceeds cap " << work_cap;
        throw CapError(os.str());
    }
    struct Rec {
        double dist;
        double d1;
        double d2;
    };
    std::vector<Rec> recs;
    recs.reserve(static_cast<std::size_t>(pairs));
    const int ff = fam_.first_future();
    const GridSpec& g = fam_.spec();
    // full-path sup distance between family members, cached per path pair
    for (std::size_t pa = 0; pa < fam_.paths.size(); ++pa) {
        for (std::size_t pb = pa; pb < fam_.paths.size(); ++pb) {
            const double path_dist =
                sup_dist_upto(fam_.paths[pa], fam_.paths[pb], g.last_node());
            for (int ka = 0; ka < n_nodes_; ++ka) {
                const int kb0 = pa == pb ? ka : 0;
                for (int kb = kb0; kb < n_nodes_; ++kb) {
                    const double td =
                        std::abs(g.time_at(ff + ka) - g.time_at(ff + kb));
                    const int ia = point_index(static_cast<int>(pa), ff + ka);
                    const int ib = point_index(static_cast<int>(pb), ff + kb);
                    recs.push_back(
                        {td + path_dist,
                         std::abs(phi1_pts_[static_cast<std::size_t>(ia)] -
                                  phi1_pts_[static_cast<std::size_t>(ib)]),
                         std::abs(phi2_pts_[static_cast<std::size_t>(ia)] -
                                  phi2_pts_[static_cast<std::size_t>(ib)])});
                }
            }
        }
    }
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) { return a.dist < b.dist; });
    mod1_.dist.resize(recs.size());
    mod1_.prefix.resize(recs.size());
    mod2_.dist.resize(recs.size());
    mod2_.prefix.resize(recs.size());
    double run1 = 0.0, run2 = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        run1 = std::max(run1, recs[i].d1);
        run2 = std::max(run2, recs[i].d2);
        mod1_.dist[i] = recs[i].dist;
        mod1_.prefix[i] = run1;
        mod2_.dist[i] = recs[i].dist;
        mod2_.prefix[i] = run2;
    }
}

double DoublingEngine::ModulusTable::query(double theta) const {
    auto it = std::upper_bound(dist.begin(), dist.end(), theta);
    if (it == dist.begin()) return 0.0;
    return prefix[static_cast<std::size_t>(it - dist.begin() - 1)];
}

double DoublingEngine::modulus(int which, double theta) const {
    return which == 1 ? mod1_.query(theta) : mod2_.query(theta);
}

void DoublingEngine::compute_eps_star() {
    const double thr = b_ / 4.0;
    auto holds = [&](double eps) {
        const double theta = 2.0 * std::sqrt(c_) * std::sqrt(eps);
        return std::max(mod1_.query(theta), mod2_.query(theta)) <= thr;
    };
    double hi = 1.0;
    int grow = 0;
    while (holds(hi) && grow < 64) {
        hi *= 4.0;
        ++grow;
    }
    if (grow == 64) {
        eps_star_ = std::numeric_limits<double>::infinity();
        return;
    }
    double lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (holds(mid))
            lo = mid;
        else
            hi = mid;
    }
    eps_star_ = lo;
}

double DoublingEngine::boundary_gap() const {
    const int last = fam_.last_node();
    double gap = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < fam_.paths.size(); ++p) {
        const int idx = point_index(static_cast<int>(p), last);
        gap = std::max(gap, phi1_pts_[static_cast<std::size_t>(idx)] -
                                phi2_pts_[static_cast<std::size_t>(idx)]);
    }
    return gap;
}

double DoublingEngine::phi_quadruple(double eps, double delta, double alpha, int lp, int ln,
                                     int rp, int rn) const {
    const GridSpec& g = fam_.spec();
    const double t = g.time_at(ln);
    const double tau = g.time_at(rn);
    const double penalty =
        vL(ln, fam_.paths[static_cast<std::size_t>(lp)], rn,
           fam_.paths[static_cast<std::size_t>(rp)], PenaltyParams{fam_.def.slope_bound}).V;
    return phi1_pts_[static_cast<std::size_t>(point_index(lp, ln))] -
           phi2_pts_[static_cast<std::size_t>(point_index(rp, rn))] -
           alpha * (2.0 * g.T - t - tau) - (t - tau) * (t - tau) / delta - penalty / eps;
}

Maximizer DoublingEngine::maximize(double eps, double delta, double alpha) const {
    const std::int64_t npts = fam_.point_count();
    const std::int64_t total = npts * npts;
    const int ff = fam_.first_future();

    struct Best {
        double value = -std::numeric_limits<double>::infinity();
        std::int64_t first = -1;
        std::int64_t ties = 0;
    };
    const int blocks = threads_ > 1 ? threads_ : 1;
    std::vector<Best> best(static_cast<std::size_t>(blocks) * 16); // pad to avoid false sharing

    parallel_blocks(total, threads_, [&](int block, std::int64_t begin, std::int64_t end) {
        Best local;
        for (std::int64_t q = begin; q < end; ++q) {
            const auto li = static_cast<int>(q / npts);
            const auto ri = static_cast<int>(q % npts);
            const double val = phi_quadruple(eps, delta, alpha, li / n_nodes_,
                                             ff + li % n_nodes_, ri / n_nodes_,
                                             ff + ri % n_nodes_);
            if (val > local.value) {
                local.value = val;
                local.first = q;
                local.ties = 1;
            } else if (val == local.value) {
                ++local.ties;
            }
        }
        best[static_cast<std::size_t>(block) * 16] = local;
    });

    Best merged;
    for (int b = 0; b < blocks; ++b) {
        const Best& loc = best[static_cast<std::size_t>(b) * 16];
        if (loc.first < 0) continue;
        if (loc.value > merged.value) {
            merged = loc;
        } else if (loc.value == merged.value) {
            merged.ties += loc.ties; // blocks are index-ordered; keep earliest first
        }
    }

    Maximizer m;
    const auto li = static_cast<int>(merged.first / npts);
    const auto ri = static_cast<int>(merged.first % npts);
    m.left = {li / n_nodes_, ff + li % n_nodes_};
    m.right = {ri / n_nodes_, ff + ri % n_nodes_};
    m.value = merged.value;
    m.ties = merged.ties;
    return m;
}

EstimateLedger DoublingEngine::estimates(double eps, double delta, const Maximizer& m) const {
    EstimateLedger led;
    led.b = b_;
    led.c = c_;
    led.alpha = alpha_;
    led.eps_star = eps_star_;
    if (b_ <= 0.0) {
        led.short_circuit = true;
        return led;
    }
    const GridSpec& g = fam_.spec();
    const GridPath& x = fam_.paths[static_cast<std::size_t>(m.left.path)];
    const GridPath& y = fam_.paths[static_cast<std::size_t>(m.right.path)];
    const double t = g.time_at(m.left.node);
    const double tau = g.time_at(m.right.node);
    const double penalty =
        vL(m.left.node, x, m.right.node, y, PenaltyParams{fam_.def.slope_bound}).V;
    const double sup_stop = sup_dist_stopped(x, m.left.node, y, m.right.node);

    led.margins.push_back({"phi_at_max_minus_half_b", m.value - b_ / 2.0, false});
    led.margins.push_back({"c_delta_minus_time_gap_sq", c_ * delta - (t - tau) * (t - tau), false});
    led.margins.push_back({"c_eps_minus_penalty", c_ * eps - penalty, false});
    led.margins.push_back({"c_eps_minus_stopped_dist_sq", c_ * eps - sup_stop * sup_stop, false});
    led.margins.push_back({"c_eps_minus_time_gap_sq", c_ * eps - (t - tau) * (t - tau), false});
    const double theta = 2.0 * std::sqrt(c_) * std::sqrt(eps);
    led.margins.push_back({"improved_norm_bound",
                           mod2_.query(theta) + alpha_ * std::sqrt(c_) * std::sqrt(eps) -
                               sup_stop * sup_stop / eps,
                           false});
    for (auto& mg : led.margins) mg.pass = mg.value >= 0.0;

    led.interiority_required = eps <= eps_star_;
    led.interior_left = m.left.node < g.last_node();
    led.interior_right = m.right.node < g.last_node();
    return led;
}

bool EstimateLedger::pass() const {
    if (short_circuit) return true;
    for (const auto& m : margins)
        if (!m.pass) return false;
    if (interiority_required && (!interior_left || !interior_right)) return false;
    return true;
}

bool TestFunctionalLedger::pass() const {
    return ident_deviation <= ident_tol && grad_gap == 0.0 && gradient_bound_margin >= 0.0 &&
           touching_left_margin >= 0.0 && touching_right_margin >= 0.0;
}

TestFunctionalPair DoublingEngine::test_functionals(double eps, double delta,
                                                    const Maximizer& m) const {
    const GridSpec& g = fam_.spec();
    if (m.left.node >= g.last_node() || m.right.node >= g.last_node())
        throw Error("test_functionals: maximizer is not interior (t, tau < T required)");

    const GridPath& x_star = fam_.paths[static_cast<std::size_t>(m.left.path)];
    const GridPath& y_star = fam_.paths[static_cast<std::size_t>(m.right.path)];
    const int t_star = m.left.node;
    const int tau_star = m.right.node;
    const double t_time = g.time_at(t_star);
    const double tau_time = g.time_at(tau_star);
    const double phi2_at_right = phi2_pts_[static_cast<std::size_t>(point_index(m.right.path, tau_star))];
    const double phi1_at_left = phi1_pts_[static_cast<std::size_t>(point_index(m.left.path, t_star))];
    const PenaltyParams params{fam_.def.slope_bound};
    const double alpha = alpha_;
    const double T = g.T;

    auto x_anchor = std::make_shared<const GridPath>(x_star);
    auto y_anchor = std::make_shared<const GridPath>(y_star);

    TestFunctionalPair out;
    out.psi1.claims_non_anticipative = true;
    out.psi1.eval = [=](int t_idx, const GridPath& x) {
        const double t = x.spec().time_at(t_idx);
        return phi2_at_right + alpha * (2.0 * T - t - tau_time) +
               (t - tau_time) * (t - tau_time) / delta +
               vL(t_idx, x, tau_star, *y_anchor, params).V / eps;
    };
    out.psi1.exact_ci = [=](int t_idx, const GridPath& x) -> std::optional<CiPair> {
        Functional slice = slice_functional(*y_anchor, tau_star, SliceSide::left, params);
        auto ci = slice.exact_ci(t_idx, x);
        if (!ci) return std::nullopt;
        const double t = x.spec().time_at(t_idx);
        CiPair pair;
        pair.dt = -alpha + (2.0 * (t - tau_time) / delta + ci->dt / eps);
        pair.grad.resize(ci->grad.size());
        for (std::size_t i = 0; i < ci->grad.size(); ++i) pair.grad[i] = ci->grad[i] / eps;
        return pair;
    };

    out.psi2.claims_non_anticipative = true;
    out.psi2.eval = [=](int tau_idx, const GridPath& y) {
        const double tau = y.spec().time_at(tau_idx);
        return phi1_at_left - alpha * (2.0 * T - t_time - tau) -
               (t_time - tau) * (t_time - tau) / delta -
               vL(t_star, *x_anchor, tau_idx, y, params).V / eps;
    };
    out.psi2.exact_ci = [=](int tau_idx, const GridPath& y) -> std::optional<CiPair> {
        Functional slice = slice_functional(*x_anchor, t_star, SliceSide::right, params);
        auto ci = slice.exact_ci(tau_idx, y);
        if (!ci) return std::nullopt;
        const double tau = y.spec().time_at(tau_idx);
        CiPair pair;
        // right slice carries (-P^L, -Q^L); psi2 subtracts it
        pair.dt = alpha + (2.0 * (t_time - tau) / delta + (-ci->dt) / eps);
        pair.grad.resize(ci->grad.size());
        for (std::size_t i = 0; i < ci->grad.size(); ++i) pair.grad[i] = -ci->grad[i] / eps;
        return pair;
    };

    // ledger at the maximizer
    auto ci1 = out.psi1.exact_ci(t_star, x_star);
    auto ci2 = out.psi2.exact_ci(tau_star, y_star);
    if (!ci1 || !ci2)
        throw InternalError("test_functionals: slice hypothesis failed at a family maximizer");
    TestFunctionalLedger& led = out.ledger;
    led.dpsi1_dt = ci1->dt;
    led.dpsi2_dtau = ci2->dt;
    led.ident_deviation = std::abs(led.dpsi1_dt - led.dpsi2_dtau + 2.0 * alpha);
    led.ident_tol = 4.0 * std::numeric_limits<double>::epsilon() *
                    std::max({std::abs(led.dpsi1_dt), std::abs(led.dpsi2_dtau), 2.0 * alpha});
    double gap2 = 0.0;
    for (std::size_t i = 0; i < ci1->grad.size(); ++i) {
        const double d = ci1->grad[i] - ci2->grad[i];
        gap2 += d * d;
    }
    led.grad_gap = std::sqrt(gap2);
    led.grad_psi1 = ci1->grad;
    const double xy_dist = dist(x_star.at(t_star), y_star.at(tau_star));
    led.gradient_bound_margin = 8.0 * xy_dist / eps - norm(ci1->grad);

    // touching through the shared Phi arithmetic
    const std::int64_t npts = fam_.point_count();
    const int ff = fam_.first_future();
    double worst_left = std::numeric_limits<double>::infinity();
    double worst_right = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < npts; ++i) {
        const int p = static_cast<int>(i) / n_nodes_;
        const int node = ff + static_cast<int>(i) % n_nodes_;
        worst_left = std::min(
            worst_left,
            m.value - phi_quadruple(eps, delta, alpha_, p, node, m.right.path, tau_star));
        worst_right = std::min(
            worst_right,
            m.value - phi_quadruple(eps, delta, alpha_, m.left.path, t_star, p, node));
    }
    led.touching_left_margin = worst_left;
    led.touching_right_margin = worst_right;
    return out;
}

// ---------------------------------------------------------------------------
// free functions

Maximizer maximize_phi(const Functional& phi1, const Functional& phi2, const EnumeratedFamily& fam,
                       const DoublingConfig& cfg, int threads, std::uint64_t work_cap) {
    cfg.validate();
    const std::int64_t npts = fam.point_count();
    if (static_cast<std::uint64_t>(npts) * static_cast<std::uint64_t>(npts) > work_cap)
        throw CapError("maximize_phi: quadruple sweep exceeds cap");
    DoublingEngine eng(phi1, phi2, fam, threads, work_cap);
    // free-standing calls use the caller's alpha rather than b/(4T)
    return eng.maximize(cfg.epsilon, cfg.delta, cfg.alpha);
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::comparison_holds: return "comparison-holds";
        case Verdict::contradiction_detected: return "contradiction-detected";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

bool DoublingReport::all_margins_pass() const {
    for (const auto& e : entries) {
        if (!e.estimates.pass()) return false;
        if (e.ledger_present && !e.ledger.pass()) return false;
    }
    return true;
}

LemmaBoundCheck lemma_bounds(const Functional& phi, const Functional& psi,
                             const EnumeratedFamily& fam, FamilyPoint p, TouchSide side,
                             std::span<const std::vector<double>> probes,
                             std::uint64_t work_cap) {
    const GridSpec& g = fam.spec();
    if (p.node >= g.last_node()) throw Error("lemma_bounds: point must have t < T");
    const GridPath& xp = fam.paths[static_cast<std::size_t>(p.path)];

    // touching precondition by sweep
    const double at_p = phi(p.node, xp) - psi(p.node, xp);
    double extremum = at_p;
    for (const auto& path : fam.paths) {
        for (int node = g.first_future_node(); node <= g.last_node(); ++node) {
            const double v = phi(node, path) - psi(node, path);
            extremum = side == TouchSide::sub ? std::max(extremum, v) : std::min(extremum, v);
        }
    }
    LemmaBoundCheck out;
    out.touching_gap = std::abs(extremum - at_p);
    const double tol = 16.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(extremum));
    if (out.touching_gap > tol)
        throw Error("lemma_bounds: touching precondition fails at the given point");

    auto ci = psi.exact_ci ? psi.exact_ci(p.node, xp) : std::nullopt;
    if (!ci) throw Error("lemma_bounds: psi has no exact ci-derivative at the point");

    out.l_phi = lphi_constant(phi, fam, probes, work_cap);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& v : probes) {
        double dir = ci->dt;
        for (std::size_t i = 0; i < v.size(); ++i) dir += ci->grad[i] * v[i];
        margin = std::min(margin, side == TouchSide::sub ? dir + out.l_phi : out.l_phi - dir);
    }
    out.margin = margin;
    return out;
}

DoublingReport comparison_verdict(
    const Functional& phi1, const Functional& phi2, const EnumeratedFamily& fam,
    const std::function<double(int, const GridPath&, std::span<const double>)>& hamiltonian,
    const std::vector<std::pair<double, double>>& schedule, int threads,
    std::uint64_t work_cap) {
    validate_schedule(schedule);
    DoublingEngine eng(phi1, phi2, fam, threads, work_cap);

    DoublingReport rep;
    rep.interpretation =
        "grid-scale diagnostic: step estimates are theorems on finite stopping-closed "
        "families; verdicts do not decide continuum viscosity-solution status";
    rep.boundary_gap = eng.boundary_gap();
    if (rep.boundary_gap > 0.0) {
        std::ostringstream os;
        os << "comparison_verdict: terminal boundary condition violated, max gap "
           << rep.boundary_gap;
        throw BoundaryError(os.str(), rep.boundary_gap);
    }

    rep.b = eng.b();
    rep.c = eng.c();
    rep.alpha = eng.alpha();
    rep.eps_star = eng.eps_star();
    if (rep.b <= 0.0) {
        rep.verdict = Verdict::comparison_holds;
        return rep;
    }

    const std::int64_t npts = fam.point_count();
    if (static_cast<std::uint64_t>(npts) * static_cast<std::uint64_t>(npts) *
            schedule.size() > work_cap)
        throw CapError("comparison_verdict: schedule sweep exceeds cap");

    for (const auto& [eps, delta] : schedule) {
        ScheduleEntry entry;
        entry.eps = eps;
        entry.delta = delta;
        entry.max = eng.maximize(eps, delta, eng.alpha());
        entry.estimates = eng.estimates(eps, delta, entry.max);
        const bool interior = entry.estimates.interior_left && entry.estimates.interior_right;
        if (interior) {
            TestFunctionalPair tf = eng.test_functionals(eps, delta, entry.max);
            entry.ledger_present = true;
            entry.ledger = tf.ledger;
            if (hamiltonian) {
                const GridPath& x = fam.paths[static_cast<std::size_t>(entry.max.left.path)];
                const GridPath& y = fam.paths[static_cast<std::size_t>(entry.max.right.path)];
                entry.hamiltonian_present = true;
                entry.hamiltonian_gap =
                    hamiltonian(entry.max.left.node, x, tf.ledger.grad_psi1) -
                    hamiltonian(entry.max.right.node, y, tf.ledger.grad_psi1);
                entry.gap_ge_2alpha = entry.hamiltonian_gap >= 2.0 * rep.alpha;
            }
        }
        rep.entries.push_back(std::move(entry));
    }
    rep.maximizer = rep.entries.back().max;

    // verdict: gap >= 2 alpha must persist at every point past eps_star
    bool any_gap = false;
    int first_gap = -1;
    bool has_admissible = false;
    bool persists = true;
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
        const auto& e = rep.entries[i];
        if (e.hamiltonian_present && e.gap_ge_2alpha && first_gap < 0) {
            any_gap = true;
            first_gap = static_cast<int>(i);
        }
        if (e.eps <= rep.eps_star) {
            has_admissible = true;
            if (!(e.hamiltonian_present && e.gap_ge_2alpha)) persists = false;
        }
    }
    if (has_admissible && persists) {
        rep.verdict = Verdict::contradiction_detected;
    } else {
        rep.verdict = Verdict::inconclusive;
        if (any_gap) rep.attached_entry = first_gap;
    }
    return rep;
}

} // namespace cihj
