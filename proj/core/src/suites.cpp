#include "cihj/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cihj/ci_calculus.hpp"
#include "cihj/io.hpp"
#include "cihj/parallel.hpp"
#include "cihj/penalty.hpp"

namespace cihj {

namespace {

using nlohmann::ordered_json;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

double ulp_tol(double scale, double ulps) {
    return ulps * std::numeric_limits<double>::epsilon() * std::abs(scale);
}

std::string fmt(double v) { return format_double(v); }

EnumeratedFamily build_family(const PathFamily& family_def, const RunOptions& opts) {
    PathFamily def = family_def;
    def.cap = opts.cap_override.value_or(def.cap);
    return EnumeratedFamily::build(def);
}

/// Splices a per-family sub-report into the merged one; checks from the
/// extra families D_1, D_2, ... carry a "D<k>:" prefix and their artifacts
/// live in a D<k>/ subdirectory.
void splice_family_report(SuiteReport& into, SuiteReport&& part, const std::string& subdir) {
    for (auto& c : part.checks) {
        if (!subdir.empty()) c.name = subdir + ":" + c.name;
        into.checks.push_back(std::move(c));
    }
    for (auto& a : part.artifacts)
        into.artifacts.push_back(subdir.empty() ? a : subdir + "/" + a);
}

template <typename Impl>
SuiteReport run_per_family(const char* command, const ExperimentConfig& cfg,
                           const RunOptions& opts, Impl&& impl) {
    SuiteReport rep;
    rep.command = command;
    const auto fams = cfg.all_families();
    for (std::size_t i = 0; i < fams.size(); ++i) {
        const std::string subdir = i == 0 ? "" : "D" + std::to_string(i);
        RunOptions sub = opts;
        if (!subdir.empty()) sub.out_dir = opts.out_dir / subdir;
        splice_family_report(rep, impl(cfg, sub, fams[i]), subdir);
    }
    return rep;
}

} // namespace

Functional build_functional(const FunctionalSpec& spec, const ExperimentConfig& cfg,
                            const EnumeratedFamily& fam) {
    Functional base;
    if (!spec.table_path.empty()) {
        auto table = std::make_shared<ValueTable>(
            value_table_from_csv(fam.spec(), read_file(spec.table_path)));
        base = as_functional(std::move(table));
    } else if (spec.builtin == "zero") {
        base.eval = [](int, const GridPath&) { return 0.0; };
        base.claims_non_anticipative = true;
    } else if (spec.builtin == "bellman-value") {
        if (!cfg.problem_path)
            throw ConfigError("functional spec 'bellman-value' requires a problem file");
        BellmanData data = load_problem(*cfg.problem_path, fam.spec());
        auto table = std::make_shared<ValueTable>(solve_dp(data, fam));
        base = as_functional(std::move(table));
    } else {
        throw ConfigError("unknown builtin functional '" + spec.builtin + "'");
    }

    if (spec.offset == 0.0 && spec.time_ramp == 0.0 && spec.perturbations.empty()) return base;

    // precompute stopped keys for the perturbation entries
    struct PerturbKey {
        int t_idx;
        std::vector<double> samples;
        double amount;
    };
    auto keys = std::make_shared<std::vector<PerturbKey>>();
    for (const auto& p : spec.perturbations) {
        if (p.path < 0 || p.path >= static_cast<int>(fam.paths.size()))
            throw ConfigError("perturbation path index outside the enumerated family");
        if (!fam.spec().is_future_node(p.t_idx))
            throw ConfigError("perturbation t_idx is not a node in [0, T]");
        GridPath stopped = stop(fam.paths[static_cast<std::size_t>(p.path)], p.t_idx);
        keys->push_back({p.t_idx,
                         std::vector<double>(stopped.samples().begin(), stopped.samples().end()),
                         p.amount});
    }

    const double offset = spec.offset;
    const double ramp = spec.time_ramp;
    Functional wrapped;
    wrapped.claims_non_anticipative = base.claims_non_anticipative;
    wrapped.eval = [base, offset, ramp, keys](int t_idx, const GridPath& x) {
        double v = base.eval(t_idx, x) + offset;
        const GridSpec& g = x.spec();
        if (ramp != 0.0) v += ramp * (g.T - g.time_at(t_idx));
        if (!keys->empty()) {
            GridPath stopped = stop(x, t_idx);
            for (const auto& k : *keys) {
                if (k.t_idx != t_idx) continue;
                auto s = stopped.samples();
                if (std::equal(s.begin(), s.end(), k.samples.begin(), k.samples.end()))
                    v += k.amount;
            }
        }
        return v;
    };
    return wrapped;
}

// ---------------------------------------------------------------------------
// penalty-suite

namespace {

SuiteReport penalty_suite_impl(const ExperimentConfig& cfg, const RunOptions& opts,
                               const PathFamily& family_def) {
    Timer total;
    SuiteReport rep;
    rep.command = "penalty-suite";

    EnumeratedFamily fam = build_family(family_def, opts);
    const GridSpec& g = fam.spec();
    const PenaltyParams params{cfg.penalty_L.value_or(family_def.slope_bound)};
    const int ff = g.first_future_node();
    const int n_nodes = g.m_fut + 1;
    const std::int64_t npts = fam.point_count();

    // precompute stopped paths per point for the non-anticipativity check
    std::vector<GridPath> stopped;
    stopped.reserve(static_cast<std::size_t>(npts));
    for (const auto& p : fam.paths)
        for (int k = 0; k < n_nodes; ++k) stopped.push_back(stop(p, ff + k));

    struct Agg {
        double min_vl = std::numeric_limits<double>::infinity();
        double max_sym_rel = 0.0;       // symmetry deviation in ulps
        double max_nonant = 0.0;        // non-anticipativity deviation (exact 0 expected)
        std::int64_t zero_char_violations = 0;
        std::int64_t lb_not_applicable = 0;
        double min_lb_norm = std::numeric_limits<double>::infinity();
        double min_lb_time = std::numeric_limits<double>::infinity();
        double min_db_p = std::numeric_limits<double>::infinity();
        double min_db_q = std::numeric_limits<double>::infinity();
        double max_twoform_rel = 0.0;
        std::int64_t pairs = 0;

        void merge(const Agg& o) {
            min_vl = std::min(min_vl, o.min_vl);
            max_sym_rel = std::max(max_sym_rel, o.max_sym_rel);
            max_nonant = std::max(max_nonant, o.max_nonant);
            zero_char_violations += o.zero_char_violations;
            lb_not_applicable += o.lb_not_applicable;
            min_lb_norm = std::min(min_lb_norm, o.min_lb_norm);
            min_lb_time = std::min(min_lb_time, o.min_lb_time);
            min_db_p = std::min(min_db_p, o.min_db_p);
            min_db_q = std::min(min_db_q, o.min_db_q);
            max_twoform_rel = std::max(max_twoform_rel, o.max_twoform_rel);
            pairs += o.pairs;
        }
    };

    const int blocks = std::max(1, opts.threads);
    std::vector<Agg> aggs(static_cast<std::size_t>(blocks));
    std::vector<std::string> csv_chunks(static_cast<std::size_t>(blocks));
    const bool emit = cfg.emit_pairs;

    parallel_blocks(npts, opts.threads, [&](int block, std::int64_t begin, std::int64_t end) {
        Agg agg;
        std::ostringstream csv;
        const double eps = std::numeric_limits<double>::epsilon();
        for (std::int64_t l = begin; l < end; ++l) {
            const int lp = static_cast<int>(l) / n_nodes;
            const int lt = ff + static_cast<int>(l) % n_nodes;
            const GridPath& x = fam.paths[static_cast<std::size_t>(lp)];
            for (std::int64_t r = l; r < npts; ++r) {
                const int rp = static_cast<int>(r) / n_nodes;
                const int rt = ff + static_cast<int>(r) % n_nodes;
                const GridPath& y = fam.paths[static_cast<std::size_t>(rp)];
                ++agg.pairs;

                const PenaltyEval fwd = vL(lt, x, rt, y, params);
                const PenaltyEval rev = vL(rt, y, lt, x, params);
                agg.min_vl = std::min(agg.min_vl, std::min(fwd.V, rev.V));

                // symmetry / antisymmetry, in units of ulps of the larger side
                double sym = 0.0;
                auto rel = [eps](double a, double b) {
                    const double scale = std::max(std::abs(a), std::abs(b));
                    return scale == 0.0 ? 0.0 : std::abs(a - b) / (eps * scale);
                };
                sym = std::max(sym, rel(fwd.V, rev.V));
                sym = std::max(sym, rel(fwd.P, -rev.P));
                for (std::size_t i = 0; i < fwd.Q.size(); ++i)
                    sym = std::max(sym, rel(fwd.Q[i], -rev.Q[i]));
                agg.max_sym_rel = std::max(agg.max_sym_rel, sym);

                // non-anticipativity: exact equality on stopped arguments
                const PenaltyEval stopped_eval =
                    vL(lt, stopped[static_cast<std::size_t>(l)], rt,
                       stopped[static_cast<std::size_t>(r)], params);
                double nonant = std::abs(fwd.V - stopped_eval.V);
                nonant = std::max(nonant, std::abs(fwd.P - stopped_eval.P));
                for (std::size_t i = 0; i < fwd.Q.size(); ++i)
                    nonant = std::max(nonant, std::abs(fwd.Q[i] - stopped_eval.Q[i]));
                agg.max_nonant = std::max(agg.max_nonant, nonant);

                // zero characterization
                const bool diag = diagonal_pair(lt, x, rt, y);
                if (diag ? fwd.V != 0.0 : !(fwd.V > 0.0)) ++agg.zero_char_violations;

                // lower bounds
                const LowerBoundCheck lb = check_lower_bounds(lt, x, rt, y, params);
                if (!lb.applicable) {
                    ++agg.lb_not_applicable;
                } else {
                    agg.min_lb_norm = std::min(agg.min_lb_norm, lb.margin_norm);
                    agg.min_lb_time = std::min(agg.min_lb_time, lb.margin_time);
                }

                // derivative bounds
                const DerivativeBoundCheck db = check_derivative_bounds(lt, x, rt, y, params);
                agg.min_db_p = std::min(agg.min_db_p, db.margin_p);
                agg.min_db_q = std::min(agg.min_db_q, db.margin_q);

                // two-form consistency off the diagonal
                double twoform = 0.0;
                if (!diag) {
                    const double V1 = v1(lt, x, rt, y, params).V;
                    const double V2 = v2(lt, x, rt, y, params);
                    const double direct = V2 + V1 * V1 / V2;
                    twoform = std::abs(fwd.V - direct) / std::max(std::abs(fwd.V), std::abs(direct));
                    agg.max_twoform_rel = std::max(agg.max_twoform_rel, twoform);
                }

                if (emit) {
                    csv << lp << ',' << lt << ',' << rp << ',' << rt << ',' << fmt(fwd.V) << ','
                        << fmt(sym) << ',' << fmt(nonant) << ',' << (diag ? 1 : 0) << ','
                        << (lb.applicable ? 1 : 0) << ',' << fmt(lb.margin_norm) << ','
                        << fmt(lb.margin_time) << ',' << fmt(db.margin_p) << ','
                        << fmt(db.margin_q) << ',' << fmt(twoform) << '\n';
                }
            }
        }
        aggs[static_cast<std::size_t>(block)] = agg;
        if (emit) csv_chunks[static_cast<std::size_t>(block)] = csv.str();
    });

    Agg agg;
    for (const auto& a : aggs) agg.merge(a);

    if (emit) {
        std::string csv =
            "left_path,t_idx,right_path,tau_idx,vl,sym_ulps,nonant_dev,diagonal,lb_applicable,"
            "lb_margin_norm,lb_margin_time,db_margin_p,db_margin_q,twoform_relerr\n";
        for (const auto& chunk : csv_chunks) csv += chunk;
        atomic_write(opts.out_dir / "penalty_margins.csv", csv);
        rep.artifacts.push_back("penalty_margins.csv");
    }

    const double ms = total.ms();
    auto add = [&](const std::string& name, bool pass, double margin, std::string detail) {
        rep.checks.push_back({name, pass, margin, std::move(detail), ms});
    };
    std::ostringstream meta;
    meta << fam.paths.size() << " paths, " << agg.pairs << " unordered pairs, L=" << params.L;
    add("nonnegativity", agg.min_vl >= 0.0, agg.min_vl, meta.str());
    add("symmetry", agg.max_sym_rel <= 4.0, 4.0 - agg.max_sym_rel,
        "max deviation " + fmt(agg.max_sym_rel) + " ulps");
    add("non-anticipativity", agg.max_nonant == 0.0, -agg.max_nonant,
        "max deviation " + fmt(agg.max_nonant));
    add("zero-characterization", agg.zero_char_violations == 0,
        -static_cast<double>(agg.zero_char_violations),
        std::to_string(agg.zero_char_violations) + " violations");
    {
        std::ostringstream det;
        det << agg.lb_not_applicable << " pairs not applicable";
        const double margin = std::min(agg.min_lb_norm, agg.min_lb_time);
        add("lower-bounds", margin >= 0.0 && agg.lb_not_applicable == 0, margin, det.str());
    }
    add("derivative-bounds", std::min(agg.min_db_p, agg.min_db_q) >= 0.0,
        std::min(agg.min_db_p, agg.min_db_q), "");
    add("two-form-consistency", agg.max_twoform_rel <= 1e-12, 1e-12 - agg.max_twoform_rel,
        "max relative error " + fmt(agg.max_twoform_rel));
    return rep;
}

} // namespace

SuiteReport run_penalty_suite(const ExperimentConfig& cfg, const RunOptions& opts) {
    return run_per_family("penalty-suite", cfg, opts, penalty_suite_impl);
}

// ---------------------------------------------------------------------------
// ci-check

namespace {

Functional product_functional() {
    // F(t, x) = x_0(t) * t with exact ci-derivatives (x_0(t), t e_0)
    Functional F;
    F.claims_non_anticipative = true;
    F.eval = [](int t_idx, const GridPath& x) {
        return x.at(t_idx)[0] * x.spec().time_at(t_idx);
    };
    F.exact_ci = [](int t_idx, const GridPath& x) -> std::optional<CiPair> {
        CiPair ci;
        ci.dt = x.at(t_idx)[0];
        ci.grad.assign(static_cast<std::size_t>(x.spec().n), 0.0);
        ci.grad[0] = x.spec().time_at(t_idx);
        return ci;
    };
    return F;
}

double fd_error(const CiDerivative& fd, const CiPair& exact) {
    double e = std::abs(fd.dt - exact.dt);
    double g2 = 0.0;
    for (std::size_t i = 0; i < fd.grad.size(); ++i) {
        const double d = fd.grad[i] - exact.grad[i];
        g2 += d * d;
    }
    return e + std::sqrt(g2);
}

} // namespace

namespace {

SuiteReport ci_check_impl(const ExperimentConfig& cfg, const RunOptions& opts,
                          const PathFamily& family_def) {
    SuiteReport rep;
    rep.command = "ci-check";
    EnumeratedFamily fam = build_family(family_def, opts);
    const GridSpec& g = fam.spec();
    const PenaltyParams params{cfg.penalty_L.value_or(family_def.slope_bound)};
    const double dt = g.dt_future();

    std::vector<int> steps = cfg.ci_check.step_intervals; // coarse to fine
    std::sort(steps.begin(), steps.end(), std::greater<int>());
    const int max_step = steps.front();
    if (max_step > g.m_fut)
        throw ConfigError("ci_check: coarsest step exceeds the future grid");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> path_dist(0, fam.paths.size() - 1);
    std::uniform_int_distribution<int> anchor_node_dist(g.first_future_node(), g.last_node());
    std::uniform_int_distribution<int> point_node_dist(g.first_future_node(),
                                                       g.last_node() - max_step);

    auto add = [&](const std::string& name, bool pass, double margin, std::string detail,
                   double ms) { rep.checks.push_back({name, pass, margin, std::move(detail), ms}); };

    // 1) smooth-functional convergence oracle F = x_0(t) * t
    {
        Timer t0;
        const Functional F = product_functional();
        double worst_dt = 0.0, worst_res = 0.0;
        std::vector<double> grad_err(steps.size(), 0.0);
        for (int s = 0; s < cfg.ci_check.anchor_samples; ++s) {
            const GridPath& x = fam.paths[path_dist(rng)];
            const int node = point_node_dist(rng);
            const auto exact = *F.exact_ci(node, x);
            for (std::size_t k = 0; k < steps.size(); ++k) {
                const CiDerivative fd =
                    ci_derivative_fd(F, x, node, static_cast<double>(steps[k]) * dt);
                worst_dt = std::max(worst_dt, std::abs(fd.dt - exact.dt));
                worst_res = std::max(worst_res, fd.residual);
                double g2 = 0.0;
                for (std::size_t i = 0; i < fd.grad.size(); ++i) {
                    const double d = fd.grad[i] - exact.grad[i];
                    g2 += d * d;
                }
                grad_err[k] = std::max(grad_err[k], std::sqrt(g2));
            }
        }
        bool halves = true;
        for (std::size_t k = 1; k < steps.size(); ++k) {
            const double expected = grad_err[k - 1] * (static_cast<double>(steps[k]) / steps[k - 1]);
            if (grad_err[k] > 4.0 * expected + 1e-13) halves = false;
        }
        std::ostringstream det;
        det << "dt err " << fmt(worst_dt) << ", residual " << fmt(worst_res) << ", grad err";
        for (double e : grad_err) det << " " << fmt(e);
        add("smooth-functional-convergence", worst_dt <= 1e-12 && worst_res <= 1e-12 && halves,
            1e-12 - std::max(worst_dt, worst_res), det.str(), t0.ms());
    }

    // 2) penalty-slice fd agreement at hypothesis-satisfying points
    {
        Timer t0;
        int found = 0;
        std::vector<double> step_err(steps.size(), 0.0);
        double worst_final_ratio = 0.0;
        double worst_residual = 0.0;
        const int attempts_cap = cfg.ci_check.anchor_samples * 200;
        int attempts = 0;
        while (found < cfg.ci_check.anchor_samples && attempts < attempts_cap) {
            ++attempts;
            const GridPath& anchor = fam.paths[path_dist(rng)];
            const int anchor_node = anchor_node_dist(rng);
            const GridPath& x = fam.paths[path_dist(rng)];
            const int node = point_node_dist(rng);
            const SliceSide side = (attempts % 2 == 0) ? SliceSide::left : SliceSide::right;
            const Functional slice = slice_functional(anchor, anchor_node, side, params);
            const auto exact = slice.exact_ci(node, x);
            if (!exact) continue;
            ++found;
            double final_err = 0.0, final_res = 0.0;
            for (std::size_t k = 0; k < steps.size(); ++k) {
                const CiDerivative fd =
                    ci_derivative_fd(slice, x, node, static_cast<double>(steps[k]) * dt);
                const double err = fd_error(fd, *exact);
                step_err[k] = std::max(step_err[k], err);
                final_err = err;
                final_res = fd.residual;
            }
            // verdict policy: agree within 10 * step * (local Lipschitz estimate)
            const double local_lip = 1.0 + std::abs(exact->dt) + norm(exact->grad);
            const double fine_step = static_cast<double>(steps.back()) * dt;
            const double coef = 2.0 * params.L * params.L + 1.0;
            const double mismatch_thresh = 10.0 * coef * fine_step * local_lip;
            worst_final_ratio =
                std::max(worst_final_ratio, final_err - mismatch_thresh);
            const double res_thresh = 10.0 * fine_step * local_lip;
            if (final_res > res_thresh) worst_residual = std::max(worst_residual, final_res);
        }
        bool halves = true;
        for (std::size_t k = 1; k < steps.size(); ++k) {
            const double shrink = static_cast<double>(steps[k]) / steps[k - 1];
            if (step_err[k] > 4.0 * shrink * step_err[k - 1] + 1e-13) halves = false;
        }
        std::ostringstream det;
        det << found << " valid samples, step errors";
        for (double e : step_err) det << " " << fmt(e);
        const bool enough = found >= cfg.ci_check.anchor_samples;
        add("slice-fd-agreement", enough && halves && worst_final_ratio <= 0.0,
            -worst_final_ratio, det.str(), t0.ms());
        add("slice-residual-verdict", worst_residual == 0.0, -worst_residual,
            "residuals within 10*step*local-Lipschitz at the finest step", t0.ms());
    }

    // 3) non-anticipativity of slices (and of the value table when present)
    {
        Timer t0;
        std::vector<PointedPath> samples;
        const std::size_t stride = std::max<std::size_t>(1, fam.paths.size() / 64);
        for (std::size_t p = 0; p < fam.paths.size(); p += stride)
            for (int node = g.first_future_node(); node <= g.last_node(); ++node)
                samples.push_back({fam.paths[p], node});
        double worst = 0.0;
        for (int k = 0; k < 8; ++k) {
            const GridPath& anchor = fam.paths[path_dist(rng)];
            const int anchor_node = anchor_node_dist(rng);
            const Functional slice = slice_functional(
                anchor, anchor_node, k % 2 == 0 ? SliceSide::left : SliceSide::right, params);
            worst = std::max(worst, check_non_anticipative(slice, samples));
        }
        std::string detail = "slices at 8 anchors, " + std::to_string(samples.size()) + " samples";
        if (cfg.problem_path) {
            BellmanData data = load_problem(*cfg.problem_path, g);
            auto table = std::make_shared<ValueTable>(solve_dp(data, fam));
            worst = std::max(worst, check_non_anticipative(as_functional(table), samples));
            detail += ", plus value table";
        }
        add("non-anticipativity", worst == 0.0, -worst, detail, t0.ms());
    }

    // 4) naive-functional failure exhibit on a dedicated fine grid
    {
        Timer t0;
        GridSpec fine;
        fine.h = 0.0;
        fine.T = 1.0;
        fine.n = 1;
        fine.m_past = 0;
        fine.m_fut = cfg.ci_check.exhibit_m_fut;
        fine.validate();
        const GridPath y_hat(fine, std::vector<double>(static_cast<std::size_t>(fine.node_count()), 0.0));
        const GridPath x_one(fine, std::vector<double>(static_cast<std::size_t>(fine.node_count()), 1.0));
        const int anchor_node = fine.last_node();
        const int probe_node = fine.m_fut / 2;
        const double fine_dt = fine.dt_future();

        Functional naive;
        naive.claims_non_anticipative = true;
        auto y_ptr = std::make_shared<const GridPath>(y_hat);
        naive.eval = [y_ptr, anchor_node](int t_idx, const GridPath& x) {
            const double sd = sup_dist_upto(x, *y_ptr, std::min(t_idx, anchor_node));
            return sd * sd;
        };
        const Functional smooth =
            slice_functional(y_hat, anchor_node, SliceSide::left, PenaltyParams{1.0});

        double naive_min = std::numeric_limits<double>::infinity();
        double smooth_final = 0.0;
        std::ostringstream det;
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const double step = static_cast<double>(steps[k]) * fine_dt;
            const double rn = ci_derivative_fd(naive, x_one, probe_node, step).residual;
            const double rs = ci_derivative_fd(smooth, x_one, probe_node, step).residual;
            naive_min = std::min(naive_min, rn);
            smooth_final = rs;
            det << "step " << steps[k] << ": naive " << fmt(rn) << " vs penalty " << fmt(rs)
                << "; ";
        }
        add("naive-exhibit", naive_min > 0.1 && smooth_final < 0.01,
            std::min(naive_min - 0.1, 0.01 - smooth_final), det.str(), t0.ms());
    }

    // 5) L_phi constants on the family
    {
        Timer t0;
        const auto probes = fam.def.effective_alphabet();
        Functional constant;
        constant.eval = [](int, const GridPath&) { return 1.25; };
        const double l_const = lphi_constant(constant, fam, probes);

        Functional time_f;
        time_f.eval = [](int t_idx, const GridPath& x) { return x.spec().time_at(t_idx); };
        const double l_time = lphi_constant(time_f, fam, probes);

        Functional current;
        current.eval = [](int t_idx, const GridPath& x) { return x.at(t_idx)[0]; };
        const double l_cur = lphi_constant(current, fam, probes);
        double expected_cur = 0.0;
        for (const auto& v : probes) expected_cur = std::max(expected_cur, std::abs(v[0]));

        const bool pass = l_const == 0.0 && std::abs(l_time - 1.0) <= 1e-12 &&
                          std::abs(l_cur - expected_cur) <= 1e-12;
        std::ostringstream det;
        det << "const " << fmt(l_const) << ", time " << fmt(l_time) << ", current " << fmt(l_cur)
            << " (expected " << fmt(expected_cur) << ")";
        add("lphi-constants", pass, -std::abs(l_time - 1.0), det.str(), t0.ms());
    }

    return rep;
}

} // namespace

SuiteReport run_ci_check(const ExperimentConfig& cfg, const RunOptions& opts) {
    return run_per_family("ci-check", cfg, opts, ci_check_impl);
}

// ---------------------------------------------------------------------------
// solve

namespace {

SuiteReport solve_impl(const ExperimentConfig& cfg, const RunOptions& opts,
                       const PathFamily& family_def) {
    SuiteReport rep;
    rep.command = "solve";
    if (!cfg.problem_path) throw ConfigError("solve: config has no 'problem' entry");

    Timer t0;
    EnumeratedFamily fam = build_family(family_def, opts);
    const GridSpec& g = fam.spec();
    BellmanData data = load_problem(*cfg.problem_path, g);
    SolveStats stats;
    auto table = std::make_shared<ValueTable>(solve_dp(data, fam, 1e-9, &stats));

    atomic_write(opts.out_dir / "value_table.csv", value_table_to_csv(*table));
    rep.artifacts.push_back("value_table.csv");

    const double residual = dpp_residual(*table, data, fam);
    rep.checks.push_back({"dpp-residual", residual <= 1e-12, 1e-12 - residual,
                          "residual " + fmt(residual), t0.ms()});
    rep.checks.push_back({"projection-defect", true, stats.max_projection_defect,
                          "max defect " + fmt(stats.max_projection_defect) + " over " +
                              std::to_string(stats.entries) + " entries",
                          t0.ms()});

    std::vector<PointedPath> samples;
    const std::size_t stride = std::max<std::size_t>(1, fam.paths.size() / 64);
    for (std::size_t p = 0; p < fam.paths.size(); p += stride)
        for (int node = g.first_future_node(); node <= g.last_node(); ++node)
            samples.push_back({fam.paths[p], node});
    const double nonant = check_non_anticipative(as_functional(table), samples);
    rep.checks.push_back({"table-non-anticipativity", nonant == 0.0, -nonant,
                          std::to_string(samples.size()) + " samples", t0.ms()});

    // discrete L_{phi,D} of the table, with the coarse bound
    // max|g| + 2 * slope * (spatial Lipschitz estimate)
    {
        Timer t1;
        const auto probes = fam.def.effective_alphabet();
        const double l_phi = lphi_constant(as_functional(table), fam, probes);
        double max_g = 0.0;
        for (const auto& [key, value] : table.get()->entries()) {
            if (key.first >= g.last_node()) continue;
            GridPath path(g, key.second);
            for (int u = 0; u < data.control_count(); ++u)
                max_g = std::max(max_g, std::abs(data.g(u, key.first, path)));
        }
        // spatial Lipschitz within layers
        double l_space = 0.0;
        auto it_begin = table->entries().begin();
        for (auto a = it_begin; a != table->entries().end(); ++a) {
            auto b = a;
            for (++b; b != table->entries().end() && b->first.first == a->first.first; ++b) {
                GridPath pa(g, a->first.second);
                GridPath pb(g, b->first.second);
                const double sd = sup_dist_upto(pa, pb, g.last_node());
                if (sd > 0.0) l_space = std::max(l_space, std::abs(a->second - b->second) / sd);
            }
        }
        const double bound = max_g + 2.0 * fam.def.slope_bound * l_space;
        std::ostringstream det;
        det << "L_phi " << fmt(l_phi) << " vs bound " << fmt(bound) << " (max|g| " << fmt(max_g)
            << ", spatial Lipschitz " << fmt(l_space) << ")";
        rep.checks.push_back({"lphi-finite-bound",
                              std::isfinite(l_phi) && l_phi <= bound + ulp_tol(bound, 16.0),
                              bound - l_phi, det.str(), t1.ms()});
    }

    // empirical Hamiltonian Lipschitz structure
    {
        Timer t1;
        Hamiltonian H = bellman_h(data);
        std::mt19937_64 rng(cfg.seed + 1);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<std::vector<double>> s_samples;
        std::vector<std::vector<double>> unit_samples;
        for (int k = 0; k < 16; ++k) {
            std::vector<double> s(static_cast<std::size_t>(g.n));
            for (double& c : s) c = gauss(rng);
            unit_samples.push_back(s);
            const double nn = norm(unit_samples.back());
            if (nn > 0.0)
                for (double& c : unit_samples.back()) c /= nn;
            for (double& c : s) c *= 2.0;
            s_samples.push_back(std::move(s));
        }
        const double a2 = check_assumption_A2(H, fam, s_samples, 256, cfg.seed + 2);
        const std::vector<double> radii{1.0, 2.0, 4.0};
        const auto a3 = check_assumption_A3(H, fam, unit_samples, radii, 256, cfg.seed + 2);
        std::ostringstream det;
        det << "A2 " << fmt(a2) << "; A3";
        for (const auto& [r, constant] : a3) det << " R=" << fmt(r) << ":" << fmt(constant);
        bool finite = std::isfinite(a2);
        for (const auto& [r, constant] : a3) finite = finite && std::isfinite(constant);
        rep.checks.push_back({"hamiltonian-lipschitz", finite, a2, det.str(), t1.ms()});
    }

    return rep;
}

} // namespace

SuiteReport run_solve(const ExperimentConfig& cfg, const RunOptions& opts) {
    return run_per_family("solve", cfg, opts, solve_impl);
}

// ---------------------------------------------------------------------------
// compare

std::string doubling_report_to_json(const DoublingReport& report, bool normalize) {
    (void)normalize;
    ordered_json j;
    j["schema"] = "cihj-doubling-report-v1";
    j["b"] = report.b;
    j["c"] = report.c;
    j["alpha"] = report.alpha;
    if (std::isfinite(report.eps_star))
        j["eps_star"] = report.eps_star;
    else
        j["eps_star"] = "infinity";
    j["boundary_gap"] = report.boundary_gap;
    j["verdict"] = to_string(report.verdict);
    j["attached_entry"] = report.attached_entry;
    j["interpretation"] = report.interpretation;
    j["maximizer"] = {{"left_path", report.maximizer.left.path},
                      {"left_node", report.maximizer.left.node},
                      {"right_path", report.maximizer.right.path},
                      {"right_node", report.maximizer.right.node},
                      {"value", report.maximizer.value},
                      {"ties", report.maximizer.ties}};
    j["entries"] = ordered_json::array();
    for (const auto& e : report.entries) {
        ordered_json je;
        je["epsilon"] = e.eps;
        je["delta"] = e.delta;
        je["value"] = e.max.value;
        je["ties"] = e.max.ties;
        je["left"] = {{"path", e.max.left.path}, {"node", e.max.left.node}};
        je["right"] = {{"path", e.max.right.path}, {"node", e.max.right.node}};
        ordered_json margins;
        for (const auto& m : e.estimates.margins) margins[m.name] = m.value;
        je["margins"] = margins;
        je["interiority_required"] = e.estimates.interiority_required;
        je["interior"] = e.estimates.interior_left && e.estimates.interior_right;
        if (e.ledger_present) {
            je["ledger"] = {{"dpsi1_dt", e.ledger.dpsi1_dt},
                            {"dpsi2_dtau", e.ledger.dpsi2_dtau},
                            {"ident_deviation", e.ledger.ident_deviation},
                            {"grad_gap", e.ledger.grad_gap},
                            {"gradient_bound_margin", e.ledger.gradient_bound_margin},
                            {"touching_left_margin", e.ledger.touching_left_margin},
                            {"touching_right_margin", e.ledger.touching_right_margin}};
        }
        if (e.hamiltonian_present) {
            je["hamiltonian_gap"] = e.hamiltonian_gap;
            je["gap_ge_2alpha"] = e.gap_ge_2alpha;
        }
        j["entries"].push_back(je);
    }
    return j.dump(2) + "\n";
}

std::string doubling_report_margins_csv(const DoublingReport& report) {
    std::ostringstream os;
    os << "epsilon,delta,value,ties,left_path,left_node,right_path,right_node";
    if (!report.entries.empty())
        for (const auto& m : report.entries.front().estimates.margins) os << ',' << m.name;
    os << ",interiority_required,interior,ident_deviation,gradient_bound_margin,"
          "touching_left_margin,touching_right_margin,hamiltonian_gap,gap_ge_2alpha\n";
    for (const auto& e : report.entries) {
        os << fmt(e.eps) << ',' << fmt(e.delta) << ',' << fmt(e.max.value) << ',' << e.max.ties
           << ',' << e.max.left.path << ',' << e.max.left.node << ',' << e.max.right.path << ','
           << e.max.right.node;
        for (const auto& m : e.estimates.margins) os << ',' << fmt(m.value);
        os << ',' << (e.estimates.interiority_required ? 1 : 0) << ','
           << ((e.estimates.interior_left && e.estimates.interior_right) ? 1 : 0);
        if (e.ledger_present) {
            os << ',' << fmt(e.ledger.ident_deviation) << ','
               << fmt(e.ledger.gradient_bound_margin) << ',' << fmt(e.ledger.touching_left_margin)
               << ',' << fmt(e.ledger.touching_right_margin);
        } else {
            os << ",,,,";
        }
        if (e.hamiltonian_present) {
            os << ',' << fmt(e.hamiltonian_gap) << ',' << (e.gap_ge_2alpha ? 1 : 0);
        } else {
            os << ",,";
        }
        os << '\n';
    }
    return os.str();
}

namespace {

SuiteReport compare_impl(const ExperimentConfig& cfg, const RunOptions& opts,
                         const PathFamily& family_def) {
    SuiteReport rep;
    rep.command = "compare";
    if (!cfg.compare) throw ConfigError("compare: config has no 'compare' entry");
    if (cfg.schedule.empty()) throw ConfigError("compare: config has no 'schedule'");

    Timer t0;
    EnumeratedFamily fam = build_family(family_def, opts);
    const Functional phi1 = build_functional(cfg.compare->first, cfg, fam);
    const Functional phi2 = build_functional(cfg.compare->second, cfg, fam);

    std::function<double(int, const GridPath&, std::span<const double>)> H;
    if (cfg.problem_path) {
        BellmanData data = load_problem(*cfg.problem_path, fam.spec());
        Hamiltonian ham = bellman_h(data);
        H = ham.eval;
    }

    DoublingReport report;
    try {
        report = comparison_verdict(phi1, phi2, fam, H, cfg.schedule, opts.threads);
    } catch (const BoundaryError& e) {
        rep.checks.push_back(
            {"terminal-boundary", false, -e.terminal_gap, e.what(), t0.ms()});
        return rep;
    }

    atomic_write(opts.out_dir / "compare_report.json",
                 doubling_report_to_json(report, opts.normalize_timestamps));
    rep.artifacts.push_back("compare_report.json");
    atomic_write(opts.out_dir / "compare_margins.csv", doubling_report_margins_csv(report));
    rep.artifacts.push_back("compare_margins.csv");

    const double ms = t0.ms();
    rep.checks.push_back({"terminal-boundary", true, -report.boundary_gap,
                          "max terminal gap " + fmt(report.boundary_gap), ms});

    double min_margin = std::numeric_limits<double>::infinity();
    bool interiority_ok = true;
    bool ledgers_ok = true;
    double min_touch = std::numeric_limits<double>::infinity();
    for (const auto& e : report.entries) {
        for (const auto& m : e.estimates.margins) min_margin = std::min(min_margin, m.value);
        if (e.estimates.interiority_required &&
            !(e.estimates.interior_left && e.estimates.interior_right))
            interiority_ok = false;
        if (e.ledger_present) {
            if (!e.ledger.pass()) ledgers_ok = false;
            min_touch = std::min(
                min_touch,
                std::min(e.ledger.touching_left_margin, e.ledger.touching_right_margin));
        }
    }
    if (report.entries.empty()) min_margin = 0.0;
    if (!std::isfinite(min_touch)) min_touch = 0.0;

    std::ostringstream det;
    det << "verdict " << to_string(report.verdict) << ", b " << fmt(report.b) << ", alpha "
        << fmt(report.alpha) << ", eps_star " << fmt(report.eps_star);
    if (report.attached_entry >= 0) det << ", gap at entry " << report.attached_entry;
    rep.checks.push_back({"step2-margins", min_margin >= 0.0, min_margin,
                          std::to_string(report.entries.size()) + " schedule points", ms});
    rep.checks.push_back({"step3-interiority", interiority_ok, interiority_ok ? 0.0 : -1.0,
                          "eps_star " + fmt(report.eps_star), ms});
    rep.checks.push_back({"step4-ledger", ledgers_ok, min_touch, "", ms});
    rep.checks.push_back({"verdict", true, report.b, det.str(), ms});
    return rep;
}

} // namespace

SuiteReport run_compare(const ExperimentConfig& cfg, const RunOptions& opts) {
    return run_per_family("compare", cfg, opts, compare_impl);
}

// ---------------------------------------------------------------------------
// all + summary

std::vector<SuiteReport> run_all(const ExperimentConfig& cfg, const RunOptions& opts) {
    std::vector<SuiteReport> reports;
    reports.push_back(run_penalty_suite(cfg, opts));
    reports.push_back(run_ci_check(cfg, opts));
    if (cfg.problem_path) reports.push_back(run_solve(cfg, opts));
    if (cfg.compare) reports.push_back(run_compare(cfg, opts));
    return reports;
}

std::string summary_to_json(const std::vector<SuiteReport>& reports,
                            const ExperimentConfig& cfg, bool normalize) {
    ordered_json j;
    j["schema"] = "cihj-summary-v1";
    j["command"] = reports.size() == 1 ? reports.front().command : "all";
    j["config_digest"] = fnv1a_hex(cfg.raw_json);
    j["seed"] = cfg.seed;
    j["normalized"] = normalize;
    bool all_pass = true;
    j["reports"] = ordered_json::array();
    for (const auto& rep : reports) {
        ordered_json jr;
        jr["command"] = rep.command;
        jr["checks"] = ordered_json::array();
        for (const auto& c : rep.checks) {
            ordered_json jc;
            jc["name"] = c.name;
            jc["pass"] = c.pass;
            jc["margin"] = c.margin;
            jc["detail"] = c.detail;
            jc["runtime_ms"] = normalize ? 0.0 : c.runtime_ms;
            jr["checks"].push_back(jc);
            all_pass = all_pass && c.pass;
        }
        jr["artifacts"] = rep.artifacts;
        j["reports"].push_back(jr);
    }
    j["all_pass"] = all_pass;
    return j.dump(2) + "\n";
}

} // namespace cihj
