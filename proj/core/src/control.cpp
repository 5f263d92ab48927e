#include "cihj/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace cihj {

Hamiltonian bellman_h(const BellmanData& data) {
    if (data.control_names.empty()) throw ConfigError("bellman_h: empty control alphabet");
    Hamiltonian H;
    const int nu = data.control_count();
    H.eval = [data, nu](int t_idx, const GridPath& x, std::span<const double> s) {
        std::vector<double> fv(static_cast<std::size_t>(x.spec().n));
        double best = std::numeric_limits<double>::infinity();
        for (int u = 0; u < nu; ++u) {
            data.f(u, t_idx, x, fv);
            double v = data.g(u, t_idx, x);
            for (std::size_t i = 0; i < fv.size(); ++i) v += fv[i] * s[i];
            best = std::min(best, v);
        }
        return best;
    };
    return H;
}

namespace {

struct PairSampler {
    std::mt19937_64 rng;
    std::uniform_int_distribution<std::size_t> path_dist;
    std::uniform_int_distribution<int> node_dist;

    PairSampler(const EnumeratedFamily& fam, std::uint64_t seed)
        : rng(seed), path_dist(0, fam.paths.size() - 1),
          node_dist(fam.first_future(), fam.last_node()) {}
};

} // namespace

double check_assumption_A2(const Hamiltonian& H, const EnumeratedFamily& fam,
                           std::span<const std::vector<double>> s_samples,
                           int pair_samples, std::uint64_t seed) {
    PairSampler smp(fam, seed);
    double best = 0.0;
    for (int k = 0; k < pair_samples; ++k) {
        const auto& x = fam.paths[smp.path_dist(smp.rng)];
        const auto& y = fam.paths[smp.path_dist(smp.rng)];
        const int t = smp.node_dist(smp.rng);
        const double sd = sup_dist_upto(x, y, t); // sup norm of the stopped difference
        if (sd == 0.0) continue;
        for (const auto& s : s_samples) {
            const double num = std::abs(H(t, x, s) - H(t, y, s));
            best = std::max(best, num / ((1.0 + norm(s)) * sd));
        }
    }
    return best;
}

std::vector<std::pair<double, double>> check_assumption_A3(
    const Hamiltonian& H, const EnumeratedFamily& fam,
    std::span<const std::vector<double>> unit_ball_samples, std::span<const double> radii,
    int pair_samples, std::uint64_t seed) {
    std::vector<std::pair<double, double>> out;
    for (double r : radii) {
        PairSampler smp(fam, seed); // same pair stream per radius
        double best = 0.0;
        std::vector<double> s_scaled;
        for (int k = 0; k < pair_samples; ++k) {
            const auto& x = fam.paths[smp.path_dist(smp.rng)];
            const auto& y = fam.paths[smp.path_dist(smp.rng)];
            const int t = smp.node_dist(smp.rng);
            const double sd = sup_dist_upto(x, y, t);
            if (sd == 0.0) continue;
            for (const auto& s : unit_ball_samples) {
                s_scaled.assign(s.begin(), s.end());
                for (double& c : s_scaled) c *= r;
                const double num = std::abs(H(t, x, s_scaled) - H(t, y, s_scaled));
                best = std::max(best, num / sd);
            }
        }
        out.emplace_back(r, best);
    }
    return out;
}

void ValueTable::set(int t_idx, const GridPath& stopped, double value) {
    values_[Key{t_idx, std::vector<double>(stopped.samples().begin(), stopped.samples().end())}] =
        value;
}

double ValueTable::lookup(int t_idx, const GridPath& x) const {
    if (!(x.spec() == spec_)) throw SpecMismatchError("ValueTable::lookup: spec mismatch");
    if (!spec_.is_future_node(t_idx)) throw GridError("ValueTable::lookup: t outside [0, T]");
    GridPath stopped = stop(x, t_idx);
    auto it = values_.find(
        Key{t_idx, std::vector<double>(stopped.samples().begin(), stopped.samples().end())});
    if (it == values_.end()) {
        std::ostringstream os;
        os << "ValueTable::lookup: no entry for the stopped path at node " << t_idx
           << " (path outside the solved family)";
        throw KeyMissError(os.str());
    }
    return it->second;
}

namespace {

/// Nearest effective-alphabet velocity (Euclidean; first wins ties).
std::size_t project_velocity(std::span<const double> f,
                             const std::vector<std::vector<double>>& alphabet, double* defect) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < alphabet.size(); ++a) {
        const double d = dist(f, alphabet[a]);
        if (d < best_d) {
            best_d = d;
            best = a;
        }
    }
    *defect = best_d;
    return best;
}

} // namespace

ValueTable solve_dp(const BellmanData& data, const EnumeratedFamily& fam, double defect_tol,
                    SolveStats* stats) {
    if (data.control_names.empty()) throw ConfigError("solve_dp: empty control alphabet");
    const GridSpec& g = fam.spec();
    const auto alphabet = fam.def.effective_alphabet();
    const double dt = g.dt_future();
    const double defect_threshold = dt * defect_tol;

    // layer keys: distinct stopped paths per future node
    std::vector<std::set<std::vector<double>>> layers(static_cast<std::size_t>(g.m_fut + 1));
    for (const auto& x : fam.paths) {
        for (int t = g.first_future_node(); t <= g.last_node(); ++t) {
            GridPath s = stop(x, t);
            layers[static_cast<std::size_t>(t - g.first_future_node())].insert(
                std::vector<double>(s.samples().begin(), s.samples().end()));
        }
    }

    ValueTable table(g);
    double max_defect = 0.0;

    // terminal layer
    for (const auto& samples : layers.back()) {
        GridPath path(g, samples);
        table.set_key(ValueTable::Key{g.last_node(), samples}, data.terminal(path));
    }

    // backward induction
    std::vector<double> fv(static_cast<std::size_t>(g.n));
    for (int t = g.last_node() - 1; t >= g.first_future_node(); --t) {
        for (const auto& samples : layers[static_cast<std::size_t>(t - g.first_future_node())]) {
            GridPath path(g, samples);
            double best = std::numeric_limits<double>::infinity();
            for (int u = 0; u < data.control_count(); ++u) {
                data.f(u, t, path, fv);
                double defect = 0.0;
                const std::size_t a = project_velocity(fv, alphabet, &defect);
                max_defect = std::max(max_defect, defect);
                if (defect > defect_threshold) {
                    std::ostringstream os;
                    os << "solve_dp: control '" << data.control_names[static_cast<std::size_t>(u)]
                       << "' drives off the velocity alphabet (defect " << defect << " > "
                       << defect_threshold << ")";
                    throw ConfigError(os.str());
                }
                GridPath next = stop(lip_extension(t, path, alphabet[a]), t + 1);
                const double cont = table.lookup(t + 1, next);
                best = std::min(best, data.g(u, t, path) * dt + cont);
            }
            table.set_key(ValueTable::Key{t, samples}, best);
        }
    }

    if (stats) {
        stats->max_projection_defect = max_defect;
        stats->entries = static_cast<std::int64_t>(table.size());
    }
    return table;
}

double dpp_residual(const ValueTable& table, const BellmanData& data,
                    const EnumeratedFamily& fam) {
    const GridSpec& g = fam.spec();
    const auto alphabet = fam.def.effective_alphabet();
    const double dt = g.dt_future();
    double worst = 0.0;
    std::vector<double> fv(static_cast<std::size_t>(g.n));
    for (const auto& [key, value] : table.entries()) {
        const int t = key.first;
        if (t >= g.last_node()) continue;
        GridPath path(g, key.second);
        double best = std::numeric_limits<double>::infinity();
        for (int u = 0; u < data.control_count(); ++u) {
            data.f(u, t, path, fv);
            double defect = 0.0;
            const std::size_t a = project_velocity(fv, alphabet, &defect);
            GridPath next = stop(lip_extension(t, path, alphabet[a]), t + 1);
            best = std::min(best, data.g(u, t, path) * dt + table.lookup(t + 1, next));
        }
        worst = std::max(worst, std::abs(value - best));
    }
    return worst;
}

Functional as_functional(std::shared_ptr<const ValueTable> table) {
    Functional F;
    F.claims_non_anticipative = true;
    F.eval = [table](int t_idx, const GridPath& x) { return table->lookup(t_idx, x); };
    return F;
}

} // namespace cihj
