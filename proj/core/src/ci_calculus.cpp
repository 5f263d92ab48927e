#include "cihj/ci_calculus.hpp"

#include <cmath>
#include <sstream>

namespace cihj {

CiDerivative ci_derivative_fd(const Functional& F, const GridPath& x, int t_idx, double step) {
    const GridSpec& g = x.spec();
    if (!g.is_future_node(t_idx) || t_idx == g.last_node())
        throw GridError("ci_derivative_fd: t must be a node in [0, T)");
    const double dt = g.dt_future();
    const double k_real = step / dt;
    const int k = static_cast<int>(std::llround(k_real));
    if (k < 1 || std::abs(k_real - k) > 1e-9)
        throw GridError("ci_derivative_fd: step is not a positive grid multiple");
    if (t_idx + k > g.last_node()) throw GridError("ci_derivative_fd: step reaches past the horizon");

    const int n = g.n;
    const double f0 = F(t_idx, x);
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);

    auto probe = [&](std::span<const double> vel) {
        GridPath z = lip_extension(t_idx, x, vel);
        return (F(t_idx + k, z) - f0) / step;
    };

    CiDerivative out;
    out.dt = probe(v);
    out.grad.resize(static_cast<std::size_t>(n));
    std::vector<double> q_plus(static_cast<std::size_t>(n)), q_minus(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = 1.0;
        q_plus[static_cast<std::size_t>(i)] = probe(v);
        v[static_cast<std::size_t>(i)] = -1.0;
        q_minus[static_cast<std::size_t>(i)] = probe(v);
        v[static_cast<std::size_t>(i)] = 0.0;
        out.grad[static_cast<std::size_t>(i)] =
            (q_plus[static_cast<std::size_t>(i)] - q_minus[static_cast<std::size_t>(i)]) / 2.0;
    }
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double gi = out.grad[static_cast<std::size_t>(i)];
        res = std::max(res, std::abs(q_plus[static_cast<std::size_t>(i)] - out.dt - gi));
        res = std::max(res, std::abs(q_minus[static_cast<std::size_t>(i)] - out.dt + gi));
    }
    out.residual = res;
    return out;
}

double check_non_anticipative(const Functional& F, std::span<const PointedPath> samples) {
    double worst = 0.0;
    for (const auto& p : samples) {
        const double direct = F(p.t_idx, p.path);
        const double stopped = F(p.t_idx, stop(p.path, p.t_idx));
        worst = std::max(worst, std::abs(direct - stopped));
    }
    return worst;
}

double lphi_constant(const Functional& F, const EnumeratedFamily& fam,
                     std::span<const std::vector<double>> probes, std::uint64_t work_cap) {
    const GridSpec& g = fam.spec();
    const std::uint64_t work = static_cast<std::uint64_t>(fam.paths.size()) *
                               static_cast<std::uint64_t>(g.m_fut) * probes.size() *
                               static_cast<std::uint64_t>(g.m_fut);
    if (work > work_cap) {
        std::ostringstream os;
        os << "lphi_constant: sweep of " << work << " evaluations exceeds cap " << work_cap;
        throw CapError(os.str());
    }
    const double dt = g.dt_future();
    double best = 0.0;
    for (const auto& x : fam.paths) {
        for (int t = g.first_future_node(); t < g.last_node(); ++t) {
            const double f0 = F(t, x);
            for (const auto& v : probes) {
                GridPath z = lip_extension(t, x, v);
                for (int k = 1; t + k <= g.last_node(); ++k) {
                    const double delta = static_cast<double>(k) * dt;
                    best = std::max(best, std::abs(F(t + k, z) - f0) / delta);
                }
            }
        }
    }
    return best;
}

} // namespace cihj
