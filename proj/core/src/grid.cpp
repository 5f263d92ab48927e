#include "cihj/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cihj {

void GridSpec::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("GridSpec: T must be positive and finite");
    if (h < 0.0 || !std::isfinite(h)) throw ConfigError("GridSpec: h must be >= 0 and finite");
    if (n < 1) throw ConfigError("GridSpec: n must be a positive integer");
    if (m_fut < 1) throw ConfigError("GridSpec: m_fut must be >= 1");
    if (h > 0.0 && m_past < 1) throw ConfigError("GridSpec: h > 0 requires m_past >= 1");
    if (h == 0.0 && m_past != 0) throw ConfigError("GridSpec: h == 0 requires m_past == 0");
}

double GridSpec::time_at(int node) const {
    if (node < 0 || node > last_node()) throw GridError("GridSpec::time_at: node out of range");
    if (node <= m_past) {
        if (node == m_past) return 0.0;
        // -(h * (m_past - node)) / m_past is exact at both endpoints
        return -(h * static_cast<double>(m_past - node)) / static_cast<double>(m_past);
    }
    if (node == last_node()) return T;
    return (T * static_cast<double>(node - m_past)) / static_cast<double>(m_fut);
}

GridPath::GridPath(GridSpec spec, std::vector<double> samples)
    : spec_(spec), samples_(std::move(samples)) {
    spec_.validate();
    const auto expected = static_cast<std::size_t>(spec_.node_count()) * spec_.n;
    if (samples_.size() != expected) {
        std::ostringstream os;
        os << "GridPath: expected " << expected << " samples, got " << samples_.size();
        throw GridError(os.str());
    }
    for (double s : samples_) {
        if (!std::isfinite(s)) throw GridError("GridPath: non-finite sample");
    }
}

void GridPath::value_at_time(double t, std::span<double> out) const {
    if (out.size() != static_cast<std::size_t>(spec_.n))
        throw GridError("GridPath::value_at_time: bad output size");
    const double lo = -spec_.h;
    if (t < lo || t > spec_.T) throw GridError("GridPath::value_at_time: time out of range");
    // locate the interval
    int left;
    double frac;
    if (t <= 0.0) {
        if (spec_.m_past == 0) {
            left = 0;
            frac = 0.0;
        } else {
            const double dt = spec_.dt_past();
            double pos = (t - lo) / dt;
            left = std::min(static_cast<int>(pos), spec_.m_past - 1);
            frac = pos - left;
        }
    } else {
        const double dt = spec_.dt_future();
        double pos = t / dt;
        left = std::min(static_cast<int>(pos), spec_.m_fut - 1);
        frac = pos - left;
        left += spec_.m_past;
    }
    auto a = at(left);
    auto b = at(left + 1 <= spec_.node_count() - 1 ? left + 1 : left);
    for (int i = 0; i < spec_.n; ++i) out[i] = a[i] + frac * (b[i] - a[i]);
}

GridPath stop(const GridPath& x, int t_idx) {
    const GridSpec& g = x.spec();
    if (!g.is_future_node(t_idx)) throw GridError("stop: t_idx is not a node in [0, T]");
    std::vector<double> s(x.samples().begin(), x.samples().end());
    auto frozen = x.at(t_idx);
    for (int j = t_idx + 1; j <= g.last_node(); ++j) {
        std::copy(frozen.begin(), frozen.end(), s.begin() + static_cast<std::size_t>(j) * g.n);
    }
    return GridPath(g, std::move(s));
}

double sup_dist_upto(const GridPath& x, const GridPath& y, int t_idx) {
    if (!(x.spec() == y.spec())) throw SpecMismatchError("sup_dist_upto: spec mismatch");
    if (t_idx < 0 || t_idx > x.spec().last_node()) throw GridError("sup_dist_upto: node out of range");
    double best = 0.0;
    for (int j = 0; j <= t_idx; ++j) best = std::max(best, dist(x.at(j), y.at(j)));
    return best;
}

double sup_dist_stopped(const GridPath& x, int t_idx, const GridPath& y, int tau_idx) {
    const GridSpec& g = x.spec();
    if (!(g == y.spec())) throw SpecMismatchError("sup_dist_stopped: spec mismatch");
    if (!g.is_future_node(t_idx) || !g.is_future_node(tau_idx))
        throw GridError("sup_dist_stopped: node out of range");
    double best = 0.0;
    auto xt = x.at(t_idx);
    auto yt = y.at(tau_idx);
    for (int j = 0; j <= g.last_node(); ++j) {
        auto a = j <= t_idx ? x.at(j) : xt;
        auto b = j <= tau_idx ? y.at(j) : yt;
        best = std::max(best, dist(a, b));
    }
    return best;
}

GridPath lip_extension(int t_idx, const GridPath& x, std::span<const double> v) {
    const GridSpec& g = x.spec();
    if (!g.is_future_node(t_idx) || t_idx == g.last_node())
        throw GridError("lip_extension: t_idx must be a node in [0, T)");
    if (v.size() != static_cast<std::size_t>(g.n)) throw GridError("lip_extension: bad velocity size");
    std::vector<double> s(x.samples().begin(), x.samples().end());
    auto base = x.at(t_idx);
    const double dt = g.dt_future();
    for (int j = t_idx + 1; j <= g.last_node(); ++j) {
        const double elapsed = static_cast<double>(j - t_idx) * dt;
        double* out = s.data() + static_cast<std::size_t>(j) * g.n;
        for (int i = 0; i < g.n; ++i) out[i] = base[i] + v[i] * elapsed;
    }
    return GridPath(g, std::move(s));
}

double lip_constant(const GridPath& x) {
    const GridSpec& g = x.spec();
    const double dt = g.dt_future();
    double best = 0.0;
    for (int j = g.first_future_node(); j < g.last_node(); ++j) {
        best = std::max(best, dist(x.at(j + 1), x.at(j)) / dt);
    }
    return best;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace cihj
