#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cihj/family.hpp"
#include "cihj/functional.hpp"

namespace cihj {

/// Hamiltonian evaluator H(t, x(.), s) with declared Lipschitz structure.
struct Hamiltonian {
    std::function<double(int t_idx, const GridPath&, std::span<const double> s)> eval;
    std::optional<double> declared_A2; ///< constant L_{H,D}, when known
    std::vector<std::pair<double, double>> declared_A3; ///< (radius, constant) rows

    double operator()(int t_idx, const GridPath& x, std::span<const double> s) const {
        return eval(t_idx, x, s);
    }
};

/// Bellman problem data: finite control alphabet, dynamics f, running cost
/// g, terminal data.
struct BellmanData {
    std::vector<std::string> control_names;
    /// writes f(t, x, u) into out (n coordinates)
    std::function<void(int u, int t_idx, const GridPath&, std::span<double> out)> f;
    std::function<double(int u, int t_idx, const GridPath&)> g;
    std::function<double(const GridPath&)> terminal;

    int control_count() const { return static_cast<int>(control_names.size()); }
};

/// H(t,x,s) = min over u of <f(t,x,u), s> + g(t,x,u).
Hamiltonian bellman_h(const BellmanData& data);

/// Empirical A.2 constant: max over sampled (t, x, y, s) of
/// |H(t,x,s) - H(t,y,s)| / [(1+||s||) sup-dist(x(.^t), y(.^t))], pairs with
/// zero stopped distance excluded. Deterministic in the seed.
double check_assumption_A2(const Hamiltonian& H, const EnumeratedFamily& fam,
                           std::span<const std::vector<double>> s_samples,
                           int pair_samples, std::uint64_t seed);

/// Empirical A.3 constants per radius: as A.2 but with s confined to each
/// ball B(R) (the given unit-ball samples are scaled by R) and no
/// (1+||s||) factor. Returns (radius, constant) rows.
std::vector<std::pair<double, double>> check_assumption_A3(
    const Hamiltonian& H, const EnumeratedFamily& fam,
    std::span<const std::vector<double>> unit_ball_samples, std::span<const double> radii,
    int pair_samples, std::uint64_t seed);

/// Candidate value functional as data over an enumerated family; keyed by
/// stopped paths, hence non-anticipative by construction.
class ValueTable {
public:
    using Key = std::pair<int, std::vector<double>>; // (node, stopped samples)

    explicit ValueTable(GridSpec spec, std::string interpolation = "stopped-key-exact")
        : spec_(spec), interpolation_(std::move(interpolation)) {}

    const GridSpec& spec() const { return spec_; }
    const std::string& interpolation() const { return interpolation_; }

    void set(int t_idx, const GridPath& stopped, double value);
    void set_key(Key key, double value) { values_[std::move(key)] = value; }

    /// Value at (t, x): looks up the stopped key; throws KeyMissError for
    /// paths outside the solved family.
    double lookup(int t_idx, const GridPath& x) const;

    const std::map<Key, double>& entries() const { return values_; }
    std::map<Key, double>& entries() { return values_; }
    std::size_t size() const { return values_.size(); }

    bool operator==(const ValueTable& o) const {
        return spec_ == o.spec_ && values_ == o.values_;
    }

private:
    GridSpec spec_;
    std::string interpolation_;
    std::map<Key, double> values_;
};

/// Summary of one backward dynamic-programming solve.
struct SolveStats {
    double max_projection_defect = 0.0;
    std::int64_t entries = 0;
};

/// Backward Euler dynamic programming over the family's stopped-path tree:
/// terminal layer from terminal(x), then
/// value(t, x) = min_u [ g(t,x,u) dt + value(t+dt, extension by f(t,x,u)) ].
/// f values are projected to the nearest alphabet velocity; a projection
/// defect above dt * defect_tol is an error.
ValueTable solve_dp(const BellmanData& data, const EnumeratedFamily& fam,
                    double defect_tol = 1e-9, SolveStats* stats = nullptr);

/// One-step optimality residual: max over interior keys of
/// |value(t,x) - min_u [g dt + value(t+dt, extension)]|. Zero for tables
/// fresh from solve_dp.
double dpp_residual(const ValueTable& table, const BellmanData& data, const EnumeratedFamily& fam);

/// Wraps table lookup as a Functional (no exact ci, non-anticipative).
Functional as_functional(std::shared_ptr<const ValueTable> table);

} // namespace cihj
