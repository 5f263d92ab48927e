#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cihj/control.hpp"
#include "cihj/family.hpp"

namespace cihj {

/// How to build one side of a comparison: a named builtin (optionally
/// shifted, ramped or perturbed at stopped-path entries) or a value-table
/// CSV from a previous solve.
struct FunctionalSpec {
    std::string builtin;    ///< "zero" | "bellman-value"; empty when table-backed
    std::string table_path; ///< value-table CSV; empty when builtin
    double offset = 0.0;    ///< adds a constant
    double time_ramp = 0.0; ///< adds time_ramp * (T - t)
    struct Perturb {
        int t_idx = 0;
        int path = 0; ///< enumeration index
        double amount = 0.0;
    };
    std::vector<Perturb> perturbations; ///< added at matching stopped keys
};

struct CiCheckConfig {
    int anchor_samples = 64;
    std::vector<int> step_intervals{4, 2, 1}; ///< fd steps in grid intervals, coarse to fine
    int exhibit_m_fut = 512;                  ///< grid for the naive-functional exhibit
};

/// Parsed experiment configuration (JSON document).
struct ExperimentConfig {
    PathFamily family;
    std::vector<PathFamily> extra_families; ///< optional further sets D_p
    std::optional<double> penalty_L; ///< defaults to the family slope bound
    std::vector<std::pair<double, double>> schedule;
    std::optional<std::filesystem::path> problem_path;
    std::optional<std::pair<FunctionalSpec, FunctionalSpec>> compare;
    std::uint64_t seed = 0;
    std::filesystem::path output = "out";
    CiCheckConfig ci_check;
    bool emit_pairs = true;
    std::string raw_json; ///< original bytes, for the digest

    double penalty_param() const { return penalty_L.value_or(family.slope_bound); }

    /// The primary family followed by the extra ones: every check runs
    /// once per member, realizing the family-quantified definitions.
    std::vector<PathFamily> all_families() const {
        std::vector<PathFamily> out{family};
        out.insert(out.end(), extra_families.begin(), extra_families.end());
        return out;
    }
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Bellman problem file: named controls with affine dynamics
/// f_u = c + A x(t) + B x(t-h), affine costs
/// g_u = c0 + <c1, x(t)> + <c2, x(t-h)> + c3 * runsup, and a terminal
/// expression over the small grammar (x, xd, sup, t).
BellmanData load_problem(const std::filesystem::path& path, const GridSpec& spec);
BellmanData parse_problem(const std::string& json_text, const GridSpec& spec);

} // namespace cihj
