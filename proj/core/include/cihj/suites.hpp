#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cihj/config.hpp"
#include "cihj/doubling.hpp"

namespace cihj {

struct RunOptions {
    std::filesystem::path out_dir;
    int threads = 1;
    std::optional<std::uint64_t> cap_override;
    bool normalize_timestamps = false;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;
    std::string detail;
    double runtime_ms = 0.0;
};

struct SuiteReport {
    std::string command;
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

/// Sweeps every (node x path)^2 pair of the enumerated family and checks
/// non-negativity, symmetry/antisymmetry, non-anticipativity, the zero
/// characterization, lower bounds, derivative bounds and two-form
/// consistency; emits a per-pair margins CSV when cfg.emit_pairs.
SuiteReport run_penalty_suite(const ExperimentConfig& cfg, const RunOptions& opts);

/// Finite-difference convergence against analytic ci-derivatives, slice
/// non-anticipativity, the naive-functional failure exhibit, and L_phi
/// constants.
SuiteReport run_ci_check(const ExperimentConfig& cfg, const RunOptions& opts);

/// Backward DP on the configured problem; emits the value table CSV and a
/// solve summary; checks the DPP residual, projection defects and
/// non-anticipativity, and reports empirical A.2/A.3 constants.
SuiteReport run_solve(const ExperimentConfig& cfg, const RunOptions& opts);

/// Comparison pipeline on the configured functional pair; emits the
/// doubling report JSON and per-schedule margins CSV. A terminal-boundary
/// violation is reported as a failed check, not an error.
SuiteReport run_compare(const ExperimentConfig& cfg, const RunOptions& opts);

/// penalty-suite + ci-check (+ solve + compare when configured).
std::vector<SuiteReport> run_all(const ExperimentConfig& cfg, const RunOptions& opts);

/// Deterministic JSON for one or more suite reports; runtimes are zeroed
/// when normalize is set.
std::string summary_to_json(const std::vector<SuiteReport>& reports,
                            const ExperimentConfig& cfg, bool normalize);

std::string doubling_report_to_json(const DoublingReport& report, bool normalize);
std::string doubling_report_margins_csv(const DoublingReport& report);

/// Builds a functional from a spec: builtin ("zero", "bellman-value") or
/// value-table CSV, plus offset, time ramp and stopped-key perturbations.
Functional build_functional(const FunctionalSpec& spec, const ExperimentConfig& cfg,
                            const EnumeratedFamily& fam);

} // namespace cihj
