#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cihj/errors.hpp"
#include "cihj/io.hpp"
#include "cihj/suites.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitCapError = 3;

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cihj: penalty functionals and doubling-of-variables checks for "
                 "path-dependent Hamilton-Jacobi equations on grid path families"};
    app.require_subcommand(1);

    std::string config_path = env("CIHJ_CONFIG").value_or("");
    std::string out_dir = env("CIHJ_OUT").value_or("");
    int threads = 1;
    if (auto t = env("CIHJ_THREADS")) threads = std::stoi(*t);
    std::uint64_t cap = 0;
    bool have_cap = false;
    if (auto c = env("CIHJ_CAP")) {
        cap = std::stoull(*c);
        have_cap = true;
    }
    bool normalize = env("CIHJ_NORMALIZE_TIMESTAMPS").has_value();

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment configuration JSON")
            ->required(config_path.empty());
        cmd->add_option("--out", out_dir, "output directory (default: config 'output')");
        cmd->add_option("--threads", threads, "worker threads for sweeps");
        cmd->add_option("--cap", cap, "override the family enumeration cap")
            ->each([&](const std::string&) { have_cap = true; });
        cmd->add_flag("--normalize-timestamps", normalize,
                      "zero runtime fields in summaries for byte-stable output");
    };

    CLI::App* cmd_penalty = app.add_subcommand("penalty-suite", "sweep penalty properties");
    CLI::App* cmd_ci = app.add_subcommand("ci-check", "ci-derivative and L_phi checks");
    CLI::App* cmd_compare = app.add_subcommand("compare", "doubling-of-variables comparison");
    CLI::App* cmd_solve = app.add_subcommand("solve", "backward DP on the Bellman problem");
    CLI::App* cmd_all = app.add_subcommand("all", "run every configured suite");
    for (CLI::App* c : {cmd_penalty, cmd_ci, cmd_compare, cmd_solve, cmd_all}) add_common(c);

    CLI11_PARSE(app, argc, argv);

    try {
        const cihj::ExperimentConfig cfg = cihj::load_experiment_config(config_path);
        cihj::RunOptions opts;
        opts.out_dir = out_dir.empty() ? cfg.output : std::filesystem::path(out_dir);
        opts.threads = std::max(1, threads);
        if (have_cap) opts.cap_override = cap;
        opts.normalize_timestamps = normalize;

        std::vector<cihj::SuiteReport> reports;
        if (app.got_subcommand(cmd_penalty)) {
            reports.push_back(cihj::run_penalty_suite(cfg, opts));
        } else if (app.got_subcommand(cmd_ci)) {
            reports.push_back(cihj::run_ci_check(cfg, opts));
        } else if (app.got_subcommand(cmd_compare)) {
            reports.push_back(cihj::run_compare(cfg, opts));
        } else if (app.got_subcommand(cmd_solve)) {
            reports.push_back(cihj::run_solve(cfg, opts));
        } else {
            reports = cihj::run_all(cfg, opts);
        }

        const std::string summary = cihj::summary_to_json(reports, cfg, normalize);
        cihj::atomic_write(opts.out_dir / "summary.json", summary);

        bool all_pass = true;
        for (const auto& rep : reports) {
            for (const auto& c : rep.checks) {
                std::cout << "[" << rep.command << "] " << (c.pass ? "PASS" : "FAIL") << " "
                          << c.name << " (margin " << cihj::format_double(c.margin) << ")"
                          << (c.detail.empty() ? "" : " - " + c.detail) << "\n";
                all_pass = all_pass && c.pass;
            }
        }
        std::cout << "summary: " << (opts.out_dir / "summary.json").string() << "\n";
        return all_pass ? kExitOk : kExitCheckFailure;
    } catch (const cihj::CapError& e) {
        std::cerr << "cap error: " << e.what() << "\n";
        return kExitCapError;
    } catch (const cihj::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const cihj::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
}
