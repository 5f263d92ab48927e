#include "cihj/config.hpp"

#include <json.hpp>

#include "cihj/expressions.hpp"
#include "cihj/io.hpp"

namespace cihj {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw ConfigError("config: " + what); }

json parse_json(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(std::string("malformed JSON in ") + what);
    return j;
}

/// number or array-of-numbers -> vector of length n
std::vector<double> coords(const json& j, int n, const char* what) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& c : j) {
            if (!c.is_number()) bad(std::string(what) + ": expected numbers");
            out.push_back(c.get<double>());
        }
    } else {
        bad(std::string(what) + ": expected a number or array");
    }
    if (static_cast<int>(out.size()) != n)
        bad(std::string(what) + ": expected " + std::to_string(n) + " coordinates");
    return out;
}

/// n x n matrix as array of rows (or a number for n == 1)
std::vector<std::vector<double>> matrix(const json& j, int n, const char* what) {
    std::vector<std::vector<double>> out;
    if (j.is_number()) {
        if (n != 1) bad(std::string(what) + ": scalar matrix requires n == 1");
        out.push_back({j.get<double>()});
        return out;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        bad(std::string(what) + ": expected " + std::to_string(n) + " rows");
    for (const auto& row : j) out.push_back(coords(row, n, what));
    return out;
}

PathFamily parse_family(const json& fj) {
    PathFamily fam;
    GridSpec g;
    g.h = fj.value("h", 0.0);
    g.T = fj.value("T", 1.0);
    g.n = fj.value("n", 1);
    g.m_past = fj.value("m_past", 0);
    g.m_fut = fj.value("m_fut", 1);
    fam.spec = g;
    fam.slope_bound = fj.value("slope_bound", 1.0);
    if (!fj.contains("velocity_alphabet")) bad("family: missing 'velocity_alphabet'");
    for (const auto& v : fj.at("velocity_alphabet"))
        fam.velocity_alphabet.push_back(coords(v, g.n, "velocity_alphabet"));
    if (fj.contains("start_values")) {
        for (const auto& s : fj.at("start_values"))
            fam.start_values.push_back(coords(s, g.n, "start_values"));
    } else {
        fam.start_values.push_back(std::vector<double>(static_cast<std::size_t>(g.n), 0.0));
    }
    double max_start = 0.0;
    for (const auto& s : fam.start_values) max_start = std::max(max_start, norm(s));
    fam.start_box = fj.value("start_box", max_start);
    fam.cap = fj.value("cap", std::uint64_t{1'000'000});
    fam.validate();
    return fam;
}

FunctionalSpec parse_functional_spec(const json& j) {
    FunctionalSpec spec;
    if (!j.is_object()) bad("functional spec must be an object");
    if (j.contains("builtin")) spec.builtin = j.at("builtin").get<std::string>();
    if (j.contains("table")) spec.table_path = j.at("table").get<std::string>();
    if (spec.builtin.empty() == spec.table_path.empty())
        bad("functional spec needs exactly one of 'builtin' or 'table'");
    spec.offset = j.value("offset", 0.0);
    spec.time_ramp = j.value("time_ramp", 0.0);
    if (j.contains("perturb")) {
        for (const auto& p : j.at("perturb")) {
            FunctionalSpec::Perturb entry;
            entry.t_idx = p.at("t_idx").get<int>();
            entry.path = p.at("path").get<int>();
            entry.amount = p.at("amount").get<double>();
            spec.perturbations.push_back(entry);
        }
    }
    return spec;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j = parse_json(json_text, "experiment config");
    ExperimentConfig cfg;
    cfg.raw_json = json_text;

    if (!j.contains("family")) bad("missing 'family'");
    cfg.family = parse_family(j.at("family"));
    if (j.contains("families")) {
        for (const auto& fj : j.at("families")) cfg.extra_families.push_back(parse_family(fj));
    }

    if (j.contains("penalty") && j.at("penalty").contains("L") &&
        !j.at("penalty").at("L").is_null())
        cfg.penalty_L = j.at("penalty").at("L").get<double>();

    if (j.contains("schedule")) {
        for (const auto& e : j.at("schedule")) {
            if (!e.is_array() || e.size() != 2) bad("schedule entries must be [epsilon, delta]");
            cfg.schedule.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
    }

    if (j.contains("problem")) cfg.problem_path = j.at("problem").get<std::string>();
    if (j.contains("compare")) {
        const json& cj = j.at("compare");
        cfg.compare = {parse_functional_spec(cj.at("phi1")), parse_functional_spec(cj.at("phi2"))};
    }
    if (j.contains("seeds")) cfg.seed = j.at("seeds").value("master", std::uint64_t{0});
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("ci_check")) {
        const json& cc = j.at("ci_check");
        cfg.ci_check.anchor_samples = cc.value("anchor_samples", cfg.ci_check.anchor_samples);
        if (cc.contains("steps")) {
            cfg.ci_check.step_intervals.clear();
            for (const auto& s : cc.at("steps")) cfg.ci_check.step_intervals.push_back(s.get<int>());
        }
        cfg.ci_check.exhibit_m_fut = cc.value("exhibit_m_fut", cfg.ci_check.exhibit_m_fut);
    }
    cfg.emit_pairs = j.value("emit_pairs", true);

    if (cfg.ci_check.anchor_samples < 1) bad("ci_check.anchor_samples must be >= 1");
    for (int s : cfg.ci_check.step_intervals)
        if (s < 1) bad("ci_check.steps must be positive interval counts");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_file(path));
}

BellmanData parse_problem(const std::string& json_text, const GridSpec& spec) {
    json j = parse_json(json_text, "problem file");
    const int n = spec.n;
    if (!j.contains("controls") || !j.at("controls").is_array() || j.at("controls").empty())
        bad("problem: 'controls' must be a non-empty array");

    struct AffineF {
        std::vector<double> c;
        std::vector<std::vector<double>> cur;
        std::vector<std::vector<double>> del;
    };
    struct AffineG {
        double c = 0.0;
        std::vector<double> cur;
        std::vector<double> del;
        double sup = 0.0;
    };
    auto fs = std::make_shared<std::vector<AffineF>>();
    auto gs = std::make_shared<std::vector<AffineG>>();

    BellmanData data;
    const std::vector<double> zero_vec(static_cast<std::size_t>(n), 0.0);
    const std::vector<std::vector<double>> zero_mat(static_cast<std::size_t>(n), zero_vec);
    for (const auto& cj : j.at("controls")) {
        data.control_names.push_back(cj.value("name", "u" + std::to_string(fs->size())));
        AffineF f{zero_vec, zero_mat, zero_mat};
        if (cj.contains("f")) {
            const json& fj = cj.at("f");
            if (fj.contains("const")) f.c = coords(fj.at("const"), n, "f.const");
            if (fj.contains("current")) f.cur = matrix(fj.at("current"), n, "f.current");
            if (fj.contains("delayed")) f.del = matrix(fj.at("delayed"), n, "f.delayed");
        }
        AffineG g{0.0, zero_vec, zero_vec, 0.0};
        if (cj.contains("g")) {
            const json& gj = cj.at("g");
            g.c = gj.value("const", 0.0);
            if (gj.contains("current")) g.cur = coords(gj.at("current"), n, "g.current");
            if (gj.contains("delayed")) g.del = coords(gj.at("delayed"), n, "g.delayed");
            g.sup = gj.value("sup", 0.0);
        }
        fs->push_back(std::move(f));
        gs->push_back(std::move(g));
    }

    const double h = spec.h;
    data.f = [fs, h](int u, int t_idx, const GridPath& x, std::span<double> out) {
        const AffineF& f = (*fs)[static_cast<std::size_t>(u)];
        const GridSpec& g = x.spec();
        auto cur = x.at(t_idx);
        std::vector<double> del(static_cast<std::size_t>(g.n));
        x.value_at_time(g.time_at(t_idx) - h, del);
        for (int i = 0; i < g.n; ++i) {
            double v = f.c[static_cast<std::size_t>(i)];
            for (int k = 0; k < g.n; ++k) {
                v += f.cur[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * cur[static_cast<std::size_t>(k)];
                v += f.del[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * del[static_cast<std::size_t>(k)];
            }
            out[static_cast<std::size_t>(i)] = v;
        }
    };
    data.g = [gs, h](int u, int t_idx, const GridPath& x) {
        const AffineG& gg = (*gs)[static_cast<std::size_t>(u)];
        const GridSpec& g = x.spec();
        auto cur = x.at(t_idx);
        double v = gg.c;
        for (int k = 0; k < g.n; ++k) v += gg.cur[static_cast<std::size_t>(k)] * cur[static_cast<std::size_t>(k)];
        if (g.h > 0.0 || gg.del != std::vector<double>(static_cast<std::size_t>(g.n), 0.0)) {
            std::vector<double> del(static_cast<std::size_t>(g.n));
            x.value_at_time(g.time_at(t_idx) - h, del);
            for (int k = 0; k < g.n; ++k) v += gg.del[static_cast<std::size_t>(k)] * del[static_cast<std::size_t>(k)];
        }
        if (gg.sup != 0.0) {
            double best = 0.0;
            for (int jn = 0; jn <= t_idx; ++jn) best = std::max(best, norm(x.at(jn)));
            v += gg.sup * best;
        }
        return v;
    };

    const std::string terminal_text = j.value("terminal", std::string("0"));
    Expression terminal = Expression::parse(terminal_text);
    data.terminal = [terminal](const GridPath& x) {
        return terminal.evaluate(x.spec().last_node(), x);
    };
    return data;
}

BellmanData load_problem(const std::filesystem::path& path, const GridSpec& spec) {
    return parse_problem(read_file(path), spec);
}

} // namespace cihj
