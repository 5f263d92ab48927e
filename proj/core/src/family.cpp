#include "cihj/family.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cihj {

void PathFamily::validate() const {
    spec.validate();
    if (start_box < 0.0) throw ConfigError("PathFamily: start_box must be >= 0");
    if (slope_bound < 0.0) throw ConfigError("PathFamily: slope_bound must be >= 0");
    if (start_values.empty()) throw ConfigError("PathFamily: start_values must be non-empty");
    for (const auto& v : velocity_alphabet) {
        if (v.size() != static_cast<std::size_t>(spec.n))
            throw ConfigError("PathFamily: alphabet velocity has wrong dimension");
        if (norm(v) > slope_bound)
            throw ConfigError("PathFamily: alphabet velocity exceeds slope_bound");
    }
    for (const auto& s : start_values) {
        if (s.size() != static_cast<std::size_t>(spec.n))
            throw ConfigError("PathFamily: start value has wrong dimension");
        if (norm(s) > start_box)
            throw ConfigError("PathFamily: start value outside start_box");
    }
    if (cap == 0) throw ConfigError("PathFamily: cap must be positive");
}

std::vector<std::vector<double>> PathFamily::effective_alphabet() const {
    std::vector<std::vector<double>> out;
    for (const auto& v : velocity_alphabet) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    const std::vector<double> zero(static_cast<std::size_t>(spec.n), 0.0);
    if (std::find(out.begin(), out.end(), zero) == out.end()) out.push_back(zero);
    return out;
}

std::vector<GridPath> enumerate_family(const PathFamily& family) {
    family.validate();
    const GridSpec& g = family.spec;
    const auto alphabet = family.effective_alphabet();
    const int intervals = g.m_past + g.m_fut;
    const std::uint64_t base = alphabet.size();

    // overflow-safe count = |starts| * base^intervals
    const std::uint64_t starts = family.start_values.size();
    std::uint64_t total = starts;
    bool over = false;
    for (int k = 0; k < intervals; ++k) {
        if (total > family.cap / base) {
            over = true;
            break;
        }
        total *= base;
    }
    if (over || total > family.cap) {
        std::ostringstream os;
        os << "enumerate_family: " << starts << " starts * " << base << "^" << intervals
           << " words exceeds cap " << family.cap;
        throw CapError(os.str());
    }

    std::vector<GridPath> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<std::size_t> word(static_cast<std::size_t>(intervals), 0);
    std::vector<double> samples(static_cast<std::size_t>(g.node_count()) * g.n);

    for (const auto& start : family.start_values) {
        std::fill(word.begin(), word.end(), 0);
        for (;;) {
            std::copy(start.begin(), start.end(), samples.begin());
            for (int k = 0; k < intervals; ++k) {
                const double dt = k < g.m_past ? g.dt_past() : g.dt_future();
                const auto& v = alphabet[word[static_cast<std::size_t>(k)]];
                const double* prev = samples.data() + static_cast<std::size_t>(k) * g.n;
                double* next = samples.data() + static_cast<std::size_t>(k + 1) * g.n;
                for (int i = 0; i < g.n; ++i) next[i] = prev[i] + v[i] * dt;
            }
            out.emplace_back(g, samples);
            // odometer, last interval fastest
            int pos = intervals - 1;
            while (pos >= 0) {
                auto& digit = word[static_cast<std::size_t>(pos)];
                if (++digit < base) break;
                digit = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    return out;
}

EnumeratedFamily EnumeratedFamily::build(const PathFamily& family) {
    return EnumeratedFamily{family, enumerate_family(family)};
}

} // namespace cihj
