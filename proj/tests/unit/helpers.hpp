#pragma once

#include <initializer_list>
#include <vector>

#include "cihj/family.hpp"
#include "cihj/grid.hpp"

namespace cihj::test {

inline GridSpec spec1(double h, double T, int m_past, int m_fut) {
    GridSpec g;
    g.h = h;
    g.T = T;
    g.n = 1;
    g.m_past = m_past;
    g.m_fut = m_fut;
    g.validate();
    return g;
}

inline GridPath path1(const GridSpec& g, std::initializer_list<double> samples) {
    return GridPath(g, std::vector<double>(samples));
}

inline GridPath constant_path(const GridSpec& g, double value) {
    return GridPath(g,
                    std::vector<double>(static_cast<std::size_t>(g.node_count()) * g.n, value));
}

/// n=1 family with the given scalar alphabet, start values {0}.
inline PathFamily family1(const GridSpec& g, std::initializer_list<double> alphabet,
                          double slope_bound) {
    PathFamily fam;
    fam.spec = g;
    fam.slope_bound = slope_bound;
    fam.start_box = 0.0;
    for (double v : alphabet) fam.velocity_alphabet.push_back({v});
    fam.start_values.push_back({0.0});
    return fam;
}

} // namespace cihj::test
