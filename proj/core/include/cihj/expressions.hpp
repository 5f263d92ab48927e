#pragma once

#include <memory>
#include <string>

#include "cihj/grid.hpp"

namespace cihj {

/// Small arithmetic expression over path observables, used for terminal
/// data in Bellman problem files. Atoms: number literals, t (current
/// time), x or x[i] (current value x(t)), xd or xd[i] (delayed value
/// x(t-h)), sup (running sup of ||x(xi)|| over nodes xi <= t). Operators:
/// + - * / and parentheses; x and xd without an index require n == 1.
class Expression {
public:
    /// Parses the grammar above; throws ConfigError on malformed input.
    static Expression parse(const std::string& text);

    double evaluate(int t_idx, const GridPath& path) const;

    const std::string& text() const { return text_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

} // namespace cihj
