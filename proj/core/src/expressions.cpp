#include "cihj/expressions.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace cihj {

struct Expression::Node {
    enum class Op { constant, time, current, delayed, runsup, neg, add, sub, mul, divide };
    Op op;
    double value = 0.0; // constant
    int index = 0;      // coordinate for current/delayed
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr run() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing input");
        return e;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& why) {
        throw ConfigError("expression parse error at offset " + std::to_string(pos_) + ": " + why +
                          " in \"" + s_ + "\"");
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (eat('+')) {
                lhs = make({Node::Op::add, 0.0, 0, lhs, term()});
            } else if (eat('-')) {
                lhs = make({Node::Op::sub, 0.0, 0, lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (eat('*')) {
                lhs = make({Node::Op::mul, 0.0, 0, lhs, factor()});
            } else if (eat('/')) {
                lhs = make({Node::Op::divide, 0.0, 0, lhs, factor()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr factor() {
        if (eat('-')) return make({Node::Op::neg, 0.0, 0, factor(), nullptr});
        return primary();
    }

    NodePtr primary() {
        skip_ws();
        if (eat('(')) {
            NodePtr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("expected a number, identifier or '('");
    }

    NodePtr number() {
        skip_ws();
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ += static_cast<std::size_t>(end - begin);
        return make({Node::Op::constant, v, 0, nullptr, nullptr});
    }

    NodePtr identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        const std::string name = s_.substr(start, pos_ - start);
        if (name == "t") return make({Node::Op::time, 0.0, 0, nullptr, nullptr});
        if (name == "sup") return make({Node::Op::runsup, 0.0, 0, nullptr, nullptr});
        if (name == "x" || name == "xd") {
            int index = 0;
            if (eat('[')) {
                skip_ws();
                std::size_t istart = pos_;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
                if (istart == pos_) fail("expected coordinate index");
                index = std::stoi(s_.substr(istart, pos_ - istart));
                if (!eat(']')) fail("expected ']'");
            } else {
                index = -1; // scalar shorthand, requires n == 1
            }
            return make({name == "x" ? Node::Op::current : Node::Op::delayed, 0.0, index, nullptr,
                         nullptr});
        }
        fail("unknown identifier '" + name + "'");
    }
};

double eval_node(const Node& n, int t_idx, const GridPath& path) {
    const GridSpec& g = path.spec();
    switch (n.op) {
        case Node::Op::constant: return n.value;
        case Node::Op::time: return g.time_at(t_idx);
        case Node::Op::current: {
            const int i = n.index < 0 ? 0 : n.index;
            if (n.index < 0 && g.n != 1)
                throw ConfigError("expression: bare 'x' requires n == 1, use x[i]");
            if (i >= g.n) throw ConfigError("expression: coordinate index out of range");
            return path.at(t_idx)[static_cast<std::size_t>(i)];
        }
        case Node::Op::delayed: {
            const int i = n.index < 0 ? 0 : n.index;
            if (n.index < 0 && g.n != 1)
                throw ConfigError("expression: bare 'xd' requires n == 1, use xd[i]");
            if (i >= g.n) throw ConfigError("expression: coordinate index out of range");
            std::vector<double> buf(static_cast<std::size_t>(g.n));
            path.value_at_time(g.time_at(t_idx) - g.h, buf);
            return buf[static_cast<std::size_t>(i)];
        }
        case Node::Op::runsup: {
            double best = 0.0;
            for (int j = 0; j <= t_idx; ++j) best = std::max(best, norm(path.at(j)));
            return best;
        }
        case Node::Op::neg: return -eval_node(*n.lhs, t_idx, path);
        case Node::Op::add: return eval_node(*n.lhs, t_idx, path) + eval_node(*n.rhs, t_idx, path);
        case Node::Op::sub: return eval_node(*n.lhs, t_idx, path) - eval_node(*n.rhs, t_idx, path);
        case Node::Op::mul: return eval_node(*n.lhs, t_idx, path) * eval_node(*n.rhs, t_idx, path);
        case Node::Op::divide:
            return eval_node(*n.lhs, t_idx, path) / eval_node(*n.rhs, t_idx, path);
    }
    throw InternalError("expression: unreachable op");
}

} // namespace

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.root_ = Parser(text).run();
    e.text_ = text;
    return e;
}

double Expression::evaluate(int t_idx, const GridPath& path) const {
    if (!root_) throw ConfigError("expression: empty");
    return eval_node(*root_, t_idx, path);
}

} // namespace cihj
