#pragma once

// Scalar expression language over state variables x1..xn.
//
// Grammar (whitespace insignificant, no implicit multiplication):
//   expression := term (('+'|'-') term)*          left-associative
//   term       := unary (('*'|'/') unary)*        left-associative
//   unary      := '-' unary | power
//   power      := primary ('^' unary)?            right-associative, binds tightest
//   primary    := NUMBER | 'x'<k> | sign(e) | abs(e) | min(e,e) | max(e,e) | '(' e ')'
//
// Semantics: IEEE-754 double; sign(0) = 0; x^p with non-integer p and x < 0
// is an evaluation error (write sign(x)*abs(x)^p instead); 0^p = 0 for p > 0.

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hyfts::expr {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

struct EvalError : std::runtime_error {
    EvalError(const std::string& msg, std::string subexpr)
        : std::runtime_error(msg + " in '" + subexpr + "'"),
          subexpression(std::move(subexpr)) {}
    std::string subexpression;
};

enum class NodeKind : std::uint8_t {
    Constant, Variable, Add, Sub, Mul, Div, Pow, Neg, Sign, Abs, Min, Max
};

struct Node {
    NodeKind kind;
    double value = 0.0;  // Constant
    int var = -1;        // Variable, 0-based
    int a = -1, b = -1;  // children
};

namespace detail {

inline double sign_of(double v) {
    if (std::isnan(v)) return v;
    return static_cast<double>(v > 0.0) - static_cast<double>(v < 0.0);
}

inline constexpr int kMaxDepth = 60;

}  // namespace detail

class Expr {
public:
    static Expr parse(std::string_view src, int dimension);

    /// Checked evaluation: throws EvalError naming the offending subexpression
    /// whenever any intermediate value is non-finite.
    double eval(std::span<const double> x) const {
        return eval_checked(root_, x);
    }

    /// Unchecked evaluation for hot loops; NaN/inf propagate silently.
    double eval_unchecked(std::span<const double> x) const noexcept {
        double stack[detail::kMaxDepth + 4];
        int sp = 0;
        for (const Node& op : program_) {
            switch (op.kind) {
                case NodeKind::Constant: stack[sp++] = op.value; break;
                case NodeKind::Variable: stack[sp++] = x[static_cast<std::size_t>(op.var)]; break;
                case NodeKind::Add: --sp; stack[sp - 1] += stack[sp]; break;
                case NodeKind::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
                case NodeKind::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
                case NodeKind::Div: --sp; stack[sp - 1] /= stack[sp]; break;
                case NodeKind::Pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
                case NodeKind::Neg: stack[sp - 1] = -stack[sp - 1]; break;
                case NodeKind::Sign: stack[sp - 1] = detail::sign_of(stack[sp - 1]); break;
                case NodeKind::Abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
                case NodeKind::Min: --sp; stack[sp - 1] = std::fmin(stack[sp - 1], stack[sp]); break;
                case NodeKind::Max: --sp; stack[sp - 1] = std::fmax(stack[sp - 1], stack[sp]); break;
            }
        }
        return stack[0];
    }

    /// Central-difference gradient, component k = (e(x+h e_k) - e(x-h e_k)) / 2h.
    std::vector<double> grad_numeric(std::span<const double> x, double h = 1e-6) const {
        if (!(h > 0.0)) throw std::invalid_argument("grad_numeric: step must be positive");
        std::vector<double> xp(x.begin(), x.end());
        std::vector<double> g(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            xp[k] = x[k] + h;
            const double fp = eval_unchecked(xp);
            xp[k] = x[k] - h;
            const double fm = eval_unchecked(xp);
            xp[k] = x[k];
            g[k] = (fp - fm) / (2.0 * h);
            if (!std::isfinite(g[k])) throw EvalError("non-finite intermediate", print());
        }
        return g;
    }

    std::string print() const { return print_node(root_, 0); }

    bool structurally_equal(const Expr& other) const {
        return equal_nodes(*this, root_, other, other.root_);
    }

    int dimension() const { return dimension_; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
    std::vector<Node> program_;  // postfix copy of nodes_
    int root_ = -1;
    int dimension_ = 0;

    friend class Parser;

    double eval_checked(int id, std::span<const double> x) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        double v = 0.0;
        switch (n.kind) {
            case NodeKind::Constant: v = n.value; break;
            case NodeKind::Variable: v = x[static_cast<std::size_t>(n.var)]; break;
            case NodeKind::Add: v = eval_checked(n.a, x) + eval_checked(n.b, x); break;
            case NodeKind::Sub: v = eval_checked(n.a, x) - eval_checked(n.b, x); break;
            case NodeKind::Mul: v = eval_checked(n.a, x) * eval_checked(n.b, x); break;
            case NodeKind::Div: v = eval_checked(n.a, x) / eval_checked(n.b, x); break;
            case NodeKind::Pow: v = std::pow(eval_checked(n.a, x), eval_checked(n.b, x)); break;
            case NodeKind::Neg: v = -eval_checked(n.a, x); break;
            case NodeKind::Sign: v = detail::sign_of(eval_checked(n.a, x)); break;
            case NodeKind::Abs: v = std::fabs(eval_checked(n.a, x)); break;
            case NodeKind::Min: v = std::fmin(eval_checked(n.a, x), eval_checked(n.b, x)); break;
            case NodeKind::Max: v = std::fmax(eval_checked(n.a, x), eval_checked(n.b, x)); break;
        }
        if (!std::isfinite(v)) throw EvalError("non-finite result", print_node(id, 0));
        return v;
    }

    // precedence levels: +,- = 1; *,/ = 2; unary - = 3; ^ = 4; atoms = 5
    static int precedence(NodeKind k) {
        switch (k) {
            case NodeKind::Add: case NodeKind::Sub: return 1;
            case NodeKind::Mul: case NodeKind::Div: return 2;
            case NodeKind::Neg: return 3;
            case NodeKind::Pow: return 4;
            default: return 5;
        }
    }

    std::string print_node(int id, int) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        auto child = [&](int cid, bool parens) {
            std::string s = print_node(cid, 0);
            return parens ? "(" + s + ")" : s;
        };
        auto cprec = [&](int cid) { return precedence(nodes_[static_cast<std::size_t>(cid)].kind); };
        switch (n.kind) {
            case NodeKind::Constant: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                return std::string(buf);
            }
            case NodeKind::Variable: return "x" + std::to_string(n.var + 1);
            case NodeKind::Add: return child(n.a, cprec(n.a) < 1) + " + " + child(n.b, cprec(n.b) <= 1);
            case NodeKind::Sub: return child(n.a, cprec(n.a) < 1) + " - " + child(n.b, cprec(n.b) <= 1);
            case NodeKind::Mul: return child(n.a, cprec(n.a) < 2) + "*" + child(n.b, cprec(n.b) <= 2);
            case NodeKind::Div: return child(n.a, cprec(n.a) < 2) + "/" + child(n.b, cprec(n.b) <= 2);
            case NodeKind::Neg: return "-" + child(n.a, cprec(n.a) < 3);
            case NodeKind::Pow: return child(n.a, cprec(n.a) <= 4) + "^" + child(n.b, cprec(n.b) < 3);
            case NodeKind::Sign: return "sign(" + print_node(n.a, 0) + ")";
            case NodeKind::Abs: return "abs(" + print_node(n.a, 0) + ")";
            case NodeKind::Min: return "min(" + print_node(n.a, 0) + ", " + print_node(n.b, 0) + ")";
            case NodeKind::Max: return "max(" + print_node(n.a, 0) + ", " + print_node(n.b, 0) + ")";
        }
        return {};
    }

    static bool equal_nodes(const Expr& ea, int ia, const Expr& eb, int ib) {
        if ((ia < 0) != (ib < 0)) return false;
        if (ia < 0) return true;
        const Node& a = ea.nodes_[static_cast<std::size_t>(ia)];
        const Node& b = eb.nodes_[static_cast<std::size_t>(ib)];
        if (a.kind != b.kind) return false;
        if (a.kind == NodeKind::Constant) return a.value == b.value;
        if (a.kind == NodeKind::Variable) return a.var == b.var;
        return equal_nodes(ea, a.a, eb, b.a) && equal_nodes(ea, a.b, eb, b.b);
    }

    void compile() {
        program_.clear();
        program_.reserve(nodes_.size());
        emit(root_);
    }

    void emit(int id) {
        if (id < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        emit(n.a);
        emit(n.b);
        program_.push_back(n);
    }
};

class Parser {
public:
    Parser(std::string_view src, int dimension) : src_(src), dim_(dimension) {}

    Expr run() {
        if (dim_ < 1) throw std::invalid_argument("expression dimension must be >= 1");
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        Expr e;
        e.dimension_ = dim_;
        nodes_ = &e.nodes_;
        e.root_ = parse_expression(0);
        skip_ws();
        if (pos_ < src_.size()) throw ParseError("unexpected trailing input", pos_);
        e.compile();
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    int dim_;
    std::vector<Node>* nodes_ = nullptr;

    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                      src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    int add(Node n) {
        nodes_->push_back(n);
        return static_cast<int>(nodes_->size()) - 1;
    }

    void check_depth(int depth) {
        if (depth > detail::kMaxDepth) throw ParseError("expression too deeply nested", pos_);
    }

    int parse_expression(int depth) {
        check_depth(depth);
        int lhs = parse_term(depth + 1);
        while (true) {
            if (eat('+')) lhs = add({NodeKind::Add, 0, -1, lhs, parse_term(depth + 1)});
            else if (eat('-')) lhs = add({NodeKind::Sub, 0, -1, lhs, parse_term(depth + 1)});
            else return lhs;
        }
    }

    int parse_term(int depth) {
        check_depth(depth);
        int lhs = parse_unary(depth + 1);
        while (true) {
            if (eat('*')) lhs = add({NodeKind::Mul, 0, -1, lhs, parse_unary(depth + 1)});
            else if (eat('/')) lhs = add({NodeKind::Div, 0, -1, lhs, parse_unary(depth + 1)});
            else return lhs;
        }
    }

    int parse_unary(int depth) {
        check_depth(depth);
        if (eat('-')) return add({NodeKind::Neg, 0, -1, parse_unary(depth + 1), -1});
        return parse_power(depth + 1);
    }

    int parse_power(int depth) {
        check_depth(depth);
        int base = parse_primary(depth + 1);
        if (eat('^')) {
            int exp = parse_unary(depth + 1);  // right-associative; allows 2^-3
            return add({NodeKind::Pow, 0, -1, base, exp});
        }
        return base;
    }

    int parse_primary(int depth) {
        check_depth(depth);
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_expression(depth + 1);
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return parse_ident(depth);
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number() {
        const char* begin = src_.data() + pos_;
        const char* end = src_.data() + src_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc()) throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(ptr - begin);
        return add({NodeKind::Constant, value, -1, -1, -1});
    }

    int parse_ident(int depth) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);

        if (name.size() >= 2 && name[0] == 'x') {
            int idx = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (ec == std::errc() && ptr == name.data() + name.size()) {
                if (idx < 1 || idx > dim_)
                    throw ParseError("variable index out of range: " + std::string(name) +
                                     " (dimension " + std::to_string(dim_) + ")", start);
                return add({NodeKind::Variable, 0, idx - 1, -1, -1});
            }
        }
        auto unary_fn = [&](NodeKind k) {
            if (!eat('(')) throw ParseError("expected '(' after function name", pos_);
            int a = parse_expression(depth + 1);
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return add({k, 0, -1, a, -1});
        };
        auto binary_fn = [&](NodeKind k) {
            if (!eat('(')) throw ParseError("expected '(' after function name", pos_);
            int a = parse_expression(depth + 1);
            if (!eat(',')) throw ParseError("expected ','", pos_);
            int b = parse_expression(depth + 1);
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return add({k, 0, -1, a, b});
        };
        if (name == "sign") return unary_fn(NodeKind::Sign);
        if (name == "abs") return unary_fn(NodeKind::Abs);
        if (name == "min") return binary_fn(NodeKind::Min);
        if (name == "max") return binary_fn(NodeKind::Max);
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }
};

inline Expr Expr::parse(std::string_view src, int dimension) {
    return Parser(src, dimension).run();
}

}  // namespace hyfts::expr
