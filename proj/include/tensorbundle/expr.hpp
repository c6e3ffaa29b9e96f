#pragma once
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "tensorbundle/errors.hpp"
#include "tensorbundle/tower.hpp"

namespace tbundle {

// Scalar expressions in chart coordinates x1..xn.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' integer)?
//   base   := number | ident | func '(' expr ')' | '(' expr ')'
//   func   := sin | cos | exp | log | sqrt
//
// Whitespace is insignificant. Exponents are integer literals (an optional
// leading '-' is accepted); general powers go through exp/log.

enum class ExprKind { Number, Var, Add, Sub, Mul, Div, Pow, Call };
enum class ExprFunc { Sin, Cos, Exp, Log, Sqrt };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind;
    double number = 0.0; // Number
    int var = -1;        // Var: zero-based coordinate index
    int ipow = 0;        // Pow exponent
    ExprFunc func = ExprFunc::Sin;
    ExprPtr a, b;

    static ExprPtr number_node(double v) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Number;
        e->number = v;
        return e;
    }
    static ExprPtr var_node(int v) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Var;
        e->var = v;
        return e;
    }
    static ExprPtr binary(ExprKind k, ExprPtr lhs, ExprPtr rhs) {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->a = std::move(lhs);
        e->b = std::move(rhs);
        return e;
    }
    static ExprPtr pow_node(ExprPtr base, int m) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Pow;
        e->a = std::move(base);
        e->ipow = m;
        return e;
    }
    static ExprPtr call(ExprFunc f, ExprPtr arg) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Call;
        e->func = f;
        e->a = std::move(arg);
        return e;
    }
};

namespace detail {

class Parser {
public:
    explicit Parser(const std::string& text) : s_(text) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        skip_ws();
        if (pos_ != s_.size()) throw SyntaxError(pos_, "unexpected trailing input");
        return e;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

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

    ExprPtr expr() {
        ExprPtr e = term();
        for (;;) {
            if (eat('+'))
                e = Expr::binary(ExprKind::Add, e, term());
            else if (eat('-'))
                e = Expr::binary(ExprKind::Sub, e, term());
            else
                return e;
        }
    }

    ExprPtr term() {
        ExprPtr e = factor();
        for (;;) {
            if (eat('*'))
                e = Expr::binary(ExprKind::Mul, e, factor());
            else if (eat('/'))
                e = Expr::binary(ExprKind::Div, e, factor());
            else
                return e;
        }
    }

    ExprPtr factor() {
        ExprPtr e = base();
        if (eat('^')) {
            skip_ws();
            std::size_t start = pos_;
            bool neg = false;
            if (pos_ < s_.size() && s_[pos_] == '-') {
                neg = true;
                ++pos_;
            }
            if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_])))
                throw SyntaxError(pos_, "expected integer exponent");
            long m = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                m = m * 10 + (s_[pos_] - '0');
                if (m > 1000000) throw SyntaxError(start, "exponent too large");
                ++pos_;
            }
            e = Expr::pow_node(e, static_cast<int>(neg ? -m : m));
        }
        return e;
    }

    ExprPtr base() {
        skip_ws();
        if (pos_ >= s_.size()) throw SyntaxError(pos_, "expected expression");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return ident();
        if (c == '(') {
            ++pos_;
            ExprPtr e = expr();
            if (!eat(')')) throw SyntaxError(pos_, "expected ')'");
            return e;
        }
        throw SyntaxError(pos_, "expected expression");
    }

    ExprPtr number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = mark; // 'e' belongs to something else; not part of the number
            }
        }
        if (pos_ == start || (pos_ == start + 1 && s_[start] == '.'))
            throw SyntaxError(start, "malformed number");
        return Expr::number_node(std::stod(s_.substr(start, pos_ - start)));
    }

    ExprPtr ident() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string name = s_.substr(start, pos_ - start);
        if (name == "sin" || name == "cos" || name == "exp" || name == "log" || name == "sqrt") {
            ExprFunc f = name == "sin"   ? ExprFunc::Sin
                         : name == "cos" ? ExprFunc::Cos
                         : name == "exp" ? ExprFunc::Exp
                         : name == "log" ? ExprFunc::Log
                                         : ExprFunc::Sqrt;
            if (!eat('(')) throw SyntaxError(pos_, "expected '(' after function name");
            ExprPtr arg = expr();
            if (!eat(')')) throw SyntaxError(pos_, "expected ')'");
            return Expr::call(f, arg);
        }
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t k = 1; k < name.size(); ++k)
                if (!std::isdigit(static_cast<unsigned char>(name[k]))) digits = false;
            if (digits && name[1] != '0' && name.size() <= 4) {
                int idx = std::stoi(name.substr(1));
                return Expr::var_node(idx - 1);
            }
        }
        throw UnknownIdentifier(start, name);
    }
};

} // namespace detail

inline ExprPtr parse(const std::string& text) { return detail::Parser(text).parse(); }

// --- evaluation -----------------------------------------------------------

template <typename T>
T eval_generic(const Expr& e, const std::vector<T>& vars) {
    switch (e.kind) {
        case ExprKind::Number: {
            if constexpr (std::is_same_v<T, double>)
                return e.number;
            else
                return T::constant(vars.empty() ? 0 : vars[0].nvars(),
                                   vars.empty() ? 0 : vars[0].order(), e.number);
        }
        case ExprKind::Var:
            if (e.var < 0 || static_cast<std::size_t>(e.var) >= vars.size())
                throw UnknownIdentifier(0, "x" + std::to_string(e.var + 1));
            return vars[static_cast<std::size_t>(e.var)];
        case ExprKind::Add: return eval_generic(*e.a, vars) + eval_generic(*e.b, vars);
        case ExprKind::Sub: return eval_generic(*e.a, vars) - eval_generic(*e.b, vars);
        case ExprKind::Mul: return eval_generic(*e.a, vars) * eval_generic(*e.b, vars);
        case ExprKind::Div: {
            T num = eval_generic(*e.a, vars);
            T den = eval_generic(*e.b, vars);
            if constexpr (std::is_same_v<T, double>) {
                if (den == 0.0) throw DomainError("division by zero");
            }
            return num / den;
        }
        case ExprKind::Pow: return pow_int(eval_generic(*e.a, vars), e.ipow);
        case ExprKind::Call: {
            T arg = eval_generic(*e.a, vars);
            if constexpr (std::is_same_v<T, double>) {
                switch (e.func) {
                    case ExprFunc::Sin: return std::sin(arg);
                    case ExprFunc::Cos: return std::cos(arg);
                    case ExprFunc::Exp: return std::exp(arg);
                    case ExprFunc::Log:
                        if (!(arg > 0.0)) throw DomainError("log of non-positive value");
                        return std::log(arg);
                    default:
                        if (arg < 0.0) throw DomainError("sqrt of negative value");
                        return std::sqrt(arg);
                }
            } else {
                switch (e.func) {
                    case ExprFunc::Sin: return sin(arg);
                    case ExprFunc::Cos: return cos(arg);
                    case ExprFunc::Exp: return exp(arg);
                    case ExprFunc::Log: return log(arg);
                    default: return sqrt(arg);
                }
            }
        }
    }
    throw Error("unreachable expression kind");
}

inline double eval(const Expr& e, const std::vector<double>& x) { return eval_generic(e, x); }

// Derivative tower of the expression at x, all partials up to `order`.
inline Tower eval_tower(const Expr& e, const std::vector<double>& x, int order) {
    if (order < 0 || order > 4) throw BadParameter("tower order must be within 0..4");
    const int n = static_cast<int>(x.size());
    std::vector<Tower> vars;
    vars.reserve(x.size());
    for (int v = 0; v < n; ++v) vars.push_back(Tower::variable(n, order, v, x[static_cast<std::size_t>(v)]));
    if (n == 0) return Tower::constant(0, order, eval_generic<double>(e, {}));
    return eval_generic(e, vars);
}

// --- printing -------------------------------------------------------------

namespace detail {

inline int precedence(ExprKind k) {
    switch (k) {
        case ExprKind::Add:
        case ExprKind::Sub: return 1;
        case ExprKind::Mul:
        case ExprKind::Div: return 2;
        case ExprKind::Pow: return 3;
        default: return 4;
    }
}

inline void print_rec(const Expr& e, std::string& out, int parent_prec, bool rhs) {
    const int prec = precedence(e.kind);
    const bool parens = prec < parent_prec || (prec == parent_prec && rhs && prec <= 2);
    if (parens) out += '(';
    switch (e.kind) {
        case ExprKind::Number: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", e.number);
            out += buf;
            break;
        }
        case ExprKind::Var:
            out += 'x';
            out += std::to_string(e.var + 1);
            break;
        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul:
        case ExprKind::Div: {
            print_rec(*e.a, out, prec, false);
            const char* op = e.kind == ExprKind::Add   ? " + "
                             : e.kind == ExprKind::Sub ? " - "
                             : e.kind == ExprKind::Mul ? "*"
                                                       : "/";
            out += op;
            print_rec(*e.b, out, prec, true);
            break;
        }
        case ExprKind::Pow:
            print_rec(*e.a, out, prec + 1, false);
            out += '^';
            out += std::to_string(e.ipow);
            break;
        case ExprKind::Call: {
            const char* name = e.func == ExprFunc::Sin   ? "sin"
                               : e.func == ExprFunc::Cos ? "cos"
                               : e.func == ExprFunc::Exp ? "exp"
                               : e.func == ExprFunc::Log ? "log"
                                                         : "sqrt";
            out += name;
            out += '(';
            print_rec(*e.a, out, 0, false);
            out += ')';
            break;
        }
    }
    if (parens) out += ')';
}

} // namespace detail

inline std::string print(const Expr& e) {
    std::string out;
    detail::print_rec(e, out, 0, false);
    return out;
}

inline bool tree_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprKind::Number: return a.number == b.number;
        case ExprKind::Var: return a.var == b.var;
        case ExprKind::Pow: return a.ipow == b.ipow && tree_equal(*a.a, *b.a);
        case ExprKind::Call: return a.func == b.func && tree_equal(*a.a, *b.a);
        default: return tree_equal(*a.a, *b.a) && tree_equal(*a.b, *b.b);
    }
}

} // namespace tbundle
