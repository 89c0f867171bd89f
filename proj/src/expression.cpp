#include "isojet/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "isojet/complex_generic.hpp"
#include "isojet/scalar.hpp"

namespace isojet {

namespace {

using C = std::complex<double>;

bool real_valued(const ExprNode& n) {
    switch (n.op) {
        case ExprOp::constant: return n.value.imag() == 0.0;
        case ExprOp::variable:
        case ExprOp::log:
        case ExprOp::sqrt:
        case ExprOp::sin:
        case ExprOp::cos:
        case ExprOp::pow_real:
        case ExprOp::re:
        case ExprOp::im:
        case ExprOp::abs2: return true;
        case ExprOp::add:
        case ExprOp::sub:
        case ExprOp::mul:
        case ExprOp::div: return n.a->real && n.b->real;
        default: return n.a->real;
    }
}

ExprPtr finish(std::shared_ptr<ExprNode> n) {
    n->real = real_valued(*n);
    return n;
}

ExprPtr node(ExprOp op, ExprPtr a = nullptr, ExprPtr b = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return finish(std::move(n));
}

ExprPtr constant(C v) {
    auto n = std::make_shared<ExprNode>();
    n->value = v;
    return finish(std::move(n));
}

ExprPtr variable(int k) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::variable;
    n->var = k;
    return n;
}

bool is_const(const ExprPtr& e) { return e->op == ExprOp::constant; }
bool is_const(const ExprPtr& e, double v) { return is_const(e) && e->value == C(v, 0.0); }

// ---------------------------------------------------------- simplifying builders

ExprPtr add(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    if (is_const(a) && is_const(b)) return constant(a->value + b->value);
    return node(ExprOp::add, std::move(a), std::move(b));
}

ExprPtr neg(ExprPtr a) {
    if (is_const(a)) return constant(-a->value);
    if (a->op == ExprOp::neg) return a->a;
    return node(ExprOp::neg, std::move(a));
}

ExprPtr sub(ExprPtr a, ExprPtr b) {
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(std::move(b));
    if (is_const(a) && is_const(b)) return constant(a->value - b->value);
    return node(ExprOp::sub, std::move(a), std::move(b));
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b)) return constant(a->value * b->value);
    return node(ExprOp::mul, std::move(a), std::move(b));
}

ExprPtr div(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0.0)) return constant(0.0);
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b)) return constant(a->value / b->value);
    return node(ExprOp::div, std::move(a), std::move(b));
}

ExprPtr unary(ExprOp op, ExprPtr a) {
    if (is_const(a)) {
        const C v = a->value;
        switch (op) {
            case ExprOp::exp: return constant(std::exp(v));
            case ExprOp::log: return constant(std::log(v.real()));
            case ExprOp::sqrt: return constant(std::sqrt(v.real()));
            case ExprOp::sin: return constant(std::sin(v.real()));
            case ExprOp::cos: return constant(std::cos(v.real()));
            case ExprOp::re: return constant(v.real());
            case ExprOp::im: return constant(v.imag());
            case ExprOp::conj: return constant(std::conj(v));
            case ExprOp::abs2: return constant(std::norm(v));
            default: break;
        }
    }
    return node(op, std::move(a));
}

ExprPtr power(ExprPtr a, double p) {
    if (p == 0.0) return constant(1.0);
    if (p == 1.0) return a;
    const bool integer = std::floor(p) == p && std::abs(p) < 1e6;
    if (is_const(a)) return constant(integer ? std::pow(a->value, static_cast<int>(p)) : C(std::pow(a->value.real(), p)));
    // |f|^(2k) = (|f|^2)^k, which stays smooth where f vanishes
    if (integer && a->op == ExprOp::sqrt && static_cast<long>(p) % 2 == 0) return power(a->a, p / 2);
    auto n = std::make_shared<ExprNode>();
    n->op = integer ? ExprOp::pow_int : ExprOp::pow_real;
    n->power = p;
    n->a = std::move(a);
    return finish(std::move(n));
}

// ------------------------------------------------------------- differentiation

ExprPtr diff(const ExprPtr& e, int k) {
    const ExprPtr& a = e->a;
    const ExprPtr& b = e->b;
    switch (e->op) {
        case ExprOp::constant: return constant(0.0);
        case ExprOp::variable: return constant(e->var == k ? 1.0 : 0.0);
        case ExprOp::add: return add(diff(a, k), diff(b, k));
        case ExprOp::sub: return sub(diff(a, k), diff(b, k));
        case ExprOp::neg: return neg(diff(a, k));
        case ExprOp::mul: return add(mul(diff(a, k), b), mul(a, diff(b, k)));
        case ExprOp::div: return div(sub(mul(diff(a, k), b), mul(a, diff(b, k))), power(b, 2));
        case ExprOp::pow_int:
        case ExprOp::pow_real: return mul(mul(constant(e->power), power(a, e->power - 1)), diff(a, k));
        case ExprOp::exp: return mul(e, diff(a, k));
        case ExprOp::log: return div(diff(a, k), a);
        case ExprOp::sqrt: return div(diff(a, k), mul(constant(2.0), e));
        case ExprOp::sin: return mul(unary(ExprOp::cos, a), diff(a, k));
        case ExprOp::cos: return neg(mul(unary(ExprOp::sin, a), diff(a, k)));
        case ExprOp::re: return unary(ExprOp::re, diff(a, k));
        case ExprOp::im: return unary(ExprOp::im, diff(a, k));
        case ExprOp::conj: return unary(ExprOp::conj, diff(a, k));
        case ExprOp::abs2: return mul(constant(2.0), unary(ExprOp::re, mul(unary(ExprOp::conj, a), diff(a, k))));
    }
    throw PreconditionError("expression: unknown node");
}

// ------------------------------------------------------------------ evaluation

template <class S>
Cplx<S> lift(const S& like, C v) {
    return {constant_like(like, v.real()), constant_like(like, v.imag())};
}

inline double exp_s(double x) { return std::exp(x); }
inline Jet exp_s(const Jet& x) { return exp(x); }
inline double log_s(double x) { return std::log(x); }
inline Jet log_s(const Jet& x) { return log(x); }
inline double sqrt_s(double x) { return std::sqrt(x); }
inline Jet sqrt_s(const Jet& x) { return sqrt(x); }
inline double sin_s(double x) { return std::sin(x); }
inline Jet sin_s(const Jet& x) { return sin(x); }
inline double cos_s(double x) { return std::cos(x); }
inline Jet cos_s(const Jet& x) { return cos(x); }
inline double pow_s(double x, double p) { return std::pow(x, p); }
inline Jet pow_s(const Jet& x, double p) { return pow(x, p); }

template <class S>
Cplx<S> real_value(const S& x) {
    return {x, x * 0.0};
}

template <class S>
Cplx<S> int_power(Cplx<S> base, long n, const S& like) {
    if (n < 0) return lift(like, C(1.0)) / int_power(base, -n, like);
    Cplx<S> out = lift(like, C(1.0));
    while (n > 0) {
        if (n & 1) out = out * base;
        n >>= 1;
        if (n > 0) base = base * base;
    }
    return out;
}

template <class S>
Cplx<S> eval_node(const ExprNode& e, std::span<const S> vars);

// Nodes known to be real skip the complex arithmetic.
template <class S>
S eval_real(const ExprNode& e, std::span<const S> vars) {
    const S& like = vars[0];
    auto arg = [&]() { return e.a->real ? eval_real(*e.a, vars) : eval_node(*e.a, vars).re; };
    switch (e.op) {
        case ExprOp::constant: return constant_like(like, e.value.real());
        case ExprOp::variable: return vars[static_cast<std::size_t>(e.var)];
        case ExprOp::add: return eval_real(*e.a, vars) + eval_real(*e.b, vars);
        case ExprOp::sub: return eval_real(*e.a, vars) - eval_real(*e.b, vars);
        case ExprOp::neg: return -eval_real(*e.a, vars);
        case ExprOp::mul: return eval_real(*e.a, vars) * eval_real(*e.b, vars);
        case ExprOp::div: return eval_real(*e.a, vars) / eval_real(*e.b, vars);
        case ExprOp::pow_int: {
            long n = static_cast<long>(e.power);
            S base = eval_real(*e.a, vars);
            if (n < 0) {
                base = constant_like(like, 1.0) / base;
                n = -n;
            }
            S out = constant_like(like, 1.0);
            while (n > 0) {
                if (n & 1) out = out * base;
                n >>= 1;
                if (n > 0) base = base * base;
            }
            return out;
        }
        case ExprOp::pow_real: return pow_s(arg(), e.power);
        case ExprOp::exp: return exp_s(eval_real(*e.a, vars));
        case ExprOp::log: return log_s(arg());
        case ExprOp::sqrt: return sqrt_s(arg());
        case ExprOp::sin: return sin_s(arg());
        case ExprOp::cos: return cos_s(arg());
        case ExprOp::re: return arg();
        case ExprOp::im: return e.a->real ? constant_like(like, 0.0) : eval_node(*e.a, vars).im;
        case ExprOp::conj: return eval_real(*e.a, vars);
        case ExprOp::abs2: {
            if (e.a->real) {
                const S v = eval_real(*e.a, vars);
                return v * v;
            }
            return abs2(eval_node(*e.a, vars));
        }
    }
    throw PreconditionError("expression: unknown node");
}

template <class S>
Cplx<S> eval_node(const ExprNode& e, std::span<const S> vars) {
    const S& like = vars[0];
    if (e.real) return {eval_real(e, vars), constant_like(like, 0.0)};
    auto arg = [&]() { return eval_node(*e.a, vars); };
    switch (e.op) {
        case ExprOp::constant: return lift(like, e.value);
        case ExprOp::variable: return real_value(vars[static_cast<std::size_t>(e.var)]);
        case ExprOp::add: return arg() + eval_node(*e.b, vars);
        case ExprOp::sub: return arg() - eval_node(*e.b, vars);
        case ExprOp::neg: return -arg();
        case ExprOp::mul: return arg() * eval_node(*e.b, vars);
        case ExprOp::div: return arg() / eval_node(*e.b, vars);
        case ExprOp::pow_int: return int_power(arg(), static_cast<long>(e.power), like);
        case ExprOp::pow_real: return real_value(pow_s(arg().re, e.power));
        case ExprOp::exp: {
            const Cplx<S> v = arg();
            const S m = exp_s(v.re);
            return {m * cos_s(v.im), m * sin_s(v.im)};
        }
        case ExprOp::log: return real_value(log_s(arg().re));
        case ExprOp::sqrt: return real_value(sqrt_s(arg().re));
        case ExprOp::sin: return real_value(sin_s(arg().re));
        case ExprOp::cos: return real_value(cos_s(arg().re));
        case ExprOp::re: return real_value(arg().re);
        case ExprOp::im: return real_value(arg().im);
        case ExprOp::conj: return conj(arg());
        case ExprOp::abs2: return real_value(abs2(arg()));
    }
    throw PreconditionError("expression: unknown node");
}

// ---------------------------------------------------------------------- parser

struct Token {
    enum Kind { number, ident, symbol, end } kind;
    std::string text;
    double number_value = 0.0;
    std::size_t pos = 0;
};

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s.substr(i), &used);
            } catch (const std::exception&) {
                throw ParseError("expression: bad number at position " + std::to_string(i));
            }
            out.push_back({Token::number, s.substr(i, used), v, i});
            i += used;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = i;
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
            out.push_back({Token::ident, s.substr(start, i - start), 0.0, start});
        } else if (std::string("+-*/^()|,").find(c) != std::string::npos) {
            out.push_back({Token::symbol, std::string(1, c), 0.0, i});
            ++i;
        } else {
            throw ParseError("expression: unexpected character '" + std::string(1, c) + "' at position " + std::to_string(i));
        }
    }
    out.push_back({Token::end, "", 0.0, s.size()});
    return out;
}

class Parser {
public:
    Parser(const std::string& text, int dim) : toks_(tokenize(text)), dim_(dim) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (peek().kind != Token::end) fail("unexpected '" + peek().text + "'");
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    bool accept(const char* sym) {
        if (peek().kind == Token::symbol && peek().text == sym) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(const char* sym) {
        if (!accept(sym)) fail(std::string("expected '") + sym + "'");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("expression: " + what + " at position " + std::to_string(peek().pos));
    }

    ExprPtr expr() {
        ExprPtr e = term();
        for (;;) {
            if (accept("+")) {
                e = add(e, term());
            } else if (accept("-")) {
                e = sub(e, term());
            } else {
                return e;
            }
        }
    }

    ExprPtr term() {
        ExprPtr e = signed_factor();
        for (;;) {
            if (accept("*")) {
                e = mul(e, signed_factor());
            } else if (accept("/")) {
                e = div(e, signed_factor());
            } else {
                return e;
            }
        }
    }

    ExprPtr signed_factor() {
        if (accept("-")) return neg(signed_factor());
        if (accept("+")) return signed_factor();
        return power_expr();
    }

    ExprPtr power_expr() {
        ExprPtr base = primary();
        if (!accept("^")) return base;
        const std::size_t at = peek().pos;
        ExprPtr exponent = signed_factor();
        if (!is_const(exponent) || exponent->value.imag() != 0.0) {
            throw ParseError("expression: exponent must be a real constant at position " + std::to_string(at));
        }
        return power(base, exponent->value.real());
    }

    ExprPtr z_var(int k) const {
        return add(variable(2 * k), mul(constant(C(0.0, 1.0)), variable(2 * k + 1)));
    }

    // index of a numbered variable like "z2", or -1
    int numbered(const std::string& name, char prefix) const {
        if (name.size() < 2 || name[0] != prefix) return -1;
        for (std::size_t i = 1; i < name.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
        }
        const int k = std::stoi(name.substr(1)) - 1;
        if (k < 0 || k >= dim_) fail("variable '" + name + "' out of range for dimension " + std::to_string(dim_));
        return k;
    }

    ExprPtr primary() {
        const Token tok = peek();
        if (tok.kind == Token::number) {
            ++pos_;
            return constant(tok.number_value);
        }
        if (accept("(")) {
            ExprPtr e = expr();
            expect(")");
            return e;
        }
        if (accept("|")) {
            // |z| is the norm of the whole coordinate vector
            if (peek().kind == Token::ident && peek().text == "z" && toks_[pos_ + 1].text == "|") {
                pos_ += 2;
                ExprPtr sum = constant(0.0);
                for (int k = 0; k < dim_; ++k) sum = add(sum, unary(ExprOp::abs2, z_var(k)));
                return unary(ExprOp::sqrt, sum);
            }
            ExprPtr e = expr();
            expect("|");
            return unary(ExprOp::sqrt, unary(ExprOp::abs2, e));
        }
        if (tok.kind != Token::ident) fail(tok.kind == Token::end ? "unexpected end of input" : "unexpected '" + tok.text + "'");
        ++pos_;
        const std::string& name = tok.text;
        static const std::vector<std::pair<std::string, ExprOp>> functions = {
            {"Re", ExprOp::re},   {"Im", ExprOp::im},     {"conj", ExprOp::conj}, {"exp", ExprOp::exp},
            {"log", ExprOp::log}, {"sqrt", ExprOp::sqrt}, {"sin", ExprOp::sin},   {"cos", ExprOp::cos}};
        for (const auto& [fname, op] : functions) {
            if (name == fname) {
                expect("(");
                ExprPtr e = expr();
                expect(")");
                return unary(op, e);
            }
        }
        if (name == "pi") return constant(std::numbers::pi);
        if (name == "i") return constant(C(0.0, 1.0));
        if (name == "t") return variable(2 * dim_);
        if (dim_ == 1 && name == "z") return z_var(0);
        if (dim_ == 1 && name == "x") return variable(0);
        if (dim_ == 1 && name == "y") return variable(1);
        if (int k = numbered(name, 'z'); k >= 0) return z_var(k);
        if (int k = numbered(name, 'x'); k >= 0) return variable(2 * k);
        if (int k = numbered(name, 'y'); k >= 0) return variable(2 * k + 1);
        pos_--;
        fail("unknown name '" + name + "'");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int dim_;
};

void print(std::ostream& out, const ExprNode& e, int dim) {
    auto bin = [&](const char* op) {
        out << '(';
        print(out, *e.a, dim);
        out << ' ' << op << ' ';
        print(out, *e.b, dim);
        out << ')';
    };
    auto fn = [&](const char* name) {
        out << name << '(';
        print(out, *e.a, dim);
        out << ')';
    };
    switch (e.op) {
        case ExprOp::constant:
            if (e.value.imag() == 0.0) {
                out << e.value.real();
            } else {
                out << '(' << e.value.real() << " + " << e.value.imag() << "*i)";
            }
            return;
        case ExprOp::variable:
            if (e.var == 2 * dim) {
                out << 't';
            } else {
                out << (e.var % 2 == 0 ? 'x' : 'y') << e.var / 2 + 1;
            }
            return;
        case ExprOp::add: return bin("+");
        case ExprOp::sub: return bin("-");
        case ExprOp::mul: return bin("*");
        case ExprOp::div: return bin("/");
        case ExprOp::neg: return fn("-");
        case ExprOp::pow_int:
        case ExprOp::pow_real:
            out << '(';
            print(out, *e.a, dim);
            out << ")^" << e.power;
            return;
        case ExprOp::exp: return fn("exp");
        case ExprOp::log: return fn("log");
        case ExprOp::sqrt: return fn("sqrt");
        case ExprOp::sin: return fn("sin");
        case ExprOp::cos: return fn("cos");
        case ExprOp::re: return fn("Re");
        case ExprOp::im: return fn("Im");
        case ExprOp::conj: return fn("conj");
        case ExprOp::abs2:
            out << '|';
            print(out, *e.a, dim);
            out << "|^2";
            return;
    }
}

ExprPtr substitute_node(const ExprPtr& e, const std::vector<ExprPtr>& repl) {
    if (e->op == ExprOp::variable) {
        return e->var < static_cast<int>(repl.size()) ? repl[static_cast<std::size_t>(e->var)] : e;
    }
    if (e->op == ExprOp::constant) return e;
    auto n = std::make_shared<ExprNode>(*e);
    if (n->a) n->a = substitute_node(n->a, repl);
    if (n->b) n->b = substitute_node(n->b, repl);
    return finish(std::move(n));
}

}  // namespace

Expression Expression::parse(const std::string& text, int complex_dim) {
    if (complex_dim < 1) throw PreconditionError("expression: complex dimension must be positive");
    return Expression(Parser(text, complex_dim).parse(), complex_dim, text);
}

double Expression::operator()(std::span<const double> vars) const {
    if (static_cast<int>(vars.size()) != variable_count()) throw DimensionError("expression: wrong variable count");
    const Cplx<double> v = eval_node(*root_, vars);
    if (std::abs(v.im) > 1e-10 * (1.0 + std::abs(v.re))) {
        throw PreconditionError("expression '" + text_ + "' is not real-valued");
    }
    return v.re;
}

template <class S>
S Expression::evaluate(std::span<const S> vars) const {
    if (static_cast<int>(vars.size()) != variable_count()) throw DimensionError("expression: wrong variable count");
    return eval_node(*root_, vars).re;
}

template double Expression::evaluate<double>(std::span<const double>) const;
template Jet Expression::evaluate<Jet>(std::span<const Jet>) const;

Expression Expression::derivative(int var) const {
    if (var < 0 || var >= variable_count()) throw DimensionError("expression: derivative variable out of range");
    return Expression(diff(root_, var), dim_, "d/d" + std::to_string(var) + "(" + text_ + ")");
}

Expression Expression::substitute(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) const {
    const int n = 2 * dim_;
    if (a.rows() != n || a.cols() != n || b.size() != n) throw DimensionError("expression: substitution has wrong shape");
    std::vector<ExprPtr> repl;
    for (int k = 0; k < n; ++k) {
        ExprPtr r = constant(b(k));
        for (int j = 0; j < n; ++j) r = add(r, mul(constant(a(k, j)), variable(j)));
        repl.push_back(r);
    }
    return Expression(substitute_node(root_, repl), dim_, text_ + " (substituted)");
}

bool Expression::is_zero() const { return root_ && is_const(root_, 0.0); }

std::string Expression::to_string() const {
    std::ostringstream out;
    out.precision(17);
    print(out, *root_, dim_);
    return out.str();
}

}  // namespace isojet
