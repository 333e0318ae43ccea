#include "etacurv/expression.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace etacurv::expr {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sqrt, Exp, Log, Abs };

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  int var = 0;  // 0..n-1 for x_{i+1}, -1 for z
  std::shared_ptr<const Node> a, b;
};

namespace {

using P = std::shared_ptr<const Node>;

P leaf(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

P var(int i) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var = i;
  return n;
}

bool is_const(const P& n, double v) { return n->op == Op::Const && n->value == v; }

P make(Op op, P a, P b = nullptr) {
  // light constant folding keeps derivative trees small
  if (a && a->op == Op::Const && (!b || b->op == Op::Const)) {
    const double x = a->value, y = b ? b->value : 0.0;
    switch (op) {
      case Op::Add: return leaf(x + y);
      case Op::Sub: return leaf(x - y);
      case Op::Mul: return leaf(x * y);
      case Op::Neg: return leaf(-x);
      default: break;  // keep /, ^, sqrt, log, exp symbolic to preserve domain errors
    }
  }
  if (op == Op::Add && is_const(a, 0.0)) return b;
  if (op == Op::Add && is_const(b, 0.0)) return a;
  if (op == Op::Sub && is_const(b, 0.0)) return a;
  if (op == Op::Mul && (is_const(a, 0.0) || is_const(b, 0.0))) return leaf(0.0);
  if (op == Op::Mul && is_const(a, 1.0)) return b;
  if (op == Op::Mul && is_const(b, 1.0)) return a;
  if (op == Op::Div && is_const(a, 0.0)) return leaf(0.0);
  if (op == Op::Div && is_const(b, 1.0)) return a;
  if (op == Op::Pow && is_const(b, 1.0)) return a;

  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& src, int dim) : src_(src), dim_(dim) {}

  P parse() {
    P e = expression();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw ConfigError("expression parse error at position " + std::to_string(pos_) + ": " +
                      what + " in \"" + src_ + "\"");
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  P expression() {
    P e = term();
    while (true) {
      if (consume('+')) {
        e = make(Op::Add, e, term());
      } else if (consume('-')) {
        e = make(Op::Sub, e, term());
      } else {
        return e;
      }
    }
  }

  P term() {
    P e = factor();
    while (true) {
      if (consume('*')) {
        e = make(Op::Mul, e, factor());
      } else if (consume('/')) {
        e = make(Op::Div, e, factor());
      } else {
        return e;
      }
    }
  }

  P factor() {
    if (consume('-')) return make(Op::Neg, factor());
    P base = primary();
    if (consume('^')) return make(Op::Pow, base, factor());  // right associative
    return base;
  }

  P primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    if (consume('(')) {
      P e = expression();
      if (!consume(')')) fail("expected ')'");
      return e;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  P number() {
    size_t end = 0;
    double v = 0.0;
    try {
      v = std::stod(src_.substr(pos_), &end);
    } catch (const std::exception&) {
      fail("bad numeric literal");
    }
    pos_ += end;
    return leaf(v);
  }

  P identifier() {
    const size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name = src_.substr(start, pos_ - start);
    if (name == "pi") return leaf(M_PI);
    if (name == "z") return var(-1);
    if (name == "x" && dim_ >= 1) return var(0);
    if (name == "y" && dim_ >= 2) return var(1);
    if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (size_t i = 1; i < name.size(); ++i) {
        digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
      }
      if (digits) {
        const int idx = std::stoi(name.substr(1));
        if (idx < 1 || idx > dim_) fail("coordinate " + name + " out of range for n = " +
                                        std::to_string(dim_));
        return var(idx - 1);
      }
    }
    if (name == "sqrt" || name == "exp" || name == "log" || name == "abs" || name == "pow") {
      if (!consume('(')) fail("expected '(' after " + name);
      P a = expression();
      if (name == "pow") {
        if (!consume(',')) fail("pow expects two arguments");
        P b = expression();
        if (!consume(')')) fail("expected ')'");
        return make(Op::Pow, a, b);
      }
      if (!consume(')')) fail("expected ')'");
      if (name == "sqrt") return make(Op::Sqrt, a);
      if (name == "exp") return make(Op::Exp, a);
      if (name == "abs") return make(Op::Abs, a);
      return make(Op::Log, a);
    }
    fail("unknown identifier '" + name + "'");
  }

  const std::string& src_;
  int dim_;
  size_t pos_ = 0;
};

double eval_node(const Node& n, const Vec& x, double z) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return n.var < 0 ? z : x(n.var);
    case Op::Add: return eval_node(*n.a, x, z) + eval_node(*n.b, x, z);
    case Op::Sub: return eval_node(*n.a, x, z) - eval_node(*n.b, x, z);
    case Op::Mul: return eval_node(*n.a, x, z) * eval_node(*n.b, x, z);
    case Op::Div: return eval_node(*n.a, x, z) / eval_node(*n.b, x, z);
    case Op::Pow: return std::pow(eval_node(*n.a, x, z), eval_node(*n.b, x, z));
    case Op::Neg: return -eval_node(*n.a, x, z);
    case Op::Sqrt: return std::sqrt(eval_node(*n.a, x, z));
    case Op::Exp: return std::exp(eval_node(*n.a, x, z));
    case Op::Log: return std::log(eval_node(*n.a, x, z));
    case Op::Abs: return std::abs(eval_node(*n.a, x, z));
  }
  return 0.0;
}

// d/dv where v is the variable id (-1 for z, else coordinate index)
P diff_node(const P& n, int v) {
  switch (n->op) {
    case Op::Const: return leaf(0.0);
    case Op::Var: return leaf(n->var == v ? 1.0 : 0.0);
    case Op::Add: return make(Op::Add, diff_node(n->a, v), diff_node(n->b, v));
    case Op::Sub: return make(Op::Sub, diff_node(n->a, v), diff_node(n->b, v));
    case Op::Mul:
      return make(Op::Add, make(Op::Mul, diff_node(n->a, v), n->b),
                  make(Op::Mul, n->a, diff_node(n->b, v)));
    case Op::Div:
      // (a/b)' = a'/b - a b'/b^2
      return make(Op::Sub, make(Op::Div, diff_node(n->a, v), n->b),
                  make(Op::Div, make(Op::Mul, n->a, diff_node(n->b, v)),
                       make(Op::Mul, n->b, n->b)));
    case Op::Pow: {
      if (n->b->op == Op::Const) {
        const double e = n->b->value;
        return make(Op::Mul, leaf(e),
                    make(Op::Mul, make(Op::Pow, n->a, leaf(e - 1.0)), diff_node(n->a, v)));
      }
      // a^b = exp(b log a)
      P self = make(Op::Pow, n->a, n->b);
      P inner = make(Op::Add, make(Op::Mul, diff_node(n->b, v), make(Op::Log, n->a)),
                     make(Op::Div, make(Op::Mul, n->b, diff_node(n->a, v)), n->a));
      return make(Op::Mul, self, inner);
    }
    case Op::Neg: return make(Op::Neg, diff_node(n->a, v));
    case Op::Sqrt:
      return make(Op::Div, diff_node(n->a, v),
                  make(Op::Mul, leaf(2.0), make(Op::Sqrt, n->a)));
    case Op::Exp: return make(Op::Mul, make(Op::Exp, n->a), diff_node(n->a, v));
    case Op::Log: return make(Op::Div, diff_node(n->a, v), n->a);
    case Op::Abs:
      // |a|' = a/|a| a'; fine away from zeros of a
      return make(Op::Mul, make(Op::Div, n->a, make(Op::Abs, n->a)), diff_node(n->a, v));
  }
  return leaf(0.0);
}

bool uses_var(const Node& n, int v) {
  if (n.op == Op::Var) return n.var == v;
  if (n.a && uses_var(*n.a, v)) return true;
  if (n.b && uses_var(*n.b, v)) return true;
  return false;
}

void print_node(const Node& n, std::ostream& os) {
  switch (n.op) {
    case Op::Const: os << n.value; return;
    case Op::Var:
      if (n.var < 0) {
        os << "z";
      } else {
        os << "x" << (n.var + 1);
      }
      return;
    case Op::Neg:
      os << "(-";
      print_node(*n.a, os);
      os << ")";
      return;
    case Op::Sqrt:
    case Op::Exp:
    case Op::Log:
    case Op::Abs: {
      const char* f = n.op == Op::Sqrt ? "sqrt" : n.op == Op::Exp ? "exp"
                      : n.op == Op::Log ? "log" : "abs";
      os << f << "(";
      print_node(*n.a, os);
      os << ")";
      return;
    }
    default: {
      const char* o = n.op == Op::Add ? "+" : n.op == Op::Sub ? "-"
                      : n.op == Op::Mul ? "*" : n.op == Op::Div ? "/" : "^";
      os << "(";
      print_node(*n.a, os);
      os << " " << o << " ";
      print_node(*n.b, os);
      os << ")";
      return;
    }
  }
}

}  // namespace

struct ExpressionAccess {
  static Expression wrap(P root, int dim) {
    Expression e;
    e.root_ = std::move(root);
    e.dim_ = dim;
    return e;
  }
};

Expression Expression::parse(const std::string& src, int dim) {
  Parser p(src, dim);
  return ExpressionAccess::wrap(p.parse(), dim);
}

Expression Expression::constant(double value) { return ExpressionAccess::wrap(leaf(value), 0); }

double Expression::eval(const Vec& x, double z) const {
  if (!root_) throw ConfigError("evaluating empty expression");
  return eval_node(*root_, x, z);
}

Expression Expression::diff_z() const {
  if (!root_) throw ConfigError("differentiating empty expression");
  return ExpressionAccess::wrap(diff_node(root_, -1), dim_);
}

Expression Expression::diff_x(int i) const {
  if (!root_) throw ConfigError("differentiating empty expression");
  return ExpressionAccess::wrap(diff_node(root_, i), dim_);
}

bool Expression::depends_on_z() const { return root_ && uses_var(*root_, -1); }

std::string Expression::str() const {
  if (!root_) return "";
  std::ostringstream os;
  print_node(*root_, os);
  return os.str();
}

Vec Expression::gradient(const Vec& x, double z) const {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) g(i) = diff_x(i).eval(x, z);
  return g;
}

Mat Expression::hessian(const Vec& x, double z) const {
  const int n = static_cast<int>(x.size());
  Mat h(n, n);
  for (int i = 0; i < n; ++i) {
    Expression di = diff_x(i);
    for (int j = i; j < n; ++j) h(i, j) = h(j, i) = di.diff_x(j).eval(x, z);
  }
  return h;
}

}  // namespace etacurv::expr
