#pragma once

#include <memory>
#include <string>

#include "etacurv/types.hpp"

// Small closed-form expression language for psi(x, z), phi(x) and reference
// solutions: +, -, *, /, ^ (and pow(a,b)), sqrt, exp, log, abs, numeric
// literals, pi, the coordinates x1..xn (x, y as aliases for x1, x2) and the
// solution variable z. Expressions are immutable trees supporting exact
// symbolic differentiation in z and in each x_i.
namespace etacurv::expr {

struct Node;

class Expression {
 public:
  Expression() = default;

  /// Parses `src` against a fixed spatial dimension. Throws ConfigError on
  /// syntax errors or variables out of range.
  static Expression parse(const std::string& src, int dim);

  /// Constant expression.
  static Expression constant(double value);

  double eval(const Vec& x, double z = 0.0) const;
  Expression diff_z() const;
  Expression diff_x(int i) const;  // 0-based coordinate
  bool depends_on_z() const;
  int dim() const { return dim_; }
  std::string str() const;

  /// Gradient in x at (x, z), assembled from diff_x.
  Vec gradient(const Vec& x, double z = 0.0) const;
  /// Hessian in x at (x, z).
  Mat hessian(const Vec& x, double z = 0.0) const;

 private:
  friend struct ExpressionAccess;
  std::shared_ptr<const Node> root_;
  int dim_ = 0;
};

}  // namespace etacurv::expr
