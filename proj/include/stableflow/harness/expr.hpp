#pragma once

// Arithmetic expressions for metric coefficients:
//   + - * / ^, unary minus, cosh sinh sin cos exp, numeric literals, pi and
// coordinate names. Evaluation is generic in the scalar so that the metric
// built from expressions gets exact jets.

#include <cmath>
#include <string>
#include <vector>

#include "stableflow/core.hpp"
#include "stableflow/geometry/jet.hpp"

namespace stableflow {

class Expr {
 public:
  // Throws ConfigParse with "line L, column C" (column of the offending
  // character counted from `column`).
  static Expr parse(const std::string& text, const std::vector<std::string>& variables, int line = 1,
                    int column = 1);

  bool is_constant() const { return nodes_[root_].op == Op::Const; }
  double constant() const { return nodes_[root_].value; }
  const std::string& text() const { return text_; }

  template <class S>
  S eval(const S* x) const {
    return node(root_, x);
  }
  double operator()(const std::vector<double>& x) const { return eval(x.data()); }

 private:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Sinh, Cosh, Exp };
  struct Node {
    Op op = Op::Const;
    double value = 0;
    int var = -1;
    int a = -1, b = -1;
  };
  friend class ExprParser;

  template <class S>
  S node(int i, const S* x) const {
    using std::cos, std::cosh, std::exp, std::pow, std::sin, std::sinh;
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const:
        return S(n.value);
      case Op::Var:
        return x[n.var];
      case Op::Add:
        return node(n.a, x) + node(n.b, x);
      case Op::Sub:
        return node(n.a, x) - node(n.b, x);
      case Op::Mul:
        return node(n.a, x) * node(n.b, x);
      case Op::Div:
        return node(n.a, x) / node(n.b, x);
      case Op::Neg:
        return S(0.0) - node(n.a, x);
      case Op::Sin:
        return sin(node(n.a, x));
      case Op::Cos:
        return cos(node(n.a, x));
      case Op::Sinh:
        return sinh(node(n.a, x));
      case Op::Cosh:
        return cosh(node(n.a, x));
      case Op::Exp:
        return exp(node(n.a, x));
      case Op::Pow: {
        const Node& e = nodes_[n.b];
        S base = node(n.a, x);
        if (e.op == Op::Const) {
          double p = e.value;
          if (p == std::round(p) && std::abs(p) <= 64) {
            S r(1.0);
            for (int k = 0; k < std::abs(p); ++k) r = r * base;
            return p < 0 ? S(1.0) / r : r;
          }
          return pow(base, p);
        }
        return exp(node(n.b, x) * log(base));
      }
    }
    return S(0.0);
  }

  // log only for non-constant exponents.
  static double log(double v) { return std::log(v); }
  template <class T>
  static Dual<T> log(const Dual<T>& v) {
    return stableflow::log(v);
  }

  std::string text_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace stableflow
