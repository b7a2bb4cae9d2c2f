#include "stableflow/harness/expr.hpp"

#include <cctype>
#include <charconv>
#include <numbers>

namespace stableflow {

class ExprParser {
 public:
  ExprParser(const std::string& text, const std::vector<std::string>& vars, int line, int column)
      : src_(normalize(text)), vars_(vars), line_(line), column_(column) {}

  Expr run() {
    Expr e;
    e.text_ = src_;
    out_ = &e;
    skip();
    if (pos_ == src_.size()) fail("empty expression");
    e.root_ = sum();
    skip();
    if (pos_ != src_.size()) fail(std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  using Op = Expr::Op;

  // U+2212 MINUS SIGN is accepted as '-'.
  static std::string normalize(const std::string& s) {
    std::string r;
    for (size_t i = 0; i < s.size(); ++i) {
      if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 && static_cast<unsigned char>(s[i + 1]) == 0x88 &&
          static_cast<unsigned char>(s[i + 2]) == 0x92) {
        r += '-';
        i += 2;
      } else {
        r += s[i];
      }
    }
    return r;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ConfigParse, "line " + std::to_string(line_) + ", column " +
                                            std::to_string(column_ + static_cast<int>(pos_)) + ": " + msg);
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add(Expr::Node n) {
    // Fold subtrees without variables.
    auto& nodes = out_->nodes_;
    bool foldable = n.op != Op::Const && n.op != Op::Var && nodes[n.a].op == Op::Const &&
                    (n.b < 0 || nodes[n.b].op == Op::Const);
    nodes.push_back(n);
    int id = static_cast<int>(nodes.size()) - 1;
    if (foldable) {
      int saved = out_->root_;
      out_->root_ = id;
      double folded = out_->eval<double>(nullptr);
      out_->root_ = saved;
      nodes[id] = Expr::Node{Op::Const, folded, -1, -1, -1};
    }
    return id;
  }

  int sum() {
    int lhs = product();
    for (;;) {
      if (eat('+'))
        lhs = add({Op::Add, 0, -1, lhs, product()});
      else if (eat('-'))
        lhs = add({Op::Sub, 0, -1, lhs, product()});
      else
        return lhs;
    }
  }

  int product() {
    int lhs = unary();
    for (;;) {
      if (eat('*'))
        lhs = add({Op::Mul, 0, -1, lhs, unary()});
      else if (eat('/'))
        lhs = add({Op::Div, 0, -1, lhs, unary()});
      else
        return lhs;
    }
  }

  int unary() {
    if (eat('-')) return add({Op::Neg, 0, -1, unary(), -1});
    if (eat('+')) return unary();
    return power();
  }

  // Right associative; -x^2 parses as -(x^2).
  int power() {
    int base = primary();
    if (eat('^')) return add({Op::Pow, 0, -1, base, unary()});
    return base;
  }

  int primary() {
    skip();
    if (pos_ == src_.size()) fail("unexpected end of expression");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = sum();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  int number() {
    double v = 0;
    const char* begin = src_.data() + pos_;
    auto [end, ec] = std::from_chars(begin, src_.data() + src_.size(), v);
    if (ec != std::errc()) fail("malformed number");
    pos_ += end - begin;
    return add({Op::Const, v, -1, -1, -1});
  }

  int identifier() {
    size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    std::string name = src_.substr(start, pos_ - start);
    static const std::pair<const char*, Op> functions[] = {
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"sinh", Op::Sinh}, {"cosh", Op::Cosh}, {"exp", Op::Exp}};
    for (const auto& [fname, op] : functions) {
      if (name != fname) continue;
      if (!eat('(')) fail("expected '(' after " + name);
      int arg = sum();
      if (!eat(')')) fail("expected ')'");
      return add({op, 0, -1, arg, -1});
    }
    for (size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i] == name) return add({Op::Var, 0, static_cast<int>(i), -1, -1});
    if (name == "pi") return add({Op::Const, std::numbers::pi, -1, -1, -1});
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string src_;
  const std::vector<std::string>& vars_;
  int line_, column_;
  size_t pos_ = 0;
  Expr* out_ = nullptr;
};

Expr Expr::parse(const std::string& text, const std::vector<std::string>& variables, int line, int column) {
  return ExprParser(text, variables, line, column).run();
}

}  // namespace stableflow
