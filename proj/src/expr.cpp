#include "sweepmp/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <mutex>
#include <unordered_map>

#include "sweepmp/errors.hpp"

namespace sweepmp {

namespace detail {

struct Node {
  Expr::Op op = Expr::Op::Const;
  double value = 0.0;
  std::string name;
  int exponent = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;

  mutable std::mutex memo_mutex;
  mutable std::unordered_map<std::string, std::shared_ptr<const Node>> memo;

  static Expr wrap(std::shared_ptr<const Node> n) { return Expr(std::move(n)); }
};

}  // namespace detail

using detail::Node;

namespace {

using NodePtr = std::shared_ptr<const Node>;

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->op = Expr::Op::Const;
  n->value = v;
  return n;
}

NodePtr make_node(Expr::Op op, NodePtr a, NodePtr b = nullptr, int exponent = 0) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  n->exponent = exponent;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Expr::Op::Const && n->value == v; }
bool is_const(const NodePtr& n) { return n->op == Expr::Op::Const; }

double ipow(double base, int k) {
  double result = 1.0;
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

double apply_binary(Expr::Op op, double x, double y) {
  switch (op) {
    case Expr::Op::Add:
      return checked(x + y, "addition");
    case Expr::Op::Sub:
      return checked(x - y, "subtraction");
    case Expr::Op::Mul:
      return checked(x * y, "multiplication");
    case Expr::Op::Div:
      if (y == 0.0) throw DomainError("division by zero");
      return checked(x / y, "division");
    default:
      throw DomainError("bad binary operator");
  }
}

double apply_unary(Expr::Op op, double x, int exponent) {
  switch (op) {
    case Expr::Op::Neg:
      return -x;
    case Expr::Op::Pow:
      return checked(ipow(x, exponent), "power");
    case Expr::Op::Exp:
      return checked(std::exp(x), "exp");
    case Expr::Op::Log:
      if (x <= 0.0) throw DomainError("log of non-positive argument");
      return std::log(x);
    case Expr::Op::Sqrt:
      if (x < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(x);
    case Expr::Op::Sin:
      return std::sin(x);
    case Expr::Op::Cos:
      return std::cos(x);
    default:
      throw DomainError("bad unary operator");
  }
}

// Folding constructors: constant folding plus zero/one elimination only.

NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (is_const(a) && is_const(b)) return make_const(a->value + b->value);
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  return make_node(Expr::Op::Add, a, b);
}

NodePtr neg(const NodePtr& a) {
  if (is_const(a)) return make_const(-a->value);
  if (a->op == Expr::Op::Neg) return a->a;
  return make_node(Expr::Op::Neg, a);
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  if (is_const(a) && is_const(b)) return make_const(a->value - b->value);
  if (is_const(b, 0.0)) return a;
  if (is_const(a, 0.0)) return neg(b);
  return make_node(Expr::Op::Sub, a, b);
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  if (is_const(a) && is_const(b)) return make_const(a->value * b->value);
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (is_const(a, -1.0)) return neg(b);
  if (is_const(b, -1.0)) return neg(a);
  return make_node(Expr::Op::Mul, a, b);
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  if (is_const(a) && is_const(b) && b->value != 0.0) return make_const(a->value / b->value);
  if (is_const(b, 1.0)) return a;
  return make_node(Expr::Op::Div, a, b);
}

NodePtr power(const NodePtr& a, int k) {
  if (k == 0) return make_const(1.0);
  if (k == 1) return a;
  if (is_const(a)) return make_const(ipow(a->value, k));
  return make_node(Expr::Op::Pow, a, nullptr, k);
}

NodePtr func(Expr::Op op, const NodePtr& a) {
  if (op == Expr::Op::Neg) return neg(a);
  if (is_const(a)) {
    try {
      double v = apply_unary(op, a->value, 0);
      return make_const(v);
    } catch (const DomainError&) {
      // leave unfolded; evaluation reports the error
    }
  }
  return make_node(op, a);
}

double eval_node(const Node& n, const Env& env) {
  switch (n.op) {
    case Expr::Op::Const:
      return n.value;
    case Expr::Op::Var: {
      auto it = env.find(n.name);
      if (it == env.end()) throw UnboundVariable(n.name);
      return it->second;
    }
    case Expr::Op::Add:
    case Expr::Op::Sub:
    case Expr::Op::Mul:
    case Expr::Op::Div:
      return apply_binary(n.op, eval_node(*n.a, env), eval_node(*n.b, env));
    default:
      return apply_unary(n.op, eval_node(*n.a, env), n.exponent);
  }
}

NodePtr diff_node(const NodePtr& n, std::string_view var);

NodePtr diff_memo(const NodePtr& n, std::string_view var) {
  {
    std::lock_guard lock(n->memo_mutex);
    auto it = n->memo.find(std::string(var));
    if (it != n->memo.end()) return it->second;
  }
  NodePtr d = diff_node(n, var);
  std::lock_guard lock(n->memo_mutex);
  n->memo.emplace(std::string(var), d);
  return d;
}

NodePtr diff_node(const NodePtr& n, std::string_view var) {
  using Op = Expr::Op;
  switch (n->op) {
    case Op::Const:
      return make_const(0.0);
    case Op::Var:
      return make_const(n->name == var ? 1.0 : 0.0);
    case Op::Add:
      return add(diff_memo(n->a, var), diff_memo(n->b, var));
    case Op::Sub:
      return sub(diff_memo(n->a, var), diff_memo(n->b, var));
    case Op::Mul:
      return add(mul(diff_memo(n->a, var), n->b), mul(n->a, diff_memo(n->b, var)));
    case Op::Div: {
      NodePtr da = diff_memo(n->a, var);
      NodePtr db = diff_memo(n->b, var);
      return sub(div(da, n->b), div(mul(n->a, db), power(n->b, 2)));
    }
    case Op::Pow: {
      NodePtr da = diff_memo(n->a, var);
      return mul(mul(make_const(n->exponent), power(n->a, n->exponent - 1)), da);
    }
    case Op::Neg:
      return neg(diff_memo(n->a, var));
    case Op::Exp:
      return mul(n, diff_memo(n->a, var));
    case Op::Log:
      return div(diff_memo(n->a, var), n->a);
    case Op::Sqrt:
      return div(diff_memo(n->a, var), mul(make_const(2.0), n));
    case Op::Sin:
      return mul(func(Op::Cos, n->a), diff_memo(n->a, var));
    case Op::Cos:
      return neg(mul(func(Op::Sin, n->a), diff_memo(n->a, var)));
  }
  return make_const(0.0);
}

void collect_vars(const Node& n, std::set<std::string>& out) {
  if (n.op == Expr::Op::Var) out.insert(n.name);
  if (n.a) collect_vars(*n.a, out);
  if (n.b) collect_vars(*n.b, out);
}

// Printing --------------------------------------------------------------

int precedence(const Node& n) {
  switch (n.op) {
    case Expr::Op::Add:
    case Expr::Op::Sub:
      return 1;
    case Expr::Op::Mul:
    case Expr::Op::Div:
      return 2;
    case Expr::Op::Neg:
      return 3;
    case Expr::Op::Pow:
      return 4;
    case Expr::Op::Const:
      return n.value < 0.0 ? 3 : 5;
    default:
      return 5;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

const char* func_name(Expr::Op op) {
  switch (op) {
    case Expr::Op::Exp:
      return "exp";
    case Expr::Op::Log:
      return "log";
    case Expr::Op::Sqrt:
      return "sqrt";
    case Expr::Op::Sin:
      return "sin";
    case Expr::Op::Cos:
      return "cos";
    default:
      return "";
  }
}

void print(const Node& n, int min_prec, std::string& out) {
  const bool paren = precedence(n) < min_prec;
  if (paren) out += '(';
  switch (n.op) {
    case Expr::Op::Const:
      if (n.value < 0.0) {
        out += '-';
        out += format_number(-n.value);
      } else {
        out += format_number(n.value);
      }
      break;
    case Expr::Op::Var:
      out += n.name;
      break;
    case Expr::Op::Add:
      print(*n.a, 1, out);
      out += " + ";
      print(*n.b, 2, out);
      break;
    case Expr::Op::Sub:
      print(*n.a, 1, out);
      out += " - ";
      print(*n.b, 2, out);
      break;
    case Expr::Op::Mul:
      print(*n.a, 2, out);
      out += "*";
      print(*n.b, 3, out);
      break;
    case Expr::Op::Div:
      print(*n.a, 2, out);
      out += "/";
      print(*n.b, 3, out);
      break;
    case Expr::Op::Neg:
      out += '-';
      print(*n.a, 3, out);
      break;
    case Expr::Op::Pow:
      print(*n.a, 5, out);
      out += '^';
      out += std::to_string(n.exponent);
      break;
    default:
      out += func_name(n.op);
      out += '(';
      print(*n.a, 0, out);
      out += ')';
      break;
  }
  if (paren) out += ')';
}

// Parsing ---------------------------------------------------------------

class Parser {
 public:
  Parser(std::string_view src, std::span<const std::string> allowed) : src_(src), allowed_(allowed) {}

  NodePtr parse_all() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

 private:
  std::string_view src_;
  std::span<const std::string> allowed_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    while (true) {
      if (peek('+')) {
        ++pos_;
        lhs = add(lhs, parse_term());
      } else if (peek('-')) {
        ++pos_;
        lhs = sub(lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    while (true) {
      if (peek('*')) {
        ++pos_;
        lhs = mul(lhs, parse_factor());
      } else if (peek('/')) {
        ++pos_;
        lhs = div(lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_factor() {
    if (peek('-')) {
      ++pos_;
      return neg(parse_factor());
    }
    NodePtr base = parse_base();
    if (peek('^')) {
      ++pos_;
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) throw ParseError("expected integer exponent", start);
      int k = 0;
      auto res = std::from_chars(src_.data() + start, src_.data() + pos_, k);
      if (res.ec != std::errc{} || k > 64) throw ParseError("exponent out of range", start);
      return power(base, k);
    }
    return base;
  }

  NodePtr parse_base() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!peek(')')) throw ParseError("expected ')'", pos_);
      ++pos_;
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc{} || res.ptr != src_.data() + pos_) throw ParseError("malformed number", start);
    return make_const(v);
  }

  NodePtr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    if (peek('(')) {
      static const std::map<std::string, Expr::Op, std::less<>> kFuncs = {
          {"exp", Expr::Op::Exp},   {"log", Expr::Op::Log}, {"sqrt", Expr::Op::Sqrt},
          {"sin", Expr::Op::Sin},   {"cos", Expr::Op::Cos}, {"neg", Expr::Op::Neg}};
      auto it = kFuncs.find(name);
      if (it == kFuncs.end()) throw UnknownFunction(name, start);
      ++pos_;
      NodePtr arg = parse_expr();
      if (!peek(')')) throw ParseError("expected ')'", pos_);
      ++pos_;
      return func(it->second, arg);
    }
    if (std::find(allowed_.begin(), allowed_.end(), name) == allowed_.end())
      throw UnknownVariable(name, start);
    auto n = std::make_shared<Node>();
    n->op = Expr::Op::Var;
    n->name = std::move(name);
    return n;
  }
};

}  // namespace

// Expr ------------------------------------------------------------------

Expr::Expr() : node_(make_const(0.0)) {}

Expr Expr::constant(double value) { return Expr(make_const(value)); }

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr::Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
const std::string& Expr::name() const noexcept { return node_->name; }
int Expr::exponent() const noexcept { return node_->exponent; }

std::vector<Expr> Expr::children() const {
  std::vector<Expr> out;
  if (node_->a) out.push_back(Expr(node_->a));
  if (node_->b) out.push_back(Expr(node_->b));
  return out;
}

std::set<std::string> Expr::free_variables() const {
  std::set<std::string> out;
  collect_vars(*node_, out);
  return out;
}

double Expr::eval(const Env& env) const { return eval_node(*node_, env); }

Expr Expr::diff(std::string_view var) const { return Expr(diff_memo(node_, var)); }

std::string Expr::str() const {
  std::string out;
  print(*node_, 0, out);
  return out;
}

Expr operator+(const Expr& a, const Expr& b) { return Node::wrap(add(a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Node::wrap(sub(a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Node::wrap(mul(a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Node::wrap(div(a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Node::wrap(neg(a.node_)); }
Expr pow(const Expr& base, int exponent) {
  if (exponent < 0) return Expr::constant(1.0) / pow(base, -exponent);
  return Node::wrap(power(base.node_, exponent));
}
Expr apply(Expr::Op f, const Expr& arg) { return Node::wrap(func(f, arg.node_)); }

Expr parse(std::string_view source, std::span<const std::string> allowed_vars) {
  return Node::wrap(Parser(source, allowed_vars).parse_all());
}

double eval(const Expr& e, const Env& env) { return e.eval(env); }

Expr differentiate(const Expr& e, std::string_view var) { return e.diff(var); }

// CompiledExpr ------------------------------------------------------------

namespace {

int emit(const Node& n, std::span<const std::string> vars, auto& code) {
  using Op = Expr::Op;
  switch (n.op) {
    case Op::Const:
      code.push_back({Op::Const, 0, n.value});
      return 1;
    case Op::Var: {
      auto it = std::find(vars.begin(), vars.end(), n.name);
      if (it == vars.end()) throw UnboundVariable(n.name);
      code.push_back({Op::Var, static_cast<int>(it - vars.begin()), 0.0});
      return 1;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      int da = emit(*n.a, vars, code);
      int db = emit(*n.b, vars, code);
      code.push_back({n.op, 0, 0.0});
      return std::max(da, db + 1);
    }
    default: {
      int da = emit(*n.a, vars, code);
      code.push_back({n.op, n.exponent, 0.0});
      return da;
    }
  }
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e, std::span<const std::string> vars) {
  max_depth_ = emit(*e.node(), vars, code_);
  constant_ = e.is_constant();
  constant_value_ = constant_ ? e.value() : 0.0;
}

double CompiledExpr::operator()(std::span<const double> values) const {
  if (constant_) return constant_value_;
  constexpr int kInline = 32;
  std::array<double, kInline> small{};
  std::vector<double> big;
  double* stack = small.data();
  if (max_depth_ > kInline) {
    big.resize(static_cast<std::size_t>(max_depth_));
    stack = big.data();
  }
  int top = -1;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Expr::Op::Const:
        stack[++top] = in.value;
        break;
      case Expr::Op::Var:
        stack[++top] = values[static_cast<std::size_t>(in.arg)];
        break;
      case Expr::Op::Add:
      case Expr::Op::Sub:
      case Expr::Op::Mul:
      case Expr::Op::Div: {
        const double rhs = stack[top--];
        stack[top] = apply_binary(in.op, stack[top], rhs);
        break;
      }
      default:
        stack[top] = apply_unary(in.op, stack[top], in.arg);
        break;
    }
  }
  return stack[0];
}

}  // namespace sweepmp
