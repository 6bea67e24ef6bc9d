#include "fisher/autodiff.hpp"

#include <algorithm>
#include <string>

namespace fisher {

Elementary parse_elementary(std::string_view name) {
  if (name == "tanh") return Elementary::tanh;
  if (name == "sigmoid") return Elementary::sigmoid;
  if (name == "sin" || name == "sine") return Elementary::sin;
  if (name == "swish") return Elementary::swish;
  if (name == "exp") return Elementary::exp;
  if (name == "negate") return Elementary::negate;
  if (name == "square") return Elementary::square;
  throw ConfigError("unknown elementary function '" + std::string(name) + "'");
}

std::string_view to_string(Elementary f) {
  switch (f) {
    case Elementary::tanh: return "tanh";
    case Elementary::sigmoid: return "sigmoid";
    case Elementary::sin: return "sine";
    case Elementary::swish: return "swish";
    case Elementary::exp: return "exp";
    case Elementary::negate: return "negate";
    case Elementary::square: return "square";
  }
  throw ConfigError("unknown elementary function id");
}

Array elementary_primitive(Elementary f, const Array& x) {
  switch (f) {
    case Elementary::tanh: {
      // (1 - e) / (1 + e) with e = exp(-2|x|); vectorized exp is far cheaper
      // than scalar tanh and the absolute error stays at rounding level.
      const Array e = (-2.0 * x.abs()).exp();
      return x.sign() * (1.0 - e) / (1.0 + e);
    }
    case Elementary::sigmoid:
    case Elementary::swish:
      return 1.0 / (1.0 + (-x).exp());
    case Elementary::exp:
      return x.exp();
    case Elementary::sin:
      return x.sin();
    case Elementary::negate:
    case Elementary::square:
      return {};
  }
  throw ConfigError("unknown elementary function id");
}

Array elementary_from_primitive(Elementary f, int order, const Array& x, const Array& p) {
  if (order < 0 || order > 3) throw UsageError("elementary derivative order must be in [0, 3]");
  switch (f) {
    case Elementary::tanh: {
      if (order == 0) return p;
      if (order == 1) return 1.0 - p.square();
      if (order == 2) return -2.0 * p * (1.0 - p.square());
      return (1.0 - p.square()) * (6.0 * p.square() - 2.0);
    }
    case Elementary::sigmoid: {
      if (order == 0) return p;
      if (order == 1) return p * (1.0 - p);
      if (order == 2) return p * (1.0 - p) * (1.0 - 2.0 * p);
      return p * (1.0 - p) * (1.0 - 6.0 * p + 6.0 * p.square());
    }
    case Elementary::swish: {
      if (order == 0) return x * p;
      const Array d = p * (1.0 - p);
      if (order == 1) return p + x * d;
      if (order == 2) return 2.0 * d + x * d * (1.0 - 2.0 * p);
      return 3.0 * d * (1.0 - 2.0 * p) + x * d * (1.0 - 6.0 * p + 6.0 * p.square());
    }
    case Elementary::exp:
      return p;
    case Elementary::sin:
      switch (order) {
        case 0: return p;
        case 1: return x.cos();
        case 2: return -p;
        default: return -x.cos();
      }
    case Elementary::negate:
      if (order == 0) return -x;
      return Array::Constant(x.rows(), x.cols(), order == 1 ? -1.0 : 0.0);
    case Elementary::square:
      if (order == 0) return x.square();
      if (order == 1) return 2.0 * x;
      return Array::Constant(x.rows(), x.cols(), order == 2 ? 2.0 : 0.0);
  }
  throw ConfigError("unknown elementary function id");
}

Array elementary_array(Elementary f, int order, const Array& x) {
  return elementary_from_primitive(f, order, x, elementary_primitive(f, x));
}

// ---------------------------------------------------------------------------

const Array& Var::value() const {
  if (tape_ == nullptr) throw UsageError("variable is not recorded on a tape");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Array& v = value();
  if (v.size() != 1) throw UsageError("variable is not a scalar");
  return v(0, 0);
}

Tape::Tape(std::span<const double> params) : params_(params) {}

void Tape::reset(std::span<const double> params) {
  params_ = params;
  size_ = 0;
  ++generation_;
}

void Tape::check(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= size_)
    throw UsageError("variable is not recorded on this tape");
}

const Array& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id_].value;
}

Tape::Node& Tape::push(Op op) {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[size_++];
  n.op = op;
  n.requires_grad = false;
  n.a = n.b = 0;
  n.c = 0.0;
  n.order = 0;
  n.offset = 0;
  return n;
}

Var Tape::constant(const Array& value) {
  Node& n = push(Op::constant);
  n.value = value;
  return handle(size_ - 1);
}

Var Tape::constant(double value) {
  Node& n = push(Op::constant);
  n.value.resize(1, 1);
  n.value(0, 0) = value;
  return handle(size_ - 1);
}

Var Tape::parameter(std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  const auto count = static_cast<std::size_t>(rows * cols);
  if (offset + count > params_.size()) throw UsageError("parameter block exceeds the bound parameter vector");
  Node& n = push(Op::parameter);
  n.requires_grad = true;
  n.offset = offset;
  n.value.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) n.value(r, c) = params_[offset + static_cast<std::size_t>(r * cols + c)];
  return handle(size_ - 1);
}

namespace {

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw UsageError("incompatible shapes for elementwise operation");
}

// Sum g over the dimensions that were broadcast to reach g's shape.
Array reduce_to(const Array& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Array::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  if (cols == 1) return g.rowwise().sum();
  throw UsageError("cannot reduce gradient to operand shape");
}

Array expand(const Array& x, Eigen::Index rows, Eigen::Index cols) {
  if (x.rows() == rows && x.cols() == cols) return x;
  return x.replicate(rows / x.rows(), cols / x.cols());
}

}  // namespace

Var Tape::binary(Op op, Var a, Var b) {
  check(a);
  check(b);
  const Node& na = nodes_[a.id_];
  const Node& nb = nodes_[b.id_];
  const Eigen::Index rows = broadcast_dim(na.value.rows(), nb.value.rows());
  const Eigen::Index cols = broadcast_dim(na.value.cols(), nb.value.cols());
  Node& n = push(op);
  n.a = a.id_;
  n.b = b.id_;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  auto compute = [&](const auto& x, const auto& y) {
    switch (op) {
      case Op::add: n.value = x + y; break;
      case Op::sub: n.value = x - y; break;
      default: n.value = x * y; break;
    }
  };
  const bool same = na.value.rows() == nb.value.rows() && na.value.cols() == nb.value.cols();
  if (same) {
    compute(na.value, nb.value);
  } else if (na.value.size() == 1) {
    compute(Array::Constant(rows, cols, na.value(0, 0)), expand(nb.value, rows, cols));
  } else if (nb.value.size() == 1) {
    compute(expand(na.value, rows, cols), Array::Constant(rows, cols, nb.value(0, 0)));
  } else {
    compute(expand(na.value, rows, cols), expand(nb.value, rows, cols));
  }
  return handle(size_ - 1);
}

Var Tape::add(Var a, Var b) { return binary(Op::add, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::sub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::mul, a, b); }

Var Tape::scale(Var a, double c) {
  check(a);
  Node& n = push(Op::scale);
  const Node& na = nodes_[a.id_];
  n.a = a.id_;
  n.c = c;
  n.requires_grad = na.requires_grad;
  n.value = c * na.value;
  return handle(size_ - 1);
}

Var Tape::shift(Var a, double c) {
  check(a);
  Node& n = push(Op::shift);
  const Node& na = nodes_[a.id_];
  n.a = a.id_;
  n.c = c;
  n.requires_grad = na.requires_grad;
  n.value = na.value + c;
  return handle(size_ - 1);
}

Var Tape::matmul(Var w, Var a) {
  check(w);
  check(a);
  const Node& nw = nodes_[w.id_];
  const Node& na = nodes_[a.id_];
  if (nw.value.cols() != na.value.rows()) throw UsageError("matmul shape mismatch");
  Node& n = push(Op::matmul);
  n.a = w.id_;
  n.b = a.id_;
  n.requires_grad = nw.requires_grad || na.requires_grad;
  n.value.resize(nw.value.rows(), na.value.cols());
  n.value.matrix().noalias() = nw.value.matrix() * na.value.matrix();
  return handle(size_ - 1);
}

Var Tape::unary(Elementary f, Var a, int order) {
  check(a);
  if (order < 0 || order > 2) throw UsageError("recorded derivative order must be in [0, 2]");
  Node& n = push(Op::unary);
  const Node& na = nodes_[a.id_];
  n.a = a.id_;
  n.f = f;
  n.order = order;
  n.base = size_ - 1;
  n.requires_grad = na.requires_grad;
  n.primitive = elementary_primitive(f, na.value);
  n.value = elementary_from_primitive(f, order, na.value, n.primitive);
  return handle(size_ - 1);
}

std::array<Var, 3> Tape::unary_derivatives(Elementary f, Var a) {
  const Var d0 = unary(f, a, 0);
  std::array<Var, 3> out{d0, {}, {}};
  for (int order = 1; order <= 2; ++order) {
    Node& n = push(Op::unary);
    const Node& na = nodes_[a.id_];
    n.a = a.id_;
    n.f = f;
    n.order = order;
    n.base = d0.id_;
    n.requires_grad = na.requires_grad;
    n.value = elementary_from_primitive(f, order, na.value, nodes_[d0.id_].primitive);
    out[static_cast<std::size_t>(order)] = handle(size_ - 1);
  }
  return out;
}

Var Tape::mean(Var a) {
  check(a);
  Node& n = push(Op::mean);
  const Node& na = nodes_[a.id_];
  if (na.value.size() == 0) throw UsageError("mean of an empty array");
  n.a = a.id_;
  n.requires_grad = na.requires_grad;
  n.value.resize(1, 1);
  n.value(0, 0) = na.value.mean();
  return handle(size_ - 1);
}

Var Tape::sum(Var a) {
  check(a);
  Node& n = push(Op::sum);
  const Node& na = nodes_[a.id_];
  n.a = a.id_;
  n.requires_grad = na.requires_grad;
  n.value.resize(1, 1);
  n.value(0, 0) = na.value.sum();
  return handle(size_ - 1);
}

template <class Expr>
void Tape::accumulate_expr(std::size_t node, const Expr& g) {
  if (!nodes_[node].requires_grad) return;
  if (has_adjoint_[node]) {
    adjoints_[node] += g;
  } else {
    adjoints_[node] = g;
    has_adjoint_[node] = 1;
  }
}

void Tape::accumulate(std::size_t node, const Array& g) {
  if (!nodes_[node].requires_grad) return;
  const Array& v = nodes_[node].value;
  if (g.rows() == v.rows() && g.cols() == v.cols()) {
    accumulate_expr(node, g);
  } else {
    accumulate_expr(node, reduce_to(g, v.rows(), v.cols()));
  }
}

std::vector<double> Tape::gradient(Var loss, const Visitor& visit) {
  std::vector<double> out(params_.size(), 0.0);
  gradient(loss, out, visit);
  return out;
}

void Tape::gradient(Var loss, std::span<double> out, const Visitor& visit) {
  check(loss);
  if (nodes_[loss.id_].value.size() != 1) throw UsageError("gradient requires a scalar loss");
  if (out.size() != params_.size()) throw UsageError("gradient buffer size does not match the parameter vector");
  std::fill(out.begin(), out.end(), 0.0);
  while (adjoints_.size() < size_) adjoints_.emplace_back();
  has_adjoint_.assign(size_, 0);

  accumulate_expr(loss.id_, Array::Constant(1, 1, 1.0));
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    if (visit) visit(i);
    if (!has_adjoint_[i]) continue;
    const Node& n = nodes_[i];
    const Array& g = adjoints_[i];
    switch (n.op) {
      case Op::constant:
        break;
      case Op::parameter: {
        const Eigen::Index cols = n.value.cols();
        for (Eigen::Index r = 0; r < n.value.rows(); ++r)
          for (Eigen::Index c = 0; c < cols; ++c) out[n.offset + static_cast<std::size_t>(r * cols + c)] += g(r, c);
        break;
      }
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        if (nodes_[n.b].requires_grad) accumulate(n.b, -g);
        break;
      case Op::mul: {
        const Array& va = nodes_[n.a].value;
        const Array& vb = nodes_[n.b].value;
        const bool same = va.rows() == vb.rows() && va.cols() == vb.cols();
        if (same) {
          if (nodes_[n.a].requires_grad) accumulate_expr(n.a, g * vb);
          if (nodes_[n.b].requires_grad) accumulate_expr(n.b, g * va);
        } else {
          if (nodes_[n.a].requires_grad) accumulate(n.a, Array(g * expand(vb, g.rows(), g.cols())));
          if (nodes_[n.b].requires_grad) accumulate(n.b, Array(g * expand(va, g.rows(), g.cols())));
        }
        break;
      }
      case Op::scale:
        accumulate_expr(n.a, n.c * g);
        break;
      case Op::shift:
        accumulate_expr(n.a, g);
        break;
      case Op::matmul: {
        const Array& w = nodes_[n.a].value;
        const Array& a = nodes_[n.b].value;
        if (nodes_[n.a].requires_grad) accumulate_expr(n.a, (g.matrix() * a.matrix().transpose()).array());
        if (nodes_[n.b].requires_grad) accumulate_expr(n.b, (w.matrix().transpose() * g.matrix()).array());
        break;
      }
      case Op::unary:
        accumulate_expr(n.a, g * elementary_from_primitive(n.f, n.order + 1, nodes_[n.a].value,
                                                           nodes_[n.base].primitive));
        break;
      case Op::mean: {
        const Array& va = nodes_[n.a].value;
        accumulate_expr(n.a, Array::Constant(va.rows(), va.cols(), g(0, 0) / static_cast<double>(va.size())));
        break;
      }
      case Op::sum: {
        const Array& va = nodes_[n.a].value;
        accumulate_expr(n.a, Array::Constant(va.rows(), va.cols(), g(0, 0)));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

TapeJet jet_unary(Tape& tape, Elementary f, const TapeJet& u) {
  const auto [d0, d1, d2] = tape.unary_derivatives(f, u.v);
  const Var dx = tape.mul(d1, u.dx);
  const Var dt = tape.mul(d1, u.dt);
  const Var dxx = tape.add(tape.mul(d2, tape.mul(u.dx, u.dx)), tape.mul(d1, u.dxx));
  return {d0, dx, dt, dxx};
}

TapeJet jet_binary(Tape& tape, BinaryOp op, const TapeJet& u, const TapeJet& w) {
  switch (op) {
    case BinaryOp::add:
      return {tape.add(u.v, w.v), tape.add(u.dx, w.dx), tape.add(u.dt, w.dt), tape.add(u.dxx, w.dxx)};
    case BinaryOp::sub:
      return {tape.sub(u.v, w.v), tape.sub(u.dx, w.dx), tape.sub(u.dt, w.dt), tape.sub(u.dxx, w.dxx)};
    case BinaryOp::mul: {
      const Var v = tape.mul(u.v, w.v);
      const Var dx = tape.add(tape.mul(u.dx, w.v), tape.mul(u.v, w.dx));
      const Var dt = tape.add(tape.mul(u.dt, w.v), tape.mul(u.v, w.dt));
      const Var dxx = tape.add(tape.add(tape.mul(u.dxx, w.v), tape.scale(tape.mul(u.dx, w.dx), 2.0)),
                               tape.mul(u.v, w.dxx));
      return {v, dx, dt, dxx};
    }
  }
  throw UsageError("unknown binary jet operation");
}

}  // namespace fisher
