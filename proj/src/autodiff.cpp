#include "lgi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>

namespace lgi::ad {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {
  if (shape_.empty() || shape_.size() > 2) {
    throw ShapeError("tensor rank must be 1 or 2");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_.empty() || shape_.size() > 2) {
    throw ShapeError("tensor rank must be 1 or 2");
  }
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("tensor data size does not match shape");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const { return shape_.size() == 2 ? shape_[1] : 1; }

double Tensor::scalar_value() const {
  if (numel() != 1) throw ShapeError("scalar_value on non-scalar tensor");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tape::Tape(bool check_finite) : check_finite_(check_finite) {}

int Tape::check_var(Var v) const {
  if (v.tape != this) throw GraphError("variable does not belong to this tape");
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw GraphError("variable id out of range");
  }
  return v.id;
}

Tensor& Tape::grad_accum(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.seeded = true;
  return n.grad;
}

Var Tape::leaf(Tensor value) { return wrap(record("leaf", std::move(value), {})); }

Var Tape::constant(Tensor value) { return wrap(record("constant", std::move(value), {})); }

int Tape::record(const char* op, Tensor value, std::function<void(Tape&)> backprop) {
  if (check_finite_ && !value.all_finite()) {
    throw EvaluationError(std::string("non-finite value produced by op '") + op + "'");
  }
  Node n;
  n.grad = Tensor::zeros(value.shape());
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  n.op = op;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tensor& Tape::value(Var v) const { return nodes_[static_cast<std::size_t>(check_var(v))].value; }

const Tensor& Tape::grad(Var v) const { return nodes_[static_cast<std::size_t>(check_var(v))].grad; }

void Tape::backward(Var output) {
  int out = check_var(output);
  if (nodes_[static_cast<std::size_t>(out)].value.numel() != 1) {
    throw ShapeError("backward requires a scalar output");
  }
  for (Node& n : nodes_) {
    n.grad.fill(0.0);
    n.seeded = false;
  }
  nodes_[static_cast<std::size_t>(out)].grad(0) = 1.0;
  nodes_[static_cast<std::size_t>(out)].seeded = true;
  for (int id = out; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.seeded && n.backprop) n.backprop(*this);
  }
}

// ---- elementwise arithmetic ----

namespace {

enum class BinKind { Add, Sub, Mul, Div };

double bin_eval(BinKind k, double a, double b) {
  switch (k) {
    case BinKind::Add: return a + b;
    case BinKind::Sub: return a - b;
    case BinKind::Mul: return a * b;
    case BinKind::Div: return a / b;
  }
  return 0.0;
}

const char* bin_name(BinKind k) {
  switch (k) {
    case BinKind::Add: return "add";
    case BinKind::Sub: return "sub";
    case BinKind::Mul: return "mul";
    case BinKind::Div: return "div";
  }
  return "?";
}

}  // namespace

Var Tape::add(Var a, Var b) { return binary_(a, b, 0); }
Var Tape::sub(Var a, Var b) { return binary_(a, b, 1); }
Var Tape::mul(Var a, Var b) { return binary_(a, b, 2); }
Var Tape::div(Var a, Var b) { return binary_(a, b, 3); }

Var Tape::neg(Var a) { return affine(a, -1.0, 0.0); }

Var Tape::affine(Var x, double a, double b) {
  int xi = check_var(x);
  const Tensor& xv = val(xi);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out(i) = a * xv(i) + b;
  int id = record("affine", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [xi, id, a](Tape& t) {
    const Tensor& g = t.val_grad(id);
    Tensor& gx = t.grad_accum(xi);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = g(i);
      if (gi != 0.0) gx(i) += a * gi;
    }
  };
  return wrap(id);
}

const Tensor& Tape::val_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

Var Tape::binary_(Var a, Var b, int kind_int) {
  BinKind kind = static_cast<BinKind>(kind_int);
  int ai = check_var(a);
  int bi = check_var(b);
  const Tensor& av = val(ai);
  const Tensor& bv = val(bi);
  bool a_scalar = av.is_scalar();
  bool b_scalar = bv.is_scalar();
  if (!av.same_shape(bv) && !a_scalar && !b_scalar) {
    throw ShapeError(std::string(bin_name(kind)) + ": operand shapes differ and neither is scalar");
  }
  const Tensor& big = (a_scalar && !b_scalar) ? bv : av;
  Tensor out(big.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double x = a_scalar ? av(0) : av(i);
    double y = b_scalar ? bv(0) : bv(i);
    out(i) = bin_eval(kind, x, y);
  }
  int id = record(bin_name(kind), std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, bi, id, kind, a_scalar, b_scalar](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& av2 = t.val(ai);
    const Tensor& bv2 = t.val(bi);
    Tensor& ga = t.grad_accum(ai);
    Tensor& gb = t.grad_accum(bi);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = g(i);
      if (gi == 0.0) continue;
      double x = a_scalar ? av2(0) : av2(i);
      double y = b_scalar ? bv2(0) : bv2(i);
      double da = 0.0, db = 0.0;
      switch (kind) {
        case BinKind::Add: da = gi; db = gi; break;
        case BinKind::Sub: da = gi; db = -gi; break;
        case BinKind::Mul: da = gi * y; db = gi * x; break;
        case BinKind::Div: da = gi / y; db = -gi * x / (y * y); break;
      }
      if (a_scalar) ga(0) += da; else ga(i) += da;
      if (b_scalar) gb(0) += db; else gb(i) += db;
    }
  };
  return wrap(id);
}

// ---- linear algebra ----

Var Tape::matmul(Var a, Var b) {
  int ai = check_var(a);
  int bi = check_var(b);
  const Tensor& av = val(ai);
  const Tensor& bv = val(bi);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw ShapeError("matmul: incompatible shapes");
  }
  std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double x = av(i, p);
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += x * bv(p, j);
    }
  }
  int id = record("matmul", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, bi, id, n, k, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& av2 = t.val(ai);
    const Tensor& bv2 = t.val(bi);
    Tensor& ga = t.grad_accum(ai);
    Tensor& gb = t.grad_accum(bi);
    // dA = G B^T, dB = A^T G
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double gij = g(i, j);
        if (gij == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga(i, p) += gij * bv2(p, j);
          gb(p, j) += av2(i, p) * gij;
        }
      }
    }
  };
  return wrap(id);
}

Var Tape::transpose(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("transpose requires a rank-2 tensor");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = av(i, j);
  int id = record("transpose", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += g(j, i);
  };
  return wrap(id);
}

// ---- reductions ----

Var Tape::sum(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av(i);
  int id = record("sum", Tensor::scalar(s), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id](Tape& t) {
    double g = t.val_grad(id)(0);
    if (g == 0.0) return;
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga(i) += g;
  };
  return wrap(id);
}

Var Tape::mean(Var a) {
  int ai = check_var(a);
  double inv = 1.0 / static_cast<double>(val(ai).numel());
  return affine(sum(a), inv, 0.0);
}

Var Tape::row_sum(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("row_sum requires a rank-2 tensor");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += av(i, j);
    out(i, 0) = s;
  }
  int id = record("row_sum", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double gi = g(i, 0);
      if (gi == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += gi;
    }
  };
  return wrap(id);
}

Var Tape::norm2(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av(i) * av(i);
  double r = std::sqrt(s);
  int id = record("norm2", Tensor::scalar(r), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, r](Tape& t) {
    double g = t.val_grad(id)(0);
    if (g == 0.0 || r == 0.0) return;  // zero subgradient at the origin
    const Tensor& av2 = t.val(ai);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga(i) += g * av2(i) / r;
  };
  return wrap(id);
}

Var Tape::row_norm2(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("row_norm2 requires a rank-2 tensor");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += av(i, j) * av(i, j);
    out(i, 0) = std::sqrt(s);
  }
  int id = record("row_norm2", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& r = t.val(id);
    const Tensor& av2 = t.val(ai);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double gi = g(i, 0);
      double ri = r(i, 0);
      if (gi == 0.0 || ri == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += gi * av2(i, j) / ri;
    }
  };
  return wrap(id);
}

// ---- elementwise nonlinearities ----

Var Tape::unary_(Var a, const char* op, double (*fwd)(double),
                 double (*bwd)(double /*x*/, double /*y*/)) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out(i) = fwd(av(i));
  int id = record(op, std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, bwd](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& x = t.val(ai);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = g(i);
      if (gi == 0.0) continue;
      ga(i) += gi * bwd(x(i), y(i));
    }
  };
  return wrap(id);
}

Var Tape::sqrt_(Var a) {
  return unary_(a, "sqrt", [](double x) { return std::sqrt(x); },
                [](double, double y) { return 0.5 / y; });
}

Var Tape::exp_(Var a) {
  return unary_(a, "exp", [](double x) { return std::exp(x); },
                [](double, double y) { return y; });
}

Var Tape::log_(Var a) {
  return unary_(a, "log", [](double x) { return std::log(x); },
                [](double x, double) { return 1.0 / x; });
}

Var Tape::tanh_(Var a) {
  return unary_(a, "tanh", [](double x) { return std::tanh(x); },
                [](double, double y) { return 1.0 - y * y; });
}

Var Tape::tan_(Var a) {
  return unary_(a, "tan", [](double x) { return std::tan(x); },
                [](double, double y) { return 1.0 + y * y; });
}

Var Tape::sin_(Var a) {
  return unary_(a, "sin", [](double x) { return std::sin(x); },
                [](double x, double) { return std::cos(x); });
}

Var Tape::cos_(Var a) {
  return unary_(a, "cos", [](double x) { return std::cos(x); },
                [](double x, double) { return -std::sin(x); });
}

Var Tape::sinh_(Var a) {
  return unary_(a, "sinh", [](double x) { return std::sinh(x); },
                [](double x, double) { return std::cosh(x); });
}

Var Tape::cosh_(Var a) {
  return unary_(a, "cosh", [](double x) { return std::cosh(x); },
                [](double x, double) { return std::sinh(x); });
}

Var Tape::arccos_clamped(Var a) {
  return unary_(a, "arccos",
                [](double x) { return std::acos(std::clamp(x, -1.0, 1.0)); },
                [](double x, double) {
                  if (x <= -1.0 || x >= 1.0) return 0.0;
                  return -1.0 / std::sqrt(1.0 - x * x);
                });
}

Var Tape::arccosh_clamped(Var a) {
  return unary_(a, "arccosh",
                [](double x) { return std::acosh(std::max(x, 1.0)); },
                [](double x, double) {
                  if (x <= 1.0) return 0.0;
                  return 1.0 / std::sqrt(x * x - 1.0);
                });
}

Var Tape::arccosh1p(Var a) {
  return unary_(a, "arccosh1p",
                [](double u) { return u <= 0.0 ? 0.0 : 2.0 * std::asinh(std::sqrt(0.5 * u)); },
                [](double u, double) {
                  if (u <= 0.0) return 0.0;
                  return 1.0 / std::sqrt(u * (u + 2.0));
                });
}

Var Tape::arccos1m(Var a) {
  return unary_(a, "arccos1m",
                [](double u) {
                  u = std::clamp(u, 0.0, 2.0);
                  return 2.0 * std::asin(std::sqrt(0.5 * u));
                },
                [](double u, double) {
                  if (u <= 0.0 || u >= 2.0) return 0.0;
                  return 1.0 / std::sqrt(u * (2.0 - u));
                });
}

Var Tape::softplus(Var a) {
  return unary_(a, "softplus",
                [](double x) {
                  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
                },
                [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var Tape::relu(Var a) {
  return unary_(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Tape::leaky_relu(Var a, double slope) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) {
    double x = av(i);
    out(i) = x > 0.0 ? x : slope * x;
  }
  int id = record("leaky_relu", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, slope](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& x = t.val(ai);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = g(i);
      if (gi == 0.0) continue;
      ga(i) += gi * (x(i) > 0.0 ? 1.0 : slope);
    }
  };
  return wrap(id);
}

Var Tape::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("clamp: lo must not exceed hi");
  int ai = check_var(a);
  const Tensor& av = val(ai);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out(i) = std::clamp(av(i), lo, hi);
  int id = record("clamp", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, lo, hi](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& x = t.val(ai);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = g(i);
      if (gi == 0.0) continue;
      if (x(i) > lo && x(i) < hi) ga(i) += gi;
    }
  };
  return wrap(id);
}

// ---- shape manipulation ----

Var Tape::broadcast(Var a, std::vector<std::size_t> shape) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (shape.size() != 2) throw ShapeError("broadcast target must be rank 2");
  std::size_t n = shape[0], m = shape[1];
  enum class Mode { Scalar, Col, Row } mode;
  if (av.is_scalar()) {
    mode = Mode::Scalar;
  } else if (av.rank() == 2 && av.cols() == 1 && av.rows() == n) {
    mode = Mode::Col;
  } else if (av.rank() == 2 && av.rows() == 1 && av.cols() == m) {
    mode = Mode::Row;
  } else {
    throw ShapeError("broadcast: source must be scalar, {n,1} or {1,m}");
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      switch (mode) {
        case Mode::Scalar: out(i, j) = av(0); break;
        case Mode::Col: out(i, j) = av(i, 0); break;
        case Mode::Row: out(i, j) = av(0, j); break;
      }
    }
  }
  int id = record("broadcast", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m, mode](Tape& t) {
    const Tensor& g = t.val_grad(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double gi = g(i, j);
        if (gi == 0.0) continue;
        switch (mode) {
          case Mode::Scalar: ga(0) += gi; break;
          case Mode::Col: ga(i, 0) += gi; break;
          case Mode::Row: ga(0, j) += gi; break;
        }
      }
    }
  };
  return wrap(id);
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols needs at least one part");
  std::vector<int> ids;
  ids.reserve(parts.size());
  std::size_t n = 0, total = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    int pid = check_var(parts[p]);
    const Tensor& pv = val(pid);
    if (pv.rank() != 2) throw ShapeError("concat_cols parts must be rank 2");
    if (p == 0) n = pv.rows();
    if (pv.rows() != n) throw ShapeError("concat_cols parts must share the row count");
    total += pv.cols();
    ids.push_back(pid);
  }
  Tensor out({n, total});
  std::size_t off = 0;
  std::vector<std::size_t> widths;
  for (int pid : ids) {
    const Tensor& pv = val(pid);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, off + j) = pv(i, j);
    widths.push_back(pv.cols());
    off += pv.cols();
  }
  int id = record("concat_cols", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ids, id, n, widths](Tape& t) {
    const Tensor& g = t.val_grad(id);
    std::size_t off2 = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      Tensor& ga = t.grad_accum(ids[p]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < widths[p]; ++j) ga(i, j) += g(i, off2 + j);
      off2 += widths[p];
    }
  };
  return wrap(id);
}

std::vector<Var> Tape::split_cols(Var a, std::span<const int> widths) {
  int ai = check_var(a);
  if (val(ai).rank() != 2) throw ShapeError("split_cols requires a rank-2 tensor");
  std::size_t total = 0;
  for (int w : widths) {
    if (w <= 0) throw ShapeError("split_cols widths must be positive");
    total += static_cast<std::size_t>(w);
  }
  if (total != val(ai).cols()) throw ShapeError("split_cols widths must sum to the column count");
  std::size_t n = val(ai).rows();
  std::vector<Var> outs;
  std::size_t off = 0;
  for (int w : widths) {
    std::size_t wu = static_cast<std::size_t>(w);
    Tensor part({n, wu});
    // val(ai) is re-read each pass: record() below may reallocate the node list
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < wu; ++j) part(i, j) = val(ai)(i, off + j);
    int id = record("split_cols", std::move(part), {});
    std::size_t off_cap = off;
    nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, wu, off_cap](Tape& t) {
      const Tensor& g = t.val_grad(id);
      Tensor& ga = t.grad_accum(ai);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < wu; ++j) ga(i, off_cap + j) += g(i, j);
    };
    outs.push_back(wrap(id));
    off += wu;
  }
  return outs;
}

// ---- softmax family ----

Var Tape::row_softmax(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("row_softmax requires a rank-2 tensor");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      out(i, j) = std::exp(av(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= z;
  }
  int id = record("row_softmax", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& s = t.val(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g(i, j) * s(i, j);
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += s(i, j) * (g(i, j) - dot);
    }
  };
  return wrap(id);
}

Var Tape::row_log_softmax(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("row_log_softmax requires a rank-2 tensor");
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(av(i, j) - mx);
    double lz = std::log(z) + mx;
    for (std::size_t j = 0; j < m; ++j) out(i, j) = av(i, j) - lz;
  }
  int id = record("row_log_softmax", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& ls = t.val(id);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < m; ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += g(i, j) - std::exp(ls(i, j)) * gsum;
    }
  };
  return wrap(id);
}

Var Tape::masked_row_softmax(Var a, const Tensor& mask) {
  int ai = check_var(a);
  if (val(ai).rank() != 2) throw ShapeError("masked_row_softmax requires a rank-2 tensor");
  if (!mask.same_shape(val(ai))) throw ShapeError("masked_row_softmax: mask shape mismatch");
  int mi = record("softmax_mask", mask, {});
  // re-acquire after record(): growing the node list may reallocate
  const Tensor& av = val(ai);
  const Tensor& mk = val(mi);
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (mk(i, j) != 0.0) mx = std::max(mx, av(i, j));
    if (!std::isfinite(mx)) continue;  // fully masked row -> zeros
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mk(i, j) == 0.0) continue;
      out(i, j) = std::exp(av(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < m; ++j)
      if (mk(i, j) != 0.0) out(i, j) /= z;
  }
  int id = record("masked_row_softmax", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, mi, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& s = t.val(id);
    const Tensor& mk2 = t.val(mi);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        if (mk2(i, j) != 0.0) dot += g(i, j) * s(i, j);
      for (std::size_t j = 0; j < m; ++j)
        if (mk2(i, j) != 0.0) ga(i, j) += s(i, j) * (g(i, j) - dot);
    }
  };
  return wrap(id);
}

Var Tape::masked_row_log_softmax(Var a, const Tensor& mask) {
  int ai = check_var(a);
  if (val(ai).rank() != 2) throw ShapeError("masked_row_log_softmax requires a rank-2 tensor");
  if (!mask.same_shape(val(ai))) throw ShapeError("masked_row_log_softmax: mask shape mismatch");
  int mi = record("softmax_mask", mask, {});
  const Tensor& av = val(ai);
  const Tensor& mk = val(mi);
  std::size_t n = av.rows(), m = av.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (mk(i, j) != 0.0) mx = std::max(mx, av(i, j));
    if (!std::isfinite(mx)) continue;  // fully masked row -> zeros
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (mk(i, j) != 0.0) z += std::exp(av(i, j) - mx);
    double lz = std::log(z) + mx;
    for (std::size_t j = 0; j < m; ++j)
      if (mk(i, j) != 0.0) out(i, j) = av(i, j) - lz;
  }
  int id = record("masked_row_log_softmax", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, mi, id, n, m](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& ls = t.val(id);
    const Tensor& mk2 = t.val(mi);
    Tensor& ga = t.grad_accum(ai);
    for (std::size_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        if (mk2(i, j) != 0.0) gsum += g(i, j);
      for (std::size_t j = 0; j < m; ++j)
        if (mk2(i, j) != 0.0) ga(i, j) += g(i, j) - std::exp(ls(i, j)) * gsum;
    }
  };
  return wrap(id);
}

// ---- pairwise distances ----

Var Tape::pairwise_sqdist(Var a) {
  int ai = check_var(a);
  const Tensor& av = val(ai);
  if (av.rank() != 2) throw ShapeError("pairwise_sqdist requires a rank-2 tensor");
  std::size_t n = av.rows(), d = av.cols();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = av(i, k) - av(j, k);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  }
  int id = record("pairwise_sqdist", std::move(out), {});
  nodes_[static_cast<std::size_t>(id)].backprop = [ai, id, n, d](Tape& t) {
    const Tensor& g = t.val_grad(id);
    const Tensor& x = t.val(ai);
    Tensor& ga = t.grad_accum(ai);
    // dX = 2 (diag(H 1) X - H X) with H = G + G^T
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t q = 0; q < n; ++q) {
        double h = g(i, q) + g(q, i);
        if (h == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) {
          ga(i, k) += 2.0 * h * (x(i, k) - x(q, k));
        }
      }
    }
  };
  return wrap(id);
}

// ---- finite differences ----

double finite_diff_check(const GradFn& f, std::span<const double> x, double step) {
  if (!(step > 0.0)) throw DomainError("finite_diff_check: step must be positive");
  std::vector<double> base(x.begin(), x.end());
  std::vector<double> ad(x.size(), 0.0);
  double f0 = f(base, ad);
  if (!std::isfinite(f0)) throw EvaluationError("finite_diff_check: function value is not finite");
  std::vector<double> probe(base);
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    probe[i] = base[i] + step;
    double fp = f(probe, {});
    probe[i] = base[i] - step;
    double fm = f(probe, {});
    probe[i] = base[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw EvaluationError("finite_diff_check: function value is not finite near x");
    }
    double cd = (fp - fm) / (2.0 * step);
    double rel = std::abs(ad[i] - cd) / std::max(std::abs(cd), 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace lgi::ad
