#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lgi/errors.hpp"

namespace lgi::ad {

/// Dense row-major tensor of doubles. Rank 1 ({n}) and rank 2 ({r, c}) are
/// used throughout; scalars are {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1; }
  double scalar_value() const;

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to one node on a tape.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
};

/// Reverse-mode automatic differentiation over an append-only list of tensor
/// operations. Forward values are cached per node; backward() visits nodes
/// once in reverse order and accumulates adjoints into every reachable input.
///
/// A tape is single-threaded; distinct tapes are independent.
class Tape {
 public:
  /// With check_finite, every recorded value is scanned for NaN/Inf and a
  /// violation raises EvaluationError naming the operation.
  explicit Tape(bool check_finite = true);

  /// Differentiable input node.
  Var leaf(Tensor value);
  /// Input node whose adjoint is never consumed (masks, data matrices).
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  /// Adjoint of a node; valid after backward(). Zero for nodes off the path.
  const Tensor& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(output)/d(output) = 1 and runs the chain rule to all inputs.
  /// `output` must be scalar-shaped (ShapeError otherwise).
  void backward(Var output);

  // Elementwise arithmetic. Operands must share a shape, except that a
  // scalar operand broadcasts against any shape.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  /// a*x + b with double constants.
  Var affine(Var x, double a, double b);

  Var matmul(Var a, Var b);
  Var transpose(Var a);

  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);    // {n,m} -> {n,1}
  Var norm2(Var a);      // Frobenius norm -> {1}
  Var row_norm2(Var a);  // {n,m} -> {n,1}

  Var sqrt_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var tanh_(Var a);
  Var tan_(Var a);
  Var sin_(Var a);
  Var cos_(Var a);
  Var sinh_(Var a);
  Var cosh_(Var a);
  /// arccos with input clamped to [-1, 1]; zero gradient where clamped.
  Var arccos_clamped(Var a);
  /// arccosh with input clamped to >= 1; zero gradient where clamped.
  Var arccosh_clamped(Var a);
  /// arccosh(1 + u) computed as 2 asinh(sqrt(u/2)): keeps precision for tiny
  /// u. Inputs <= 0 map to 0 with zero gradient.
  Var arccosh1p(Var a);
  /// arccos(1 - u) computed as 2 asin(sqrt(u/2)) with u clamped to [0, 2];
  /// zero gradient where clamped.
  Var arccos1m(Var a);
  Var softplus(Var a);
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  /// Elementwise clamp to [lo, hi]; zero gradient outside the open interval.
  Var clamp(Var a, double lo, double hi);

  /// Tiles {1}, {n,1} or {1,m} up to `shape`; adjoint sums over tiled axes.
  Var broadcast(Var a, std::vector<std::size_t> shape);

  Var row_softmax(Var a);
  Var row_log_softmax(Var a);
  /// Row softmax over entries where mask != 0; masked entries yield 0 output
  /// and receive zero gradient. Mask shape must equal the input shape.
  Var masked_row_softmax(Var a, const Tensor& mask);
  Var masked_row_log_softmax(Var a, const Tensor& mask);

  Var concat_cols(std::span<const Var> parts);
  std::vector<Var> split_cols(Var a, std::span<const int> widths);

  /// {n,d} -> {n,n} matrix of squared Euclidean row distances.
  Var pairwise_sqdist(Var a);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool seeded = false;
    std::function<void(Tape&)> backprop;  // empty for inputs
    const char* op = "";
  };

  int record(const char* op, Tensor value, std::function<void(Tape&)> backprop);
  Var wrap(int id) { return Var{id, this}; }
  int check_var(Var v) const;  // validates handle, returns id
  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& val_grad(int id) const;
  Tensor& grad_accum(int id);
  Var binary_(Var a, Var b, int kind);
  Var unary_(Var a, const char* op, double (*fwd)(double), double (*bwd)(double, double));

  std::vector<Node> nodes_;
  bool check_finite_;
};

/// Evaluates a scalar function; when grad_out is nonempty it must match x in
/// length and receives the reverse-mode gradient.
using GradFn = std::function<double(std::span<const double> x, std::span<double> grad_out)>;

/// Max over coordinates of |autodiff grad - central difference| /
/// max(|central difference|, 1e-8). Non-finite evaluations near x raise
/// EvaluationError.
double finite_diff_check(const GradFn& f, std::span<const double> x, double step);

}  // namespace lgi::ad
