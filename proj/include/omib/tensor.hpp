#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace omib {

using Shape = std::vector<std::size_t>;

/// Operand shapes do not fit the operation. The message names the op and shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A forward value or loss became NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of the differentiation graph (non-scalar loss, loss from another tape...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t tape_id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node& self)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles with reverse-mode gradient support.
/// Copies share the underlying node; values produced by ops are immutable.
/// Rank 0, 1 and 2 are supported; rank-1 tensors of length n behave as 1 x n
/// rows wherever a matrix view is needed.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Write access for parameter initialization and optimizer updates.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, cut from any graph, no gradient.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records the ops executed while it is the innermost active tape on this
/// thread. One tape per training step; destroying it releases the graph.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Populates gradients of every requires-grad tensor reachable from `loss`.
  /// Leaf gradients accumulate across calls until zero_grad().
  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t id() const { return id_; }

  static Tape* active();
  void record(std::shared_ptr<detail::Node> node);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::uint64_t id_;
  Tape* previous_;
};

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

namespace detail {

using BackwardFn = std::function<void(Node& self)>;

/// Builds an op output. The node is recorded (and `backward` kept) only when a
/// tape is active and some parent requires grad. Throws NumericError if any
/// value is non-finite.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, BackwardFn backward);

}  // namespace detail

}  // namespace omib
