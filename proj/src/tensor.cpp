#include "omib/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace omib {
namespace {

thread_local Tape* t_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " + std::to_string(n) +
                     " values, got " + std::to_string(values.size()));
  }
  if (shape.size() > 2) throw ShapeError("tensor: rank > 2 is not supported");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({}, {value}, requires_grad));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  std::vector<double> values;
  const std::size_t ncols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& row : rows) {
    if (row.size() != ncols) throw ShapeError("tensor: ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(make_leaf({rows.size(), ncols}, std::move(values), requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.empty()) return 1;
  return s.back();
}

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw GraphError(std::string("grad: no gradient on ") + node_->op + " tensor");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(make_leaf(shape(), node_->value, false)); }

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)), previous_(t_active_tape) { t_active_tape = this; }

Tape::~Tape() {
  t_active_tape = previous_;
  // Break parent links so the graph is freed even if outputs outlive the tape.
  for (auto& node : nodes_) {
    node->backward = nullptr;
    node->parents.clear();
  }
}

Tape* Tape::active() { return t_active_tape; }

void Tape::record(std::shared_ptr<detail::Node> node) {
  node->tape_id = id_;
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward: undefined loss");
  if (loss.numel() != 1) {
    throw GraphError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  detail::Node* root = loss.node();
  if (!root->requires_grad || root->leaf || root->tape_id != id_) {
    throw GraphError("backward: loss was not produced on this tape (detached graph)");
  }
  for (auto& node : nodes_) node->grad.clear();
  root->ensure_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
}

NoGradGuard::NoGradGuard() : saved_(t_active_tape) { t_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { t_active_tape = saved_; }

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, BackwardFn backward) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite output");
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  Tape* tape = Tape::active();
  bool track = false;
  if (tape != nullptr) {
    for (const Tensor& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace omib
