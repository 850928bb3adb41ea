#include "kdqa/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

#include "kdqa/error.hpp"

namespace kdqa {

namespace {

thread_local bool g_grad_enabled = true;

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw InvalidState("use of an undefined tensor");
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::uint64_t next_node_id() noexcept {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->id = next_node_id();
  node->op = op;
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) any = any || in.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw InvalidArgument("tensor shape " + shape_str(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
  node_->id = detail::next_node_id();
  if (requires_grad) node_->grad.assign(node_->values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw InvalidArgument("axis out of range for shape " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).values.size(); }

std::span<const double> Tensor::values() const { return checked(node_).values; }

std::span<double> Tensor::mutable_values() {
  checked(node_);
  if (!node_->is_leaf()) throw InvalidState("only leaf tensors may be modified in place");
  return node_->values;
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.values.size() != 1) {
    throw InvalidArgument("item() on tensor of shape " + shape_str(n.shape));
  }
  return n.values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }

bool Tensor::has_grad() const {
  return node_ && node_->requires_grad && node_->grad.size() == node_->values.size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw InvalidState("tensor has no gradient buffer");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!has_grad()) throw InvalidState("tensor has no gradient buffer");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && node_->requires_grad) node_->grad.assign(node_->values.size(), 0.0);
}

std::uint64_t Tensor::id() const { return checked(node_).id; }

const char* Tensor::op() const { return checked(node_).op; }

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.values, false);
}

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.values, requires_grad);
}

namespace {

// Iterative DFS post-order over nodes that require a gradient.
std::vector<detail::Node*> topo_order(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  if (!root->requires_grad) return order;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

std::vector<GradRecord> record_graph(const Tensor& loss) {
  std::vector<GradRecord> records;
  for (detail::Node* node : topo_order(loss.node().get())) {
    if (node->is_leaf()) continue;
    GradRecord r;
    r.op = node->op;
    r.output = node->id;
    for (const auto& in : node->inputs) r.inputs.push_back(in->id);
    records.push_back(std::move(r));
  }
  return records;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw InvalidArgument("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw InvalidArgument("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  auto order = topo_order(loss.node().get());
  for (detail::Node* node : order) {
    if (node->is_leaf()) {
      node->ensure_grad();
    } else {
      node->grad.assign(node->values.size(), 0.0);
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    for (const auto& in : node->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    node->backward_fn(*node);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

}  // namespace kdqa
