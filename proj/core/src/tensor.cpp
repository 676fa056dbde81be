#include "stic/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace stic {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace detail {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::vector<double>& GradTable::at(const TensorNode* node) {
  auto& buf = buffers_[node];
  if (buf.empty()) buf.assign(node->values.size(), 0.0);
  return buf;
}

}  // namespace detail

static std::shared_ptr<detail::TensorNode> make_leaf(const Shape& shape,
                                                     std::vector<double> values,
                                                     bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension in " + shape_str(shape));
  }
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw std::invalid_argument("tensor: data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = shape;
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->id = detail::next_node_id();
  return node;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape_numel(shape), value), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(values), requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::numel() const { return node_->numel(); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::data() const { return node_->values; }

std::span<double> Tensor::mutable_data() { return node_->values; }

double Tensor::value() const {
  if (numel() != 1) {
    throw std::invalid_argument("value(): tensor of shape " + shape_str(shape()) +
                                " is not a scalar");
  }
  return node_->values[0];
}

double Tensor::at(std::int64_t index) const { return node_->values.at(index); }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(make_leaf(node_->shape, node_->values, false));
}

namespace {

// Reachable subgraph from the root, ordered by decreasing creation id.
std::vector<detail::TensorNode*> reverse_schedule(const Tensor& root) {
  std::vector<detail::TensorNode*> order;
  std::unordered_set<const detail::TensorNode*> seen;
  std::vector<detail::TensorNode*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    detail::TensorNode* node = stack.back();
    stack.pop_back();
    order.push_back(node);
    for (const auto& parent : node->parents) {
      if (seen.insert(parent.get()).second) stack.push_back(parent.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::TensorNode* a, const detail::TensorNode* b) { return a->id > b->id; });
  return order;
}

void sweep(const Tensor& root, detail::GradTable& table,
           const std::vector<detail::TensorNode*>& order) {
  table.at(root.node().get())[0] = 1.0;
  for (detail::TensorNode* node : order) {
    if (!node->backprop || !table.contains(node)) continue;
    node->backprop(table.at(node), table);
  }
}

}  // namespace

void backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                (root.defined() ? shape_str(root.shape()) : std::string("<empty>")));
  }
  auto order = reverse_schedule(root);
  detail::GradTable table;
  sweep(root, table, order);
  for (detail::TensorNode* node : order) {
    if (node->backprop || !node->requires_grad || !table.contains(node)) continue;
    const auto& buf = table.at(node);
    if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
    for (std::size_t i = 0; i < buf.size(); ++i) node->grad[i] += buf[i];
  }
}

InputGradient grad_wrt_input(const Tensor& root, const Tensor& input) {
  if (!root.defined() || root.numel() != 1) {
    throw std::invalid_argument("grad_wrt_input: root must be a scalar, got shape " +
                                (root.defined() ? shape_str(root.shape()) : std::string("<empty>")));
  }
  auto order = reverse_schedule(root);
  detail::GradTable table;
  sweep(root, table, order);
  InputGradient result;
  const detail::TensorNode* target = input.node().get();
  if (table.contains(target)) {
    result.grad = Tensor::from(input.shape(), table.at(target));
    result.connected = true;
  } else {
    result.grad = Tensor::zeros(input.shape());
    result.connected = false;
  }
  return result;
}

}  // namespace stic
