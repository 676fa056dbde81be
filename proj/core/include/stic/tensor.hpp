#ifndef STIC_TENSOR_HPP
#define STIC_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stic {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode;

/// Per-sweep gradient scratch, keyed by node. Buffers are zeroed on first
/// touch and the table never outlives its sweep, which is what keeps sampling
/// gradients away from the persistent leaf accumulators.
class GradTable {
 public:
  std::vector<double>& at(const TensorNode* node);
  bool contains(const TensorNode* node) const { return buffers_.count(node) != 0; }

 private:
  std::unordered_map<const TensorNode*, std::vector<double>> buffers_;
};

/// One recorded value in the define-by-run graph. Nodes created by an op hold
/// their parents and a closure that routes an upstream gradient to them; leaf
/// nodes have neither. Creation order (`id`) is execution order, and backward
/// processes nodes in decreasing id, so every consumer has contributed to a
/// node's gradient before that node propagates it.
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // leaf accumulator, sized on first write
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const std::vector<double>& upstream, GradTable& table)> backprop;

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
};

std::uint64_t next_node_id();

}  // namespace detail

/// Dense 64-bit float tensor with reverse-mode autodiff. Value-semantic
/// handle: copies share the underlying node. Recorded values are never
/// mutated; each forward pass builds a fresh graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  /// Mutable access to a leaf's storage (parameter updates between graphs).
  /// Calling this on an op result would invalidate recorded state.
  std::span<double> mutable_data();

  double value() const;                  // scalar tensors only
  double at(std::int64_t index) const;   // flat row-major index

  /// Accumulated gradient of a leaf; empty span until backward has written it.
  std::span<const double> grad() const;
  void zero_grad();

  /// Value copy detached from the graph (no parents, no grad requirement).
  Tensor detach() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Reverse-mode sweep from a scalar root. Accumulates into the `grad` buffer
/// of every reachable leaf that requires grad. Rejects non-scalar roots.
void backward(const Tensor& root);

struct InputGradient {
  Tensor grad;            // same shape as the input
  bool connected = true;  // false when the input did not reach the root
};

/// Gradient of a scalar with respect to one tensor in its graph, without
/// touching the persistent `grad` of any leaf (model parameters included).
/// A disconnected input yields a zero tensor with `connected = false`.
InputGradient grad_wrt_input(const Tensor& root, const Tensor& input);

}  // namespace stic

#endif  // STIC_TENSOR_HPP
