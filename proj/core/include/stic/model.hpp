#ifndef STIC_MODEL_HPP
#define STIC_MODEL_HPP

#include <string>
#include <utility>
#include <vector>

#include "stic/ops.hpp"
#include "stic/rng.hpp"
#include "stic/tensor.hpp"

namespace stic {

enum class ArchKind { kMlp, kCnn };

/// Architecture description, round-trippable through the checkpoint format.
/// `hidden` holds dense widths for MLPs and conv channel counts for CNNs.
struct ModelSpec {
  ArchKind kind = ArchKind::kMlp;
  Shape input_shape;
  std::vector<int> hidden;
  int num_real_classes = 2;
  bool with_score_head = false;

  std::string describe() const;
  static ModelSpec parse(const std::string& descriptor);

  std::int64_t input_numel() const { return shape_numel(input_shape); }
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Values produced by one recorded forward pass. `conv_maps[L]` is the layer-L
/// activation matrix with one row per filter and one column per spatial
/// position; empty for MLPs.
struct ForwardTrace {
  Tensor logits;
  std::vector<Tensor> conv_maps;
  Tensor penultimate;
};

/// Classifier over C real classes plus one fake class (index C). Dense and
/// conv parameters are Glorot-uniform initialized from the provided rng;
/// biases start at zero. No normalization layers anywhere, so outputs are
/// deterministic functions of the input.
class ClassifierModel {
 public:
  ClassifierModel(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  int num_real_classes() const { return spec_.num_real_classes; }
  int fake_class_index() const { return spec_.num_real_classes; }
  int num_logits() const { return spec_.num_real_classes + 1; }
  bool has_score_head() const { return spec_.with_score_head; }

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  Tensor param(const std::string& name) const;

  /// Records logits, per-conv-block activation matrices, and the penultimate
  /// vector in a single graph so a combined objective backpropagates once.
  ForwardTrace forward_trace(const Tensor& x) const;

  Tensor forward_logits(const Tensor& x) const;

  /// F matrices for the selected conv blocks (0-based, 0 = shallowest).
  /// Rejects MLPs and out-of-range selections: the Gram regularizer is
  /// defined on conv maps only.
  std::vector<Tensor> feature_maps(const Tensor& x, const std::vector<int>& layers) const;

  /// Sum_c t_c * log softmax(logits)_c for a distribution t over C+1 classes.
  Tensor log_cond(const Tensor& x, const Tensor& target) const;

  /// logits[c] and logsumexp(logits): the class-conditional and marginal
  /// log-densities up to the shared log-partition.
  Tensor unnorm_log_joint(const Tensor& x, int c) const;
  Tensor unnorm_log_marginal(const Tensor& x) const;

  /// Score-head output, shaped like the input. Rejected unless the model was
  /// built with a score head.
  Tensor score(const Tensor& x) const;

  Tensor penultimate_features(const Tensor& x) const;

  int conv_block_count() const;
  /// Default Gram layer selection: the two deepest conv blocks (all of them
  /// if fewer exist, none for MLPs).
  std::vector<int> gram_layers_default() const;

  void zero_grads();

 private:
  Tensor dense(const std::string& prefix, const Tensor& x_vec) const;

  ModelSpec spec_;
  std::vector<NamedParam> params_;
};

/// One-hot distribution over C+1 classes as a constant tensor.
Tensor one_hot(int index, int num_classes);

}  // namespace stic

#endif  // STIC_MODEL_HPP
