#ifndef STIC_ATTENTIVE_HPP
#define STIC_ATTENTIVE_HPP

#include <vector>

#include "stic/dataset.hpp"
#include "stic/model.hpp"
#include "stic/trainer.hpp"

namespace stic {

/// Row-stochastic bank of `rows` 1-D Gaussian filters over `cols` positions.
/// `center`, `stride` and `log_variance` are scalar tensors (numel 1) and may
/// carry gradients; filter i is centred at center + (i - rows/2 + 0.5)*stride
/// and each row is normalized with a softmax, so rows sum to 1 exactly.
Tensor gaussian_filterbank(const Tensor& center, const Tensor& stride,
                           const Tensor& log_variance, int rows, int cols);

struct AttentiveConfig {
  Shape input_shape;       // (1, H, W); the reader is single-channel
  int grid = 4;            // filterbank size k, patches are k x k
  int v_width = 32;        // width of the glimpse vector v_t
  int feature_width = 100; // width of the recurrent state / output feature
  int glimpses = 4;        // default steps for encode()
};

/// Glimpse-based image encoder. Each step forms an error image
/// xhat_t = x - sigmoid(xhat_{t-1}), reads k x k attention patches from both
/// x and xhat_t, projects them together with the previous glimpse vector, and
/// feeds the result through an LSTM cell. The final hidden state is the
/// feature vector. Everything is built in-graph, so features are
/// differentiable with respect to both the input image and the parameters.
class AttentiveEncoder {
 public:
  AttentiveEncoder(const AttentiveConfig& config, Rng& rng);

  const AttentiveConfig& config() const { return config_; }

  /// One glimpse: attention placement from v_prev, patch extraction from x
  /// and xhat, projection to the next glimpse vector (width v_width).
  Tensor read(const Tensor& x, const Tensor& xhat, const Tensor& v_prev) const;

  /// Runs `steps` glimpses (steps >= 1) and returns the feature vector,
  /// shape (feature_width).
  Tensor encode(const Tensor& x, int steps) const;
  Tensor encode(const Tensor& x) const { return encode(x, config_.glimpses); }

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  void zero_grads();

 private:
  Tensor param(const std::string& name) const;

  AttentiveConfig config_;
  std::vector<NamedParam> params_;
};

struct DecoderConfig {
  Shape output_shape;      // (C, H, W); H and W must be divisible by 4
  int feature_width = 100;
  int base_channels = 32;  // channels at the 1/4-resolution stage
};

/// Feature-to-image decoder: dense layer to a (base_channels, H/4, W/4)
/// block, then two stride-2 transposed convolutions, tanh output in [-1,1].
class Decoder {
 public:
  Decoder(const DecoderConfig& config, Rng& rng);

  const DecoderConfig& config() const { return config_; }

  Tensor decode(const Tensor& f) const;

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  void zero_grads();

 private:
  DecoderConfig config_;
  std::vector<NamedParam> params_;
};

struct FeatureSampleResult {
  Tensor feature;
  bool failed = false;             // non-finite gradient encountered
  std::vector<double> log_cond;    // log p(target|f) before each step + final
};

/// Langevin ascent on log p(y_c|f) in feature space: f' = f + eps_f * grad +
/// N(0, eps3^2). No style term (features are vectors, not conv maps) and no
/// clipping. steps = 0 returns f0 unchanged. Model parameters are never
/// touched.
FeatureSampleResult feature_sample(const ClassifierModel& classifier, const Tensor& f0,
                                   int target_class, double eps_f, double eps3, int steps,
                                   Rng& rng);

struct AttentiveTrainConfig {
  int recon_iterations = 300;  // autoencoder warm-up steps
  int recon_batch = 16;
  double recon_lr = 1e-3;
  TrainConfig classifier;      // recurrent training over the feature dataset
};

struct AttentiveTrainResult {
  std::vector<double> recon_loss;  // squared-error per warm-up iteration
  Dataset features;                // encoded dataset fed to the classifier
  TrainResult classifier_run;
};

/// Two-phase pipeline: (1) reconstruction warm-up of encoder + decoder on
/// real images; (2) encode the dataset and run the recurrent classifier
/// training over the resulting feature vectors. Sampling then happens in
/// feature space and images come back through decode().
AttentiveTrainResult attentive_train(AttentiveEncoder& encoder, Decoder& decoder,
                                     ClassifierModel& feature_classifier,
                                     const AttentiveTrainConfig& config, const Dataset& data,
                                     Rng rng);

/// Encodes every sample of `data` (after the usual pixel preprocessing, no
/// noise) into a feature dataset with the same labels.
Dataset encode_dataset(const AttentiveEncoder& encoder, const Dataset& data);

}  // namespace stic

#endif  // STIC_ATTENTIVE_HPP
