#include "stic/attentive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stic/ops.hpp"

namespace stic {

namespace {

Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return random_uniform(shape, rng, -a, a, /*requires_grad=*/true);
}

// W z + b for a rank-1 z.
Tensor affine(const Tensor& w, const Tensor& b, const Tensor& z) {
  int in = static_cast<int>(z.numel());
  int out = w.shape().at(0);
  Tensor col = matmul(w, reshape(z, {in, 1}));
  return add(reshape(col, {out}), b);
}

Tensor component(const Tensor& v, std::int64_t index) {
  std::vector<double> mask(v.numel(), 0.0);
  mask[index] = 1.0;
  return sum(mul(v, Tensor::from(v.shape(), std::move(mask))));
}

Tensor ones_row(int n) { return Tensor::full({1, n}, 1.0); }
Tensor ones_col(int n) { return Tensor::full({n, 1}, 1.0); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Tensor gaussian_filterbank(const Tensor& center, const Tensor& stride,
                           const Tensor& log_variance, int rows, int cols) {
  if (center.numel() != 1 || stride.numel() != 1 || log_variance.numel() != 1) {
    throw std::invalid_argument("gaussian_filterbank: placement inputs must be scalar tensors");
  }
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("gaussian_filterbank: rows and cols must be positive");
  }
  std::vector<double> off(rows);
  for (int i = 0; i < rows; ++i) off[i] = i - rows / 2.0 + 0.5;
  Tensor offsets = Tensor::from({rows, 1}, std::move(off));

  std::vector<double> pos(cols);
  for (int a = 0; a < cols; ++a) pos[a] = a;
  Tensor grid = Tensor::from({1, cols}, std::move(pos));

  Tensor mu = add(mul(offsets, stride), center);                    // (rows, 1)
  Tensor diff = sub(matmul(mu, ones_row(cols)), matmul(ones_col(rows), grid));
  Tensor precision = exp(scalar_mul(log_variance, -1.0));
  Tensor arg = scalar_mul(mul(square(diff), precision), -0.5);
  return softmax(arg, 1);
}

AttentiveEncoder::AttentiveEncoder(const AttentiveConfig& config, Rng& rng) : config_(config) {
  if (config_.input_shape.size() != 3 || config_.input_shape[0] != 1) {
    throw std::invalid_argument("attentive encoder: input shape must be (1, H, W)");
  }
  if (config_.grid < 1 || config_.v_width < 1 || config_.feature_width < 1 ||
      config_.glimpses < 1) {
    throw std::invalid_argument("attentive encoder: grid, v_width, feature_width and glimpses "
                                "must be positive");
  }
  int k = config_.grid;
  int vw = config_.v_width;
  int fw = config_.feature_width;
  int read_in = 2 * k * k + vw;
  int cell_in = vw + fw;

  params_.push_back({"read.place.weight", glorot_uniform({4, vw}, vw, 4, rng)});
  params_.push_back({"read.place.bias", Tensor::zeros({4}, true)});
  params_.push_back({"read.proj.weight", glorot_uniform({vw, read_in}, read_in, vw, rng)});
  params_.push_back({"read.proj.bias", Tensor::zeros({vw}, true)});
  for (const char* gate : {"input", "forget", "output", "cell"}) {
    params_.push_back({std::string("lstm.") + gate + ".weight",
                       glorot_uniform({fw, cell_in}, cell_in, fw, rng)});
    params_.push_back({std::string("lstm.") + gate + ".bias", Tensor::zeros({fw}, true)});
  }
}

Tensor AttentiveEncoder::param(const std::string& name) const {
  for (const NamedParam& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::logic_error("attentive encoder: missing parameter " + name);
}

Tensor AttentiveEncoder::read(const Tensor& x, const Tensor& xhat, const Tensor& v_prev) const {
  if (x.shape() != config_.input_shape || xhat.shape() != config_.input_shape) {
    throw std::invalid_argument("attentive read: image shape mismatch, expected " +
                                shape_str(config_.input_shape));
  }
  if (v_prev.shape() != Shape{config_.v_width}) {
    throw std::invalid_argument("attentive read: glimpse vector must have width " +
                                std::to_string(config_.v_width));
  }
  int h = config_.input_shape[1];
  int w = config_.input_shape[2];
  int k = config_.grid;

  Tensor placement = affine(param("read.place.weight"), param("read.place.bias"), v_prev);
  Tensor one = Tensor::scalar(1.0);
  Tensor gx = scalar_mul(add(tanh(component(placement, 0)), one), 0.5 * (w - 1));
  Tensor gy = scalar_mul(add(tanh(component(placement, 1)), one), 0.5 * (h - 1));
  double span = static_cast<double>(std::max(h, w) - 1) / std::max(k - 1, 1);
  Tensor stride = scalar_mul(exp(component(placement, 2)), span);
  Tensor log_var = component(placement, 3);

  Tensor fx = gaussian_filterbank(gx, stride, log_var, k, w);
  Tensor fy = gaussian_filterbank(gy, stride, log_var, k, h);

  Tensor patch_x = reshape(matmul(matmul(fy, reshape(x, {h, w})), transpose(fx)), {k * k});
  Tensor patch_e = reshape(matmul(matmul(fy, reshape(xhat, {h, w})), transpose(fx)), {k * k});
  Tensor z = concat({patch_x, patch_e, v_prev}, 0);
  return tanh(affine(param("read.proj.weight"), param("read.proj.bias"), z));
}

Tensor AttentiveEncoder::encode(const Tensor& x, int steps) const {
  if (steps < 1) throw std::invalid_argument("attentive encode: steps must be >= 1");
  Tensor xhat = Tensor::zeros(config_.input_shape);
  Tensor v = Tensor::zeros({config_.v_width});
  Tensor h = Tensor::zeros({config_.feature_width});
  Tensor c = Tensor::zeros({config_.feature_width});
  for (int t = 0; t < steps; ++t) {
    xhat = sub(x, sigmoid(xhat));
    v = read(x, xhat, v);
    Tensor z = concat({v, h}, 0);
    Tensor gi = sigmoid(affine(param("lstm.input.weight"), param("lstm.input.bias"), z));
    Tensor gf = sigmoid(affine(param("lstm.forget.weight"), param("lstm.forget.bias"), z));
    Tensor go = sigmoid(affine(param("lstm.output.weight"), param("lstm.output.bias"), z));
    Tensor gc = tanh(affine(param("lstm.cell.weight"), param("lstm.cell.bias"), z));
    c = add(mul(gf, c), mul(gi, gc));
    h = mul(go, tanh(c));
  }
  return h;
}

void AttentiveEncoder::zero_grads() {
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

Decoder::Decoder(const DecoderConfig& config, Rng& rng) : config_(config) {
  if (config_.output_shape.size() != 3) {
    throw std::invalid_argument("decoder: output shape must be (C, H, W)");
  }
  int h = config_.output_shape[1];
  int w = config_.output_shape[2];
  if (h % 4 != 0 || w % 4 != 0) {
    throw std::invalid_argument("decoder: H and W must be divisible by 4, got " +
                                shape_str(config_.output_shape));
  }
  if (config_.feature_width < 1 || config_.base_channels < 2) {
    throw std::invalid_argument("decoder: feature_width must be >= 1 and base_channels >= 2");
  }
  int c0 = config_.base_channels;
  int c1 = c0 / 2;
  int cout = config_.output_shape[0];
  int dense_out = c0 * (h / 4) * (w / 4);
  int fw = config_.feature_width;

  params_.push_back({"decoder.dense.weight", glorot_uniform({dense_out, fw}, fw, dense_out, rng)});
  params_.push_back({"decoder.dense.bias", Tensor::zeros({dense_out}, true)});
  params_.push_back(
      {"decoder.deconv0.weight", glorot_uniform({c0, c1, 4, 4}, c0 * 16, c1 * 16, rng)});
  params_.push_back({"decoder.deconv0.bias", Tensor::zeros({c1}, true)});
  params_.push_back(
      {"decoder.deconv1.weight", glorot_uniform({c1, cout, 4, 4}, c1 * 16, cout * 16, rng)});
  params_.push_back({"decoder.deconv1.bias", Tensor::zeros({cout}, true)});
}

Tensor Decoder::decode(const Tensor& f) const {
  if (f.shape() != Shape{config_.feature_width}) {
    throw std::invalid_argument("decoder: feature must have width " +
                                std::to_string(config_.feature_width) + ", got " +
                                shape_str(f.shape()));
  }
  int c0 = config_.base_channels;
  int h4 = config_.output_shape[1] / 4;
  int w4 = config_.output_shape[2] / 4;
  Tensor hidden = relu(affine(params_[0].tensor, params_[1].tensor, f));
  Tensor block = reshape(hidden, {c0, h4, w4});
  Tensor up = relu(conv_transpose2d(block, params_[2].tensor, params_[3].tensor, 2, 1));
  return tanh(conv_transpose2d(up, params_[4].tensor, params_[5].tensor, 2, 1));
}

void Decoder::zero_grads() {
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

FeatureSampleResult feature_sample(const ClassifierModel& classifier, const Tensor& f0,
                                   int target_class, double eps_f, double eps3, int steps,
                                   Rng& rng) {
  if (steps < 0) throw std::invalid_argument("feature_sample: steps must be >= 0");
  if (eps3 < 0.0) throw std::invalid_argument("feature_sample: eps3 must be >= 0");
  if (target_class < 0 || target_class >= classifier.num_logits()) {
    throw std::invalid_argument("feature_sample: target class out of range");
  }
  Tensor target = one_hot(target_class, classifier.num_logits());
  FeatureSampleResult result;
  result.feature = Tensor::from(f0.shape(),
                                std::vector<double>(f0.data().begin(), f0.data().end()));
  for (int t = 0; t < steps; ++t) {
    Tensor leaf = Tensor::from(result.feature.shape(),
                               std::vector<double>(result.feature.data().begin(),
                                                   result.feature.data().end()),
                               /*requires_grad=*/true);
    Tensor obj = classifier.log_cond(leaf, target);
    result.log_cond.push_back(obj.value());
    InputGradient g = grad_wrt_input(obj, leaf);
    if (!std::isfinite(obj.value()) || !all_finite(g.grad.data())) {
      result.failed = true;
      return result;
    }
    std::vector<double> next(leaf.data().begin(), leaf.data().end());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += eps_f * g.grad.at(i);
    if (eps3 > 0.0) {
      for (double& v : next) v += rng.normal(0.0, eps3);
    }
    result.feature = Tensor::from(f0.shape(), std::move(next));
  }
  result.log_cond.push_back(classifier.log_cond(result.feature, target).value());
  return result;
}

Dataset encode_dataset(const AttentiveEncoder& encoder, const Dataset& data) {
  Dataset features;
  features.num_classes = data.num_classes;
  features.labels = data.labels;
  features.sample_shape = {encoder.config().feature_width};
  features.pixel_domain = false;
  features.name = data.name + "-features";
  Rng none(0);
  features.samples.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor x = data.sample_tensor(i);
    if (data.pixel_domain) x = preprocess(x, 0.0, none);
    Tensor f = encoder.encode(x);
    features.samples.emplace_back(f.data().begin(), f.data().end());
  }
  return features;
}

AttentiveTrainResult attentive_train(AttentiveEncoder& encoder, Decoder& decoder,
                                     ClassifierModel& feature_classifier,
                                     const AttentiveTrainConfig& config, const Dataset& data,
                                     Rng rng) {
  data.validate();
  if (config.recon_iterations < 0 || config.recon_batch < 1) {
    throw std::invalid_argument("attentive_train: bad reconstruction settings");
  }
  if (encoder.config().input_shape != data.sample_shape) {
    throw std::invalid_argument("attentive_train: encoder input shape does not match dataset");
  }

  AttentiveTrainResult result;
  Rng batch_rng = rng.fork(0xae01);
  Rng none(0);
  Adam opt;
  std::vector<NamedParam> joint = encoder.parameters();
  joint.insert(joint.end(), decoder.parameters().begin(), decoder.parameters().end());

  result.recon_loss.reserve(config.recon_iterations);
  for (int iter = 0; iter < config.recon_iterations; ++iter) {
    Tensor loss;
    for (int b = 0; b < config.recon_batch; ++b) {
      std::size_t idx = batch_rng.uniform_index(data.size());
      Tensor x = data.sample_tensor(idx);
      if (data.pixel_domain) x = preprocess(x, 0.0, none);
      Tensor recon = decoder.decode(encoder.encode(x));
      Tensor err = mean(square(sub(recon, x)));
      loss = loss.defined() ? add(loss, err) : err;
    }
    loss = scalar_mul(loss, 1.0 / config.recon_batch);
    result.recon_loss.push_back(loss.value());
    backward(loss);
    opt.step(joint, config.recon_lr);
    encoder.zero_grads();
    decoder.zero_grads();
  }

  result.features = encode_dataset(encoder, data);
  result.classifier_run = train(feature_classifier, config.classifier, result.features,
                                rng.fork(0xae02));
  return result;
}

}  // namespace stic
