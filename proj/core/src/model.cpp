#include "stic/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stic {

namespace {

std::string join_ints(const std::vector<int>& v, char sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    os << v[i];
  }
  return os.str();
}

std::vector<int> split_ints(const std::string& s, char sep) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, sep)) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return random_uniform(shape, rng, -a, a, /*requires_grad=*/true);
}

// Spatial size after one 3x3 stride-2 pad-1 conv block.
int halved(int side) { return (side + 2 - 3) / 2 + 1; }

}  // namespace

std::string ModelSpec::describe() const {
  std::ostringstream os;
  if (kind == ArchKind::kMlp) {
    os << "mlp in=" << input_shape.at(0) << " hidden=" << join_ints(hidden, ',');
  } else {
    os << "cnn in=" << input_shape.at(0) << 'x' << input_shape.at(1) << 'x' << input_shape.at(2)
       << " conv=" << join_ints(hidden, ',');
  }
  os << " classes=" << num_real_classes << " score=" << (with_score_head ? 1 : 0);
  return os.str();
}

ModelSpec ModelSpec::parse(const std::string& descriptor) {
  std::istringstream is(descriptor);
  std::string head;
  is >> head;
  ModelSpec spec;
  if (head == "mlp") {
    spec.kind = ArchKind::kMlp;
  } else if (head == "cnn") {
    spec.kind = ArchKind::kCnn;
  } else {
    throw std::invalid_argument("model descriptor: unknown architecture '" + head + "'");
  }
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("model descriptor: malformed token '" + tok + "'");
    }
    std::string key = tok.substr(0, eq);
    std::string val = tok.substr(eq + 1);
    if (key == "in") {
      spec.input_shape = Shape{};
      for (int d : split_ints(val, 'x')) spec.input_shape.push_back(d);
    } else if (key == "hidden" || key == "conv") {
      spec.hidden = split_ints(val, ',');
    } else if (key == "classes") {
      spec.num_real_classes = std::stoi(val);
    } else if (key == "score") {
      spec.with_score_head = val != "0";
    } else {
      throw std::invalid_argument("model descriptor: unknown key '" + key + "'");
    }
  }
  return spec;
}

ClassifierModel::ClassifierModel(const ModelSpec& spec, Rng& rng) : spec_(spec) {
  if (spec_.num_real_classes < 1) {
    throw std::invalid_argument("model: need at least one real class");
  }
  if (spec_.hidden.empty()) {
    throw std::invalid_argument("model: need at least one hidden layer");
  }
  const int out_classes = num_logits();
  std::int64_t penultimate_width = 0;

  if (spec_.kind == ArchKind::kMlp) {
    if (spec_.input_shape.size() != 1) {
      throw std::invalid_argument("model: mlp input must be rank 1, got " +
                                  shape_str(spec_.input_shape));
    }
    int in = spec_.input_shape[0];
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
      int out = spec_.hidden[i];
      std::string prefix = "dense" + std::to_string(i);
      params_.push_back({prefix + ".weight", glorot_uniform({out, in}, in, out, rng)});
      params_.push_back({prefix + ".bias", Tensor::zeros({out}, true)});
      in = out;
    }
    penultimate_width = in;
  } else {
    if (spec_.input_shape.size() != 3) {
      throw std::invalid_argument("model: cnn input must be rank 3 (C, H, W), got " +
                                  shape_str(spec_.input_shape));
    }
    int cin = spec_.input_shape[0];
    int h = spec_.input_shape[1], w = spec_.input_shape[2];
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
      int cout = spec_.hidden[i];
      std::string prefix = "conv" + std::to_string(i);
      params_.push_back(
          {prefix + ".weight", glorot_uniform({cout, cin, 3, 3}, cin * 9, cout * 9, rng)});
      params_.push_back({prefix + ".bias", Tensor::zeros({cout}, true)});
      cin = cout;
      h = halved(h);
      w = halved(w);
      if (h < 1 || w < 1) {
        throw std::invalid_argument("model: input too small for conv stack");
      }
    }
    penultimate_width = static_cast<std::int64_t>(cin) * h * w;
  }

  int pw = static_cast<int>(penultimate_width);
  params_.push_back({"head.weight", glorot_uniform({out_classes, pw}, pw, out_classes, rng)});
  params_.push_back({"head.bias", Tensor::zeros({out_classes}, true)});
  if (spec_.with_score_head) {
    int in_dim = static_cast<int>(spec_.input_numel());
    params_.push_back({"score.weight", glorot_uniform({in_dim, pw}, pw, in_dim, rng)});
    params_.push_back({"score.bias", Tensor::zeros({in_dim}, true)});
  }
}

Tensor ClassifierModel::param(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::invalid_argument("model: no parameter named '" + name + "'");
}

Tensor ClassifierModel::dense(const std::string& prefix, const Tensor& x_vec) const {
  Tensor w = param(prefix + ".weight");
  Tensor b = param(prefix + ".bias");
  Tensor col = reshape(x_vec, {static_cast<int>(x_vec.numel()), 1});
  Tensor out = reshape(matmul(w, col), {w.shape()[0]});
  return add(out, b);
}

ForwardTrace ClassifierModel::forward_trace(const Tensor& x) const {
  if (x.shape() != spec_.input_shape) {
    throw std::invalid_argument("model: input shape " + shape_str(x.shape()) +
                                " does not match expected " + shape_str(spec_.input_shape));
  }
  ForwardTrace trace;
  if (spec_.kind == ArchKind::kMlp) {
    Tensor h = x;
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
      h = relu(dense("dense" + std::to_string(i), h));
    }
    trace.penultimate = h;
  } else {
    Tensor t = x;
    for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
      std::string prefix = "conv" + std::to_string(i);
      t = relu(conv2d(t, param(prefix + ".weight"), param(prefix + ".bias"), /*stride=*/2,
                      /*padding=*/1));
      const Shape& s = t.shape();
      trace.conv_maps.push_back(reshape(t, {s[0], s[1] * s[2]}));
    }
    trace.penultimate = reshape(t, {static_cast<int>(t.numel())});
  }
  trace.logits = dense("head", trace.penultimate);
  return trace;
}

Tensor ClassifierModel::forward_logits(const Tensor& x) const { return forward_trace(x).logits; }

std::vector<Tensor> ClassifierModel::feature_maps(const Tensor& x,
                                                  const std::vector<int>& layers) const {
  if (spec_.kind != ArchKind::kCnn) {
    throw std::invalid_argument(
        "feature_maps: model has no conv blocks (Gram terms need conv feature maps)");
  }
  ForwardTrace trace = forward_trace(x);
  std::vector<Tensor> out;
  for (int layer : layers) {
    if (layer < 0 || layer >= static_cast<int>(trace.conv_maps.size())) {
      throw std::invalid_argument("feature_maps: layer " + std::to_string(layer) +
                                  " out of range, model has " +
                                  std::to_string(trace.conv_maps.size()) + " conv blocks");
    }
    out.push_back(trace.conv_maps[layer]);
  }
  return out;
}

Tensor ClassifierModel::log_cond(const Tensor& x, const Tensor& target) const {
  return scalar_mul(cross_entropy_soft(forward_logits(x), target), -1.0);
}

Tensor ClassifierModel::unnorm_log_joint(const Tensor& x, int c) const {
  if (c < 0 || c >= num_logits()) {
    throw std::invalid_argument("unnorm_log_joint: class " + std::to_string(c) +
                                " out of range for " + std::to_string(num_logits()) + " logits");
  }
  Tensor logits = forward_logits(x);
  return sum(mul(logits, one_hot(c, num_logits())));
}

Tensor ClassifierModel::unnorm_log_marginal(const Tensor& x) const {
  return logsumexp(forward_logits(x), 0);
}

Tensor ClassifierModel::score(const Tensor& x) const {
  if (!has_score_head()) {
    throw std::invalid_argument("score: model was built without a score head");
  }
  ForwardTrace trace = forward_trace(x);
  Tensor s = dense("score", trace.penultimate);
  return reshape(s, spec_.input_shape);
}

Tensor ClassifierModel::penultimate_features(const Tensor& x) const {
  return forward_trace(x).penultimate;
}

int ClassifierModel::conv_block_count() const {
  return spec_.kind == ArchKind::kCnn ? static_cast<int>(spec_.hidden.size()) : 0;
}

std::vector<int> ClassifierModel::gram_layers_default() const {
  int n = conv_block_count();
  if (n == 0) return {};
  if (n == 1) return {0};
  return {n - 2, n - 1};
}

void ClassifierModel::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor one_hot(int index, int num_classes) {
  if (index < 0 || index >= num_classes) {
    throw std::invalid_argument("one_hot: index " + std::to_string(index) + " out of range for " +
                                std::to_string(num_classes) + " classes");
  }
  std::vector<double> v(num_classes, 0.0);
  v[index] = 1.0;
  return Tensor::from({num_classes}, std::move(v));
}

}  // namespace stic
