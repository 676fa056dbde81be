#include "stic/settings.hpp"

#include <sstream>
#include <stdexcept>

namespace stic {

namespace {

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(key + ": '" + tok + "' is not an integer");
    }
  }
  return out;
}

void check_range(const std::string& key, double value, double lo, double hi) {
  if (value < lo || value > hi) {
    std::ostringstream os;
    os << key << " = " << value << " outside the documented range [" << lo << ", " << hi << "]";
    throw std::invalid_argument(os.str());
  }
}

std::string require(Config& cfg, const std::string& key) {
  if (!cfg.has(key)) throw std::invalid_argument("missing required config key '" + key + "'");
  return cfg.get_string(key, "");
}

}  // namespace

Dataset dataset_from_config(Config& cfg, const Rng& root) {
  std::string kind = cfg.get_string("dataset", "gaussians");
  std::uint64_t seed = cfg.has("dataset.seed")
                           ? static_cast<std::uint64_t>(cfg.get_int("dataset.seed", 0))
                           : root.fork(0xda7a5eedULL).seed();
  if (kind == "gaussians") {
    int classes = cfg.get_int("dataset.classes", 3);
    int per_class = cfg.get_int("dataset.per_class", 100);
    double spread = cfg.get_double("dataset.spread", 0.2);
    return gen_gaussians_2d(classes, per_class, spread, seed);
  }
  if (kind == "moons") {
    int count = cfg.get_int("dataset.count", 400);
    double noise = cfg.get_double("dataset.noise", 0.05);
    return gen_moons(count, noise, seed);
  }
  if (kind == "shapes") {
    int per_class = cfg.get_int("dataset.per_class", 64);
    int side = cfg.get_int("dataset.side", 8);
    return gen_shapes(per_class, side, seed);
  }
  if (kind == "idx") {
    std::string images = require(cfg, "dataset.images");
    std::string labels = require(cfg, "dataset.labels");
    return read_idx(images, labels);
  }
  throw std::invalid_argument("dataset = '" + kind +
                              "' is not one of gaussians | moons | shapes | idx");
}

ModelSpec model_spec_from_config(Config& cfg, const Dataset& data) {
  ModelSpec spec;
  std::string kind = cfg.get_string("model", data.pixel_domain ? "cnn" : "mlp");
  if (kind == "mlp") {
    spec.kind = ArchKind::kMlp;
    spec.hidden = {32, 32};
  } else if (kind == "cnn") {
    spec.kind = ArchKind::kCnn;
    spec.hidden = {8, 16, 32};
  } else {
    throw std::invalid_argument("model = '" + kind + "' is not one of mlp | cnn");
  }
  if (cfg.has("model.hidden")) {
    spec.hidden = parse_int_list(cfg.get_string("model.hidden", ""), "model.hidden");
  }
  spec.input_shape = data.sample_shape;
  spec.num_real_classes = data.num_classes;
  spec.with_score_head = cfg.get_bool("model.score_head", false);
  return spec;
}

SamplerConfig sampler_from_config(Config& cfg) {
  SamplerConfig sampler;
  sampler.eps1 = cfg.get_double("sampler.eps1", sampler.eps1);
  sampler.eps2 = cfg.get_double("sampler.eps2", sampler.eps2);
  sampler.eps3 = cfg.get_double("sampler.eps3", sampler.eps3);
  check_range("sampler.eps1", sampler.eps1, 0.9, 1.0);
  check_range("sampler.eps2", sampler.eps2, 0.9, 1.0);
  check_range("sampler.eps3", sampler.eps3, 0.01, 0.02);
  sampler.steps = cfg.get_int("sampler.steps", sampler.steps);
  sampler.clip = cfg.get_bool("sampler.clip", sampler.clip);
  if (cfg.has("sampler.layers")) {
    sampler.layers = parse_int_list(cfg.get_string("sampler.layers", ""), "sampler.layers");
  }
  return sampler;
}

TrainConfig train_from_config(Config& cfg) {
  TrainConfig train;
  train.passes = cfg.get_int("train.passes", train.passes);
  train.iterations_per_pass = cfg.get_int("train.iterations", train.iterations_per_pass);
  train.batch_real = cfg.get_int("train.batch_real", train.batch_real);
  train.batch_fake = cfg.get_int("train.batch_fake", train.batch_fake);
  train.lr = cfg.get_double("train.lr", train.lr);
  train.lr_decay = cfg.get_double("train.lr_decay", train.lr_decay);
  train.decay_interval = cfg.get_int("train.decay_interval", train.decay_interval);
  train.chain_restart_prob = cfg.get_double("train.restart_prob", train.chain_restart_prob);
  train.preprocess_noise = cfg.get_double("train.noise", train.preprocess_noise);
  train.mixup_alpha = cfg.get_double("train.mixup_alpha", train.mixup_alpha);
  train.use_mixup = cfg.get_bool("train.use_mixup", train.use_mixup);
  train.fake_buffer_size = cfg.get_int("train.buffer", train.fake_buffer_size);
  train.proxy_samples = cfg.get_int("train.proxy_samples", train.proxy_samples);
  train.sampler = sampler_from_config(cfg);
  return train;
}

ScoreTrainConfig score_train_from_config(Config& cfg) {
  ScoreTrainConfig score;
  score.base = train_from_config(cfg);
  score.weight = cfg.get_double("score.weight", score.weight);
  score.fd_step = cfg.get_double("score.fd_step", score.fd_step);
  score.estimator.probe_count = cfg.get_int("score.probes", score.estimator.probe_count);
  std::string mode = cfg.get_string("score.mode", "stochastic");
  if (mode == "exact") {
    score.estimator.mode = TraceEstimator::Mode::kExact;
  } else if (mode == "stochastic") {
    score.estimator.mode = TraceEstimator::Mode::kStochastic;
  } else {
    throw std::invalid_argument("score.mode = '" + mode + "' is not one of exact | stochastic");
  }
  return score;
}

AttentiveSettings attentive_from_config(Config& cfg, const Dataset& data) {
  AttentiveSettings s;
  s.encoder.input_shape = data.sample_shape;
  s.encoder.grid = cfg.get_int("attentive.grid", s.encoder.grid);
  s.encoder.v_width = cfg.get_int("attentive.v_width", s.encoder.v_width);
  s.encoder.feature_width = cfg.get_int("attentive.feature_width", s.encoder.feature_width);
  s.encoder.glimpses = cfg.get_int("attentive.glimpses", s.encoder.glimpses);
  s.decoder.output_shape = data.sample_shape;
  s.decoder.feature_width = s.encoder.feature_width;
  s.decoder.base_channels = cfg.get_int("attentive.decoder_channels", s.decoder.base_channels);
  s.train.recon_iterations = cfg.get_int("attentive.recon_iterations", s.train.recon_iterations);
  s.train.recon_batch = cfg.get_int("attentive.recon_batch", s.train.recon_batch);
  s.train.recon_lr = cfg.get_double("attentive.recon_lr", s.train.recon_lr);
  s.train.classifier = train_from_config(cfg);
  return s;
}

}  // namespace stic
