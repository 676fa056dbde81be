#include "stic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace stic {

namespace {

// Softmax over raw logit values, no graph involved.
std::vector<double> softmax_values(std::span<const double> logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    acc += p[i];
  }
  for (double& v : p) v /= acc;
  return p;
}

int argmax_values(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<std::vector<int>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<int>> by_class(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data.labels[i]].push_back(static_cast<int>(i));
  }
  return by_class;
}

Tensor model_input(const Dataset& data, std::size_t index, double noise_sigma, Rng& rng) {
  Tensor raw = data.sample_tensor(index);
  return data.pixel_domain ? preprocess(raw, noise_sigma, rng) : raw;
}

}  // namespace

void Adam::step(std::vector<NamedParam>& params, double lr) {
  for (NamedParam& p : params) {
    auto grad = p.tensor.grad();
    if (grad.empty()) continue;
    Moments& mom = moments_[p.tensor.node().get()];
    if (mom.m.empty()) {
      mom.m.assign(grad.size(), 0.0);
      mom.v.assign(grad.size(), 0.0);
    }
    mom.t += 1;
    double c1 = 1.0 - std::pow(beta1_, static_cast<double>(mom.t));
    double c2 = 1.0 - std::pow(beta2_, static_cast<double>(mom.t));
    auto values = p.tensor.mutable_data();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      mom.m[i] = beta1_ * mom.m[i] + (1.0 - beta1_) * grad[i];
      mom.v[i] = beta2_ * mom.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      values[i] -= lr * (mom.m[i] / c1) / (std::sqrt(mom.v[i] / c2) + eps_);
    }
  }
}

Tensor preprocess(const Tensor& raw, double noise_sigma, Rng& rng) {
  std::vector<double> v(raw.data().begin(), raw.data().end());
  for (double& x : v) {
    if (x < 0.0 || x > 255.0) {
      throw std::invalid_argument("preprocess: value " + std::to_string(x) +
                                  " outside raw range [0, 255]");
    }
    x = x / 127.5 - 1.0;
    if (noise_sigma > 0.0) x += rng.normal(0.0, noise_sigma);
    x = std::clamp(x, -1.0, 1.0);
  }
  return Tensor::from(raw.shape(), std::move(v));
}

std::vector<Tensor> preprocess_batch(const std::vector<Tensor>& raw, double noise_sigma,
                                     Rng& rng) {
  std::vector<Tensor> out;
  out.reserve(raw.size());
  for (const Tensor& t : raw) out.push_back(preprocess(t, noise_sigma, rng));
  return out;
}

PassLossParts pass_loss_parts(const ClassifierModel& model, const std::vector<Labeled>& real,
                              const std::vector<MixupPair>& mixup,
                              const std::vector<Tensor>& fake,
                              const std::vector<Tensor>& fake_mixup) {
  if (real.empty()) throw std::invalid_argument("pass_loss: empty real batch");
  PassLossParts parts;
  const int fake_class = model.fake_class_index();
  Tensor fake_label = one_hot(fake_class, model.num_logits());

  Tensor real_term;
  for (const Labeled& sample : real) {
    Tensor logits = model.forward_logits(sample.x);
    parts.real_logits.push_back(logits);
    Tensor term = cross_entropy_soft(logits, one_hot(sample.label, model.num_logits()));
    real_term = real_term.defined() ? add(real_term, term) : term;
  }
  Tensor total = scalar_mul(real_term, 1.0 / static_cast<double>(real.size()));

  if (!mixup.empty()) {
    Tensor mix_term;
    for (const MixupPair& pair : mixup) {
      Tensor term = cross_entropy_soft(model.forward_logits(pair.mixed_image), pair.mixed_label);
      mix_term = mix_term.defined() ? add(mix_term, term) : term;
    }
    total = add(total, scalar_mul(mix_term, 1.0 / static_cast<double>(mixup.size())));
  }

  for (const std::vector<Tensor>* batch : {&fake, &fake_mixup}) {
    if (batch->empty()) continue;
    Tensor fake_term;
    for (const Tensor& x : *batch) {
      Tensor logits = model.forward_logits(x);
      parts.fake_logits.push_back(logits);
      Tensor term = cross_entropy_soft(logits, fake_label);
      fake_term = fake_term.defined() ? add(fake_term, term) : term;
    }
    total = add(total, scalar_mul(fake_term, 1.0 / static_cast<double>(batch->size())));
  }

  parts.total = total;
  return parts;
}

Tensor pass_loss(const ClassifierModel& model, const std::vector<Labeled>& real,
                 const std::vector<MixupPair>& mixup, const std::vector<Tensor>& fake,
                 const std::vector<Tensor>& fake_mixup) {
  return pass_loss_parts(model, real, mixup, fake, fake_mixup).total;
}

double lr_at(const TrainConfig& config, std::int64_t global_iter) {
  std::int64_t k = global_iter / config.decay_interval;
  return config.lr * std::pow(config.lr_decay, static_cast<double>(k));
}

namespace {

struct RefreshOutcome {
  std::vector<FakeEntry> entries;
  bool failed = false;
};

// Synthesize a replacement buffer from the just-updated classifier. Chains
// restart from uniform noise with fresh conditioning with probability
// chain_restart_prob, otherwise they continue where their predecessor ended.
RefreshOutcome refresh_buffer(const ClassifierModel& model, const std::vector<FakeEntry>& old,
                              bool mixup_buffer, int count, const TrainConfig& config,
                              const Dataset& data,
                              const std::vector<std::vector<int>>& by_class, int pass, Rng& rng) {
  RefreshOutcome outcome;
  const int c_real = model.num_real_classes();
  const bool use_gram = model.conv_block_count() > 0 && !config.sampler.layers.empty();

  auto class_reference = [&](int cls) {
    const auto& pool = by_class[cls];
    std::size_t pick = pool.empty() ? rng.uniform_index(data.size())
                                    : static_cast<std::size_t>(pool[rng.uniform_index(pool.size())]);
    Rng no_noise(0);
    return model_input(data, pick, 0.0, no_noise);
  };

  for (int k = 0; k < count; ++k) {
    bool restart = old.empty() || rng.uniform() < config.chain_restart_prob;
    FakeEntry entry;
    Tensor start;
    if (restart) {
      std::uint64_t tag = (static_cast<std::uint64_t>(pass) << 32) |
                          (static_cast<std::uint64_t>(mixup_buffer) << 31) |
                          static_cast<std::uint64_t>(k);
      entry.rng = rng.fork(tag);
      if (mixup_buffer) {
        int c1 = static_cast<int>(rng.uniform_index(c_real));
        int c2 = c_real > 1 ? static_cast<int>(rng.uniform_index(c_real - 1)) : 0;
        if (c_real > 1 && c2 >= c1) ++c2;
        double lambda = sample_beta(config.mixup_alpha, rng);
        std::vector<double> dist(model.num_logits(), 0.0);
        dist[c1] += lambda;
        dist[c2] += 1.0 - lambda;
        entry.target = Tensor::from({model.num_logits()}, std::move(dist));
        entry.target_class = -1;
      } else {
        int cls = static_cast<int>(rng.uniform_index(c_real));
        entry.target = one_hot(cls, model.num_logits());
        entry.target_class = cls;
      }
      start = random_uniform(model.spec().input_shape, entry.rng, -1.0, 1.0);
    } else {
      const FakeEntry& prev = old[k % old.size()];
      entry.rng = prev.rng;
      entry.target = prev.target;
      entry.target_class = prev.target_class;
      start = prev.sample;
    }

    GramTarget gram;
    if (use_gram) {
      if (mixup_buffer) {
        // mirror the target mixture in the style anchor
        auto dist = entry.target.data();
        int c1 = -1, c2 = -1;
        for (int c = 0; c < c_real; ++c) {
          if (dist[c] > 0.0) (c1 < 0 ? c1 : c2) = c;
        }
        if (c2 < 0) c2 = c1;
        double lambda = dist[c1];
        GramTarget a = make_gram_target(model, class_reference(c1), config.sampler.layers,
                                        "class" + std::to_string(c1));
        GramTarget b = make_gram_target(model, class_reference(c2), config.sampler.layers,
                                        "class" + std::to_string(c2));
        gram = mix_gram_targets(a, b, lambda);
      } else {
        gram = make_gram_target(model, class_reference(entry.target_class), config.sampler.layers,
                                "class" + std::to_string(entry.target_class));
      }
    }

    SamplerConfig sampler = config.sampler;
    sampler.init = SamplerConfig::Init::kGiven;
    SynthesisResult result =
        synthesize(model, entry.target, entry.target_class, gram, sampler, entry.rng, start);
    if (result.chain.failed) {
      outcome.failed = true;
      return outcome;
    }
    entry.sample = result.chain.state;
    entry.rng = result.chain.rng;
    entry.produced_by_pass = pass;
    outcome.entries.push_back(std::move(entry));
  }
  return outcome;
}

}  // namespace

void run_pass(ClassifierModel& model, PassState& state, Adam& opt, const TrainConfig& config,
              const Dataset& data, Rng& rng, std::int64_t& global_iter, TrainResult& result,
              const ExtraLoss& extra) {
  if (data.size() < 2) throw std::invalid_argument("run_pass: dataset too small");
  const int pass = state.tau;
  const auto by_class = indices_by_class(data);
  double loss_sum = 0.0;
  int rows_this_pass = 0;

  for (int iter = 0; iter < config.iterations_per_pass; ++iter) {
    std::vector<Labeled> real;
    for (int i = 0; i < config.batch_real; ++i) {
      std::size_t idx = rng.uniform_index(data.size());
      real.push_back({model_input(data, idx, config.preprocess_noise, rng), data.labels[idx]});
    }

    std::vector<MixupPair> mixup;
    if (config.use_mixup) {
      std::vector<Labeled> pool;
      for (int i = 0; i < 2 * config.batch_real; ++i) {
        std::size_t idx = rng.uniform_index(data.size());
        pool.push_back({model_input(data, idx, config.preprocess_noise, rng), data.labels[idx]});
      }
      mixup = make_mixup(pool, model.num_real_classes(), config.mixup_alpha, rng);
    }

    std::vector<Tensor> fake, fake_mixup;
    for (int i = 0; i < config.batch_fake && !state.hard.empty(); ++i) {
      fake.push_back(state.hard[rng.uniform_index(state.hard.size())].sample);
    }
    if (config.use_mixup) {
      for (int i = 0; i < config.batch_fake && !state.mixup.empty(); ++i) {
        fake_mixup.push_back(state.mixup[rng.uniform_index(state.mixup.size())].sample);
      }
    }

    PassLossParts parts = pass_loss_parts(model, real, mixup, fake, fake_mixup);
    if (extra) {
      Tensor extra_term = extra(model, real, rng);
      if (extra_term.defined()) parts.total = add(parts.total, extra_term);
    }
    backward(parts.total);
    opt.step(model.parameters(), lr_at(config, global_iter));
    model.zero_grads();

    IterationRow row;
    row.pass = pass;
    row.iter = iter;
    row.loss = parts.total.value();
    int correct = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
      if (argmax_values(parts.real_logits[i].data()) == real[i].label) ++correct;
    }
    row.train_acc = static_cast<double>(correct) / static_cast<double>(real.size());
    if (!parts.fake_logits.empty()) {
      double mass = 0.0;
      for (const Tensor& logits : parts.fake_logits) {
        mass += softmax_values(logits.data())[model.fake_class_index()];
      }
      row.mean_fake_prob = mass / static_cast<double>(parts.fake_logits.size());
    }
    result.iterations.push_back(row);
    loss_sum += row.loss;
    ++rows_this_pass;
    ++global_iter;
  }

  PassSummary summary;
  summary.pass = pass;
  summary.mean_loss = rows_this_pass > 0 ? loss_sum / rows_this_pass : 0.0;
  summary.train_accuracy = dataset_accuracy(model, data, 0.0);
  summary.mean_max_real_softmax =
      config.proxy_samples > 0
          ? boundary_proxy(model, data, config.proxy_samples, rng.fork(0x70726f78 + pass))
          : 0.0;
  result.passes.push_back(summary);

  RefreshOutcome hard =
      refresh_buffer(model, state.hard, false, config.fake_buffer_size, config, data, by_class,
                     pass, rng);
  RefreshOutcome mixup_out;
  if (config.use_mixup) {
    mixup_out = refresh_buffer(model, state.mixup, true, config.fake_buffer_size, config, data,
                               by_class, pass, rng);
  }
  // a failed chain keeps the previous buffers; training itself goes on
  if (!hard.failed && !mixup_out.failed) {
    state.hard = std::move(hard.entries);
    if (config.use_mixup) state.mixup = std::move(mixup_out.entries);
  }
  state.tau += 1;
}

TrainResult train(ClassifierModel& model, const TrainConfig& config, const Dataset& data,
                  Rng rng, const ExtraLoss& extra) {
  if (config.passes < 1) throw std::invalid_argument("train: need at least one pass");
  data.validate();
  TrainResult result;
  PassState& state = result.state;
  state.tau = 1;
  for (int k = 0; k < config.fake_buffer_size; ++k) {
    FakeEntry blank;
    blank.sample = Tensor::full(model.spec().input_shape, 1.0);  // pixel 255 after scaling
    blank.target_class = k % model.num_real_classes();
    blank.target = one_hot(blank.target_class, model.num_logits());
    blank.rng = rng.fork(0xb1a4Ull << 32 | static_cast<std::uint64_t>(k));
    blank.produced_by_pass = 0;
    state.hard.push_back(std::move(blank));
  }

  Adam opt;
  std::int64_t global_iter = 0;
  for (int pass = 1; pass <= config.passes; ++pass) {
    run_pass(model, state, opt, config, data, rng, global_iter, result, extra);
    result.checkpoints.push_back(
        checkpoint_of(model, static_cast<std::uint32_t>(pass), rng.seed()));
  }
  return result;
}

TrainResult ablate_erm(ClassifierModel& model, TrainConfig config, const Dataset& data, Rng rng) {
  config.use_mixup = false;
  return train(model, config, data, rng);
}

double dataset_accuracy(const ClassifierModel& model, const Dataset& data, double noise_sigma) {
  Rng rng(0);
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor x = model_input(data, i, noise_sigma, rng);
    if (argmax_values(model.forward_logits(x).data()) == data.labels[i]) ++correct;
  }
  return data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

double boundary_proxy(const ClassifierModel& model, const Dataset& data, int count, Rng rng) {
  std::int64_t dim = shape_numel(model.spec().input_shape);
  std::vector<double> lo(dim, -1.0), hi(dim, 1.0);
  if (!data.pixel_domain) {
    // cover the point cloud with a margin instead of assuming [-1, 1]
    lo.assign(dim, std::numeric_limits<double>::infinity());
    hi.assign(dim, -std::numeric_limits<double>::infinity());
    for (const auto& sample : data.samples) {
      for (std::int64_t d = 0; d < dim; ++d) {
        lo[d] = std::min(lo[d], sample[d]);
        hi[d] = std::max(hi[d], sample[d]);
      }
    }
    for (std::int64_t d = 0; d < dim; ++d) {
      lo[d] -= 0.5;
      hi[d] += 0.5;
    }
  }
  double total = 0.0;
  for (int k = 0; k < count; ++k) {
    std::vector<double> v(dim);
    for (std::int64_t d = 0; d < dim; ++d) v[d] = rng.uniform(lo[d], hi[d]);
    Tensor x = Tensor::from(model.spec().input_shape, std::move(v));
    auto p = softmax_values(model.forward_logits(x).data());
    double best = 0.0;
    for (int c = 0; c < model.num_real_classes(); ++c) best = std::max(best, p[c]);
    total += best;
  }
  return count > 0 ? total / count : 0.0;
}

void write_metrics_csv(std::ostream& os, const std::vector<IterationRow>& rows) {
  os << "pass,iter,loss,train_acc,mean_fake_prob\n";
  os << std::setprecision(17);
  for (const IterationRow& r : rows) {
    os << r.pass << ',' << r.iter << ',' << r.loss << ',' << r.train_acc << ','
       << r.mean_fake_prob << '\n';
  }
}

void write_pass_csv(std::ostream& os, const std::vector<PassSummary>& rows) {
  os << "pass,mean_loss,train_accuracy,mean_max_real_softmax\n";
  os << std::setprecision(17);
  for (const PassSummary& r : rows) {
    os << r.pass << ',' << r.mean_loss << ',' << r.train_accuracy << ','
       << r.mean_max_real_softmax << '\n';
  }
}

}  // namespace stic
