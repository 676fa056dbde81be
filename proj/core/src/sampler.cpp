#include "stic/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace stic {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

struct StepInfo {
  double log_cond = 0.0;
  double style = 0.0;
};

StepInfo evaluate_state(const ClassifierModel& model, const Tensor& x, const Tensor& target,
                        const GramTarget& gram) {
  ForwardTrace trace = model.forward_trace(x);
  StepInfo info;
  info.log_cond = -cross_entropy_soft(trace.logits, target).value();
  if (!gram.empty()) info.style = style_loss_from_maps(trace.conv_maps, gram).value();
  return info;
}

}  // namespace

Tensor gram_matrix(const Tensor& f) {
  if (f.shape().size() != 2) {
    throw std::invalid_argument("gram_matrix: expected rank-2 activation matrix, got " +
                                shape_str(f.shape()));
  }
  return matmul(f, transpose(f));
}

Tensor style_loss_from_maps(const std::vector<Tensor>& conv_maps, const GramTarget& target) {
  if (target.layers.size() != target.matrices.size()) {
    throw std::invalid_argument("style_loss: target layer/matrix count mismatch");
  }
  Tensor total;
  for (std::size_t idx = 0; idx < target.layers.size(); ++idx) {
    int layer = target.layers[idx];
    if (layer < 0 || layer >= static_cast<int>(conv_maps.size())) {
      throw std::invalid_argument("style_loss: layer " + std::to_string(layer) +
                                  " not present among " + std::to_string(conv_maps.size()) +
                                  " conv blocks");
    }
    const Tensor& f = conv_maps[layer];
    const Tensor& a = target.matrices[idx];
    const int n = f.shape()[0];
    const int p = f.shape()[1];
    if (a.shape() != Shape{n, n}) {
      throw std::invalid_argument("style_loss: anchor shape " + shape_str(a.shape()) +
                                  " does not match layer Gram shape [" + std::to_string(n) + ", " +
                                  std::to_string(n) + "]");
    }
    Tensor term = sum(square(sub(gram_matrix(f), a)));
    double scale = 1.0 / (4.0 * static_cast<double>(n) * n * static_cast<double>(p) * p);
    Tensor scaled = scalar_mul(term, scale);
    total = total.defined() ? add(total, scaled) : scaled;
  }
  if (!total.defined()) return Tensor::scalar(0.0);
  return total;
}

Tensor style_loss(const ClassifierModel& model, const Tensor& x, const GramTarget& target) {
  ForwardTrace trace = model.forward_trace(x);
  if (model.conv_block_count() == 0 && !target.empty()) {
    throw std::invalid_argument("style_loss: model has no conv blocks");
  }
  return style_loss_from_maps(trace.conv_maps, target);
}

GramTarget make_gram_target(const ClassifierModel& model, const Tensor& reference,
                            const std::vector<int>& layers, const std::string& source) {
  GramTarget target;
  target.layers = layers;
  target.source = source;
  for (const Tensor& f : model.feature_maps(reference, layers)) {
    target.matrices.push_back(gram_matrix(f).detach());
  }
  return target;
}

GramTarget mix_gram_targets(const GramTarget& a, const GramTarget& b, double lambda) {
  if (a.layers != b.layers) {
    throw std::invalid_argument("mix_gram_targets: layer selections differ");
  }
  GramTarget mixed;
  mixed.layers = a.layers;
  mixed.source = "mix(" + std::to_string(lambda) + "; " + a.source + "; " + b.source + ")";
  for (std::size_t i = 0; i < a.matrices.size(); ++i) {
    const Tensor& ma = a.matrices[i];
    const Tensor& mb = b.matrices[i];
    if (ma.shape() != mb.shape()) {
      throw std::invalid_argument("mix_gram_targets: anchor shape mismatch at layer " +
                                  std::to_string(a.layers[i]));
    }
    std::vector<double> v(ma.numel());
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = lambda * ma.at(k) + (1.0 - lambda) * mb.at(k);
    }
    mixed.matrices.push_back(Tensor::from(ma.shape(), std::move(v)));
  }
  return mixed;
}

void grmala_step(Chain& chain, const ClassifierModel& model, const GramTarget& gram,
                 const SamplerConfig& config) {
  if (chain.failed) return;
  Tensor x = Tensor::from(chain.state.shape(),
                          std::vector<double>(chain.state.data().begin(), chain.state.data().end()),
                          /*requires_grad=*/true);
  ForwardTrace trace = model.forward_trace(x);
  // An undefined target means the chain ascends the log-marginal instead of a
  // class-conditional, which is exactly the style-free baseline objective.
  Tensor log_density = chain.target.defined()
                           ? scalar_mul(cross_entropy_soft(trace.logits, chain.target), -1.0)
                           : logsumexp(trace.logits, 0);
  Tensor objective = scalar_mul(log_density, config.eps1);
  if (!gram.empty()) {
    Tensor style = style_loss_from_maps(trace.conv_maps, gram);
    objective = sub(objective, scalar_mul(style, config.eps2));
  }
  InputGradient g = grad_wrt_input(objective, x);
  if (!all_finite(g.grad.data())) {
    chain.failed = true;
    return;
  }
  std::vector<double> next(chain.state.data().begin(), chain.state.data().end());
  auto gv = g.grad.data();
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += gv[i];
  if (config.eps3 > 0.0) {
    for (double& v : next) v += chain.rng.normal(0.0, config.eps3);
  }
  if (config.clip) {
    for (double& v : next) v = std::clamp(v, config.clip_lo, config.clip_hi);
  }
  chain.state = Tensor::from(chain.state.shape(), std::move(next));
  chain.t += 1;
}

void mala_approx_step_on(Chain& chain, const std::function<Tensor(const Tensor&)>& log_density,
                         double eps1, double eps2) {
  if (chain.failed) return;
  Tensor x = Tensor::from(chain.state.shape(),
                          std::vector<double>(chain.state.data().begin(), chain.state.data().end()),
                          /*requires_grad=*/true);
  Tensor objective = scalar_mul(log_density(x), eps1);
  InputGradient g = grad_wrt_input(objective, x);
  if (!all_finite(g.grad.data())) {
    chain.failed = true;
    return;
  }
  std::vector<double> next(chain.state.data().begin(), chain.state.data().end());
  auto gv = g.grad.data();
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += gv[i];
  if (eps2 > 0.0) {
    for (double& v : next) v += chain.rng.normal(0.0, eps2);
  }
  chain.state = Tensor::from(chain.state.shape(), std::move(next));
  chain.t += 1;
}

void mala_approx_step(Chain& chain, const ClassifierModel& model, double eps1, double eps2) {
  mala_approx_step_on(
      chain, [&model](const Tensor& x) { return model.unnorm_log_marginal(x); }, eps1, eps2);
}

SynthesisResult synthesize(const ClassifierModel& model, const Tensor& target, int target_class,
                           const GramTarget& gram, const SamplerConfig& config, Rng rng,
                           const Tensor& init_state) {
  if (config.steps < 0) throw std::invalid_argument("synthesize: negative step count");
  if (!target.defined() || target.numel() != model.num_logits()) {
    throw std::invalid_argument("synthesize: target must be a distribution over all " +
                                std::to_string(model.num_logits()) + " classes");
  }
  SynthesisResult result;
  Chain& chain = result.chain;
  chain.target = target;
  chain.target_class = target_class;
  switch (config.init) {
    case SamplerConfig::Init::kGaussian:
      chain.state = random_normal(model.spec().input_shape, rng);
      break;
    case SamplerConfig::Init::kBlank:
      chain.state = Tensor::full(model.spec().input_shape, 1.0);
      break;
    case SamplerConfig::Init::kGiven:
      if (!init_state.defined() || init_state.shape() != model.spec().input_shape) {
        throw std::invalid_argument("synthesize: Init::kGiven needs a state of the model's input shape");
      }
      chain.state = init_state.detach();
      break;
  }
  chain.rng = rng;
  for (int step = 0; step < config.steps; ++step) {
    StepInfo info = evaluate_state(model, chain.state, chain.target, gram);
    result.trajectory.push_back({chain.t, info.log_cond, info.style});
    grmala_step(chain, model, gram, config);
    if (chain.failed) return result;
  }
  StepInfo info = evaluate_state(model, chain.state, chain.target, gram);
  result.trajectory.push_back({chain.t, info.log_cond, info.style});
  return result;
}

std::vector<Tensor> interpolate(const Tensor& a, const Tensor& b, int n_points) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("interpolate: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  if (n_points < 2) {
    throw std::invalid_argument("interpolate: need at least 2 points, got " +
                                std::to_string(n_points));
  }
  std::vector<Tensor> out;
  out.reserve(n_points);
  auto av = a.data(), bv = b.data();
  for (int k = 0; k < n_points; ++k) {
    double w = static_cast<double>(k) / static_cast<double>(n_points - 1);
    std::vector<double> v(av.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - w) * av[i] + w * bv[i];
    out.push_back(Tensor::from(a.shape(), std::move(v)));
  }
  return out;
}

std::vector<Tensor> neighborhood_starts(const Tensor& x, double sigma, int count, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("neighborhood_starts: negative sigma");
  if (count < 0) throw std::invalid_argument("neighborhood_starts: negative count");
  std::vector<Tensor> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    std::vector<double> v(x.data().begin(), x.data().end());
    if (sigma > 0.0) {
      for (double& e : v) e += rng.normal(0.0, sigma);
    }
    out.push_back(Tensor::from(x.shape(), std::move(v)));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& trajectory) {
  os << "step,log_cond,style_loss\n";
  os << std::setprecision(17);
  for (const TrajectoryPoint& p : trajectory) {
    os << p.step << ',' << p.log_cond << ',' << p.style_loss << '\n';
  }
}

}  // namespace stic
