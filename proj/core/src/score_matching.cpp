#include "stic/score_matching.hpp"

#include <stdexcept>

namespace stic {

namespace {

constexpr std::int64_t kExactDimLimit = 64;

void validate(const TraceEstimator& estimator, std::int64_t dim) {
  if (estimator.mode == TraceEstimator::Mode::kExact && dim > kExactDimLimit) {
    throw std::invalid_argument("jacobian_trace: exact mode is limited to dimension " +
                                std::to_string(kExactDimLimit) + ", got " + std::to_string(dim));
  }
  if (estimator.mode == TraceEstimator::Mode::kStochastic && estimator.probe_count < 1) {
    throw std::invalid_argument("jacobian_trace: probe_count must be at least 1");
  }
}

Tensor rademacher(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& e : v) e = rng.uniform_index(2) == 0 ? -1.0 : 1.0;
  return Tensor::from(shape, std::move(v));
}

Tensor basis(const Shape& shape, std::int64_t i) {
  std::vector<double> v(shape_numel(shape), 0.0);
  v[i] = 1.0;
  return Tensor::from(shape, std::move(v));
}

Tensor shifted(const Tensor& x, const Tensor& direction, double scale) {
  std::vector<double> v(x.data().begin(), x.data().end());
  auto d = direction.data();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += scale * d[k];
  return Tensor::from(x.shape(), std::move(v));
}

}  // namespace

double jacobian_trace(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x,
                      const TraceEstimator& estimator, Rng& rng) {
  validate(estimator, x.numel());
  Tensor leaf = Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()),
                             /*requires_grad=*/true);
  Tensor y = fn(leaf);
  if (y.shape() != leaf.shape()) {
    throw std::invalid_argument("jacobian_trace: field output shape " + shape_str(y.shape()) +
                                " does not match input " + shape_str(leaf.shape()));
  }
  if (estimator.mode == TraceEstimator::Mode::kExact) {
    double trace = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      InputGradient g = grad_wrt_input(sum(mul(y, basis(y.shape(), i))), leaf);
      trace += g.grad.at(i);
    }
    return trace;
  }
  double estimate = 0.0;
  for (int p = 0; p < estimator.probe_count; ++p) {
    Tensor v = rademacher(y.shape(), rng);
    InputGradient g = grad_wrt_input(sum(mul(y, v)), leaf);
    double dot = 0.0;
    for (std::int64_t i = 0; i < v.numel(); ++i) dot += v.at(i) * g.grad.at(i);
    estimate += dot;
  }
  return estimate / estimator.probe_count;
}

double score_reg(const ClassifierModel& model, const Tensor& x, int y_c,
                 const TraceEstimator& estimator, Rng& rng) {
  Tensor s = model.score(x);
  double norm_term = 0.0;
  for (double v : s.data()) norm_term += v * v;
  norm_term *= 0.5;

  double trace_term =
      jacobian_trace([&model](const Tensor& in) { return model.score(in); }, x, estimator, rng);

  Tensor probs = softmax(model.forward_logits(x), 0);
  Tensor target = one_hot(y_c, model.num_logits());
  double class_term = 0.0;
  for (std::int64_t i = 0; i < probs.numel(); ++i) {
    double d = target.at(i) - probs.at(i);
    class_term += d * d;
  }
  class_term *= 0.5;

  return norm_term + trace_term + class_term;
}

Tensor score_reg_loss(const ClassifierModel& model, const Tensor& x, int y_c,
                      const TraceEstimator& estimator, Rng& rng, double fd_step) {
  validate(estimator, x.numel());
  if (fd_step <= 0.0) throw std::invalid_argument("score_reg_loss: fd_step must be positive");

  Tensor s = model.score(x);
  Tensor total = scalar_mul(sum(square(s)), 0.5);

  const double inv = 1.0 / (2.0 * fd_step);
  Tensor trace;
  if (estimator.mode == TraceEstimator::Mode::kExact) {
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      Tensor e = basis(x.shape(), i);
      Tensor diff = sub(model.score(shifted(x, e, fd_step)), model.score(shifted(x, e, -fd_step)));
      Tensor term = sum(mul(diff, e));
      trace = trace.defined() ? add(trace, term) : term;
    }
    trace = scalar_mul(trace, inv);
  } else {
    for (int p = 0; p < estimator.probe_count; ++p) {
      Tensor v = rademacher(x.shape(), rng);
      Tensor diff = sub(model.score(shifted(x, v, fd_step)), model.score(shifted(x, v, -fd_step)));
      Tensor term = sum(mul(diff, v));
      trace = trace.defined() ? add(trace, term) : term;
    }
    trace = scalar_mul(trace, inv / estimator.probe_count);
  }
  total = add(total, trace);

  Tensor gap = sub(one_hot(y_c, model.num_logits()), softmax(model.forward_logits(x), 0));
  total = add(total, scalar_mul(sum(square(gap)), 0.5));
  return total;
}

TrainResult train_score_stic(ClassifierModel& model, const ScoreTrainConfig& config,
                             const Dataset& data, Rng rng) {
  if (!model.has_score_head()) {
    throw std::invalid_argument("train_score_stic: model needs a score head");
  }
  if (config.weight == 0.0) {
    // skip the score path entirely so the run is indistinguishable from train()
    return train(model, config.base, data, rng);
  }
  ExtraLoss extra = [&config](const ClassifierModel& m, const std::vector<Labeled>& real,
                              Rng& r) -> Tensor {
    Tensor acc;
    for (const Labeled& sample : real) {
      Tensor term = score_reg_loss(m, sample.x, sample.label, config.estimator, r, config.fd_step);
      acc = acc.defined() ? add(acc, term) : term;
    }
    if (!acc.defined()) return Tensor();
    return scalar_mul(acc, config.weight / static_cast<double>(real.size()));
  };
  return train(model, config.base, data, rng, extra);
}

}  // namespace stic
