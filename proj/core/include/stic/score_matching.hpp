#ifndef STIC_SCORE_MATCHING_HPP
#define STIC_SCORE_MATCHING_HPP

#include <functional>

#include "stic/trainer.hpp"

namespace stic {

/// Trace-of-Jacobian estimation strategy. Exact mode walks the diagonal with
/// one backward pass per coordinate and is cost-guarded to dimension <= 64;
/// stochastic mode averages Rademacher probes v^T J v.
struct TraceEstimator {
  enum class Mode { kExact, kStochastic };
  Mode mode = Mode::kExact;
  int probe_count = 8;
};

/// Trace of d fn / dx at x via autodiff.
double jacobian_trace(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x,
                      const TraceEstimator& estimator, Rng& rng);

/// 0.5*||s(x)||^2 + tr(ds/dx) + 0.5*||one_hot(y_c) - softmax(logits)||^2,
/// evaluated with the autodiff trace. Reported value, not trainable.
double score_reg(const ClassifierModel& model, const Tensor& x, int y_c,
                 const TraceEstimator& estimator, Rng& rng);

/// Differentiable version used as a training penalty: the trace term is
/// replaced by a central finite difference of the score field (exact for
/// score fields linear in x), so the whole expression stays inside one
/// autodiff graph and backpropagates to the parameters.
Tensor score_reg_loss(const ClassifierModel& model, const Tensor& x, int y_c,
                      const TraceEstimator& estimator, Rng& rng, double fd_step = 1e-4);

struct ScoreTrainConfig {
  TrainConfig base;
  double weight = 0.1;  // regularizer strength on real batches
  TraceEstimator estimator{TraceEstimator::Mode::kStochastic, 1};
  double fd_step = 1e-4;
};

/// STIC loop with `weight * mean score_reg_loss` added over each real batch.
/// With weight == 0 the score path is skipped entirely (no extra forwards, no
/// rng draws), so the parameter trajectory matches plain train() bit for bit.
TrainResult train_score_stic(ClassifierModel& model, const ScoreTrainConfig& config,
                             const Dataset& data, Rng rng);

}  // namespace stic

#endif  // STIC_SCORE_MATCHING_HPP
