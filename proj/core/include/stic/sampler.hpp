#ifndef STIC_SAMPLER_HPP
#define STIC_SAMPLER_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "stic/model.hpp"
#include "stic/rng.hpp"
#include "stic/tensor.hpp"

namespace stic {

/// Per-layer style anchors A^L computed from one or two reference images.
struct GramTarget {
  std::vector<int> layers;
  std::vector<Tensor> matrices;
  std::string source;

  bool empty() const { return layers.empty(); }
};

struct SamplerConfig {
  double eps1 = 0.9;   // gradient-ascent scale on log p(target|x)
  double eps2 = 0.9;   // descent scale on the style loss
  double eps3 = 0.01;  // noise stddev
  int steps = 100;
  std::vector<int> layers;  // Gram layer selection (empty = no style term)
  bool clip = true;
  double clip_lo = -1.0;
  double clip_hi = 1.0;
  enum class Init { kGaussian, kBlank, kGiven } init = Init::kGaussian;
};

struct Chain {
  Tensor state;
  Tensor target;         // distribution over C+1 classes
  int target_class = -1; // -1 when the target is a soft mixture
  int t = 0;
  bool failed = false;
  Rng rng{0};            // per-chain noise stream
};

struct TrajectoryPoint {
  int step = 0;
  double log_cond = 0.0;
  double style_loss = 0.0;
};

struct SynthesisResult {
  Chain chain;
  std::vector<TrajectoryPoint> trajectory;
};

/// G = F * F^T for a rank-2 activation matrix; differentiable.
Tensor gram_matrix(const Tensor& f);

/// Sum over target layers of sum_ij (G^L(x)_ij - A^L_ij)^2 / (4 N_L^2 P_L^2),
/// with N_L the filter count and P_L the position count of layer L.
Tensor style_loss(const ClassifierModel& model, const Tensor& x, const GramTarget& target);

/// Same, over activation matrices already recorded by a forward trace.
Tensor style_loss_from_maps(const std::vector<Tensor>& conv_maps, const GramTarget& target);

/// A^L anchors from a single reference image, detached from any graph.
GramTarget make_gram_target(const ClassifierModel& model, const Tensor& reference,
                            const std::vector<int>& layers, const std::string& source);

/// lambda * A + (1 - lambda) * B per layer, for mixup-conditioned synthesis.
GramTarget mix_gram_targets(const GramTarget& a, const GramTarget& b, double lambda);

/// One Langevin step with style regularization:
///   x' = clip(x + eps1 * grad log p(target|x) - eps2 * grad style(x) + noise),
/// noise ~ N(0, eps3^2 I), drawn from the chain's stream only when eps3 > 0.
/// A chain whose target is left undefined ascends the unnormalized
/// log-marginal instead of a class-conditional. A non-finite gradient marks
/// the chain failed and leaves the state alone.
void grmala_step(Chain& chain, const ClassifierModel& model, const GramTarget& gram,
                 const SamplerConfig& config);

/// Style-free baseline step ascending an arbitrary scalar log-density:
///   x' = x + eps1 * grad log_density(x) + N(0, eps2^2 I).
void mala_approx_step_on(Chain& chain, const std::function<Tensor(const Tensor&)>& log_density,
                         double eps1, double eps2);

/// Baseline step on the model's unnormalized log-marginal.
void mala_approx_step(Chain& chain, const ClassifierModel& model, double eps1, double eps2);

/// Run `config.steps` grmala_steps from a fresh chain. `target` is a
/// distribution over the C+1 classes; `init_state` is consulted only for
/// Init::kGiven. The trajectory records (step, log_cond, style_loss) at every
/// visited state including the last.
SynthesisResult synthesize(const ClassifierModel& model, const Tensor& target, int target_class,
                           const GramTarget& gram, const SamplerConfig& config, Rng rng,
                           const Tensor& init_state = Tensor());

/// Convex combinations of two same-shape samples at n_points equally spaced
/// weights, endpoints included. Rejects n_points < 2.
std::vector<Tensor> interpolate(const Tensor& a, const Tensor& b, int n_points);

/// count draws of x + N(0, sigma^2 I). sigma = 0 yields exact copies.
std::vector<Tensor> neighborhood_starts(const Tensor& x, double sigma, int count, Rng& rng);

/// CSV with header "step,log_cond,style_loss".
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& trajectory);

}  // namespace stic

#endif  // STIC_SAMPLER_HPP
