#ifndef STIC_TRAINER_HPP
#define STIC_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "stic/checkpoint.hpp"
#include "stic/dataset.hpp"
#include "stic/mixup.hpp"
#include "stic/model.hpp"
#include "stic/sampler.hpp"

namespace stic {

struct TrainConfig {
  int passes = 10;                  // T
  int iterations_per_pass = 5000;
  int batch_real = 32;              // N, also the mixup pair count per iteration
  int batch_fake = 32;              // K
  double lr = 1e-4;
  double lr_decay = 0.3;
  int decay_interval = 10000;       // iterations between decay steps, counted globally
  double chain_restart_prob = 0.5;
  double preprocess_noise = 0.3;
  double mixup_alpha = 1.0;
  bool use_mixup = true;            // false = the ERM ablation
  int fake_buffer_size = 64;
  int proxy_samples = 10000;        // uniform inputs for the boundary-tightening proxy
  SamplerConfig sampler;
};

/// One synthesized negative: the sample, the distribution it was conditioned
/// on while sampling, its chain stream for continuation, and the pass whose
/// classifier produced it (0 = the initial blank buffer).
struct FakeEntry {
  Tensor sample;
  Tensor target;
  int target_class = -1;
  Rng rng{0};
  int produced_by_pass = 0;
};

struct PassState {
  int tau = 1;
  std::vector<FakeEntry> hard;
  std::vector<FakeEntry> mixup;
};

/// Adam with bias correction; moments are keyed per parameter tensor, and
/// parameters whose grad buffer is still empty are skipped entirely.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<NamedParam>& params, double lr);

 private:
  struct Moments {
    std::vector<double> m, v;
    std::int64_t t = 0;
  };
  double beta1_, beta2_, eps_;
  std::unordered_map<const detail::TensorNode*, Moments> moments_;
};

/// Map raw [0, 255] pixels to [-1, 1], add N(0, sigma^2) noise, clip back to
/// [-1, 1]. Values outside [0, 255] are rejected.
Tensor preprocess(const Tensor& raw, double noise_sigma, Rng& rng);
std::vector<Tensor> preprocess_batch(const std::vector<Tensor>& raw, double noise_sigma, Rng& rng);

/// The recorded logits let the caller compute batch statistics from the same
/// forward passes that produced the loss.
struct PassLossParts {
  Tensor total;
  std::vector<Tensor> real_logits;
  std::vector<Tensor> fake_logits;
};

/// -mean log p(y|x) over reals, mixups, and both fake batches, fakes labeled
/// as the dedicated fake class. Empty fake batches drop their terms (pass-1
/// warmup); an empty real batch is rejected.
PassLossParts pass_loss_parts(const ClassifierModel& model, const std::vector<Labeled>& real,
                              const std::vector<MixupPair>& mixup,
                              const std::vector<Tensor>& fake,
                              const std::vector<Tensor>& fake_mixup);
Tensor pass_loss(const ClassifierModel& model, const std::vector<Labeled>& real,
                 const std::vector<MixupPair>& mixup, const std::vector<Tensor>& fake,
                 const std::vector<Tensor>& fake_mixup);

struct IterationRow {
  int pass = 0;
  int iter = 0;
  double loss = 0.0;
  double train_acc = 0.0;       // on the iteration's real batch
  double mean_fake_prob = 0.0;  // fake-class softmax mass on the fake batches
};

struct PassSummary {
  int pass = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;        // full dataset, at pass end
  double mean_max_real_softmax = 0.0; // boundary-tightening proxy on uniform inputs
};

struct TrainResult {
  std::vector<IterationRow> iterations;
  std::vector<PassSummary> passes;
  std::vector<Checkpoint> checkpoints;  // one per pass
  PassState state;
};

double lr_at(const TrainConfig& config, std::int64_t global_iter);

/// Optional additional loss evaluated on each iteration's real batch (the
/// score-matching regularizer plugs in here). An undefined result adds
/// nothing.
using ExtraLoss =
    std::function<Tensor(const ClassifierModel&, const std::vector<Labeled>&, Rng&)>;

/// One pass: iterate batched updates on pass_loss, then refresh the fake
/// buffers from the updated classifier (each chain restarts from uniform
/// noise with chain_restart_prob, else continues from its end state). A
/// sampler failure keeps the previous buffers and training proceeds.
void run_pass(ClassifierModel& model, PassState& state, Adam& opt, const TrainConfig& config,
              const Dataset& data, Rng& rng, std::int64_t& global_iter, TrainResult& result,
              const ExtraLoss& extra = nullptr);

/// Full loop: `passes` calls to run_pass starting from a blank-image hard
/// buffer, snapshotting a checkpoint after every pass.
TrainResult train(ClassifierModel& model, const TrainConfig& config, const Dataset& data, Rng rng,
                  const ExtraLoss& extra = nullptr);

/// STIC-ERM baseline: identical loop with every mixup term removed.
TrainResult ablate_erm(ClassifierModel& model, TrainConfig config, const Dataset& data, Rng rng);

/// Fraction of dataset samples whose argmax logit equals their label.
double dataset_accuracy(const ClassifierModel& model, const Dataset& data, double noise_sigma);

/// Mean over `count` uniform-random inputs of the maximum real-class softmax
/// probability; lower values mean real classes claim less off-manifold space.
double boundary_proxy(const ClassifierModel& model, const Dataset& data, int count, Rng rng);

void write_metrics_csv(std::ostream& os, const std::vector<IterationRow>& rows);
void write_pass_csv(std::ostream& os, const std::vector<PassSummary>& rows);

}  // namespace stic

#endif  // STIC_TRAINER_HPP
