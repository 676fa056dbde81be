#include "stic/mixup.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace stic {

double sample_beta(double alpha, Rng& rng) {
  if (alpha <= 0.0) {
    throw std::invalid_argument("sample_beta: alpha must be positive, got " +
                                std::to_string(alpha));
  }
  double g1 = rng.gamma(alpha);
  double g2 = rng.gamma(alpha);
  double total = g1 + g2;
  if (total <= 0.0) return 0.5;  // both gammas underflowed (tiny alpha)
  return g1 / total;
}

MixupPair mix_pair(const Labeled& a, const Labeled& b, int i, int j, int num_real_classes,
                   double lambda) {
  if (a.x.shape() != b.x.shape()) {
    throw std::invalid_argument("mix_pair: shape mismatch " + shape_str(a.x.shape()) + " vs " +
                                shape_str(b.x.shape()));
  }
  if (a.label < 0 || a.label >= num_real_classes || b.label < 0 || b.label >= num_real_classes) {
    throw std::invalid_argument("mix_pair: labels must be real classes below " +
                                std::to_string(num_real_classes));
  }
  MixupPair pair;
  pair.lambda = lambda;
  pair.i = i;
  pair.j = j;
  std::vector<double> img(a.x.numel());
  auto av = a.x.data(), bv = b.x.data();
  for (std::size_t k = 0; k < img.size(); ++k) img[k] = lambda * av[k] + (1.0 - lambda) * bv[k];
  pair.mixed_image = Tensor::from(a.x.shape(), std::move(img));
  std::vector<double> label(num_real_classes + 1, 0.0);
  label[a.label] += lambda;
  label[b.label] += 1.0 - lambda;
  pair.mixed_label = Tensor::from({num_real_classes + 1}, std::move(label));
  return pair;
}

std::vector<MixupPair> make_mixup(const std::vector<Labeled>& batch, int num_real_classes,
                                  double alpha, Rng& rng) {
  if (batch.size() < 2) {
    throw std::invalid_argument("make_mixup: need at least 2 samples, got " +
                                std::to_string(batch.size()));
  }
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<MixupPair> pairs;
  pairs.reserve(batch.size() / 2);
  for (std::size_t k = 0; k + 1 < order.size(); k += 2) {
    double lambda = sample_beta(alpha, rng);
    int i = order[k], j = order[k + 1];
    pairs.push_back(mix_pair(batch[i], batch[j], i, j, num_real_classes, lambda));
  }
  return pairs;
}

Tensor vrm_loss(const ClassifierModel& model, const std::vector<Labeled>& real,
                const std::vector<MixupPair>& mixup) {
  if (real.empty()) throw std::invalid_argument("vrm_loss: empty real batch");
  Tensor loss;
  for (const Labeled& sample : real) {
    Tensor term = cross_entropy_soft(model.forward_logits(sample.x),
                                     one_hot(sample.label, model.num_logits()));
    loss = loss.defined() ? add(loss, term) : term;
  }
  loss = scalar_mul(loss, 1.0 / static_cast<double>(real.size()));
  if (!mixup.empty()) {
    Tensor mix_loss;
    for (const MixupPair& pair : mixup) {
      Tensor term = cross_entropy_soft(model.forward_logits(pair.mixed_image), pair.mixed_label);
      mix_loss = mix_loss.defined() ? add(mix_loss, term) : term;
    }
    loss = add(loss, scalar_mul(mix_loss, 1.0 / static_cast<double>(mixup.size())));
  }
  return loss;
}

}  // namespace stic
