#ifndef STIC_MIXUP_HPP
#define STIC_MIXUP_HPP

#include <vector>

#include "stic/model.hpp"
#include "stic/rng.hpp"
#include "stic/tensor.hpp"

namespace stic {

struct Labeled {
  Tensor x;
  int label;
};

/// Virtual image-label pair: mixed_image = lambda*x_i + (1-lambda)*x_j, label
/// mixed identically over the C+1 classes with zero fake-class mass.
struct MixupPair {
  double lambda = 0.0;
  int i = -1;
  int j = -1;
  Tensor mixed_image;
  Tensor mixed_label;
};

/// Draw from the symmetric Beta(alpha, alpha) via two gamma variates.
/// Rejects alpha <= 0.
double sample_beta(double alpha, Rng& rng);

/// Mix one pair at a fixed lambda (the deterministic kernel of make_mixup).
MixupPair mix_pair(const Labeled& a, const Labeled& b, int i, int j, int num_real_classes,
                   double lambda);

/// Pair up a batch without replacement (shuffled, consecutive pairing, so a
/// batch of n yields floor(n/2) pairs), each pair mixed at its own
/// lambda ~ Beta(alpha, alpha). Labels must be real-class indices.
std::vector<MixupPair> make_mixup(const std::vector<Labeled>& batch, int num_real_classes,
                                  double alpha, Rng& rng);

/// -mean log p(y_c|x) over the real batch - mean log p(y_mix|x_mix) over the
/// mixup batch. An empty mixup batch drops its term; an empty real batch is
/// rejected.
Tensor vrm_loss(const ClassifierModel& model, const std::vector<Labeled>& real,
                const std::vector<MixupPair>& mixup);

}  // namespace stic

#endif  // STIC_MIXUP_HPP
