#ifndef STIC_SETTINGS_HPP
#define STIC_SETTINGS_HPP

#include "stic/attentive.hpp"
#include "stic/config.hpp"
#include "stic/dataset.hpp"
#include "stic/model.hpp"
#include "stic/score_matching.hpp"
#include "stic/trainer.hpp"

namespace stic {

/// Translation of flat config entries into the typed settings structs. This
/// layer owns the documented defaults and rejects sampler step sizes outside
/// their legal ranges (eps1, eps2 in [0.9, 1.0], eps3 in [0.01, 0.02]), so a
/// mistyped exponent fails loudly instead of producing a silently broken run.
/// Callers are expected to reject Config::unconsumed() leftovers afterwards.

/// Builds the dataset selected by `dataset` (gaussians | moons | shapes |
/// idx). Generator seeds come from `dataset.seed` when present, otherwise
/// from a fork of the root rng.
Dataset dataset_from_config(Config& cfg, const Rng& root);

/// Model architecture; input shape and class count are taken from the
/// dataset, kind defaults to mlp for point data and cnn for images.
ModelSpec model_spec_from_config(Config& cfg, const Dataset& data);

SamplerConfig sampler_from_config(Config& cfg);
TrainConfig train_from_config(Config& cfg);
ScoreTrainConfig score_train_from_config(Config& cfg);

struct AttentiveSettings {
  AttentiveConfig encoder;
  DecoderConfig decoder;
  AttentiveTrainConfig train;
};

AttentiveSettings attentive_from_config(Config& cfg, const Dataset& data);

}  // namespace stic

#endif  // STIC_SETTINGS_HPP
