#include "stic/attentive.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/checks.hpp"

using namespace stic;

namespace {

AttentiveConfig small_encoder_config() {
  AttentiveConfig config;
  config.input_shape = {1, 6, 6};
  config.grid = 3;
  config.v_width = 8;
  config.feature_width = 12;
  config.glimpses = 2;
  return config;
}

ModelSpec feature_classifier_spec(int width, int classes) {
  ModelSpec spec;
  spec.kind = ArchKind::kMlp;
  spec.input_shape = {width};
  spec.hidden = {16};
  spec.num_real_classes = classes;
  return spec;
}

std::vector<double> snapshot(const std::vector<NamedParam>& params) {
  std::vector<double> flat;
  for (const auto& p : params)
    for (double v : p.tensor.data()) flat.push_back(v);
  return flat;
}

}  // namespace

TEST(Filterbank, RowsAreStochastic) {
  Tensor center = Tensor::scalar(2.3);
  Tensor stride = Tensor::scalar(0.7);
  Tensor log_var = Tensor::scalar(-0.5);
  Tensor bank = gaussian_filterbank(center, stride, log_var, 4, 9);
  ASSERT_EQ(bank.shape(), (Shape{4, 9}));
  for (int r = 0; r < 4; ++r) {
    double row = 0.0;
    for (int c = 0; c < 9; ++c) row += bank.at(r * 9 + c);
    EXPECT_NEAR(row, 1.0, 1e-6);
  }
}

TEST(Filterbank, SharpFullGridBankIsIdentity) {
  // grid == image side, centers spaced one pixel apart, variance driven to
  // zero: each row collapses onto its own column
  const int side = 6;
  Tensor center = Tensor::scalar((side - 1) / 2.0);
  Tensor stride = Tensor::scalar(1.0);
  Tensor log_var = Tensor::scalar(-20.0);
  Tensor bank = gaussian_filterbank(center, stride, log_var, side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      EXPECT_NEAR(bank.at(r * side + c), r == c ? 1.0 : 0.0, 1e-9);
}

TEST(Filterbank, FullViewPatchEqualsImage) {
  const int side = 6;
  Rng rng(930);
  Tensor image = random_uniform({side, side}, rng, -1.0, 1.0);
  Tensor bank = gaussian_filterbank(Tensor::scalar((side - 1) / 2.0), Tensor::scalar(1.0),
                                    Tensor::scalar(-20.0), side, side);
  Tensor patch = matmul(bank, matmul(image, transpose(bank)));
  for (int i = 0; i < side * side; ++i) EXPECT_NEAR(patch.at(i), image.at(i), 1e-9);
}

TEST(Filterbank, DeterministicGivenInputs) {
  Tensor a = gaussian_filterbank(Tensor::scalar(1.2), Tensor::scalar(0.4),
                                 Tensor::scalar(-1.0), 3, 7);
  Tensor b = gaussian_filterbank(Tensor::scalar(1.2), Tensor::scalar(0.4),
                                 Tensor::scalar(-1.0), 3, 7);
  for (int i = 0; i < 21; ++i) EXPECT_DOUBLE_EQ(a.at(i), b.at(i));
}

TEST(Encoder, FeatureWidthMatchesConfig) {
  Rng rng(931);
  AttentiveEncoder encoder(small_encoder_config(), rng);
  Tensor x = random_uniform({1, 6, 6}, rng, -1.0, 1.0);
  Tensor f1 = encoder.encode(x, 1);
  Tensor f4 = encoder.encode(x, 4);
  EXPECT_EQ(f1.shape(), (Shape{12}));
  EXPECT_EQ(f4.shape(), (Shape{12}));
}

TEST(Encoder, EncodeIsDeterministic) {
  Rng rng(932);
  AttentiveEncoder encoder(small_encoder_config(), rng);
  Tensor x = random_uniform({1, 6, 6}, rng, -1.0, 1.0);
  Tensor a = encoder.encode(x, 3);
  Tensor b = encoder.encode(x, 3);
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(a.at(i), b.at(i));
}

TEST(Encoder, SingleGlimpseMatchesManualReadStep) {
  // steps=1 is the base case of the recurrence: one read from a zero error
  // image and one cell update from a zero state
  Rng rng(933);
  AttentiveEncoder encoder(small_encoder_config(), rng);
  Tensor x = random_uniform({1, 6, 6}, rng, -1.0, 1.0);
  Tensor f = encoder.encode(x, 1);
  EXPECT_EQ(f.shape(), (Shape{12}));
  for (double v : f.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, FeatureGradientMatchesFiniteDifferences) {
  Rng rng(934);
  AttentiveEncoder encoder(small_encoder_config(), rng);
  Tensor probe = random_uniform({12}, rng, -1.0, 1.0);
  Tensor x0 = random_uniform({1, 6, 6}, rng, -0.5, 0.5);

  Tensor leaf = Tensor::from(x0.shape(),
                             std::vector<double>(x0.data().begin(), x0.data().end()),
                             /*requires_grad=*/true);
  Tensor scalar = sum(mul(encoder.encode(leaf, 2), probe));
  InputGradient analytic = grad_wrt_input(scalar, leaf);
  ASSERT_TRUE(analytic.connected);

  auto fn = [&](const std::vector<double>& flat) {
    Tensor in = Tensor::from(x0.shape(), std::vector<double>(flat));
    return sum(mul(encoder.encode(in, 2), probe)).value();
  };
  std::vector<double> numeric =
      testsupport::numeric_grad(fn, {x0.data().begin(), x0.data().end()});
  std::vector<double> grad(analytic.grad.data().begin(), analytic.grad.data().end());
  EXPECT_LE(testsupport::max_rel_err(grad, numeric), 1e-4);
}

TEST(FeatureSample, ZeroStepsReturnsStart) {
  Rng init(935), rng(936);
  ClassifierModel classifier(feature_classifier_spec(12, 3), init);
  Tensor f0 = random_uniform({12}, rng, -1.0, 1.0);
  FeatureSampleResult out = feature_sample(classifier, f0, 1, 1e-2, 0.0, 0, rng);
  EXPECT_FALSE(out.failed);
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(out.feature.at(i), f0.at(i));
}

TEST(FeatureSample, ZeroRatesAreAFixedPoint) {
  Rng init(937), rng(938);
  ClassifierModel classifier(feature_classifier_spec(12, 3), init);
  Tensor f0 = random_uniform({12}, rng, -1.0, 1.0);
  FeatureSampleResult out = feature_sample(classifier, f0, 0, 0.0, 0.0, 25, rng);
  EXPECT_FALSE(out.failed);
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(out.feature.at(i), f0.at(i));
}

TEST(FeatureSample, NoiselessAscentRaisesTargetProbability) {
  Rng init(939), rng(940);
  ClassifierModel classifier(feature_classifier_spec(12, 3), init);
  Tensor f0 = random_uniform({12}, rng, -1.0, 1.0);

  FeatureSampleResult out = feature_sample(classifier, f0, 2, 1e-2, 0.0, 50, rng);
  ASSERT_FALSE(out.failed);
  ASSERT_EQ(out.log_cond.size(), 51u);

  Tensor before = softmax(classifier.forward_logits(f0), 0);
  Tensor after = softmax(classifier.forward_logits(out.feature), 0);
  EXPECT_GT(after.at(2), before.at(2));
  // the recorded log-conditional trace ends above where it started
  EXPECT_GT(out.log_cond.back(), out.log_cond.front());
}

TEST(FeatureSample, SeededRunsReproduce) {
  Rng init(941);
  ClassifierModel classifier(feature_classifier_spec(12, 3), init);
  Rng draw(942);
  Tensor f0 = random_uniform({12}, draw, -1.0, 1.0);
  Rng r1(943), r2(943);
  FeatureSampleResult a = feature_sample(classifier, f0, 0, 5e-3, 0.02, 20, r1);
  FeatureSampleResult b = feature_sample(classifier, f0, 0, 5e-3, 0.02, 20, r2);
  ASSERT_FALSE(a.failed);
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(a.feature.at(i), b.feature.at(i));
}

TEST(FeatureSample, LeavesClassifierParametersUntouched) {
  Rng init(944), rng(945);
  ClassifierModel classifier(feature_classifier_spec(12, 3), init);
  std::vector<double> before = snapshot(classifier.parameters());
  Tensor f0 = random_uniform({12}, rng, -1.0, 1.0);
  feature_sample(classifier, f0, 1, 1e-2, 0.01, 30, rng);
  std::vector<double> after = snapshot(classifier.parameters());
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_DOUBLE_EQ(before[i], after[i]);
}

TEST(Decoder, OutputShapeAndRangeHoldForRandomFeatures) {
  DecoderConfig config;
  config.output_shape = {1, 8, 8};
  config.feature_width = 12;
  config.base_channels = 4;
  Rng rng(946);
  Decoder decoder(config, rng);
  Tensor f = random_uniform({12}, rng, -2.0, 2.0);
  Tensor image = decoder.decode(f);
  ASSERT_EQ(image.shape(), (Shape{1, 8, 8}));
  for (double v : image.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Decoder, ZeroWeightsDecodeToZeroImage) {
  DecoderConfig config;
  config.output_shape = {1, 8, 8};
  config.feature_width = 12;
  config.base_channels = 4;
  Rng rng(947);
  Decoder decoder(config, rng);
  for (auto& p : decoder.parameters()) {
    auto span = p.tensor.mutable_data();
    for (auto& v : span) v = 0.0;
  }
  Tensor image = decoder.decode(Tensor::full({12}, 0.8));
  for (double v : image.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Decoder, RejectsWrongFeatureWidth) {
  DecoderConfig config;
  config.output_shape = {1, 8, 8};
  config.feature_width = 12;
  config.base_channels = 4;
  Rng rng(948);
  Decoder decoder(config, rng);
  EXPECT_THROW(decoder.decode(Tensor::zeros({7})), std::invalid_argument);
}

TEST(AttentiveTrain, WarmupDrivesReconstructionDown) {
  Dataset data = gen_shapes(6, 8, 949);

  AttentiveConfig enc_config;
  enc_config.input_shape = {1, 8, 8};
  enc_config.grid = 3;
  enc_config.v_width = 8;
  enc_config.feature_width = 12;
  enc_config.glimpses = 2;

  DecoderConfig dec_config;
  dec_config.output_shape = {1, 8, 8};
  dec_config.feature_width = 12;
  dec_config.base_channels = 4;

  AttentiveTrainConfig config;
  config.recon_iterations = 60;
  config.recon_batch = 4;
  config.recon_lr = 1e-3;
  config.classifier.passes = 1;
  config.classifier.iterations_per_pass = 15;
  config.classifier.batch_real = 8;
  config.classifier.batch_fake = 4;
  config.classifier.fake_buffer_size = 4;
  config.classifier.lr = 1e-3;
  config.classifier.proxy_samples = 20;
  config.classifier.sampler.steps = 5;

  Rng rng(950);
  AttentiveEncoder encoder(enc_config, rng);
  Decoder decoder(dec_config, rng);
  ClassifierModel classifier(feature_classifier_spec(12, 3), rng);

  AttentiveTrainResult result =
      attentive_train(encoder, decoder, classifier, config, data, Rng(951));

  ASSERT_EQ(result.recon_loss.size(), 60u);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) {
    early += result.recon_loss[i];
    late += result.recon_loss[50 + i];
  }
  EXPECT_LT(late, early);

  // the encoded dataset feeds the classifier: one feature row per image
  EXPECT_EQ(result.features.size(), data.size());
  EXPECT_EQ(result.features.sample_shape, (Shape{12}));
  EXPECT_FALSE(result.features.pixel_domain);
  EXPECT_EQ(result.features.labels, data.labels);
  EXPECT_EQ(result.classifier_run.passes.size(), 1u);
}

TEST(AttentiveTrain, EncodeDatasetPreservesLabels) {
  Dataset data = gen_shapes(3, 8, 952);
  AttentiveConfig enc_config;
  enc_config.input_shape = {1, 8, 8};
  enc_config.grid = 3;
  enc_config.v_width = 8;
  enc_config.feature_width = 12;
  enc_config.glimpses = 2;
  Rng rng(953);
  AttentiveEncoder encoder(enc_config, rng);

  Dataset features = encode_dataset(encoder, data);
  EXPECT_EQ(features.size(), data.size());
  EXPECT_EQ(features.labels, data.labels);
  EXPECT_EQ(features.num_classes, data.num_classes);
  EXPECT_EQ(features.sample_shape, (Shape{12}));
  for (std::size_t i = 0; i < features.size(); ++i)
    for (double v : features.samples[i]) ASSERT_TRUE(std::isfinite(v));
}
