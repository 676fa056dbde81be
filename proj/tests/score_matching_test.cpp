#include "stic/score_matching.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stic/dataset.hpp"

using namespace stic;

namespace {

ModelSpec score_mlp(int classes, std::vector<int> hidden = {16}) {
  ModelSpec spec;
  spec.kind = ArchKind::kMlp;
  spec.input_shape = {2};
  spec.hidden = std::move(hidden);
  spec.num_real_classes = classes;
  spec.with_score_head = true;
  return spec;
}

void zero_all(ClassifierModel& model) {
  for (auto& p : model.parameters()) {
    auto span = p.tensor.mutable_data();
    for (auto& v : span) v = 0.0;
  }
}

void set_param(ClassifierModel& model, const std::string& name,
               const std::vector<double>& values) {
  for (auto& p : model.parameters()) {
    if (p.name != name) continue;
    auto span = p.tensor.mutable_data();
    ASSERT_EQ(span.size(), values.size()) << name;
    for (std::size_t i = 0; i < values.size(); ++i) span[i] = values[i];
    return;
  }
  FAIL() << "no parameter named " << name;
}

// field x -> A x for a square matrix held as a plain constant
std::function<Tensor(const Tensor&)> linear_field(const Tensor& a, std::int64_t dim) {
  return [a, dim](const Tensor& x) {
    return reshape(matmul(a, reshape(x, {static_cast<int>(dim), 1})),
                   {static_cast<int>(dim)});
  };
}

Tensor random_matrix(std::int64_t dim, Rng& rng, double diag_boost) {
  std::vector<double> v(dim * dim);
  for (double& e : v) e = rng.uniform(-1.0, 1.0);
  for (std::int64_t i = 0; i < dim; ++i) v[i * dim + i] += diag_boost;
  return Tensor::from({static_cast<int>(dim), static_cast<int>(dim)}, std::move(v));
}

double matrix_trace(const Tensor& a, std::int64_t dim) {
  double t = 0.0;
  for (std::int64_t i = 0; i < dim; ++i) t += a.at(i * dim + i);
  return t;
}

}  // namespace

TEST(JacobianTrace, IdentityFieldGivesDimension) {
  Rng rng(900);
  Tensor x = Tensor::from({6}, {0.3, -1.0, 0.2, 0.9, -0.4, 0.0});
  auto identity = [](const Tensor& in) { return add(in, Tensor::zeros(in.shape())); };

  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  EXPECT_DOUBLE_EQ(jacobian_trace(identity, x, exact, rng), 6.0);

  // v^T I v = sum v_i^2 = d for every Rademacher probe, so even one probe is exact
  TraceEstimator one_probe{TraceEstimator::Mode::kStochastic, 1};
  EXPECT_DOUBLE_EQ(jacobian_trace(identity, x, one_probe, rng), 6.0);
}

TEST(JacobianTrace, ExactModeRecoversMatrixTrace) {
  Rng rng(901);
  const std::int64_t dim = 8;
  Tensor a = random_matrix(dim, rng, 0.0);
  Tensor x = random_uniform({8}, rng, -1.0, 1.0);
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  double got = jacobian_trace(linear_field(a, dim), x, exact, rng);
  EXPECT_NEAR(got, matrix_trace(a, dim), 1e-9);
}

TEST(JacobianTrace, ConstantFieldHasZeroTrace) {
  Rng rng(902);
  Tensor x = random_uniform({5}, rng, -1.0, 1.0);
  auto constant = [](const Tensor& in) { return Tensor::full(in.shape(), 3.0); };
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  EXPECT_DOUBLE_EQ(jacobian_trace(constant, x, exact, rng), 0.0);
  TraceEstimator probes{TraceEstimator::Mode::kStochastic, 4};
  EXPECT_DOUBLE_EQ(jacobian_trace(constant, x, probes, rng), 0.0);
}

TEST(JacobianTrace, StochasticEstimateConvergesOnLinearField) {
  Rng rng(903);
  const std::int64_t dim = 8;
  // diagonal boost keeps the true trace well away from zero so the relative
  // bound is meaningful
  Tensor a = random_matrix(dim, rng, 2.0);
  Tensor x = random_uniform({8}, rng, -1.0, 1.0);

  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  double truth = jacobian_trace(linear_field(a, dim), x, exact, rng);
  EXPECT_NEAR(truth, matrix_trace(a, dim), 1e-9);

  TraceEstimator probes{TraceEstimator::Mode::kStochastic, 1000};
  double estimate = jacobian_trace(linear_field(a, dim), x, probes, rng);
  EXPECT_LE(std::fabs(estimate - truth), 0.05 * std::fabs(truth));
}

TEST(JacobianTrace, GuardsRejectBadRequests) {
  Rng rng(904);
  auto identity = [](const Tensor& in) { return add(in, Tensor::zeros(in.shape())); };

  Tensor big = Tensor::zeros({65});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  EXPECT_THROW(jacobian_trace(identity, big, exact, rng), std::invalid_argument);

  Tensor x = Tensor::zeros({4});
  TraceEstimator no_probes{TraceEstimator::Mode::kStochastic, 0};
  EXPECT_THROW(jacobian_trace(identity, x, no_probes, rng), std::invalid_argument);

  auto collapse = [](const Tensor& in) { return sum(in); };
  EXPECT_THROW(jacobian_trace(collapse, x, exact, rng), std::invalid_argument);
}

TEST(ScoreReg, ZeroFieldAndConfidentHeadGiveZero) {
  Rng init(905), rng(906);
  ClassifierModel model(score_mlp(2), init);
  zero_all(model);
  // push nearly all softmax mass onto class 0 while the score head stays zero
  set_param(model, "head.bias", {50.0, 0.0, 0.0});

  Tensor x = Tensor::from({2}, {0.4, -0.2});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  EXPECT_NEAR(score_reg(model, x, 0, exact, rng), 0.0, 1e-12);
}

TEST(ScoreReg, UniformPredictionContributesOneThird) {
  Rng init(907), rng(908);
  ClassifierModel model(score_mlp(2), init);
  zero_all(model);

  // zero weights: score field is zero, logits uniform over 2 real + 1 fake
  Tensor x = Tensor::from({2}, {0.1, 0.7});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  double reg = score_reg(model, x, 1, exact, rng);
  EXPECT_NEAR(reg, 0.5 * ((1.0 - 1.0 / 3) * (1.0 - 1.0 / 3) + 2.0 / 9), 1e-12);
  EXPECT_NEAR(reg, 1.0 / 3, 1e-12);
}

TEST(ScoreReg, ValueDominatesTraceTerm) {
  // first and third terms are nonnegative, so reg minus the trace term >= 0
  Rng init(909), rng(910);
  ClassifierModel model(score_mlp(3, {8}), init);
  Tensor x = Tensor::from({2}, {0.25, -0.6});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  double trace = jacobian_trace([&model](const Tensor& in) { return model.score(in); }, x,
                                exact, rng);
  double reg = score_reg(model, x, 1, exact, rng);
  EXPECT_GE(reg - trace, -1e-12);
}

TEST(ScoreReg, LossAgreesWithReportedValueAwayFromKinks) {
  Rng init(911), rng1(912), rng2(912);
  ClassifierModel model(score_mlp(2, {8}), init);
  // bias the hidden units strongly positive so the relu stays active in a
  // neighborhood of x and the finite-difference trace sees a smooth field
  set_param(model, "dense0.bias", std::vector<double>(8, 1.0));

  Tensor x = Tensor::from({2}, {0.15, -0.1});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  double reported = score_reg(model, x, 0, exact, rng1);
  Tensor loss = score_reg_loss(model, x, 0, exact, rng2, 1e-4);
  EXPECT_NEAR(loss.value(), reported, 1e-6 * std::max(1.0, std::fabs(reported)));
}

TEST(ScoreReg, LossBackpropagatesToParameters) {
  Rng init(913), rng(914);
  ClassifierModel model(score_mlp(2, {8}), init);
  for (auto& p : model.parameters()) p.tensor.zero_grad();

  Tensor x = Tensor::from({2}, {0.3, 0.2});
  TraceEstimator est{TraceEstimator::Mode::kStochastic, 2};
  Tensor loss = score_reg_loss(model, x, 1, est, rng, 1e-4);
  backward(loss);

  double total = 0.0;
  for (auto& p : model.parameters())
    for (double g : p.tensor.grad()) total += std::fabs(g);
  EXPECT_GT(total, 0.0);
}

TEST(ScoreReg, LossRejectsNonPositiveStep) {
  Rng init(915), rng(916);
  ClassifierModel model(score_mlp(2), init);
  Tensor x = Tensor::zeros({2});
  TraceEstimator exact{TraceEstimator::Mode::kExact, 0};
  EXPECT_THROW(score_reg_loss(model, x, 0, exact, rng, 0.0), std::invalid_argument);
}

namespace {

ScoreTrainConfig tiny_score_config() {
  ScoreTrainConfig config;
  config.base.passes = 1;
  config.base.iterations_per_pass = 20;
  config.base.batch_real = 8;
  config.base.batch_fake = 4;
  config.base.fake_buffer_size = 4;
  config.base.lr = 1e-2;
  config.base.proxy_samples = 50;
  config.base.sampler.steps = 5;
  return config;
}

}  // namespace

TEST(TrainScoreStic, WeightZeroMatchesPlainTrainingBitForBit) {
  Dataset data = gen_gaussians_2d(2, 30, 0.2, 917);
  ScoreTrainConfig config = tiny_score_config();
  config.weight = 0.0;

  Rng i1(918), i2(918);
  ClassifierModel scored(score_mlp(2, {16}), i1);
  ClassifierModel plain(score_mlp(2, {16}), i2);
  train_score_stic(scored, config, data, Rng(919));
  train(plain, config.base, data, Rng(919));

  ASSERT_EQ(scored.parameters().size(), plain.parameters().size());
  for (std::size_t p = 0; p < scored.parameters().size(); ++p) {
    auto a = scored.parameters()[p].tensor.data();
    auto b = plain.parameters()[p].tensor.data();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      ASSERT_DOUBLE_EQ(a[i], b[i]) << scored.parameters()[p].name;
  }
}

TEST(TrainScoreStic, RegularizedRunStaysFinite) {
  Dataset data = gen_gaussians_2d(2, 30, 0.2, 920);
  ScoreTrainConfig config = tiny_score_config();
  config.weight = 0.1;

  Rng init(921);
  ClassifierModel model(score_mlp(2, {16}), init);
  TrainResult result = train_score_stic(model, config, data, Rng(922));
  for (const auto& row : result.iterations) EXPECT_TRUE(std::isfinite(row.loss));
  for (auto& p : model.parameters())
    for (double v : p.tensor.data()) ASSERT_TRUE(std::isfinite(v));
}

TEST(TrainScoreStic, RequiresScoreHead) {
  Dataset data = gen_gaussians_2d(2, 10, 0.2, 923);
  ScoreTrainConfig config = tiny_score_config();
  ModelSpec spec = score_mlp(2);
  spec.with_score_head = false;
  Rng init(924);
  ClassifierModel model(spec, init);
  EXPECT_THROW(train_score_stic(model, config, data, Rng(925)), std::invalid_argument);
}

TEST(TrainScoreStic, LearnedScoreAlignsWithMixtureScore) {
  // two well-separated gaussians with known density: the score-matched field
  // should point the same way as the analytic mixture score on fresh points
  const double sigma = 0.35;
  Dataset data = gen_gaussians_2d(2, 250, sigma, 926);

  ScoreTrainConfig config;
  config.base.passes = 2;
  config.base.iterations_per_pass = 250;
  config.base.batch_real = 32;
  config.base.batch_fake = 8;
  config.base.fake_buffer_size = 16;
  config.base.lr = 2e-3;
  config.base.proxy_samples = 100;
  config.base.sampler.steps = 20;
  config.weight = 1.0;
  config.estimator = {TraceEstimator::Mode::kStochastic, 1};

  Rng init(927);
  ClassifierModel model(score_mlp(2, {32, 32}), init);
  train_score_stic(model, config, data, Rng(928));

  // class centroids of the generating mixture
  std::vector<std::array<double, 2>> mu(2, {0.0, 0.0});
  std::vector<int> counts(2, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    mu[data.labels[i]][0] += data.samples[i][0];
    mu[data.labels[i]][1] += data.samples[i][1];
    counts[data.labels[i]] += 1;
  }
  for (int c = 0; c < 2; ++c) {
    mu[c][0] /= counts[c];
    mu[c][1] /= counts[c];
  }

  auto mixture_score = [&](double x0, double x1) {
    double w[2], sx = 0.0, sy = 0.0, norm = 0.0;
    for (int c = 0; c < 2; ++c) {
      double dx = x0 - mu[c][0], dy = x1 - mu[c][1];
      w[c] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      norm += w[c];
    }
    for (int c = 0; c < 2; ++c) {
      sx += w[c] / norm * (mu[c][0] - x0) / (sigma * sigma);
      sy += w[c] / norm * (mu[c][1] - x1) / (sigma * sigma);
    }
    return std::array<double, 2>{sx, sy};
  };

  Dataset held_out = gen_gaussians_2d(2, 25, sigma, 929);
  double mean_cosine = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    Tensor s = model.score(held_out.sample_tensor(i));
    auto truth = mixture_score(held_out.samples[i][0], held_out.samples[i][1]);
    double dot = s.at(0) * truth[0] + s.at(1) * truth[1];
    double na = std::hypot(s.at(0), s.at(1));
    double nb = std::hypot(truth[0], truth[1]);
    if (na < 1e-12 || nb < 1e-12) continue;
    mean_cosine += dot / (na * nb);
    used += 1;
  }
  ASSERT_GT(used, 0);
  mean_cosine /= used;
  EXPECT_GT(mean_cosine, 0.5);
}
