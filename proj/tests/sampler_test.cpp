#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "stic/dataset.hpp"
#include "stic/sampler.hpp"
#include "stic/trainer.hpp"
#include "support/checks.hpp"

using namespace stic;
using testsupport::max_rel_err;
using testsupport::numeric_grad;

namespace {

ModelSpec small_cnn_spec() {
  ModelSpec spec;
  spec.kind = ArchKind::kCnn;
  spec.input_shape = {1, 8, 8};
  spec.hidden = {4, 8};
  spec.num_real_classes = 2;
  return spec;
}

// p(y=0|x) = sigmoid(x) on scalar input: relu kept linear by a bias shift
ClassifierModel logistic_model(Rng& rng) {
  ModelSpec spec;
  spec.kind = ArchKind::kMlp;
  spec.input_shape = {1};
  spec.hidden = {1};
  spec.num_real_classes = 1;
  ClassifierModel model(spec, rng);
  auto w0 = model.parameters()[0].tensor.mutable_data();
  auto b0 = model.parameters()[1].tensor.mutable_data();
  auto wh = model.parameters()[2].tensor.mutable_data();
  auto bh = model.parameters()[3].tensor.mutable_data();
  w0[0] = 1.0;
  b0[0] = 10.0;  // h = relu(x + 10) = x + 10 for |x| < 10
  wh[0] = 1.0;   // real-class logit = h - 10 = x
  wh[1] = 0.0;   // fake logit = 0
  bh[0] = -10.0;
  bh[1] = 0.0;
  return model;
}

ClassifierModel trained_two_gaussian_model(std::uint64_t seed) {
  Dataset data = gen_gaussians_2d(2, 80, 0.15, seed);
  Rng rng(seed + 1);
  ModelSpec spec;
  spec.kind = ArchKind::kMlp;
  spec.input_shape = {2};
  spec.hidden = {16};
  spec.num_real_classes = 2;
  ClassifierModel model(spec, rng);
  TrainConfig config;
  config.passes = 1;
  config.iterations_per_pass = 250;
  config.batch_real = 16;
  config.batch_fake = 0;
  config.fake_buffer_size = 0;
  config.lr = 1e-2;
  config.proxy_samples = 10;
  config.sampler.steps = 0;
  train(model, config, data, Rng(seed + 2));
  return model;
}

}  // namespace

TEST(Gram, IdentityMapGivesIdentity) {
  Tensor f = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor g = gram_matrix(f);
  EXPECT_DOUBLE_EQ(g.at(0), 1.0);
  EXPECT_DOUBLE_EQ(g.at(1), 0.0);
  EXPECT_DOUBLE_EQ(g.at(2), 0.0);
  EXPECT_DOUBLE_EQ(g.at(3), 1.0);
}

TEST(Gram, AllOnesMap) {
  Tensor g = gram_matrix(Tensor::from({2, 2}, {1, 1, 1, 1}));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.at(i), 2.0);
}

TEST(Gram, HandWorkedTwoByTwo) {
  Tensor g = gram_matrix(Tensor::from({2, 2}, {1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(g.at(0), 5.0);
  EXPECT_DOUBLE_EQ(g.at(1), 11.0);
  EXPECT_DOUBLE_EQ(g.at(2), 11.0);
  EXPECT_DOUBLE_EQ(g.at(3), 25.0);
}

TEST(Gram, RejectsNonMatrixInput) {
  EXPECT_THROW(gram_matrix(Tensor::from({4}, {1, 2, 3, 4})), std::invalid_argument);
}

TEST(StyleLoss, ZeroWhenMapsMatchTarget) {
  Rng rng(401);
  ClassifierModel model(small_cnn_spec(), rng);
  Tensor x = random_uniform({1, 8, 8}, rng, -1.0, 1.0);
  GramTarget target = make_gram_target(model, x, {0, 1}, "self");
  EXPECT_NEAR(style_loss(model, x, target).value(), 0.0, 1e-18);
}

TEST(StyleLoss, SingleUnitMapClosedForm) {
  // one 1x1 activation F = [[2]]: G = 4 against anchor A = 1 gives
  // (4-1)^2 / (4 * 1 * 1) = 2.25
  GramTarget target;
  target.layers = {0};
  target.matrices = {Tensor::from({1, 1}, {1.0})};
  std::vector<Tensor> maps = {Tensor::from({1, 1}, {2.0})};
  EXPECT_DOUBLE_EQ(style_loss_from_maps(maps, target).value(), 2.25);
}

TEST(StyleLoss, NonNegativeEverywhere) {
  Rng rng(402);
  ClassifierModel model(small_cnn_spec(), rng);
  GramTarget target = make_gram_target(model, random_uniform({1, 8, 8}, rng, -1.0, 1.0), {0, 1},
                                       "ref");
  for (int i = 0; i < 5; ++i) {
    Tensor x = random_uniform({1, 8, 8}, rng, -1.0, 1.0);
    EXPECT_GE(style_loss(model, x, target).value(), 0.0);
  }
}

TEST(StyleLoss, GradientMatchesFiniteDifferences) {
  Rng rng(403);
  ClassifierModel model(small_cnn_spec(), rng);
  GramTarget target =
      make_gram_target(model, random_uniform({1, 8, 8}, rng, -1.0, 1.0), {0, 1}, "ref");
  std::vector<double> xv(64);
  for (double& v : xv) v = rng.uniform(-0.9, 0.9);

  Tensor x = Tensor::from({1, 8, 8}, xv, true);
  InputGradient g = grad_wrt_input(style_loss(model, x, target), x);
  auto fd = numeric_grad(
      [&](const std::vector<double>& p) {
        return style_loss(model, Tensor::from({1, 8, 8}, p), target).value();
      },
      xv);
  std::vector<double> analytic(g.grad.data().begin(), g.grad.data().end());
  EXPECT_LT(max_rel_err(analytic, fd), 1e-4);
}

TEST(StyleLoss, LayerMismatchRejected) {
  Rng rng(404);
  ClassifierModel model(small_cnn_spec(), rng);
  GramTarget target;
  target.layers = {5};
  target.matrices = {Tensor::from({1, 1}, {1.0})};
  EXPECT_THROW(style_loss(model, Tensor::zeros({1, 8, 8}), target), std::invalid_argument);
}

TEST(GrmalaStep, AllZeroStepSizesFixPoint) {
  Rng rng(405);
  ClassifierModel model = logistic_model(rng);
  Chain chain;
  chain.state = Tensor::from({1}, {0.25});
  chain.target = one_hot(0, 2);
  chain.rng = Rng(9);
  SamplerConfig config;
  config.eps1 = 0.0;
  config.eps2 = 0.0;
  config.eps3 = 0.0;
  grmala_step(chain, model, GramTarget(), config);
  EXPECT_DOUBLE_EQ(chain.state.at(0), 0.25);
  EXPECT_EQ(chain.t, 1);
  EXPECT_FALSE(chain.failed);
}

TEST(GrmalaStep, LogisticGradientAtZeroIsHalf) {
  Rng rng(406);
  ClassifierModel model = logistic_model(rng);
  Chain chain;
  chain.state = Tensor::from({1}, {0.0});
  chain.target = one_hot(0, 2);
  chain.rng = Rng(10);
  SamplerConfig config;
  config.eps1 = 1.0;
  config.eps2 = 0.0;
  config.eps3 = 0.0;
  grmala_step(chain, model, GramTarget(), config);
  // d/dx log sigmoid(x) at 0 = 1 - sigmoid(0) = 0.5
  EXPECT_NEAR(chain.state.at(0), 0.5, 1e-12);
}

TEST(GrmalaStep, PureNoiseStepMatchesSeededDraws) {
  Rng rng(407);
  ClassifierModel model = logistic_model(rng);
  Chain chain;
  chain.state = Tensor::from({1}, {0.1});
  chain.target = one_hot(0, 2);
  chain.rng = Rng(123);
  SamplerConfig config;
  config.eps1 = 0.0;
  config.eps2 = 0.0;
  config.eps3 = 0.05;
  config.clip = false;
  grmala_step(chain, model, GramTarget(), config);

  Rng expect_rng(123);
  double noise = expect_rng.normal(0.0, 0.05);
  EXPECT_DOUBLE_EQ(chain.state.at(0), 0.1 + noise);
}

TEST(GrmalaStep, ClipKeepsStateInRange) {
  Rng rng(408);
  ClassifierModel model = logistic_model(rng);
  Chain chain;
  chain.state = Tensor::from({1}, {0.9});
  chain.target = one_hot(0, 2);
  chain.rng = Rng(11);
  SamplerConfig config;
  config.eps1 = 5.0;  // oversized step to force the clip
  config.eps2 = 0.0;
  config.eps3 = 0.0;
  grmala_step(chain, model, GramTarget(), config);
  EXPECT_LE(chain.state.at(0), 1.0);
}

TEST(MalaApprox, ZeroStepSizesFixPoint) {
  Rng rng(409);
  ClassifierModel model = logistic_model(rng);
  Chain chain;
  chain.state = Tensor::from({1}, {0.4});
  chain.rng = Rng(12);
  mala_approx_step(chain, model, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(chain.state.at(0), 0.4);
}

TEST(MalaApprox, QuadraticSurrogateClosedForm) {
  Chain chain;
  chain.state = Tensor::from({1}, {1.0});
  chain.rng = Rng(13);
  auto log_density = [](const Tensor& x) { return scalar_mul(sum(square(x)), -0.5); };
  mala_approx_step_on(chain, log_density, 0.1, 0.0);
  // x' = x + 0.1 * (-x) = 0.9
  EXPECT_NEAR(chain.state.at(0), 0.9, 1e-12);
}

TEST(MalaApprox, MatchesMarginalTargetLangevinStep) {
  Rng rng(410);
  ModelSpec spec;
  spec.kind = ArchKind::kMlp;
  spec.input_shape = {2};
  spec.hidden = {6};
  spec.num_real_classes = 2;
  ClassifierModel model(spec, rng);

  Chain a;
  a.state = Tensor::from({2}, {0.3, -0.2});
  a.rng = Rng(77);
  mala_approx_step(a, model, 0.02, 0.05);

  Chain b;  // undefined target => the step ascends the log-marginal
  b.state = Tensor::from({2}, {0.3, -0.2});
  b.rng = Rng(77);
  SamplerConfig config;
  config.eps1 = 0.02;
  config.eps2 = 0.0;
  config.eps3 = 0.05;
  config.clip = false;
  grmala_step(b, model, GramTarget(), config);

  EXPECT_DOUBLE_EQ(a.state.at(0), b.state.at(0));
  EXPECT_DOUBLE_EQ(a.state.at(1), b.state.at(1));
}

TEST(Synthesize, ZeroStepsReturnsInit) {
  Rng rng(411);
  ClassifierModel model = trained_two_gaussian_model(500);
  Tensor init = Tensor::from({2}, {0.7, -0.4});
  SamplerConfig config;
  config.steps = 0;
  config.init = SamplerConfig::Init::kGiven;
  SynthesisResult r = synthesize(model, one_hot(0, 3), 0, GramTarget(), config, Rng(1), init);
  EXPECT_DOUBLE_EQ(r.chain.state.at(0), 0.7);
  EXPECT_DOUBLE_EQ(r.chain.state.at(1), -0.4);
  EXPECT_EQ(r.trajectory.size(), 1u);
}

TEST(Synthesize, SeededRunsAreBitIdentical) {
  ClassifierModel model = trained_two_gaussian_model(510);
  SamplerConfig config;
  config.steps = 20;
  SynthesisResult r1 = synthesize(model, one_hot(1, 3), 1, GramTarget(), config, Rng(42));
  SynthesisResult r2 = synthesize(model, one_hot(1, 3), 1, GramTarget(), config, Rng(42));
  ASSERT_EQ(r1.chain.state.numel(), r2.chain.state.numel());
  for (std::int64_t i = 0; i < r1.chain.state.numel(); ++i) {
    EXPECT_DOUBLE_EQ(r1.chain.state.at(i), r2.chain.state.at(i));
  }
  ASSERT_EQ(r1.trajectory.size(), r2.trajectory.size());
  for (std::size_t i = 0; i < r1.trajectory.size(); ++i) {
    EXPECT_DOUBLE_EQ(r1.trajectory[i].log_cond, r2.trajectory[i].log_cond);
  }
}

TEST(Synthesize, TrainedToyReachesConfidentClassRegion) {
  ClassifierModel model = trained_two_gaussian_model(520);
  SamplerConfig config;
  config.steps = 60;
  SynthesisResult r = synthesize(model, one_hot(0, 3), 0, GramTarget(), config, Rng(7));
  ASSERT_FALSE(r.chain.failed);
  Tensor probs = softmax(model.forward_logits(r.chain.state), 0);
  EXPECT_GT(probs.at(0), 0.9);
}

TEST(Synthesize, RejectsMissingTarget) {
  ClassifierModel model = trained_two_gaussian_model(530);
  SamplerConfig config;
  EXPECT_THROW(synthesize(model, Tensor(), 0, GramTarget(), config, Rng(1)),
               std::invalid_argument);
}

TEST(Interpolate, EndpointsExact) {
  Tensor a = Tensor::from({3}, {0.0, 1.0, 2.0});
  Tensor b = Tensor::from({3}, {6.0, 5.0, 4.0});
  std::vector<Tensor> path = interpolate(a, b, 4);
  ASSERT_EQ(path.size(), 4u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(path.front().at(i), a.at(i));
    EXPECT_DOUBLE_EQ(path.back().at(i), b.at(i));
  }
}

TEST(Interpolate, MidpointOfZeroAndTwoIsOne) {
  Tensor a = Tensor::zeros({4});
  Tensor b = Tensor::full({4}, 2.0);
  std::vector<Tensor> path = interpolate(a, b, 3);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(path[1].at(i), 1.0);
}

TEST(Interpolate, FivePointWeights) {
  Tensor a = Tensor::from({1}, {0.0});
  Tensor b = Tensor::from({1}, {1.0});
  std::vector<Tensor> path = interpolate(a, b, 5);
  std::vector<double> expected = {0.0, 0.25, 0.5, 0.75, 1.0};
  ASSERT_EQ(path.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_DOUBLE_EQ(path[i].at(0), expected[i]);
  }
}

TEST(Interpolate, RejectsDegenerateCount) {
  Tensor a = Tensor::from({1}, {0.0});
  EXPECT_THROW(interpolate(a, a, 1), std::invalid_argument);
}

TEST(NeighborhoodStarts, ZeroSigmaCopiesBase) {
  Rng rng(412);
  Tensor x = Tensor::from({3}, {0.1, 0.2, 0.3});
  std::vector<Tensor> starts = neighborhood_starts(x, 0.0, 5, rng);
  ASSERT_EQ(starts.size(), 5u);
  for (const Tensor& s : starts) {
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(s.at(i), x.at(i));
  }
}

TEST(NeighborhoodStarts, EmpiricalStdMatchesSigma) {
  Rng rng(413);
  const double sigma = 0.2;
  const int n = 10000;
  Tensor x = Tensor::from({2}, {1.0, -1.0});
  std::vector<Tensor> starts = neighborhood_starts(x, sigma, n, rng);
  for (int coord = 0; coord < 2; ++coord) {
    double s = 0.0, s2 = 0.0;
    for (const Tensor& t : starts) {
      double d = t.at(coord) - x.at(coord);
      s += d;
      s2 += d * d;
    }
    double mean = s / n;
    double std_dev = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(std_dev, sigma, 0.05 * sigma);
  }
}

TEST(NeighborhoodStarts, ZeroCountGivesEmptyList) {
  Rng rng(414);
  EXPECT_TRUE(neighborhood_starts(Tensor::from({1}, {0.0}), 0.1, 0, rng).empty());
}

TEST(Trajectory, CsvHeaderAndRows) {
  std::ostringstream os;
  write_trajectory_csv(os, {{0, -1.5, 0.25}, {1, -1.0, 0.125}});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "step,log_cond,style_loss");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 2), "0,");
}

TEST(GramTargets, MixIsConvexPerEntry) {
  Rng rng(415);
  ClassifierModel model(small_cnn_spec(), rng);
  GramTarget a = make_gram_target(model, random_uniform({1, 8, 8}, rng, -1, 1), {1}, "a");
  GramTarget b = make_gram_target(model, random_uniform({1, 8, 8}, rng, -1, 1), {1}, "b");
  GramTarget m = mix_gram_targets(a, b, 0.25);
  for (std::int64_t i = 0; i < m.matrices[0].numel(); ++i) {
    EXPECT_NEAR(m.matrices[0].at(i), 0.25 * a.matrices[0].at(i) + 0.75 * b.matrices[0].at(i),
                1e-12);
  }
}
