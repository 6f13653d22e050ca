#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>

#include "lfm/errors.hpp"
#include "lfm/model.hpp"
#include "test_support.hpp"

namespace lfm {
namespace {

std::vector<Tensor> random_images(std::size_t n, std::size_t size, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t(Shape{3, size, size});
    for (double& v : t.values()) v = rng.uniform();
    out.push_back(std::move(t));
  }
  return out;
}

ModelConfig small_config(Pooling pooling = Pooling::tkp) {
  ModelConfig cfg;
  cfg.pooling = pooling;
  cfg.tkp.k = 4;
  return cfg;
}

TEST(Model, FeatureWidthAndParameterOrder) {
  Rng rng(1);
  LfmModel model(ModelConfig{}, rng);
  EXPECT_EQ(model.config.feature_width(), 64u * 16u);
  const auto params = model.parameters();
  ASSERT_EQ(params.size(), 12u);
  EXPECT_EQ(params[0]->shape(), (Shape{32, 3, 2, 2}));
  EXPECT_EQ(params[1]->shape(), (Shape{32}));
  EXPECT_EQ(params[8]->shape(), (Shape{64, 64, 1, 1}));
  EXPECT_EQ(params[10]->shape(), (Shape{1, 1024}));
  EXPECT_EQ(params[11]->shape(), (Shape{1}));
  std::size_t n = 0;
  for (const Tensor* p : params) n += p->numel();
  EXPECT_EQ(n, total_param_count(model));

  ModelConfig gap = ModelConfig{};
  gap.pooling = Pooling::gap;
  EXPECT_EQ(gap.feature_width(), 64u);
  EXPECT_EQ(total_param_count(gap), total_param_count(ModelConfig{}) - 64 * 15);
}

TEST(Model, LossComposition) {
  const LossReport r = compose_loss(0.7, 0.3, 0.1);
  EXPECT_DOUBLE_EQ(r.total, 0.73);
  EXPECT_EQ(compose_loss(0.7, 0.0, 0.1).total, 0.7);
}

TEST(Model, TrainingBatchReportsBothBranches) {
  Rng rng(2);
  const LfmModel model(small_config(), rng);
  const auto images = random_images(3, 32, rng);
  const std::vector<int> labels{0, 1, 1};
  const TrainForward out = forward_train(images, labels, model, Rng(5));
  ASSERT_EQ(out.scores.size(), 3u);
  ASSERT_EQ(out.aux_scores.size(), 3u);
  std::vector<double> y(labels.begin(), labels.end());
  EXPECT_NEAR(out.loss.loss_a, bce_loss(out.scores, y), 1e-15);
  EXPECT_NEAR(out.loss.loss_b, bce_loss(out.aux_scores, y), 1e-15);
  EXPECT_EQ(out.loss.total, out.loss.loss_a + 0.1 * out.loss.loss_b);
  EXPECT_EQ(out.grads.size(), model.parameters().size());
}

TEST(Model, NoAuxiliaryLossWithoutRandomK) {
  Rng rng(3);
  const auto images = random_images(2, 32, rng);
  const std::vector<int> labels{0, 1};
  for (Pooling p : {Pooling::gap, Pooling::gmp}) {
    const LfmModel model(small_config(p), rng);
    const TrainForward out = forward_train(images, labels, model, Rng(1));
    EXPECT_TRUE(out.aux_scores.empty());
    EXPECT_EQ(out.loss.loss_b, 0.0);
    EXPECT_EQ(out.loss.total, out.loss.loss_a);
  }
  ModelConfig cfg = small_config();
  cfg.tkp.rks_enabled = false;
  const LfmModel model(cfg, rng);
  EXPECT_EQ(forward_train(images, labels, model, Rng(1)).loss.loss_b, 0.0);
}

// Finite differences of the batch loss for a fixed random stream.
void expect_gradients(const LfmModel& base, const std::vector<Tensor>& images,
                      const std::vector<int>& labels, bool training) {
  LfmModel model = base;
  const Rng stream(77);
  const auto loss = [&] {
    return training ? forward_train(images, labels, model, stream).loss.total
                    : forward_deterministic(images, labels, model).loss.total;
  };
  const TrainForward analytic =
      training ? forward_train(images, labels, model, stream) : forward_deterministic(images, labels, model);
  const auto params = model.parameters();
  Rng pick(9);
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (int t = 0; t < 3; ++t) {
      const std::size_t i = pick.below(params[p]->numel());
      const double h = 1e-6;
      const double numeric = testing::central_difference(params[p]->values(), i, h, loss);
      const double a = analytic.grads[p][i];
      EXPECT_NEAR(a, numeric, 1e-6 + 1e-4 * std::abs(a)) << "param " << p << " index " << i;
    }
  }
}

TEST(Model, TrainingGradientsMatchFiniteDifferences) {
  Rng rng(4);
  const LfmModel model(small_config(), rng);
  expect_gradients(model, random_images(2, 32, rng), {0, 1}, true);
}

TEST(Model, InferenceGradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (Pooling p : {Pooling::tkp, Pooling::gap, Pooling::gmp}) {
    const LfmModel model(small_config(p), rng);
    expect_gradients(model, random_images(2, 32, rng), {1, 0}, false);
  }
}

TEST(Model, BatchResultDoesNotDependOnThreadCount) {
  Rng rng(6);
  const LfmModel model(small_config(), rng);
  const auto images = random_images(5, 32, rng);
  const std::vector<int> labels{0, 1, 0, 1, 1};
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const TrainForward a = forward_train(images, labels, model, Rng(3));
  omp_set_num_threads(4);
  const TrainForward b = forward_train(images, labels, model, Rng(3));
  omp_set_num_threads(saved);
  EXPECT_EQ(a.grads, b.grads);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.loss.total, b.loss.total);
}

TEST(Model, InferenceMatchesDeterministicForward) {
  Rng rng(7);
  const LfmModel model(small_config(), rng);
  const auto images = random_images(1, 32, rng);
  const std::vector<int> labels{1};
  const Inference r = infer(images[0], model);
  EXPECT_EQ(r.probability, forward_deterministic(images, labels, model).scores[0]);
  EXPECT_EQ(r.probability, sigmoid(infer_logit(images[0], model)));
  LfmModel strict = model;
  strict.config.decision_threshold = r.probability;
  EXPECT_EQ(infer(images[0], strict).label, 1);
  strict.config.decision_threshold = std::nextafter(r.probability, 2.0);
  EXPECT_EQ(infer(images[0], strict).label, 0);
}

TEST(Model, RejectsBadBatches) {
  Rng rng(8);
  const LfmModel model(small_config(), rng);
  const auto images = random_images(2, 32, rng);
  EXPECT_THROW(forward_train(images, std::vector<int>{0}, model, Rng(0)), DimensionError);
  EXPECT_THROW(forward_train(images, std::vector<int>{0, 2}, model, Rng(0)), DomainError);
  EXPECT_THROW(forward_train({}, {}, model, Rng(0)), DomainError);
  const auto odd = random_images(1, 33, rng);
  EXPECT_THROW(forward_deterministic(odd, std::vector<int>{1}, model), DimensionError);
  EXPECT_THROW(parse_pooling("avg"), ConfigError);
  ModelConfig bad;
  bad.alpha = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

}  // namespace
}  // namespace lfm
