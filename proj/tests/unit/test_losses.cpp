#include <gtest/gtest.h>

#include <cmath>

#include "exitguard/error.hpp"
#include "exitguard/losses.hpp"
#include "exitguard/rng.hpp"
#include "oracles.hpp"

namespace exitguard {
namespace {

using testing::kl_divergence;
using testing::max_relative_error;
using testing::numeric_gradient;
using testing::plain_softmax;

std::vector<double> random_logits(Rng& rng, std::size_t c, double scale = 3.0) {
  std::vector<double> z(c);
  for (double& v : z) v = scale * rng.normal();
  return z;
}

TEST(CeLoss, Examples) {
  EXPECT_NEAR(ce_loss(std::vector<double>{0, 0, 0, 0}, 2).value, std::log(4.0), 1e-15);
  const auto big = ce_loss(std::vector<double>{30, 0, 0}, 0);
  EXPECT_LT(big.value, 1e-12);
  EXPECT_GE(big.value, 0.0);
  EXPECT_THROW(ce_loss(std::vector<double>{0, 0}, 2), InvalidInput);
}

TEST(CeLoss, GradientMatchesFiniteDifferences) {
  Rng rng({300, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_logits(rng, 2 + rng.below(6));
    const std::size_t y = rng.below(z.size());
    const auto g = ce_loss(z, y).grad;
    const auto num = numeric_gradient(
        [&](std::span<const double> x) { return ce_loss(x, y).value; }, z, 1e-4);
    EXPECT_LE(max_relative_error(g, num, 1e-6), 1e-5);
  }
}

TEST(KdLoss, Examples) {
  const std::vector<double> z{0.3, -1.0, 2.0};
  EXPECT_NEAR(kd_loss(z, z, 4.0).value, 0.0, 1e-15);
  // Teacher [1/3, 2/3] against a uniform student at T = 1.
  const auto kd = kd_loss(std::vector<double>{0, 0}, std::vector<double>{0, std::log(2.0)}, 1.0);
  EXPECT_NEAR(kd.value, (5.0 / 3.0) * std::log(2.0) - std::log(3.0), 1e-12);
  EXPECT_NEAR(kd.value, 0.05663, 1e-5);
}

TEST(KdLoss, MatchesDirectKlAndTemperatureScaling) {
  Rng rng({301, 0});
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 2 + rng.below(8);
    const auto s = random_logits(rng, c);
    const auto t = random_logits(rng, c);
    const double temp = std::array<double, 3>{1.0, 2.0, 4.0}[rng.below(3)];
    const double direct = temp * temp * kl_divergence(plain_softmax(t, temp), plain_softmax(s, temp));
    const double value = kd_loss(s, t, temp).value;
    EXPECT_NEAR(value, direct, 1e-10 * (1.0 + direct));
    EXPECT_GE(value, 0.0);
    std::vector<double> s_scaled(c), t_scaled(c);
    for (std::size_t i = 0; i < c; ++i) {
      s_scaled[i] = s[i] / temp;
      t_scaled[i] = t[i] / temp;
    }
    EXPECT_NEAR(value, temp * temp * kd_loss(s_scaled, t_scaled, 1.0).value,
                1e-10 * (1.0 + value));
  }
}

TEST(KdLoss, GradientMatchesFiniteDifferences) {
  Rng rng({302, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    const auto s = random_logits(rng, c);
    const auto t = random_logits(rng, c);
    const double temp = 1.0 + 3.0 * rng.uniform();
    const auto g = kd_loss(s, t, temp).grad;
    const auto num = numeric_gradient(
        [&](std::span<const double> x) { return kd_loss(x, t, temp).value; }, s);
    EXPECT_LE(max_relative_error(g, num), 1e-5);
  }
}

TEST(DkdLoss, ZeroWhenStudentEqualsTeacher) {
  const std::vector<double> z{1.0, -0.5, 0.25, 2.0};
  EXPECT_NEAR(dkd_loss(z, z, 2, 4.0).value, 0.0, 1e-14);
  for (double g : dkd_loss(z, z, 2, 4.0).grad) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST(DkdLoss, TwoClassesHaveNoNonTargetTerm) {
  const auto terms = dkd_terms(std::vector<double>{0.5, -1.0}, std::vector<double>{2.0, 0.0}, 0, 2.0);
  EXPECT_EQ(terms.nckd, 0.0);
  EXPECT_GT(terms.tckd, 0.0);
}

TEST(DkdLoss, DecompositionIdentity) {
  Rng rng({303, 0});
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + rng.below(9);
    const auto s = random_logits(rng, c);
    const auto t = random_logits(rng, c);
    const std::size_t y = rng.below(c);
    const double temp = std::array<double, 3>{1.0, 2.0, 4.0}[rng.below(3)];
    const auto terms = dkd_terms(s, t, y, temp);
    const double kd = kd_loss(s, t, temp).value;
    EXPECT_NEAR(terms.tckd + (1.0 - terms.teacher_target) * terms.nckd, kd, 1e-8);
  }
}

TEST(DkdLoss, MatchesDirectBinaryAndRenormalizedKl) {
  Rng rng({304, 0});
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = 3 + rng.below(6);
    const auto s = random_logits(rng, c);
    const auto t = random_logits(rng, c);
    const std::size_t y = rng.below(c);
    const double temp = 1.0 + 3.0 * rng.uniform();
    const auto ps = plain_softmax(s, temp);
    const auto pt = plain_softmax(t, temp);
    const double tckd = temp * temp *
                        kl_divergence({pt[y], 1.0 - pt[y]}, {ps[y], 1.0 - ps[y]});
    std::vector<double> hs, ht;
    for (std::size_t k = 0; k < c; ++k) {
      if (k == y) continue;
      hs.push_back(ps[k] / (1.0 - ps[y]));
      ht.push_back(pt[k] / (1.0 - pt[y]));
    }
    const double nckd = temp * temp * kl_divergence(ht, hs);
    const double wt = 0.5 + rng.uniform(), wn = 0.5 + rng.uniform();
    EXPECT_NEAR(dkd_loss(s, t, y, temp, wt, wn).value, wt * tckd + wn * nckd,
                1e-9 * (1.0 + tckd + nckd));
  }
}

TEST(DkdLoss, GradientMatchesFiniteDifferences) {
  Rng rng({305, 0});
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = 2 + rng.below(7);
    const auto s = random_logits(rng, c, 2.0);
    const auto t = random_logits(rng, c, 2.0);
    const std::size_t y = rng.below(c);
    const double temp = std::array<double, 3>{1.0, 2.0, 4.0}[rng.below(3)];
    const double wt = 0.5 + rng.uniform(), wn = 0.5 + rng.uniform();
    const auto g = dkd_loss(s, t, y, temp, wt, wn).grad;
    const auto num = numeric_gradient(
        [&](std::span<const double> x) { return dkd_loss(x, t, y, temp, wt, wn).value; }, s);
    EXPECT_LE(max_relative_error(g, num), 1e-4) << "trial " << trial;
  }
}

std::vector<std::vector<double>> random_exits(Rng& rng, std::size_t k, std::size_t c) {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < k; ++j) out.push_back(random_logits(rng, c, 2.0));
  return out;
}

TEST(TotalLoss, NoDistillationIsWeightedCrossEntropy) {
  Rng rng({306, 0});
  const auto student = random_exits(rng, 3, 4);
  LossConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  const auto total = total_loss(student, {}, 1, cfg);
  double expected = 0.0;
  for (const auto& z : student) expected += ce_loss(z, 1).value / 3.0;
  EXPECT_NEAR(total.value, expected, 1e-14);
  EXPECT_EQ(total.distill, 0.0);
  EXPECT_EQ(total.consistency, 0.0);
}

TEST(TotalLoss, ComposesTermsWithWeights) {
  Rng rng({307, 0});
  const auto student = random_exits(rng, 3, 5);
  const auto teacher = random_exits(rng, 3, 5);
  LossConfig cfg;
  cfg.exit_weights = {0.2, 0.3, 0.5};
  const auto total = total_loss(student, teacher, 2, cfg);
  double expected = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    expected += cfg.exit_weights[j] *
                (ce_loss(student[j], 2).value +
                 cfg.alpha * dkd_loss(student[j], teacher[2], 2, cfg.temperature).value);
    if (j < 2) {
      expected += cfg.exit_weights[j] * cfg.beta *
                  kd_loss(student[j], student[2], cfg.temperature).value;
    }
  }
  EXPECT_NEAR(total.value, expected, 1e-12);
  EXPECT_NEAR(total.ce + total.distill + total.consistency, total.value, 1e-12);

  LossConfig no_consistency = cfg;
  no_consistency.beta = 0.0;
  EXPECT_EQ(total_loss(student, teacher, 2, no_consistency).consistency, 0.0);
}

TEST(TotalLoss, ExitMatchedTeacherAndStandardKd) {
  Rng rng({308, 0});
  const auto student = random_exits(rng, 2, 3);
  const auto teacher = random_exits(rng, 2, 3);
  LossConfig cfg;
  cfg.beta = 0.0;
  cfg.exit_matched_teacher = true;
  cfg.distill = DistillKind::kKd;
  const auto total = total_loss(student, teacher, 0, cfg);
  double expected = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    expected += 0.5 * (ce_loss(student[j], 0).value +
                       kd_loss(student[j], teacher[j], cfg.temperature).value);
  }
  EXPECT_NEAR(total.value, expected, 1e-12);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  Rng rng({309, 0});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(3), c = 2 + rng.below(5);
    const auto student = random_exits(rng, k, c);
    const auto teacher = random_exits(rng, k, c);
    const std::size_t y = rng.below(c);
    LossConfig cfg;
    const std::vector<double> target = student.back();
    const auto total = total_loss(student, teacher, y, cfg, target);
    for (std::size_t j = 0; j < k; ++j) {
      const auto num = numeric_gradient(
          [&](std::span<const double> x) {
            auto s = student;
            s[j].assign(x.begin(), x.end());
            return total_loss(s, teacher, y, cfg, target).value;
          },
          student[j]);
      EXPECT_LE(max_relative_error(total.grads[j], num), 1e-4);
    }
  }
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(validate(cfg, 3));
  EXPECT_EQ(cfg.weights_for(4), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  cfg.exit_weights = {0.5, 0.4};
  EXPECT_THROW(validate(cfg, 2), ConfigError);
  cfg.exit_weights = {0.5, 0.5};
  EXPECT_THROW(validate(cfg, 3), ConfigError);
  cfg.exit_weights = {1.5, -0.5};
  EXPECT_THROW(validate(cfg, 2), ConfigError);
  cfg = {};
  cfg.temperature = 0.0;
  EXPECT_THROW(validate(cfg, 2), ConfigError);
  cfg = {};
  cfg.alpha = -1.0;
  EXPECT_THROW(validate(cfg, 2), ConfigError);
}

}  // namespace
}  // namespace exitguard
