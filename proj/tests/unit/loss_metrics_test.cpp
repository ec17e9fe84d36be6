#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "canet/errors.hpp"
#include "canet/loss.hpp"
#include "canet/metrics.hpp"
#include "support/oracles.hpp"

namespace canet {
namespace {

TEST(JointLoss, IsPrincipalPlusWeightedAuxiliary) {
  std::mt19937_64 rng(1);
  Parameter main, aux;
  main.name = "main";
  aux.name = "aux";
  main.value = testing::random_tensor({2, 3, 4, 4}, rng);
  aux.value = testing::random_tensor({2, 3, 4, 4}, rng);
  main.zero_grad();
  aux.zero_grad();
  LabelMap labels(2, 4, 4);
  for (std::size_t i = 0; i < labels.size(); ++i) labels.values[i] = static_cast<int>(i % 3);

  Tape tape;
  JointLoss loss = joint_loss(tape.param(main), tape.param(aux), labels, 0.4);
  Tape ref;
  const double p = softmax_cross_entropy(ref.constant(main.value), labels).value()[0];
  const double a = softmax_cross_entropy(ref.constant(aux.value), labels).value()[0];
  EXPECT_NEAR(loss.report.principal, p, 1e-15);
  EXPECT_NEAR(loss.report.auxiliary, a, 1e-15);
  EXPECT_NEAR(loss.report.total, p + 0.4 * a, 1e-14);
  EXPECT_NEAR(loss.total.value()[0], p + 0.4 * a, 1e-14);
  EXPECT_EQ(loss.report.lambda, 0.4);

  // The auxiliary gradient is the plain CE gradient scaled by lambda.
  tape.backward(loss.total);
  Parameter plain;
  plain.name = "plain";
  plain.value = aux.value;
  plain.zero_grad();
  Tape t2;
  t2.backward(softmax_cross_entropy(t2.param(plain), labels));
  for (std::size_t i = 0; i < aux.grad.size(); ++i) {
    EXPECT_NEAR(aux.grad[i], 0.4 * plain.grad[i], 1e-15);
  }
}

TEST(Metrics, WorkedTwoClassCase) {
  ConfusionMatrix cm = ConfusionMatrix::from_counts({{2, 1}, {0, 3}});
  EXPECT_NEAR(pixel_accuracy(cm), 5.0 / 6.0, 1e-15);
  const IouResult iou = mean_iou(cm);
  EXPECT_NEAR(iou.per_class[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(iou.per_class[1], 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(iou.mean, 17.0 / 24.0, 1e-15);
}

TEST(Metrics, AbsentClassPolicy) {
  ConfusionMatrix cm = ConfusionMatrix::from_counts({{4, 0, 0}, {1, 3, 0}, {0, 0, 0}});
  const IouResult skip = mean_iou(cm, ClassPolicy::kExcludeAbsent);
  const IouResult all = mean_iou(cm, ClassPolicy::kAllClasses);
  EXPECT_TRUE(std::isnan(skip.per_class[2]));
  EXPECT_NEAR(skip.mean, (4.0 / 5.0 + 3.0 / 4.0) / 2.0, 1e-15);
  EXPECT_NEAR(all.mean, (4.0 / 5.0 + 3.0 / 4.0) / 3.0, 1e-15);
}

TEST(Metrics, EmptyMatrixThrows) {
  ConfusionMatrix cm(3);
  EXPECT_THROW(pixel_accuracy(cm), std::domain_error);
  EXPECT_THROW(mean_iou(cm), std::domain_error);
}

TEST(Metrics, UpdateCountsPairsAndIgnoresIgnoreIndex) {
  LabelMap gt(1, 2, 3), pred(1, 2, 3);
  gt.values = {0, 1, 2, kIgnoreIndex, 1, 1};
  pred.values = {0, 2, 2, 1, 1, 0};
  ConfusionMatrix cm(3);
  cm.update(pred, gt);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(1, 2), 1u);
  EXPECT_EQ(cm.at(2, 2), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 1u);
  EXPECT_EQ(cm.ignored_pixels(), 1u);
  EXPECT_EQ(cm.counted_pixels(), 5u);
  EXPECT_EQ(cm.row_sum(1), 3u);
  EXPECT_EQ(cm.col_sum(2), 2u);
}

TEST(Metrics, InvalidLabelsLeaveMatrixUnchanged) {
  ConfusionMatrix cm(2);
  LabelMap gt(1, 1, 2), pred(1, 1, 2);
  gt.values = {0, 1};
  pred.values = {0, 1};
  cm.update(pred, gt);
  const ConfusionMatrix before = cm;
  pred.values = {0, 2};
  EXPECT_ANY_THROW(cm.update(pred, gt));
  gt.values = {7, 1};
  pred.values = {0, 1};
  EXPECT_ANY_THROW(cm.update(pred, gt));
  EXPECT_ANY_THROW(cm.update(LabelMap(1, 2, 2), gt));
  EXPECT_EQ(cm, before);
}

TEST(Metrics, BruteForcePairCountingAgrees) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 7;
    std::uniform_int_distribution<int> cls(0, k - 1);
    LabelMap gt(1, 16, 16), pred(1, 16, 16);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt.values[i] = cls(rng);
      pred.values[i] = cls(rng);
    }
    ConfusionMatrix cm(k);
    cm.update(pred, gt);
    long correct = 0;
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < k; ++c) {
      long inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool g = gt.values[i] == c, p = pred.values[i] == c;
        inter += g && p;
        uni += g || p;
      }
      correct += inter;
      if (uni > 0) {
        iou_sum += static_cast<double>(inter) / uni;
        ++present;
      }
    }
    EXPECT_NEAR(pixel_accuracy(cm), correct / 256.0, 1e-12);
    EXPECT_NEAR(mean_iou(cm).mean, iou_sum / present, 1e-12);
  }
}

TEST(Metrics, MergeEqualsJointUpdate) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 3);
  LabelMap g1(1, 4, 4), p1(1, 4, 4), g2(1, 4, 4), p2(1, 4, 4);
  for (auto* m : {&g1, &p1, &g2, &p2}) {
    for (int& v : m->values) v = cls(rng);
  }
  ConfusionMatrix a(4), b(4), both(4);
  a.update(p1, g1);
  b.update(p2, g2);
  both.update(p1, g1);
  both.update(p2, g2);
  a.merge(b);
  EXPECT_EQ(a, both);
}

}  // namespace
}  // namespace canet
