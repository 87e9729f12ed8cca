#include <gtest/gtest.h>

#include <cmath>

#include "mfresnet/dynamics.hpp"
#include "mfresnet/errors.hpp"
#include "mfresnet/rademacher.hpp"
#include "mfresnet/verify.hpp"
#include "support.hpp"

using namespace mfresnet;

TEST(Exhaustive, ClosedFormExamples) {
  EXPECT_EQ(verify::exhaustive_rademacher(Eigen::MatrixXd::Zero(3, 5)), 0.0);
  Eigen::MatrixXd pm(2, 4);
  pm.row(0).setConstant(1.0);
  pm.row(1).setConstant(-1.0);
  EXPECT_DOUBLE_EQ(verify::exhaustive_rademacher(pm), 0.375);
  Eigen::MatrixXd single = Eigen::MatrixXd::Random(1, 6);
  EXPECT_NEAR(verify::exhaustive_rademacher(single), 0.0, 1e-15);
}

TEST(MonteCarlo, ZeroFamilyIsExactlyZero) {
  const auto est = empirical_rademacher(Eigen::MatrixXd::Zero(4, 10), 200, 1);
  EXPECT_EQ(est.mean, 0.0);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.n_draws, 200);
}

TEST(MonteCarlo, AgreesWithEnumerationWithinThreeStandardErrors) {
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 12; ++rep) {
    const int members = 1 + rep % 4, n = 3 + rep % 8;
    Eigen::MatrixXd F(members, n);
    for (int j = 0; j < members; ++j)
      for (int i = 0; i < n; ++i) F(j, i) = g(rng);
    const double exact = verify::exhaustive_rademacher(F);
    const auto est = empirical_rademacher(F, 4000, 100 + rep);
    EXPECT_LE(std::abs(est.mean - exact), 3.0 * est.std_error + 1e-12) << "rep " << rep;
  }
}

TEST(MonteCarlo, MonotoneUnderFamilyGrowthWithCommonSigns) {
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd F(6, 12);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 12; ++i) F(j, i) = g(rng);
  double prev = -1.0;
  for (int k = 1; k <= 6; ++k) {
    const double r = empirical_rademacher(Eigen::MatrixXd(F.topRows(k)), 300, 77).mean;
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(MonteCarlo, ScaleEquivariantAndSeedDeterministic) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Random(3, 8);
  const auto a = empirical_rademacher(F, 250, 9);
  const auto b = empirical_rademacher(Eigen::MatrixXd(2.5 * F), 250, 9);
  EXPECT_NEAR(b.mean, 2.5 * a.mean, 1e-12);
  EXPECT_EQ(empirical_rademacher(F, 250, 9).mean, a.mean);
  EXPECT_THROW(empirical_rademacher(F, 50, 9), ContractViolation);
}

TEST(MonteCarlo, FamilyOverloadMatchesOutputs) {
  const auto data = random_unit_dataset(6, 2, 1);
  FunctionFamily fam;
  for (std::uint64_t s = 0; s < 3; ++s) fam.members.push_back(testkit::random_net({2, 2, 3, 3, 1.0, 1.0, Activation::Tanh}, s));
  const Eigen::MatrixXd F = family_outputs(fam, data);
  EXPECT_EQ(empirical_rademacher(fam, data, 200, 3).mean, empirical_rademacher(F, 200, 3).mean);
  fam.members.push_back(testkit::random_net({2, 2, 4, 3, 1.0, 1.0, Activation::Tanh}, 9));
  EXPECT_THROW(family_outputs(fam, data), ContractViolation);
  EXPECT_THROW(FunctionFamily{}.validate(), ContractViolation);
}

TEST(GeneralizationBound, Examples) {
  EXPECT_NEAR(generalization_bound(0.0, 0.0, 100, 0.05), 6.0 * std::sqrt(std::log(40.0) / 200.0), 1e-15);
  EXPECT_NEAR(generalization_bound(0.1, 0.02, 100, 0.05), 0.4 + 6.0 * std::sqrt(std::log(40.0) / 200.0) + 0.2, 1e-15);
  EXPECT_GT(generalization_bound(0.0, 0.0, 10, 0.01), generalization_bound(0.0, 0.0, 10, 0.1));
  EXPECT_THROW(generalization_bound(0.0, 0.0, 10, 1.0), ContractViolation);
}

TEST(GaussianKl, SelfIsZeroAndShiftMatchesClosedForm) {
  Rng rng(3);
  const Cloud c = testkit::random_cloud(40, 2, rng);
  const GaussianFit a = fit_gaussian(c);
  EXPECT_NEAR(gaussian_kl(a, a), 0.0, 1e-12);
  GaussianFit b = a;
  b.mean += Eigen::Vector2d(0.3, 0.0);
  const double expected = 0.5 * Eigen::Vector2d(0.3, 0.0).dot(a.cov.inverse() * Eigen::Vector2d(0.3, 0.0));
  EXPECT_NEAR(gaussian_kl(a, b), expected, 1e-9);
}

TEST(KlRadius, ZeroForSnapshotAndGrowsWithTraining) {
  ScaledResNet net = testkit::random_net({2, 2, 8, 8, 1.0, 2.0, Activation::Tanh}, 2);
  const InitSnapshot snap(net);
  FunctionFamily fam;
  fam.members.push_back(net);
  EXPECT_NEAR(kl_radius_for_family(fam, snap), 0.0, 1e-10);
  const auto data = random_unit_dataset(6, 2, 2);
  for (int s = 0; s < 30; ++s) net = gradient_flow_step(net, functional_gradients(net, data), 0.05);
  fam.members.push_back(net);
  EXPECT_GT(kl_radius_for_family(fam, snap), 0.0);
}
