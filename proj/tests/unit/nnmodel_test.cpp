#include <gtest/gtest.h>

#include <cmath>

#include "mfresnet/errors.hpp"
#include "mfresnet/nnmodel.hpp"
#include "support.hpp"

using namespace mfresnet;

namespace {

EncoderParticle enc(Eigen::VectorXd u, Eigen::VectorXd w, double b) { return {std::move(u), std::move(w), b}; }

}  // namespace

TEST(Sigma, ZeroCoefficientGivesZero) {
  const auto th = enc(Eigen::Vector2d::Zero(), Eigen::Vector2d(0.4, -2), 0.3);
  EXPECT_EQ(sigma(Eigen::Vector2d(5, -1), th, Activation::Tanh), Eigen::VectorXd(Eigen::Vector2d::Zero()));
}

TEST(Sigma, ScalarEvaluation) {
  const auto th = enc(Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 0), 0.0);
  const Eigen::VectorXd s = sigma(Eigen::Vector2d(1, 0), th, Activation::Tanh);
  EXPECT_NEAR(s(0), 1.52318, 1e-5);
  EXPECT_EQ(s(1), 0.0);
}

TEST(Sigma, AntitheticPairCancels) {
  const auto th = enc(Eigen::Vector2d(0.7, -1.2), Eigen::Vector2d(0.3, 0.9), -0.4);
  const auto mirror = enc(-th.u, th.w, th.b);
  for (double t : {-3.0, 0.0, 0.5, 2.0}) {
    const Eigen::Vector2d z(t, 1.0 - t);
    EXPECT_EQ(sigma(z, th, Activation::Tanh) + sigma(z, mirror, Activation::Tanh),
              Eigen::VectorXd(Eigen::Vector2d::Zero()));
  }
}

TEST(Sigma, DimensionMismatchRejected) {
  const auto th = enc(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), 0.0);
  EXPECT_THROW(sigma(Eigen::Vector3d(1, 1, 1), th, Activation::Tanh), ContractViolation);
}

TEST(HOut, Examples) {
  PredictorParticle om{0.0, Eigen::Vector2d(1, 1), 0.2};
  EXPECT_EQ(h_out(Eigen::Vector2d(3, 1), om, Activation::Tanh), 0.0);
  om = {1.0, Eigen::Vector2d::Zero(), 0.0};
  EXPECT_EQ(h_out(Eigen::Vector2d(3, 1), om, Activation::Tanh), 0.0);
  om = {3.0, Eigen::Vector2d(0.5, 0.0), 0.0};
  EXPECT_NEAR(h_out(Eigen::Vector2d(2, 7), om, Activation::Tanh), 2.28478, 1e-5);
}

TEST(Activation, BoundedDerivativesMatchFiniteDifferences) {
  for (Activation a : {Activation::Tanh, Activation::SigmoidShifted, Activation::Erf}) {
    for (double x : {-2.5, -0.3, 0.0, 0.8, 3.0}) {
      const double h = 1e-5;
      EXPECT_NEAR(activate_d1(a, x), (activate(a, x + h) - activate(a, x - h)) / (2 * h), 1e-9);
      EXPECT_NEAR(activate_d2(a, x), (activate_d1(a, x + h) - activate_d1(a, x - h)) / (2 * h), 1e-8);
      EXPECT_LE(std::abs(activate(a, x)), 1.0);
      EXPECT_LE(std::abs(activate_d1(a, x)), 1.0);
      EXPECT_LE(std::abs(activate_d2(a, x)), 1.0);
    }
    EXPECT_EQ(parse_activation(activation_name(a)), a);
  }
  EXPECT_NEAR(activate(Activation::SigmoidShifted, 1.3), 1.0 / (1.0 + std::exp(-1.3)) - 0.5, 1e-15);
  EXPECT_THROW(parse_activation("relu"), ContractViolation);
}

TEST(Forward, AntitheticInitIsIdentityAndZeroOutput) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScaledResNet net = testkit::random_net({3, 6, 8, 10, 1.5, 2.0, Activation::Tanh}, seed, true);
    Rng rng(seed + 100);
    const auto data = random_unit_dataset(6, 3, seed);
    for (int i = 0; i < data.n(); ++i) {
      const Trajectory tr = forward(net, data.sample(i));
      for (const auto& z : tr.z) EXPECT_LE((z - data.sample(i)).norm(), 1e-12);
      EXPECT_LE(std::abs(tr.f), 1e-12);
      EXPECT_FALSE(tr.has_adjoint());
    }
    EXPECT_LE(loss(net, data), 0.5 + 1e-12);
  }
}

TEST(Forward, AlphaZeroSkipsResidualBranch) {
  ScaledResNet net = testkit::random_net({2, 4, 3, 5, 1.0, 1.3, Activation::Tanh}, 9);
  net.set_alpha(0.0);
  const Eigen::Vector2d x(0.3, -0.8);
  const Trajectory tr = forward(net, x);
  EXPECT_EQ(tr.z.back(), Eigen::VectorXd(x));
  double expected = 0.0;
  for (int k = 0; k < net.K(); ++k) expected += h_out(x, net.omega(k), Activation::Tanh);
  EXPECT_NEAR(tr.f, 1.3 * expected / 5, 1e-15);
}

TEST(Forward, MatchesStraightLineImplementation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScaledResNet net = testkit::random_net({2, 3, 2, 2, 1.0, 1.0, Activation::Tanh}, seed);
    const Eigen::Vector2d x(0.6 - 0.1 * seed, 0.2 * seed - 0.5);
    const Trajectory tr = forward(net, x);
    const auto naive = testkit::naive_forward(net, x);
    EXPECT_NEAR(tr.f, naive.f, 1e-12);
    ASSERT_EQ(tr.z.size(), 4u);
    EXPECT_EQ(tr.z.front(), Eigen::VectorXd(x));
    for (std::size_t l = 0; l < tr.z.size(); ++l)
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(tr.z[l](c), naive.z[l][static_cast<std::size_t>(c)], 1e-12);
  }
}

TEST(Forward, OverflowCarriesLayerIndex) {
  ScaledResNet net({1, 3, 1, 1, 1.0, 1.0, Activation::Identity});
  for (int l = 0; l < 3; ++l) net.theta(l, 0) = enc(Eigen::VectorXd::Constant(1, 1e200), Eigen::VectorXd::Constant(1, 1e200), 0);
  net.omega(0) = {1.0, Eigen::VectorXd::Constant(1, 1.0), 0.0};
  try {
    forward(net, Eigen::VectorXd::Constant(1, 1.0));
    FAIL() << "expected NumericOverflow";
  } catch (const NumericOverflow& e) {
    EXPECT_GE(e.index(), 0);
    EXPECT_LT(e.index(), 3);
  }
}

TEST(Loss, Examples) {
  ScaledResNet net({2, 2, 2, 2, 1.0, 1.0, Activation::Tanh});  // all-zero particles: f == 0
  const auto data = testkit::make_dataset(Eigen::MatrixXd::Random(5, 2), Eigen::VectorXd::Ones(5));
  EXPECT_DOUBLE_EQ(loss(net, data), 0.5);
  const auto fit = testkit::make_dataset(Eigen::MatrixXd::Random(4, 2), Eigen::VectorXd::Zero(4));
  EXPECT_EQ(loss(net, fit), 0.0);
  EXPECT_THROW(loss(net, testkit::make_dataset(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0))), ContractViolation);
}

TEST(ZeroOneError, CountsSignDisagreements) {
  ScaledResNet net({1, 1, 1, 1, 0.0, 1.0, Activation::Identity});
  net.omega(0) = {1.0, Eigen::VectorXd::Constant(1, 1.0), 0.0};  // f(x) = x
  Eigen::MatrixXd X(4, 1);
  X << -2, -1, 1, 2;
  EXPECT_DOUBLE_EQ(zero_one_error(net, testkit::make_dataset(X, Eigen::Vector4d(-1, 1, 1, -1))), 0.5);
}

TEST(ScaledResNetProps, DepthInvarianceAtAlphaZero) {
  const ScaledResNet shallow = testkit::random_net({2, 1, 3, 4, 0.0, 1.0, Activation::Tanh}, 4);
  ScaledResNet deep = testkit::random_net({2, 7, 3, 4, 0.0, 1.0, Activation::Tanh}, 8);
  for (int k = 0; k < 4; ++k) deep.omega(k) = shallow.omega(k);
  const Eigen::Vector2d x(0.1, 0.9);
  EXPECT_EQ(predict(shallow, x), predict(deep, x));
}

TEST(ScaledResNetProps, DeterministicAndHomogeneous) {
  const ScaledResNet a = testkit::random_net({2, 3, 4, 5, 1.0, 2.0, Activation::Tanh}, 17);
  const ScaledResNet b = testkit::random_net({2, 3, 4, 5, 1.0, 2.0, Activation::Tanh}, 17);
  ASSERT_TRUE(a == b);
  const Eigen::Vector2d x(-0.4, 0.25);
  EXPECT_EQ(predict(a, x), predict(b, x));

  ScaledResNet scaled = a;
  scaled.set_beta(6.0);
  EXPECT_NEAR(predict(scaled, x), 3.0 * predict(a, x), 1e-14);
  ScaledResNet amp = a;
  for (int k = 0; k < amp.K(); ++k) amp.omega(k).a *= -2.5;
  EXPECT_NEAR(predict(amp, x), -2.5 * predict(a, x), 1e-14);
}

TEST(ScaledResNetProps, FlattenRoundTripAndOffsets) {
  ScaledResNet net = testkit::random_net({3, 2, 3, 4, 1.0, 1.0, Activation::Erf}, 2);
  EXPECT_EQ(net.num_params(), 2 * 3 * 7 + 4 * 5);
  const Eigen::VectorXd p = net.flatten();
  EXPECT_EQ(p.segment(net.theta_offset(1, 2), 7), net.theta(1, 2).flat());
  EXPECT_EQ(p.segment(net.omega_offset(3), 5), net.omega(3).flat());
  ScaledResNet other(net.shape());
  other.assign_flat(p);
  EXPECT_TRUE(other == net);
}

TEST(ModelShapeValidation, RejectsBadShapes) {
  EXPECT_THROW(ScaledResNet({2, 0, 1, 1, 1.0, 1.0, Activation::Tanh}), ContractViolation);
  EXPECT_THROW(ScaledResNet({2, 1, 1, 1, 1.0, 0.0, Activation::Tanh}), ContractViolation);
  EXPECT_THROW(ScaledResNet({2, 1, 1, 1, -1.0, 1.0, Activation::Tanh}), ContractViolation);
  Rng rng(0);
  EXPECT_THROW(init_gaussian({2, 1, 3, 2, 1.0, 1.0, Activation::Tanh}, rng, true), ContractViolation);
}

TEST(Init, StandardGaussianMoments) {
  const ScaledResNet net = testkit::random_net({2, 1, 20000, 20000, 1.0, 1.0, Activation::Tanh}, 3);
  double enc = 0.0, pred = 0.0;
  for (int m = 0; m < net.M(); ++m) enc += net.theta(0, m).flat().squaredNorm();
  for (int k = 0; k < net.K(); ++k) pred += net.omega(k).flat().squaredNorm();
  EXPECT_NEAR(enc / net.M(), 5.0, 0.1);
  EXPECT_NEAR(pred / net.K(), 4.0, 0.1);
}
