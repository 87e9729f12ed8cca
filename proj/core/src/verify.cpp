#include "mfresnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mfresnet/divergence.hpp"
#include "mfresnet/dynamics.hpp"
#include "mfresnet/errors.hpp"
#include "mfresnet/gram.hpp"
#include "mfresnet/rademacher.hpp"
#include "mfresnet/rng.hpp"

namespace mfresnet::verify {

namespace {

Eigen::VectorXd branch(const Eigen::VectorXd& z, const Eigen::VectorXd& flat_theta, int d, Activation act) {
  const double s = flat_theta.segment(d, d).dot(z) + flat_theta(2 * d);
  return activate(act, s) * flat_theta.head(d);
}

double head(const Eigen::VectorXd& z, const Eigen::VectorXd& flat_omega, int d, Activation act) {
  return flat_omega(0) * activate(act, flat_omega.segment(1, d).dot(z) + flat_omega(d + 1));
}

// Layers [from, L) of the forward map.
Eigen::VectorXd run_layers(const ScaledResNet& net, Eigen::VectorXd z, int from) {
  const double step = net.alpha() / (static_cast<double>(net.M()) * net.L());
  for (int l = from; l < net.L(); ++l) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(net.d());
    for (int m = 0; m < net.M(); ++m) acc += branch(z, net.theta(l, m).flat(), net.d(), net.activation());
    z += step * acc;
  }
  return z;
}

double mean_head(const ScaledResNet& net, const Eigen::VectorXd& zL) {
  double acc = 0.0;
  for (int k = 0; k < net.K(); ++k) acc += head(zL, net.omega(k).flat(), net.d(), net.activation());
  return acc / net.K();
}

// grad_z of sigma-branch, d x d.
Eigen::MatrixXd branch_jacobian(const Eigen::VectorXd& z, const EncoderParticle& th, Activation act) {
  return th.u * (activate_d1(act, th.w.dot(z) + th.b) * th.w.transpose());
}

}  // namespace

Eigen::VectorXd finite_diff_loss_grad(const ScaledResNet& net, const LabeledDataset& data, double h) {
  MFRESNET_REQUIRE(h >= 1e-6 && h <= 1e-3, "finite_diff_loss_grad: h must be in [1e-6, 1e-3]");
  const Eigen::VectorXd base = net.flatten();
  Eigen::VectorXd g(base.size());
  ScaledResNet probe = net;
  for (Eigen::Index c = 0; c < base.size(); ++c) {
    Eigen::VectorXd p = base;
    p(c) = base(c) + h;
    probe.assign_flat(p);
    const double up = loss(probe, data);
    p(c) = base(c) - h;
    probe.assign_flat(p);
    const double down = loss(probe, data);
    g(c) = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) {
  MFRESNET_REQUIRE(A.rows() == A.cols(), "expm: matrix must be square");
  const Eigen::Index n = A.rows();
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  const Eigen::MatrixXd X = A / std::ldexp(1.0, squarings);

  // [6/6] Pade coefficients c_k = (12-k)! 6! / (12! k! (6-k)!).
  static constexpr double c[7] = {1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd P = I;
  Eigen::MatrixXd N = c[0] * I;
  Eigen::MatrixXd D = c[0] * I;
  for (int k = 1; k <= 6; ++k) {
    P = P * X;
    N += c[k] * P;
    D += ((k % 2) ? -c[k] : c[k]) * P;
  }
  Eigen::MatrixXd E = D.partialPivLu().solve(N);
  for (int s = 0; s < squarings; ++s) E = E * E;
  return E;
}

double operator_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

std::vector<TransitionError> transition_vs_exponential(const ScaledResNet& net, const Eigen::VectorXd& x,
                                                       const std::vector<int>& depths) {
  MFRESNET_REQUIRE(x.size() == net.d(), "transition_vs_exponential: dimension mismatch");
  const int d = net.d();
  std::vector<TransitionError> out;
  for (int Lp : depths) {
    MFRESNET_REQUIRE(Lp >= 1, "transition_vs_exponential: depth must be positive");
    Eigen::VectorXd z = x;
    Eigen::MatrixXd product = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd riemann = Eigen::MatrixXd::Zero(d, d);
    const double step = net.alpha() / (static_cast<double>(net.M()) * Lp);
    for (int l = 0; l < Lp; ++l) {
      const int src = std::min(net.L() - 1, (l * net.L()) / Lp);
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int m = 0; m < net.M(); ++m) {
        const auto& th = net.theta(src, m);
        A += branch_jacobian(z, th, net.activation());
        acc += branch(z, th.flat(), d, net.activation());
      }
      product = (Eigen::MatrixXd::Identity(d, d) + step * A) * product;
      riemann += step * A;
      z += step * acc;
    }
    out.push_back({Lp, operator_norm(product.transpose() - expm(riemann).transpose())});
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> brute_force_gram(const ScaledResNet& net, const LabeledDataset& data,
                                                             double h) {
  MFRESNET_REQUIRE(data.n() >= 1 && data.n() <= 8, "brute_force_gram: n must be in [1, 8]");
  MFRESNET_REQUIRE(data.d() == net.d(), "brute_force_gram: dimension mismatch");
  const int d = net.d();
  const int n = data.n();
  const int ke = 2 * d + 1;
  const int kp = d + 2;
  const Activation act = net.activation();
  Eigen::MatrixXd J1 = Eigen::MatrixXd::Zero(n, net.L() * net.M() * ke);
  Eigen::MatrixXd J2 = Eigen::MatrixXd::Zero(n, net.K() * kp);

  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::VectorXd> zs{data.sample(i)};
    for (int l = 0; l < net.L(); ++l) {
      const Eigen::VectorXd z = zs.back();
      const double step = net.alpha() / (static_cast<double>(net.M()) * net.L());
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (int m = 0; m < net.M(); ++m) acc += branch(z, net.theta(l, m).flat(), d, act);
      zs.push_back(z + step * acc);
    }

    for (int l = 0; l < net.L(); ++l) {
      // p_{l+1}: sensitivity of the mean head to z_{l+1} through the remaining layers.
      Eigen::VectorXd p(d);
      for (int c = 0; c < d; ++c) {
        Eigen::VectorXd zp = zs[static_cast<std::size_t>(l + 1)], zm = zp;
        zp(c) += h;
        zm(c) -= h;
        p(c) = (mean_head(net, run_layers(net, zp, l + 1)) - mean_head(net, run_layers(net, zm, l + 1))) / (2 * h);
      }
      const Eigen::VectorXd& z = zs[static_cast<std::size_t>(l)];
      for (int m = 0; m < net.M(); ++m) {
        const Eigen::VectorXd th = net.theta(l, m).flat();
        for (int c = 0; c < ke; ++c) {
          Eigen::VectorXd tp = th, tm = th;
          tp(c) += h;
          tm(c) -= h;
          J1(i, (l * net.M() + m) * ke + c) = p.dot(branch(z, tp, d, act) - branch(z, tm, d, act)) / (2 * h);
        }
      }
    }

    const Eigen::VectorXd& zL = zs.back();
    for (int k = 0; k < net.K(); ++k) {
      const Eigen::VectorXd om = net.omega(k).flat();
      for (int c = 0; c < kp; ++c) {
        Eigen::VectorXd op = om, omn = om;
        op(c) += h;
        omn(c) -= h;
        J2(i, k * kp + c) = (head(zL, op, d, act) - head(zL, omn, d, act)) / (2 * h);
      }
    }
  }
  Eigen::MatrixXd G1 = J1 * J1.transpose() / (static_cast<double>(net.L()) * net.M());
  Eigen::MatrixXd G2 = J2 * J2.transpose() / static_cast<double>(net.K());
  return {G1, G2};
}

double enumerate_w2(const std::vector<Eigen::VectorXd>& A, const std::vector<Eigen::VectorXd>& B) {
  MFRESNET_REQUIRE(A.size() == B.size(), "enumerate_w2: clouds must have equal size");
  MFRESNET_REQUIRE(!A.empty() && A.size() <= 7, "enumerate_w2: size must be in [1, 7]");
  std::vector<int> perm(A.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) total += (A[i] - B[static_cast<std::size_t>(perm[i])]).squaredNorm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(A.size()));
}

double exhaustive_rademacher(const Eigen::MatrixXd& outputs) {
  MFRESNET_REQUIRE(outputs.rows() > 0, "exhaustive_rademacher: empty family");
  const auto n = static_cast<int>(outputs.cols());
  MFRESNET_REQUIRE(n >= 1 && n <= 20, "exhaustive_rademacher: n must be in [1, 20]");
  const std::uint64_t total = std::uint64_t{1} << n;
  Eigen::VectorXd eta(n);
  double acc = 0.0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    for (int i = 0; i < n; ++i) eta(i) = ((mask >> i) & 1U) ? 1.0 : -1.0;
    acc += (outputs * eta).maxCoeff() / n;
  }
  return acc / static_cast<double>(total);
}

Eigen::VectorXd char_poly(const Eigen::MatrixXd& A) {
  MFRESNET_REQUIRE(A.rows() == A.cols() && A.rows() > 0, "char_poly: matrix must be square");
  const Eigen::Index n = A.rows();
  Eigen::VectorXd c(n + 1);
  c(n) = 1.0;
  Eigen::MatrixXd Mk = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    Mk = A * Mk + c(n - k + 1) * I;
    c(n - k) = -(A * Mk).trace() / static_cast<double>(k);
  }
  return c;
}

double lambda_min_charpoly(const Eigen::MatrixXd& A) {
  MFRESNET_REQUIRE(A.rows() <= 6, "lambda_min_charpoly: n must be <= 6");
  const Eigen::VectorXd c = char_poly(A);
  const Eigen::Index n = A.rows();
  auto eval = [&](double x, double& dp) {
    double p = c(n);
    dp = 0.0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      dp = dp * x + p;
      p = p * x + c(k);
    }
    return p;
  };
  // All roots are real and lie inside the Gershgorin disc radius; Newton from the left
  // of every root climbs monotonically to the smallest one.
  const double R = A.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
  double x = -R;
  for (int it = 0; it < 500; ++it) {
    double dp = 0.0;
    const double p = eval(x, dp);
    if (p == 0.0 || dp == 0.0) break;
    const double nx = x - p / dp;
    if (!(nx > x)) break;
    x = nx;
  }
  return x;
}

std::vector<OracleResult> run_suite(std::uint64_t seed) {
  std::vector<OracleResult> results;
  auto record = [&](std::string name, double value, double tol, std::string detail = {}) {
    results.push_back({std::move(name), value <= tol, value, tol, std::move(detail)});
  };

  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 1});
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const ModelShape shape{2, 3, 4, 4, 1.0, 1.0, Activation::Tanh};
      const ScaledResNet net = init_gaussian(shape, rng, false);
      const LabeledDataset data = random_unit_dataset(5, 2, rng());
      const Eigen::VectorXd g = functional_gradients(net, data).plain_gradient();
      const Eigen::VectorXd fd = finite_diff_loss_grad(net, data, 1e-4);
      const double floor = 1e-6 * g.cwiseAbs().maxCoeff();
      for (Eigen::Index c = 0; c < g.size(); ++c)
        worst = std::max(worst, std::abs(fd(c) - g(c)) / std::max(std::abs(g(c)), floor));
    }
    record("gradient_vs_finite_difference", worst, 1e-5);
  }
  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 2});
    const ModelShape shape{2, 2, 3, 3, 1.0, 1.0, Activation::Tanh};
    const ScaledResNet net = init_gaussian(shape, rng, false);
    const LabeledDataset data = random_unit_dataset(4, 2, rng());
    const auto [B1, B2] = brute_force_gram(net, data);
    const GramReport rep = gram_report(net, data);
    record("gram_vs_brute_force", std::max((B1 - rep.G1).cwiseAbs().maxCoeff(), (B2 - rep.G2).cwiseAbs().maxCoeff()),
           1e-6);
  }
  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 3});
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const int m = 1 + rep % 6;
      std::vector<Eigen::VectorXd> A, B;
      for (int i = 0; i < m; ++i) {
        A.push_back(Eigen::VectorXd::NullaryExpr(3, [&] { return g(rng); }));
        B.push_back(Eigen::VectorXd::NullaryExpr(3, [&] { return g(rng); }));
      }
      worst = std::max(worst, std::abs(w2_clouds(A, B) - enumerate_w2(A, B)));
    }
    record("w2_vs_enumeration", worst, 1e-12);
  }
  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 4});
    const ModelShape shape{1, 4, 3, 3, 1.0, 1.0, Activation::Tanh};
    const ScaledResNet net = init_gaussian(shape, rng, false);
    const auto errs = transition_vs_exponential(net, Eigen::VectorXd::Constant(1, 0.7));
    double worst = 0.0;
    std::ostringstream detail;
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double ratio = errs[i].error / errs[i - 1].error;
      detail << (i > 1 ? " " : "") << ratio;
      worst = std::max(worst, std::abs(ratio - 0.5));
    }
    record("transition_vs_exponential_halving", worst, 0.2, "ratios " + detail.str());
  }
  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 5});
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 1 + rep % 6;
      Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
      const Eigen::MatrixXd S = X + X.transpose();
      worst = std::max(worst, std::abs(lambda_min(S) - lambda_min_charpoly(S)));
    }
    record("lambda_min_vs_charpoly", worst, 1e-8);
  }
  {
    const auto mu = hermite_coefficients(Activation::Identity, 8);
    double worst = std::abs(mu[1] - 1.0);
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (i != 1) worst = std::max(worst, std::abs(mu[i]));
    record("hermite_identity", worst, 1e-10);
  }
  {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kFixture), 6});
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 8;
    Eigen::MatrixXd F(3, n);
    for (Eigen::Index j = 0; j < F.rows(); ++j)
      for (Eigen::Index i = 0; i < n; ++i) F(j, i) = g(rng);
    const double exact = exhaustive_rademacher(F);
    const RademacherEstimate est = empirical_rademacher(F, 4000, seed);
    record("rademacher_mc_vs_enumeration", std::abs(est.mean - exact) / est.std_error, 3.0, "in standard errors");
  }
  return results;
}

}  // namespace mfresnet::verify
