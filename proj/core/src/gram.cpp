#include "mfresnet/gram.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfresnet/dynamics.hpp"
#include "mfresnet/errors.hpp"

namespace mfresnet {

namespace {

Eigen::MatrixXd encoder_jacobian(const ScaledResNet& net, const std::vector<Trajectory>& trajs) {
  const int d = net.d();
  const int ke = EncoderParticle::flat_size(d);
  const int n = static_cast<int>(trajs.size());
  const Activation act = net.activation();
  Eigen::MatrixXd J(n, net.L() * net.M() * ke);
  for (int i = 0; i < n; ++i) {
    const Trajectory& tr = trajs[static_cast<std::size_t>(i)];
    MFRESNET_REQUIRE(tr.has_adjoint(), "compute_G1: adjoint trajectory missing");
    for (int l = 0; l < net.L(); ++l) {
      const Eigen::VectorXd& z = tr.z[static_cast<std::size_t>(l)];
      const Eigen::VectorXd& p = tr.p[static_cast<std::size_t>(l + 1)];
      for (int m = 0; m < net.M(); ++m) {
        const auto& th = net.theta(l, m);
        const double s = th.w.dot(z) + th.b;
        const double coef = th.u.dot(p) * activate_d1(act, s);
        auto row = J.row(i).segment((l * net.M() + m) * ke, ke);
        row.head(d) = activate(act, s) * p.transpose();
        row.segment(d, d) = coef * z.transpose();
        row(2 * d) = coef;
      }
    }
  }
  return J;
}

Eigen::MatrixXd predictor_jacobian(const ScaledResNet& net, const std::vector<Trajectory>& trajs) {
  const int d = net.d();
  const int kp = PredictorParticle::flat_size(d);
  const int n = static_cast<int>(trajs.size());
  const Activation act = net.activation();
  Eigen::MatrixXd J(n, net.K() * kp);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& zL = trajs[static_cast<std::size_t>(i)].z.back();
    for (int k = 0; k < net.K(); ++k) {
      const auto& om = net.omega(k);
      const double s = om.w.dot(zL) + om.b;
      const double d1 = om.a * activate_d1(act, s);
      auto row = J.row(i).segment(k * kp, kp);
      row(0) = activate(act, s);
      row.segment(1, d) = d1 * zL.transpose();
      row(d + 1) = d1;
    }
  }
  return J;
}

Eigen::MatrixXd gram_from_jacobian(const Eigen::MatrixXd& J, double count) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(J.rows(), J.rows());
  G.selfadjointView<Eigen::Lower>().rankUpdate(J, 1.0 / count);
  return G.selfadjointView<Eigen::Lower>();
}

}  // namespace

Eigen::MatrixXd compute_G1(const ScaledResNet& net, const LabeledDataset& data) {
  const auto trajs = trajectories(net, data);
  return gram_from_jacobian(encoder_jacobian(net, trajs), static_cast<double>(net.L()) * net.M());
}

Eigen::MatrixXd compute_G2(const ScaledResNet& net, const LabeledDataset& data) {
  const auto trajs = trajectories(net, data);
  return gram_from_jacobian(predictor_jacobian(net, trajs), net.K());
}

GramReport gram_report(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.n() > 0, "gram_report: empty dataset");
  const auto trajs = trajectories(net, data);
  GramReport rep;
  rep.G1 = gram_from_jacobian(encoder_jacobian(net, trajs), static_cast<double>(net.L()) * net.M());
  rep.G2 = gram_from_jacobian(predictor_jacobian(net, trajs), net.K());
  rep.b = residuals(trajs, data);
  rep.lambda_min_G1 = lambda_min(rep.G1);
  rep.lambda_min_G2 = lambda_min(rep.G2);
  const double a2 = net.alpha() * net.alpha();
  rep.lambda_min_combined = lambda_min(a2 * rep.G1 + rep.G2);
  return rep;
}

double lambda_min(const Eigen::MatrixXd& A) {
  MFRESNET_REQUIRE(A.rows() == A.cols() && A.rows() > 0, "lambda_min: matrix must be square and nonempty");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-8 * scale)) {
    std::ostringstream msg;
    msg << "lambda_min: matrix not symmetric (max asymmetry " << asym << ")";
    throw ContractViolation(msg.str());
  }
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S, Eigen::EigenvaluesOnly);
  MFRESNET_REQUIRE(solver.info() == Eigen::Success, "lambda_min: eigensolver failed");
  return solver.eigenvalues()(0);
}

double gershgorin_floor(const Eigen::MatrixXd& A) {
  MFRESNET_REQUIRE(A.rows() == A.cols() && A.rows() > 0, "gershgorin_floor: matrix must be square and nonempty");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double off = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    best = std::min(best, A(i, i) - off);
  }
  return best;
}

GaussHermiteRule gauss_hermite_rule(int num_nodes) {
  MFRESNET_REQUIRE(num_nodes >= 1, "gauss_hermite_rule: need at least one node");
  // Nodes are the eigenvalues of the Jacobi matrix of the orthonormal probabilists' Hermite
  // recurrence (Golub-Welsch); the tridiagonal solver keeps large rules cheap.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(num_nodes);
  Eigen::VectorXd sub(std::max(0, num_nodes - 1));
  for (int i = 1; i < num_nodes; ++i) sub(i - 1) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  MFRESNET_REQUIRE(solver.info() == Eigen::Success, "gauss_hermite_rule: eigensolver failed");
  GaussHermiteRule rule;
  rule.nodes.resize(static_cast<std::size_t>(num_nodes));
  rule.weights.resize(static_cast<std::size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) {
    const double x = solver.eigenvalues()(i);
    rule.nodes[static_cast<std::size_t>(i)] = x;
    // Christoffel weights 1 / sum_k psi_k(x)^2. Squared eigenvector entries are pure round-off
    // at the outer nodes of large rules, while this sum underflows the weight to zero cleanly.
    double prev = 0.0, cur = 1.0, sum = 1.0;
    for (int k = 0; k + 1 < num_nodes && sum < 1e300; ++k) {
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
      prev = cur;
      cur = next;
      sum += cur * cur;
    }
    rule.weights[static_cast<std::size_t>(i)] = sum < 1e300 ? 1.0 / sum : 0.0;
  }
  // Enforce exact mirror symmetry so odd integrands vanish identically.
  for (int i = 0, j = num_nodes - 1; i <= j; ++i, --j) {
    const auto si = static_cast<std::size_t>(i);
    const auto sj = static_cast<std::size_t>(j);
    const double x = 0.5 * (rule.nodes[sj] - rule.nodes[si]);
    const double w = 0.5 * (rule.weights[si] + rule.weights[sj]);
    rule.nodes[si] = -x;
    rule.nodes[sj] = x;
    rule.weights[si] = rule.weights[sj] = w;
  }
  if (num_nodes % 2 == 1) rule.nodes[static_cast<std::size_t>(num_nodes / 2)] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

std::vector<double> hermite_coefficients(Activation act, int max_order, int num_nodes) {
  MFRESNET_REQUIRE(max_order >= 0, "hermite_coefficients: max_order must be >= 0");
  const GaussHermiteRule rule = gauss_hermite_rule(num_nodes);
  std::vector<double> mu(static_cast<std::size_t>(max_order + 1), 0.0);
  std::vector<double> psi(static_cast<std::size_t>(max_order + 1));
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double x = rule.nodes[q];
    const double fw = activate(act, x) * rule.weights[q];
    if (fw == 0.0) continue;
    // Orthonormal recurrence: psi_{i+1} = (x psi_i - sqrt(i) psi_{i-1}) / sqrt(i+1).
    psi[0] = 1.0;
    if (max_order >= 1) psi[1] = x;
    for (int i = 1; i < max_order; ++i) {
      const auto si = static_cast<std::size_t>(i);
      psi[si + 1] = (x * psi[si] - std::sqrt(static_cast<double>(i)) * psi[si - 1]) / std::sqrt(i + 1.0);
    }
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += fw * psi[i];
  }
  return mu;
}

HermiteBound hermite_lower_bound(int n, double C_max, Activation act) {
  MFRESNET_REQUIRE(n >= 1, "hermite_lower_bound: n must be >= 1");
  MFRESNET_REQUIRE(C_max < 1.0, "hermite_lower_bound: C_max must be < 1");
  HermiteBound hb;
  hb.C_max = C_max;
  hb.r_floor = 2.0 * std::log(2.0 * n) / (1.0 - C_max);
  if (hb.r_floor > kMaxHermiteOrder) {
    std::ostringstream msg;
    msg << "hermite_lower_bound: required order " << hb.r_floor << " exceeds " << kMaxHermiteOrder
        << " (C_max = " << C_max << " is too close to 1)";
    throw DegenerateActivation(msg.str());
  }
  const int r_start = std::max(1, static_cast<int>(std::ceil(hb.r_floor)));
  const int r_stop = static_cast<int>(std::floor(hb.r_floor)) + 10;
  const auto mu = hermite_coefficients(act, r_stop, std::max(256, 2 * r_stop + 64));
  for (int r = r_start; r <= r_stop; ++r) {
    const double m = mu[static_cast<std::size_t>(r)];
    if (std::abs(m) > 1e-12) {
      hb.r = r;
      hb.mu_r = m;
      hb.Lambda = 0.5 * m * m;
      hb.gershgorin = m * m * (1.0 - (n - 1) * std::pow(0.5 * (1.0 + C_max), r));
      return hb;
    }
  }
  std::ostringstream msg;
  msg << "hermite_lower_bound: no nonzero Hermite coefficient of " << activation_name(act) << " for r in ["
      << r_start << ", " << r_stop << "]";
  throw DegenerateActivation(msg.str());
}

RateCheck check_dLdt_identity(const ScaledResNet& net, const LabeledDataset& data, double eta) {
  MFRESNET_REQUIRE(eta > 0.0 && eta <= 1e-3, "check_dLdt_identity: eta must be in (0, 1e-3]");
  const auto trajs = trajectories(net, data);
  const GradientSet g = functional_gradients(net, data, trajs);
  const double before = loss(net, data);
  const double after = loss(gradient_flow_step(net, g, eta), data);

  const GramReport rep = gram_report(net, data);
  const double n = data.n();
  const double a2 = net.alpha() * net.alpha();
  RateCheck out;
  out.measured_rate = (after - before) / eta;
  out.predicted_rate =
      -(net.beta() * net.beta() / (n * n)) * rep.b.dot((a2 * rep.G1 + rep.G2) * rep.b);
  const double diff = std::abs(out.measured_rate - out.predicted_rate);
  if (out.predicted_rate == 0.0) {
    out.relative = false;
    out.error = diff;
  } else {
    out.error = diff / std::abs(out.predicted_rate);
  }
  return out;
}

double r_max(double Lambda, int n, double C_G, int d) {
  MFRESNET_REQUIRE(Lambda >= 0.0 && n >= 1 && C_G > 0.0 && d >= 1, "r_max: invalid arguments");
  return std::min(std::sqrt(static_cast<double>(d)), Lambda / (4.0 * n * C_G));
}

}  // namespace mfresnet
