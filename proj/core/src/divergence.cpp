#include "mfresnet/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfresnet/errors.hpp"

namespace mfresnet {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Cloud encoder_cloud(const ScaledResNet& net, int l) {
  MFRESNET_REQUIRE(l >= 0 && l < net.L(), "encoder_cloud: layer out of range");
  Cloud c;
  c.reserve(static_cast<std::size_t>(net.M()));
  for (int m = 0; m < net.M(); ++m) c.push_back(net.theta(l, m).flat());
  return c;
}

Cloud predictor_cloud(const ScaledResNet& net) {
  Cloud c;
  c.reserve(static_cast<std::size_t>(net.K()));
  for (int k = 0; k < net.K(); ++k) c.push_back(net.omega(k).flat());
  return c;
}

std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
  MFRESNET_REQUIRE(cost.rows() == cost.cols(), "hungarian_assignment: cost must be square");
  const int n = static_cast<int>(cost.rows());
  // 1-based potentials formulation; column 0 is a sentinel.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(match[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

double w2_clouds(std::span<const Eigen::VectorXd> A, std::span<const Eigen::VectorXd> B) {
  MFRESNET_REQUIRE(A.size() == B.size(), "w2_clouds: clouds must have equal size");
  MFRESNET_REQUIRE(!A.empty(), "w2_clouds: empty clouds");
  const auto m = A.size();
  const auto dim = A.front().size();
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    MFRESNET_REQUIRE(A[i].size() == dim && B[i].size() == dim, "w2_clouds: dimension mismatch");
    for (std::size_t j = 0; j < m; ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (A[i] - B[j]).squaredNorm();
  }
  const auto assignment = hungarian_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    total += cost(static_cast<Eigen::Index>(i), assignment[i]);
  return std::sqrt(total / static_cast<double>(m));
}

GaussianFit fit_gaussian(std::span<const Eigen::VectorXd> cloud, double jitter) {
  MFRESNET_REQUIRE(!cloud.empty(), "fit_gaussian: empty cloud");
  const auto k = cloud.front().size();
  GaussianFit fit;
  fit.mean = Eigen::VectorXd::Zero(k);
  for (const auto& x : cloud) fit.mean += x;
  fit.mean /= static_cast<double>(cloud.size());
  fit.cov = Eigen::MatrixXd::Zero(k, k);
  for (const auto& x : cloud) {
    const Eigen::VectorXd c = x - fit.mean;
    fit.cov.noalias() += c * c.transpose();
  }
  fit.cov /= static_cast<double>(cloud.size());
  fit.cov.diagonal().array() += jitter;

  Eigen::LLT<Eigen::MatrixXd> llt(fit.cov);
  const double logdet =
      llt.info() == Eigen::Success ? 2.0 * llt.matrixLLT().diagonal().array().log().sum() : -kInf;
  if (llt.info() != Eigen::Success || !std::isfinite(logdet)) {
    fit.singular = true;
    fit.kl_to_standard = kInf;
  } else {
    fit.kl_to_standard =
        0.5 * (fit.cov.trace() + fit.mean.squaredNorm() - static_cast<double>(k) - logdet);
  }
  // W2^2 to N(0, I) = |mean|^2 + tr(cov) + k - 2 tr(cov^{1/2}).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.cov, Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  fit.w2sq_to_standard = fit.mean.squaredNorm() + fit.cov.trace() + static_cast<double>(k) - 2.0 * tr_sqrt;
  return fit;
}

DivergenceReport divergence_report(const ScaledResNet& net, const InitSnapshot& snap) {
  MFRESNET_REQUIRE(net.shape().d == snap.net().d() && net.L() == snap.net().L() && net.M() == snap.net().M() &&
                       net.K() == snap.net().K(),
                   "divergence_report: snapshot shape mismatch");
  DivergenceReport rep;
  rep.w2_per_layer.resize(static_cast<std::size_t>(net.L()));
  for (int l = 0; l < net.L(); ++l) {
    const Cloud now = encoder_cloud(net, l);
    const Cloud init = encoder_cloud(snap.net(), l);
    const double w = w2_clouds(now, init);
    rep.w2_per_layer[static_cast<std::size_t>(l)] = w;
    rep.sup_w2_encoder = std::max(rep.sup_w2_encoder, w);
    const GaussianFit fit = fit_gaussian(now);
    if (fit.singular) rep.kl_encoder_infinite = true;
    rep.kl_gauss_encoder = std::max(rep.kl_gauss_encoder, fit.kl_to_standard);
  }
  const Cloud pred = predictor_cloud(net);
  rep.w2_predictor = w2_clouds(pred, predictor_cloud(snap.net()));
  const GaussianFit pfit = fit_gaussian(pred);
  rep.kl_predictor_infinite = pfit.singular;
  rep.kl_gauss_predictor = pfit.kl_to_standard;
  rep.kl_floor_encoder = 0.25 * rep.sup_w2_encoder * rep.sup_w2_encoder;
  return rep;
}

double encoder_second_moment(const ScaledResNet& net) {
  double best = 0.0;
  for (int l = 0; l < net.L(); ++l) {
    double acc = 0.0;
    for (int m = 0; m < net.M(); ++m) acc += net.theta(l, m).flat().squaredNorm();
    best = std::max(best, acc / net.M());
  }
  return best;
}

double predictor_second_moment(const ScaledResNet& net) {
  double acc = 0.0;
  for (int k = 0; k < net.K(); ++k) acc += net.omega(k).flat().squaredNorm();
  return acc / net.K();
}

double bound_C_Z(double alpha, double C_sigma, double nu_sq) {
  return 2.0 * std::exp(2.0 * alpha * C_sigma * (nu_sq + 1.0));
}

double bound_C_Z_stability(double alpha, double C_sigma, double nu1_sq, double nu2_sq) {
  return std::expm1(alpha * C_sigma) * (std::sqrt(nu1_sq + nu2_sq) + 1.0) *
         (bound_C_Z(alpha, C_sigma, nu1_sq) + 1.0);
}

double bound_C_p(double alpha, double C_sigma, double nu_sq, double tau_sq) {
  return C_sigma * (tau_sq + 1.0) * std::exp(alpha * C_sigma * (nu_sq + 1.0));
}

ConstantsReport constants_report(int d, double alpha, int n, double C_max, const ScaledResNet& net) {
  MFRESNET_REQUIRE(d >= 1 && n >= 1, "constants_report: d and n must be positive");
  MFRESNET_REQUIRE(alpha >= 0.0 && std::isfinite(alpha), "constants_report: alpha must be finite and >= 0");
  MFRESNET_REQUIRE(C_max < 1.0, "constants_report: C_max must be < 1");
  ConstantsReport rep;
  rep.C_1 = 1.0;
  rep.C_sigma = 6.0 * d * rep.C_1;
  rep.nu_sq = encoder_second_moment(net);
  rep.tau_sq = predictor_second_moment(net);
  const double cs = rep.C_sigma;
  const double init_nu_sq = 2.0 * d + 1.0;

  rep.C_Z = bound_C_Z(alpha, cs, rep.nu_sq);
  rep.C_p = bound_C_p(alpha, cs, rep.nu_sq, rep.tau_sq);
  const double cz_stab = bound_C_Z_stability(alpha, cs, rep.nu_sq, init_nu_sq);
  const double g_inner = rep.C_Z + 1.0 + cz_stab;
  rep.C_G = 16.0 * (d + 1.0) * cs * cs * g_inner * g_inner * (rep.tau_sq + d + 1.0);
  const double grad_J = 2.0 * cs * (rep.C_Z * rep.C_Z * rep.C_Z + 1.0) * rep.C_p;
  rep.C_KL = 4.0 * grad_J * grad_J;
  rep.C_d = 2.0 * rep.C_1 * bound_C_Z_stability(alpha, cs, 6.0 * d + 2.0, init_nu_sq);

  try {
    rep.hermite = hermite_lower_bound(n, C_max, net.activation());
  } catch (const DegenerateActivation& e) {
    rep.hermite_resolved = false;
    rep.hermite_note = e.what();
  }
  rep.Lambda = rep.hermite.Lambda;
  if (rep.hermite_resolved && std::isfinite(rep.C_G) && rep.C_G > 0.0) {
    rep.r_max = r_max(rep.Lambda, n, rep.C_G, d);
  } else {
    rep.r_max = 0.0;
  }
  rep.beta_bar_threshold = rep.r_max > 0.0 ? 4.0 * std::sqrt(rep.C_KL) / (rep.Lambda * rep.r_max) : kInf;
  rep.r0 = rep.C_d > 0.0 ? std::min(0.25, rep.C_1 / (4.0 * std::sqrt(static_cast<double>(n)) * rep.C_d)) : 0.25;

  for (double v : {rep.C_Z, rep.C_p, rep.C_G, rep.C_KL, rep.C_d, rep.beta_bar_threshold}) {
    if (!std::isfinite(v)) rep.overflow = true;
  }
  return rep;
}

KlFloor kl_movement_floor(const ScaledResNet& net, const InitSnapshot& snap, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.n() > 0, "kl_movement_floor: empty dataset");
  const Eigen::VectorXd f = predict_all(net, data);
  const Eigen::VectorXd f0 = predict_all(snap.net(), data);
  KlFloor out;
  out.max_displacement = (f - f0).cwiseAbs().maxCoeff() / net.beta();

  const double cs = 6.0 * net.d();
  const double nu_sq = encoder_second_moment(net);
  const double nu0_sq = encoder_second_moment(snap.net());
  const double tau_sq = predictor_second_moment(net);
  const double tau0_sq = predictor_second_moment(snap.net());
  const double a = net.alpha();
  const double term_pred = 2.0 * cs * (bound_C_Z(a, cs, nu_sq) + 1.0) * std::max(tau_sq, tau0_sq);
  const double term_enc = 2.0 * (tau0_sq + 1.0) * bound_C_Z_stability(a, cs, nu_sq, nu0_sq);
  out.C_low = std::max(term_pred, term_enc);
  if (!std::isfinite(out.C_low)) {
    out.vacuous = true;
    out.value = 0.0;
    return out;
  }
  out.value = out.max_displacement / out.C_low;
  return out;
}

}  // namespace mfresnet
