#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/gram.hpp"
#include "mfresnet/nnmodel.hpp"

namespace mfresnet {

/// Frozen copy of the particle clouds at initialization.
class InitSnapshot {
 public:
  explicit InitSnapshot(ScaledResNet net) : net_(std::move(net)) {}
  const ScaledResNet& net() const { return net_; }
  const EncoderParticle& theta0(int l, int m) const { return net_.theta(l, m); }
  const PredictorParticle& omega0(int k) const { return net_.omega(k); }

 private:
  ScaledResNet net_;
};

using Cloud = std::vector<Eigen::VectorXd>;

/// Flattened (2d+1)-vectors of layer l.
Cloud encoder_cloud(const ScaledResNet& net, int l);
/// Flattened (d+2)-vectors of the predictor.
Cloud predictor_cloud(const ScaledResNet& net);

/// Optimal assignment for a square cost matrix (Hungarian method with potentials).
/// Returns assignment[i] = column matched to row i.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost);

/// Exact W2 between two uniform empirical measures of equal size.
double w2_clouds(std::span<const Eigen::VectorXd> A, std::span<const Eigen::VectorXd> B);

/// Moment-matched Gaussian N(mean, cov + jitter I) of a particle cloud.
struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool singular = false;
  /// KL(N(mean, cov) || N(0, I)); +inf when singular.
  double kl_to_standard = 0.0;
  /// W2^2(N(mean, cov), N(0, I)).
  double w2sq_to_standard = 0.0;
};
GaussianFit fit_gaussian(std::span<const Eigen::VectorXd> cloud, double jitter = 1e-8);

/// Parameter movement diagnostics relative to an init snapshot. The KL entries are
/// Gaussian moment-matched proxies against the standard Gaussian reference, not exact KLs.
struct DivergenceReport {
  std::vector<double> w2_per_layer;
  double sup_w2_encoder = 0.0;
  double w2_predictor = 0.0;
  double kl_gauss_encoder = 0.0;  // max over layers
  double kl_gauss_predictor = 0.0;
  double kl_floor_encoder = 0.0;  // sup_w2_encoder^2 / 4
  bool kl_encoder_infinite = false;
  bool kl_predictor_infinite = false;
};
DivergenceReport divergence_report(const ScaledResNet& net, const InitSnapshot& snap);

/// Empirical second moments: max over layers of mean ||theta||^2, and mean ||omega||^2.
double encoder_second_moment(const ScaledResNet& net);
double predictor_second_moment(const ScaledResNet& net);

/// Constants from the boundedness and stability estimates, evaluated at measured moments.
/// Non-finite values are kept as +inf and flagged through `overflow`.
struct ConstantsReport {
  double C_1 = 1.0;
  double C_sigma = 0.0;
  double nu_sq = 0.0;   // ||nu||^2_inf
  double tau_sq = 0.0;  // ||tau||^2_2
  double C_Z = 0.0;
  double C_p = 0.0;
  double C_G = 0.0;
  double C_KL = 0.0;
  double C_d = 0.0;
  HermiteBound hermite;
  bool hermite_resolved = true;  // false: no usable Hermite order, Lambda = 0 and r_max = 0
  std::string hermite_note;
  double Lambda = 0.0;
  double r_max = 0.0;
  double beta_bar_threshold = 0.0;
  double r0 = 0.0;  // radius below which the KL-ball Rademacher bound applies
  bool overflow = false;
};

/// Forward-state bound 2 exp(2 alpha C_sigma (nu_sq + 1)).
double bound_C_Z(double alpha, double C_sigma, double nu_sq);
/// Stability constant (e^{alpha C_sigma} - 1)(sqrt(nu1 + nu2) + 1)(C_Z(nu1) + 1).
double bound_C_Z_stability(double alpha, double C_sigma, double nu1_sq, double nu2_sq);
/// Adjoint bound C_sigma (tau_sq + 1) exp(alpha C_sigma (nu_sq + 1)).
double bound_C_p(double alpha, double C_sigma, double nu_sq, double tau_sq);

ConstantsReport constants_report(int d, double alpha, int n, double C_max, const ScaledResNet& net);

struct KlFloor {
  double value = 0.0;
  double max_displacement = 0.0;  // max_i |f(x_i) - f_0(x_i)| / beta
  double C_low = 0.0;
  bool vacuous = false;  // C_low overflowed; value reported as 0
};
/// Floor that sqrt(KL_tau) + sqrt(KL_nu) must exceed, from the output displacement.
KlFloor kl_movement_floor(const ScaledResNet& net, const InitSnapshot& snap, const LabeledDataset& data);

}  // namespace mfresnet
