#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/rng.hpp"

namespace mfresnet {

/// Scalar activation sigma_0. Every choice is bounded by C_1 = 1 together with its
/// first two derivatives, except Identity which exists for diagnostics only.
/// Erf is erf(sqrt(pi) x / 2) so that its slope never exceeds one.
enum class Activation { Tanh, SigmoidShifted, Erf, Identity };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

double activate(Activation act, double x);
double activate_d1(Activation act, double x);
double activate_d2(Activation act, double x);

/// Encoder particle theta = (u, w, b); flattened dimension 2d + 1.
struct EncoderParticle {
  Eigen::VectorXd u;
  Eigen::VectorXd w;
  double b = 0.0;

  int dim() const { return static_cast<int>(u.size()); }
  static int flat_size(int d) { return 2 * d + 1; }
  Eigen::VectorXd flat() const;
  static EncoderParticle from_flat(const Eigen::Ref<const Eigen::VectorXd>& v, int d);
  bool finite() const { return u.allFinite() && w.allFinite() && std::isfinite(b); }
};

/// Predictor particle omega = (a, w, b); flattened dimension d + 2.
struct PredictorParticle {
  double a = 0.0;
  Eigen::VectorXd w;
  double b = 0.0;

  int dim() const { return static_cast<int>(w.size()); }
  static int flat_size(int d) { return d + 2; }
  Eigen::VectorXd flat() const;
  static PredictorParticle from_flat(const Eigen::Ref<const Eigen::VectorXd>& v, int d);
  bool finite() const { return std::isfinite(a) && w.allFinite() && std::isfinite(b); }
};

struct ModelShape {
  int d = 2;
  int L = 10;
  int M = 20;
  int K = 20;
  double alpha = 1.0;
  double beta = 1.0;
  Activation activation = Activation::Tanh;

  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

/// The discrete scaled ResNet
///   z_{l+1} = z_l + alpha/(M L) sum_m sigma(z_l, theta_{l,m}),   f = beta/K sum_k h(z_L, omega_k).
class ScaledResNet {
 public:
  /// All particles zero.
  explicit ScaledResNet(const ModelShape& shape);

  const ModelShape& shape() const { return shape_; }
  int d() const { return shape_.d; }
  int L() const { return shape_.L; }
  int M() const { return shape_.M; }
  int K() const { return shape_.K; }
  double alpha() const { return shape_.alpha; }
  double beta() const { return shape_.beta; }
  Activation activation() const { return shape_.activation; }
  void set_alpha(double alpha);
  void set_beta(double beta);

  EncoderParticle& theta(int l, int m) { return theta_[static_cast<std::size_t>(l * shape_.M + m)]; }
  const EncoderParticle& theta(int l, int m) const {
    return theta_[static_cast<std::size_t>(l * shape_.M + m)];
  }
  PredictorParticle& omega(int k) { return omega_[static_cast<std::size_t>(k)]; }
  const PredictorParticle& omega(int k) const { return omega_[static_cast<std::size_t>(k)]; }

  /// Number of scalar parameters: L M (2d+1) + K (d+2).
  int num_params() const;
  /// Encoder particles first (layer-major, then particle; u, w, b), then predictor (a, w, b).
  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::Ref<const Eigen::VectorXd>& params);
  /// Offset of theta_{l,m} / omega_k inside flatten().
  int theta_offset(int l, int m) const;
  int omega_offset(int k) const;

  /// Throws ContractViolation on bad shape or non-finite particles.
  void validate() const;

  bool operator==(const ScaledResNet&) const;

 private:
  ModelShape shape_;
  std::vector<EncoderParticle> theta_;
  std::vector<PredictorParticle> omega_;
};

/// I.i.d. standard Gaussian particles. With `antithetic`, only M/2 (K/2) particles per
/// layer are drawn and each is paired with its u -> -u (a -> -a) mirror; M and K must be even.
ScaledResNet init_gaussian(const ModelShape& shape, Rng& rng, bool antithetic);

/// Forward states z_0..z_L, the output f, and optionally the adjoint states p_0..p_L.
struct Trajectory {
  std::vector<Eigen::VectorXd> z;
  double f = 0.0;
  std::vector<Eigen::VectorXd> p;

  bool has_adjoint() const { return !p.empty(); }
};

/// u * sigma_0(w^T z + b).
Eigen::VectorXd sigma(const Eigen::VectorXd& z, const EncoderParticle& theta, Activation act);
/// a * sigma_0(w^T z + b).
double h_out(const Eigen::VectorXd& z, const PredictorParticle& omega, Activation act);

/// Throws NumericOverflow carrying the layer index if any state becomes non-finite.
Trajectory forward(const ScaledResNet& net, const Eigen::VectorXd& x);

/// Network output only.
double predict(const ScaledResNet& net, const Eigen::VectorXd& x);
Eigen::VectorXd predict_all(const ScaledResNet& net, const LabeledDataset& data);

/// (1/n) sum_i 1/2 (f(x_i) - y_i)^2.
double loss(const ScaledResNet& net, const LabeledDataset& data);

/// Fraction of samples with y f(x) < 0.
double zero_one_error(const ScaledResNet& net, const LabeledDataset& data);

}  // namespace mfresnet
