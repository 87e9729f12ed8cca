#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/nnmodel.hpp"

namespace mfresnet {

/// Gram matrices of the per-sample tangent vectors at one parameter snapshot.
struct GramReport {
  Eigen::MatrixXd G1;  // encoder: (1/L) sum_l (1/M) sum_m J1 J1^T
  Eigen::MatrixXd G2;  // predictor: (1/K) sum_k J2 J2^T
  Eigen::VectorXd b;   // residuals f(x_i) - y_i
  double lambda_min_G1 = 0.0;
  double lambda_min_G2 = 0.0;
  double lambda_min_combined = 0.0;  // lambda_min(alpha^2 G1 + G2)
};

/// Rows J1(l,m)_i = p_{l+1}(x_i)^T grad_theta sigma(z_l(x_i), theta_{l,m}).
Eigen::MatrixXd compute_G1(const ScaledResNet& net, const LabeledDataset& data);
/// Rows J2(k)_i = grad_omega h(z_L(x_i), omega_k).
Eigen::MatrixXd compute_G2(const ScaledResNet& net, const LabeledDataset& data);

/// Both Gram matrices, residuals and minimum eigenvalues.
GramReport gram_report(const ScaledResNet& net, const LabeledDataset& data);

/// Smallest eigenvalue of a symmetric matrix. Throws ContractViolation when
/// max |A - A^T| exceeds 1e-8 * max(1, max|A|).
double lambda_min(const Eigen::MatrixXd& A);

/// min_i (A_ii - sum_{j != i} |A_ij|).
double gershgorin_floor(const Eigen::MatrixXd& A);

/// Gauss-Hermite rule for E_{g ~ N(0,1)}[.]: symmetric nodes, weights summing to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermiteRule gauss_hermite_rule(int num_nodes);

/// mu_i(sigma_0) = E[sigma_0(g) He_i(g)] / sqrt(i!) for i = 0..max_order.
std::vector<double> hermite_coefficients(Activation act, int max_order, int num_nodes = 256);

struct HermiteBound {
  int r = 0;                // selected Hermite order
  double r_floor = 0.0;     // 2 log(2n) / (1 - C_max)
  double mu_r = 0.0;        // mu_r(sigma_0)
  double C_max = 0.0;
  double Lambda = 0.0;      // mu_r^2 / 2
  double gershgorin = 0.0;  // mu_r^2 (1 - (n-1) ((1+C_max)/2)^r), never below Lambda when r >= r_floor
};

/// Largest Hermite order the bound will attempt.
inline constexpr int kMaxHermiteOrder = 20000;

/// Lower bound on lambda_min(G2) at a Gaussian initialization. Picks the smallest r >= r_floor with
/// |mu_r| > 1e-12, searching up to r_floor + 10; throws DegenerateActivation when no such r exists
/// or r_floor exceeds kMaxHermiteOrder.
HermiteBound hermite_lower_bound(int n, double C_max, Activation act);

/// Relative error between the finite-difference loss rate over one Euler step of size eta and
/// -(beta^2/n^2) b^T (alpha^2 G1 + G2) b. Falls back to the absolute error when the predicted
/// rate is zero.
struct RateCheck {
  double measured_rate = 0.0;   // (L(after) - L(before)) / eta
  double predicted_rate = 0.0;  // -(beta^2/n^2) b^T (alpha^2 G1 + G2) b
  double error = 0.0;
  bool relative = true;
};
RateCheck check_dLdt_identity(const ScaledResNet& net, const LabeledDataset& data, double eta);

/// min{sqrt(d), Lambda / (4 n C_G)}.
double r_max(double Lambda, int n, double C_G, int d);

}  // namespace mfresnet
