#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/nnmodel.hpp"

namespace mfresnet {

/// Mean-field particle gradients, stored in the same layout as ScaledResNet::flatten().
///
/// theta(l, m) holds grad_theta of dL/dnu at theta_{l,m}, which equals L*M times the plain
/// parameter gradient of the loss; omega(k) holds grad_omega of dL/dtau at omega_k, equal to
/// K times the plain gradient.
class GradientSet {
 public:
  explicit GradientSet(const ModelShape& shape);

  const ModelShape& shape() const { return shape_; }
  Eigen::VectorXd::SegmentReturnType theta(int l, int m);
  Eigen::VectorXd::ConstSegmentReturnType theta(int l, int m) const;
  Eigen::VectorXd::SegmentReturnType omega(int k);
  Eigen::VectorXd::ConstSegmentReturnType omega(int k) const;

  Eigen::VectorXd& flat() { return flat_; }
  const Eigen::VectorXd& flat() const { return flat_; }

  /// Plain gradient of the loss w.r.t. flatten(): encoder blocks divided by L*M, predictor by K.
  Eigen::VectorXd plain_gradient() const;

 private:
  ModelShape shape_;
  Eigen::VectorXd flat_;
};

/// Fills traj.p with the exact transpose-Jacobian recursion of the forward map:
///   p_L = (1/K) sum_k grad_z h(z_L, omega_k),
///   p_l = (I + alpha/(M L) sum_m grad_z sigma(z_l, theta_{l,m}))^T p_{l+1}.
/// Note p carries no beta factor. Throws ContractViolation if traj does not come from forward().
Trajectory adjoint(const ScaledResNet& net, Trajectory traj);

/// forward() followed by adjoint() for every sample.
std::vector<Trajectory> trajectories(const ScaledResNet& net, const LabeledDataset& data);

/// Residual vector b_i = f(x_i) - y_i from precomputed trajectories.
Eigen::VectorXd residuals(const std::vector<Trajectory>& trajs, const LabeledDataset& data);

/// Mean-field gradients
///   omega_k:     E_x[ beta (f - y) grad_omega h(z_L, omega_k) ]
///   theta_{l,m}: E_x[ beta (f - y) alpha (p_{l+1}^T grad_theta sigma(z_l, theta_{l,m}))^T ].
/// Samples are accumulated in index order.
GradientSet functional_gradients(const ScaledResNet& net, const LabeledDataset& data);
GradientSet functional_gradients(const ScaledResNet& net, const LabeledDataset& data,
                                 const std::vector<Trajectory>& trajs);

/// One explicit Euler step of the particle gradient flow in rescaled time.
ScaledResNet gradient_flow_step(const ScaledResNet& net, const GradientSet& grads, double eta);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moment state over the flattened parameter vector.
class AdamState {
 public:
  AdamState(int num_params, AdamParams params);
  /// In-place update of `net` using the mean-field gradient set.
  void step(ScaledResNet& net, const GradientSet& grads, double lr);
  int steps_taken() const { return t_; }

 private:
  AdamParams params_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

}  // namespace mfresnet
