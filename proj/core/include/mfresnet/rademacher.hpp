#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/divergence.hpp"
#include "mfresnet/nnmodel.hpp"

namespace mfresnet {

/// Finite stand-in for a KL ball of networks; estimates over it are lower bounds on the
/// complexity of the whole ball.
struct FunctionFamily {
  std::vector<ScaledResNet> members;
  double r_label = 0.0;
  void validate() const;
};

struct RademacherEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int n_draws = 0;
};

/// Monte Carlo E_eta[max_j (1/n) sum_i eta_i F(j, i)] for a members-by-samples output matrix.
/// Draw t uses its own substream of `seed`, so two families evaluated with the same seed
/// and sample count see identical sign vectors.
RademacherEstimate empirical_rademacher(const Eigen::MatrixXd& outputs, int n_draws, std::uint64_t seed);
RademacherEstimate empirical_rademacher(const FunctionFamily& family, const LabeledDataset& data, int n_draws,
                                        std::uint64_t seed);

/// Member outputs on the data, one row per member.
Eigen::MatrixXd family_outputs(const FunctionFamily& family, const LabeledDataset& data);

/// 4 R + 6 sqrt(log(2/delta) / (2n)) + sqrt(2 train_loss), where train_loss is the halved
/// mean squared residual returned by loss().
double generalization_bound(double R_hat, double train_loss, int n, double delta);

/// KL( N(mean_a, cov_a) || N(mean_b, cov_b) ); +inf if cov_b is singular.
double gaussian_kl(const GaussianFit& a, const GaussianFit& b);

/// Largest Gaussian-KL proxy of any member relative to the snapshot, taken over the
/// predictor cloud and every encoder layer.
double kl_radius_for_family(const FunctionFamily& family, const InitSnapshot& snap);

}  // namespace mfresnet
