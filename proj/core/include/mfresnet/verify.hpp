#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/nnmodel.hpp"

// Oracles written against loss(), predict() and the raw particle definitions only; none of
// them calls the adjoint, gradient, Gram or assignment code they are used to check.
namespace mfresnet::verify {

/// Central differences of loss() over every coordinate of flatten(). h in [1e-6, 1e-3].
Eigen::VectorXd finite_diff_loss_grad(const ScaledResNet& net, const LabeledDataset& data, double h);

/// exp(A) by scaling and squaring with a [6/6] Pade approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

/// Largest singular value.
double operator_norm(const Eigen::MatrixXd& A);

struct TransitionError {
  int L = 0;
  double error = 0.0;
};
/// Depth-s particles are those of layer floor(s * net.L()) of `net`; for each depth in `depths`
/// the network is re-discretized, a trajectory from x is frozen, and the backward transition
/// product prod_l (I + alpha/(M L) sum_m grad_z sigma)^T is compared in operator norm with the
/// exponential of the Riemann sum alpha (1/L) sum_l (1/M) sum_m grad_z sigma. Depths that are
/// multiples of net.L() refine one fixed particle profile; others subsample it.
std::vector<TransitionError> transition_vs_exponential(const ScaledResNet& net, const Eigen::VectorXd& x,
                                                       const std::vector<int>& depths = {4, 8, 16, 32});

/// Gram matrices from rows built by finite differences of sigma and h; the adjoint states are
/// themselves finite differences of the remaining network. n <= 8.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> brute_force_gram(const ScaledResNet& net, const LabeledDataset& data,
                                                             double h = 1e-5);

/// Exact W2 by enumerating all permutations; |A| = |B| <= 7.
double enumerate_w2(const std::vector<Eigen::VectorXd>& A, const std::vector<Eigen::VectorXd>& B);

/// Exact E_eta[max_j (1/n) sum_i eta_i F(j, i)] over all 2^n sign vectors; n <= 20.
double exhaustive_rademacher(const Eigen::MatrixXd& outputs);

/// Characteristic polynomial coefficients c_0..c_n of det(xI - A) (Faddeev-LeVerrier), c_n = 1.
Eigen::VectorXd char_poly(const Eigen::MatrixXd& A);
/// Smallest root of the characteristic polynomial of a symmetric matrix, n <= 6.
double lambda_min_charpoly(const Eigen::MatrixXd& A);

struct OracleResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};
/// Runs every oracle on seeded fixtures against the production code.
std::vector<OracleResult> run_suite(std::uint64_t seed = 20240601);

}  // namespace mfresnet::verify
