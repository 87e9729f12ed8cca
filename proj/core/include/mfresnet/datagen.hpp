#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace mfresnet {

/// n samples in R^d with labels in [-1, 1].
struct LabeledDataset {
  Eigen::MatrixXd X;  // n x d, one sample per row
  Eigen::VectorXd y;
  bool unit_norm = false;
  /// max_{i != j} <x_i, x_j>; only maintained for unit-norm data (NaN otherwise).
  double C_max = std::numeric_limits<double>::quiet_NaN();

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
  Eigen::VectorXd sample(int i) const { return X.row(i).transpose(); }

  /// Checks shapes, finiteness and |y| <= 1; for unit-norm data also the norm and C_max < 1.
  void validate() const;
};

/// Largest off-diagonal inner product between rows; -inf for n < 2.
double max_pairwise_inner(const Eigen::MatrixXd& X);

/// Two interleaved spirals: n/2 points per arm on a uniform angle grid t in [0, 3*pi],
/// radius t/(3*pi), arm B is arm A negated. Labels +1 (arm A) and -1 (arm B).
LabeledDataset two_spirals(int n, double noise, std::uint64_t seed);

/// Appends a unit bias coordinate and rescales every row to unit norm.
/// Throws AssumptionViolation naming the first pair with <x_i, x_j> >= 1 - 1e-9.
LabeledDataset sphere_lift(const LabeledDataset& data);

/// Rows uniform on S^{d-1}, labels uniform in {-1, +1}; redrawn until C_max < 0.99.
LabeledDataset random_unit_dataset(int n, int d, std::uint64_t seed);

/// Whitespace-separated text, one sample per row, label in the last column.
void write_dataset(std::ostream& os, const LabeledDataset& data);
LabeledDataset read_dataset(std::istream& is);

}  // namespace mfresnet
