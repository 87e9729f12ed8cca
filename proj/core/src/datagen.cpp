#include "mfresnet/datagen.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfresnet/errors.hpp"
#include "mfresnet/rng.hpp"

namespace mfresnet {

namespace {
constexpr double kNormTol = 1e-12;
constexpr double kParallelTol = 1e-9;
}  // namespace

void LabeledDataset::validate() const {
  MFRESNET_REQUIRE(X.rows() == y.size(), "dataset: X rows and y length differ");
  MFRESNET_REQUIRE(X.allFinite() && y.allFinite(), "dataset: non-finite entries");
  MFRESNET_REQUIRE((y.array().abs() <= 1.0).all(), "dataset: |y| must be <= 1");
  if (unit_norm) {
    for (int i = 0; i < n(); ++i) {
      MFRESNET_REQUIRE(std::abs(X.row(i).norm() - 1.0) <= kNormTol, "dataset: row not unit norm");
    }
    MFRESNET_REQUIRE(n() < 2 || C_max < 1.0, "dataset: C_max must be < 1");
  }
}

double max_pairwise_inner(const Eigen::MatrixXd& X) {
  double best = -std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd gram = X * X.transpose();
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j) best = std::max(best, gram(i, j));
  return best;
}

LabeledDataset two_spirals(int n, double noise, std::uint64_t seed) {
  MFRESNET_REQUIRE(n >= 2 && n % 2 == 0, "two_spirals: n must be even and >= 2");
  MFRESNET_REQUIRE(noise >= 0.0 && std::isfinite(noise), "two_spirals: noise must be >= 0");
  const int half = n / 2;
  const double t_max = 3.0 * std::numbers::pi;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  LabeledDataset data;
  data.X.resize(n, 2);
  data.y.resize(n);
  for (int j = 0; j < half; ++j) {
    const double t = half > 1 ? t_max * j / (half - 1) : 0.0;
    const double r = t / t_max;
    const double cx = r * std::cos(t);
    const double cy = r * std::sin(t);
    // Interleave arms so that prefixes stay balanced.
    data.X(2 * j, 0) = cx;
    data.X(2 * j, 1) = cy;
    data.y(2 * j) = 1.0;
    data.X(2 * j + 1, 0) = -cx;
    data.X(2 * j + 1, 1) = -cy;
    data.y(2 * j + 1) = -1.0;
  }
  if (noise > 0.0) {
    for (int i = 0; i < n; ++i) {
      data.X(i, 0) += noise * gauss(rng);
      data.X(i, 1) += noise * gauss(rng);
    }
  }
  data.unit_norm = false;
  return data;
}

LabeledDataset sphere_lift(const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.X.allFinite(), "sphere_lift: non-finite input");
  LabeledDataset out;
  out.y = data.y;
  if (data.unit_norm) {
    // Already lifted: renormalize only, no second bias coordinate.
    out.X = data.X;
  } else {
    out.X.resize(data.n(), data.d() + 1);
    out.X.leftCols(data.d()) = data.X;
    out.X.col(data.d()).setOnes();
  }
  for (int i = 0; i < out.n(); ++i) {
    const double nrm = out.X.row(i).norm();
    MFRESNET_REQUIRE(nrm > 0.0, "sphere_lift: zero row");
    out.X.row(i) /= nrm;
  }
  const Eigen::MatrixXd gram = out.X * out.X.transpose();
  double c_max = -1.0;
  for (int i = 0; i < out.n(); ++i) {
    for (int j = i + 1; j < out.n(); ++j) {
      if (gram(i, j) >= 1.0 - kParallelTol) {
        std::ostringstream msg;
        msg << "sphere_lift: samples " << i << " and " << j << " are parallel";
        throw AssumptionViolation(msg.str(), i, j);
      }
      c_max = std::max(c_max, gram(i, j));
    }
  }
  out.unit_norm = true;
  out.C_max = c_max;
  return out;
}

LabeledDataset random_unit_dataset(int n, int d, std::uint64_t seed) {
  MFRESNET_REQUIRE(n >= 1 && d >= 1, "random_unit_dataset: n, d must be positive");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  LabeledDataset data;
  data.X.resize(n, d);
  data.y.resize(n);
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0;; ++attempt) {
    // Dense packings (e.g. many points on a circle) can never satisfy the cap.
    MFRESNET_REQUIRE(attempt < kMaxAttempts, "random_unit_dataset: cannot reach C_max < 0.99 for this (n, d)");
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) data.X(i, k) = gauss(rng);
      data.X.row(i).normalize();
      data.y(i) = coin(rng) ? 1.0 : -1.0;
    }
    const double c_max = n >= 2 ? max_pairwise_inner(data.X) : -1.0;
    if (c_max < 0.99) {
      data.C_max = c_max;
      break;
    }
  }
  data.unit_norm = true;
  return data;
}

void write_dataset(std::ostream& os, const LabeledDataset& data) {
  const auto old_prec = os.precision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int k = 0; k < data.d(); ++k) os << data.X(i, k) << ' ';
    os << data.y(i) << '\n';
  }
  os.precision(old_prec);
}

LabeledDataset read_dataset(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) continue;
    MFRESNET_REQUIRE(row.size() >= 2, "read_dataset: need at least one feature and a label");
    MFRESNET_REQUIRE(rows.empty() || row.size() == rows.front().size(), "read_dataset: ragged rows");
    rows.push_back(std::move(row));
  }
  MFRESNET_REQUIRE(!rows.empty(), "read_dataset: no rows");
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows.front().size()) - 1;
  LabeledDataset data;
  data.X.resize(n, d);
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) data.X(i, k) = rows[i][k];
    data.y(i) = rows[i][d];
  }
  bool unit = true;
  for (int i = 0; i < n && unit; ++i) unit = std::abs(data.X.row(i).norm() - 1.0) <= kNormTol;
  if (unit) {
    data.unit_norm = true;
    data.C_max = n >= 2 ? max_pairwise_inner(data.X) : -1.0;
  }
  data.validate();
  return data;
}

}  // namespace mfresnet
