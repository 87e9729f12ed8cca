#include "mfresnet/rademacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfresnet/errors.hpp"
#include "mfresnet/rng.hpp"

namespace mfresnet {

void FunctionFamily::validate() const {
  MFRESNET_REQUIRE(!members.empty(), "FunctionFamily: empty family");
  for (const auto& m : members)
    MFRESNET_REQUIRE(m.shape() == members.front().shape(), "FunctionFamily: members must share their shape");
}

Eigen::MatrixXd family_outputs(const FunctionFamily& family, const LabeledDataset& data) {
  family.validate();
  Eigen::MatrixXd F(static_cast<Eigen::Index>(family.members.size()), data.n());
  for (std::size_t j = 0; j < family.members.size(); ++j)
    F.row(static_cast<Eigen::Index>(j)) = predict_all(family.members[j], data).transpose();
  return F;
}

RademacherEstimate empirical_rademacher(const Eigen::MatrixXd& outputs, int n_draws, std::uint64_t seed) {
  MFRESNET_REQUIRE(outputs.rows() > 0, "empirical_rademacher: empty family");
  MFRESNET_REQUIRE(outputs.cols() > 0, "empirical_rademacher: empty dataset");
  MFRESNET_REQUIRE(n_draws >= 100, "empirical_rademacher: need at least 100 draws");
  const Eigen::Index n = outputs.cols();
  Eigen::VectorXd eta(n);
  double sum = 0.0, sumsq = 0.0;
  for (int t = 0; t < n_draws; ++t) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kRademacher), static_cast<std::uint64_t>(t)});
    for (Eigen::Index i = 0; i < n; ++i) eta(i) = (rng() >> 63) ? 1.0 : -1.0;
    const double v = (outputs * eta).maxCoeff() / static_cast<double>(n);
    sum += v;
    sumsq += v * v;
  }
  RademacherEstimate est;
  est.n_draws = n_draws;
  est.mean = sum / n_draws;
  const double var = std::max(0.0, (sumsq - n_draws * est.mean * est.mean) / (n_draws - 1));
  est.std_error = std::sqrt(var / n_draws);
  return est;
}

RademacherEstimate empirical_rademacher(const FunctionFamily& family, const LabeledDataset& data, int n_draws,
                                        std::uint64_t seed) {
  return empirical_rademacher(family_outputs(family, data), n_draws, seed);
}

double generalization_bound(double R_hat, double train_loss, int n, double delta) {
  MFRESNET_REQUIRE(delta > 0.0 && delta < 1.0, "generalization_bound: delta must be in (0, 1)");
  MFRESNET_REQUIRE(n >= 1, "generalization_bound: n must be positive");
  MFRESNET_REQUIRE(train_loss >= 0.0, "generalization_bound: train_loss must be >= 0");
  return 4.0 * R_hat + 6.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * n)) + std::sqrt(2.0 * train_loss);
}

double gaussian_kl(const GaussianFit& a, const GaussianFit& b) {
  MFRESNET_REQUIRE(a.mean.size() == b.mean.size(), "gaussian_kl: dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> lb(b.cov);
  const Eigen::LLT<Eigen::MatrixXd> la(a.cov);
  if (lb.info() != Eigen::Success || la.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const auto k = static_cast<double>(a.mean.size());
  const double logdet_a = 2.0 * la.matrixLLT().diagonal().array().log().sum();
  const double logdet_b = 2.0 * lb.matrixLLT().diagonal().array().log().sum();
  const Eigen::VectorXd dm = b.mean - a.mean;
  const double tr = lb.solve(a.cov).trace();
  const double quad = dm.dot(lb.solve(dm));
  return std::max(0.0, 0.5 * (tr + quad - k + logdet_b - logdet_a));
}

double kl_radius_for_family(const FunctionFamily& family, const InitSnapshot& snap) {
  family.validate();
  const ScaledResNet& ref = snap.net();
  MFRESNET_REQUIRE(family.members.front().shape() == ref.shape(), "kl_radius_for_family: snapshot shape mismatch");
  const GaussianFit ref_pred = fit_gaussian(predictor_cloud(ref));
  std::vector<GaussianFit> ref_enc;
  for (int l = 0; l < ref.L(); ++l) ref_enc.push_back(fit_gaussian(encoder_cloud(ref, l)));

  double r = 0.0;
  for (const auto& net : family.members) {
    r = std::max(r, gaussian_kl(fit_gaussian(predictor_cloud(net)), ref_pred));
    for (int l = 0; l < net.L(); ++l)
      r = std::max(r, gaussian_kl(fit_gaussian(encoder_cloud(net, l)), ref_enc[static_cast<std::size_t>(l)]));
  }
  return r;
}

}  // namespace mfresnet
