#include "mfresnet/dynamics.hpp"

#include <cmath>

#include "mfresnet/errors.hpp"

namespace mfresnet {

GradientSet::GradientSet(const ModelShape& shape) : shape_(shape) {
  const int n = shape.L * shape.M * EncoderParticle::flat_size(shape.d) +
                shape.K * PredictorParticle::flat_size(shape.d);
  flat_ = Eigen::VectorXd::Zero(n);
}

Eigen::VectorXd::SegmentReturnType GradientSet::theta(int l, int m) {
  const int ke = EncoderParticle::flat_size(shape_.d);
  return flat_.segment((l * shape_.M + m) * ke, ke);
}

Eigen::VectorXd::ConstSegmentReturnType GradientSet::theta(int l, int m) const {
  const int ke = EncoderParticle::flat_size(shape_.d);
  return flat_.segment((l * shape_.M + m) * ke, ke);
}

Eigen::VectorXd::SegmentReturnType GradientSet::omega(int k) {
  const int ke = EncoderParticle::flat_size(shape_.d);
  const int kp = PredictorParticle::flat_size(shape_.d);
  return flat_.segment(shape_.L * shape_.M * ke + k * kp, kp);
}

Eigen::VectorXd::ConstSegmentReturnType GradientSet::omega(int k) const {
  const int ke = EncoderParticle::flat_size(shape_.d);
  const int kp = PredictorParticle::flat_size(shape_.d);
  return flat_.segment(shape_.L * shape_.M * ke + k * kp, kp);
}

Eigen::VectorXd GradientSet::plain_gradient() const {
  Eigen::VectorXd g = flat_;
  const int enc = shape_.L * shape_.M * EncoderParticle::flat_size(shape_.d);
  g.head(enc) /= static_cast<double>(shape_.L * shape_.M);
  g.tail(g.size() - enc) /= static_cast<double>(shape_.K);
  return g;
}

Trajectory adjoint(const ScaledResNet& net, Trajectory traj) {
  const int d = net.d();
  const int L = net.L();
  MFRESNET_REQUIRE(traj.z.size() == static_cast<std::size_t>(L + 1), "adjoint: trajectory missing or wrong depth");
  for (const auto& z : traj.z) MFRESNET_REQUIRE(z.size() == d, "adjoint: trajectory dimension mismatch");
  const Activation act = net.activation();

  traj.p.assign(static_cast<std::size_t>(L + 1), Eigen::VectorXd::Zero(d));
  Eigen::VectorXd& pL = traj.p[static_cast<std::size_t>(L)];
  const Eigen::VectorXd& zL = traj.z.back();
  for (int k = 0; k < net.K(); ++k) {
    const auto& om = net.omega(k);
    pL.noalias() += (om.a * activate_d1(act, om.w.dot(zL) + om.b)) * om.w;
  }
  pL /= static_cast<double>(net.K());

  const double step = net.alpha() / (static_cast<double>(net.M()) * L);
  for (int l = L - 1; l >= 0; --l) {
    const Eigen::VectorXd& next = traj.p[static_cast<std::size_t>(l + 1)];
    const Eigen::VectorXd& z = traj.z[static_cast<std::size_t>(l)];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
    for (int m = 0; m < net.M(); ++m) {
      const auto& th = net.theta(l, m);
      acc.noalias() += (activate_d1(act, th.w.dot(z) + th.b) * th.u.dot(next)) * th.w;
    }
    Eigen::VectorXd cur = next + step * acc;
    if (!cur.allFinite()) throw NumericOverflow("adjoint: non-finite state", l);
    traj.p[static_cast<std::size_t>(l)] = std::move(cur);
  }
  return traj;
}

std::vector<Trajectory> trajectories(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.d() == net.d(), "trajectories: dimension mismatch");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) out.push_back(adjoint(net, forward(net, data.sample(i))));
  return out;
}

Eigen::VectorXd residuals(const std::vector<Trajectory>& trajs, const LabeledDataset& data) {
  MFRESNET_REQUIRE(trajs.size() == static_cast<std::size_t>(data.n()), "residuals: size mismatch");
  Eigen::VectorXd b(data.n());
  for (int i = 0; i < data.n(); ++i) b(i) = trajs[static_cast<std::size_t>(i)].f - data.y(i);
  return b;
}

GradientSet functional_gradients(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.n() > 0, "functional_gradients: empty dataset");
  return functional_gradients(net, data, trajectories(net, data));
}

GradientSet functional_gradients(const ScaledResNet& net, const LabeledDataset& data,
                                 const std::vector<Trajectory>& trajs) {
  MFRESNET_REQUIRE(data.n() > 0, "functional_gradients: empty dataset");
  MFRESNET_REQUIRE(trajs.size() == static_cast<std::size_t>(data.n()), "functional_gradients: trajectory count");
  const int d = net.d();
  const Activation act = net.activation();
  GradientSet g(net.shape());

  for (int i = 0; i < data.n(); ++i) {
    const Trajectory& tr = trajs[static_cast<std::size_t>(i)];
    MFRESNET_REQUIRE(tr.has_adjoint(), "functional_gradients: adjoint missing");
    const double r = net.beta() * (tr.f - data.y(i)) / data.n();
    if (r == 0.0) continue;

    const Eigen::VectorXd& zL = tr.z.back();
    for (int k = 0; k < net.K(); ++k) {
      const auto& om = net.omega(k);
      const double s = om.w.dot(zL) + om.b;
      const double d1 = om.a * activate_d1(act, s);
      auto gk = g.omega(k);
      gk(0) += r * activate(act, s);
      gk.segment(1, d) += (r * d1) * zL;
      gk(d + 1) += r * d1;
    }

    const double ra = r * net.alpha();
    if (ra == 0.0) continue;
    for (int l = 0; l < net.L(); ++l) {
      const Eigen::VectorXd& z = tr.z[static_cast<std::size_t>(l)];
      const Eigen::VectorXd& p = tr.p[static_cast<std::size_t>(l + 1)];
      for (int m = 0; m < net.M(); ++m) {
        const auto& th = net.theta(l, m);
        const double s = th.w.dot(z) + th.b;
        const double coef = th.u.dot(p) * activate_d1(act, s);
        auto gt = g.theta(l, m);
        gt.head(d) += (ra * activate(act, s)) * p;
        gt.segment(d, d) += (ra * coef) * z;
        gt(2 * d) += ra * coef;
      }
    }
  }
  return g;
}

ScaledResNet gradient_flow_step(const ScaledResNet& net, const GradientSet& grads, double eta) {
  MFRESNET_REQUIRE(grads.shape() == net.shape(), "gradient_flow_step: shape mismatch");
  MFRESNET_REQUIRE(std::isfinite(eta) && eta >= 0.0, "gradient_flow_step: eta must be finite and >= 0");
  ScaledResNet out = net;
  if (eta == 0.0) return out;
  const Eigen::VectorXd params = net.flatten() - eta * grads.flat();
  if (!params.allFinite()) throw NumericOverflow("gradient_flow_step: non-finite parameters", 0);
  out.assign_flat(params);
  return out;
}

AdamState::AdamState(int num_params, AdamParams params)
    : params_(params), m_(Eigen::VectorXd::Zero(num_params)), v_(Eigen::VectorXd::Zero(num_params)) {
  MFRESNET_REQUIRE(params.beta1 >= 0.0 && params.beta1 < 1.0, "adam: beta1 in [0,1)");
  MFRESNET_REQUIRE(params.beta2 >= 0.0 && params.beta2 < 1.0, "adam: beta2 in [0,1)");
  MFRESNET_REQUIRE(params.eps > 0.0, "adam: eps > 0");
}

void AdamState::step(ScaledResNet& net, const GradientSet& grads, double lr) {
  MFRESNET_REQUIRE(grads.flat().size() == m_.size(), "adam: parameter count mismatch");
  ++t_;
  const Eigen::VectorXd& g = grads.flat();
  m_ = params_.beta1 * m_ + (1.0 - params_.beta1) * g;
  v_ = params_.beta2 * v_ + (1.0 - params_.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(params_.beta1, t_);
  const double c2 = 1.0 - std::pow(params_.beta2, t_);
  const Eigen::VectorXd update =
      (m_.array() / c1) / ((v_.array() / c2).sqrt() + params_.eps);
  Eigen::VectorXd params = net.flatten() - lr * update;
  if (!params.allFinite()) throw NumericOverflow("adam: non-finite parameters", t_);
  net.assign_flat(params);
}

}  // namespace mfresnet
