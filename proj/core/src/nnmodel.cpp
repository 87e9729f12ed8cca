#include "mfresnet/nnmodel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mfresnet/errors.hpp"

namespace mfresnet {

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid_shifted") return Activation::SigmoidShifted;
  if (name == "erf") return Activation::Erf;
  if (name == "identity") return Activation::Identity;
  throw ContractViolation("unknown activation: " + std::string(name));
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::SigmoidShifted: return "sigmoid_shifted";
    case Activation::Erf: return "erf";
    case Activation::Identity: return "identity";
  }
  return "?";
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::SigmoidShifted: return 0.5 * std::tanh(0.5 * x);  // sigmoid(x) - 1/2
    case Activation::Erf: return std::erf(0.5 * std::sqrt(std::numbers::pi) * x);  // slope 1 at 0
    case Activation::Identity: return x;
  }
  return 0.0;
}

double activate_d1(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::SigmoidShifted: {
      const double t = std::tanh(0.5 * x);
      return 0.25 * (1.0 - t * t);
    }
    case Activation::Erf: return std::exp(-0.25 * std::numbers::pi * x * x);
    case Activation::Identity: return 1.0;
  }
  return 0.0;
}

double activate_d2(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::SigmoidShifted: {
      const double t = std::tanh(0.5 * x);
      return -0.25 * t * (1.0 - t * t);
    }
    case Activation::Erf: return -0.5 * std::numbers::pi * x * std::exp(-0.25 * std::numbers::pi * x * x);
    case Activation::Identity: return 0.0;
  }
  return 0.0;
}

Eigen::VectorXd EncoderParticle::flat() const {
  const int d = dim();
  Eigen::VectorXd v(2 * d + 1);
  v.head(d) = u;
  v.segment(d, d) = w;
  v(2 * d) = b;
  return v;
}

EncoderParticle EncoderParticle::from_flat(const Eigen::Ref<const Eigen::VectorXd>& v, int d) {
  MFRESNET_REQUIRE(v.size() == 2 * d + 1, "EncoderParticle::from_flat: size mismatch");
  return EncoderParticle{v.head(d), v.segment(d, d), v(2 * d)};
}

Eigen::VectorXd PredictorParticle::flat() const {
  const int d = dim();
  Eigen::VectorXd v(d + 2);
  v(0) = a;
  v.segment(1, d) = w;
  v(d + 1) = b;
  return v;
}

PredictorParticle PredictorParticle::from_flat(const Eigen::Ref<const Eigen::VectorXd>& v, int d) {
  MFRESNET_REQUIRE(v.size() == d + 2, "PredictorParticle::from_flat: size mismatch");
  return PredictorParticle{v(0), v.segment(1, d), v(d + 1)};
}

void ModelShape::validate() const {
  MFRESNET_REQUIRE(d >= 1, "model: d must be >= 1");
  MFRESNET_REQUIRE(L >= 1, "model: L must be >= 1");
  MFRESNET_REQUIRE(M >= 1, "model: M must be >= 1");
  MFRESNET_REQUIRE(K >= 1, "model: K must be >= 1");
  // alpha = 0 is admitted as a diagnostic (residual branch disabled).
  MFRESNET_REQUIRE(std::isfinite(alpha) && alpha >= 0.0, "model: alpha must be finite and >= 0");
  MFRESNET_REQUIRE(std::isfinite(beta) && beta > 0.0, "model: beta must be finite and > 0");
}

ScaledResNet::ScaledResNet(const ModelShape& shape) : shape_(shape) {
  shape_.validate();
  const auto d = shape_.d;
  theta_.assign(static_cast<std::size_t>(shape_.L * shape_.M),
                EncoderParticle{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), 0.0});
  omega_.assign(static_cast<std::size_t>(shape_.K), PredictorParticle{0.0, Eigen::VectorXd::Zero(d), 0.0});
}

void ScaledResNet::set_alpha(double alpha) {
  MFRESNET_REQUIRE(std::isfinite(alpha) && alpha >= 0.0, "alpha must be finite and >= 0");
  shape_.alpha = alpha;
}

void ScaledResNet::set_beta(double beta) {
  MFRESNET_REQUIRE(std::isfinite(beta) && beta > 0.0, "beta must be finite and > 0");
  shape_.beta = beta;
}

int ScaledResNet::num_params() const {
  return shape_.L * shape_.M * EncoderParticle::flat_size(shape_.d) +
         shape_.K * PredictorParticle::flat_size(shape_.d);
}

int ScaledResNet::theta_offset(int l, int m) const {
  return (l * shape_.M + m) * EncoderParticle::flat_size(shape_.d);
}

int ScaledResNet::omega_offset(int k) const {
  return shape_.L * shape_.M * EncoderParticle::flat_size(shape_.d) + k * PredictorParticle::flat_size(shape_.d);
}

Eigen::VectorXd ScaledResNet::flatten() const {
  Eigen::VectorXd out(num_params());
  const int ke = EncoderParticle::flat_size(shape_.d);
  const int kp = PredictorParticle::flat_size(shape_.d);
  for (int l = 0; l < shape_.L; ++l)
    for (int m = 0; m < shape_.M; ++m) out.segment(theta_offset(l, m), ke) = theta(l, m).flat();
  for (int k = 0; k < shape_.K; ++k) out.segment(omega_offset(k), kp) = omega(k).flat();
  return out;
}

void ScaledResNet::assign_flat(const Eigen::Ref<const Eigen::VectorXd>& params) {
  MFRESNET_REQUIRE(params.size() == num_params(), "assign_flat: size mismatch");
  const int d = shape_.d;
  const int ke = EncoderParticle::flat_size(d);
  const int kp = PredictorParticle::flat_size(d);
  for (int l = 0; l < shape_.L; ++l)
    for (int m = 0; m < shape_.M; ++m)
      theta(l, m) = EncoderParticle::from_flat(params.segment(theta_offset(l, m), ke), d);
  for (int k = 0; k < shape_.K; ++k) omega(k) = PredictorParticle::from_flat(params.segment(omega_offset(k), kp), d);
}

void ScaledResNet::validate() const {
  shape_.validate();
  MFRESNET_REQUIRE(theta_.size() == static_cast<std::size_t>(shape_.L * shape_.M), "net: encoder grid size");
  MFRESNET_REQUIRE(omega_.size() == static_cast<std::size_t>(shape_.K), "net: predictor size");
  for (const auto& t : theta_) {
    MFRESNET_REQUIRE(t.u.size() == shape_.d && t.w.size() == shape_.d, "net: encoder particle dimension");
    MFRESNET_REQUIRE(t.finite(), "net: non-finite encoder particle");
  }
  for (const auto& o : omega_) {
    MFRESNET_REQUIRE(o.w.size() == shape_.d, "net: predictor particle dimension");
    MFRESNET_REQUIRE(o.finite(), "net: non-finite predictor particle");
  }
}

bool ScaledResNet::operator==(const ScaledResNet& other) const {
  return shape_ == other.shape_ && flatten() == other.flatten();
}

ScaledResNet init_gaussian(const ModelShape& shape, Rng& rng, bool antithetic) {
  ScaledResNet net(shape);
  if (antithetic) {
    MFRESNET_REQUIRE(shape.M % 2 == 0 && shape.K % 2 == 0, "antithetic init needs even M and K");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = shape.d;
  auto draw = [&](int size) {
    Eigen::VectorXd v(size);
    for (int i = 0; i < size; ++i) v(i) = gauss(rng);
    return v;
  };
  for (int l = 0; l < shape.L; ++l) {
    if (antithetic) {
      for (int m = 0; m < shape.M / 2; ++m) {
        auto p = EncoderParticle::from_flat(draw(2 * d + 1), d);
        net.theta(l, 2 * m) = p;
        p.u = -p.u;
        net.theta(l, 2 * m + 1) = p;
      }
    } else {
      for (int m = 0; m < shape.M; ++m) net.theta(l, m) = EncoderParticle::from_flat(draw(2 * d + 1), d);
    }
  }
  if (antithetic) {
    for (int k = 0; k < shape.K / 2; ++k) {
      auto p = PredictorParticle::from_flat(draw(d + 2), d);
      net.omega(2 * k) = p;
      p.a = -p.a;
      net.omega(2 * k + 1) = p;
    }
  } else {
    for (int k = 0; k < shape.K; ++k) net.omega(k) = PredictorParticle::from_flat(draw(d + 2), d);
  }
  return net;
}

Eigen::VectorXd sigma(const Eigen::VectorXd& z, const EncoderParticle& theta, Activation act) {
  MFRESNET_REQUIRE(z.size() == theta.w.size() && z.size() == theta.u.size(), "sigma: dimension mismatch");
  return theta.u * activate(act, theta.w.dot(z) + theta.b);
}

double h_out(const Eigen::VectorXd& z, const PredictorParticle& omega, Activation act) {
  MFRESNET_REQUIRE(z.size() == omega.w.size(), "h_out: dimension mismatch");
  return omega.a * activate(act, omega.w.dot(z) + omega.b);
}

Trajectory forward(const ScaledResNet& net, const Eigen::VectorXd& x) {
  const int d = net.d();
  MFRESNET_REQUIRE(x.size() == d, "forward: input dimension mismatch");
  MFRESNET_REQUIRE(x.allFinite(), "forward: non-finite input");
  const Activation act = net.activation();
  const double step = net.alpha() / (static_cast<double>(net.M()) * net.L());

  Trajectory traj;
  traj.z.reserve(static_cast<std::size_t>(net.L() + 1));
  traj.z.push_back(x);
  Eigen::VectorXd branch(d);
  for (int l = 0; l < net.L(); ++l) {
    const Eigen::VectorXd& z = traj.z.back();
    branch.setZero();
    for (int m = 0; m < net.M(); ++m) {
      const auto& th = net.theta(l, m);
      branch.noalias() += th.u * activate(act, th.w.dot(z) + th.b);
    }
    Eigen::VectorXd next = z + step * branch;
    if (!next.allFinite()) throw NumericOverflow("forward: non-finite state", l + 1);
    traj.z.push_back(std::move(next));
  }
  const Eigen::VectorXd& zL = traj.z.back();
  double acc = 0.0;
  for (int k = 0; k < net.K(); ++k) {
    const auto& om = net.omega(k);
    acc += om.a * activate(act, om.w.dot(zL) + om.b);
  }
  traj.f = net.beta() / net.K() * acc;
  if (!std::isfinite(traj.f)) throw NumericOverflow("forward: non-finite output", net.L());
  return traj;
}

double predict(const ScaledResNet& net, const Eigen::VectorXd& x) { return forward(net, x).f; }

Eigen::VectorXd predict_all(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.d() == net.d(), "predict_all: dimension mismatch");
  Eigen::VectorXd out(data.n());
  for (int i = 0; i < data.n(); ++i) out(i) = forward(net, data.sample(i)).f;
  return out;
}

double loss(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.n() > 0, "loss: empty dataset");
  const Eigen::VectorXd f = predict_all(net, data);
  return 0.5 * (f - data.y).squaredNorm() / data.n();
}

double zero_one_error(const ScaledResNet& net, const LabeledDataset& data) {
  MFRESNET_REQUIRE(data.n() > 0, "zero_one_error: empty dataset");
  const Eigen::VectorXd f = predict_all(net, data);
  int wrong = 0;
  for (int i = 0; i < data.n(); ++i) wrong += (data.y(i) * f(i) < 0.0) ? 1 : 0;
  return static_cast<double>(wrong) / data.n();
}

}  // namespace mfresnet
