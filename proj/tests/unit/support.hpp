#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mfresnet/datagen.hpp"
#include "mfresnet/nnmodel.hpp"
#include "mfresnet/rng.hpp"

namespace mfresnet::testkit {

inline ScaledResNet random_net(const ModelShape& shape, std::uint64_t seed, bool antithetic = false) {
  Rng rng(seed);
  return init_gaussian(shape, rng, antithetic);
}

inline Eigen::MatrixXd random_symmetric(int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd X(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = g(rng);
  return 0.5 * (X + X.transpose());
}

inline std::vector<Eigen::VectorXd> random_cloud(int m, int dim, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Eigen::VectorXd> c;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd v(dim);
    for (int k = 0; k < dim; ++k) v(k) = g(rng);
    c.push_back(v);
  }
  return c;
}

// Plain-loop duplicate of the forward map, with the states kept.
struct NaiveStates {
  std::vector<std::vector<double>> z;
  double f = 0.0;
};

inline NaiveStates naive_forward(const ScaledResNet& net, const Eigen::VectorXd& x) {
  const int d = net.d();
  NaiveStates s;
  s.z.emplace_back(x.data(), x.data() + d);
  for (int l = 0; l < net.L(); ++l) {
    std::vector<double> z = s.z.back();
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
    for (int m = 0; m < net.M(); ++m) {
      const auto& th = net.theta(l, m);
      double pre = th.b;
      for (int k = 0; k < d; ++k) pre += th.w(k) * z[static_cast<std::size_t>(k)];
      const double a = activate(net.activation(), pre);
      for (int k = 0; k < d; ++k) acc[static_cast<std::size_t>(k)] += th.u(k) * a;
    }
    for (int k = 0; k < d; ++k)
      z[static_cast<std::size_t>(k)] += net.alpha() / (net.M() * net.L()) * acc[static_cast<std::size_t>(k)];
    s.z.push_back(z);
  }
  double out = 0.0;
  for (int k = 0; k < net.K(); ++k) {
    const auto& om = net.omega(k);
    double pre = om.b;
    for (int c = 0; c < d; ++c) pre += om.w(c) * s.z.back()[static_cast<std::size_t>(c)];
    out += om.a * activate(net.activation(), pre);
  }
  s.f = net.beta() * out / net.K();
  return s;
}

// Adjoint states by explicit transposed-Jacobian products written out with loops.
inline std::vector<std::vector<double>> naive_adjoint(const ScaledResNet& net, const NaiveStates& s) {
  const int d = net.d();
  const int L = net.L();
  const Activation act = net.activation();
  std::vector<std::vector<double>> p(static_cast<std::size_t>(L + 1), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  const auto& zL = s.z.back();
  for (int k = 0; k < net.K(); ++k) {
    const auto& om = net.omega(k);
    double pre = om.b;
    for (int c = 0; c < d; ++c) pre += om.w(c) * zL[static_cast<std::size_t>(c)];
    for (int c = 0; c < d; ++c)
      p[static_cast<std::size_t>(L)][static_cast<std::size_t>(c)] += om.a * activate_d1(act, pre) * om.w(c) / net.K();
  }
  for (int l = L - 1; l >= 0; --l) {
    const auto& z = s.z[static_cast<std::size_t>(l)];
    const auto& nxt = p[static_cast<std::size_t>(l + 1)];
    auto& cur = p[static_cast<std::size_t>(l)];
    cur = nxt;
    for (int m = 0; m < net.M(); ++m) {
      const auto& th = net.theta(l, m);
      double pre = th.b, up = 0.0;
      for (int c = 0; c < d; ++c) {
        pre += th.w(c) * z[static_cast<std::size_t>(c)];
        up += th.u(c) * nxt[static_cast<std::size_t>(c)];
      }
      // (grad_z sigma)^T p = w * sigma0'(pre) * (u . p)
      for (int c = 0; c < d; ++c)
        cur[static_cast<std::size_t>(c)] += net.alpha() / (net.M() * L) * th.w(c) * activate_d1(act, pre) * up;
    }
  }
  return p;
}

// Straight-line Jacobians of the Gram definitions.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> naive_jacobians(const ScaledResNet& net, const LabeledDataset& data) {
  const int d = net.d(), n = data.n(), ke = 2 * d + 1, kp = d + 2;
  const Activation act = net.activation();
  Eigen::MatrixXd J1(n, net.L() * net.M() * ke), J2(n, net.K() * kp);
  for (int i = 0; i < n; ++i) {
    const NaiveStates s = naive_forward(net, data.sample(i));
    const auto p = naive_adjoint(net, s);
    for (int l = 0; l < net.L(); ++l) {
      const auto& z = s.z[static_cast<std::size_t>(l)];
      const auto& pn = p[static_cast<std::size_t>(l + 1)];
      for (int m = 0; m < net.M(); ++m) {
        const auto& th = net.theta(l, m);
        double pre = th.b, up = 0.0;
        for (int c = 0; c < d; ++c) {
          pre += th.w(c) * z[static_cast<std::size_t>(c)];
          up += th.u(c) * pn[static_cast<std::size_t>(c)];
        }
        const int base = (l * net.M() + m) * ke;
        for (int c = 0; c < d; ++c) {
          J1(i, base + c) = activate(act, pre) * pn[static_cast<std::size_t>(c)];
          J1(i, base + d + c) = up * activate_d1(act, pre) * z[static_cast<std::size_t>(c)];
        }
        J1(i, base + 2 * d) = up * activate_d1(act, pre);
      }
    }
    const auto& zL = s.z.back();
    for (int k = 0; k < net.K(); ++k) {
      const auto& om = net.omega(k);
      double pre = om.b;
      for (int c = 0; c < d; ++c) pre += om.w(c) * zL[static_cast<std::size_t>(c)];
      const int base = k * kp;
      J2(i, base) = activate(act, pre);
      for (int c = 0; c < d; ++c) J2(i, base + 1 + c) = om.a * activate_d1(act, pre) * zL[static_cast<std::size_t>(c)];
      J2(i, base + d + 1) = om.a * activate_d1(act, pre);
    }
  }
  return {J1, J2};
}

inline LabeledDataset make_dataset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  LabeledDataset data;
  data.X = X;
  data.y = y;
  return data;
}

}  // namespace mfresnet::testkit
