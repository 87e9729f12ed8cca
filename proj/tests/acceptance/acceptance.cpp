// One PASS/FAIL line per acceptance criterion; exit status 1 if any criterion fails.
// Usage: mfresnet_acceptance <source_dir> <work_dir> [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfresnet/datagen.hpp"
#include "mfresnet/divergence.hpp"
#include "mfresnet/dynamics.hpp"
#include "mfresnet/gram.hpp"
#include "mfresnet/harness.hpp"
#include "mfresnet/nnmodel.hpp"
#include "mfresnet/rademacher.hpp"
#include "mfresnet/rng.hpp"
#include "mfresnet/training.hpp"
#include "mfresnet/verify.hpp"

using namespace mfresnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path source;
  fs::path work;
  // Filled by criterion 1 and reused by criterion 11.
  std::vector<RunRecord> spiral_runs;
  bool spiral_done = false;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ScaledResNet seeded_net(const ModelShape& shape, std::uint64_t seed, bool antithetic = false) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(StreamPurpose::kInit)});
  return init_gaussian(shape, rng, antithetic);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome spiral_rate(Context& ctx) {
  const ExperimentConfig cfg = config_from_map(load_config_file(ctx.source / "configs" / "spirals_rate.conf"));
  const fs::path root = ctx.work / "spirals_rate";
  fs::remove_all(root);
  const ExperimentResult res = run_experiment(cfg, root);
  ctx.spiral_runs = res.runs;
  ctx.spiral_done = !res.any_failed;
  if (res.any_failed) return {false, "a training run overflowed"};
  std::vector<std::pair<double, double>> pts;
  for (const auto& a : res.aggregates) pts.emplace_back(a.n_train, a.mean_test01);
  const RateFit f = fit_rate(pts, cfg.n_test);
  const bool ok = f.slope >= -1.4 && f.slope <= -0.6 && f.p_value < 0.01;
  return {ok, "slope " + fmt(f.slope) + " p " + fmt(f.p_value) + " clamped " + std::to_string(f.clamped) +
                  " wall " + fmt(res.wall_seconds) + "s"};
}

Outcome gradient_exactness(Context&) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int d = 2 + static_cast<int>(s % 2);
    const ModelShape shape{d, 1 + static_cast<int>(s % 5), 1 + static_cast<int>(s % 4), 1 + static_cast<int>((s + 2) % 4),
                           0.5 + 0.1 * static_cast<double>(s % 7), 0.5 + 0.25 * static_cast<double>(s % 5),
                           Activation::Tanh};
    const ScaledResNet net = seeded_net(shape, 1000 + s);
    const auto data = random_unit_dataset(2 + static_cast<int>(s % 5), d, 2000 + s);
    const GradientSet g = functional_gradients(net, data);
    const Eigen::VectorXd plain = g.plain_gradient();
    const Eigen::VectorXd fd = verify::finite_diff_loss_grad(net, data, 1e-4);
    const double floor = 1e-6 * plain.cwiseAbs().maxCoeff();
    for (Eigen::Index c = 0; c < plain.size(); ++c)
      worst = std::max(worst, std::abs(fd(c) - plain(c)) / std::max(std::abs(plain(c)), floor));
  }
  return {worst <= 1e-5, "max relative error " + fmt(worst) + " over 20 instances"};
}

Outcome init_identities(Context&) {
  double f_max = 0, z_max = 0, p_max = 0, g1_max = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const int d = 2 + static_cast<int>(s % 3);
    const ScaledResNet net = seeded_net({d, 2 + static_cast<int>(s % 6), 4 + 2 * static_cast<int>(s % 3), 6, 1.0 + 0.2 * s,
                                         1.0 + s, Activation::Tanh},
                                        300 + s, true);
    const auto data = random_unit_dataset(6, d, 400 + s);
    for (int i = 0; i < data.n(); ++i) {
      const Trajectory tr = adjoint(net, forward(net, data.sample(i)));
      f_max = std::max(f_max, std::abs(tr.f));
      for (const auto& z : tr.z) z_max = std::max(z_max, (z - data.sample(i)).norm());
      for (const auto& p : tr.p) p_max = std::max(p_max, p.norm());
    }
    g1_max = std::max(g1_max, compute_G1(net, data).norm());
  }
  const bool ok = f_max <= 1e-12 && z_max <= 1e-12 && p_max <= 1e-12 && g1_max <= 1e-10;
  return {ok, "|f| " + fmt(f_max) + " |z-x| " + fmt(z_max) + " |p| " + fmt(p_max) + " |G1|_F " + fmt(g1_max)};
}

Outcome loss_rate_identity(Context&) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const int d = 2 + static_cast<int>(s % 2);
    const ScaledResNet net = seeded_net({d, 2 + static_cast<int>(s % 4), 4, 4, 0.5 + 0.2 * s, 1.0 + 0.3 * s,
                                         Activation::Tanh},
                                        500 + s);
    const auto data = random_unit_dataset(4 + static_cast<int>(s % 4), d, 600 + s);
    worst = std::max(worst, check_dLdt_identity(net, data, 1e-4).error);
  }
  return {worst <= 0.05, "max relative error " + fmt(worst) + " over 10 instances"};
}

Outcome rate_floor(Context&) {
  const int n = 8;
  const auto data = random_unit_dataset(n, 2, 77);
  ScaledResNet net = seeded_net({2, 4, 8, 8, 1.0, 2.0, Activation::Tanh}, 78);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Euler;
  cfg.eta = 0.005;
  cfg.steps = 400;
  cfg.log_every = 1;
  ProbeSet probes;
  probes.test_error = false;
  probes.gram = true;
  const auto log = train(net, data, nullptr, cfg, probes);
  const double beta = net.beta();
  int checked = 0, violations = 0, increases = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < log.rows.size(); ++i) {
    const auto& a = log.rows[i];
    const auto& b = log.rows[i + 1];
    if (b.train_loss > a.train_loss) ++increases;
    if (!a.lmin_g2 || *a.lmin_g2 <= 0.0 || a.train_loss <= 0.0) continue;
    const double decay = -(b.train_loss - a.train_loss) / ((b.step - a.step) * cfg.eta * a.train_loss);
    const double floor = 2.0 * beta * beta / n * *a.lmin_g2;
    worst_ratio = std::min(worst_ratio, decay / floor);
    if (decay < 0.9 * floor) ++violations;
    ++checked;
  }
  const bool ok = checked > 0 && violations == 0 && increases == 0;
  return {ok, std::to_string(checked) + " steps checked, min decay/floor " + fmt(worst_ratio) + ", " +
                  std::to_string(increases) + " loss increases"};
}

Outcome beta_scaling(Context&) {
  const double beta = 8.0;
  double movement[2] = {0.0, 0.0};
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto data = random_unit_dataset(16, 2, 100 + s);
    for (int j = 0; j < 2; ++j) {
      const double b = beta * (j + 1);
      ScaledResNet net = seeded_net({2, 10, 20, 20, 1.0, b, Activation::Tanh}, 700 + s);
      TrainConfig cfg;
      cfg.optimizer = Optimizer::Euler;
      cfg.eta = 2.0 / (b * b);  // matches the output's time scale at both values of beta
      cfg.steps = 1000;
      cfg.log_every = cfg.steps;
      ProbeSet probes;
      probes.test_error = false;
      probes.divergence = true;
      const auto log = train(net, data, nullptr, cfg, probes);
      movement[j] += *log.rows.back().w2_enc_sup / 3.0;
    }
  }
  const double ratio = movement[1] / movement[0];
  return {ratio >= 0.3 && ratio <= 0.8,
          "mean sup-W2 at beta " + fmt(movement[0]) + ", at 2 beta " + fmt(movement[1]) + ", ratio " + fmt(ratio)};
}

Outcome continuous_limit(Context&) {
  std::string detail;
  bool ok = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ScaledResNet net = seeded_net({1, 4, 6, 4, 1.0, 1.0, Activation::Tanh}, 800 + s);
    const auto errs = verify::transition_vs_exponential(net, Eigen::VectorXd::Constant(1, 0.3 + 0.2 * s));
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double r = errs[i].error / errs[i - 1].error;
      ok = ok && r >= 0.3 && r <= 0.7;
      detail += (detail.empty() ? "" : " ") + fmt(r);
    }
  }
  return {ok, "halving ratios " + detail};
}

Outcome transport_oracle(Context&) {
  Rng rng = make_rng(9, {static_cast<std::uint64_t>(StreamPurpose::kFixture)});
  std::normal_distribution<double> g(0.0, 1.0);
  auto cloud = [&](int m, int dim) {
    std::vector<Eigen::VectorXd> c;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd v(dim);
      for (int k = 0; k < dim; ++k) v(k) = g(rng);
      c.push_back(v);
    }
    return c;
  };
  double worst = 0.0, axiom = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int m = 1 + t % 6;
    const auto A = cloud(m, 3), B = cloud(m, 3);
    worst = std::max(worst, std::abs(w2_clouds(A, B) - verify::enumerate_w2(A, B)));
  }
  for (int t = 0; t < 50; ++t) {
    const int m = 2 + t % 5;
    const auto A = cloud(m, 3), B = cloud(m, 3), C = cloud(m, 3);
    const double ab = w2_clouds(A, B), ba = w2_clouds(B, A), bc = w2_clouds(B, C), ac = w2_clouds(A, C);
    axiom = std::max({axiom, std::abs(ab - ba), ac - ab - bc, w2_clouds(A, A), -ab});
  }
  return {worst <= 1e-12 && axiom <= 1e-10, "max |hungarian - exhaustive| " + fmt(worst) + ", axiom slack " + fmt(axiom)};
}

Outcome hermite_machinery(Context&) {
  const auto id = hermite_coefficients(Activation::Identity, 8);
  double id_err = std::abs(id[1] - 1.0);
  for (int i = 0; i <= 8; ++i)
    if (i != 1) id_err = std::max(id_err, std::abs(id[static_cast<std::size_t>(i)]));
  const auto th = hermite_coefficients(Activation::Tanh, 16);
  double even = 0.0;
  for (int i = 0; i <= 16; i += 2) even = std::max(even, std::abs(th[static_cast<std::size_t>(i)]));

  Rng rng = make_rng(10, {static_cast<std::uint64_t>(StreamPurpose::kFixture)});
  std::normal_distribution<double> g(0.0, 1.0);
  double acc = 0.0;
  const int samples = 10'000'000;
  for (int i = 0; i < samples; ++i) {
    const double x = g(rng);
    acc += std::tanh(x) * x;
  }
  const double mc = acc / samples;
  const double rel = std::abs(mc - th[1]) / std::abs(th[1]);

  Rng mrng = make_rng(11, {static_cast<std::uint64_t>(StreamPurpose::kFixture)});
  auto sym = [&](int n) {
    Eigen::MatrixXd X(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) X(i, j) = g(mrng);
    return Eigen::MatrixXd(0.5 * (X + X.transpose()));
  };
  int gersh_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd S = sym(2 + t % 9);
    if (lambda_min(S) < gershgorin_floor(S) - 1e-12) ++gersh_bad;
  }
  double charpoly = 0.0;
  for (int t = 0; t < 60; ++t) {
    const Eigen::MatrixXd S = sym(1 + t % 6);
    charpoly = std::max(charpoly, std::abs(lambda_min(S) - verify::lambda_min_charpoly(S)));
  }
  const bool ok = id_err <= 1e-10 && even <= 1e-12 && rel < 5e-4 && gersh_bad == 0 && charpoly <= 1e-8;
  return {ok, "identity " + fmt(id_err) + ", tanh even " + fmt(even) + ", mu1 quad " + fmt(th[1]) + " mc " + fmt(mc) +
                  ", gershgorin violations " + std::to_string(gersh_bad) + ", charpoly " + fmt(charpoly)};
}

Outcome boundedness(Context&) {
  int checked = 0, skipped = 0, violations = 0;
  double worst_z = 0.0, worst_p = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const double alpha = 0.25 + 0.125 * static_cast<double>(s);
    const auto data = random_unit_dataset(8, 2, 900 + s);
    ScaledResNet net = seeded_net({2, 4, 8, 8, alpha, 3.0, Activation::Tanh}, 910 + s);
    TrainConfig cfg;
    cfg.optimizer = Optimizer::Euler;
    cfg.eta = 0.02;
    cfg.steps = 300;
    cfg.log_every = 10;
    ProbeSet probes;
    probes.test_error = false;
    probes.bounds = true;
    auto sink = [&](const TrainRow& row, const ScaledResNet& now) {
      const ConstantsReport c = constants_report(now.d(), now.alpha(), data.n(), data.C_max, now);
      if (!std::isfinite(c.C_Z) || !std::isfinite(c.C_p)) {
        ++skipped;
        return;
      }
      ++checked;
      worst_z = std::max(worst_z, *row.max_z_norm / c.C_Z);
      worst_p = std::max(worst_p, *row.max_p_norm / c.C_p);
      if (*row.max_z_norm > c.C_Z || *row.max_p_norm > c.C_p) ++violations;
    };
    train(net, data, nullptr, cfg, probes, sink);
  }
  return {checked > 0 && violations == 0,
          std::to_string(checked) + " rows checked (" + std::to_string(skipped) + " with overflowed constants), max |z|/C_Z " +
              fmt(worst_z) + ", max |p|/C_p " + fmt(worst_p)};
}

Outcome rademacher_estimator(Context& ctx) {
  Rng rng = make_rng(12, {static_cast<std::uint64_t>(StreamPurpose::kFixture)});
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_z = 0.0;
  for (int t = 0; t < 16; ++t) {
    const int members = 1 + t % 4, n = 3 + t % 8;
    Eigen::MatrixXd F(members, n);
    for (int j = 0; j < members; ++j)
      for (int i = 0; i < n; ++i) F(j, i) = g(rng);
    const double exact = verify::exhaustive_rademacher(F);
    const auto est = empirical_rademacher(F, 2000, 1300 + static_cast<std::uint64_t>(t));
    const double se = std::max(est.std_error, 1e-15);
    worst_z = std::max(worst_z, std::abs(est.mean - exact) / se);
  }
  Eigen::MatrixXd big(8, 10);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 10; ++i) big(j, i) = g(rng);
  bool monotone = true;
  double prev = -1.0;
  for (int k = 1; k <= 8; ++k) {
    const double r = empirical_rademacher(Eigen::MatrixXd(big.topRows(k)), 500, 1400).mean;
    monotone = monotone && r >= prev;
    prev = r;
  }
  bool bound_ok = ctx.spiral_done && !ctx.spiral_runs.empty();
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& r : ctx.spiral_runs) {
    min_gap = std::min(min_gap, r.gen_bound - r.final_test01);
    bound_ok = bound_ok && r.gen_bound >= r.final_test01;
  }
  const std::string bound_msg =
      ctx.spiral_done ? "min(bound - test01) " + fmt(min_gap) : std::string("spiral sweep unavailable");
  return {worst_z <= 3.0 && monotone && bound_ok,
          "max |mc - exact| / se " + fmt(worst_z) + ", monotone " + (monotone ? "yes" : "no") + ", " + bound_msg};
}

Outcome determinism(Context& ctx) {
  const ExperimentConfig cfg = config_from_map(load_config_file(ctx.source / "configs" / "smoke.conf"));
  const fs::path a = ctx.work / "det_a", b = ctx.work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const ExperimentResult ra = run_experiment(cfg, a);
  const ExperimentResult rb = run_experiment(cfg, b);
  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(ra.run_dir)) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(rb.run_dir / entry.path().filename())) ++differing;
  }
  return {compared > 0 && differing == 0 && !ra.any_failed,
          std::to_string(compared) + " CSV files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: mfresnet_acceptance <source_dir> <work_dir> [criteria...]\n";
    return 2;
  }
  Context ctx{argv[1], argv[2], {}, false};
  fs::create_directories(ctx.work);
  std::set<int> only;
  for (int i = 3; i < argc; ++i) only.insert(std::stoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"two-spirals test error rate", spiral_rate},
      {"gradient exactness", gradient_exactness},
      {"antithetic initialization identities", init_identities},
      {"loss rate identity", loss_rate_identity},
      {"rate floor and monotone loss", rate_floor},
      {"beta scaling of encoder movement", beta_scaling},
      {"continuous depth limit", continuous_limit},
      {"optimal transport oracle", transport_oracle},
      {"hermite and eigenvalue machinery", hermite_machinery},
      {"boundedness of states and adjoints", boundedness},
      {"rademacher estimator and bound", rademacher_estimator},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%2d] %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
