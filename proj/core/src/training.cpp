#include "mfresnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "mfresnet/errors.hpp"
#include "mfresnet/gram.hpp"

namespace mfresnet {

Optimizer parse_optimizer(std::string_view name) {
  if (name == "euler" || name == "gradient-flow-euler") return Optimizer::Euler;
  if (name == "adam") return Optimizer::Adam;
  throw ContractViolation("unknown optimizer: " + std::string(name));
}

std::string_view optimizer_name(Optimizer opt) { return opt == Optimizer::Euler ? "euler" : "adam"; }

void TrainConfig::validate() const {
  MFRESNET_REQUIRE(std::isfinite(eta) && eta > 0.0, "train: eta must be > 0");
  MFRESNET_REQUIRE(steps >= 0, "train: steps must be >= 0");
  MFRESNET_REQUIRE(log_every >= 1, "train: log_every must be >= 1");
}

TrainRow probe_row(int step, const ScaledResNet& net, const InitSnapshot& snap, const LabeledDataset& train_data,
                   const LabeledDataset* test_data, const ProbeSet& probes) {
  TrainRow row;
  row.step = step;
  row.train_loss = loss(net, train_data);
  std::vector<Trajectory> trajs;
  if (probes.bounds) trajs = trajectories(net, train_data);
  if (probes.test_error && test_data != nullptr) row.test01 = zero_one_error(net, *test_data);
  if (probes.gram) {
    const GramReport g = gram_report(net, train_data);
    row.lmin_g1 = g.lambda_min_G1;
    row.lmin_g2 = g.lambda_min_G2;
  }
  if (probes.divergence) {
    const DivergenceReport d = divergence_report(net, snap);
    row.w2_enc_sup = d.sup_w2_encoder;
    row.w2_pred = d.w2_predictor;
    row.klg_enc = d.kl_gauss_encoder;
    row.klg_pred = d.kl_gauss_predictor;
  }
  if (probes.bounds) {
    double zmax = 0.0, pmax = 0.0;
    for (const auto& tr : trajs) {
      for (const auto& z : tr.z) zmax = std::max(zmax, z.norm());
      for (const auto& p : tr.p) pmax = std::max(pmax, p.norm());
    }
    row.max_z_norm = zmax;
    row.max_p_norm = pmax;
  }
  return row;
}

TrainLog train(ScaledResNet& net, const LabeledDataset& train_data, const LabeledDataset* test_data,
               const TrainConfig& cfg, const ProbeSet& probes, const RowSink& sink) {
  cfg.validate();
  MFRESNET_REQUIRE(train_data.n() > 0, "train: empty training set");
  MFRESNET_REQUIRE(train_data.d() == net.d(), "train: dimension mismatch");
  if (test_data != nullptr) MFRESNET_REQUIRE(test_data->d() == net.d(), "train: test dimension mismatch");

  const InitSnapshot snap(net);
  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log;
  auto emit = [&](int step) {
    TrainRow row = probe_row(step, net, snap, train_data, test_data, probes);
    if (probes.wall_clock)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(row.train_loss)) throw NumericOverflow("train: non-finite loss", step);
    log.rows.push_back(row);
    if (sink) sink(log.rows.back(), net);
  };

  emit(0);
  std::optional<AdamState> adam;
  if (cfg.optimizer == Optimizer::Adam) adam.emplace(net.num_params(), cfg.adam);
  for (int step = 1; step <= cfg.steps; ++step) {
    try {
      const GradientSet g = functional_gradients(net, train_data);
      if (adam) {
        adam->step(net, g, cfg.eta);
      } else {
        net = gradient_flow_step(net, g, cfg.eta);
      }
    } catch (const NumericOverflow& e) {
      throw NumericOverflow(std::string("train: ") + e.what(), step);
    }
    if (step % cfg.log_every == 0 || step == cfg.steps) emit(step);
  }
  return log;
}

}  // namespace mfresnet
