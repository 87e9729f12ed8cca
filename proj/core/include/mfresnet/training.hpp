#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mfresnet/datagen.hpp"
#include "mfresnet/divergence.hpp"
#include "mfresnet/dynamics.hpp"
#include "mfresnet/nnmodel.hpp"

namespace mfresnet {

enum class Optimizer { Euler, Adam };
Optimizer parse_optimizer(std::string_view name);
std::string_view optimizer_name(Optimizer opt);

struct TrainConfig {
  double eta = 0.01;
  int steps = 1000;  // 0 is allowed and logs only the initial row
  Optimizer optimizer = Optimizer::Adam;
  AdamParams adam;
  std::uint64_t seed = 0;
  bool antithetic = false;
  int log_every = 50;
  void validate() const;
};

/// Which diagnostics to evaluate at each logged step. Train loss is always logged.
struct ProbeSet {
  bool test_error = true;
  bool gram = false;
  bool divergence = false;
  bool bounds = false;      // max ||z_l|| and ||p_l|| over the training set
  bool wall_clock = false;  // off by default so logs are reproducible byte for byte
};

struct TrainRow {
  int step = 0;
  double train_loss = 0.0;
  std::optional<double> test01;
  std::optional<double> lmin_g1;
  std::optional<double> lmin_g2;
  std::optional<double> w2_enc_sup;
  std::optional<double> w2_pred;
  std::optional<double> klg_enc;
  std::optional<double> klg_pred;
  std::optional<double> wall_ms;
  std::optional<double> max_z_norm;
  std::optional<double> max_p_norm;
};

struct TrainLog {
  std::vector<TrainRow> rows;
};

/// Called with each row and the parameters it was measured on, as soon as it is logged.
using RowSink = std::function<void(const TrainRow&, const ScaledResNet&)>;

/// Full-batch training of `net` in place. The snapshot for divergence probes is `net` as
/// passed in. Logs step 0, every `log_every` steps and the final step. A non-finite update
/// throws NumericOverflow carrying the step index.
TrainLog train(ScaledResNet& net, const LabeledDataset& train_data, const LabeledDataset* test_data,
               const TrainConfig& cfg, const ProbeSet& probes, const RowSink& sink = {});

/// Evaluate all enabled probes on a copy of the current parameters.
TrainRow probe_row(int step, const ScaledResNet& net, const InitSnapshot& snap, const LabeledDataset& train_data,
                   const LabeledDataset* test_data, const ProbeSet& probes);

}  // namespace mfresnet
