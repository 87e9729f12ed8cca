// mfresnet: run experiments, fit rates, render plots, run oracles, print constants.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfresnet/datagen.hpp"
#include "mfresnet/divergence.hpp"
#include "mfresnet/errors.hpp"
#include "mfresnet/harness.hpp"
#include "mfresnet/rng.hpp"
#include "mfresnet/verify.hpp"

namespace fs = std::filesystem;
using namespace mfresnet;

namespace {

int fail(const std::string& kind, const std::string& message, const std::vector<std::string>& keys = {}) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  if (!keys.empty()) err["keys"] = keys;
  std::cerr << err.dump() << '\n';
  return kind == "config" ? 2 : 1;
}

ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigMap map = path.empty() ? ConfigMap{} : load_config_file(path);
  return config_from_map(apply_overrides(std::move(map), overrides));
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int cmd_run(const std::string& config, const std::vector<std::string>& overrides, const std::string& out) {
  const ExperimentConfig cfg = load(config, overrides);
  const fs::path root = !out.empty() ? fs::path(out) : !cfg.output_dir.empty() ? fs::path(cfg.output_dir)
                                                                                : default_output_root();
  const ExperimentResult res = run_experiment(cfg, root);
  std::cout << "run_dir=" << res.run_dir.string() << '\n';
  std::cout << "n_train,runs,mean_test01,mean_train_loss,mean_gen_bound\n";
  for (const auto& a : res.aggregates)
    std::cout << a.n_train << ',' << a.runs << ',' << num(a.mean_test01) << ',' << num(a.mean_train_loss) << ','
              << num(a.mean_gen_bound) << '\n';
  std::cout << "wall_seconds=" << num(res.wall_seconds) << '\n';
  if (res.any_failed) {
    std::vector<std::string> failed;
    for (const auto& r : res.runs)
      if (r.failed) failed.push_back(r.csv.filename().string());
    return fail("numeric_overflow", "one or more runs overflowed; partial CSVs kept", failed);
  }
  return 0;
}

int cmd_fit(const std::string& dir) {
  const RateFit fit = fit_run_dir(dir);
  std::cout << "slope=" << num(fit.slope) << "\nintercept=" << num(fit.intercept) << "\nslope_se="
            << num(fit.slope_se) << "\np_value=" << num(fit.p_value) << "\nr_squared=" << num(fit.r_squared)
            << "\npoints=" << fit.points.size() << "\nclamped=" << fit.clamped << '\n';
  return 0;
}

int cmd_plot(const std::string& dir) {
  for (const auto& p : emit_plots(dir)) std::cout << p.string() << '\n';
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : verify::run_suite(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " value=" << num(r.value) << " tol=" << num(r.tolerance);
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : fail("verify", "oracle tolerance exceeded");
}

int cmd_constants(const std::string& config, const std::vector<std::string>& overrides) {
  const ExperimentConfig cfg = load(config, overrides);
  const int n = cfg.n_train.front();
  const std::uint64_t seed = cfg.seeds.front();
  constexpr auto kTrain = static_cast<std::uint64_t>(StreamPurpose::kTrainData);
  constexpr auto kInit = static_cast<std::uint64_t>(StreamPurpose::kInit);
  const std::uint64_t data_seed = substream_seed(cfg.train.seed, {kTrain, static_cast<std::uint64_t>(n), seed});
  LabeledDataset data = cfg.dataset == "two_spirals" ? two_spirals(n, cfg.noise, data_seed)
                                                      : random_unit_dataset(n, cfg.model.d - (cfg.sphere_lift ? 1 : 0),
                                                                            data_seed);
  // The Gram lower bound needs unit-norm inputs; raw data is lifted only to measure C_max.
  // Noise-free spirals start both arms at the origin, so repeated rows are dropped first.
  const bool lifted_for_cmax = !data.unit_norm;
  int dropped = 0;
  double c_max = data.C_max;
  if (lifted_for_cmax) {
    LabeledDataset distinct;
    std::vector<Eigen::RowVectorXd> seen;
    for (int i = 0; i < data.n(); ++i) {
      const Eigen::RowVectorXd row = data.X.row(i);
      if (std::find(seen.begin(), seen.end(), row) == seen.end()) seen.push_back(row);
      else ++dropped;
    }
    distinct.X.resize(static_cast<Eigen::Index>(seen.size()), data.d());
    distinct.y = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(seen.size()));
    for (std::size_t i = 0; i < seen.size(); ++i) distinct.X.row(static_cast<Eigen::Index>(i)) = seen[i];
    c_max = sphere_lift(distinct).C_max;
  }
  Rng rng = make_rng(cfg.train.seed, {kInit, static_cast<std::uint64_t>(n), seed});
  const ScaledResNet net = init_gaussian(cfg.model, rng, cfg.antithetic);
  const ConstantsReport c = constants_report(cfg.model.d, cfg.model.alpha, n, c_max, net);
  std::cout << "n=" << n << "\nd=" << cfg.model.d << "\nalpha=" << num(cfg.model.alpha) << "\nC_max=" << num(c_max)
            << (lifted_for_cmax ? " (after sphere lift)" : "")
            << (dropped > 0 ? " duplicate_rows_dropped=" + std::to_string(dropped) : std::string()) << "\nC_1=" << num(c.C_1) << "\nC_sigma="
            << num(c.C_sigma) << "\nnu_sq_inf=" << num(c.nu_sq) << "\ntau_sq=" << num(c.tau_sq) << "\nC_Z=" << num(c.C_Z)
            << "\nC_p=" << num(c.C_p) << "\nC_G=" << num(c.C_G) << "\nC_KL=" << num(c.C_KL) << "\nC_d=" << num(c.C_d)
            << "\nhermite_resolved=" << (c.hermite_resolved ? "true" : "false")
            << (c.hermite_resolved ? std::string() : " (" + c.hermite_note + ")") << "\nhermite_r=" << c.hermite.r << "\nmu_r=" << num(c.hermite.mu_r) << "\nLambda=" << num(c.Lambda)
            << "\nr_max=" << num(c.r_max) << "\nbeta_bar_threshold=" << num(c.beta_bar_threshold)
            << "\nr0=" << num(c.r0) << "\noverflow=" << (c.overflow ? "true" : "false") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled mean-field ResNet laboratory"};
  app.require_subcommand(1);

  std::string config, out, dir;
  std::vector<std::string> overrides;
  std::uint64_t verify_seed = 20240601;

  auto* run = app.add_subcommand("run", "train every (n_train, seed) pair of a config");
  run->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("overrides", overrides, "key=value overrides");
  run->add_option("-o,--out", out, "output root (default: $MFRESNET_OUTPUT_ROOT or ./runs)");

  auto* fit = app.add_subcommand("fit", "log-log OLS of mean test error against n_train");
  fit->add_option("run_dir", dir)->required()->check(CLI::ExistingDirectory);

  auto* plot = app.add_subcommand("plot", "write TSV tables and SVG charts");
  plot->add_option("run_dir", dir)->required()->check(CLI::ExistingDirectory);

  auto* ver = app.add_subcommand("verify", "run the oracle suite");
  ver->add_option("--seed", verify_seed);

  auto* cons = app.add_subcommand("constants", "print theoretical constants at initialization");
  cons->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  cons->add_option("overrides", overrides, "key=value overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*run) return cmd_run(config, overrides, out);
    if (*fit) return cmd_fit(dir);
    if (*plot) return cmd_plot(dir);
    if (*ver) return cmd_verify(verify_seed);
    if (*cons) return cmd_constants(config, overrides);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.keys());
  } catch (const ContractViolation& e) {
    return fail("contract", e.what());
  } catch (const NumericOverflow& e) {
    return fail("numeric_overflow", e.what());
  } catch (const AssumptionViolation& e) {
    return fail("assumption", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
