#include "mfresnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "mfresnet/datagen.hpp"
#include "mfresnet/errors.hpp"
#include "mfresnet/rademacher.hpp"
#include "mfresnet/rng.hpp"
#include "mfresnet/version.hpp"

namespace fs = std::filesystem;

namespace mfresnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string{}; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Collects every bad key before throwing.
class FieldReader {
 public:
  explicit FieldReader(const ConfigMap& map) : map_(map) {}

  template <typename F>
  void read(const std::string& key, F&& assign) {
    seen_.push_back(key);
    const auto it = map_.find(key);
    if (it == map_.end()) return;
    try {
      assign(it->second);
    } catch (const std::exception&) {
      bad_.push_back(key);
    }
  }

  std::vector<std::string> finish() {
    for (const auto& [k, v] : map_)
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) bad_.push_back(k);
    return bad_;
  }

 private:
  const ConfigMap& map_;
  std::vector<std::string> seen_;
  std::vector<std::string> bad_;
};

int to_int(const std::string& s) {
  std::size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& s) {
  std::size_t pos = 0;
  if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw std::invalid_argument(s);
}

template <typename T, typename Conv>
std::vector<T> to_list(const std::string& s, Conv conv) {
  std::vector<T> out;
  for (const auto& item : split(s, ','))
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

int base_input_dim(const ExperimentConfig& cfg) {
  if (cfg.dataset == "two_spirals") return 2;
  return cfg.model.d - (cfg.sphere_lift ? 1 : 0);
}

LabeledDataset make_data(const ExperimentConfig& cfg, int n, std::uint64_t seed) {
  LabeledDataset data = cfg.dataset == "two_spirals" ? two_spirals(n, cfg.noise, seed)
                                                      : random_unit_dataset(n, base_input_dim(cfg), seed);
  return cfg.sphere_lift ? sphere_lift(data) : data;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::vector<std::string> bad;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      bad.push_back("line:" + std::to_string(lineno));
      continue;
    }
    map[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!bad.empty()) throw ConfigError(bad);
  return map;
}

ConfigMap load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"file:" + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ConfigMap apply_overrides(ConfigMap base, const std::vector<std::string>& overrides) {
  std::vector<std::string> bad;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || trim(o.substr(0, eq)).empty()) {
      bad.push_back(o);
      continue;
    }
    base[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  if (!bad.empty()) throw ConfigError(bad);
  return base;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* key) {
    if (!ok) bad.emplace_back(key);
  };
  check(model.d >= 1, "model.d");
  check(model.L >= 1, "model.L");
  check(model.M >= 1 && (!antithetic || model.M % 2 == 0), "model.M");
  check(model.K >= 1 && (!antithetic || model.K % 2 == 0), "model.K");
  check(std::isfinite(model.alpha) && model.alpha >= 0.0, "model.alpha");
  check(std::isfinite(model.beta) && model.beta > 0.0, "model.beta");
  check(std::isfinite(train.eta) && train.eta > 0.0, "train.eta");
  check(train.steps >= 0, "train.steps");
  check(train.log_every >= 1, "train.log_every");
  check(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0, "train.adam_beta1");
  check(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0, "train.adam_beta2");
  check(train.adam.eps > 0.0, "train.adam_eps");
  check(dataset == "two_spirals" || dataset == "random_unit", "data.dataset");
  bool n_ok = !n_train.empty();
  for (int n : n_train) n_ok = n_ok && n >= 2 && (dataset != "two_spirals" || n % 2 == 0);
  check(n_ok, "data.n_train");
  check(n_test >= 2 && (dataset != "two_spirals" || n_test % 2 == 0), "data.n_test");
  check(std::isfinite(noise) && noise >= 0.0, "data.noise");
  check(!seeds.empty(), "data.seeds");
  check(base_input_dim(*this) >= 1 && (dataset != "two_spirals" || model.d == 2 + (sphere_lift ? 1 : 0)),
        "model.d");
  check(rademacher_draws >= 100, "rademacher.draws");
  check(rademacher_delta > 0.0 && rademacher_delta < 1.0, "rademacher.delta");
  check(rademacher_family >= 1, "rademacher.family");
  if (!bad.empty()) {
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    throw ConfigError(bad);
  }
}

ConfigMap config_to_map(const ExperimentConfig& c) {
  return {
      {"model.d", std::to_string(c.model.d)},
      {"model.L", std::to_string(c.model.L)},
      {"model.M", std::to_string(c.model.M)},
      {"model.K", std::to_string(c.model.K)},
      {"model.alpha", fmt_double(c.model.alpha)},
      {"model.beta", fmt_double(c.model.beta)},
      {"model.activation", std::string(activation_name(c.model.activation))},
      {"model.antithetic", bool_str(c.antithetic)},
      {"train.optimizer", std::string(optimizer_name(c.train.optimizer))},
      {"train.eta", fmt_double(c.train.eta)},
      {"train.steps", std::to_string(c.train.steps)},
      {"train.log_every", std::to_string(c.train.log_every)},
      {"train.seed", std::to_string(c.train.seed)},
      {"train.adam_beta1", fmt_double(c.train.adam.beta1)},
      {"train.adam_beta2", fmt_double(c.train.adam.beta2)},
      {"train.adam_eps", fmt_double(c.train.adam.eps)},
      {"data.dataset", c.dataset},
      {"data.n_train", join_list(c.n_train)},
      {"data.n_test", std::to_string(c.n_test)},
      {"data.noise", fmt_double(c.noise)},
      {"data.seeds", join_list(c.seeds)},
      {"data.sphere_lift", bool_str(c.sphere_lift)},
      {"probes.test_error", bool_str(c.probes.test_error)},
      {"probes.gram", bool_str(c.probes.gram)},
      {"probes.divergence", bool_str(c.probes.divergence)},
      {"probes.bounds", bool_str(c.probes.bounds)},
      {"probes.wall_clock", bool_str(c.probes.wall_clock)},
      {"rademacher.enabled", bool_str(c.rademacher)},
      {"rademacher.draws", std::to_string(c.rademacher_draws)},
      {"rademacher.delta", fmt_double(c.rademacher_delta)},
      {"rademacher.family", std::to_string(c.rademacher_family)},
      {"output.dir", c.output_dir},
      {"output.plots", bool_str(c.plots)},
  };
}

ConfigMap default_config_map() { return config_to_map(ExperimentConfig{}); }

ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig c;
  FieldReader r(map);
  r.read("model.d", [&](const std::string& v) { c.model.d = to_int(v); });
  r.read("model.L", [&](const std::string& v) { c.model.L = to_int(v); });
  r.read("model.M", [&](const std::string& v) { c.model.M = to_int(v); });
  r.read("model.K", [&](const std::string& v) { c.model.K = to_int(v); });
  r.read("model.alpha", [&](const std::string& v) { c.model.alpha = to_double(v); });
  r.read("model.beta", [&](const std::string& v) { c.model.beta = to_double(v); });
  r.read("model.activation", [&](const std::string& v) { c.model.activation = parse_activation(v); });
  r.read("model.antithetic", [&](const std::string& v) { c.antithetic = to_bool(v); });
  r.read("train.optimizer", [&](const std::string& v) { c.train.optimizer = parse_optimizer(v); });
  r.read("train.eta", [&](const std::string& v) { c.train.eta = to_double(v); });
  r.read("train.steps", [&](const std::string& v) { c.train.steps = to_int(v); });
  r.read("train.log_every", [&](const std::string& v) { c.train.log_every = to_int(v); });
  r.read("train.seed", [&](const std::string& v) { c.train.seed = to_u64(v); });
  r.read("train.adam_beta1", [&](const std::string& v) { c.train.adam.beta1 = to_double(v); });
  r.read("train.adam_beta2", [&](const std::string& v) { c.train.adam.beta2 = to_double(v); });
  r.read("train.adam_eps", [&](const std::string& v) { c.train.adam.eps = to_double(v); });
  r.read("data.dataset", [&](const std::string& v) { c.dataset = v; });
  r.read("data.n_train", [&](const std::string& v) { c.n_train = to_list<int>(v, to_int); });
  r.read("data.n_test", [&](const std::string& v) { c.n_test = to_int(v); });
  r.read("data.noise", [&](const std::string& v) { c.noise = to_double(v); });
  r.read("data.seeds", [&](const std::string& v) { c.seeds = to_list<std::uint64_t>(v, to_u64); });
  r.read("data.sphere_lift", [&](const std::string& v) { c.sphere_lift = to_bool(v); });
  r.read("probes.test_error", [&](const std::string& v) { c.probes.test_error = to_bool(v); });
  r.read("probes.gram", [&](const std::string& v) { c.probes.gram = to_bool(v); });
  r.read("probes.divergence", [&](const std::string& v) { c.probes.divergence = to_bool(v); });
  r.read("probes.bounds", [&](const std::string& v) { c.probes.bounds = to_bool(v); });
  r.read("probes.wall_clock", [&](const std::string& v) { c.probes.wall_clock = to_bool(v); });
  r.read("rademacher.enabled", [&](const std::string& v) { c.rademacher = to_bool(v); });
  r.read("rademacher.draws", [&](const std::string& v) { c.rademacher_draws = to_int(v); });
  r.read("rademacher.delta", [&](const std::string& v) { c.rademacher_delta = to_double(v); });
  r.read("rademacher.family", [&](const std::string& v) { c.rademacher_family = to_int(v); });
  r.read("output.dir", [&](const std::string& v) { c.output_dir = v; });
  r.read("output.plots", [&](const std::string& v) { c.plots = to_bool(v); });
  std::vector<std::string> bad = r.finish();
  c.train.antithetic = c.antithetic;
  // Range checks run even when parsing failed, so one error lists everything.
  try {
    c.validate();
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.keys().begin(), e.keys().end());
  }
  if (!bad.empty()) {
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    throw ConfigError(bad);
  }
  return c;
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  ConfigMap map = config_to_map(cfg);
  map.erase("output.dir");  // where results go does not change them
  map.erase("output.plots");
  std::string out;
  for (const auto& [k, v] : map) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path default_output_root() {
  if (const char* env = std::getenv("MFRESNET_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

std::string csv_line(const TrainRow& row) {
  std::string s = std::to_string(row.step);
  for (const auto& field : {std::optional<double>(row.train_loss), row.test01, row.lmin_g1, row.lmin_g2,
                            row.w2_enc_sup, row.w2_pred, row.klg_enc, row.klg_pred, row.wall_ms}) {
    s += ',';
    s += fmt_opt(field);
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& output_root) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.run_dir = output_root / ("run-" + config_hash(cfg));
  fs::create_directories(result.run_dir);
  const std::uint64_t master = cfg.train.seed;
  constexpr auto kTrain = static_cast<std::uint64_t>(StreamPurpose::kTrainData);
  constexpr auto kTest = static_cast<std::uint64_t>(StreamPurpose::kTestData);
  constexpr auto kInit = static_cast<std::uint64_t>(StreamPurpose::kInit);
  constexpr auto kRad = static_cast<std::uint64_t>(StreamPurpose::kRademacher);

  TrainConfig tc = cfg.train;
  tc.antithetic = cfg.antithetic;

  for (int n : cfg.n_train) {
    const auto un = static_cast<std::uint64_t>(n);
    for (std::uint64_t s : cfg.seeds) {
      RunRecord rec;
      rec.n_train = n;
      rec.seed = s;
      const std::string stem = "n" + std::to_string(n) + "_s" + std::to_string(s);
      rec.csv = result.run_dir / (stem + ".csv");
      const fs::path marker = result.run_dir / (stem + ".FAILED");
      fs::remove(marker);

      const LabeledDataset train_data = make_data(cfg, n, substream_seed(master, {kTrain, un, s}));
      const LabeledDataset test_data = make_data(cfg, cfg.n_test, substream_seed(master, {kTest, s}));
      Rng init_rng = make_rng(master, {kInit, un, s});
      ScaledResNet net = init_gaussian(cfg.model, init_rng, cfg.antithetic);

      std::ofstream csv(rec.csv, std::ios::binary | std::ios::trunc);
      csv << kCsvHeader << '\n';
      std::deque<ScaledResNet> checkpoints;
      const RowSink sink = [&](const TrainRow& row, const ScaledResNet& current) {
        csv << csv_line(row) << '\n';
        csv.flush();
        checkpoints.push_back(current);
        while (static_cast<int>(checkpoints.size()) > cfg.rademacher_family) checkpoints.pop_front();
      };
      try {
        train(net, train_data, &test_data, tc, cfg.probes, sink);
      } catch (const NumericOverflow& e) {
        rec.failed = true;
        rec.failure = e.what();
        std::ofstream(marker) << "step " << e.index() << ": " << e.what() << '\n';
      }
      csv.close();

      if (!rec.failed) {
        rec.final_train_loss = loss(net, train_data);
        rec.final_test01 = zero_one_error(net, test_data);
        if (cfg.rademacher) {
          FunctionFamily family{std::vector<ScaledResNet>(checkpoints.begin(), checkpoints.end()), 0.0};
          const RademacherEstimate est =
              empirical_rademacher(family, train_data, cfg.rademacher_draws, substream_seed(master, {kRad, un, s}));
          rec.rademacher = est.mean;
          rec.rademacher_se = est.std_error;
          rec.gen_bound = generalization_bound(est.mean, rec.final_train_loss, n, cfg.rademacher_delta);
        }
      }
      result.any_failed = result.any_failed || rec.failed;
      result.runs.push_back(rec);
    }
  }

  for (int n : cfg.n_train) {
    AggregateRow agg;
    agg.n_train = n;
    for (const auto& r : result.runs) {
      if (r.n_train != n || r.failed) continue;
      ++agg.runs;
      agg.mean_test01 += r.final_test01;
      agg.mean_train_loss += r.final_train_loss;
      agg.mean_rademacher += r.rademacher;
      agg.mean_gen_bound += r.gen_bound;
    }
    if (agg.runs > 0) {
      agg.mean_test01 /= agg.runs;
      agg.mean_train_loss /= agg.runs;
      agg.mean_rademacher /= agg.runs;
      agg.mean_gen_bound /= agg.runs;
    }
    result.aggregates.push_back(agg);
  }

  {
    std::ofstream out(result.run_dir / "aggregate.csv", std::ios::binary | std::ios::trunc);
    out << "n_train,runs,mean_test01,mean_train_loss,mean_rademacher,mean_gen_bound\n";
    for (const auto& a : result.aggregates)
      out << a.n_train << ',' << a.runs << ',' << fmt_double(a.mean_test01) << ',' << fmt_double(a.mean_train_loss)
          << ',' << fmt_double(a.mean_rademacher) << ',' << fmt_double(a.mean_gen_bound) << '\n';
  }

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest;
  manifest["config"] = config_to_map(cfg);
  manifest["config_hash"] = config_hash(cfg);
  manifest["version"] = kVersion;
  manifest["wall_seconds"] = result.wall_seconds;
  manifest["csv_header"] = kCsvHeader;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    runs.push_back({{"n_train", r.n_train},
                    {"seed", r.seed},
                    {"csv", r.csv.filename().string()},
                    {"status", r.failed ? "failed" : "ok"},
                    {"failure", r.failure},
                    {"final_train_loss", r.final_train_loss},
                    {"final_test01", r.final_test01},
                    {"rademacher", r.rademacher},
                    {"rademacher_se", r.rademacher_se},
                    {"gen_bound", r.gen_bound}});
  }
  manifest["runs"] = runs;
  std::ofstream(result.run_dir / "manifest.json", std::ios::trunc) << manifest.dump(2) << '\n';

  if (cfg.plots && !result.any_failed) emit_plots(result.run_dir);
  return result;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& aggregate, int n_test) {
  MFRESNET_REQUIRE(aggregate.size() >= 3, "fit_rate: need at least 3 points");
  RateFit fit;
  const double floor = n_test > 0 ? 1.0 / (2.0 * n_test) : 0.0;
  for (const auto& [n, err] : aggregate) {
    MFRESNET_REQUIRE(n > 0.0 && std::isfinite(err) && err >= 0.0, "fit_rate: invalid point");
    double e = err;
    if (e <= 0.0) {
      MFRESNET_REQUIRE(floor > 0.0, "fit_rate: zero error without a test-set size to clamp to");
      e = floor;
      ++fit.clamped;
    }
    fit.points.emplace_back(std::log(n), std::log(e));
  }
  if (fit.clamped > 0)
    std::cerr << "warning: fit_rate clamped " << fit.clamped << " zero error(s) to " << floor << '\n';

  const auto k = static_cast<double>(fit.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  MFRESNET_REQUIRE(sxx > 0.0, "fit_rate: need at least two distinct n");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (const auto& [x, y] : fit.points) {
    const double r = y - (fit.intercept + fit.slope * x);
    ssr += r * r;
  }
  // A constant series has nothing left to explain; report it as a perfect fit.
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  const double dof = k - 2.0;
  fit.slope_se = std::sqrt(ssr / dof / sxx);
  if (fit.slope_se > 0.0) {
    const boost::math::students_t dist(dof);
    const double t = std::abs(fit.slope / fit.slope_se);
    fit.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
  } else {
    fit.p_value = fit.slope != 0.0 ? 0.0 : 1.0;
  }
  return fit;
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  MFRESNET_REQUIRE(static_cast<bool>(in), "cannot read " + path.string());
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    cells.resize(t.header.size());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

nlohmann::json read_manifest(const fs::path& run_dir) {
  const fs::path path = run_dir / "manifest.json";
  MFRESNET_REQUIRE(fs::exists(path), "missing manifest.json in " + run_dir.string());
  return nlohmann::json::parse(read_file(path));
}

std::vector<std::pair<double, double>> read_aggregate_points(const fs::path& run_dir) {
  const fs::path path = run_dir / "aggregate.csv";
  MFRESNET_REQUIRE(fs::exists(path), "missing aggregate.csv in " + run_dir.string());
  const Table t = read_csv(path);
  const int cn = t.column("n_train"), ce = t.column("mean_test01"), cr = t.column("runs");
  MFRESNET_REQUIRE(cn >= 0 && ce >= 0 && cr >= 0, "aggregate.csv: unexpected header");
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : t.rows) {
    if (to_int(row[static_cast<std::size_t>(cr)]) == 0) continue;
    pts.emplace_back(to_double(row[static_cast<std::size_t>(cn)]), to_double(row[static_cast<std::size_t>(ce)]));
  }
  return pts;
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

// Minimal line chart; non-positive values are dropped on log axes.
std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series, bool logx, bool logy) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 50;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0) && (!logy || y > 0);
  };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double v) { return H - bottom - (ty(v) - y0) / (y1 - y0) * (H - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", logx ? std::pow(10.0, fx) : fx);
    o << "<text x=\"" << left + (W - left - right) * i / 4.0 << "\" y=\"" << H - bottom + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", logy ? std::pow(10.0, fy) : fy);
    o << "<text x=\"" << left - 6 << "\" y=\"" << H - bottom - (H - top - bottom) * i / 4.0 + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << buf << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\" font-size=\"13\">" << ylabel << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % 7];
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) pts << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (usable(s.x[i], s.y[i]))
          o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"4\" fill=\"" << col << "\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" points=\"" << pts.str() << "\"/>\n";
    }
    o << "<text x=\"" << W - right - 4 << "\" y=\"" << top + 14 * (si + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
      << col << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

RateFit fit_run_dir(const fs::path& run_dir) {
  const nlohmann::json manifest = read_manifest(run_dir);
  int n_test = 0;
  if (manifest.contains("config") && manifest["config"].contains("data.n_test"))
    n_test = to_int(manifest["config"]["data.n_test"].get<std::string>());
  const RateFit fit = fit_rate(read_aggregate_points(run_dir), n_test);
  nlohmann::json out{{"slope", fit.slope},         {"intercept", fit.intercept}, {"slope_se", fit.slope_se},
                     {"p_value", fit.p_value},     {"r_squared", fit.r_squared}, {"clamped", fit.clamped},
                     {"points", fit.points}};
  std::ofstream(run_dir / "fit.json", std::ios::trunc) << out.dump(2) << '\n';
  return fit;
}

std::vector<fs::path> emit_plots(const fs::path& run_dir) {
  const nlohmann::json manifest = read_manifest(run_dir);
  MFRESNET_REQUIRE(fs::exists(run_dir / "aggregate.csv"), "emit_plots: missing aggregates in " + run_dir.string());
  const fs::path dir = run_dir / "plots";
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name, std::ios::binary | std::ios::trunc) << body;
    written.push_back(dir / name);
  };

  struct RunTable {
    std::string label;
    Table table;
  };
  std::vector<RunTable> runs;
  for (const auto& r : manifest.at("runs")) {
    const fs::path csv = run_dir / r.at("csv").get<std::string>();
    if (!fs::exists(csv)) continue;
    runs.push_back({"n=" + std::to_string(r.at("n_train").get<int>()) + " seed=" +
                        std::to_string(r.at("seed").get<std::uint64_t>()),
                    read_csv(csv)});
  }

  auto column_series = [&](const std::string& col, std::vector<Series>& out, std::ostringstream& tsv) {
    bool any = false;
    for (const auto& rt : runs) {
      const int cs = rt.table.column("step"), cc = rt.table.column(col);
      if (cs < 0 || cc < 0) continue;
      Series s{rt.label + " " + col, {}, {}, false};
      for (const auto& row : rt.table.rows) {
        const std::string& cell = row[static_cast<std::size_t>(cc)];
        if (cell.empty()) continue;
        s.x.push_back(to_double(row[static_cast<std::size_t>(cs)]));
        s.y.push_back(to_double(cell));
        tsv << rt.label << '\t' << row[static_cast<std::size_t>(cs)] << '\t' << col << '\t' << cell << '\n';
      }
      if (!s.x.empty()) {
        any = true;
        out.push_back(std::move(s));
      }
    }
    return any;
  };

  {
    std::vector<Series> series;
    std::ostringstream tsv;
    tsv << "run\tstep\tquantity\tvalue\n";
    column_series("train_loss", series, tsv);
    write("loss_curves.tsv", tsv.str());
    write("loss_curves.svg", svg_chart("training loss", "step", "train loss", series, false, true));
  }
  {
    std::vector<Series> series;
    std::ostringstream tsv;
    tsv << "run\tstep\tquantity\tvalue\n";
    const bool a = column_series("lmin_g1", series, tsv);
    const bool b = column_series("lmin_g2", series, tsv);
    if (a || b) {
      write("lambda_min.tsv", tsv.str());
      write("lambda_min.svg", svg_chart("Gram minimum eigenvalues", "step", "lambda_min", series, false, false));
    }
  }
  {
    std::vector<Series> series;
    std::ostringstream tsv;
    tsv << "run\tstep\tquantity\tvalue\n";
    const bool a = column_series("w2_enc_sup", series, tsv);
    const bool b = column_series("w2_pred", series, tsv);
    if (a || b) {
      write("w2.tsv", tsv.str());
      write("w2.svg", svg_chart("W2 movement from initialization", "step", "W2", series, false, false));
    }
  }
  const bool test_probe = manifest.at("config").value("probes.test_error", std::string("true")) == "true";
  const auto pts = read_aggregate_points(run_dir);
  if (test_probe && pts.size() >= 3) {
    int n_test = to_int(manifest.at("config").value("data.n_test", std::string("0")));
    const RateFit fit = fit_rate(pts, n_test);
    std::ostringstream tsv;
    tsv << "n_train\tmean_test01\tlog_n\tlog_err\tfitted_log_err\n";
    Series measured{"mean test error", {}, {}, true};
    Series line{"OLS slope " + fmt_double(std::round(fit.slope * 1000) / 1000), {}, {}, false};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto [lx, ly] = fit.points[i];
      const double fitted = fit.intercept + fit.slope * lx;
      tsv << pts[i].first << '\t' << fmt_double(pts[i].second) << '\t' << fmt_double(lx) << '\t' << fmt_double(ly)
          << '\t' << fmt_double(fitted) << '\n';
      measured.x.push_back(pts[i].first);
      measured.y.push_back(std::exp(ly));
      line.x.push_back(pts[i].first);
      line.y.push_back(std::exp(fitted));
    }
    write("rate.tsv", tsv.str());
    write("rate.svg", svg_chart("test error vs training set size", "n_train", "mean test 0-1 error",
                                {measured, line}, true, true));
  }
  return written;
}

}  // namespace mfresnet
