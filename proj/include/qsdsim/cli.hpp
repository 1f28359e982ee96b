#pragma once

// Experiment configuration and subcommand drivers behind the qsdsim tool.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qsdsim/coupling.hpp"
#include "qsdsim/oracle.hpp"
#include "qsdsim/qsd.hpp"
#include "qsdsim/stats.hpp"
#include "qsdsim/validation.hpp"

#ifndef QSDSIM_VERSION
#define QSDSIM_VERSION "0.0.0-dev"
#endif

namespace qsdsim::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_check_failed = 2;
inline constexpr int exit_runtime = 3;

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "model.kind",     "model.lambda",     "model.b",          "model.rho",
      "model.d",        "model.c",          "kernel.family",    "kernel.scale",
      "run.seed",       "run.replicas",     "run.horizon",      "run.grid",
      "run.particles",  "run.burn_in",      "run.snapshot_interval",
      "run.truncation", "run.tolerance",    "run.max_iters",    "run.tv_threshold",
      "run.initial",    "run.engine",       "run.threads",      "output.directory",
      "output.formats"};
  return keys;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  while (true) {
    auto pos = s.find(sep);
    out.emplace_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace detail

/// Flat key/value experiment record. Keys are "section.name"; only the keys
/// in known_keys() are accepted.
class ExperimentConfig {
 public:
  /// Parses the INI-like text format:
  ///   # comment
  ///   [model]
  ///   kind = uniform
  ///   lambda = 2
  /// Dotted keys may also appear outside any section.
  static ExperimentConfig parse(std::string_view text) {
    ExperimentConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    for (const std::string& raw : detail::split(text, '\n')) {
      ++line_no;
      std::string_view line = raw;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::string where = " (line " + std::to_string(line_no) + ")";
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header" + where);
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        if (section.empty()) throw ConfigError("empty section name" + where);
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'" + where);
      std::string key(detail::trim(line.substr(0, eq)));
      std::string value(detail::trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError("missing key" + where);
      if (!section.empty()) key = section + "." + key;
      if (cfg.values_.count(key)) throw ConfigError(key + ": given twice" + where);
      cfg.set(key, value);
    }
    return cfg;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, std::string value) {
    if (!known_keys().count(key)) throw ConfigError(key + ": unknown key");
    if (value.empty()) throw ConfigError(key + ": empty value");
    values_[key] = std::move(value);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string string_or(const std::string& key, std::string fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key + ": required but missing");
    return it->second;
  }

  double number(const std::string& key) const { return to_double(key, require(key)); }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t integer_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = values_.at(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    return v;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& part : detail::split(require(key), ',')) out.push_back(to_double(key, part));
    return out;
  }

  /// Canonical text: sorted "key=value" lines. Keys that cannot change
  /// results (output location, thread count) are left out.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_)
      if (k.rfind("output.", 0) != 0 && k != "run.threads") out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return detail::hex64(hash_name(canonical())); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

/// Everything a subcommand needs, validated up front.
struct Experiment {
  RateModel model{UniformRates{2.0, 1.0, 0.3}};
  std::string config_hash;
  std::uint64_t seed = 1;
  std::size_t replicas = 10000;
  double horizon = 1.0;
  std::vector<double> grid;
  std::size_t particles = 2000;
  double burn_in = 20.0;
  double snapshot_interval = 1.0;
  std::size_t truncation = 60;
  double tolerance = 1e-10;
  std::size_t max_iters = 1000000;
  double tv_threshold = 0.05;
  Configuration initial = Configuration::singleton(TraitPoint(0.5));
  Engine engine = Engine::gillespie;
  Parallelism par;
  std::filesystem::path out_dir = "out";
  bool csv = true;
  bool json = true;
};

inline RateModel build_model(const ExperimentConfig& cfg) {
  auto positive = [&](const std::string& key) {
    double v = cfg.number(key);
    if (!(v > 0.0)) throw ConfigError(key + ": must be positive");
    return v;
  };
  auto fraction = [&](const std::string& key) {
    double v = cfg.number(key);
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(key + ": must lie in (0, 1)");
    return v;
  };
  auto unused = [&](const std::string& key, const std::string& why) {
    if (cfg.has(key)) throw ConfigError(key + ": not used " + why);
  };

  MutationKernel kernel = MutationKernel::uniform();
  const std::string family = cfg.string_or("kernel.family", "uniform");
  if (family == "truncated_gaussian") {
    kernel = MutationKernel::truncated_gaussian(positive("kernel.scale"));
  } else if (family == "uniform") {
    unused("kernel.scale", "by the uniform kernel");
  } else {
    throw ConfigError("kernel.family: expected truncated_gaussian or uniform, got '" + family + "'");
  }

  const std::string kind = cfg.require("model.kind");
  if (kind == "uniform") {
    unused("model.d", "by kind uniform");
    unused("model.c", "by kind uniform");
    return RateModel(UniformRates{positive("model.lambda"), positive("model.b"), fraction("model.rho")},
                     kernel);
  }
  if (kind == "logistic") {
    unused("model.lambda", "by kind logistic");
    return RateModel(LogisticRates{positive("model.b"), fraction("model.rho"), positive("model.d"),
                                   positive("model.c")},
                     kernel);
  }
  throw ConfigError("model.kind: expected uniform or logistic, got '" + kind + "'");
}

inline Experiment prepare(const ExperimentConfig& cfg) {
  Experiment e;
  e.model = build_model(cfg);
  e.config_hash = cfg.hash();
  e.seed = cfg.integer_or("run.seed", 1);
  auto at_least_one = [&](const std::string& key, std::uint64_t fallback) {
    std::uint64_t v = cfg.integer_or(key, fallback);
    if (v < 1) throw ConfigError(key + ": must be >= 1");
    return static_cast<std::size_t>(v);
  };
  e.replicas = at_least_one("run.replicas", 10000);
  e.particles = at_least_one("run.particles", 2000);
  if (e.particles < 2) throw ConfigError("run.particles: must be >= 2");
  e.truncation = at_least_one("run.truncation", 60);
  if (e.truncation < 2) throw ConfigError("run.truncation: must be >= 2");
  e.max_iters = at_least_one("run.max_iters", 1000000);
  e.par.threads = static_cast<unsigned>(at_least_one("run.threads", 1));

  e.horizon = cfg.number_or("run.horizon", 1.0);
  if (!(e.horizon > 0.0)) throw ConfigError("run.horizon: must be positive");
  e.burn_in = cfg.number_or("run.burn_in", 20.0);
  if (e.burn_in < 0.0) throw ConfigError("run.burn_in: must be >= 0");
  e.snapshot_interval = cfg.number_or("run.snapshot_interval", 1.0);
  if (!(e.snapshot_interval > 0.0)) throw ConfigError("run.snapshot_interval: must be positive");
  e.tolerance = cfg.number_or("run.tolerance", 1e-10);
  if (!(e.tolerance > 0.0)) throw ConfigError("run.tolerance: must be positive");
  e.tv_threshold = cfg.number_or("run.tv_threshold", 0.05);
  if (e.tv_threshold < 0.0) throw ConfigError("run.tv_threshold: must be >= 0");

  if (cfg.has("run.grid")) {
    e.grid = cfg.numbers("run.grid");
    for (std::size_t i = 0; i < e.grid.size(); ++i)
      if (e.grid[i] < 0.0 || (i > 0 && !(e.grid[i] > e.grid[i - 1])))
        throw ConfigError("run.grid: must be non-negative and strictly increasing");
    if (e.grid.back() > e.horizon) throw ConfigError("run.grid: exceeds run.horizon");
  } else {
    for (int i = 1; i <= 10; ++i) e.grid.push_back(e.horizon * i / 10.0);
  }

  if (cfg.has("run.initial")) {
    try {
      e.initial = Configuration::parse(cfg.require("run.initial"));
    } catch (const ParseError& err) {
      throw ConfigError(std::string("run.initial: ") + err.what());
    }
  }

  const std::string engine = cfg.string_or("run.engine", "gillespie");
  if (engine == "thinning")
    e.engine = Engine::thinning;
  else if (engine != "gillespie")
    throw ConfigError("run.engine: expected gillespie or thinning, got '" + engine + "'");

  e.out_dir = cfg.string_or("output.directory", "out");
  e.csv = e.json = false;
  for (const std::string& f : detail::split(cfg.string_or("output.formats", "csv,json"), ',')) {
    if (f == "csv")
      e.csv = true;
    else if (f == "json")
      e.json = true;
    else
      throw ConfigError("output.formats: unknown format '" + f + "'");
  }
  return e;
}

namespace detail {

using nlohmann::json;

inline json meta(const Experiment& e) {
  return {{"config_hash", e.config_hash}, {"seed", e.seed}, {"version", QSDSIM_VERSION}};
}

inline json model_json(const RateModel& m) {
  json j;
  j["kind"] = m.name();
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, UniformRates>) {
          j["lambda"] = k.lambda;
          j["b"] = k.b;
          j["rho"] = k.rho;
        } else {
          j["b"] = k.b;
          j["rho"] = k.rho;
          j["d"] = k.d;
          j["c"] = k.c;
        }
      },
      m.kind());
  j["kernel"] = m.kernel().name();
  if (auto* tg = std::get_if<TruncatedGaussian>(&m.kernel().family())) j["kernel_scale"] = tg->scale;
  return j;
}

inline std::string csv_header(const Experiment& e) {
  return "# config_hash=" + e.config_hash + " seed=" + std::to_string(e.seed) +
         " version=" + QSDSIM_VERSION + "\n";
}

class Writer {
 public:
  explicit Writer(const Experiment& e) : e_(e) {
    std::error_code ec;
    std::filesystem::create_directories(e.out_dir, ec);
    if (ec || !std::filesystem::is_directory(e.out_dir))
      throw ConfigError("output.directory: cannot create " + e.out_dir.string());
  }

  void json_file(const std::string& name, const json& j) const {
    if (!e_.json) return;
    write(name, j.dump(2) + "\n");
  }

  void csv_file(const std::string& name, const std::string& body) const {
    if (!e_.csv) return;
    write(name, csv_header(e_) + body);
  }

 private:
  void write(const std::string& name, const std::string& content) const {
    auto path = e_.out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("output.directory: cannot write " + path.string());
    out << content;
    if (!out) throw ConfigError("output.directory: write failed for " + path.string());
  }

  const Experiment& e_;
};

inline json stopping_json(const StoppingTime& s) {
  if (!s.reached()) return nullptr;
  return s.value();
}

inline json estimate_json(const Experiment& e, const QsdEstimate& est, const std::string& method) {
  json j;
  j["meta"] = meta(e);
  j["model"] = model_json(e.model);
  j["method"] = method;
  j["mass_marginal"] = est.mass_marginal;
  j["support_marginal"] = est.support_marginal;
  j["ess"] = est.diagnostics.effective_sample_size;
  j["burn_in"] = est.diagnostics.burn_in;
  j["particles"] = est.diagnostics.particles;
  j["replicas"] = est.diagnostics.replicas;
  j["survivors"] = est.diagnostics.survivors;
  j["horizon"] = est.diagnostics.horizon;
  j["mean_mass"] = est.mean_mass();
  try {
    j["theta"] = decay_rate_from_singletons(e.model, est);
  } catch (const NoSingletonMass&) {
    j["theta"] = nullptr;
  }
  return j;
}

inline std::string sample_csv(const QsdEstimate& est) {
  std::string out = "configuration,weight\n";
  for (std::size_t i = 0; i < est.sample.size(); ++i)
    out += est.sample.configs()[i].serialize() + "," +
           qsdsim::detail::format_double(est.sample.weights()[i]) + "\n";
  return out;
}

/// Short label text for report params.
inline std::string label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline Configuration random_configuration(RandomStream& rng) {
  std::vector<Entry> es;
  std::size_t n = 1 + rng.index(6);
  for (std::size_t i = 0; i < n; ++i)
    es.push_back({sample_base(rng), static_cast<std::uint32_t>(1 + rng.index(4))});
  return Configuration::from_entries(std::move(es));
}

}  // namespace detail

inline int run_simulate(const Experiment& e, std::ostream& log) {
  RandomStream rng(e.seed);
  Trajectory tr = e.engine == Engine::thinning
                      ? simulate_thinning(e.model, e.initial, e.horizon, rng)
                      : simulate_gillespie(e.model, e.initial, e.horizon, rng);
  detail::Writer w(e);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  w.csv_file("trajectory.csv", csv.str());
  nlohmann::json j;
  j["meta"] = detail::meta(e);
  j["model"] = detail::model_json(e.model);
  j["initial"] = tr.initial.serialize();
  j["horizon"] = tr.horizon;
  j["events"] = tr.events.size();
  j["final_state"] = tr.final_state.serialize();
  j["extinction_time"] = detail::stopping_json(tr.extinction_time);
  j["first_mutation_time"] = detail::stopping_json(tr.first_mutation_time);
  j["initial_traits_lost_time"] = detail::stopping_json(tr.initial_traits_lost_time);
  j["max_mass"] = tr.max_mass;
  w.json_file("trajectory.json", j);
  log << "events " << tr.events.size() << ", final mass " << tr.final_state.mass() << "\n";
  return exit_ok;
}

inline int run_survival(const Experiment& e, std::ostream& log) {
  RandomStream rng(e.seed);
  auto pts = survival_curve(e.model, e.initial, e.grid, e.replicas, rng, e.par, e.engine);
  std::vector<double> t, s, se;
  std::string csv = "t,survival,stderr\n";
  for (const auto& p : pts) {
    t.push_back(p.t);
    s.push_back(p.survival);
    se.push_back(p.stderr_);
    csv += qsdsim::detail::format_double(p.t) + "," + qsdsim::detail::format_double(p.survival) +
           "," + qsdsim::detail::format_double(p.stderr_) + "\n";
  }
  nlohmann::json j;
  j["meta"] = detail::meta(e);
  j["model"] = detail::model_json(e.model);
  j["seed"] = e.seed;
  j["replicas"] = e.replicas;
  j["grid"] = t;
  j["survival"] = s;
  j["stderr"] = se;
  try {
    auto d = decay_rate_from_survival(pts);
    j["theta"] = d.theta;
    j["theta_stderr"] = d.stderr_;
    log << "theta " << d.theta << " +- " << d.stderr_ << "\n";
  } catch (const qsdsim::error& err) {
    j["theta"] = nullptr;
    log << "no decay-rate fit: " << err.what() << "\n";
  }
  detail::Writer w(e);
  w.json_file("survival.json", j);
  w.csv_file("survival.csv", csv);
  return exit_ok;
}

inline int run_qsd_yaglom(const Experiment& e, std::ostream& log) {
  RandomStream rng(e.seed);
  auto est = yaglom_estimate(e.model, e.initial, e.horizon, e.replicas, rng, e.par);
  detail::Writer w(e);
  w.json_file("qsd_yaglom.json", detail::estimate_json(e, est, "yaglom"));
  w.csv_file("qsd_yaglom_sample.csv", detail::sample_csv(est));
  log << "survivors " << est.diagnostics.survivors << " of " << e.replicas << ", mean mass "
      << est.mean_mass() << "\n";
  return exit_ok;
}

inline int run_qsd_fv(const Experiment& e, std::ostream& log) {
  if (!(e.burn_in < e.horizon)) throw ConfigError("run.burn_in: must be below run.horizon");
  RandomStream rng(e.seed);
  auto est = fleming_viot_estimate(e.model, e.particles, e.burn_in, e.horizon, rng,
                                   FlemingViotOptions{e.snapshot_interval});
  detail::Writer w(e);
  w.json_file("qsd_fv.json", detail::estimate_json(e, est, "fleming_viot"));
  w.csv_file("qsd_fv_sample.csv", detail::sample_csv(est));
  log << "snapshots " << est.sample.size() << ", mean mass " << est.mean_mass() << "\n";
  return exit_ok;
}

inline int run_oracle(const Experiment& e, std::ostream& log) {
  auto chain = build_mass_chain(e.model, e.truncation);
  auto pair = principal_left_eigenpair(chain, e.tolerance, e.max_iters);
  nlohmann::json j;
  j["meta"] = detail::meta(e);
  j["model"] = detail::model_json(e.model);
  j["N"] = e.truncation;
  j["theta"] = pair.theta;
  j["nu"] = pair.nu;
  j["residual"] = pair.residual;
  j["iters"] = pair.iterations;
  j["mean_extinction_time_from_1"] = mean_extinction_time(chain, 1);
  std::string csv = "k,nu\n";
  for (std::size_t k = 0; k < pair.nu.size(); ++k)
    csv += std::to_string(k + 1) + "," + qsdsim::detail::format_double(pair.nu[k]) + "\n";
  detail::Writer w(e);
  w.json_file("oracle.json", j);
  w.csv_file("oracle.csv", csv);
  log << "theta " << pair.theta << " after " << pair.iterations << " iterations\n";
  return exit_ok;
}

/// Runs the validation checks that apply to the configured model.
inline std::vector<CheckResult> validation_checks(const Experiment& e) {
  const RateModel& m = e.model;
  const std::string model = m.name();
  const std::string reps = "replicas=" + std::to_string(e.replicas);
  std::vector<CheckResult> out;
  auto add = [&](std::string check, std::string params, double stat, double threshold) {
    out.push_back({std::move(check), model, std::move(params), stat, threshold, stat <= threshold});
  };
  RandomStream rng(e.seed);

  {
    RandomStream r = RandomStream::substream(e.seed, hash_name("generator"), 0);
    double worst = 0.0;
    std::size_t outside = 0, above = 0;
    const double a = 0.2;
    const double slope = m.birth_bound() * std::expm1(a) + m.death_floor() * std::expm1(-a);
    for (int i = 0; i < 1000; ++i) {
      Configuration c = detail::random_configuration(r);
      const double n = static_cast<double>(c.mass());
      if (m.is_uniform()) {
        const auto& u = std::get<UniformRates>(m.kind());
        double want = -(u.lambda - u.b) * n;
        worst = std::max(worst, std::abs(generator_apply(m, TestFunction::mass(), c) - want) /
                                    std::max(1.0, std::abs(want)));
      }
      double v = generator_apply(m, TestFunction::bounded_custom({0.0, 1.0}), c);
      if (v > 0.0 || v < -m.singleton_death_sup()) ++outside;
      auto f = TestFunction::exp_mass(a);
      double bound = slope * n * f(c);
      if (generator_apply(m, f, c) > bound + 1e-12 * std::abs(bound)) ++above;
    }
    if (m.is_uniform()) add("generator_mass_eigenfunction", "configurations=1000", worst, 1e-12);
    add("nonextinction_indicator_bounds", "configurations=1000", static_cast<double>(outside), 0.0);
    add("exp_mass_generator_bound", "configurations=1000 a=0.2", static_cast<double>(above), 0.0);
  }

  for (double t : {0.5, 1.0}) {
    const std::string p = "t=" + detail::label(t) + " " + reps;
    auto r1 = martingale_residual(m, TestFunction::mass(), e.initial, t, e.replicas, rng, e.par);
    add("martingale_mass", p, std::abs(r1.residual) / std::max(r1.stderr_, 1e-300), 3.0);
    auto r2 = martingale_residual(m, TestFunction::indicator(1), e.initial, t, e.replicas, rng, e.par);
    add("martingale_indicator_1", p, std::abs(r2.residual) / std::max(r2.stderr_, 1e-300), 3.0);
  }

  {
    const std::size_t bins = 15;
    auto g = mass_histogram(m, e.initial, 1.0, e.replicas, bins, rng, Engine::gillespie, e.par);
    auto th = mass_histogram(m, e.initial, 1.0, e.replicas, bins, rng, Engine::thinning, e.par);
    auto chi = stats::two_sample_chi_square(g, th);
    add("engine_chi_square", "t=1 " + reps + " dof=" + std::to_string(chi.dof), chi.statistic,
        stats::chi_square_quantile(chi.dof, 0.999));
  }

  {
    std::uint64_t violations = 0;
    const CoupledState start{e.initial, e.initial.mass()};
    for (std::size_t p = 0; p < e.replicas; ++p) {
      RandomStream r = RandomStream::substream(e.seed, hash_name("domination"), p);
      violations += simulate_coupled(m, start, 2.0, r).violations;
    }
    add("domination_violations", "horizon=2 paths=" + std::to_string(e.replicas),
        static_cast<double>(violations), 0.0);
  }

  if (m.death_floor() > m.birth_bound()) {
    const double upper = std::log(m.death_floor() / m.birth_bound());
    const double a0 = std::min(0.3, 0.5 * upper);
    double gap = std::abs(ode_value_at(m.death_floor(), m.birth_bound(), a0, 50.0) - upper);
    add("ode_limit", "t=50 a0=" + detail::label(a0), gap, 1e-6);
    const double grid[] = {0.5, 1.0, 2.0};
    auto pts = lyapunov_check(m, e.initial, a0, grid, e.replicas, rng, e.par);
    double violated = 0;
    for (const auto& pt : pts) violated += pt.violated;
    add("lyapunov_violations", "grid=0.5,1,2 a0=" + detail::label(a0) + " " + reps,
        violated, 0.0);
  }

  {
    auto pair = principal_left_eigenpair(build_mass_chain(m, e.truncation), e.tolerance, e.max_iters);
    add("oracle_residual", "N=" + std::to_string(e.truncation), pair.residual, e.tolerance);
  }
  return out;
}

inline int run_validate(const Experiment& e, std::ostream& log) {
  auto checks = validation_checks(e);
  nlohmann::json list = nlohmann::json::array();
  std::string csv = "check,model,params,statistic,threshold,pass\n";
  bool all = true;
  for (const auto& c : checks) {
    list.push_back({{"check", c.check},
                    {"model", c.model},
                    {"params", c.params},
                    {"statistic", c.statistic},
                    {"threshold", c.threshold},
                    {"pass", c.pass}});
    csv += c.check + "," + c.model + "," + c.params + "," +
           qsdsim::detail::format_double(c.statistic) + "," +
           qsdsim::detail::format_double(c.threshold) + "," + (c.pass ? "true" : "false") + "\n";
    log << (c.pass ? "pass " : "FAIL ") << c.check << " (" << c.params << "): " << c.statistic
        << " vs " << c.threshold << "\n";
    all = all && c.pass;
  }
  detail::Writer w(e);
  w.json_file("validation.json", {{"meta", detail::meta(e)}, {"checks", list}});
  w.csv_file("validation.csv", csv);
  return all ? exit_ok : exit_check_failed;
}

struct Comparison {
  double tv = 0.0;
  std::optional<double> theta_a, theta_b;
};

/// Mass marginal of a q.s.d. estimate or oracle report.
inline std::vector<double> mass_law_of(const nlohmann::json& j, const std::string& name) {
  if (j.contains("mass_marginal")) return j.at("mass_marginal").get<std::vector<double>>();
  if (j.contains("nu")) return j.at("nu").get<std::vector<double>>();
  throw ConfigError(name + ": has neither mass_marginal nor nu");
}

inline Comparison compare_reports(const nlohmann::json& a, const nlohmann::json& b) {
  Comparison c;
  c.tv = tv_distance(mass_law_of(a, "first input"), mass_law_of(b, "second input"));
  if (a.contains("theta") && a["theta"].is_number()) c.theta_a = a["theta"].get<double>();
  if (b.contains("theta") && b["theta"].is_number()) c.theta_b = b["theta"].get<double>();
  return c;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError(p.string() + ": " + err.what());
  }
}

inline int run_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                       double tv_threshold, std::ostream& log) {
  Comparison c = compare_reports(read_json(a), read_json(b));
  log << "tv " << qsdsim::detail::format_double(c.tv) << " threshold " << detail::label(tv_threshold)
      << "\n";
  auto show = [](const std::optional<double>& v) {
    return v ? qsdsim::detail::format_double(*v) : std::string("none");
  };
  log << "theta " << show(c.theta_a) << " " << show(c.theta_b);
  if (c.theta_a && c.theta_b)
    log << " delta " << qsdsim::detail::format_double(*c.theta_a - *c.theta_b);
  log << "\n";
  return c.tv > tv_threshold ? exit_check_failed : exit_ok;
}

inline int run_subcommand(const std::string& name, const Experiment& e, std::ostream& log) {
  if (name == "simulate") return run_simulate(e, log);
  if (name == "survival") return run_survival(e, log);
  if (name == "qsd-yaglom") return run_qsd_yaglom(e, log);
  if (name == "qsd-fv") return run_qsd_fv(e, log);
  if (name == "oracle") return run_oracle(e, log);
  if (name == "validate") return run_validate(e, log);
  throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace qsdsim::cli
