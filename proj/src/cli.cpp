#include "mlap/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mlap/errors.hpp"
#include "mlap/estimate.hpp"
#include "mlap/free_entropy.hpp"
#include "mlap/gibbs.hpp"
#include "mlap/laplace.hpp"
#include "mlap/potentials.hpp"
#include "mlap/sde.hpp"
#include "mlap/value_function.hpp"
#include "mlap/yosida.hpp"

namespace mlap {

using nlohmann::json;

namespace {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("APP_LOG");
  if (!env) return LogLevel::Warn;
  const std::string v = env;
  if (v == "error" || v == "quiet") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug" || v == "trace") return LogLevel::Debug;
  return LogLevel::Warn;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  if (level > threshold) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[mlaplace " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

/// Rows of a CSV table, written with a fixed number format.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

json estimate_json(const ValueEstimate& e) {
  json j;
  j["value"] = e.value;
  j["stderr"] = e.std_error;
  j["samples"] = e.samples;
  j["ess"] = e.ess;
  if (!e.warnings.empty()) j["warnings"] = e.warnings;
  return j;
}

json check_json(const std::string& name, const std::string& tag, bool pass, json detail = json::object()) {
  detail["name"] = name;
  detail["tag"] = tag;
  detail["pass"] = pass;
  return detail;
}

template <class T>
T get_positive(const json& obj, const std::string& key, T fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const std::string field = path.empty() ? key : path + "." + key;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("must be a number", field);
  const double d = v.get<double>();
  if (!(d > 0.0)) throw ConfigError("must be positive", field);
  if constexpr (std::is_integral_v<T>) {
    if (d != std::floor(d)) throw ConfigError("must be an integer", field);
  }
  return static_cast<T>(d);
}

PotentialSpec load_spec(const ExperimentConfig& cfg) {
  if (cfg.potential.is_null()) throw ConfigError("missing potential spec", "potential");
  try {
    return spec_from_json(cfg.potential);
  } catch (const ConfigError& e) {
    throw ConfigError(e.message(), "potential" + (e.field().empty() ? std::string() : "." + e.field()));
  }
}

/// c and D of a single-slot Gaussian spec g = D + c sum tau(x^2), if it is one.
std::optional<std::pair<double, double>> gaussian_coefficients(const PotentialSpec& spec) {
  if (spec.slots() != 1 || spec.components.size() != 1) return std::nullopt;
  const PotentialComponent& c = spec.components[0];
  if (!(c.word.is_zero() || c.lambda == Complex{0.0, 0.0}) || c.offset < 0.0 || c.quad < 0.0) return std::nullopt;
  return std::make_pair(c.quad, c.offset + spec.offset);
}

MalaOptions mala_options(const ExperimentConfig& cfg) {
  MalaOptions mo;
  mo.samples = cfg.budgets.chain_steps;
  mo.burn_in = cfg.budgets.burn_in;
  mo.thin = cfg.budgets.thin;
  if (cfg.params.contains("step")) mo.step = cfg.params.at("step").get<double>();
  return mo;
}

struct CommandResult {
  json results = json::object();
  json checks = json::array();
  std::vector<Table> tables;
  std::vector<std::string> warnings;
};

CommandResult laplace_verify(const ExperimentConfig& cfg, RngStream& rng) {
  const PotentialSpec spec = load_spec(cfg);
  LhsOptions lo;
  lo.samples = cfg.budgets.samples;
  RhsOptions ro;
  ro.paths = cfg.budgets.paths;
  ro.inner = cfg.budgets.inner;
  ro.steps = cfg.steps;
  ro.threads = cfg.threads;
  const LaplaceReport rep = n_convergence(spec, cfg.ns, cfg.m, lo, ro, rng);
  CommandResult out;
  Table t{"laplace", {"n", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "gap", "pass", "direct_regime"}, {}};
  const auto gauss = gaussian_coefficients(spec);
  std::optional<double> oracle;
  if (gauss) oracle = gauss->second + 0.5 * cfg.m * std::log1p(2.0 * gauss->first * spec.times[0]);
  json rows = json::array();
  for (const auto& row : rep.rows) {
    json r;
    r["n"] = row.n;
    r["lhs"] = estimate_json(row.lhs);
    r["rhs"] = estimate_json(row.rhs);
    r["gap"] = row.gap;
    r["direct_regime"] = row.direct_regime;
    r["pass"] = row.pass;
    rows.push_back(r);
    t.add({std::to_string(row.n), num(row.lhs.value), num(row.lhs.std_error), num(row.rhs.value),
           num(row.rhs.std_error), num(row.gap), row.pass ? "1" : "0", row.direct_regime ? "1" : "0"});
    json d;
    d["n"] = row.n;
    d["gap"] = row.gap;
    d["combined_stderr"] = combined_stderr(row.lhs, row.rhs);
    out.checks.push_back(check_json("lhs_equals_rhs", "laplace-identity", row.pass, d));
    if (oracle) {
      json o;
      o["n"] = row.n;
      o["oracle"] = *oracle;
      o["rhs"] = row.rhs.value;
      out.checks.push_back(
          check_json("rhs_matches_gaussian_oracle", "laplace-identity", within_sigma(row.rhs, *oracle, 3.0), o));
    }
    for (const auto& w : row.lhs.warnings) out.warnings.push_back("N=" + std::to_string(row.n) + ": " + w);
  }
  out.results["rows"] = rows;
  out.results["extrapolated"] = rep.extrapolated;
  out.results["drift_detected"] = rep.drift_detected;
  if (oracle) out.results["oracle"] = *oracle;
  out.tables.push_back(std::move(t));
  return out;
}

std::vector<double> endpoint_moments(const std::vector<SlotState>& samples, int power) {
  std::vector<double> v;
  for (const auto& s : samples) {
    const HermitianTuple& x = s.back();
    double acc = 0.0;
    for (int k = 0; k < x.m(); ++k) {
      Matrix p = x[k];
      for (int i = 1; i < power; ++i) p = p * x[k];
      acc += std::real(tau(p));
    }
    v.push_back(acc);
  }
  return v;
}

CommandResult gibbs_sample(const ExperimentConfig& cfg, RngStream& rng) {
  const PotentialSpec spec = load_spec(cfg);
  CommandResult out;
  Table t{"gibbs", {"n", "acceptance", "step", "r_hat", "m2", "m2_stderr", "m4", "m4_stderr"}, {}};
  json rows = json::array();
  for (int n : cfg.ns) {
    const GibbsEnsemble ens(spec, n, cfg.m);
    RngStream sub = rng.substream(static_cast<std::uint64_t>(n));
    const ChainsResult cr = mala_chains(ens, mala_options(cfg), cfg.budgets.chains, sub, cfg.threads);
    double acc = 0.0, step = 0.0;
    for (const auto& c : cr.chains) {
      acc += c.acceptance / static_cast<double>(cr.chains.size());
      step += c.step / static_cast<double>(cr.chains.size());
      for (const auto& w : c.warnings) out.warnings.push_back("N=" + std::to_string(n) + ": " + w);
    }
    const ValueEstimate m2 = mean_estimate(endpoint_moments(cr.pooled, 2));
    const ValueEstimate m4 = mean_estimate(endpoint_moments(cr.pooled, 4));
    json r;
    r["n"] = n;
    r["acceptance"] = acc;
    r["step"] = step;
    r["r_hat"] = cr.r_hat;
    r["m2"] = estimate_json(m2);
    r["m4"] = estimate_json(m4);
    rows.push_back(r);
    t.add({std::to_string(n), num(acc), num(step), num(cr.r_hat), num(m2.value), num(m2.std_error), num(m4.value),
           num(m4.std_error)});
    json d;
    d["n"] = n;
    d["r_hat"] = cr.r_hat;
    out.checks.push_back(check_json("chains_mixed", "gibbs-law", cr.r_hat < 1.1, d));
  }
  out.results["rows"] = rows;
  out.tables.push_back(std::move(t));
  return out;
}

CommandResult sd_check(const ExperimentConfig& cfg, RngStream& rng) {
  const PotentialSpec spec = load_spec(cfg);
  std::vector<std::string> battery{"1", "X1", "X1^2", "X1^3"};
  if (cfg.params.contains("battery")) battery = cfg.params.at("battery").get<std::vector<std::string>>();
  std::vector<NCPolynomial> polys;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    try {
      polys.push_back(parse_polynomial(battery[i]));
    } catch (const ConfigError& e) {
      throw ConfigError(e.message(), "params.battery[" + std::to_string(i) + "]");
    }
  }
  const LetterRef letter{0, spec.slots() - 1};
  CommandResult out;
  Table t{"sd_residuals", {"n", "polynomial", "residual", "stderr", "z", "pass"}, {}};
  json rows = json::array();
  for (int n : cfg.ns) {
    const GibbsEnsemble ens(spec, n, cfg.m);
    RngStream sub = rng.substream(static_cast<std::uint64_t>(n));
    const ChainsResult cr = mala_chains(ens, mala_options(cfg), cfg.budgets.chains, sub, cfg.threads);
    for (std::size_t i = 0; i < polys.size(); ++i) {
      const ValueEstimate e = sd_residual(ens, cr.pooled, polys[i], letter);
      const bool pass = within_sigma(e, 0.0, 3.0, 1e-10);
      const double z = e.std_error > 0.0 ? e.value / e.std_error : 0.0;
      json r;
      r["n"] = n;
      r["polynomial"] = battery[i];
      r["residual"] = estimate_json(e);
      r["pass"] = pass;
      rows.push_back(r);
      t.add({std::to_string(n), battery[i], num(e.value), num(e.std_error), num(z), pass ? "1" : "0"});
      json d;
      d["n"] = n;
      d["polynomial"] = battery[i];
      d["z"] = z;
      out.checks.push_back(check_json("sd_residual_zero", "schwinger-dyson", pass, d));
    }
  }
  out.results["rows"] = rows;
  out.tables.push_back(std::move(t));
  return out;
}

CommandResult sde_run(const ExperimentConfig& cfg, RngStream& rng, const std::filesystem::path* table_dir) {
  const PotentialSpec spec = load_spec(cfg);
  const int n = cfg.ns.front();
  ValueOptions vo;
  vo.samples = cfg.budgets.inner;
  const ValueFunction vf(spec, {}, vo);
  const DriftField field = value_drift(vf, cfg.seed);
  const std::vector<double> grid = uniform_grid(1.0, cfg.steps, spec.times);
  RngStream path_rng = rng.substream(1);
  const ControlledPath path = euler_maruyama(field, HermitianTuple(n, cfg.m), grid, path_rng);
  CommandResult out;
  const std::vector<HermitianTuple> slots = history_at(spec.times, 2.0, path.grid, path.states);
  double control = 0.0;
  for (std::size_t i = 0; i + 1 < path.grid.size(); ++i)
    control += 0.25 * (path.grid[i + 1] - path.grid[i]) * (hs_norm2(path.drifts[i]) + hs_norm2(path.drifts[i + 1]));
  out.results["n"] = n;
  out.results["terminal_cost"] = eval_potential(spec, slots);
  out.results["control_cost"] = control;
  out.results["endpoint_m2"] = hs_norm2(slots.back());
  if (table_dir) write_path_csv(path, (*table_dir / "path.csv").string(), std::max(1, cfg.steps / 20));

  if (spec.slots() == 1 && spec.convex_mode()) {
    LangevinOptions lo;
    lo.horizon = cfg.params.value("horizon", 3.0);
    lo.dt = cfg.params.value("dt", 0.01);
    lo.record_every = 1;
    RngStream start_rng = rng.substream(2);
    const HermitianTuple x = 2.0 * sample_normalized_increment(n, cfg.m, 1.0, start_rng);
    const HermitianTuple y = -1.0 * sample_normalized_increment(n, cfg.m, 1.0, start_rng);
    RngStream noise = rng.substream(3);
    const CouplingReport cp = langevin_coupling(spec, x, y, lo, noise);
    Table t{"coupling", {"time", "distance2", "bound"}, {}};
    for (std::size_t i = 0; i < cp.times.size(); ++i)
      t.add({num(cp.times[i]), num(cp.distance2[i]), num(std::exp(-cp.times[i]) * cp.initial)});
    out.tables.push_back(std::move(t));
    out.results["coupling_worst_ratio"] = cp.worst_ratio;
    json d;
    d["worst_ratio"] = cp.worst_ratio;
    d["tolerance"] = 1.05;
    out.checks.push_back(check_json("pathwise_contraction", "exponential-contraction", cp.worst_ratio <= 1.05, d));
  }
  return out;
}

std::vector<double> default_flow_grid() {
  std::vector<double> ts{0.0};
  for (double t = 0.01; t < 60.0; t *= 1.2) ts.push_back(t);
  return ts;
}

CommandResult entropy_estimate(const ExperimentConfig& cfg, RngStream& rng) {
  const PotentialSpec spec = load_spec(cfg);
  if (cfg.m != 1) throw ConfigError("entropy-estimate supports m = 1", "m");
  const std::vector<double> ts = cfg.t_grid.empty() ? default_flow_grid() : cfg.t_grid;
  FlowOptions fo;
  fo.n = cfg.ns.front();
  fo.samples = cfg.budgets.chain_steps;
  fo.mala = mala_options(cfg);
  fo.threads = cfg.threads;
  RngStream flow_rng = rng.substream(1);
  const FlowReport flow = fisher_semicircular_flow(spec, ts, fo, flow_rng);
  const double chi_s = chi_star(flow.points, cfg.m);
  const SpectralDensity mu = equilibrium_density(spec);
  const double chi_g_star = chi_s - 0.5 * mu.moment(2) - cfg.m * chi_constant();

  CommandResult out;
  Table ft{"flow", {"t", "fisher", "fisher_stderr", "matrix", "matrix_stderr", "residual"}, {}};
  for (const auto& p : flow.points)
    ft.add({num(p.t), num(p.fisher.value), num(p.fisher.std_error), num(p.matrix.value), num(p.matrix.std_error),
            num(p.residual)});
  out.tables.push_back(std::move(ft));
  out.results["chi_star"] = chi_s;
  out.results["chi_g_from_chi_star"] = chi_g_star;
  out.results["chi_constant"] = chi_constant();
  out.results["holder_exponent"] = flow.holder_exponent;
  out.results["monotone"] = flow.monotone;
  out.checks.push_back(check_json("fisher_nonincreasing", "fisher-flow", flow.monotone,
                                  json{{"worst_increase", flow.worst_increase}}));
  out.checks.push_back(check_json("fisher_holder_half", "fisher-flow", flow.holder_exponent >= 0.45,
                                  json{{"exponent", flow.holder_exponent}, {"minimum", 0.45}}));

  const bool nonnegative_quad = std::all_of(spec.components.begin(), spec.components.end(),
                                            [](const PotentialComponent& c) { return c.quad >= 0.0; });
  if (nonnegative_quad) {
    Table et{"entropy", {"n", "chi_g", "chi_g_stderr", "chi", "chi_star", "relative_error"}, {}};
    json rows = json::array();
    ChiBudget b;
    b.paths = cfg.budgets.paths;
    b.inner = cfg.budgets.inner;
    b.steps = cfg.steps;
    b.threads = cfg.threads;
    double last_rel = 0.0;
    for (int n : cfg.ns) {
      RngStream sub = rng.substream(100 + static_cast<std::uint64_t>(n));
      const ChiControlResult r = chi_microstates_control(spec, n, cfg.m, b, sub);
      const double chi = chi_from_chi_g(r.chi_g.value, r.second_moment.value, cfg.m);
      last_rel = std::abs(r.chi_g.value - chi_g_star) / std::max(1e-12, std::abs(chi_g_star));
      json row;
      row["n"] = n;
      row["chi_g"] = estimate_json(r.chi_g);
      row["chi"] = chi;
      row["relative_error"] = last_rel;
      rows.push_back(row);
      et.add({std::to_string(n), num(r.chi_g.value), num(r.chi_g.std_error), num(chi), num(chi_s), num(last_rel)});
    }
    out.results["rows"] = rows;
    out.tables.push_back(std::move(et));
    const double tol = cfg.params.value("relative_tolerance", 0.05);
    out.checks.push_back(check_json("chi_equals_chi_star", "free-entropy", last_rel <= tol,
                                    json{{"relative_error", last_rel}, {"tolerance", tol}, {"n", cfg.ns.back()}}));
  } else {
    out.warnings.push_back("potential is not convex; the control-cost entropy route is skipped");
  }
  return out;
}

CommandResult yosida_test(const ExperimentConfig& cfg, RngStream& rng) {
  const int pairs = cfg.params.value("pairs", 1000);
  const int dim = cfg.params.value("dim", 4);
  const double lambda = cfg.params.value("lambda", 0.5);
  if (pairs < 1) throw ConfigError("must be positive", "params.pairs");
  if (dim < 1) throw ConfigError("must be positive", "params.dim");
  if (!(lambda > 0.0)) throw ConfigError("must be positive", "params.lambda");
  const YosidaSuiteReport r = yosida_suite(pairs, dim, lambda, rng);
  CommandResult out;
  struct Row {
    const char* name;
    double value;
    double bound;
  };
  const Row rows[] = {
      {"soft_threshold", r.soft_threshold_error, 1e-6},
      {"huber", r.huber_error, 1e-6},
      {"half_square", r.half_square_error, 1e-6},
      {"prox_contraction", r.worst_contraction, 1.0 + 1e-6},
      {"yosida_lipschitz", r.worst_lipschitz, 1.0 + 1e-6},
      {"envelope_monotone", r.worst_envelope_increase, 1e-9},
  };
  Table t{"yosida", {"check", "value", "bound", "pass"}, {}};
  for (const Row& row : rows) {
    const bool pass = row.value <= row.bound;
    t.add({row.name, num(row.value), num(row.bound), pass ? "1" : "0"});
    out.checks.push_back(check_json(row.name, "moreau-yosida", pass, json{{"value", row.value}, {"bound", row.bound}}));
    out.results[row.name] = row.value;
  }
  out.results["pairs"] = pairs;
  out.tables.push_back(std::move(t));
  return out;
}

void write_table(const Table& t, const std::filesystem::path& dir) {
  std::ofstream f(dir / (t.name + ".csv"));
  if (!f) throw ConfigError("cannot write table " + t.name, "output");
  for (std::size_t i = 0; i < t.header.size(); ++i) f << (i ? "," : "") << t.header[i];
  f << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << '\n';
  }
}

}  // namespace

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds{"laplace-verify", "gibbs-sample",     "sd-check",
                                             "sde-run",        "entropy-estimate", "yosida-test"};
  return cmds;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", "$");
  ExperimentConfig cfg;
  if (!doc.contains("command") || !doc.at("command").is_string()) throw ConfigError("missing command", "command");
  cfg.command = doc.at("command").get<std::string>();
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), cfg.command) == cmds.end())
    throw ConfigError("unknown command '" + cfg.command + "'", "command");
  if (!doc.contains("seed")) throw ConfigError("seed is mandatory", "seed");
  const json& seed = doc.at("seed");
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) throw ConfigError("seed must be a nonnegative integer", "seed");
  cfg.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("potential")) cfg.potential = doc.at("potential");
  if (cfg.command != "yosida-test") {
    if (cfg.potential.is_null()) throw ConfigError("missing potential spec", "potential");
    ExperimentConfig probe;
    probe.potential = cfg.potential;
    (void)load_spec(probe);
  }
  if (doc.contains("N")) {
    const json& ns = doc.at("N");
    if (!ns.is_array() || ns.empty()) throw ConfigError("must be a nonempty array", "N");
    cfg.ns.clear();
    for (std::size_t i = 0; i < ns.size(); ++i) {
      if (!ns[i].is_number_integer() || ns[i].get<long long>() < 1)
        throw ConfigError("must be a positive integer", "N[" + std::to_string(i) + "]");
      cfg.ns.push_back(ns[i].get<int>());
      if (i > 0 && cfg.ns[i] <= cfg.ns[i - 1]) throw ConfigError("must be increasing", "N");
    }
  }
  cfg.m = get_positive<int>(doc, "m", 1, "");
  if (doc.contains("budgets")) {
    const json& b = doc.at("budgets");
    if (!b.is_object()) throw ConfigError("must be an object", "budgets");
    cfg.budgets.paths = get_positive<std::size_t>(b, "paths", cfg.budgets.paths, "budgets");
    cfg.budgets.inner = get_positive<std::size_t>(b, "inner", cfg.budgets.inner, "budgets");
    cfg.budgets.samples = get_positive<std::size_t>(b, "samples", cfg.budgets.samples, "budgets");
    cfg.budgets.chain_steps = get_positive<int>(b, "chain_steps", cfg.budgets.chain_steps, "budgets");
    cfg.budgets.burn_in = get_positive<int>(b, "burn_in", cfg.budgets.burn_in, "budgets");
    cfg.budgets.thin = get_positive<int>(b, "thin", cfg.budgets.thin, "budgets");
    cfg.budgets.chains = get_positive<int>(b, "chains", cfg.budgets.chains, "budgets");
  }
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    if (!g.is_object()) throw ConfigError("must be an object", "grid");
    cfg.steps = get_positive<int>(g, "steps", cfg.steps, "grid");
    if (g.contains("t")) {
      if (!g.at("t").is_array()) throw ConfigError("must be an array", "grid.t");
      for (const auto& v : g.at("t")) {
        if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError("must be nonnegative numbers", "grid.t");
        cfg.t_grid.push_back(v.get<double>());
      }
    }
  }
  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) throw ConfigError("must be a string", "output");
    cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("threads")) {
    if (!doc.at("threads").is_number_integer()) throw ConfigError("must be an integer", "threads");
    cfg.threads = doc.at("threads").get<int>();
  }
  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) throw ConfigError("must be an object", "params");
    cfg.params = doc.at("params");
  }
  for (const auto& [key, _] : doc.items()) {
    static const std::vector<std::string> allowed{"command", "seed",   "potential", "N",      "m",
                                                  "budgets", "grid",   "output",    "threads", "params"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown field", key);
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["seed"] = cfg.seed;
  if (!cfg.potential.is_null()) j["potential"] = cfg.potential;
  j["N"] = cfg.ns;
  j["m"] = cfg.m;
  j["budgets"] = {{"paths", cfg.budgets.paths},         {"inner", cfg.budgets.inner},
                  {"samples", cfg.budgets.samples},     {"chain_steps", cfg.budgets.chain_steps},
                  {"burn_in", cfg.budgets.burn_in},     {"thin", cfg.budgets.thin},
                  {"chains", cfg.budgets.chains}};
  j["grid"] = {{"steps", cfg.steps}};
  if (!cfg.t_grid.empty()) j["grid"]["t"] = cfg.t_grid;
  j["output"] = cfg.output;
  j["threads"] = cfg.threads;
  j["params"] = cfg.params;
  return j;
}

RunOutcome run(const ExperimentConfig& cfg, bool write_files) {
  log(LogLevel::Info, "running " + cfg.command + " with seed " + std::to_string(cfg.seed));
  if (cfg.threads > 0) set_default_threads(cfg.threads);
  std::filesystem::path dir = cfg.output;
  std::filesystem::path tables = dir / "tables";
  if (write_files) std::filesystem::create_directories(tables);
  RngStream rng(cfg.seed, 0);
  CommandResult res;
  if (cfg.command == "laplace-verify") {
    res = laplace_verify(cfg, rng);
  } else if (cfg.command == "gibbs-sample") {
    res = gibbs_sample(cfg, rng);
  } else if (cfg.command == "sd-check") {
    res = sd_check(cfg, rng);
  } else if (cfg.command == "sde-run") {
    res = sde_run(cfg, rng, write_files ? &tables : nullptr);
  } else if (cfg.command == "entropy-estimate") {
    res = entropy_estimate(cfg, rng);
  } else if (cfg.command == "yosida-test") {
    res = yosida_test(cfg, rng);
  } else {
    throw ConfigError("unknown command '" + cfg.command + "'", "command");
  }
  bool pass = true;
  for (const auto& c : res.checks) pass = pass && c.at("pass").get<bool>();
  for (const auto& w : res.warnings) log(LogLevel::Warn, w);
  RunOutcome out;
  out.exit_code = pass ? 0 : 1;
  out.report["command"] = cfg.command;
  out.report["seed"] = cfg.seed;
  out.report["pass"] = pass;
  out.report["checks"] = res.checks;
  out.report["results"] = res.results;
  out.report["warnings"] = res.warnings;
  if (write_files) {
    for (const auto& t : res.tables) write_table(t, tables);
    std::ofstream(dir / "report.json") << out.report.dump(2) << '\n';
    std::ofstream(dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
  }
  log(LogLevel::Info, std::string("finished: ") + (pass ? "pass" : "fail"));
  return out;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Matrix Laplace principle experiments"};
  std::string command, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("command", command, "laplace-verify | gibbs-sample | sd-check | sde-run | entropy-estimate | yosida-test")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--seed", seed, "Seed override");
  app.add_option("--out", out_dir, "Output directory override");
  app.add_option("--threads", threads, "Worker threads");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open " + config_path, "config");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what(), "config");
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object", "$");
    if (doc.contains("command") && doc.at("command") != command)
      throw ConfigError("config command '" + doc.at("command").dump() + "' differs from '" + command + "'", "command");
    doc["command"] = command;
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["output"] = out_dir;
    if (threads) doc["threads"] = *threads;
    const ExperimentConfig cfg = parse_config(doc);
    const RunOutcome r = run(cfg);
    std::cout << (r.exit_code == 0 ? "PASS " : "FAIL ") << cfg.command << " -> "
              << (std::filesystem::path(cfg.output) / "report.json").string() << '\n';
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mlap
