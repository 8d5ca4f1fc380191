#pragma once

// Command-line front end.  run_cli() parses argv with CLI11 and dispatches to
// the cmd_* functions, which are usable directly from code and tests.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "crncouple/couplings.hpp"
#include "crncouple/estimators.hpp"
#include "crncouple/model.hpp"
#include "crncouple/oracle.hpp"

namespace crncouple::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Bad arguments or an invalid network (exit 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Network load_network(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_network(text);
  } catch (const ParseError& e) {
    throw UsageError(path + ":\n" + e.what());
  }
}

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& s, const std::string& what) {
  const auto v = crncouple::detail::parse_real(s);
  if (!v) throw UsageError("invalid number '" + s + "' for " + what);
  return *v;
}

// "P" (one species) or "M:1,P:2" (weighted sum).
inline Observable parse_observable(const Network& net, const std::string& spec) {
  if (spec.empty()) return Observable::species(net.dim(), net.dim() - 1);
  std::vector<double> w(net.dim(), 0.0);
  for (const auto& term : split_list(spec)) {
    const auto colon = term.find(':');
    const std::string name = term.substr(0, colon);
    const auto idx = net.species_index(name);
    if (!idx) throw UsageError("observable names unknown species '" + name + "'");
    w[*idx] += colon == std::string::npos ? 1.0 : parse_number(term.substr(colon + 1), "observable weight");
  }
  return Observable::linear(std::move(w));
}

// "CH=VALUE" rate overrides.
inline Network with_rates(Network net, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("rate override must look like CHANNEL=VALUE: '" + o + "'");
    const auto k = net.channel_index(o.substr(0, eq));
    if (!k) throw UsageError("unknown reaction id '" + o.substr(0, eq) + "'");
    const double v = parse_number(o.substr(eq + 1), "rate override");
    if (v < 0.0) throw UsageError("rate override must be nonnegative");
    net.channels[*k].rate_constant = v;
  }
  return net;
}

inline std::optional<InitCoupling> parse_init_coupling(const std::string& s) {
  if (s == "shared") return InitCoupling::shared;
  if (s == "independent") return InitCoupling::independent;
  return std::nullopt;
}

struct ExperimentConfig {
  std::string network_path;
  std::string perturb_channel;  // empty: X and Z use the file's rates
  double rate_x = 0.0;
  double rate_z = 0.0;
  std::string coupling = "split";
  std::size_t partition_n = 0;
  std::string partition_points;  // comma-separated, overrides partition_n
  double t_final = 1.0;
  std::size_t grid_points = 301;
  std::size_t n_paths = 10000;
  std::string observable;
  std::uint64_t seed = 1;
  std::string init_coupling = "shared";
  std::string output = "-";
  std::size_t workers = 1;
  std::size_t max_events = SimOptions{}.max_events;
  std::string args_echo;  // "# args: ..." provenance line; excludes --workers
};

inline CouplingSpec make_coupling(const std::string& name, std::size_t partition_n, const std::string& points,
                                  double t_final) {
  const auto kind = parse_coupling(name);
  if (!kind) throw UsageError("unknown coupling '" + name + "'");
  CouplingSpec spec{*kind, std::nullopt};
  const bool has_partition = partition_n > 0 || !points.empty();
  if (*kind == CouplingKind::local_crp) {
    if (!points.empty()) {
      std::vector<double> pts;
      for (const auto& p : split_list(points)) pts.push_back(parse_number(p, "partition point"));
      try {
        spec.partition = Partition(std::move(pts));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      if (spec.partition->t_final() != t_final) throw UsageError("partition must end at --t-final");
    } else if (partition_n >= 1) {
      spec.partition = Partition::uniform(t_final, partition_n);
    } else {
      throw UsageError("local-crp requires --partition-n >= 1 or --partition");
    }
  } else if (has_partition) {
    throw UsageError("--partition-n/--partition apply only to local-crp");
  }
  return spec;
}

inline Experiment make_experiment(const ExperimentConfig& cfg) {
  if (cfg.grid_points < 2) throw UsageError("--grid-points must be at least 2");
  if (cfg.n_paths < 2) throw UsageError("--paths must be at least 2");
  if (!(cfg.t_final > 0.0)) throw UsageError("--t-final must be positive");
  const auto init = parse_init_coupling(cfg.init_coupling);
  if (!init) throw UsageError("--init-coupling must be shared or independent");
  const Network net = load_network(cfg.network_path);
  Experiment ex;
  if (cfg.perturb_channel.empty()) {
    ex.net_x = ex.net_z = net;
  } else {
    try {
      std::tie(ex.net_x, ex.net_z) = apply_perturbation(net, {cfg.perturb_channel, cfg.rate_x, cfg.rate_z});
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  ex.coupling = make_coupling(cfg.coupling, cfg.partition_n, cfg.partition_points, cfg.t_final);
  ex.init_coupling = *init;
  ex.t_final = cfg.t_final;
  ex.grid = uniform_grid(cfg.t_final, cfg.grid_points);
  ex.n_paths = cfg.n_paths;
  ex.observable = parse_observable(net, cfg.observable);
  ex.master_seed = cfg.seed;
  ex.workers = cfg.workers;
  ex.sim.max_events = cfg.max_events;
  return ex;
}

class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot write '" + path + "'");
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void write_variance_csv(std::ostream& os, const EstimateSeries& s, const std::string& args_echo) {
  if (!args_echo.empty()) os << "# args: " << args_echo << '\n';
  os << "t,mean_diff,var_diff,se_mean,se_var,n_paths\n";
  for (std::size_t i = 0; i < s.t.size(); ++i)
    os << fmt_real(s.t[i]) << ',' << fmt_real(s.mean_diff[i]) << ',' << fmt_real(s.var_diff[i]) << ','
       << fmt_real(s.se_mean[i]) << ',' << fmt_real(s.se_var[i]) << ',' << s.n_paths << '\n';
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const Network net = parse_network(text);
    for (const auto& w : validation_warnings(net)) err << "warning: " << w << '\n';
    out << "ok: " << net.dim() << " species, " << net.num_channels() << " reactions\n";
    return kExitOk;
  } catch (const ParseError& e) {
    for (const auto& d : e.diagnostics()) err << path << ": " << format_diagnostic(d) << '\n';
    return kExitUsage;
  }
}

inline int cmd_variance(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Experiment ex = make_experiment(cfg);
    const EstimateSeries s = variance_trajectory(ex);
    OutputSink sink(cfg.output, out);
    write_variance_csv(*sink, s, cfg.args_echo);
    return kExitOk;
  });
}

struct SensitivityConfig {
  ExperimentConfig base;  // coupling/partition/grid fields ignored
  std::string channel;
  double theta = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  std::string couplings = "independent,crn,crp,split";  // local-crp as "local-crp:N"
};

inline int cmd_sensitivity(const SensitivityConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.channel.empty()) throw UsageError("--channel is required");
    const double spread = cfg.h1 + cfg.h2;
    if (!(spread > 0.0)) throw UsageError("h1 + h2 must be positive");
    if (cfg.theta - cfg.h2 < 0.0) throw UsageError("theta - h2 must be nonnegative");
    ExperimentConfig ec = cfg.base;
    ec.perturb_channel = cfg.channel;
    ec.rate_x = cfg.theta + cfg.h1;
    ec.rate_z = cfg.theta - cfg.h2;
    ec.coupling = "split";
    ec.partition_n = 0;
    ec.partition_points.clear();
    Experiment ex = make_experiment(ec);
    std::vector<std::pair<std::string, CouplingSpec>> specs;
    for (const auto& name : split_list(cfg.couplings)) {
      const auto colon = name.find(':');
      if (colon == std::string::npos) {
        specs.emplace_back(name, make_coupling(name, 0, "", ec.t_final));
      } else {
        const double n = parse_number(name.substr(colon + 1), "partition size");
        if (n < 1.0 || n != std::floor(n)) throw UsageError("invalid partition size in '" + name + "'");
        specs.emplace_back(name, make_coupling(name.substr(0, colon), static_cast<std::size_t>(n), "", ec.t_final));
      }
    }
    if (specs.empty()) throw UsageError("no couplings requested");
    std::vector<SensitivityEstimate> results;
    for (const auto& [name, spec] : specs) {
      ex.coupling = spec;
      results.push_back(sensitivity_fd(ex, spread));
    }
    OutputSink sink(cfg.base.output, out);
    if (!cfg.base.args_echo.empty()) *sink << "# args: " << cfg.base.args_echo << '\n';
    *sink << "coupling,estimate,se,n_paths\n";
    for (std::size_t i = 0; i < specs.size(); ++i)
      *sink << specs[i].first << ',' << fmt_real(results[i].estimate) << ',' << fmt_real(results[i].se) << ','
            << results[i].n_paths << '\n';
    return kExitOk;
  });
}

struct OracleConfig {
  std::string network_path;
  std::vector<std::string> rate_overrides;
  std::string bounds;  // one bound for all species, or one per species
  bool affine = false;
  double t = 1.0;
  std::string observable;
};

inline int cmd_oracle(const OracleConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.t < 0.0) throw UsageError("--t must be nonnegative");
    const Network net = with_rates(load_network(cfg.network_path), cfg.rate_overrides);
    const Observable f = parse_observable(net, cfg.observable);
    if (cfg.affine) {
      if (!cfg.bounds.empty()) throw UsageError("--affine and --bounds are exclusive");
      std::vector<double> m;
      try {
        m = moment_ode_mean(net, initial_mean(net), cfg.t);
      } catch (const NonAffineError& e) {
        throw UsageError(e.what());
      }
      double v = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) v += f.weights()[i] * m[i];
      out << "value," << fmt_real(v) << '\n';
      return kExitOk;
    }
    if (cfg.bounds.empty()) throw UsageError("either --bounds or --affine is required");
    std::vector<Count> upper;
    for (const auto& b : split_list(cfg.bounds)) {
      const auto n = crncouple::detail::parse_count(b);
      if (!n) throw UsageError("invalid bound '" + b + "'");
      upper.push_back(*n);
    }
    if (upper.size() == 1) upper.assign(net.dim(), upper[0]);
    if (upper.size() != net.dim()) throw UsageError("--bounds needs one value or one per species");
    const TruncatedSpace space(upper);
    GeneratorMatrix q;
    try {
      q = build_generator(net, space);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    auto p0 = initial_distribution(net, space);
    double mass = 0.0;
    for (double p : p0) mass += p;
    for (double& p : p0) p /= mass;
    const auto fv = observable_over(space, [&](const State& x) { return f(x); });
    const TransientResult r = transient_expectation(q, p0, cfg.t, fv);
    out << "value," << fmt_real(r.value) << '\n';
    out << "leak_proxy," << fmt_real(q.max_dropped_rate) << '\n';
    out << "leaked_mass," << fmt_real(r.leaked_mass + (1.0 - mass)) << '\n';
    return kExitOk;
  });
}

struct SimulateConfig {
  ExperimentConfig base;  // grid/paths/output reused
  std::uint32_t path_index = 0;
};

inline int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig ec = cfg.base;
    ec.n_paths = 2;  // not used, satisfies validation
    const Experiment ex = make_experiment(ec);
    const auto [x0, z0] = sample_initial(ex.net_x, ex.init_coupling, ex.master_seed, cfg.path_index);
    CoupledPath path;
    PathRecorder rec(path);
    run_coupled(ex.coupling, ex.net_x, ex.net_z, x0, z0, ex.t_final, PathKey{ex.master_seed, cfg.path_index}, rec,
                ex.sim);
    OutputSink sink(cfg.base.output, out);
    std::ostream& os = *sink;
    if (!cfg.base.args_echo.empty()) os << "# args: " << cfg.base.args_echo << '\n';
    os << "t,which,channel";
    for (const auto& s : ex.net_x.species) os << ",X_" << s;
    for (const auto& s : ex.net_x.species) os << ",Z_" << s;
    os << '\n';
    auto row = [&](double t, const char* which, const std::string& channel, const State& x, const State& z) {
      os << fmt_real(t) << ',' << which << ',' << channel;
      for (Count c : x.counts) os << ',' << c;
      for (Count c : z.counts) os << ',' << c;
      os << '\n';
    };
    row(0.0, "init", "", path.x0, path.z0);
    for (const auto& e : path.events)
      row(e.time, to_string(e.which), ex.net_x.channels[e.channel].id, e.x_after, e.z_after);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// argv front end

namespace detail {

inline void add_experiment_flags(CLI::App* sub, ExperimentConfig& c, bool with_coupling) {
  sub->add_option("network", c.network_path, "Network file")->required();
  sub->add_option("--perturb", c.perturb_channel, "Reaction whose rate differs between X and Z");
  sub->add_option("--rate-x", c.rate_x, "Rate constant of the perturbed reaction in X");
  sub->add_option("--rate-z", c.rate_z, "Rate constant of the perturbed reaction in Z");
  if (with_coupling) {
    sub->add_option("--coupling", c.coupling, "independent | crn | crp | local-crp | split");
    sub->add_option("--partition-n", c.partition_n, "Number of equal intervals for local-crp");
    sub->add_option("--partition", c.partition_points, "Comma-separated partition points for local-crp");
  }
  sub->add_option("--t-final", c.t_final, "Horizon T")->required();
  sub->add_option("--observable", c.observable, "Species name or NAME:W,NAME:W (default: last species)");
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--init-coupling", c.init_coupling, "shared | independent");
  sub->add_option("-o,--output", c.output, "Output CSV path ('-' for stdout)");
  sub->add_option("--max-events", c.max_events, "Per-path event cap");
}

inline std::string echo_args(const std::vector<std::string>& args) {
  std::string s;
  for (std::size_t i = 0; i < args.size(); ++i) {
    // worker count must not change the output bytes
    if (args[i] == "--workers") {
      ++i;
      continue;
    }
    if (args[i].rfind("--workers=", 0) == 0) continue;
    if (!s.empty()) s += ' ';
    s += args[i];
  }
  return s;
}

}  // namespace detail

// args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled simulation of stochastic reaction networks", "crncouple"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a network file");
  validate->add_option("network", validate_path, "Network file")->required();

  ExperimentConfig var_cfg;
  auto* variance = app.add_subcommand("variance", "Var(f(X(t)) - f(Z(t))) over a time grid, as CSV");
  detail::add_experiment_flags(variance, var_cfg, true);
  variance->add_option("--grid-points", var_cfg.grid_points, "Uniform grid points on [0, T]");
  variance->add_option("--paths", var_cfg.n_paths, "Number of coupled paths");
  variance->add_option("--workers", var_cfg.workers, "Parallel path workers");

  SensitivityConfig sens_cfg;
  auto* sensitivity = app.add_subcommand("sensitivity", "Finite-difference sensitivity per coupling, as CSV");
  detail::add_experiment_flags(sensitivity, sens_cfg.base, false);
  sensitivity->add_option("--channel", sens_cfg.channel, "Reaction whose rate constant is the parameter")->required();
  sensitivity->add_option("--theta", sens_cfg.theta, "Nominal rate constant")->required();
  sensitivity->add_option("--h1", sens_cfg.h1, "Upward offset (X runs at theta+h1)")->required();
  sensitivity->add_option("--h2", sens_cfg.h2, "Downward offset (Z runs at theta-h2)")->required();
  sensitivity->add_option("--couplings", sens_cfg.couplings, "Comma-separated couplings (local-crp:N allowed)");
  sensitivity->add_option("--paths", sens_cfg.base.n_paths, "Number of coupled paths");
  sensitivity->add_option("--workers", sens_cfg.base.workers, "Parallel path workers");

  OracleConfig or_cfg;
  auto* oracle = app.add_subcommand("oracle", "Exact E f(X(t)) by uniformization or moment ODE");
  oracle->add_option("network", or_cfg.network_path, "Network file")->required();
  oracle->add_option("--set-rate", or_cfg.rate_overrides, "Override a rate constant: CHANNEL=VALUE");
  oracle->add_option("--bounds", or_cfg.bounds, "Truncation bound (one value or one per species)");
  oracle->add_flag("--affine", or_cfg.affine, "Integrate the first-moment ODE (affine networks only)");
  oracle->add_option("--t", or_cfg.t, "Time")->required();
  oracle->add_option("--observable", or_cfg.observable, "Species name or NAME:W,NAME:W (default: last species)");

  SimulateConfig sim_cfg;
  auto* simulate = app.add_subcommand("simulate", "Dump the events of one coupled path as CSV");
  detail::add_experiment_flags(simulate, sim_cfg.base, true);
  simulate->add_option("--path-index", sim_cfg.path_index, "Path index within the master seed");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string echo = detail::echo_args(args);
  if (*validate) return cmd_validate(validate_path, out, err);
  if (*variance) {
    var_cfg.args_echo = echo;
    return cmd_variance(var_cfg, out, err);
  }
  if (*sensitivity) {
    sens_cfg.base.args_echo = echo;
    return cmd_sensitivity(sens_cfg, out, err);
  }
  if (*oracle) return cmd_oracle(or_cfg, out, err);
  if (*simulate) {
    sim_cfg.base.args_echo = echo;
    return cmd_simulate(sim_cfg, out, err);
  }
  return kExitUsage;
}

}  // namespace crncouple::cli
