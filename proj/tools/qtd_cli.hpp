#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtd/qtd.hpp"

namespace qtd::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kVerifyFailed = 3, kIoError = 4 };

struct Options {
  std::string command;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> suite;
  std::size_t jobs = 1;
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // quantizer
      "d", "sigma", "H", "m0", "eps", "L", "l", "K",
      // target and data
      "target", "data", "gmm_weights", "gmm_means", "gmm_sds", "n_train",
      // sampler
      "T", "delta", "seed", "init", "n_samples", "method", "beta_mode", "euler_steps", "noise_scale", "jobs",
      // verification and adjacency
      "replica_scale", "states", "times",
      // output
      "output_dir"};
  return keys;
}

inline io::Config load_config(const Options& o) {
  io::Config c;
  try {
    if (o.config_path) c = io::Config::load(*o.config_path);
  } catch (const ParseError& e) {
    throw InvalidArgument(e.what());
  }
  c.require_known(known_keys());
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (o.method) c.set("method", *o.method);
  return c;
}

inline std::filesystem::path output_dir(const Options& o, const io::Config& c) {
  std::filesystem::path dir;
  if (o.out)
    dir = *o.out;
  else if (const char* env = std::getenv("QTD_OUT_DIR"); env && *env)
    dir = env;
  else
    dir = c.get_string("output_dir", ".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

/// Means are ';'-separated components of ','-separated coordinates.
inline GaussianMixture mixture_from_config(const io::Config& c) {
  std::vector<Point> means;
  for (const auto& comp : io::split(c.get_string("gmm_means"), ';')) {
    Point p;
    for (const auto& tok : io::split(comp, ',')) {
      double v = 0.0;
      if (!io::parse_double(tok, v)) throw InvalidArgument("config: gmm_means has a non-numeric entry");
      p.push_back(v);
    }
    means.push_back(std::move(p));
  }
  return {c.get_doubles("gmm_weights"), std::move(means), c.get_doubles("gmm_sds")};
}

/// Training points: read from `data`, or drawn from the configured mixture.
inline std::vector<Point> training_points(const io::Config& c, std::uint64_t seed) {
  const std::string target = c.get_string("target", c.has("data") ? "csv" : "gmm");
  if (target == "csv") return io::read_points_csv(std::filesystem::path(c.get_string("data")));
  if (target == "gmm") {
    Rng rng = replica_rng(seed, 0x7A11);
    return mixture_from_config(c).sample(c.get_uint("n_train", 10000), rng);
  }
  throw InvalidArgument("config: target must be csv or gmm");
}

inline std::size_t jobs_of(const Options& o, const io::Config& c) {
  return o.jobs != 1 ? o.jobs : static_cast<std::size_t>(c.get_uint("jobs", 1));
}

inline int cmd_quantize(const Options& o) {
  const io::Config c = load_config(o);
  const auto points = io::read_points_csv(std::filesystem::path(c.get_string("data")));
  const QuantizerSpec spec = io::spec_from_config(c, points.front().size());
  if (spec.d != points.front().size()) throw InvalidArgument("config: d does not match the data dimension");
  const auto states = quantize_dataset(spec, points);
  const auto dir = output_dir(o, c);
  const std::uint64_t h = c.hash();
  auto sf = open_out(dir / "states.csv");
  io::write_states_csv(sf, states, h);
  auto pf = open_out(dir / "spec.cfg");
  io::write_spec(pf, spec, h);
  std::cout << "quantized " << states.size() << " points into " << spec.num_bits() << "-bit states (K=" << spec.K
            << ")\n";
  return kOk;
}

inline int cmd_sample(const Options& o) {
  const io::Config c = load_config(o);
  const std::uint64_t seed = c.get_uint("seed", 0);
  const auto points = training_points(c, seed);
  const QuantizerSpec spec = io::spec_from_config(c, points.front().size());
  if (spec.d != points.front().size()) throw InvalidArgument("config: d does not match the data dimension");

  SamplerConfig cfg;
  cfg.spec = spec;
  cfg.eps = c.get_double("eps", 0.1);
  if (c.has("T") != c.has("delta")) throw InvalidArgument("config: set both T and delta, or neither");
  if (c.has("T")) {
    cfg.T = c.get_double("T");
    cfg.delta = c.get_double("delta");
  } else {
    const Schedule s = default_schedule(spec.d, spec.m, cfg.eps);
    cfg.T = s.T;
    cfg.delta = s.delta;
  }
  cfg.seed = seed;
  cfg.jobs = jobs_of(o, c);
  const std::string init = c.get_string("init", "uniform");
  if (init == "uniform")
    cfg.init = InitKind::Uniform;
  else if (init == "exact-terminal")
    cfg.init = InitKind::ExactTerminal;
  else
    throw InvalidArgument("config: init must be uniform or exact-terminal");
  const std::string beta = c.get_string("beta_mode", "standard");
  if (beta == "standard")
    cfg.beta_mode = BetaMode::Standard;
  else if (beta == "tight")
    cfg.beta_mode = BetaMode::Tight;
  else
    throw InvalidArgument("config: beta_mode must be standard or tight");

  auto initial = std::make_shared<const EmpiricalInitial>(
      EmpiricalInitial::from_samples(quantize_dataset(spec, points)));
  cfg.initial = initial;
  OraclePtr oracle = std::make_shared<const ExactOracle>(*initial, cfg.T);
  if (const double noise = c.get_double("noise_scale", 0.0); noise > 0.0) oracle = perturb(oracle, noise, seed);

  const std::size_t n = c.get_uint("n_samples", 1000);
  const std::string method = c.get_string("method", "uniformization");
  const TimePartition part = build_partition(spec.num_bits(), cfg.T, cfg.delta, cfg.beta_mode);
  SampleResult res;
  if (method == "uniformization")
    res = sample(cfg, *oracle, n);
  else if (method == "euler")
    res = euler_sample(cfg, *oracle, c.get_uint("euler_steps", 256), n);
  else
    throw InvalidArgument("config: method must be uniformization or euler");

  const auto dir = output_dir(o, c);
  const std::uint64_t h = c.hash();
  auto sf = open_out(dir / "samples.csv");
  io::write_samples_csv(sf, res, h);
  if (method == "uniformization") {
    auto tf = open_out(dir / "stats.csv");
    io::write_stats_csv(tf, part, res.stats, h);
  }
  const double reps = res.stats.replicas ? static_cast<double>(res.stats.replicas) : 1.0;
  const std::vector<io::MetricRow> rows = {
      {"mean_poisson_events", res.stats.mean_events(), n, seed, h},
      {"expected_poisson_events", method == "uniformization" ? part.expected_events() : 0.0, n, seed, h},
      {"mean_score_evals", res.stats.mean_score_evals(), n, seed, h},
      {"mean_score_calls", static_cast<double>(res.stats.score_calls) / reps, n, seed, h},
      {"accepted_moves", static_cast<double>(res.stats.accepted_moves), n, seed, h},
      {"truncation_activations", static_cast<double>(res.stats.truncation_activations), n, seed, h},
      {"euler_clips", static_cast<double>(res.stats.euler_clips), n, seed, h},
  };
  auto mf = open_out(dir / "metrics.csv");
  io::write_metrics_csv(mf, rows, h);
  std::cout << "wrote " << res.states.size() << " samples (" << method << ", D=" << spec.num_bits()
            << ", T=" << io::format_double(cfg.T) << ", delta=" << io::format_double(cfg.delta) << ")\n";
  return kOk;
}

inline int cmd_verify(const Options& o) {
  if (!o.suite) throw InvalidArgument("verify: --suite is required");
  const io::Config c = load_config(o);
  verify::Budget b;
  b.seed = c.get_uint("seed", b.seed);
  b.replica_scale = c.get_double("replica_scale", 1.0);
  if (!(b.replica_scale > 0.0)) throw InvalidArgument("config: replica_scale must be positive");
  b.jobs = jobs_of(o, c);
  const auto results = verify::run_suite(*o.suite, b);
  bool ok = true;
  std::vector<io::MetricRow> rows;
  for (const auto& r : results) {
    std::cout << verify::format(r) << '\n';
    ok = ok && r.passed;
    rows.push_back({r.name + ".measured", r.measured, 1, b.seed, c.hash()});
    rows.push_back({r.name + ".threshold", r.threshold, 1, b.seed, c.hash()});
    rows.push_back({r.name + ".passed", r.passed ? 1.0 : 0.0, 1, b.seed, c.hash()});
  }
  const auto dir = output_dir(o, c);
  auto f = open_out(dir / ("verify_" + *o.suite + ".csv"));
  io::write_metrics_csv(f, rows, c.hash());
  return ok ? kOk : kVerifyFailed;
}

/// Graph table and heat-kernel heatmaps for the three structures at a
/// matched state count `states` (a power of two).
inline int cmd_adjacency(const Options& o) {
  const io::Config c = load_config(o);
  const std::uint64_t n = c.get_uint("states", 8);
  if (n < 2 || !std::has_single_bit(n)) throw InvalidArgument("config: states must be a power of two >= 2");
  if (n > 1024) throw InvalidArgument("config: states must be <= 1024");
  const std::vector<double> times = c.has("times") ? c.get_doubles("times") : std::vector<double>{0.0, 0.1, 0.5, 1.0, 2.0};
  const auto D = static_cast<std::size_t>(std::countr_zero(n));
  const std::vector<AdjacencyKind> kinds = {AdjacencyKind::tridiagonal(n), AdjacencyKind::dense(n),
                                            AdjacencyKind::hypercube(D)};
  const auto dir = output_dir(o, c);
  const std::uint64_t h = c.hash();
  auto rf = open_out(dir / "adjacency_report.csv");
  io::write_hash_line(rf, h);
  rf << "structure,states,diameter,max_out_degree,mixing_time\n";
  for (const auto& k : kinds) {
    const GraphReport r = graph_report(k);
    const double tmix = mixing_time(k);
    rf << k.name() << ',' << n << ',' << r.diameter << ',' << r.max_out_degree << ',' << io::format_double(tmix)
       << '\n';
    std::cout << k.name() << ": diameter=" << r.diameter << " max_out_degree=" << r.max_out_degree
              << " mixing_time=" << io::format_double(tmix) << '\n';
    auto hf = open_out(dir / ("heatmap_" + k.name() + ".csv"));
    io::write_hash_line(hf, h);
    hf << "t,row,col,prob\n";
    for (double t : times) io::write_heatmap_rows(hf, t, heat_kernel(k, t));
  }
  return kOk;
}

}  // namespace detail

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Quantized transition diffusion: quantize, sample, verify, adjacency"};
  app.require_subcommand(1);
  Options o;
  std::string config_path, out, method, suite;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value)");
    sub->add_option("--seed", seed, "random seed, overrides the config");
    sub->add_option("--out", out, "output directory (overrides QTD_OUT_DIR)");
    sub->add_option("--jobs", o.jobs, "worker threads; output does not depend on it")->check(CLI::PositiveNumber);
  };
  auto* q = app.add_subcommand("quantize", "quantize a CSV of points into binary states");
  auto* s = app.add_subcommand("sample", "run the reverse sampler");
  auto* v = app.add_subcommand("verify", "run a verification suite");
  auto* a = app.add_subcommand("adjacency", "graph report and heat-kernel heatmaps");
  for (auto* sub : {q, s, v, a}) common(sub);
  s->add_option("--method", method, "uniformization or euler");
  v->add_option("--suite", suite, "suite name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? kOk : kConfigError;
  }
  auto opt = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* used = app.get_subcommands().front();
  o.command = used->get_name();
  if (opt(used, "--config")) o.config_path = config_path;
  if (opt(used, "--seed")) o.seed = seed;
  if (opt(used, "--out")) o.out = out;
  if (used == s && opt(s, "--method")) o.method = method;
  if (used == v && opt(v, "--suite")) o.suite = suite;

  try {
    if (o.command == "quantize") return detail::cmd_quantize(o);
    if (o.command == "sample") return detail::cmd_sample(o);
    if (o.command == "verify") return detail::cmd_verify(o);
    return detail::cmd_adjacency(o);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace qtd::cli
