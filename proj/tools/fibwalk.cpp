// fibwalk: numerical laboratory for Fibonacci unimodal maps.
//
// Subcommands: solve, combinatorics, scaling-report, distortion-report,
// validate-scaling, walk-sim, estimate-nu, basin-mc, pipeline. Outputs are
// JSON (sorted keys, reals as decimal strings) or CSV; rerunning a command
// with the same flags reproduces the bytes.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fibwalk/fibwalk.hpp"
#include "fibwalk/json_io.hpp"

namespace fw = fibwalk;
using fw::Real;
using json = fw::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIneq = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitPrecision = 3;
constexpr int kExitUsage = 64;

struct GlobalOpts {
  long precision = 256;
  int threads = 0;
  std::string out;
};

void emit(const GlobalOpts& g, const std::string& text) {
  std::string payload = text;
  if (payload.empty() || payload.back() != '\n') payload += '\n';
  if (g.out.empty()) {
    std::cout << payload;
  } else {
    std::ofstream f(g.out);
    if (!f) throw fw::Error("cannot open output path " + g.out);
    f << payload;
  }
}

void emit_json(const GlobalOpts& g, const json& j) { emit(g, j.dump(2)); }

fw::PrecisionPolicy policy(const GlobalOpts& g) {
  fw::PrecisionPolicy p = fw::PrecisionPolicy::from_env();
  p.initial_bits = g.precision;
  return p;
}

// Solve unless an explicit lambda is supplied; solving targets extra
// levels so the geometry at the requested depth is stable.
fw::FibMap resolve_map(const std::string& ell_s, const std::string& lambda_s,
                       int depth, int extra, const GlobalOpts& g) {
  Real ell(ell_s, g.precision);
  if (!lambda_s.empty()) return fw::FibMap(Real(lambda_s, g.precision), ell);
  fw::SolveOptions opts;
  opts.policy = policy(g);
  opts.target_extra = extra;
  auto res = fw::solve_parameter(ell, depth, opts);
  return fw::FibMap(res.lambda_star, ell);
}

fw::SequencePair pair_from_json(const json& j, long prec) {
  fw::SequencePair pair;
  for (const auto& s : j.at("a")) pair.a.emplace_back(s.get<std::string>(), prec);
  pair.a_tail_ratio = Real(j.value("a_tail_ratio", std::string("0")), prec);
  for (const auto& s : j.at("nu")) pair.nu.emplace_back(s.get<std::string>(), prec);
  pair.nu_tail_ratio = Real(j.value("nu_tail_ratio", std::string("0")), prec);
  return pair;
}

fw::ScalingConstants consts_from_json(const json& j, long prec,
                                      const fw::SequencePair& pair) {
  fw::ScalingConstants c{Real(j.at("rho_minus").get<std::string>(), prec),
                         Real(j.at("rho_plus").get<std::string>(), prec),
                         Real(j.at("Omega1").get<std::string>(), prec),
                         Real(j.at("Omega2").get<std::string>(), prec),
                         Real(j.at("C").get<std::string>(), prec),
                         j.value("d", 0),
                         j.value("k0", 1L),
                         pair.a[0]};
  if (j.contains("a0")) c.a0 = Real(j.at("a0").get<std::string>(), prec);
  return c;
}

json config_echo(std::initializer_list<std::pair<std::string, json>> kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

int cmd_solve(const GlobalOpts& g, const std::string& ell_s, int depth,
              int extra) {
  fw::SolveOptions opts;
  opts.policy = policy(g);
  opts.target_extra = extra;
  auto res = fw::solve_parameter(Real(ell_s, g.precision), depth, opts);
  json j = fw::solve_json(res);
  j["config"] = config_echo({{"command", "solve"},
                             {"ell", ell_s},
                             {"depth", depth},
                             {"extra", extra},
                             {"precision", g.precision}});
  emit_json(g, j);
  return kExitOk;
}

int cmd_combinatorics(const GlobalOpts& g, const std::string& ell_s,
                      const std::string& lambda_s, int depth) {
  Real ell(ell_s, g.precision);
  Real lam(lambda_s, g.precision);
  auto verdict = fw::is_fibonacci_to_depth(lam, ell, depth, policy(g));
  auto S = fw::fibonacci_times(depth);
  auto rec = fw::with_escalation(policy(g), [&](long p) {
    fw::FibMap fp(lam.with_precision(p), ell.with_precision(p));
    return fw::closest_returns(fp, S[static_cast<size_t>(depth)]);
  });
  json returns = json::array();
  for (const auto& r : rec)
    returns.push_back({{"time", r.time},
                       {"side", r.side},
                       {"distance", fw::real_json(r.distance, 18)}});
  json j;
  j["verdict"] = fw::verdict_json(verdict);
  j["closest_returns"] = returns;
  j["config"] = config_echo({{"command", "combinatorics"},
                             {"ell", ell_s},
                             {"lambda", lambda_s},
                             {"depth", depth},
                             {"precision", g.precision}});
  emit_json(g, j);
  return kExitOk;
}

int cmd_scaling_report(const GlobalOpts& g, const std::string& ell_s,
                       const std::string& lambda_s, int depth,
                       const std::string& format) {
  fw::FibMap f = resolve_map(ell_s, lambda_s, depth, 4, g);
  auto nest = fw::build_nest(f, depth);
  auto rep = fw::make_scaling_report(nest);
  auto rows2 = fw::two_step_checks(nest, rep);
  auto rows1 = fw::one_step_checks(nest, rep);
  rep.rows = rows2;
  rep.rows.insert(rep.rows.end(), rows1.begin(), rows1.end());
  bool hard_fail = rep.n0_lambda < 0;
  for (const auto& r : rep.rows)
    if (r.level >= depth - 2 && !r.pass) hard_fail = true;
  if (format == "csv") {
    emit(g, fw::scaling_report_csv(rep));
  } else {
    json j = fw::scaling_report_json(rep);
    j["lambda"] = fw::real_json(f.lambda());
    j["config"] = config_echo({{"command", "scaling-report"},
                               {"ell", ell_s},
                               {"depth", depth},
                               {"precision", g.precision}});
    emit_json(g, j);
  }
  return hard_fail ? kExitIneq : kExitOk;
}

int cmd_distortion_report(const GlobalOpts& g, const std::string& ell_s,
                          const std::string& lambda_s, int depth, long trials,
                          uint64_t seed, const std::string& format) {
  fw::FibMap f = resolve_map(ell_s, lambda_s, depth, 4, g);
  long p = f.precision();
  fw::SplitMix64 rng(seed);
  Real floor1 = Real(1L, p) - Real("1e-12", p);
  bool all_pass = true;
  std::ostringstream csv;
  csv << "kind,n,value,reference,pass\n";
  json rows = json::array();
  long done = 0;
  while (done < trials) {
    Real x(0.02 + 0.96 * rng.uniform01(), p);
    long n = 1 + static_cast<long>(rng.next() % 25);
    fw::IntervalR br = fw::monotone_branch(f, n, x);
    if (br.length() < fw::pow2(-60, p)) continue;
    Real len = br.length();
    Real tl = br.lo + len * Real("0.05", p);
    Real th = br.hi - len * Real("0.05", p);
    Real tlen = th - tl;
    Real jl = tl + tlen * Real(0.15 + 0.3 * rng.uniform01(), p);
    Real jh = th - tlen * Real(0.15 + 0.3 * rng.uniform01(), p);
    if (!(jl < jh)) continue;
    fw::CrossConfig cfg{fw::IntervalR(tl, th), fw::IntervalR(jl, jh)};
    auto rec = fw::cross_ratio_distortion(f, n, cfg);
    bool pass = rec.B_value >= floor1;
    all_pass = all_pass && pass;
    if (format == "csv") {
      csv << "B," << n << "," << rec.B_value.str(18) << ",1,"
          << (pass ? 1 : 0) << "\n";
    } else {
      rows.push_back({{"kind", "B"},
                      {"n", n},
                      {"value", fw::real_json(rec.B_value, 18)},
                      {"sum_lengths", fw::real_json(rec.sum_lengths, 12)},
                      {"max_length", fw::real_json(rec.max_length, 12)},
                      {"pass", pass}});
    }
    ++done;
  }
  if (format == "csv") {
    emit(g, csv.str());
  } else {
    json j;
    j["records"] = rows;
    j["all_pass"] = all_pass;
    j["config"] = config_echo({{"command", "distortion-report"},
                               {"ell", ell_s},
                               {"depth", depth},
                               {"trials", trials},
                               {"seed", seed},
                               {"precision", g.precision}});
    emit_json(g, j);
  }
  return all_pass ? kExitOk : kExitIneq;
}

int cmd_validate_scaling(const GlobalOpts& g, const std::string& input) {
  std::ifstream in(input);
  if (!in) throw fw::Error("cannot read " + input);
  json spec = json::parse(in);
  auto pair = pair_from_json(spec, g.precision);
  auto consts = consts_from_json(spec, g.precision, pair);
  auto v = fw::validate_scaling(pair, consts);
  json j;
  j["validation"] = fw::validation_json(v);
  if (v.ok()) {
    auto db = fw::derived_bounds(pair, consts);
    j["derived_bounds"] = {{"K_plus", fw::real_json(db.K_plus, 18)},
                           {"li_ok", db.li.ok},
                           {"lii_ok", db.lii.ok},
                           {"lvii_ok", db.lvii.ok}};
    auto [m1, m2] = fw::moments(pair);
    j["moments"] = {{"m1", fw::real_json(m1, 18)},
                    {"m2", fw::real_json(m2, 18)}};
  }
  j["config"] = config_echo({{"command", "validate-scaling"},
                             {"input", input},
                             {"precision", g.precision}});
  emit_json(g, j);
  return v.ok() ? kExitOk : kExitIneq;
}

int cmd_walk_sim(const GlobalOpts& g, const std::string& input,
                 const std::string& walker_csv) {
  std::ifstream in(input);
  if (!in) throw fw::Error("cannot read " + input);
  json spec = json::parse(in);
  long p = g.precision;
  std::vector<Real> nu;
  for (const auto& s : spec.at("nu")) nu.emplace_back(s.get<std::string>(), p);
  Real tail(spec.value("tail_ratio", std::string("0")), p);
  fw::WalkConfig cfg;
  cfg.nu = fw::NuLaw::from(std::move(nu), tail);
  cfg.k0 = spec.value("k0", 2L);
  cfg.r0 = spec.value("r0", 0L);
  cfg.s = spec.at("s").get<long>();
  cfg.horizon = spec.at("horizon").get<long>();
  cfg.n_walkers = spec.at("n_walkers").get<long>();
  cfg.seed = spec.at("seed").get<uint64_t>();
  cfg.threads = g.threads;
  cfg.record_walkers = walker_csv.empty() ? 0 : std::min(cfg.n_walkers, 64L);
  auto res = fw::simulate_walk(cfg);
  if (!walker_csv.empty()) {
    std::ofstream f(walker_csv);
    f << "walker,t,phi,Z,W,M\n";
    for (size_t w = 0; w < res.recorded.size(); ++w) {
      const auto& tr = res.recorded[w];
      for (size_t t = 0; t < tr.phi.size(); ++t)
        f << w << "," << t << "," << tr.phi[t] << "," << tr.Z[t].str(12) << ","
          << tr.W[t].str(12) << "," << tr.M[t].str(12) << "\n";
    }
  }
  json j = fw::walk_json(res);
  j["config"] = config_echo({{"command", "walk-sim"},
                             {"input", input},
                             {"k0", cfg.k0},
                             {"r0", cfg.r0},
                             {"s", cfg.s},
                             {"horizon", cfg.horizon},
                             {"n_walkers", cfg.n_walkers},
                             {"seed", cfg.seed},
                             {"precision", g.precision}});
  emit_json(g, j);
  return kExitOk;
}

int cmd_estimate_nu(const GlobalOpts& g, const std::string& ell_s,
                    const std::string& lambda_s, int depth, int level,
                    long samples, uint64_t seed) {
  fw::FibMap f = resolve_map(ell_s, lambda_s, depth, 4, g);
  auto nest = fw::build_nest(f, depth);
  auto part = fw::build_annuli(nest);
  auto t = fw::estimate_transitions(nest, part, level, samples, seed, g.threads);
  json j = fw::transitions_json(t);
  json a = json::array();
  for (int k = 1; k < part.deepest; ++k)
    a.push_back(fw::real_json(part.a_len[static_cast<size_t>(k)], 18));
  j["a"] = a;
  j["ell"] = ell_s;
  j["K"] = depth;
  j["lambda"] = fw::real_json(f.lambda());
  j["config"] = config_echo({{"command", "estimate-nu"},
                             {"ell", ell_s},
                             {"depth", depth},
                             {"level", level},
                             {"samples", samples},
                             {"seed", seed},
                             {"precision", g.precision}});
  emit_json(g, j);
  return kExitOk;
}

int cmd_basin_mc(const GlobalOpts& g, const std::string& ell_s,
                 const std::string& lambda_s, int depth, long samples,
                 long horizon, uint64_t seed, int r0, int start_level) {
  fw::FibMap f = resolve_map(ell_s, lambda_s, depth, 4, g);
  auto nest = fw::build_nest(f, depth);
  auto part = fw::build_annuli(nest);
  auto rep = fw::montecarlo_basin(nest, part, samples, horizon, seed, r0,
                                  start_level, g.threads);
  json j = fw::basin_json(rep);
  // empirical transition frequencies gathered over all recorded jumps
  long total = 0;
  for (const auto& [dk, c] : rep.jump_counts) total += c;
  json nu = json::array();
  if (total > 0) {
    int max_i = 0;
    for (const auto& [dk, c] : rep.jump_counts) max_i = std::max(max_i, dk + 3);
    std::vector<double> nu_hat(static_cast<size_t>(max_i), 0.0);
    for (const auto& [dk, c] : rep.jump_counts)
      nu_hat[static_cast<size_t>(dk + 2)] =
          static_cast<double>(c) / static_cast<double>(total);
    for (double v : nu_hat) nu.push_back(v);
  }
  j["nu_hat"] = nu;
  json a = json::array();
  for (int k = 1; k < part.deepest; ++k)
    a.push_back(fw::real_json(part.a_len[static_cast<size_t>(k)], 18));
  j["a"] = a;
  j["ell"] = ell_s;
  j["K"] = depth;
  j["seed"] = seed;
  j["config"] = config_echo({{"command", "basin-mc"},
                             {"ell", ell_s},
                             {"depth", depth},
                             {"samples", samples},
                             {"horizon", horizon},
                             {"seed", seed},
                             {"r0", r0},
                             {"start_level", start_level},
                             {"precision", g.precision}});
  emit_json(g, j);
  return kExitOk;
}

int run(const std::vector<std::string>& args);

int cmd_pipeline(const GlobalOpts& g, const std::string& input) {
  std::ifstream in(input);
  if (!in) throw fw::Error("cannot read " + input);
  json manifest = json::parse(in);
  for (const auto& step : manifest.at("steps")) {
    std::vector<std::string> args;
    for (const auto& s : step) args.push_back(s.get<std::string>());
    int rc = run(args);
    if (rc != 0) return rc;
  }
  (void)g;
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"fibwalk: Fibonacci unimodal maps, distortion estimates, and "
               "the induced random walk"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  GlobalOpts g;
  app.add_option("--precision", g.precision, "working precision in bits")
      ->check(CLI::Range(64L, 1L << 20));
  app.add_option("--threads", g.threads, "worker cap (0 = hardware)");
  app.add_option("--out", g.out, "output path (default stdout)");

  std::string ell = "2", lambda, format = "json", input, walker_csv;
  int depth = 15, extra = 4, level = 4, r0 = 0, start_level = 1;
  long trials = 1000, samples = 2000, horizon = 200;
  uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "bisect lambda*(ell, K)");
  solve->add_option("--ell", ell)->required();
  solve->add_option("--depth", depth)->required()->check(CLI::Range(2, 64));
  solve->add_option("--extra", extra)->check(CLI::Range(0, 16));

  auto* comb = app.add_subcommand("combinatorics",
                                  "closest returns and the Fibonacci verdict");
  comb->add_option("--ell", ell)->required();
  comb->add_option("--lambda", lambda)->required();
  comb->add_option("--depth", depth)->required()->check(CLI::Range(2, 64));

  auto* scal = app.add_subcommand("scaling-report",
                                  "nest geometry and the one-/two-step bounds");
  scal->add_option("--ell", ell)->required();
  scal->add_option("--lambda", lambda);
  scal->add_option("--depth", depth)->check(CLI::Range(10, 40));
  scal->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  auto* dist = app.add_subcommand("distortion-report",
                                  "randomized cross-ratio distortion batch");
  dist->add_option("--ell", ell)->required();
  dist->add_option("--lambda", lambda);
  dist->add_option("--depth", depth)->check(CLI::Range(6, 40));
  dist->add_option("--trials", trials)->check(CLI::Range(1L, 1000000L));
  dist->add_option("--seed", seed)->required();
  dist->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  auto* vals = app.add_subcommand("validate-scaling",
                                  "check (tfirst)/(tsecond)/(tthird) on a pair");
  vals->add_option("--input", input)->required();

  auto* walk = app.add_subcommand("walk-sim", "martingale walk ensemble");
  walk->add_option("--config", input)->required();
  walk->add_option("--walker-csv", walker_csv);

  auto* est = app.add_subcommand("estimate-nu",
                                 "empirical transition law of one annulus");
  est->add_option("--ell", ell)->required();
  est->add_option("--lambda", lambda);
  est->add_option("--depth", depth)->check(CLI::Range(6, 40));
  est->add_option("--level", level)->required();
  est->add_option("--samples", samples)->check(CLI::Range(1000L, 10000000L));
  est->add_option("--seed", seed)->required();

  auto* basin = app.add_subcommand("basin-mc",
                                   "induced-walk Monte Carlo over the nest");
  basin->add_option("--ell", ell)->required();
  basin->add_option("--lambda", lambda);
  basin->add_option("--depth", depth)->check(CLI::Range(6, 40));
  basin->add_option("--samples", samples)->check(CLI::Range(1L, 10000000L));
  basin->add_option("--horizon", horizon)->check(CLI::Range(0L, 1000000L));
  basin->add_option("--seed", seed)->required();
  basin->add_option("--r0", r0);
  basin->add_option("--start-level", start_level);

  auto* pipe = app.add_subcommand("pipeline", "run a manifest of commands");
  pipe->add_option("--config", input)->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("fibwalk");
    for (const auto& s : args) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(g, ell, depth, extra);
    if (*comb) return cmd_combinatorics(g, ell, lambda, depth);
    if (*scal) return cmd_scaling_report(g, ell, lambda, depth, format);
    if (*dist)
      return cmd_distortion_report(g, ell, lambda, depth, trials, seed, format);
    if (*vals) return cmd_validate_scaling(g, input);
    if (*walk) return cmd_walk_sim(g, input, walker_csv);
    if (*est)
      return cmd_estimate_nu(g, ell, lambda, depth, level, samples, seed);
    if (*basin)
      return cmd_basin_mc(g, ell, lambda, depth, samples, horizon, seed, r0,
                          start_level);
    if (*pipe) return cmd_pipeline(g, input);
  } catch (const fw::NotFoundError& e) {
    std::cerr << "not-found: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const fw::PrecisionCapExceeded& e) {
    std::cerr << "precision: " << e.what() << "\n";
    return kExitPrecision;
  } catch (const fw::PrecisionExhausted& e) {
    std::cerr << "precision: " << e.what() << "\n";
    return kExitPrecision;
  } catch (const fw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIneq;
  } catch (const json::exception& e) {
    std::cerr << "input: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}
