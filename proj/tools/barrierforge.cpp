#include "barrierforge/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

using namespace barrierforge;
namespace fs = std::filesystem;

namespace {

std::vector<int> parse_sweep(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty --sweep");
  return out;
}

int cmd_synth(const std::string& config, const std::string& out, const std::string& dump_sdp, bool verbose) {
  Manifest man;
  man.command = "synth";
  man.config_path = config;
  man.started = timestamp_now();
  RunConfig cfg = load_config(config);
  man.seed = cfg.seed;
  for (auto& k : cfg.defaulted) std::cerr << "note: '" << k << "' not set, using default\n";
  SynthOptions opt{out, dump_sdp, verbose};
  int code = exit_ok;
  try {
    auto res = run_synth(cfg, opt, &man);
    auto& c = res.certs.front();
    std::cout << "synthesised " << res.certs.size() << " certificate(s) for " << res.topology.size() << " subsystems"
              << " (T=" << res.attempts.back().T << ", attempts=" << res.attempts.size() << ")\n"
              << "  eta_i=" << c.eta << " mu_i=" << c.mu << " lambda=" << c.lambda << "\n"
              << "  network eta=" << res.check.eta << " mu=" << res.check.mu << " lambda_max=" << res.check.lambda_max
              << "\n  wrote " << out << "\n";
  } catch (const RetryExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = exit_retries_exhausted;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << " (lambda=" << e.lambda << ", pi=" << e.pi << ")\n";
    code = exit_infeasible;
  } catch (const CollectionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = exit_infeasible;
  } catch (const ConditioningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = exit_infeasible;
  }
  man.exit_code = code;
  man.write(out);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"barrierforge: data-driven compositional barrier certificates"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "synthesise storage certificates from noisy trajectories");
  std::string config, out = "out";
  std::string dump_sdp;
  bool verbose = false;
  synth->add_option("--config", config, "benchmark config JSON")->required();
  synth->add_option("--out", out, "output directory")->capture_default_str();
  synth->add_option("--dump-sdp", dump_sdp, "write the first dissipation SDP in sparse text form");
  synth->add_flag("-v,--verbose", verbose);

  auto* compose = app.add_subcommand("compose", "check the compositionality conditions for a certificate set");
  std::string certs_dir, topology, network_out;
  double psd_tol = 1e-8;
  compose->add_option("--certs", certs_dir, "directory with certs.json")->required();
  compose->add_option("--topology", topology, "topology JSON (defaults to the one recorded with the certificates)");
  compose->add_option("--out", network_out, "network certificate path (default <certs>/network.json)");
  compose->add_option("--psd-tol", psd_tol)->capture_default_str();

  auto* verify = app.add_subcommand("verify", "grid verification of certificates");
  VerifyOptions vopt;
  verify->add_option("--target", vopt.target, "fixture | synth")->check(CLI::IsMember({"fixture", "synth"}))->capture_default_str();
  verify->add_option("--benchmark", vopt.benchmark, "fixture id or 'all'");
  verify->add_option("--certs", vopt.certs_dir, "certificate directory (synth target)");
  verify->add_option("--fixtures", vopt.fixture_dir, "fixture directory")->capture_default_str();
  verify->add_option("--grid", vopt.grid.per_axis, "grid points per axis")->capture_default_str();
  verify->add_option("--w-grid", vopt.grid.w_per_axis, "internal-input grid points per axis")->capture_default_str();
  verify->add_option("--tol", vopt.grid.tol)->capture_default_str();
  verify->add_option("--slack", vopt.slack, "relative slack for fixture levels")->capture_default_str();
  verify->add_option("--report", vopt.out_path, "JSON report path");

  auto* simulate = app.add_subcommand("simulate", "closed-loop (or open-loop) network simulation");
  SimulateOptions sopt;
  std::string sim_out;
  simulate->add_option("--network", sopt.network, "network.json from synth or compose");
  simulate->add_option("--fixture", sopt.fixture, "use a stored fixture certificate");
  simulate->add_option("--benchmark", sopt.benchmark, "benchmark for --open-loop runs");
  simulate->add_option("-N", sopt.N, "network size for fixture / open-loop runs");
  simulate->add_flag("--open-loop", sopt.open_loop, "u = 0");
  simulate->add_option("--samples", sopt.sim.samples)->capture_default_str();
  simulate->add_option("--horizon", sopt.sim.horizon)->capture_default_str();
  simulate->add_option("--dt", sopt.sim.dt)->capture_default_str();
  simulate->add_option("--seed", sopt.sim.seed)->capture_default_str();
  simulate->add_option("--dump-every", sopt.sim.dump_every, "trajectory dump stride in steps (0: none)");
  simulate->add_option("--out", sim_out, "output directory for safety.csv / trajectories.csv / plot.svg");
  bool svg = false;
  simulate->add_flag("--svg", svg, "also write plot.svg (needs --dump-every)");

  auto* bench = app.add_subcommand("bench", "variable counts and composition timing across N");
  std::string sweep = "7,63,255,1023", bench_config, bench_certs, bench_out;
  std::string bench_benchmark = "duffing_binary";
  bench->add_option("--sweep", sweep)->capture_default_str();
  bench->add_option("--benchmark", bench_benchmark)->capture_default_str();
  bench->add_option("--config", bench_config, "config JSON (overrides --benchmark)");
  bench->add_option("--certs", bench_certs, "reuse a synthesised certificate set");
  bench->add_option("--out", bench_out, "JSON result path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (*synth) return cmd_synth(config, out, dump_sdp, verbose);

    if (*compose) {
      CompositionSettings cs;
      cs.psd_tol = psd_tol;
      std::string path = network_out.empty() ? (fs::path(certs_dir) / "network.json").string() : network_out;
      auto r = run_compose(certs_dir, topology, path, cs);
      std::cout << "lambda_max=" << r.check.lambda_max << " (tol " << r.check.psd_tol << ") eta=" << r.check.eta
                << " mu=" << r.check.mu << " lanczos_iters=" << r.check.iterations << " " << r.check.seconds << "s\n";
      std::cout << (r.check.passes ? "composition passes" : "composition FAILS") << "; wrote " << path << "\n";
      return r.check.passes ? exit_ok : exit_composition_failed;
    }

    if (*verify) {
      auto reps = run_verify(vopt);
      bool ok = true;
      for (auto& r : reps) {
        std::cout << r.note << " (" << r.condition << "): worst margin " << r.worst_margin << " over " << r.samples
                  << " samples -> " << (r.pass ? "pass" : "FAIL") << "\n";
        ok = ok && r.pass;
      }
      return ok ? exit_ok : exit_verification_failed;
    }

    if (*simulate) {
      if (!sim_out.empty()) {
        sopt.csv = (fs::path(sim_out) / "safety.csv").string();
        if (sopt.sim.dump_every > 0) sopt.dump_csv = (fs::path(sim_out) / "trajectories.csv").string();
        if (svg) sopt.svg = (fs::path(sim_out) / "plot.svg").string();
      }
      auto r = run_simulate(sopt);
      int diverged = 0;
      for (auto& row : r.rows) diverged += row.diverged;
      std::cout << r.rows.size() << " trajectories, " << r.unsafe_count << " entered the unsafe set";
      if (diverged) std::cout << ", " << diverged << " diverged";
      if (r.closed_loop)
        std::cout << "; max B=" << r.max_B << " (eta " << r.eta << ", mu " << r.mu << "), decay satisfied at "
                  << 100 * r.decay_fraction << "% of steps";
      std::cout << " [" << r.seconds << "s]\n";
      if (!r.closed_loop) return exit_ok;
      bool safe = r.unsafe_count == 0 && r.max_B <= r.eta * (1 + 1e-6);
      return safe ? exit_ok : exit_verification_failed;
    }

    if (*bench) {
      RunConfig cfg = bench_config.empty() ? config_from_json({{"benchmark", bench_benchmark}}) : load_config(bench_config);
      BenchOptions bo;
      bo.sweep = parse_sweep(sweep);
      bo.certs_dir = bench_certs;
      auto b = run_bench(cfg, bo);
      std::cout << "per-subsystem SDP variables: " << b.per_subsystem_vars << "\n"
                << "monolithic at N=3: " << b.monolithic_vars_N3 << " (x" << b.observed_factor << ", closed form x"
                << b.predicted_factor << ")\n";
      for (auto& r : b.rows)
        std::cout << "  N=" << r.N << " vars=" << r.compositional_vars << " compose=" << r.compose_seconds
                  << "s lambda_max=" << r.lambda_max << "\n";
      std::cout << "linear fit R^2 = " << b.r2 << "\n";
      if (!bench_out.empty()) write_json(bench_out, to_json(b));
      return exit_ok;
    }
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_missing_artifact;
  } catch (const CompositionFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_composition_failed;
  } catch (const RetryExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_retries_exhausted;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_infeasible;
  } catch (const CollectionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_infeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_ok;
}
