#include "barrierforge/pipeline.hpp"

#include "barrierforge/parallel.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace barrierforge {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int smallest_network(const std::string& benchmark) {
  // 3 is valid for every topology kind (binary needs 2^l - 1)
  (void)benchmark;
  return 3;
}

std::string noise_name(NoiseDistribution d) {
  return d == NoiseDistribution::uniform_ball ? "uniform_ball" : "scaled_gaussian_clipped";
}

NoiseDistribution noise_from(const std::string& s) {
  if (s == "uniform_ball") return NoiseDistribution::uniform_ball;
  if (s == "scaled_gaussian_clipped") return NoiseDistribution::scaled_gaussian_clipped;
  throw std::invalid_argument("unknown noise distribution '" + s + "'");
}

std::string cert_file(int k) { return "cert_" + std::to_string(k) + ".json"; }

}  // namespace

const BenchmarkDefaults& benchmark_defaults(const std::string& b) {
  static const std::map<std::string, BenchmarkDefaults> table{
      {"lorenz_fully", {1000, 15, 0.03, 98.21, 100.61}},
      {"lorenz_ring", {1500, 13, 0.12, 123.17, 126.39}},
      {"spacecraft_binary", {1023, 15, 0.75, 87.17, 89.27}},
      {"spacecraft_star", {2000, 17, 0.75, 128.01, 132.68}},
      {"chen_line", {1000, 12, 0.27, 35.63, 36.16}},
      {"duffing_binary", {1023, 18, 0.08, 406.61, 412.52}},
  };
  auto it = table.find(b);
  if (it == table.end()) throw std::invalid_argument("unknown benchmark '" + b + "'");
  return it->second;
}

BenchmarkParams RunConfig::benchmark_params() const {
  BenchmarkParams p;
  p.inertias = inertias;
  p.u_bound = u_bound;
  p.dict = dict;
  p.theta = theta;
  return p;
}

SynthSettings RunConfig::synth_settings() const {
  SynthSettings s;
  s.lambda = lambda;
  s.pi = pi;
  s.dissipation_degree = dissipation_degree;
  s.level_degree = level_degree;
  s.degree_cap = degree_cap;
  s.sdp = sdp;
  return s;
}

RunConfig config_from_json(const json& j) {
  static const std::set<std::string> known{"benchmark", "N",       "tau",     "T",         "phi_bar",
                                           "lambda",    "pi",      "dict",    "theta",     "inertias",
                                           "seed",      "u_bound", "dissipation_degree",   "level_degree",
                                           "degree_cap", "retries", "growth",  "psd_tol",   "workers",
                                           "homogeneous", "noise", "sdp"};
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (auto& [k, v] : j.items())
    if (!known.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  RunConfig c;
  c.benchmark = j.at("benchmark").get<std::string>();
  const auto& d = benchmark_defaults(c.benchmark);
  auto take = [&](const char* key, auto& field, auto fallback) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    else {
      field = fallback;
      c.defaulted.push_back(key);
    }
  };
  take("N", c.N, d.N);
  take("tau", c.tau, 0.01);
  take("T", c.T, d.T);
  take("phi_bar", c.phi_bar, d.phi_bar);
  take("lambda", c.lambda, 0.99);
  take("pi", c.pi, 1.0);
  take("seed", c.seed, std::uint64_t{1});
  take("dissipation_degree", c.dissipation_degree, 0);
  take("level_degree", c.level_degree, 2);
  take("degree_cap", c.degree_cap, 4);
  take("retries", c.retries, 3);
  take("growth", c.growth, 1.25);
  take("psd_tol", c.psd_tol, 1e-8);
  take("workers", c.workers, 0);
  take("homogeneous", c.homogeneous, true);
  if (j.contains("inertias")) {
    auto v = j["inertias"].get<std::vector<double>>();
    if (v.size() != 3) throw std::invalid_argument("inertias needs three values");
    std::copy(v.begin(), v.end(), c.inertias.begin());
  } else if (c.benchmark.rfind("spacecraft", 0) == 0) {
    c.defaulted.push_back("inertias");
  }
  if (j.contains("u_bound") && !j["u_bound"].is_null()) c.u_bound = j["u_bound"].get<double>();
  if (j.contains("dict")) c.dict = j["dict"].get<std::vector<std::vector<int>>>();
  if (j.contains("theta")) {
    auto t = j["theta"].get<std::vector<int>>();
    for (int& v : t) {
      if (v < 1) throw std::invalid_argument("theta divisors are 1-based variable indices");
      --v;
    }
    c.theta = t;
  }
  if (j.contains("noise")) c.noise = noise_from(j["noise"].get<std::string>());
  else c.defaulted.push_back("noise");
  if (j.contains("sdp")) c.sdp = sdp_settings_from_json(j["sdp"]);
  else c.defaulted.push_back("sdp");

  if (c.N < 1) throw std::invalid_argument("N must be positive");
  if (c.T < 1) throw std::invalid_argument("T must be positive");
  if (!(c.tau > 0)) throw std::invalid_argument("tau must be positive");
  if (c.phi_bar < 0) throw std::invalid_argument("phi_bar must be nonnegative");
  if (!(c.lambda > 0) || !(c.pi > 0)) throw std::invalid_argument("lambda and pi must be positive");
  if (c.retries < 0 || !(c.growth > 1)) throw std::invalid_argument("retries >= 0 and growth > 1 required");
  if (c.dissipation_degree % 2 || c.level_degree % 2 || c.degree_cap % 2)
    throw std::invalid_argument("multiplier degrees must be even");
  return c;
}

RunConfig load_config(const std::string& path) { return config_from_json(read_json(path)); }

json to_json(const RunConfig& c) {
  json j{{"benchmark", c.benchmark},
         {"N", c.N},
         {"tau", c.tau},
         {"T", c.T},
         {"phi_bar", c.phi_bar},
         {"lambda", c.lambda},
         {"pi", c.pi},
         {"seed", c.seed},
         {"dissipation_degree", c.dissipation_degree},
         {"level_degree", c.level_degree},
         {"degree_cap", c.degree_cap},
         {"retries", c.retries},
         {"growth", c.growth},
         {"psd_tol", c.psd_tol},
         {"workers", c.workers},
         {"homogeneous", c.homogeneous},
         {"noise", noise_name(c.noise)},
         {"inertias", c.inertias},
         {"sdp", to_json(c.sdp)}};
  if (!std::isnan(c.u_bound)) j["u_bound"] = c.u_bound;
  if (c.dict) j["dict"] = *c.dict;
  if (c.theta) {
    auto t = *c.theta;
    for (int& v : t) ++v;
    j["theta"] = t;
  }
  return j;
}

std::string timestamp_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json Manifest::to_json() const {
  json st = json::array();
  for (auto& s : stages) st.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  json j{{"command", command}, {"config", config_path}, {"seed", seed},       {"started", started},
         {"finished", finished}, {"stages", st},        {"artifacts", artifacts}, {"exit_code", exit_code}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

void Manifest::write(const std::string& dir) {
  finished = timestamp_now();
  std::string path = (fs::path(dir) / "manifest.json").string();
  if (std::find(artifacts.begin(), artifacts.end(), "manifest.json") == artifacts.end()) artifacts.push_back("manifest.json");
  write_json(path, to_json());
}

json network_json(const Topology& top, const std::vector<int>& index, const std::vector<std::string>& cert_files,
                  const CompositionCheck& check, double lambda) {
  return {{"topology", to_json(top)},
          {"index", index},
          {"certs", cert_files},
          {"eta", check.eta},
          {"mu", check.mu},
          {"lambda", lambda},
          {"check",
           {{"passes", check.passes},
            {"lambda_max", check.lambda_max},
            {"psd_tol", check.psd_tol},
            {"level_margin", check.level_margin},
            {"iterations", check.iterations}}}};
}

void write_certificate_set(const std::string& dir, const std::string& benchmark, const std::vector<StorageCertificate>& certs,
                           const std::vector<int>& index, const Topology& top, std::vector<std::string>* written) {
  std::vector<std::string> files;
  for (size_t k = 0; k < certs.size(); ++k) {
    files.push_back(cert_file(static_cast<int>(k)));
    write_text((fs::path(dir) / files.back()).string(), dump_certificate(certs[k]));
  }
  write_json((fs::path(dir) / "certs.json").string(),
             {{"benchmark", benchmark}, {"N", top.size()}, {"index", index}, {"files", files}, {"topology", to_json(top)}});
  if (written) {
    written->insert(written->end(), files.begin(), files.end());
    written->push_back("certs.json");
  }
}

CertificateSet load_certificate_set(const std::string& dir) {
  json j = read_json((fs::path(dir) / "certs.json").string());
  CertificateSet s;
  s.benchmark = j.value("benchmark", std::string{});
  for (auto& f : j.at("files")) s.certs.push_back(certificate_from_json(read_json((fs::path(dir) / f.get<std::string>()).string())));
  s.index = j.at("index").get<std::vector<int>>();
  for (int k : s.index)
    if (k < 0 || k >= static_cast<int>(s.certs.size())) throw std::invalid_argument("certs.json index out of range");
  if (j.contains("topology")) s.topology = topology_from_json(j["topology"]);
  return s;
}

SynthResult run_synth(const RunConfig& cfg, const SynthOptions& opt, Manifest* manifest) {
  auto t0 = Clock::now();
  NetworkModel net = build_benchmark(cfg.benchmark, cfg.N, cfg.benchmark_params());
  if (manifest) manifest->stages.push_back({"build", since(t0)});
  SynthSettings set = cfg.synth_settings();

  std::vector<SubsystemModel> models;
  SynthResult res;
  res.topology = net.topology;
  if (cfg.homogeneous) {
    models.push_back(net.representative());
    res.index.assign(net.topology.size(), 0);
  } else {
    models = net.subsystems;
    for (int i = 0; i < net.topology.size(); ++i) res.index.push_back(i);
  }

  RetryPolicy policy{cfg.growth, cfg.retries};
  res.attempts.push_back({0, cfg.T, cfg.seed});
  for (;;) {
    const RetryState st = res.attempts.back();
    auto ts = Clock::now();
    std::vector<StorageCertificate> certs(models.size());
    parallel_for(
        static_cast<int>(models.size()),
        [&](int k) {
          std::uint64_t seed = reseed(st.seed, k);
          TrajectoryRecord rec = collect_trajectory(models[k], st.T, cfg.tau, {cfg.phi_bar, cfg.noise}, seed);
          if (k == 0 && st.attempt == 0 && !opt.dump_sdp.empty()) {
            auto dp = assemble_dissipation_problem(rec, models[k].spec(), set, set.dissipation_degree);
            std::ostringstream os;
            dp.prog.problem().dump(os);
            write_text(opt.dump_sdp, os.str());
          }
          StorageCertificate c = synthesize_csc(rec, models[k].spec(), set);
          auto& spec = models[k].spec();
          Levels L = compute_levels(c.P, spec.X0, spec.Xa, set.level_degree, set.sdp);
          c.eta = L.eta;
          c.mu = L.mu;
          c.provenance.benchmark = cfg.benchmark;
          c.provenance.attempts = st.attempt + 1;
          c.provenance.T_requested = cfg.T;
          certs[k] = std::move(c);
        },
        cfg.workers);
    if (manifest) manifest->stages.push_back({"synthesis[T=" + std::to_string(st.T) + "]", since(ts)});

    auto tc = Clock::now();
    CompositionSettings cs;
    cs.psd_tol = cfg.psd_tol;
    res.check = check_composition(net.topology, certs, res.index, cs);
    if (manifest) manifest->stages.push_back({"composition[T=" + std::to_string(st.T) + "]", since(tc)});
    if (opt.verbose)
      std::cerr << "attempt " << st.attempt << " T=" << st.T << " lambda_max=" << res.check.lambda_max
                << " eta=" << res.check.eta << " mu=" << res.check.mu << (res.check.passes ? " pass" : " fail") << "\n";
    res.certs = std::move(certs);
    if (res.check.passes) break;
    res.attempts.push_back(policy.next(res.attempts));  // throws RetryExhausted
  }

  if (!opt.out_dir.empty()) {
    auto tw = Clock::now();
    std::vector<std::string> written;
    write_certificate_set(opt.out_dir, cfg.benchmark, res.certs, res.index, res.topology, &written);
    std::vector<std::string> files;
    for (size_t k = 0; k < res.certs.size(); ++k) files.push_back(cert_file(static_cast<int>(k)));
    double lambda = std::numeric_limits<double>::infinity();
    for (auto& c : res.certs) lambda = std::min(lambda, c.lambda);
    json nj = network_json(res.topology, res.index, files, res.check, lambda);
    nj["benchmark"] = cfg.benchmark;
    nj["config"] = "config.json";
    write_json((fs::path(opt.out_dir) / "network.json").string(), nj);
    write_json((fs::path(opt.out_dir) / "config.json").string(), to_json(cfg));
    written.push_back("network.json");
    written.push_back("config.json");
    if (manifest) {
      manifest->artifacts = written;
      json att = json::array();
      for (auto& a : res.attempts) att.push_back({{"attempt", a.attempt}, {"T", a.T}, {"seed", a.seed}});
      manifest->extra["attempts"] = att;
      manifest->extra["defaulted"] = cfg.defaulted;
      manifest->extra["lambda_max"] = res.check.lambda_max;
      manifest->stages.push_back({"write", since(tw)});
    }
  }
  return res;
}

ComposeResult run_compose(const std::string& certs_dir, const std::string& topology_path, const std::string& out_path,
                          const CompositionSettings& set) {
  CertificateSet cs = load_certificate_set(certs_dir);
  Topology top;
  if (!topology_path.empty()) top = topology_from_json(read_json(topology_path));
  else if (cs.topology) top = *cs.topology;
  else throw MissingArtifact("no topology given and none recorded in " + certs_dir);
  std::vector<int> index = cs.index;
  if (static_cast<int>(index.size()) != top.size()) {
    if (cs.certs.size() != 1)
      throw std::invalid_argument("topology has " + std::to_string(top.size()) + " subsystems but the certificate set has " +
                                  std::to_string(index.size()));
    index.assign(top.size(), 0);  // homogeneous: clone the single certificate
  }
  ComposeResult r;
  r.check = check_composition(top, cs.certs, index, set);
  double lambda = std::numeric_limits<double>::infinity();
  for (int k : index) lambda = std::min(lambda, cs.certs[k].lambda);
  if (r.check.passes) r.cbc = assemble_cbc(cs.certs, index, r.check);
  if (!out_path.empty()) {
    std::vector<std::string> files;
    fs::path base = fs::absolute(fs::path(out_path)).parent_path();
    json certs_json = read_json((fs::path(certs_dir) / "certs.json").string());
    for (auto& f : certs_json.at("files"))
      files.push_back(fs::relative(fs::absolute(fs::path(certs_dir) / f.get<std::string>()), base).string());
    json nj = network_json(top, index, files, r.check, lambda);
    nj["benchmark"] = cs.benchmark;
    fs::path cfg = fs::path(certs_dir) / "config.json";
    if (fs::exists(cfg)) nj["config"] = fs::relative(fs::absolute(cfg), base).string();
    write_json(out_path, nj);
  }
  return r;
}

std::vector<VerificationReport> run_verify(const VerifyOptions& opt) {
  std::vector<VerificationReport> out;
  json report = json::array();
  auto add = [&](const std::string& who, std::vector<VerificationReport> reps) {
    for (auto& r : reps) {
      r.note = who;
      json a = json::array();
      for (int k = 0; k < r.argmin.size(); ++k) a.push_back(r.argmin[k]);
      report.push_back({{"subject", who},
                        {"condition", r.condition},
                        {"samples", r.samples},
                        {"worst_margin", r.worst_margin},
                        {"argmin", a},
                        {"pass", r.pass},
                        {"tol", r.tol},
                        {"seconds", r.seconds}});
      out.push_back(std::move(r));
    }
  };
  if (opt.target == "fixture") {
    std::vector<std::string> ids;
    if (opt.benchmark.empty() || opt.benchmark == "all") ids = benchmark_names();
    else ids = {opt.benchmark};
    for (auto& id : ids) {
      FixtureCertificate fx = load_fixture(id, opt.fixture_dir);
      NetworkModel net = build_benchmark(fx.benchmark, smallest_network(fx.benchmark));
      add(id, verify_fixture(fx, net.representative(), opt.slack, opt.grid));
    }
  } else if (opt.target == "synth") {
    if (opt.certs_dir.empty()) throw std::invalid_argument("verify --target synth needs --certs");
    CertificateSet cs = load_certificate_set(opt.certs_dir);
    std::string bench = opt.benchmark.empty() ? cs.benchmark : opt.benchmark;
    BenchmarkParams params;
    fs::path cfgp = fs::path(opt.certs_dir) / "config.json";
    if (fs::exists(cfgp)) params = load_config(cfgp.string()).benchmark_params();
    int N = static_cast<int>(cs.index.size());
    NetworkModel net = build_benchmark(bench, N, params);
    if (cs.certs.size() == 1) add(bench + "/cert_0", verify_csc(cs.certs[0], net.representative(), opt.grid));
    else
      for (int i = 0; i < N; ++i)
        add(bench + "/subsystem_" + std::to_string(i), verify_csc(cs.certs[cs.index[i]], net.subsystems[i], opt.grid));
  } else {
    throw std::invalid_argument("verify target must be 'fixture' or 'synth'");
  }
  if (!opt.out_path.empty()) write_json(opt.out_path, report);
  return out;
}

SafetyReport run_simulate(const SimulateOptions& opt) {
  NetworkModel net;
  std::optional<BarrierCertificate> cbc;
  if (!opt.network.empty()) {
    json nj = read_json(opt.network);
    fs::path base = fs::path(opt.network).parent_path();
    BenchmarkParams params;
    if (nj.contains("config")) {
      fs::path cp = base / nj["config"].get<std::string>();
      if (fs::exists(cp)) params = load_config(cp.string()).benchmark_params();
    }
    Topology top = topology_from_json(nj.at("topology"));
    net = build_benchmark(nj.at("benchmark").get<std::string>(), top.size(), params);
    std::vector<std::string> files = nj.at("certs").get<std::vector<std::string>>();
    std::vector<StorageCertificate> certs;
    for (auto& f : files) certs.push_back(certificate_from_json(read_json((base / f).string())));
    CompositionCheck chk;
    auto& c = nj.at("check");
    chk.passes = c.at("passes").get<bool>();
    chk.lambda_max = c.at("lambda_max").get<double>();
    chk.psd_tol = c.at("psd_tol").get<double>();
    chk.level_margin = c.at("level_margin").get<double>();
    chk.eta = nj.at("eta").get<double>();
    chk.mu = nj.at("mu").get<double>();
    chk.level_ok = chk.level_margin > 0;
    if (!chk.passes) throw CompositionFailed("network certificate did not pass composition; nothing to simulate");
    cbc = assemble_cbc(certs, nj.at("index").get<std::vector<int>>(), chk);
  } else if (!opt.fixture.empty()) {
    FixtureCertificate fx = load_fixture(opt.fixture);
    int N = opt.N > 0 ? opt.N : fx.N;
    net = build_benchmark(fx.benchmark, N);
    if (opt.open_loop) cbc.reset();
    else cbc = fixture_cbc(fx, N);
  } else if (!opt.benchmark.empty()) {
    if (!opt.open_loop) throw std::invalid_argument("a bare benchmark can only be simulated with --open-loop");
    net = build_benchmark(opt.benchmark, opt.N > 0 ? opt.N : benchmark_defaults(opt.benchmark).N);
  } else {
    throw std::invalid_argument("simulate needs --network, --fixture or --benchmark");
  }
  auto x0 = sample_initial_states(net, opt.sim.samples, opt.sim.seed);
  SafetyReport rep = simulate_network_closed_loop(net, cbc ? &*cbc : nullptr, x0, opt.sim);
  if (!opt.csv.empty()) write_safety_csv(rep, opt.csv);
  if (!opt.dump_csv.empty()) write_trajectory_dump(rep, opt.dump_csv);
  if (!opt.svg.empty()) write_text(opt.svg, safety_svg(rep));
  return rep;
}

namespace {

// random record with the right shapes; only the sparsity pattern matters for counting
TrajectoryRecord shape_record(const SubsystemSpec& spec, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto rnd = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) m(i, k) = U(rng);
    return m;
  };
  TrajectoryRecord rec;
  rec.T = T;
  rec.tau = 0.01;
  rec.U0T = rnd(spec.m, T);
  rec.W0T = rnd(spec.n, T);
  rec.X0T = rnd(spec.n, T);
  rec.X1T = rnd(spec.n, T);
  rec.Psi = MatrixXd::Zero(spec.n, T);
  rec.Psi.leftCols(std::min(spec.n, T)).setIdentity();
  rec.seed = seed;
  return rec;
}

}  // namespace

long dissipation_variable_count(const SubsystemSpec& spec, int T, const SynthSettings& set, std::uint64_t seed) {
  auto dp = assemble_dissipation_problem(shape_record(spec, T, seed), spec, set, set.dissipation_degree);
  return dp.prog.problem().num_scalar_variables();
}

namespace {
long binom(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
long tri(long k) { return k * (k + 1) / 2; }
}  // namespace

long predicted_dissipation_count(int n, int T, int M, int theta_degree, int multiplier_degree, int boxes) {
  long fixed = 4 * tri(n) + static_cast<long>(n) * n + 1;  // S_hat, S <= I slack, Zbar11, Zbar22 slack, Zbar12, alpha
  long Y = binom(n + theta_degree, theta_degree) * (T - M) * n;  // nullspace coefficients of H
  long side = 2L * n + T;
  int h = (std::max(theta_degree, multiplier_degree + 2) + 1) / 2;
  long gram = tri(binom(n + h, h) * side);
  long mult = n * tri(binom(n + multiplier_degree / 2, multiplier_degree / 2) * side);  // one per box coordinate
  return fixed + Y + boxes * (gram + mult);
}

long monolithic_variable_count(const SubsystemSpec& spec, int N, int T, const SynthSettings& set, std::uint64_t seed) {
  int n = spec.n, nN = n * N;
  SubsystemSpec big;
  big.name = spec.name + "_monolithic";
  big.n = nN;
  big.m = spec.m * N;
  big.D = MatrixXd::Zero(nN, nN);  // internal inputs disappear once the network is one system
  std::vector<Monomial> entries;
  for (int b = 0; b < N; ++b)
    for (auto& m : spec.dict.entries()) {
      std::vector<int> e(nN, 0);
      std::copy(m.exps.begin(), m.exps.end(), e.begin() + b * n);
      entries.emplace_back(e);
    }
  // degree-1 block first so the dictionary invariants hold
  std::stable_sort(entries.begin(), entries.end(), [](const Monomial& a, const Monomial& b) { return a.degree() < b.degree(); });
  big.dict = Dictionary(nN, entries);
  big.theta = factorize_theta(big.dict);
  std::vector<Box> boxes;
  Box hx = spec.X.hull();
  VectorXd lo(nN), hi(nN);
  for (int b = 0; b < N; ++b) {
    lo.segment(b * n, n) = hx.lo;
    hi.segment(b * n, n) = hx.hi;
  }
  big.X = Region({Box(lo, hi)});
  big.X0 = big.X;
  big.Xa = big.X;
  big.W = Region({Box(VectorXd::Zero(nN), VectorXd::Zero(nN))});
  big.U = big.W;
  auto dp = assemble_dissipation_problem(shape_record(big, N * T, seed), big, set, set.dissipation_degree);
  return dp.prog.problem().num_scalar_variables();
}

BenchResult run_bench(const RunConfig& cfg, const BenchOptions& opt) {
  BenchResult b;
  b.benchmark = cfg.benchmark;
  std::vector<StorageCertificate> certs;
  if (!opt.certs_dir.empty()) {
    auto cs = load_certificate_set(opt.certs_dir);
    if (cs.certs.size() != 1) throw std::invalid_argument("bench needs a homogeneous certificate set");
    certs = cs.certs;
  } else {
    RunConfig c = cfg;
    c.homogeneous = true;
    certs = run_synth(c, {}).certs;
  }
  NetworkModel small = build_benchmark(cfg.benchmark, smallest_network(cfg.benchmark), cfg.benchmark_params());
  SubsystemSpec spec = small.representative().spec();
  SynthSettings set = cfg.synth_settings();
  b.per_subsystem_vars = dissipation_variable_count(spec, certs[0].T, set, cfg.seed);
  b.monolithic_vars_N3 = monolithic_variable_count(spec, 3, certs[0].T, set, cfg.seed);
  b.observed_factor = static_cast<double>(b.monolithic_vars_N3) / b.per_subsystem_vars;
  {
    int T = certs[0].T, n = spec.n, M = spec.dict.size(), dth = std::max(spec.theta.degree(), 0);
    int boxes = static_cast<int>(spec.X.boxes.size());
    b.predicted_per_subsystem = predicted_dissipation_count(n, T, M, dth, set.dissipation_degree, boxes);
    b.predicted_monolithic_N3 = predicted_dissipation_count(3 * n, 3 * T, 3 * M, dth, set.dissipation_degree, 1);
    b.predicted_factor = static_cast<double>(b.predicted_monolithic_N3) / b.predicted_per_subsystem;
  }

  CompositionSettings cs;
  cs.psd_tol = cfg.psd_tol;
  std::vector<double> xs, ys;
  for (int N : opt.sweep) {
    NetworkModel net = build_benchmark(cfg.benchmark, N, cfg.benchmark_params());
    std::vector<int> index(N, 0);
    double best = std::numeric_limits<double>::infinity();
    CompositionCheck chk;
    for (int r = 0; r < std::max(1, opt.repeats); ++r) {
      auto t0 = Clock::now();
      chk = check_composition(net.topology, certs, index, cs);
      best = std::min(best, since(t0));
    }
    b.rows.push_back({N, N * b.per_subsystem_vars, best, chk.lambda_max});
    xs.push_back(N);
    ys.push_back(static_cast<double>(N * b.per_subsystem_vars));
  }
  // least-squares line through (N, vars)
  double n = static_cast<double>(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double den = n * sxx - sx * sx;
  if (xs.size() >= 2 && den > 0) {
    double slope = (n * sxy - sx * sy) / den, icpt = (sy - slope * sx) / n, mean = sy / n, ssr = 0, sst = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      ssr += std::pow(ys[i] - (slope * xs[i] + icpt), 2);
      sst += std::pow(ys[i] - mean, 2);
    }
    b.r2 = sst > 0 ? 1 - ssr / sst : 1;
  } else {
    b.r2 = 1;
  }
  return b;
}

json to_json(const BenchResult& b) {
  json rows = json::array();
  for (auto& r : b.rows)
    rows.push_back({{"N", r.N}, {"compositional_vars", r.compositional_vars}, {"compose_seconds", r.compose_seconds},
                    {"lambda_max", r.lambda_max}});
  return {{"benchmark", b.benchmark},
          {"per_subsystem_vars", b.per_subsystem_vars},
          {"monolithic_vars_N3", b.monolithic_vars_N3},
          {"observed_factor", b.observed_factor},
          {"predicted_factor", b.predicted_factor},
          {"predicted_per_subsystem", b.predicted_per_subsystem},
          {"predicted_monolithic_N3", b.predicted_monolithic_N3},
          {"r2", b.r2},
          {"rows", rows}};
}

std::string safety_svg(const SafetyReport& r) {
  // one polyline per sample from the dump (subsystem 0 rows)
  std::map<int, std::vector<std::pair<double, double>>> lines;
  for (auto& d : r.dump) {
    if (d.subsystem != 0) continue;
    double v = r.closed_loop ? d.B : d.x[0];
    if (std::isfinite(v)) lines[d.sample].push_back({d.t, v});
  }
  double tmax = 1e-12, vmin = 0, vmax = 1e-12;
  for (auto& [s, pts] : lines)
    for (auto [t, v] : pts) {
      tmax = std::max(tmax, t);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  if (r.closed_loop && r.eta > 0) vmax = std::max(vmax, r.mu > 0 ? r.mu : r.eta);
  const double W = 640, H = 400, pad = 40;
  auto X = [&](double t) { return pad + (W - 2 * pad) * t / tmax; };
  auto Y = [&](double v) { return H - pad - (H - 2 * pad) * (v - vmin) / (vmax - vmin); };
  std::ostringstream os;
  os.precision(5);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad << "\" stroke=\"black\"/>\n";
  for (auto& [s, pts] : lines) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"0.6\" points=\"";
    for (auto [t, v] : pts) os << X(t) << ',' << Y(v) << ' ';
    os << "\"/>\n";
  }
  if (r.closed_loop) {
    for (auto [lvl, col] : {std::pair{r.eta, "green"}, std::pair{r.mu, "red"}}) {
      if (!(lvl > 0)) continue;
      os << "<line x1=\"" << pad << "\" y1=\"" << Y(lvl) << "\" x2=\"" << W - pad << "\" y2=\"" << Y(lvl)
         << "\" stroke=\"" << col << "\" stroke-dasharray=\"4 3\"/>\n";
    }
  }
  os << "<text x=\"" << pad << "\" y=\"" << pad / 2 << "\" font-size=\"12\">" << (r.closed_loop ? "B(x(t))" : "x_1(t)")
     << " vs t, " << lines.size() << " samples</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace barrierforge
