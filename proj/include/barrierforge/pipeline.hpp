#pragma once

#include "barrierforge/io.hpp"
#include "barrierforge/verify.hpp"

#include <optional>

namespace barrierforge {

// stable process exit codes
enum ExitCode : int {
  exit_ok = 0,
  exit_verification_failed = 1,
  exit_infeasible = 2,
  exit_retries_exhausted = 3,
  exit_composition_failed = 4,
  exit_missing_artifact = 5,
  exit_usage = 64,
};

struct VerificationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CompositionFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// per-benchmark defaults (N, T, noise bound, reference levels)
struct BenchmarkDefaults {
  int N, T;
  double phi_bar, eta_i, mu_i;
};
const BenchmarkDefaults& benchmark_defaults(const std::string& benchmark);

struct RunConfig {
  std::string benchmark;
  int N = 0;
  double tau = 0.01;
  int T = 0;
  double phi_bar = 0;
  double lambda = 0.99;
  double pi = 1.0;
  std::optional<std::vector<std::vector<int>>> dict;
  std::optional<std::vector<int>> theta;  // 0-based here, 1-based in files
  std::array<double, 3> inertias{2.0, 1.0, 0.5};
  std::uint64_t seed = 1;
  double u_bound = std::numeric_limits<double>::quiet_NaN();
  int dissipation_degree = 0;
  int level_degree = 2;
  int degree_cap = 4;
  int retries = 3;
  double growth = 1.25;
  double psd_tol = 1e-8;
  int workers = 0;
  bool homogeneous = true;
  NoiseDistribution noise = NoiseDistribution::uniform_ball;
  SdpSettings sdp;
  std::vector<std::string> defaulted;  // keys filled from defaults

  BenchmarkParams benchmark_params() const;
  SynthSettings synth_settings() const;
};

RunConfig config_from_json(const json& j);
RunConfig load_config(const std::string& path);
json to_json(const RunConfig& c);

struct StageTime {
  std::string stage;
  double seconds;
};

struct Manifest {
  std::string command, config_path;
  std::uint64_t seed = 0;
  std::string started, finished;
  std::vector<StageTime> stages;
  std::vector<std::string> artifacts;
  int exit_code = 0;
  json extra = json::object();

  json to_json() const;
  void write(const std::string& dir);
};

std::string timestamp_now();

struct SynthResult {
  std::vector<StorageCertificate> certs;
  std::vector<int> index;
  Topology topology;
  CompositionCheck check;
  std::vector<RetryState> attempts;
};

struct SynthOptions {
  std::string out_dir;        // empty: nothing written
  std::string dump_sdp;       // sparse text dump of the first dissipation SDP
  bool verbose = false;
};

// collect -> rank check -> dissipation SDP -> levels -> composition, with T-growth retries
SynthResult run_synth(const RunConfig& cfg, const SynthOptions& opt, Manifest* manifest = nullptr);

// certs.json index in dir: {benchmark, N, index, files}
struct CertificateSet {
  std::string benchmark;
  std::vector<StorageCertificate> certs;
  std::vector<int> index;
  std::optional<Topology> topology;
};
CertificateSet load_certificate_set(const std::string& dir);
void write_certificate_set(const std::string& dir, const std::string& benchmark, const std::vector<StorageCertificate>& certs,
                           const std::vector<int>& index, const Topology& top, std::vector<std::string>* written);

json network_json(const Topology& top, const std::vector<int>& index, const std::vector<std::string>& cert_files,
                  const CompositionCheck& check, double lambda);

struct ComposeResult {
  CompositionCheck check;
  std::optional<BarrierCertificate> cbc;
};
ComposeResult run_compose(const std::string& certs_dir, const std::string& topology_path, const std::string& out_path,
                          const CompositionSettings& set = {});

struct VerifyOptions {
  std::string target = "fixture";  // fixture | synth
  std::string benchmark;           // fixture id, or benchmark of a certificate set
  std::string certs_dir;           // synth target
  std::string fixture_dir = default_fixture_dir();
  std::string out_path;            // JSON report, optional
  GridSettings grid;
  double slack = 0.01;
};
std::vector<VerificationReport> run_verify(const VerifyOptions& opt);

struct SimulateOptions {
  std::string network;   // network.json from synth/compose
  std::string fixture;   // or a fixture id
  std::string benchmark; // with open_loop
  int N = 0;             // network size for fixture/open-loop runs
  bool open_loop = false;
  SimulationSettings sim;
  std::string csv, dump_csv, svg;
};
SafetyReport run_simulate(const SimulateOptions& opt);

struct BenchRow {
  int N;
  long compositional_vars;
  double compose_seconds;
  double lambda_max;
};
struct BenchResult {
  std::string benchmark;
  long per_subsystem_vars = 0;
  long monolithic_vars_N3 = 0;
  long predicted_per_subsystem = 0;  // closed-form counts
  long predicted_monolithic_N3 = 0;
  double predicted_factor = 0;
  double observed_factor = 0;
  double r2 = 0;
  std::vector<BenchRow> rows;
};
struct BenchOptions {
  std::vector<int> sweep{7, 63, 255, 1023};
  std::string certs_dir;  // reuse a certificate; otherwise synthesise from cfg
  int repeats = 5;
};
BenchResult run_bench(const RunConfig& cfg, const BenchOptions& opt);
json to_json(const BenchResult& b);

// scalar variable count of a compiled dissipation problem
long dissipation_variable_count(const SubsystemSpec& spec, int T, const SynthSettings& set, std::uint64_t seed);
// closed-form size of the dissipation program: fixed blocks, nullspace coefficients,
// and per box one Gram block plus n box multipliers
long predicted_dissipation_count(int n, int T, int M, int theta_degree, int multiplier_degree, int boxes);
// the same program posed for an N-fold block-diagonal network with N*T samples
long monolithic_variable_count(const SubsystemSpec& spec, int N, int T, const SynthSettings& set, std::uint64_t seed);

// a plain SVG line chart of B(t) (or x_1 in open loop) per sample
std::string safety_svg(const SafetyReport& r);

}  // namespace barrierforge
