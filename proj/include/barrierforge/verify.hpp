#pragma once

#include "barrierforge/composer.hpp"

namespace barrierforge {

struct GridSettings {
  int per_axis = 50;
  int w_per_axis = 11;
  double tol = 1e-6;
  int workers = 0;
};

struct VerificationReport {
  std::string condition;  // "6a", "6b", "7"
  long samples = 0;
  double worst_margin = 0;  // normalised; >= -tol passes
  VectorXd argmin;
  bool pass = false;
  double tol = 0;
  double seconds = 0;
  std::string note;
};

// "6a": eta - S on X0, "6b": S - mu on Xa, both divided by max(1, level);
// "7": [-lambda S + s(w,x)] - LS(x) with u from the certificate, divided by 1 + |S|
std::vector<VerificationReport> verify_csc(const StorageCertificate& cert, const SubsystemModel& model,
                                           const GridSettings& grid = {});

struct FixtureCertificate {
  std::string benchmark;
  int n = 0, m = 0, N = 0, T = 0;
  std::string topology;
  double phi_bar = 0;
  Polynomial S;
  MatrixXd P;
  PolyMatrix controller;  // m x 1
  double eta_i = 0, mu_i = 0;
  double eta = 0, mu = 0, lambda = 0;
  double checksum = 0;
};

std::string default_fixture_dir();
FixtureCertificate load_fixture(const std::string& id, const std::string& dir = default_fixture_dir());

// level conditions against the stored eta_i, mu_i with relative slack
std::vector<VerificationReport> verify_fixture(const FixtureCertificate& fx, const SubsystemModel& model,
                                               double slack = 0.01, const GridSettings& grid = {});

LocalCertificate local_certificate(const FixtureCertificate& fx);
// the network CBC built from a fixture; the fixtures carry no Z blocks, so no composition check is attached
BarrierCertificate fixture_cbc(const FixtureCertificate& fx, int N);

struct QuadraticExtrema {
  double min, max;
  VectorXd argmin, argmax;
};
// exact extrema of x'Px (P > 0) over a box: vertices for the max, face-restricted stationary points for the min
QuadraticExtrema quadratic_box_extrema(const MatrixXd& P, const Box& box);

struct SimulationSettings {
  int samples = 120;
  double horizon = 20;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  double decay_tol = 1e-3;
  int dump_every = 0;  // 0: no trajectory dump
  int workers = 0;
  double blowup = 1e6;
};

struct TrajectorySummary {
  int sample = 0;
  bool unsafe_entered = false;
  double entry_time = -1;
  double max_B = 0;
  double min_decay_margin = 0;
  long decay_checked = 0, decay_ok = 0;
  bool diverged = false;
  double end_time = 0;
};

struct DumpRow {
  int sample;
  double t;
  int subsystem;
  VectorXd x;
  double B;
};

struct SafetyReport {
  std::vector<TrajectorySummary> rows;
  std::vector<DumpRow> dump;
  int unsafe_count = 0;
  double max_B = 0;
  double eta = 0, mu = 0, lambda = 0;
  double decay_fraction = 1;
  double seconds = 0;
  bool closed_loop = true;
};

std::vector<VectorXd> sample_initial_states(const NetworkModel& net, int count, std::uint64_t seed);

// cbc == nullptr runs the network open loop (u = 0)
SafetyReport simulate_network_closed_loop(const NetworkModel& net, const BarrierCertificate* cbc,
                                          const std::vector<VectorXd>& x0, const SimulationSettings& set);

void write_safety_csv(const SafetyReport& r, const std::string& path);
void write_trajectory_dump(const SafetyReport& r, const std::string& path);

}  // namespace barrierforge
