#pragma once

#include "barrierforge/datagen.hpp"
#include "barrierforge/soscomp.hpp"

#include <cmath>
#include <limits>

namespace barrierforge {

struct InfeasibleError : std::runtime_error {
  double lambda, pi;
  std::vector<int> degrees;
  InfeasibleError(const std::string& what, double l, double p, std::vector<int> d)
      : std::runtime_error(what), lambda(l), pi(p), degrees(std::move(d)) {}
};

struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthSettings {
  double lambda = 0.99;
  double pi = 1.0;
  int dissipation_degree = 0;  // multiplier degree for the dissipation matrix SOS
  int level_degree = 2;        // multiplier degree for the level-set SOS
  int degree_cap = 4;
  double eps = 1e-6;         // S >= eps I
  double s_max = 1.0;        // S <= s_max I (scale normalisation; 0 disables)
  double cond_bound = 0.75;  // S >= cond_bound * s_max I
  double kappa = 0.01;       // Zbar22 <= -kappa S
  double alpha_weight = 1e-4;
  SdpSettings sdp;
};

struct DissipationProblem {
  SosProgram prog;
  ExprMatrix S, Zbar11, Zbar12, Zbar22;
  LinExpr alpha;
  PolyExprMatrix H;
  std::vector<SosHandle> sos;
  double s_offset = 0;  // S = S_hat + s_offset I
};

DissipationProblem assemble_dissipation_problem(const TrajectoryRecord& rec, const SubsystemSpec& spec,
                                                const SynthSettings& set, int multiplier_degree);

struct Provenance {
  std::uint64_t seed = 0;
  std::string benchmark;
  double tau = 0, phi_bar = 0;
  int attempts = 1;
  int multiplier_degree = 0;
  int T_requested = 0;
};

struct StorageCertificate {
  int n = 0, m = 0, T = 0;
  MatrixXd P, S_inv;  // S_inv = S = P^-1
  PolyMatrix H, Q, F;
  MatrixXd Zbar11, Zbar12, Zbar21, Zbar22;
  MatrixXd Z11, Z12, Z21, Z22;
  double alpha = 0, pi = 0, lambda = 0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  MatrixXd U0T;
  Provenance provenance;

  double storage(const VectorXd& x) const { return x.dot(P * x); }
  bool has_levels() const { return std::isfinite(eta) && std::isfinite(mu); }
  // u(x) as an m x 1 polynomial matrix
  PolyMatrix controller() const;
};

StorageCertificate synthesize_csc(const TrajectoryRecord& rec, const SubsystemSpec& spec, const SynthSettings& set);

struct Levels {
  double eta, mu;
};

Levels compute_levels(const MatrixXd& P, const Region& X0, const Region& Xa, int degree,
                      const SdpSettings& sdp = {});

// u = U0T H(x) P x
VectorXd eval_local_controller(const StorageCertificate& cert, const MatrixXd& U0T, const VectorXd& x);

// max over random points of |N0T H(x) - Theta(x) S|
double equality_residual(const StorageCertificate& cert, const MatrixXd& N0T, const PolyMatrix& theta, int samples,
                         std::uint64_t seed, const Box& box);

}  // namespace barrierforge
