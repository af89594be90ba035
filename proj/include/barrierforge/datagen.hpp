#pragma once

#include "barrierforge/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace barrierforge {

struct DivergenceError : std::runtime_error {
  double time;
  DivergenceError(const std::string& what, double t) : std::runtime_error(what), time(t) {}
};

struct CollectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Signal = std::function<VectorXd(double)>;

struct StatePath {
  std::vector<double> t;
  std::vector<VectorXd> x;
};

// Fixed-step RK4. Throws DivergenceError when the state leaves blowup (if given).
StatePath simulate(const SubsystemModel& model, const VectorXd& x0, const Signal& u, const Signal& w, double dt,
                   double horizon, const std::optional<Box>& blowup = std::nullopt);

enum class NoiseDistribution { uniform_ball, scaled_gaussian_clipped };

struct NoiseSpec {
  double phi_bar = 0.0;
  NoiseDistribution distribution = NoiseDistribution::uniform_ball;
};

struct TrajectoryRecord {
  double tau = 0, t0 = 0;
  int T = 0;
  MatrixXd U0T, W0T, X0T, X1T, Psi;
  double phi_bar = 0;
  std::uint64_t seed = 0;
  int attempts = 1;

  // noise realisation; simulator side only, never read by synthesis
  struct Hidden {
    MatrixXd Phi;
  } hidden;

  MatrixXd PsiPsiT() const { return Psi * Psi.transpose(); }
};

struct CollectOptions {
  int max_attempts = 10;
  int substeps = 50;  // RK4 steps per sampling interval
};

TrajectoryRecord collect_trajectory(const SubsystemModel& model, int T, double tau, const NoiseSpec& noise,
                                    std::uint64_t seed, const CollectOptions& opts = {});

MatrixXd build_N0T(const TrajectoryRecord& rec, const Dictionary& dict);

struct RankReport {
  bool full_row_rank;
  double smallest_singular_value;
  double largest_singular_value;
};

RankReport check_rank(const MatrixXd& N0T, double rel_tol = 1e-8);

// CSV: t,u_1..u_m,w_1..w_n,x_1..x_n,xdot_1..xdot_n ; Psi goes to a sidecar JSON
void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& csv_path, const std::string& psi_json_path);
TrajectoryRecord read_trajectory_csv(const std::string& csv_path, const std::string& psi_json_path, int m, int n);

}  // namespace barrierforge
