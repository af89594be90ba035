#include "barrierforge/datagen.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace barrierforge {

namespace {

VectorXd uniform_in(const Box& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  VectorXd x(b.dim());
  for (int k = 0; k < b.dim(); ++k) x[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * U(rng);
  return x;
}

VectorXd noise_draw(int n, const NoiseSpec& spec, std::mt19937_64& rng) {
  if (spec.phi_bar <= 0.0) return VectorXd::Zero(n);
  double radius = std::sqrt(spec.phi_bar);
  std::normal_distribution<double> G(0.0, 1.0);
  VectorXd g(n);
  for (int k = 0; k < n; ++k) g[k] = G(rng);
  if (spec.distribution == NoiseDistribution::uniform_ball) {
    double nrm = g.norm();
    if (nrm == 0.0) return VectorXd::Zero(n);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double r = radius * std::pow(U(rng), 1.0 / n);
    return g * (r / nrm);
  }
  // gaussian with 2-sigma at the bound, then clipped onto the ball
  g *= radius / (2.0 * std::sqrt(static_cast<double>(n)));
  double nrm = g.norm();
  if (nrm > radius) g *= radius / nrm;
  return g;
}

VectorXd rk4_step(const SubsystemModel& m, const VectorXd& x, const VectorXd& u, const VectorXd& w, double h) {
  VectorXd k1 = m.rhs(x, u, w);
  VectorXd k2 = m.rhs(x + 0.5 * h * k1, u, w);
  VectorXd k3 = m.rhs(x + 0.5 * h * k2, u, w);
  VectorXd k4 = m.rhs(x + h * k3, u, w);
  return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

StatePath simulate(const SubsystemModel& model, const VectorXd& x0, const Signal& u, const Signal& w, double dt,
                   double horizon, const std::optional<Box>& blowup) {
  if (!(dt > 0)) throw std::invalid_argument("simulate needs dt > 0");
  // the last step is shortened so the path ends exactly at the horizon
  int steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  StatePath p;
  p.t.reserve(steps + 1);
  p.x.reserve(steps + 1);
  VectorXd x = x0;
  p.t.push_back(0.0);
  p.x.push_back(x);
  for (int s = 0; s < steps; ++s) {
    double t = s * dt;
    double h = std::min(dt, horizon - t);
    // input held over the step (zero-order hold at the step start)
    VectorXd uk = u(t), wk = w(t);
    x = rk4_step(model, x, uk, wk, h);
    double tn = s + 1 == steps ? horizon : (s + 1) * dt;
    if (!x.allFinite() || (blowup && !blowup->contains(x))) {
      std::ostringstream os;
      os << "state left the blow-up box at t = " << tn;
      throw DivergenceError(os.str(), tn);
    }
    p.t.push_back(tn);
    p.x.push_back(x);
  }
  return p;
}

TrajectoryRecord collect_trajectory(const SubsystemModel& model, int T, double tau, const NoiseSpec& noise,
                                    std::uint64_t seed, const CollectOptions& opts) {
  const auto& s = model.spec();
  int M = s.dict.size();
  if (T < M + 1)
    throw CollectionError("sample count T = " + std::to_string(T) + " is below the minimum M + 1 = " +
                          std::to_string(M + 1));
  if (!(tau > 0)) throw std::invalid_argument("sampling interval must be positive");
  if (noise.phi_bar < 0) throw std::invalid_argument("phi_bar must be non-negative");

  std::mt19937_64 rng(seed);
  Box X0 = s.X0.hull(), U = s.U.hull(), W = s.W.hull();
  double h = tau / opts.substeps;
  std::string last_failure;

  for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
    TrajectoryRecord rec;
    rec.tau = tau;
    rec.T = T;
    rec.phi_bar = noise.phi_bar;
    rec.seed = seed;
    rec.attempts = attempt;
    rec.U0T.resize(s.m, T);
    rec.W0T.resize(s.n, T);
    rec.X0T.resize(s.n, T);
    rec.X1T.resize(s.n, T);
    rec.hidden.Phi.resize(s.n, T);

    VectorXd x = uniform_in(X0, rng);
    bool escaped = false;
    for (int k = 0; k < T && !escaped; ++k) {
      VectorXd uk = uniform_in(U, rng), wk = uniform_in(W, rng);
      VectorXd phi = noise_draw(s.n, noise, rng);
      rec.U0T.col(k) = uk;
      rec.W0T.col(k) = wk;
      rec.X0T.col(k) = x;
      rec.X1T.col(k) = model.rhs(x, uk, wk) + phi;
      rec.hidden.Phi.col(k) = phi;
      if (k + 1 == T) break;
      for (int j = 0; j < opts.substeps; ++j) {
        x = rk4_step(model, x, uk, wk, h);
        if (!x.allFinite() || !s.X.contains(x)) {
          escaped = true;
          break;
        }
      }
    }
    if (escaped) {
      last_failure = "state escaped X during collection";
      continue;
    }
    auto rank = check_rank(build_N0T(rec, s.dict));
    if (!rank.full_row_rank) {
      last_failure = "N0T is not full row rank (smallest singular value " +
                     std::to_string(rank.smallest_singular_value) + ")";
      continue;
    }
    rec.Psi = MatrixXd::Zero(s.n, T);
    rec.Psi.leftCols(s.n) = std::sqrt(noise.phi_bar * T) * MatrixXd::Identity(s.n, s.n);
    return rec;
  }
  throw CollectionError("trajectory collection failed after " + std::to_string(opts.max_attempts) +
                        " attempts: " + last_failure);
}

MatrixXd build_N0T(const TrajectoryRecord& rec, const Dictionary& dict) {
  if (rec.X0T.rows() != dict.nvars()) throw std::invalid_argument("record and dictionary dimensions differ");
  MatrixXd N(dict.size(), rec.X0T.cols());
  for (int k = 0; k < rec.X0T.cols(); ++k) N.col(k) = dict.eval(rec.X0T.col(k));
  return N;
}

RankReport check_rank(const MatrixXd& N0T, double rel_tol) {
  Eigen::JacobiSVD<MatrixXd> svd(N0T);
  auto sv = svd.singularValues();
  RankReport r{false, 0.0, 0.0};
  if (sv.size() == 0) return r;
  r.largest_singular_value = sv[0];
  // fewer columns than rows: a zero singular value is implied
  r.smallest_singular_value = N0T.cols() < N0T.rows() ? 0.0 : sv[sv.size() - 1];
  r.full_row_rank = r.smallest_singular_value > rel_tol * r.largest_singular_value;
  return r;
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& csv_path, const std::string& psi_json_path) {
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("cannot write " + csv_path);
  int m = static_cast<int>(rec.U0T.rows()), n = static_cast<int>(rec.X0T.rows());
  f << "t";
  for (int i = 1; i <= m; ++i) f << ",u_" << i;
  for (int i = 1; i <= n; ++i) f << ",w_" << i;
  for (int i = 1; i <= n; ++i) f << ",x_" << i;
  for (int i = 1; i <= n; ++i) f << ",xdot_" << i;
  f << '\n';
  f.precision(17);
  for (int k = 0; k < rec.T; ++k) {
    f << rec.t0 + k * rec.tau;
    for (int i = 0; i < m; ++i) f << ',' << rec.U0T(i, k);
    for (int i = 0; i < n; ++i) f << ',' << rec.W0T(i, k);
    for (int i = 0; i < n; ++i) f << ',' << rec.X0T(i, k);
    for (int i = 0; i < n; ++i) f << ',' << rec.X1T(i, k);
    f << '\n';
  }
  nlohmann::json j;
  j["tau"] = rec.tau;
  j["t0"] = rec.t0;
  j["T"] = rec.T;
  j["phi_bar"] = rec.phi_bar;
  j["seed"] = rec.seed;
  j["Psi"] = nlohmann::json::array();
  for (int i = 0; i < rec.Psi.rows(); ++i) {
    std::vector<double> row(rec.Psi.cols());
    for (int k = 0; k < rec.Psi.cols(); ++k) row[k] = rec.Psi(i, k);
    j["Psi"].push_back(row);
  }
  std::ofstream g(psi_json_path);
  if (!g) throw std::runtime_error("cannot write " + psi_json_path);
  g << j.dump(2) << '\n';
}

TrajectoryRecord read_trajectory_csv(const std::string& csv_path, const std::string& psi_json_path, int m, int n) {
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("cannot read " + csv_path);
  std::string line;
  std::getline(f, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    if (static_cast<int>(r.size()) != 1 + m + 3 * n) throw std::runtime_error("malformed trajectory row in " + csv_path);
    rows.push_back(std::move(r));
  }
  TrajectoryRecord rec;
  rec.T = static_cast<int>(rows.size());
  rec.U0T.resize(m, rec.T);
  rec.W0T.resize(n, rec.T);
  rec.X0T.resize(n, rec.T);
  rec.X1T.resize(n, rec.T);
  for (int k = 0; k < rec.T; ++k) {
    auto& r = rows[k];
    for (int i = 0; i < m; ++i) rec.U0T(i, k) = r[1 + i];
    for (int i = 0; i < n; ++i) {
      rec.W0T(i, k) = r[1 + m + i];
      rec.X0T(i, k) = r[1 + m + n + i];
      rec.X1T(i, k) = r[1 + m + 2 * n + i];
    }
  }
  std::ifstream g(psi_json_path);
  if (!g) throw std::runtime_error("cannot read " + psi_json_path);
  auto j = nlohmann::json::parse(g);
  rec.tau = j.at("tau");
  rec.t0 = j.value("t0", 0.0);
  rec.phi_bar = j.at("phi_bar");
  rec.seed = j.value("seed", std::uint64_t{0});
  auto psi = j.at("Psi");
  rec.Psi.resize(psi.size(), rec.T);
  for (size_t i = 0; i < psi.size(); ++i)
    for (int k = 0; k < rec.T; ++k) rec.Psi(i, k) = psi[i].at(k).get<double>();
  return rec;
}

}  // namespace barrierforge
