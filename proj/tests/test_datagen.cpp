#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/datagen.hpp"
#include "barrierforge/testing.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace barrierforge;

namespace {

SubsystemModel oscillator() {
  SubsystemSpec s;
  s.name = "osc";
  s.n = 2;
  s.m = 1;
  s.D = MatrixXd::Zero(2, 2);
  s.dict = build_dictionary(2, 1);
  s.theta = factorize_theta(s.dict);
  s.X = Region::cube(2, -5, 5);
  s.X0 = Region::cube(2, -1, 1);
  s.Xa = Region({Box(Eigen::Vector2d(4, 4), Eigen::Vector2d(5, 5))});
  s.U = Region::cube(1, -1, 1);
  s.W = Region::cube(2, 0, 0);
  MatrixXd A(2, 2);
  A << 0, 1, -1, 0;
  return SubsystemModel(s, A, MatrixXd::Zero(2, 1));
}

Signal zero(int k) {
  return [k](double) { return VectorXd(VectorXd::Zero(k)); };
}

}  // namespace

TEST_CASE("rk4 oscillator closes its orbit") {
  auto m = oscillator();
  auto path = simulate(m, Eigen::Vector2d(1, 0), zero(1), zero(2), 1e-3, 2 * std::numbers::pi);
  VectorXd end = path.x.back();
  CHECK(std::abs(path.t.back() - 2 * std::numbers::pi) < 1e-3);
  // the last step is shortened to land on the horizon
  CHECK((end - Eigen::Vector2d(1, 0)).norm() <= 1e-6);
}

TEST_CASE("zero dynamics stay put") {
  auto net = build_benchmark("duffing_binary", 3);
  auto path = simulate(net.subsystems[0], Eigen::Vector2d(0, 0), zero(2), zero(2), 1e-2, 1.0);
  for (auto& x : path.x) CHECK(x.norm() == 0.0);
}

TEST_CASE("divergence is reported") {
  SubsystemSpec s = oscillator().spec();
  MatrixXd A = MatrixXd::Identity(2, 2) * 5;
  SubsystemModel m(s, A, MatrixXd::Zero(2, 1));
  CHECK_THROWS_AS(simulate(m, Eigen::Vector2d(1, 1), zero(1), zero(2), 1e-3, 10, Box(Eigen::Vector2d(-10, -10), Eigen::Vector2d(10, 10))),
                  DivergenceError);
}

TEST_CASE("noise envelope follows the scalar bound") {
  auto net = build_benchmark("duffing_binary", 7);
  auto rec = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 1);
  CHECK((rec.PsiPsiT() - 1.44 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  auto lor = build_benchmark("lorenz_fully", 4);
  auto rl = collect_trajectory(lor.representative(), 15, 0.01, {0.03}, 1);
  CHECK((rl.PsiPsiT() - 0.45 * MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("every noise draw respects the energy bound") {
  auto net = build_benchmark("duffing_binary", 7);
  for (auto dist : {NoiseDistribution::uniform_ball, NoiseDistribution::scaled_gaussian_clipped}) {
    auto rec = collect_trajectory(net.representative(), 18, 0.01, {0.08, dist}, 11);
    for (int k = 0; k < rec.T; ++k) CHECK(rec.hidden.Phi.col(k).squaredNorm() <= 0.08 + 1e-15);
    MatrixXd gap = rec.PsiPsiT() - rec.hidden.Phi * rec.hidden.Phi.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(gap);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("noiseless derivatives are exact") {
  auto net = build_benchmark("duffing_binary", 7);
  auto sub = net.representative();
  auto rec = collect_trajectory(sub, 18, 0.01, {0.0}, 2);
  MatrixXd exact = PlantAccess::A(sub) * build_N0T(rec, sub.spec().dict) + PlantAccess::B(sub) * rec.U0T + sub.spec().D * rec.W0T;
  CHECK((rec.X1T - exact).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("inputs stay inside their boxes") {
  auto net = build_benchmark("duffing_binary", 7);
  auto sub = net.representative();
  auto rec = collect_trajectory(sub, 30, 0.01, {0.08}, 3);
  for (int k = 0; k < rec.T; ++k) {
    CHECK(sub.spec().U.contains(rec.U0T.col(k), 1e-12));
    CHECK(sub.spec().W.contains(rec.W0T.col(k), 1e-12));
    CHECK(sub.spec().X.contains(rec.X0T.col(k)));
  }
}

TEST_CASE("collection is deterministic under a seed") {
  auto net = build_benchmark("duffing_binary", 7);
  auto a = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 42);
  auto b = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 42);
  CHECK(a.X1T == b.X1T);
  CHECK(a.U0T == b.U0T);
  auto c = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 43);
  CHECK(a.X1T != c.X1T);
}

TEST_CASE("T below M + 1 is rejected") {
  auto net = build_benchmark("duffing_binary", 7);
  CHECK_THROWS_AS(collect_trajectory(net.representative(), 9, 0.01, {0.08}, 1), CollectionError);
  CHECK_NOTHROW(collect_trajectory(net.representative(), 10, 0.01, {0.08}, 1));
}

TEST_CASE("N0T columns") {
  TrajectoryRecord r;
  r.T = 3;
  r.X0T = MatrixXd(1, 3);
  r.X0T << 1, 2, 3;
  CHECK(build_N0T(r, build_dictionary(1, 1)) == r.X0T);
  TrajectoryRecord q;
  q.T = 1;
  q.X0T = Eigen::Vector2d(2, 3);
  auto N = build_N0T(q, dictionary_from_exponents(2, {{1, 0}, {0, 1}, {1, 1}}));
  CHECK(N.col(0) == Eigen::Vector3d(2, 3, 6));
}

TEST_CASE("N0T matches theta(x) x") {
  auto net = build_benchmark("duffing_binary", 7);
  auto& spec = net.subsystems[0].spec();
  auto rec = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 1);
  MatrixXd N = build_N0T(rec, spec.dict);
  for (int k = 0; k < rec.T; ++k) {
    VectorXd x = rec.X0T.col(k);
    CHECK((N.col(k) - spec.theta.eval(x) * x).cwiseAbs().maxCoeff() <= 1e-12 * (1 + N.col(k).norm()));
  }
}

TEST_CASE("rank check") {
  CHECK(check_rank(MatrixXd::Identity(2, 2)).full_row_rank);
  MatrixXd p(2, 2);
  p << 1, 2, 2, 4;
  CHECK_FALSE(check_rank(p).full_row_rank);
  auto net = build_benchmark("duffing_binary", 7);
  auto rec = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 5);
  CHECK(check_rank(build_N0T(rec, net.subsystems[0].spec().dict)).full_row_rank);
}

TEST_CASE("trajectory csv round trip") {
  auto net = build_benchmark("duffing_binary", 7);
  auto rec = collect_trajectory(net.representative(), 18, 0.01, {0.08}, 5);
  auto dir = std::filesystem::temp_directory_path() / "bf_traj_test";
  std::filesystem::create_directories(dir);
  write_trajectory_csv(rec, (dir / "t.csv").string(), (dir / "psi.json").string());
  auto back = read_trajectory_csv((dir / "t.csv").string(), (dir / "psi.json").string(), 2, 2);
  CHECK(back.T == rec.T);
  CHECK((back.X1T - rec.X1T).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.Psi - rec.Psi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.U0T - rec.U0T).cwiseAbs().maxCoeff() < 1e-12);
}
