#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/certsynth.hpp"
#include "barrierforge/testing.hpp"
#include "barrierforge/verify.hpp"

#include <Eigen/Eigenvalues>
#include <random>

using namespace barrierforge;

namespace {

// xdot = -x + u, single state, no coupling
SubsystemModel scalar_plant() {
  SubsystemSpec s;
  s.name = "scalar";
  s.n = 1;
  s.m = 1;
  s.D = MatrixXd::Zero(1, 1);
  s.dict = build_dictionary(1, 1);
  s.theta = factorize_theta(s.dict);
  s.X = Region::cube(1, -2, 2);
  s.X0 = Region::cube(1, -0.5, 0.5);
  s.Xa = Region({Box(VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 2.0))});
  s.U = Region::cube(1, -1, 1);
  s.W = Region::cube(1, 0, 0);
  return SubsystemModel(s, MatrixXd::Constant(1, 1, -1.0), MatrixXd::Constant(1, 1, 1.0));
}

double max_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().maxCoeff();
}

const StorageCertificate& duffing_cert() {
  static StorageCertificate c = [] {
    auto net = build_benchmark("duffing_binary", 7);
    auto rep = net.representative();
    auto rec = collect_trajectory(rep, 18, 0.01, {0.08}, 1);
    auto cert = synthesize_csc(rec, rep.spec(), {});
    auto L = compute_levels(cert.P, rep.spec().X0, rep.spec().Xa, 2);
    cert.eta = L.eta;
    cert.mu = L.mu;
    return cert;
  }();
  return c;
}

}  // namespace

TEST_CASE("noiseless scalar plant: feasible, stable closed loop, verified") {
  auto plant = scalar_plant();
  auto rec = collect_trajectory(plant, 6, 0.01, {0.0}, 3);
  auto cert = synthesize_csc(rec, plant.spec(), {});
  CHECK(cert.P(0, 0) > 0);
  // closed loop xdot = (-1 + F) x
  double f = cert.F.eval(VectorXd::Zero(1))(0, 0);
  CHECK(-1.0 + f < 0);
  auto L = compute_levels(cert.P, plant.spec().X0, plant.spec().Xa, 2);
  CHECK(L.eta == doctest::Approx(0.25 * cert.P(0, 0)).epsilon(1e-4));
  CHECK(L.mu == doctest::Approx(2.25 * cert.P(0, 0)).epsilon(1e-4));
  cert.eta = L.eta;
  cert.mu = L.mu;
  GridSettings g;
  g.per_axis = 201;
  for (auto& r : verify_csc(cert, plant, g)) CHECK_MESSAGE(r.pass, r.condition << " margin " << r.worst_margin);
}

TEST_CASE("zero noise removes the alpha term only") {
  auto plant = scalar_plant();
  auto rec = collect_trajectory(plant, 6, 0.01, {0.0}, 3);
  CHECK(rec.PsiPsiT().norm() == 0.0);
  auto dp = assemble_dissipation_problem(rec, plant.spec(), {}, 0);
  CHECK(dp.prog.problem().num_scalar_variables() > 0);
}

TEST_CASE("level sets on simple boxes") {
  MatrixXd I = MatrixXd::Identity(2, 2);
  auto L = compute_levels(I, Region::cube(2, -1, 1), Region({Box(Eigen::Vector2d(2, 0), Eigen::Vector2d(2, 0))}), 2);
  CHECK(std::abs(L.eta - 2.0) <= 1e-4);
  CHECK(std::abs(L.mu - 4.0) <= 1e-4);
}

TEST_CASE("level sets take max over initial boxes and min over unsafe boxes") {
  MatrixXd I = MatrixXd::Identity(1, 1);
  Region X0({Box(VectorXd::Constant(1, -1), VectorXd::Constant(1, 0)), Box(VectorXd::Constant(1, 0), VectorXd::Constant(1, 2))});
  Region Xa({Box(VectorXd::Constant(1, 3), VectorXd::Constant(1, 4)), Box(VectorXd::Constant(1, -6), VectorXd::Constant(1, -5))});
  auto L = compute_levels(I, X0, Xa, 2);
  CHECK(std::abs(L.eta - 4.0) <= 1e-4);
  CHECK(std::abs(L.mu - 9.0) <= 1e-4);
}

TEST_CASE("empty unsafe set is an error") {
  CHECK_THROWS(compute_levels(MatrixXd::Identity(1, 1), Region::cube(1, -1, 1), Region{}, 2));
}

TEST_CASE("controller vanishes at the origin") {
  auto& c = duffing_cert();
  CHECK(eval_local_controller(c, c.U0T, VectorXd::Zero(2)).norm() == 0.0);
}

TEST_CASE("duffing certificate invariants") {
  auto& c = duffing_cert();
  auto net = build_benchmark("duffing_binary", 7);
  auto rep = net.representative();
  auto rec = collect_trajectory(rep, 18, 0.01, {0.08}, 1);
  MatrixXd N0T = build_N0T(rec, rep.spec().dict);

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c.P);
  CHECK(es.eigenvalues().minCoeff() > 0);
  CHECK(equality_residual(c, N0T, rep.spec().theta, 1000, 9, rep.spec().X.boxes[0]) <= 1e-6);
  CHECK((c.Zbar21 - c.Zbar12.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_eig(c.Zbar22) <= 1e-9);
  CHECK((c.Z12 - c.Zbar12 * c.P).cwiseAbs().maxCoeff() <= 1e-12 * (1 + c.Z12.norm()));
  CHECK((c.Z21 - c.Z12.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + c.Z12.norm()));
  CHECK((c.Z22 - c.P * c.Zbar22 * c.P).cwiseAbs().maxCoeff() <= 1e-12 * (1 + c.Z22.norm()));
  CHECK(max_eig(c.Z22) <= 1e-9);
  CHECK(c.eta < c.mu);

  // lambda * pinv(Theta) N0T H(x) is the constant lambda * S
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-10, 10);
  for (int s = 0; s < 50; ++s) {
    VectorXd x(2);
    x << U(rng), U(rng);
    MatrixXd lhs = MatrixXd(theta_left_pinv(rep.spec().theta, x) * N0T * c.H.eval(x)) * c.lambda;
    CHECK((lhs - c.S_inv * c.lambda).cwiseAbs().maxCoeff() <= 1e-8 * (1 + c.S_inv.norm()));
  }
}

TEST_CASE("data-based closed-loop identity with the hidden plant") {
  auto net = build_benchmark("duffing_binary", 7);
  auto rep = net.representative();
  auto rec = collect_trajectory(rep, 18, 0.01, {0.08}, 1);
  auto& c = duffing_cert();
  const MatrixXd& A = PlantAccess::A(rep);
  const MatrixXd& B = PlantAccess::B(rep);
  MatrixXd lhsK = rec.X1T - rep.spec().D * rec.W0T - rec.hidden.Phi;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-10, 10);
  for (int s = 0; s < 200; ++s) {
    VectorXd x(2);
    x << U(rng), U(rng);
    MatrixXd Q = c.Q.eval(x), F = c.F.eval(x), Th = rep.spec().theta.eval(x);
    MatrixXd diff = lhsK * Q - (A * Th + B * F);
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-7 * (1 + (A * Th).norm() + (B * F).norm()));
  }
}

TEST_CASE("an unstable plant the input cannot reach is infeasible") {
  // xdot = x, B = 0: the only gain available comes through the noise, which the bound cancels
  auto base = scalar_plant();
  SubsystemModel plant(base.spec(), MatrixXd::Constant(1, 1, 1.0), MatrixXd::Zero(1, 1));
  auto rec = collect_trajectory(plant, 8, 0.01, {0.1}, 5);
  SynthSettings s;
  s.degree_cap = 0;
  try {
    synthesize_csc(rec, plant.spec(), s);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.lambda == s.lambda);
    CHECK(e.pi == s.pi);
    CHECK(e.degrees == std::vector<int>{0});
  }
}

TEST_CASE("large decay rate with a tiny pi stays feasible on rich data") {
  auto net = build_benchmark("duffing_binary", 7);
  auto rep = net.representative();
  auto rec = collect_trajectory(rep, 18, 0.01, {0.08}, 1);
  SynthSettings s;
  s.lambda = 1e3;
  s.pi = 1e-6;
  s.degree_cap = 0;
  auto c = synthesize_csc(rec, rep.spec(), s);
  CHECK(c.lambda == 1e3);
}

TEST_CASE("rank precondition") {
  auto plant = scalar_plant();
  CHECK_THROWS(collect_trajectory(plant, 1, 0.01, {0.0}, 1));
}
