#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <random>
#include <sstream>

using namespace barrierforge;

namespace {

// min <C, X> s.t. trace X = 1, X psd
SdpProblem trace_one(const MatrixXd& C) {
  SdpProblem p;
  int n = static_cast<int>(C.rows());
  int b = p.add_block("X", BlockKind::psd, n);
  LinearConstraint tr;
  for (int i = 0; i < n; ++i) tr.terms.push_back({b, i, i, 1.0});
  tr.rhs = 1;
  p.equalities.push_back(tr);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) p.objective.push_back({b, i, j, i == j ? C(i, i) : 2 * C(i, j)});
  p.has_objective = true;
  return p;
}

}  // namespace

TEST_CASE("min trace with a pinned corner") {
  SdpProblem p;
  int b = p.add_block("X", BlockKind::psd, 3);
  p.equalities.push_back({{{b, 0, 0, 1.0}}, 1.0});
  for (int i = 0; i < 3; ++i) p.objective.push_back({b, i, i, 1.0});
  p.has_objective = true;
  auto s = solve(p);
  REQUIRE(s.ok());
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
  MatrixXd X = s.values[b];
  MatrixXd E = MatrixXd::Zero(3, 3);
  E(0, 0) = 1;
  CHECK((X - E).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("negative diagonal is infeasible") {
  SdpProblem p;
  int b = p.add_block("X", BlockKind::psd, 2);
  p.equalities.push_back({{{b, 0, 0, 1.0}}, -1.0});
  auto s = solve(p);
  CHECK(s.status == SdpStatus::infeasible);
}

TEST_CASE("trace-one problem returns the smallest eigenvalue") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = g(rng);
    MatrixXd C = A * A.transpose() + 0.1 * MatrixXd::Identity(3, 3);
    auto s = solve(trace_one(C));
    REQUIRE(s.ok());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
    CHECK(std::abs(s.primal_objective - es.eigenvalues()[0]) <= 1e-6);
  }
}

TEST_CASE("solutions carry residual and eigenvalue certificates") {
  MatrixXd C = MatrixXd::Identity(4, 4);
  C(0, 1) = C(1, 0) = 0.3;
  auto s = solve(trace_one(C));
  REQUIRE(s.ok());
  CHECK(s.primal_residual <= 1e-7);
  CHECK(s.min_psd_eigenvalue >= -1e-8);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.values[0]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("repeat solves agree") {
  MatrixXd C(3, 3);
  C << 2, 0.5, 0.1, 0.5, 1, 0.2, 0.1, 0.2, 3;
  auto a = solve(trace_one(C)), b = solve(trace_one(C));
  CHECK(std::abs(a.primal_objective - b.primal_objective) <= 1e-9);
}

TEST_CASE("free and nonnegative blocks") {
  // min x + y, x >= 0, y free, x - y = 1, y = 2 - z with z >= 0 and z = 0.5
  SdpProblem p;
  int x = p.add_block("x", BlockKind::nonneg, 1);
  int y = p.add_block("y", BlockKind::free, 1);
  int z = p.add_block("z", BlockKind::nonneg, 1);
  p.equalities.push_back({{{x, 0, 0, 1.0}, {y, 0, 0, -1.0}}, 1.0});
  p.equalities.push_back({{{y, 0, 0, 1.0}, {z, 0, 0, 1.0}}, 2.0});
  p.equalities.push_back({{{z, 0, 0, 1.0}}, 0.5});
  p.objective = {{x, 0, 0, 1.0}, {y, 0, 0, 1.0}};
  p.has_objective = true;
  auto s = solve(p);
  REQUIRE(s.ok());
  CHECK(s.scalar(x) == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(s.scalar(y) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("validate rejects bad references") {
  SdpProblem p;
  p.add_block("X", BlockKind::psd, 2);
  p.equalities.push_back({{{1, 0, 0, 1.0}}, 1.0});
  CHECK_THROWS(p.validate());
  SdpProblem q;
  q.add_block("X", BlockKind::psd, 2);
  q.equalities.push_back({{{0, 1, 0, 1.0}}, 1.0});  // psd entries need row <= col
  CHECK_THROWS(q.validate());
}

TEST_CASE("sparse text dump") {
  SdpProblem p;
  int b = p.add_block("X", BlockKind::psd, 2);
  p.equalities.push_back({{{b, 0, 1, 2.5}}, 1.0});
  std::ostringstream os;
  p.dump(os);
  CHECK(os.str().find("(0, 0, 0, 1, 2.5)") != std::string::npos);
  CHECK(os.str().find("(0, rhs, 0, 0, 1)") != std::string::npos);
  CHECK(p.num_scalar_variables() == 3);
}

TEST_CASE("sdpa writer") {
  SdpProblem p;
  int b = p.add_block("X", BlockKind::psd, 2);
  p.equalities.push_back({{{b, 0, 0, 1.0}}, 1.0});
  std::ostringstream os;
  write_sdpa(p, os);
  CHECK(os.str().rfind("1\n1\n2 \n", 0) == 0);
  CHECK(os.str().find("1 1 1 1 1") != std::string::npos);
}

TEST_CASE("lanczos on simple operators") {
  auto negI = [](const VectorXd& x) { return VectorXd(-x); };
  CHECK(lambda_max_structured(negI, 100) == doctest::Approx(-1.0).epsilon(1e-10));
  VectorXd d = VectorXd::LinSpaced(5, 1, 5);
  auto diag = [&](const VectorXd& x) { return VectorXd(d.cwiseProduct(x)); };
  CHECK(std::abs(lambda_max_structured(diag, 5) - 5.0) <= 1e-8);
}

TEST_CASE("lanczos agrees with a dense eigensolver") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  MatrixXd A(60, 60);
  for (int i = 0; i < 3600; ++i) A(i / 60, i % 60) = g(rng);
  MatrixXd S = A + A.transpose();
  auto op = [&](const VectorXd& x) { return VectorXd(S * x); };
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  CHECK(std::abs(lambda_max_structured(op, 60, 1e-10) - es.eigenvalues().maxCoeff()) <= 1e-8 * es.eigenvalues().cwiseAbs().maxCoeff());
}

TEST_CASE("nonsymmetric operators are rejected") {
  MatrixXd A = MatrixXd::Zero(4, 4);
  A(0, 1) = 1;
  auto op = [&](const VectorXd& x) { return VectorXd(A * x); };
  CHECK_THROWS(lambda_max_structured(op, 4));
}
