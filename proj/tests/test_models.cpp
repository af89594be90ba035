#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/models.hpp"
#include "barrierforge/testing.hpp"

#include <random>

using namespace barrierforge;

namespace {

VectorXd uniform(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = U(rng);
  return x;
}

int smallest_valid(const std::string& name) { return name.find("binary") != std::string::npos ? 7 : 5; }

}  // namespace

TEST_CASE("lorenz fully: D, X, X0") {
  auto net = build_benchmark("lorenz_fully", 10);
  auto& s = net.subsystems[3].spec();
  CHECK((s.D + 1e-5 * MatrixXd::Identity(3, 3)).norm() == 0.0);
  CHECK(s.X.boxes.size() == 1);
  CHECK(s.X.boxes[0].lo == VectorXd::Constant(3, -20));
  CHECK(s.X0.boxes[0].hi == VectorXd::Constant(3, 3));
}

TEST_CASE("duffing drift coefficients") {
  auto net = build_benchmark("duffing_binary", 7);
  auto& sub = net.subsystems[0];
  const MatrixXd& A = PlantAccess::A(sub);
  auto& d = sub.spec().dict;
  CHECK(A(1, d.index_of(Monomial({1, 0}))) == 2.0);
  CHECK(A(1, d.index_of(Monomial({0, 1}))) == -0.5);
  CHECK(A(1, d.index_of(Monomial({3, 0}))) == -0.01);
  CHECK(A(0, d.index_of(Monomial({0, 1}))) == 1.0);
}

TEST_CASE("chen line: first subsystem has no internal input") {
  auto net = build_benchmark("chen_line", 3);
  auto w0 = net.subsystems[0].spec().W.hull();
  CHECK(w0.lo.norm() == 0.0);
  CHECK(w0.hi.norm() == 0.0);
  CHECK((net.subsystems[1].spec().D + 0.005 * MatrixXd::Identity(3, 3)).norm() < 1e-15);
  VectorXd x = VectorXd::LinSpaced(9, 1, 9);
  VectorXd w = net.topology.matvec(x);
  CHECK(w.head(3).norm() == 0.0);
  CHECK(w.segment(3, 3) == x.head(3));
  CHECK(w.segment(6, 3) == x.segment(3, 3));
}

TEST_CASE("binary topology needs 2^l - 1 subsystems") {
  CHECK_THROWS(build_benchmark("duffing_binary", 6));
  CHECK_NOTHROW(build_benchmark("duffing_binary", 15));
}

TEST_CASE("spacecraft rejects nonpositive inertias") {
  BenchmarkParams p;
  p.inertias = {1.0, 0.0, 1.0};
  CHECK_THROWS(build_benchmark("spacecraft_star", 3, p));
}

TEST_CASE("topology examples") {
  auto line = Topology::make(TopologyKind::line, 2, 1);
  VectorXd x(2);
  x << 3, 5;
  VectorXd w = line.matvec(x);
  CHECK(w[0] == 0);
  CHECK(w[1] == 3);

  auto star = Topology::make(TopologyKind::star, 3, 1);
  VectorXd y(3);
  y << 2, 7, 11;
  VectorXd ws = star.matvec(y);
  CHECK(ws == Eigen::Vector3d(0, 2, 2));

  auto full = Topology::make(TopologyKind::fully, 3, 2, 0.5);
  std::mt19937_64 rng(1);
  VectorXd z = uniform(rng, 6, -1, 1);
  CHECK((full.matvec(z) - full.dense() * z).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((full.matvec_transpose(z) - full.dense().transpose() * z).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("block counts per topology kind") {
  for (int N : {3, 7, 15}) {
    CHECK(Topology::make(TopologyKind::ring, N, 2).blocks().size() == size_t(N));
    CHECK(Topology::make(TopologyKind::line, N, 2).blocks().size() == size_t(N - 1));
    CHECK(Topology::make(TopologyKind::star, N, 2).blocks().size() == size_t(N - 1));
    CHECK(Topology::make(TopologyKind::binary, N, 2).blocks().size() == size_t(N - 1));
    CHECK(Topology::make(TopologyKind::fully, N, 2).blocks().size() == size_t(N * (N - 1)));
    auto t = Topology::make(TopologyKind::fully, N, 2);
    MatrixXd M = t.dense();
    for (int i = 0; i < N; ++i) CHECK(M.block(2 * i, 2 * i, 2, 2).norm() == 0.0);
  }
}

TEST_CASE("network rhs equals stacked subsystem rhs") {
  std::mt19937_64 rng(5);
  for (auto& name : benchmark_names()) {
    int N = smallest_valid(name);
    auto net = build_benchmark(name, N);
    for (int trial = 0; trial < 5; ++trial) {
      VectorXd x = uniform(rng, net.total_dim(), -3, 3);
      VectorXd u = uniform(rng, net.total_inputs(), -1, 1);
      VectorXd dx = net.rhs(x, u);
      VectorXd w = net.topology.matvec(x);
      int uo = 0;
      for (int i = 0; i < N; ++i) {
        int o = net.topology.offsets()[i], n = net.topology.dims()[i], m = net.subsystems[i].spec().m;
        VectorXd ref = net.subsystems[i].rhs(x.segment(o, n), u.segment(uo, m), w.segment(o, n));
        CHECK((dx.segment(o, n) - ref).cwiseAbs().maxCoeff() <= 1e-12 * (1 + ref.norm()));
        uo += m;
      }
    }
  }
}

TEST_CASE("region membership matches the polynomial description") {
  std::mt19937_64 rng(9);
  Box b(Eigen::Vector3d(-1, 0, 2), Eigen::Vector3d(1, 3, 2.5));
  auto cons = b.quadratic_constraints();
  int agree = 0;
  for (int s = 0; s < 10000; ++s) {
    VectorXd x = uniform(rng, 3, -2, 4);
    bool poly = true;
    for (auto& c : cons) poly = poly && c.eval(x) >= 0;
    agree += poly == b.contains(x);
  }
  CHECK(agree == 10000);
}

TEST_CASE("permuted topology relabels consistently") {
  auto t = Topology::make(TopologyKind::binary, 7, 2);
  std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
  auto p = t.permuted(perm);
  MatrixXd P = MatrixXd::Zero(14, 14);
  for (int i = 0; i < 7; ++i) P.block(2 * perm[i], 2 * i, 2, 2).setIdentity();
  CHECK((p.dense() - P * t.dense() * P.transpose()).norm() == 0.0);
}
