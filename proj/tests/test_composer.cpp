#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/composer.hpp"

#include <Eigen/Eigenvalues>
#include <numeric>
#include <random>

using namespace barrierforge;

namespace {

SupplyRate rate(int n, double z11, double z12, double z22) {
  MatrixXd I = MatrixXd::Identity(n, n);
  return {MatrixXd(I * z11), MatrixXd(I * z12), MatrixXd(I * z12), MatrixXd(I * z22)};
}

SupplyRate random_rate(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  auto rnd = [&] {
    MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = N(rng);
    return m;
  };
  MatrixXd a = rnd(), b = rnd(), c = rnd();
  MatrixXd z11 = a + a.transpose(), z22 = -(c * c.transpose()) - MatrixXd::Identity(n, n);
  return {z11, b, b.transpose(), z22};
}

double dense_max(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().maxCoeff();
}

StorageCertificate cert_with(const SupplyRate& r, double eta, double mu) {
  StorageCertificate c;
  c.n = static_cast<int>(r.Z22.rows());
  c.P = MatrixXd::Identity(c.n, c.n);
  c.Z11 = r.Z11;
  c.Z12 = r.Z12;
  c.Z21 = r.Z21;
  c.Z22 = r.Z22;
  c.eta = eta;
  c.mu = mu;
  c.lambda = 0.99;
  c.F = PolyMatrix(1, c.n, c.n);
  return c;
}

}  // namespace

TEST_CASE("trivially dissipative rates compose; expansive ones do not") {
  auto top = Topology::make(TopologyKind::ring, 5, 2);
  ZComp good({rate(2, 0, 0, -1)}, std::vector<int>(5, 0));
  auto c = check_composition(top, good, 1, 2);
  CHECK(c.passes);
  CHECK(c.lambda_max == doctest::Approx(-1).epsilon(1e-8));

  ZComp bad({rate(2, 0, 0, 1)}, std::vector<int>(5, 0));
  auto d = check_composition(top, bad, 1, 2);
  CHECK_FALSE(d.passes);
  CHECK(d.lambda_max == doctest::Approx(1).epsilon(1e-8));
}

TEST_CASE("level condition enters the verdict") {
  auto top = Topology::make(TopologyKind::line, 3, 1);
  ZComp z({rate(1, 0, 0, -1)}, {0, 0, 0});
  auto c = check_composition(top, z, 3, 2);
  CHECK_FALSE(c.level_ok);
  CHECK_FALSE(c.passes);
}

TEST_CASE("structured operator matches the dense product") {
  std::mt19937_64 rng(11);
  for (auto kind : {TopologyKind::fully, TopologyKind::ring, TopologyKind::binary, TopologyKind::star, TopologyKind::line}) {
    int N = 15, n = 3;
    auto top = Topology::make(kind, N, n, 0.3);
    std::vector<SupplyRate> rates{random_rate(n, rng), random_rate(n, rng)};
    std::vector<int> idx(N);
    for (int i = 0; i < N; ++i) idx[i] = i % 2;
    ZComp z(rates, idx);
    MatrixXd D = composed_dense(top, z);
    auto op = composed_operator(top, z);
    std::normal_distribution<double> G(0, 1);
    for (int k = 0; k < 5; ++k) {
      VectorXd v(top.total_dim());
      for (auto& e : v) e = G(rng);
      CHECK((op(v) - D * v).norm() <= 1e-10 * (1 + D.norm() * v.norm()));
    }
    auto r = lanczos_max(op, top.total_dim(), 1e-12, 3);
    CHECK(r.converged);
    CHECK(std::abs(r.value - dense_max(D)) <= 1e-8 * (1 + std::abs(r.value)));
  }
}

TEST_CASE("eigenvalue is invariant under subsystem relabelling") {
  std::mt19937_64 rng(5);
  int N = 7, n = 2;
  auto top = Topology::make(TopologyKind::binary, N, n, 0.5);
  std::vector<SupplyRate> rates;
  for (int i = 0; i < N; ++i) rates.push_back(random_rate(n, rng));
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  double base = dense_max(composed_dense(top, ZComp(rates, idx)));

  std::vector<int> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto ptop = top.permuted(perm);
  // old subsystem i now sits at position perm[i]
  std::vector<int> pidx(N);
  for (int i = 0; i < N; ++i) pidx[perm[i]] = i;
  double moved = dense_max(composed_dense(ptop, ZComp(rates, pidx)));
  CHECK(std::abs(base - moved) <= 1e-9 * (1 + std::abs(base)));
}

TEST_CASE("mismatched dimensions are rejected") {
  auto top = Topology::make(TopologyKind::ring, 3, 2);
  ZComp z({rate(3, 0, 0, -1)}, {0, 0, 0});
  CHECK_THROWS(composed_operator(top, z));
  CHECK_THROWS(ZComp({rate(2, 0, 0, -1)}, {0, 1}));
}

TEST_CASE("cbc assembly sums levels and refuses failed checks") {
  auto top = Topology::make(TopologyKind::ring, 4, 2);
  std::vector<StorageCertificate> certs{cert_with(rate(2, 0, 0, -1), 1.5, 4.0)};
  std::vector<int> idx(4, 0);
  auto chk = check_composition(top, certs, idx);
  CHECK(chk.passes);
  CHECK(chk.eta == doctest::Approx(6.0));
  CHECK(chk.mu == doctest::Approx(16.0));
  auto cbc = assemble_cbc(certs, idx, chk);
  CHECK(cbc.eta == doctest::Approx(6.0));
  CHECK(cbc.mu == doctest::Approx(16.0));
  VectorXd x = VectorXd::Ones(8);
  CHECK(cbc.value(top, x) == doctest::Approx(8.0));

  std::vector<StorageCertificate> bad{cert_with(rate(2, 0, 0, 1), 1.5, 4.0)};
  auto fail = check_composition(top, bad, idx);
  CHECK_FALSE(fail.passes);
  CHECK_THROWS_AS(assemble_cbc(bad, idx, fail), CompositionRefused);
}

TEST_CASE("flipping the sign of the coupling block can break composition") {
  // fully coupled, N = 3: M + M' has eigenvalues 4 and -2
  auto top = Topology::make(TopologyKind::fully, 3, 1);
  ZComp neg({rate(1, 0, -0.3, -1)}, std::vector<int>(3, 0));
  ZComp pos({rate(1, 0, 0.3, -1)}, std::vector<int>(3, 0));
  CHECK(check_composition(top, neg, 0, 1).lambda_max == doctest::Approx(-0.4).epsilon(1e-8));
  CHECK(check_composition(top, pos, 0, 1).lambda_max == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("retry policy grows T and reseeds deterministically") {
  RetryPolicy p;
  std::vector<RetryState> h{{0, 18, 42}};
  auto r1 = p.next(h);
  CHECK(r1.attempt == 1);
  CHECK(r1.T == 23);
  CHECK(r1.seed == reseed(42, 1));
  CHECK(r1.seed != 42);
  h.push_back(r1);
  auto r2 = p.next(h);
  CHECK(r2.T == 29);
  h.push_back(r2);
  // third failure is terminal
  try {
    p.next(h);
    FAIL("expected RetryExhausted");
  } catch (const RetryExhausted& e) {
    CHECK(e.attempts.size() == 3);
  }
  CHECK(reseed(42, 0) == 42);
  CHECK(reseed(42, 2) == reseed(42, 2));
  CHECK(reseed(42, 1) != reseed(42, 2));
}
