#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/polyalg.hpp"

#include <random>

using namespace barrierforge;

namespace {

VectorXd random_point(std::mt19937_64& rng, int n, double s = 2.0) {
  std::uniform_real_distribution<double> U(-s, s);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = U(rng);
  return x;
}

long binom(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("dictionary sizes") {
  CHECK(build_dictionary(1, 1).size() == 1);
  CHECK(build_dictionary(3, 2).size() == 9);
  CHECK(build_dictionary(2, 3).size() == 9);
  for (int n = 1; n <= 4; ++n)
    for (int d = 1; d <= 4; ++d) CHECK(build_dictionary(n, d).size() == binom(n + d, d) - 1);
}

TEST_CASE("dictionary starts with the degree-1 block") {
  auto d = build_dictionary(3, 2);
  for (int k = 0; k < 3; ++k) CHECK(d[k] == Monomial::variable(3, k));
}

TEST_CASE("dictionary override ordering is kept") {
  std::vector<std::vector<int>> e{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 0}, {0, 1, 1}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2}};
  auto d = dictionary_from_exponents(3, e);
  REQUIRE(d.size() == 9);
  CHECK(d[3].exps == std::vector<int>{1, 0, 1});
  CHECK(d[8].exps == std::vector<int>{0, 0, 2});
}

TEST_CASE("dictionary rejects constants and missing linear terms") {
  CHECK_THROWS(dictionary_from_exponents(2, {{0, 0}, {1, 0}, {0, 1}}));
  CHECK_THROWS(dictionary_from_exponents(2, {{1, 0}, {1, 1}}));
  CHECK_THROWS(dictionary_from_exponents(2, {{1, 0}, {0, 1}, {1, 0}}));
}

TEST_CASE("theta of a linear dictionary is the identity") {
  auto th = factorize_theta(build_dictionary(2, 1));
  VectorXd x(2);
  x << 0.3, -1.7;
  CHECK((th.eval(x) - MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("theta lowest-index rule puts x1x3 / x1 = x3 in column 1") {
  auto d = dictionary_from_exponents(3, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}});
  auto th = factorize_theta(d);
  CHECK(th(3, 0) == Polynomial::variable(3, 2));
  CHECK(th(3, 1).is_zero());
  CHECK(th(3, 2).is_zero());
}

TEST_CASE("theta(x) x = R(x) on random dictionaries") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 3; ++n)
    for (int d = 1; d <= 3; ++d) {
      auto dict = build_dictionary(n, d);
      auto th = factorize_theta(dict);
      double worst = 0;
      for (int s = 0; s < 1000; ++s) {
        VectorXd x = random_point(rng, n);
        worst = std::max(worst, (th.eval(x) * x - dict.eval(x)).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-12);
    }
}

TEST_CASE("explicit theta divisors") {
  auto d = dictionary_from_exponents(2, {{1, 0}, {0, 1}, {1, 1}});
  auto th = factorize_theta(d, {0, 1, 1});
  CHECK(th(2, 1) == Polynomial::variable(2, 0));
  CHECK_THROWS(factorize_theta(d, {0, 1, 0, 1}));
  CHECK_THROWS(factorize_theta(dictionary_from_exponents(2, {{1, 0}, {0, 1}, {2, 0}}), {0, 1, 1}));
}

TEST_CASE("left pseudoinverse") {
  auto dict = build_dictionary(3, 2);
  auto th = factorize_theta(dict);
  for (VectorXd x : {VectorXd(VectorXd::Ones(3)), VectorXd(VectorXd::Zero(3))}) {
    MatrixXd p = theta_left_pinv(th, x);
    CHECK((p * th.eval(x) - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  auto id = factorize_theta(build_dictionary(2, 1));
  CHECK((theta_left_pinv(id, VectorXd::Ones(2)) - MatrixXd::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("polynomial arithmetic agrees with evaluation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  auto mons = monomials_up_to(3, 0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Polynomial p(3), q(3);
    for (auto& m : mons) {
      if (U(rng) > 0) p.add_term(m, U(rng));
      if (U(rng) > 0) q.add_term(m, U(rng));
    }
    CHECK(p + q == q + p);
    Polynomial diff = p * q - q * p;
    for (auto& [m, c] : diff.terms()) CHECK(std::abs(c) <= 1e-14);
    for (int s = 0; s < 20; ++s) {
      VectorXd x = random_point(rng, 3, 1.0);
      double pv = p.eval(x), qv = q.eval(x);
      CHECK((p * q).eval(x) == doctest::Approx(pv * qv).epsilon(1e-10));
      CHECK((p - q).eval(x) == doctest::Approx(pv - qv).epsilon(1e-10));
    }
  }
}

TEST_CASE("no zero terms are stored") {
  Polynomial p = Polynomial::variable(2, 0);
  p.add_term(Monomial::variable(2, 0), -1.0);
  CHECK(p.is_zero());
  CHECK(p.degree() == -1);
}

TEST_CASE("polymatrix products") {
  PolyMatrix a(2, 1, 2), b(1, 2, 2);
  a(0, 0) = Polynomial::variable(2, 0);
  a(1, 0) = Polynomial::constant(2, 2.0);
  b(0, 0) = Polynomial::variable(2, 1);
  b(0, 1) = Polynomial::constant(2, 1.0);
  auto c = a * b;
  VectorXd x(2);
  x << 1.5, -2.0;
  CHECK((c.eval(x) - a.eval(x) * b.eval(x)).norm() < 1e-14);
  CHECK(c.degree() == 2);
  CHECK_THROWS(a * a);
}
