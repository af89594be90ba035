#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/io.hpp"
#include "barrierforge/verify.hpp"

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <fstream>
#include <random>

using namespace barrierforge;
namespace fs = std::filesystem;

namespace {
const std::string kFixtures = std::string(BARRIERFORGE_DATA_DIR) + "/fixtures";
}

TEST_CASE("every fixture loads with a positive definite quadratic form") {
  for (auto& id : benchmark_names()) {
    CAPTURE(id);
    auto fx = load_fixture(id, kFixtures);
    CHECK(fx.benchmark == id);
    CHECK(fx.P.rows() == fx.n);
    CHECK((fx.P - fx.P.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(fx.P);
    CHECK(es.eigenvalues().minCoeff() > 0);
    CHECK(fx.eta_i < fx.mu_i);
    CHECK(fx.controller.rows() == fx.m);
  }
}

TEST_CASE("quadratic form coefficients map onto P") {
  auto fx = load_fixture("duffing_binary", kFixtures);
  CHECK(fx.P(0, 0) == doctest::Approx(10.4512));
  CHECK(fx.P(1, 1) == doctest::Approx(8.7529));
  CHECK(fx.P(0, 1) == doctest::Approx(-2.6553));
  VectorXd x(2);
  x << 0.3, -1.2;
  CHECK(x.dot(fx.P * x) == doctest::Approx(fx.S.eval(x)).epsilon(1e-12));
}

TEST_CASE("a corrupted checksum is detected") {
  auto dir = fs::temp_directory_path() / "bf_fixture_tamper";
  fs::create_directories(dir);
  json j = read_json(kFixtures + "/duffing_binary.json");
  j["checksum"] = j["checksum"].get<double>() + 1.0;
  write_json((dir / "duffing_binary.json").string(), j);
  CHECK_THROWS(load_fixture("duffing_binary", dir.string()));
  CHECK_THROWS(load_fixture("no_such_benchmark", kFixtures));
  fs::remove_all(dir);
}

TEST_CASE("duffing fixture passes its level conditions") {
  auto fx = load_fixture("duffing_binary", kFixtures);
  auto net = build_benchmark("duffing_binary", 3);
  GridSettings g;
  g.per_axis = 101;
  auto reps = verify_fixture(fx, net.representative(), 0.01, g);
  REQUIRE(reps.size() == 2);
  for (auto& r : reps) CHECK_MESSAGE(r.pass, r.condition << " " << r.worst_margin);
  // a 30% tighter eta no longer holds
  auto tight = fx;
  tight.eta_i *= 0.7;
  auto bad = verify_fixture(tight, net.representative(), 0.0, g);
  CHECK_FALSE(bad[0].pass);
}

TEST_CASE("box extrema of a quadratic form agree with a dense grid") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd A(2, 2);
    A << U(rng), U(rng), U(rng), U(rng);
    MatrixXd P = A * A.transpose() + 0.1 * MatrixXd::Identity(2, 2);
    Eigen::Vector2d lo(U(rng) * 2, U(rng) * 2), hi = lo + Eigen::Vector2d(0.2 + std::abs(U(rng)), 0.2 + std::abs(U(rng)));
    Box b(lo, hi);
    auto e = quadratic_box_extrema(P, b);
    double gmin = 1e300, gmax = -1e300;
    int K = 401;
    for (int i = 0; i < K; ++i)
      for (int k = 0; k < K; ++k) {
        VectorXd x = lo + Eigen::Vector2d((hi - lo)(0) * i / (K - 1.0), (hi - lo)(1) * k / (K - 1.0));
        double v = x.dot(P * x);
        gmin = std::min(gmin, v);
        gmax = std::max(gmax, v);
      }
    CHECK(e.min <= gmin + 1e-12);
    CHECK(e.min >= gmin - 1e-3 * (1 + gmax));
    CHECK(e.max == doctest::Approx(gmax).epsilon(1e-12));
    CHECK(e.argmin.dot(P * e.argmin) == doctest::Approx(e.min));
    CHECK(b.contains(e.argmin, 1e-12));
  }
}

TEST_CASE("identity form on a box containing the origin has minimum zero") {
  auto e = quadratic_box_extrema(MatrixXd::Identity(3, 3), Box(VectorXd::Constant(3, -1), VectorXd::Constant(3, 2)));
  CHECK(e.min == doctest::Approx(0.0));
  CHECK(e.max == doctest::Approx(12.0));
}

TEST_CASE("network started at the origin stays at the origin") {
  auto fx = load_fixture("duffing_binary", kFixtures);
  auto net = build_benchmark("duffing_binary", 7);
  auto cbc = fixture_cbc(fx, 7);
  CHECK(cbc.eta == doctest::Approx(7 * fx.eta_i));
  CHECK(cbc.mu == doctest::Approx(7 * fx.mu_i));
  SimulationSettings s;
  s.samples = 1;
  s.horizon = 0.5;
  std::vector<VectorXd> x0{VectorXd::Zero(net.total_dim())};
  auto r = simulate_network_closed_loop(net, &cbc, x0, s);
  CHECK(r.unsafe_count == 0);
  CHECK(r.max_B == 0.0);
  CHECK(r.decay_fraction == 1.0);
}

TEST_CASE("initial states are drawn inside X0 and reproducibly") {
  auto net = build_benchmark("lorenz_ring", 5);
  auto a = sample_initial_states(net, 10, 9);
  auto b = sample_initial_states(net, 10, 9);
  REQUIRE(a.size() == 10);
  for (int s = 0; s < 10; ++s) {
    CHECK(a[s] == b[s]);
    for (int i = 0; i < 5; ++i) {
      int o = net.topology.offsets()[i], d = net.topology.dims()[i];
      CHECK(net.subsystems[i].spec().X0.contains(a[s].segment(o, d), 1e-12));
    }
  }
}

TEST_CASE("fixture controller keeps short duffing runs safe and the csv is well formed") {
  auto fx = load_fixture("duffing_binary", kFixtures);
  auto net = build_benchmark("duffing_binary", 7);
  auto cbc = fixture_cbc(fx, 7);
  SimulationSettings s;
  s.samples = 4;
  s.horizon = 2;
  s.dump_every = 500;
  auto r = simulate_network_closed_loop(net, &cbc, sample_initial_states(net, 4, 1), s);
  CHECK(r.unsafe_count == 0);
  CHECK(r.max_B <= cbc.eta);
  CHECK_FALSE(r.dump.empty());
  auto path = (fs::temp_directory_path() / "bf_safety.csv").string();
  write_safety_csv(r, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "sample,unsafe_entered,max_B,min_decay_margin");
  int lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  CHECK(lines == 4);
  fs::remove(path);
}
