#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "barrierforge/pipeline.hpp"

#include <algorithm>
#include <filesystem>

using namespace barrierforge;
namespace fs = std::filesystem;

namespace {

bool has(const std::vector<std::string>& v, const std::string& k) { return std::find(v.begin(), v.end(), k) != v.end(); }

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("bf_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

StorageCertificate toy_cert(double z12) {
  StorageCertificate c;
  c.n = 1;
  c.m = 1;
  c.P = MatrixXd::Identity(1, 1);
  c.S_inv = c.P;
  c.H = PolyMatrix(1, 1, 1);
  c.Q = c.H;
  c.F = PolyMatrix(1, 1, 1);
  c.Zbar11 = c.Z11 = MatrixXd::Zero(1, 1);
  c.Zbar12 = c.Zbar21 = c.Z12 = c.Z21 = MatrixXd::Constant(1, 1, z12);
  c.Zbar22 = c.Z22 = MatrixXd::Constant(1, 1, -1);
  c.lambda = 0.99;
  c.eta = 1;
  c.mu = 2;
  c.U0T = MatrixXd::Zero(1, 1);
  return c;
}

}  // namespace

TEST_CASE("config defaults come from the parameter table and are recorded") {
  auto c = config_from_json({{"benchmark", "duffing_binary"}});
  CHECK(c.N == 1023);
  CHECK(c.T == 18);
  CHECK(c.phi_bar == doctest::Approx(0.08));
  CHECK(c.lambda == doctest::Approx(0.99));
  CHECK(has(c.defaulted, "T"));
  CHECK(has(c.defaulted, "phi_bar"));
  auto d = config_from_json({{"benchmark", "lorenz_ring"}, {"T", 40}, {"N", 5}});
  CHECK(d.T == 40);
  CHECK_FALSE(has(d.defaulted, "T"));
  CHECK(has(d.defaulted, "phi_bar"));
}

TEST_CASE("config validation") {
  CHECK_THROWS(config_from_json({{"benchmark", "duffing_binary"}, {"bogus", 1}}));
  CHECK_THROWS(config_from_json({{"benchmark", "nope"}}));
  CHECK_THROWS(config_from_json({{"benchmark", "duffing_binary"}, {"T", 0}}));
  CHECK_THROWS(config_from_json({{"benchmark", "duffing_binary"}, {"theta", {0, 1}}}));
  CHECK_THROWS(config_from_json({{"benchmark", "duffing_binary"}, {"dissipation_degree", 1}}));
}

TEST_CASE("theta divisors are 1-based on disk") {
  json j{{"benchmark", "duffing_binary"}, {"theta", {1, 2, 1}}};
  auto c = config_from_json(j);
  REQUIRE(c.theta);
  CHECK(*c.theta == std::vector<int>{0, 1, 0});
  CHECK(to_json(c)["theta"] == j["theta"]);
  auto again = config_from_json(to_json(c));
  CHECK(to_json(again) == to_json(c));
}

TEST_CASE("compose picks up the topology file and notices a flipped coupling sign") {
  auto top = Topology::make(TopologyKind::fully, 3, 1);
  auto tfile = scratch("topo") / "topology.json";
  write_json(tfile.string(), to_json(top));

  auto good = scratch("good");
  write_certificate_set(good.string(), "toy", {toy_cert(-0.3)}, {0, 0, 0}, top, nullptr);
  auto r = run_compose(good.string(), tfile.string(), (good / "network.json").string());
  CHECK(r.check.passes);
  CHECK(r.cbc.has_value());
  CHECK(fs::exists(good / "network.json"));

  auto bad = scratch("bad");
  write_certificate_set(bad.string(), "toy", {toy_cert(0.3)}, {0, 0, 0}, top, nullptr);
  auto s = run_compose(bad.string(), tfile.string(), "");
  CHECK_FALSE(s.check.passes);
  CHECK_FALSE(s.cbc.has_value());
  CHECK(s.check.lambda_max == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("a single certificate is cloned over a larger topology") {
  auto dir = scratch("clone");
  write_certificate_set(dir.string(), "toy", {toy_cert(-0.1)}, {0}, Topology::make(TopologyKind::line, 1, 1), nullptr);
  auto tfile = dir / "topology.json";
  write_json(tfile.string(), to_json(Topology::make(TopologyKind::ring, 9, 1)));
  auto r = run_compose(dir.string(), tfile.string(), "");
  CHECK(r.check.eta == doctest::Approx(9.0));
  CHECK(r.check.passes);
}

TEST_CASE("missing certificate directory is reported as a missing artifact") {
  CHECK_THROWS_AS(load_certificate_set((fs::temp_directory_path() / "bf_no_such_dir").string()), MissingArtifact);
}

TEST_CASE("end to end synth writes a certificate set that recomposes and simulates") {
  auto out = scratch("synth");
  auto cfg = config_from_json({{"benchmark", "duffing_binary"}, {"N", 7}});
  Manifest man;
  auto res = run_synth(cfg, {out.string(), "", false}, &man);
  man.write(out.string());
  REQUIRE(res.check.passes);
  for (auto f : {"certs.json", "cert_0.json", "network.json", "config.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);

  auto again = run_compose(out.string(), "", "");
  CHECK(again.check.passes);
  CHECK(again.check.lambda_max == doctest::Approx(res.check.lambda_max).epsilon(1e-6));

  SimulateOptions so;
  so.network = (out / "network.json").string();
  so.sim.samples = 3;
  so.sim.horizon = 1;
  auto sim = run_simulate(so);
  CHECK(sim.unsafe_count == 0);
  CHECK(sim.max_B <= sim.eta * (1 + 1e-6));

  VerifyOptions vo;
  vo.target = "synth";
  vo.certs_dir = out.string();
  vo.grid.per_axis = 41;
  vo.grid.w_per_axis = 5;
  for (auto& r : run_verify(vo)) CHECK_MESSAGE(r.pass, r.condition << " " << r.worst_margin);
}

TEST_CASE("variable counts grow linearly for the compositional scheme") {
  auto cfg = config_from_json({{"benchmark", "duffing_binary"}});
  auto rep = build_benchmark("duffing_binary", 3).representative();
  long one = dissipation_variable_count(rep.spec(), cfg.T, cfg.synth_settings(), 1);
  long mono = monolithic_variable_count(rep.spec(), 3, cfg.T, cfg.synth_settings(), 1);
  CHECK(one > 0);
  CHECK(mono > 3 * one);
  int M = rep.spec().dict.size(), dth = rep.spec().theta.degree();
  CHECK(one == predicted_dissipation_count(2, cfg.T, M, dth, 0, 1));
  CHECK(mono == predicted_dissipation_count(6, 3 * cfg.T, 3 * M, dth, 0, 1));
}

TEST_CASE("closed-form count tracks the compiled program across benchmarks and multiplier degrees") {
  for (auto& name : benchmark_names()) {
    auto cfg = config_from_json({{"benchmark", name}});
    auto net = build_benchmark(name, name.find("binary") != std::string::npos ? 3 : 4);
    auto rep = net.representative();
    auto& spec = rep.spec();
    for (int d : {0, 2}) {
      CAPTURE(name);
      CAPTURE(d);
      auto set = cfg.synth_settings();
      set.dissipation_degree = d;
      long got = dissipation_variable_count(spec, cfg.T, set, 1);
      long want = predicted_dissipation_count(spec.n, cfg.T, spec.dict.size(), std::max(spec.theta.degree(), 0), d,
                                              static_cast<int>(spec.X.boxes.size()));
      CHECK(got == want);
    }
  }
}
