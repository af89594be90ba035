#include "barrierforge/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace barrierforge {

json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix must be an array of rows");
  int r = static_cast<int>(j.size());
  int c = r ? static_cast<int>(j[0].size()) : 0;
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(j[i].size()) != c) throw std::invalid_argument("ragged matrix rows");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

json to_json(const Polynomial& p) {
  json t = json::array();
  for (auto& [m, c] : p.terms()) t.push_back({{"exps", m.exps}, {"coef", c}});
  return t;
}

Polynomial polynomial_from_json(const json& j, int nvars) {
  Polynomial p(nvars);
  for (auto& t : j) {
    auto e = t.at("exps").get<std::vector<int>>();
    if (static_cast<int>(e.size()) != nvars) throw std::invalid_argument("monomial exponent length mismatch");
    p.add_term(Monomial(e), t.at("coef").get<double>());
  }
  return p;
}

json to_json(const PolyMatrix& p) {
  json rows = json::array();
  for (int r = 0; r < p.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < p.cols(); ++c) row.push_back(to_json(p(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

PolyMatrix polymatrix_from_json(const json& j, int nvars) {
  int r = static_cast<int>(j.size());
  int c = r ? static_cast<int>(j[0].size()) : 0;
  PolyMatrix p(r, c, nvars);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) p(i, k) = polynomial_from_json(j[i][k], nvars);
  return p;
}

json to_json(const StorageCertificate& c) {
  json j;
  j["n"] = c.n;
  j["m"] = c.m;
  j["T"] = c.T;
  j["P"] = to_json(c.P);
  j["H"] = to_json(c.H);
  j["Zbar11"] = to_json(c.Zbar11);
  j["Zbar12"] = to_json(c.Zbar12);
  j["Zbar21"] = to_json(c.Zbar21);
  j["Zbar22"] = to_json(c.Zbar22);
  j["Z11"] = to_json(c.Z11);
  j["Z12"] = to_json(c.Z12);
  j["Z21"] = to_json(c.Z21);
  j["Z22"] = to_json(c.Z22);
  j["alpha"] = c.alpha;
  j["pi"] = c.pi;
  j["lambda"] = c.lambda;
  j["eta"] = std::isfinite(c.eta) ? json(c.eta) : json(nullptr);
  j["mu"] = std::isfinite(c.mu) ? json(c.mu) : json(nullptr);
  j["U0T"] = to_json(c.U0T);
  auto& p = c.provenance;
  j["provenance"] = {{"seed", p.seed},
                     {"benchmark", p.benchmark},
                     {"tau", p.tau},
                     {"phi_bar", p.phi_bar},
                     {"attempts", p.attempts},
                     {"multiplier_degree", p.multiplier_degree},
                     {"T_requested", p.T_requested}};
  return j;
}

StorageCertificate certificate_from_json(const json& j) {
  StorageCertificate c;
  c.n = j.at("n").get<int>();
  c.m = j.at("m").get<int>();
  c.T = j.at("T").get<int>();
  c.P = matrix_from_json(j.at("P"));
  if (c.P.rows() != c.n || c.P.cols() != c.n) throw std::invalid_argument("certificate P has the wrong shape");
  c.S_inv = c.P.inverse();
  c.H = polymatrix_from_json(j.at("H"), c.n);
  c.Zbar11 = matrix_from_json(j.at("Zbar11"));
  c.Zbar12 = matrix_from_json(j.at("Zbar12"));
  c.Zbar21 = matrix_from_json(j.at("Zbar21"));
  c.Zbar22 = matrix_from_json(j.at("Zbar22"));
  c.Z11 = matrix_from_json(j.at("Z11"));
  c.Z12 = matrix_from_json(j.at("Z12"));
  c.Z21 = matrix_from_json(j.at("Z21"));
  c.Z22 = matrix_from_json(j.at("Z22"));
  c.alpha = j.at("alpha").get<double>();
  c.pi = j.at("pi").get<double>();
  c.lambda = j.at("lambda").get<double>();
  if (!j.at("eta").is_null()) c.eta = j["eta"].get<double>();
  if (!j.at("mu").is_null()) c.mu = j["mu"].get<double>();
  c.U0T = matrix_from_json(j.at("U0T"));
  c.Q = c.H * c.P;
  c.F = c.U0T * c.Q;
  if (j.contains("provenance")) {
    auto& p = j["provenance"];
    c.provenance.seed = p.value("seed", std::uint64_t{0});
    c.provenance.benchmark = p.value("benchmark", std::string{});
    c.provenance.tau = p.value("tau", 0.0);
    c.provenance.phi_bar = p.value("phi_bar", 0.0);
    c.provenance.attempts = p.value("attempts", 1);
    c.provenance.multiplier_degree = p.value("multiplier_degree", 0);
    c.provenance.T_requested = p.value("T_requested", c.T);
  }
  return c;
}

std::string dump_certificate(const StorageCertificate& c) { return to_json(c).dump(1) + "\n"; }

json to_json(const SdpSettings& s) {
  return {{"max_iters", s.max_iters}, {"feas_tol", s.feas_tol},     {"gap_tol", s.gap_tol},
          {"eig_tol", s.eig_tol},     {"step_frac", s.step_frac},   {"accept_tol", s.accept_tol},
          {"cert_tol", s.cert_tol},   {"divergence", s.divergence}};
}

SdpSettings sdp_settings_from_json(const json& j, SdpSettings s) {
  if (j.is_null()) return s;
  s.max_iters = j.value("max_iters", s.max_iters);
  s.feas_tol = j.value("feas_tol", s.feas_tol);
  s.gap_tol = j.value("gap_tol", s.gap_tol);
  s.eig_tol = j.value("eig_tol", s.eig_tol);
  s.step_frac = j.value("step_frac", s.step_frac);
  s.accept_tol = j.value("accept_tol", s.accept_tol);
  s.cert_tol = j.value("cert_tol", s.cert_tol);
  s.divergence = j.value("divergence", s.divergence);
  if (s.max_iters < 1 || !(s.step_frac > 0 && s.step_frac < 1)) throw std::invalid_argument("invalid SDP settings");
  return s;
}

json to_json(const Topology& t) {
  json j;
  j["kind"] = to_string(t.kind());
  j["N"] = t.size();
  j["dims"] = t.dims();
  json b = json::array();
  for (auto& blk : t.blocks()) b.push_back({blk.to, blk.from, blk.weight});
  j["blocks"] = std::move(b);
  return j;
}

Topology topology_from_json(const json& j) {
  auto kind = topology_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("blocks")) {
    std::vector<int> dims = j.at("dims").get<std::vector<int>>();
    std::vector<CouplingBlock> blocks;
    for (auto& b : j["blocks"]) blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<double>()});
    return Topology(kind, std::move(dims), std::move(blocks));
  }
  if (kind == TopologyKind::custom) throw std::invalid_argument("custom topology needs explicit blocks");
  return Topology::make(kind, j.at("N").get<int>(), j.at("dim").get<int>(), j.value("weight", 1.0));
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

}  // namespace barrierforge
