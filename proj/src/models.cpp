#include "barrierforge/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace barrierforge {

Box::Box(VectorXd l, VectorXd h) : lo(std::move(l)), hi(std::move(h)) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box bounds differ in dimension");
  for (int k = 0; k < lo.size(); ++k)
    if (lo[k] > hi[k]) throw std::invalid_argument("box lower bound exceeds upper bound");
}

bool Box::contains(const VectorXd& x, double tol) const {
  for (int k = 0; k < lo.size(); ++k)
    if (x[k] < lo[k] - tol || x[k] > hi[k] + tol) return false;
  return true;
}

std::vector<Polynomial> Box::quadratic_constraints() const {
  int n = dim();
  std::vector<Polynomial> out;
  for (int k = 0; k < n; ++k) {
    auto xk = Polynomial::variable(n, k);
    out.push_back((xk - Polynomial::constant(n, lo[k])) * (Polynomial::constant(n, hi[k]) - xk));
  }
  return out;
}

std::vector<Polynomial> Box::facet_constraints() const {
  int n = dim();
  std::vector<Polynomial> out;
  for (int k = 0; k < n; ++k) {
    auto xk = Polynomial::variable(n, k);
    out.push_back(xk - Polynomial::constant(n, lo[k]));
    out.push_back(Polynomial::constant(n, hi[k]) - xk);
  }
  return out;
}

Region Region::cube(int n, double lo, double hi) {
  return Region({Box(VectorXd::Constant(n, lo), VectorXd::Constant(n, hi))});
}

bool Region::contains(const VectorXd& x, double tol) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(x, tol); });
}

Box Region::hull() const {
  if (boxes.empty()) throw std::invalid_argument("hull of empty region");
  VectorXd lo = boxes[0].lo, hi = boxes[0].hi;
  for (auto& b : boxes) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  return Box(lo, hi);
}

std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::fully: return "fully";
    case TopologyKind::ring: return "ring";
    case TopologyKind::binary: return "binary";
    case TopologyKind::star: return "star";
    case TopologyKind::line: return "line";
    case TopologyKind::custom: return "custom";
  }
  return "custom";
}

TopologyKind topology_kind_from_string(const std::string& s) {
  for (auto k : {TopologyKind::fully, TopologyKind::ring, TopologyKind::binary, TopologyKind::star,
                 TopologyKind::line, TopologyKind::custom})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown topology kind '" + s + "'");
}

Topology::Topology(TopologyKind kind, std::vector<int> dims, std::vector<CouplingBlock> blocks)
    : kind_(kind), dims_(std::move(dims)), blocks_(std::move(blocks)) {
  int N = size();
  offsets_.assign(1, 0);
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("subsystem dimension must be positive");
    offsets_.push_back(offsets_.back() + d);
  }
  for (auto& b : blocks_) {
    if (b.to < 0 || b.to >= N || b.from < 0 || b.from >= N)
      throw std::invalid_argument("coupling block index out of range");
    if (b.to == b.from) throw std::invalid_argument("self-loop coupling blocks are not allowed");
    if (dims_[b.to] != dims_[b.from]) throw std::invalid_argument("coupled subsystems differ in dimension");
  }
  std::stable_sort(blocks_.begin(), blocks_.end(),
                   [](const CouplingBlock& a, const CouplingBlock& b) { return a.to < b.to; });
}

Topology Topology::make(TopologyKind kind, int N, int dim, double weight) {
  if (N < 1) throw std::invalid_argument("topology needs N >= 1");
  std::vector<CouplingBlock> b;
  switch (kind) {
    case TopologyKind::fully:
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          if (i != j) b.push_back({i, j, weight});
      break;
    case TopologyKind::ring:
      if (N < 2) throw std::invalid_argument("ring topology needs N >= 2");
      for (int i = 0; i < N; ++i) b.push_back({i, (i + N - 1) % N, weight});
      break;
    case TopologyKind::binary: {
      int p = N + 1;
      if ((p & (p - 1)) != 0) throw std::invalid_argument("binary topology needs N = 2^l - 1, got " + std::to_string(N));
      for (int i = 1; i < N; ++i) b.push_back({i, (i - 1) / 2, weight});
      break;
    }
    case TopologyKind::star:
      for (int i = 1; i < N; ++i) b.push_back({i, 0, weight});
      break;
    case TopologyKind::line:
      for (int i = 1; i < N; ++i) b.push_back({i, i - 1, weight});
      break;
    case TopologyKind::custom:
      throw std::invalid_argument("custom topology needs an explicit block list");
  }
  return Topology(kind, std::vector<int>(N, dim), std::move(b));
}

VectorXd Topology::matvec(const VectorXd& x) const {
  if (x.size() != total_dim()) throw std::invalid_argument("topology matvec dimension mismatch");
  VectorXd w = VectorXd::Zero(x.size());
  for (auto& b : blocks_) w.segment(offsets_[b.to], dims_[b.to]) += b.weight * x.segment(offsets_[b.from], dims_[b.from]);
  return w;
}

VectorXd Topology::matvec_transpose(const VectorXd& y) const {
  if (y.size() != total_dim()) throw std::invalid_argument("topology matvec dimension mismatch");
  VectorXd r = VectorXd::Zero(y.size());
  for (auto& b : blocks_) r.segment(offsets_[b.from], dims_[b.from]) += b.weight * y.segment(offsets_[b.to], dims_[b.to]);
  return r;
}

MatrixXd Topology::dense() const {
  MatrixXd m = MatrixXd::Zero(total_dim(), total_dim());
  for (auto& b : blocks_)
    m.block(offsets_[b.to], offsets_[b.from], dims_[b.to], dims_[b.from]) +=
        b.weight * MatrixXd::Identity(dims_[b.to], dims_[b.from]);
  return m;
}

Topology Topology::permuted(const std::vector<int>& perm) const {
  int N = size();
  if (static_cast<int>(perm.size()) != N) throw std::invalid_argument("permutation length mismatch");
  std::vector<int> d(N);
  for (int i = 0; i < N; ++i) d[perm[i]] = dims_[i];
  std::vector<CouplingBlock> b;
  for (auto& blk : blocks_) b.push_back({perm[blk.to], perm[blk.from], blk.weight});
  return Topology(TopologyKind::custom, d, b);
}

SubsystemModel::SubsystemModel(SubsystemSpec spec, MatrixXd A, MatrixXd B)
    : spec_(std::move(spec)), A_(std::move(A)), B_(std::move(B)) {
  auto& s = spec_;
  if (A_.rows() != s.n || A_.cols() != s.dict.size()) throw std::invalid_argument("A has wrong shape");
  if (B_.rows() != s.n || B_.cols() != s.m) throw std::invalid_argument("B has wrong shape");
  if (s.D.rows() != s.n || s.D.cols() != s.n) throw std::invalid_argument("D has wrong shape");
  if (s.theta.rows() != s.dict.size() || s.theta.cols() != s.n) throw std::invalid_argument("theta has wrong shape");
}

VectorXd SubsystemModel::rhs(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
  return A_ * spec_.dict.eval(x) + B_ * u + spec_.D * w;
}

int NetworkModel::total_inputs() const {
  int m = 0;
  for (auto& s : subsystems) m += s.spec().m;
  return m;
}

VectorXd NetworkModel::rhs(const VectorXd& x, const VectorXd& u) const {
  VectorXd w = topology.matvec(x);
  VectorXd dx(x.size());
  int uo = 0;
  for (int i = 0; i < topology.size(); ++i) {
    int o = topology.offsets()[i], n = topology.dims()[i], m = subsystems[i].spec().m;
    dx.segment(o, n) = subsystems[i].rhs(x.segment(o, n), u.segment(uo, m), w.segment(o, n));
    uo += m;
  }
  return dx;
}

bool NetworkModel::in_unsafe(const VectorXd& x) const {
  for (int i = 0; i < topology.size(); ++i)
    if (subsystems[i].spec().Xa.contains(x.segment(topology.offsets()[i], topology.dims()[i]))) return true;
  return false;
}

SubsystemModel NetworkModel::representative() const {
  SubsystemModel rep = subsystems.front();
  VectorXd lo = rep.spec().W.hull().lo, hi = rep.spec().W.hull().hi;
  for (auto& s : subsystems) {
    Box h = s.spec().W.hull();
    lo = lo.cwiseMin(h.lo);
    hi = hi.cwiseMax(h.hi);
  }
  rep.set_internal_bounds(Region({Box(lo, hi)}));
  return rep;
}

Region internal_input_bounds(const Topology& top, const std::vector<Region>& X, int i) {
  int n = top.dims()[i];
  VectorXd lo = VectorXd::Zero(n), hi = VectorXd::Zero(n);
  for (auto& b : top.blocks()) {
    if (b.to != i) continue;
    Box h = X[b.from].hull();
    VectorXd a = b.weight * h.lo, c = b.weight * h.hi;
    lo += a.cwiseMin(c);
    hi += a.cwiseMax(c);
  }
  return Region({Box(lo, hi)});
}

namespace {

Box box3(double a0, double a1, double b0, double b1, double c0, double c1) {
  return Box(Eigen::Vector3d(a0, b0, c0), Eigen::Vector3d(a1, b1, c1));
}

struct BenchDef {
  int n, m;
  std::vector<std::vector<int>> dict;
  std::vector<int> theta;
  // right-hand side polynomials in the dictionary
  std::vector<std::map<std::vector<int>, double>> f;
  MatrixXd B, D;
  Region X, X0, Xa;
  TopologyKind kind;
  double u_bound;
};

const std::vector<std::vector<int>> kQuad3 = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 0},
                                             {0, 1, 1}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2}};

BenchDef lorenz(bool ring) {
  BenchDef d;
  d.n = 3;
  d.m = 3;
  d.dict = kQuad3;
  d.theta = {0, 1, 2, 0, 0, 1, 0, 1, 2};
  d.f = {{{{1, 0, 0}, -10.0}, {{0, 1, 0}, 10.0}},
         {{{1, 0, 0}, 28.0}, {{0, 1, 0}, -1.0}, {{1, 0, 1}, -1.0}},
         {{{1, 1, 0}, 1.0}, {{0, 0, 1}, -8.0 / 3.0}}};
  d.B = MatrixXd::Identity(3, 3);
  d.X = Region::cube(3, -20, 20);
  d.X0 = Region::cube(3, -3, 3);
  if (!ring) {
    d.D = -1e-5 * MatrixXd::Identity(3, 3);
    d.Xa = Region({box3(-20, -4, -20, -15, 4, 20), box3(5, 20, 11, 20, 4, 20), box3(5, 20, 11, 20, -20, -4)});
    d.kind = TopologyKind::fully;
  } else {
    d.D = -0.08 * MatrixXd::Identity(3, 3);
    d.Xa = Region({box3(-20, -10, -20, -5, 5, 20), box3(3.5, 20, 15, 20, 5, 20), box3(3.5, 20, 15, 20, -20, -5)});
    d.kind = TopologyKind::ring;
  }
  d.u_bound = 50.0;
  return d;
}

BenchDef spacecraft(bool star, const std::array<double, 3>& J) {
  for (double j : J)
    if (!(j > 0)) throw std::invalid_argument("spacecraft inertias must be positive");
  BenchDef d;
  d.n = 3;
  d.m = 3;
  d.dict = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2}};
  d.theta = {0, 1, 2, 2, 0, 0, 0, 1, 2};
  d.f = {{{{0, 1, 1}, (J[1] - J[2]) / J[0]}},
         {{{1, 0, 1}, (J[2] - J[0]) / J[1]}},
         {{{1, 1, 0}, (J[0] - J[1]) / J[2]}}};
  Eigen::Vector3d inv(1 / J[0], 1 / J[1], 1 / J[2]);
  d.B = inv.asDiagonal();
  d.D = ((star ? 0.02 : 0.08) * inv).asDiagonal();
  d.X = Region::cube(3, -5, 5);
  d.X0 = Region::cube(3, -2, 2);
  if (!star) {
    d.Xa = Region({box3(2.5, 5, -5, -3, -5, -2.5), box3(2.5, 5, 2.5, 5, 2.5, 5), box3(-5, -3, 2.5, 5, 2.5, 5)});
    d.kind = TopologyKind::binary;
  } else {
    d.Xa = Region({box3(2.5, 5, -5, -3, -5, -4), box3(2.5, 5, 4, 5, 2.5, 5), box3(-5, -4, 4, 5, 2.5, 5)});
    d.kind = TopologyKind::star;
  }
  d.u_bound = 20.0;
  return d;
}

BenchDef chen() {
  BenchDef d;
  d.n = 3;
  d.m = 3;
  d.dict = kQuad3;
  d.theta = {0, 1, 2, 0, 0, 1, 0, 1, 2};
  d.f = {{{{1, 0, 0}, -35.0}, {{0, 1, 0}, 35.0}},
         {{{1, 0, 0}, -7.0}, {{0, 1, 0}, 28.0}, {{1, 0, 1}, -1.0}},
         {{{1, 1, 0}, 1.0}, {{0, 0, 1}, -3.0}}};
  d.B = MatrixXd::Identity(3, 3);
  d.D = -0.005 * MatrixXd::Identity(3, 3);
  d.X = Region::cube(3, -20, 20);
  d.X0 = Region::cube(3, -2.5, 2.5);
  d.Xa = Region({box3(-20, -9, -20, -11, -20, -8), box3(3.5, 20, 5, 20, 4, 20)});
  d.kind = TopologyKind::line;
  d.u_bound = 50.0;
  return d;
}

BenchDef duffing() {
  BenchDef d;
  d.n = 2;
  d.m = 2;
  d.dict = {{1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {2, 1}, {1, 2}, {3, 0}, {0, 3}};
  d.theta = {0, 1, 0, 0, 1, 1, 0, 0, 1};
  d.f = {{{{0, 1}, 1.0}}, {{{1, 0}, 2.0}, {{0, 1}, -0.5}, {{3, 0}, -0.01}}};
  d.B = MatrixXd::Identity(2, 2);
  d.D = MatrixXd::Zero(2, 2);
  d.D(1, 0) = 0.005;
  d.X = Region::cube(2, -10, 10);
  d.X0 = Region::cube(2, -4, 4);
  d.Xa = Region({Box(Eigen::Vector2d(-10, -10), Eigen::Vector2d(-6, -5)),
                 Box(Eigen::Vector2d(6, 5), Eigen::Vector2d(10, 10))});
  d.kind = TopologyKind::binary;
  d.u_bound = 100.0;
  return d;
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"lorenz_fully", "lorenz_ring", "spacecraft_binary",
                                                 "spacecraft_star", "chen_line", "duffing_binary"};
  return names;
}

NetworkModel build_benchmark(const std::string& name, int N, const BenchmarkParams& params) {
  BenchDef d;
  if (name == "lorenz_fully") d = lorenz(false);
  else if (name == "lorenz_ring") d = lorenz(true);
  else if (name == "spacecraft_binary") d = spacecraft(false, params.inertias);
  else if (name == "spacecraft_star") d = spacecraft(true, params.inertias);
  else if (name == "chen_line") d = chen();
  else if (name == "duffing_binary") d = duffing();
  else throw std::invalid_argument("unknown benchmark '" + name + "'");

  Topology top = Topology::make(d.kind, N, d.n);

  Dictionary dict = dictionary_from_exponents(d.n, params.dict ? *params.dict : d.dict);
  PolyMatrix theta;
  if (params.theta) theta = factorize_theta(dict, *params.theta);
  else if (params.dict) theta = factorize_theta(dict);
  else theta = factorize_theta(dict, d.theta);

  MatrixXd A = MatrixXd::Zero(d.n, dict.size());
  for (int r = 0; r < d.n; ++r)
    for (auto& [e, c] : d.f[r]) {
      int k = dict.index_of(Monomial(e));
      if (k < 0) throw std::invalid_argument("dictionary misses a monomial of the " + name + " dynamics");
      A(r, k) = c;
    }

  double ub = std::isnan(params.u_bound) ? d.u_bound : params.u_bound;
  SubsystemSpec spec;
  spec.name = name;
  spec.n = d.n;
  spec.m = d.m;
  spec.D = d.D;
  spec.dict = dict;
  spec.theta = theta;
  spec.X = d.X;
  spec.X0 = d.X0;
  spec.Xa = d.Xa;
  spec.U = Region::cube(d.m, -ub, ub);

  std::vector<Region> Xs(N, d.X);
  NetworkModel net;
  net.benchmark = name;
  net.topology = top;
  for (int i = 0; i < N; ++i) {
    SubsystemSpec s = spec;
    s.W = internal_input_bounds(top, Xs, i);
    net.subsystems.emplace_back(std::move(s), A, d.B);
  }
  return net;
}

}  // namespace barrierforge
