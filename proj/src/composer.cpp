#include "barrierforge/composer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace barrierforge {

ZComp::ZComp(std::vector<SupplyRate> rates, std::vector<int> index) : rates_(std::move(rates)), index_(std::move(index)) {
  for (auto& r : rates_) {
    auto n = r.Z22.rows();
    if (r.Z11.rows() != n || r.Z11.cols() != n || r.Z12.rows() != n || r.Z12.cols() != n || r.Z21.rows() != n ||
        r.Z21.cols() != n || r.Z22.cols() != n)
      throw std::invalid_argument("supply-rate blocks must all be n x n");
  }
  for (int k : index_) {
    if (k < 0 || k >= static_cast<int>(rates_.size())) throw std::invalid_argument("supply-rate index out of range");
    offsets_.push_back(offsets_.back() + static_cast<int>(rates_[k].Z22.rows()));
  }
}

VectorXd ZComp::apply(const VectorXd& wx) const {
  int n = offsets_.back();
  if (wx.size() != 2 * n) throw std::invalid_argument("ZComp::apply dimension mismatch");
  VectorXd out(2 * n);
  for (int i = 0; i < size(); ++i) {
    auto& r = rate(i);
    int o = offsets_[i], d = offsets_[i + 1] - o;
    auto w = wx.segment(o, d);
    auto x = wx.segment(n + o, d);
    out.segment(o, d) = r.Z11 * w + r.Z12 * x;
    out.segment(n + o, d) = r.Z21 * w + r.Z22 * x;
  }
  return out;
}

MatrixXd ZComp::dense() const {
  int n = offsets_.back();
  MatrixXd Z = MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < size(); ++i) {
    auto& r = rate(i);
    int o = offsets_[i], d = offsets_[i + 1] - o;
    Z.block(o, o, d, d) = r.Z11;
    Z.block(o, n + o, d, d) = r.Z12;
    Z.block(n + o, o, d, d) = r.Z21;
    Z.block(n + o, n + o, d, d) = r.Z22;
  }
  return Z;
}

LinearOperator composed_operator(const Topology& top, const ZComp& z) {
  if (top.offsets() != z.offsets()) throw std::invalid_argument("topology and supply rates disagree on dimensions");
  return [&top, &z](const VectorXd& x) {
    int n = top.total_dim();
    VectorXd wx(2 * n);
    wx.head(n) = top.matvec(x);
    wx.tail(n) = x;
    VectorXd r = z.apply(wx);
    return VectorXd(top.matvec_transpose(r.head(n)) + r.tail(n));
  };
}

MatrixXd composed_dense(const Topology& top, const ZComp& z) {
  int n = top.total_dim();
  MatrixXd MI(2 * n, n);
  MI.topRows(n) = top.dense();
  MI.bottomRows(n) = MatrixXd::Identity(n, n);
  return MI.transpose() * z.dense() * MI;
}

CompositionCheck check_composition(const Topology& top, const ZComp& z, double eta, double mu,
                                   const CompositionSettings& set) {
  auto t0 = std::chrono::steady_clock::now();
  CompositionCheck c;
  c.psd_tol = set.psd_tol;
  c.eta = eta;
  c.mu = mu;
  auto op = composed_operator(top, z);
  auto r = lanczos_max(op, top.total_dim(), set.lanczos_tol, set.seed);
  if (!r.converged) throw std::runtime_error("Lanczos did not converge on the composed operator");
  c.lambda_max = r.value;
  c.iterations = r.iterations;
  c.level_margin = mu - eta;
  c.level_ok = eta < mu;
  c.passes = c.lambda_max <= set.psd_tol && c.level_ok;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

CompositionCheck check_composition(const Topology& top, const std::vector<StorageCertificate>& certs,
                                   const std::vector<int>& index, const CompositionSettings& set) {
  if (static_cast<int>(index.size()) != top.size()) throw std::invalid_argument("one certificate index per subsystem");
  std::vector<SupplyRate> rates;
  for (auto& c : certs) rates.push_back(SupplyRate::of(c));
  double eta = 0, mu = 0;
  for (int k : index) {
    if (!certs.at(k).has_levels()) throw std::invalid_argument("certificate is missing eta/mu");
    eta += certs[k].eta;
    mu += certs[k].mu;
  }
  ZComp z(std::move(rates), index);
  return check_composition(top, z, eta, mu, set);
}

double BarrierCertificate::value(const Topology& top, const VectorXd& x) const {
  double b = 0;
  for (int i = 0; i < size(); ++i) {
    int o = top.offsets()[i], d = top.dims()[i];
    auto xi = x.segment(o, d);
    b += xi.dot(part(i).P * xi);
  }
  return b;
}

VectorXd BarrierCertificate::input(const Topology& top, const std::vector<int>& input_offsets, const VectorXd& x) const {
  VectorXd u(input_offsets.back());
  for (int i = 0; i < size(); ++i) {
    int o = top.offsets()[i], d = top.dims()[i];
    VectorXd xi = x.segment(o, d);
    u.segment(input_offsets[i], input_offsets[i + 1] - input_offsets[i]) = part(i).controller.eval(xi).col(0);
  }
  return u;
}

LocalCertificate local_certificate(const StorageCertificate& c) {
  return {c.P, c.controller(), c.eta, c.mu, c.lambda};
}

BarrierCertificate assemble_cbc(const std::vector<StorageCertificate>& certs, const std::vector<int>& index,
                                const CompositionCheck& check) {
  if (!check.passes) {
    std::ostringstream os;
    os << "composition check failed (lambda_max = " << check.lambda_max << ", mu - eta = " << check.level_margin
       << "); refusing to assemble a barrier certificate";
    throw CompositionRefused(os.str());
  }
  BarrierCertificate b;
  for (auto& c : certs) b.parts.push_back(local_certificate(c));
  b.index = index;
  b.lambda = std::numeric_limits<double>::infinity();
  for (int k : index) {
    b.eta += certs.at(k).eta;
    b.mu += certs[k].mu;
    b.lambda = std::min(b.lambda, certs[k].lambda);
  }
  b.check = check;
  return b;
}

RetryState RetryPolicy::next(const std::vector<RetryState>& history) const {
  if (history.empty()) throw std::invalid_argument("retry policy needs at least one attempt");
  if (static_cast<int>(history.size()) >= max_retries) {
    std::ostringstream os;
    os << "composition failed after " << history.size() << " attempts (T =";
    for (auto& h : history) os << ' ' << h.T;
    os << ")";
    throw RetryExhausted(os.str(), history);
  }
  auto& last = history.back();
  RetryState r;
  r.attempt = last.attempt + 1;
  r.T = static_cast<int>(std::ceil(last.T * growth - 1e-9));
  r.seed = reseed(history.front().seed, r.attempt);
  return r;
}

std::uint64_t reseed(std::uint64_t seed, int attempt) {
  if (attempt == 0) return seed;
  // splitmix64 step
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace barrierforge
