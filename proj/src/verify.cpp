#include "barrierforge/verify.hpp"

#include "barrierforge/io.hpp"
#include "barrierforge/parallel.hpp"
#include "barrierforge/testing.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>

#ifndef BARRIERFORGE_DATA_DIR
#define BARRIERFORGE_DATA_DIR "data"
#endif

namespace barrierforge {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

long grid_count(int n, int k) {
  long c = 1;
  for (int i = 0; i < n; ++i) c *= k;
  return c;
}

VectorXd grid_point(const Box& b, int k, long idx) {
  VectorXd x(b.dim());
  for (int i = 0; i < b.dim(); ++i) {
    int j = static_cast<int>(idx % k);
    idx /= k;
    x[i] = k == 1 ? 0.5 * (b.lo[i] + b.hi[i]) : b.lo[i] + (b.hi[i] - b.lo[i]) * j / (k - 1);
  }
  return x;
}

struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  VectorXd at;
  void take(double m, const VectorXd& x) {
    if (m < margin) {
      margin = m;
      at = x;
    }
  }
};

// worst margin of f over the grid of every box in r, split across workers
template <class F>
Worst sweep(const Region& r, int k, int workers, F f, long& count) {
  Worst total;
  std::mutex mu;
  count = 0;
  for (auto& b : r.boxes) {
    long pts = grid_count(b.dim(), k);
    count += pts;
    int chunks = std::max(1, static_cast<int>(std::min<long>(pts, 64)));
    parallel_for(
        chunks,
        [&](int c) {
          Worst w;
          for (long i = c; i < pts; i += chunks) {
            VectorXd x = grid_point(b, k, i);
            w.take(f(x), x);
          }
          std::lock_guard lk(mu);
          if (w.margin < total.margin || (w.margin == total.margin && total.at.size() == 0)) total = w;
        },
        workers);
  }
  return total;
}

VerificationReport level_report(const std::string& id, const MatrixXd& P, const Region& r, double level, bool upper,
                                const GridSettings& g, double tol) {
  auto t0 = Clock::now();
  VerificationReport rep;
  rep.condition = id;
  rep.tol = tol;
  double scale = std::max(1.0, std::abs(level));
  long count = 0;
  Worst w = sweep(
      r, g.per_axis, g.workers,
      [&](const VectorXd& x) {
        double s = x.dot(P * x);
        return (upper ? level - s : s - level) / scale;
      },
      count);
  rep.samples = count;
  rep.worst_margin = w.margin;
  rep.argmin = w.at;
  rep.pass = w.margin >= -tol;
  rep.seconds = since(t0);
  return rep;
}


// closed-loop right-hand side with the controller folded into the drift:
// dx_i = K_i z(x_i) + D_i w_i over the union z of dictionary and controller monomials
class Kernel {
 public:
  Kernel(const NetworkModel& net, const BarrierCertificate* cbc) : top_(net.topology) {
    for (int i = 0; i < top_.size(); ++i) {
      auto& sub = net.subsystems[i];
      auto& spec = sub.spec();
      Sub s;
      s.n = spec.n;
      std::map<Monomial, int, GradedLess> idx;
      auto slot = [&](const Monomial& m) {
        auto [it, fresh] = idx.try_emplace(m, static_cast<int>(idx.size()));
        return it->second;
      };
      std::vector<std::pair<int, int>> dict_slots;  // (dictionary column, slot)
      for (int k = 0; k < spec.dict.size(); ++k) dict_slots.push_back({k, slot(spec.dict[k])});
      std::vector<std::tuple<int, int, double>> ctrl;  // (input, slot, coef)
      if (cbc)
        for (int r = 0; r < spec.m; ++r)
          for (auto& [m, c] : cbc->part(i).controller(r, 0).terms()) ctrl.push_back({r, slot(m), c});
      int Z = static_cast<int>(idx.size());
      const MatrixXd& A = PlantAccess::A(sub);
      const MatrixXd& B = PlantAccess::B(sub);
      s.K = MatrixXd::Zero(s.n, Z);
      for (auto [k, z] : dict_slots) s.K.col(z) += A.col(k);
      for (auto [r, z, c] : ctrl) s.K.col(z) += c * B.col(r);
      s.D = spec.D;
      s.exps.resize(Z * s.n);
      for (auto& [m, z] : idx)
        for (int k = 0; k < s.n; ++k) {
          s.exps[z * s.n + k] = m.exps[k];
          s.maxdeg = std::max(s.maxdeg, m.exps[k]);
        }
      if (cbc) s.P = cbc->part(i).P;
      scratch_ = std::max<size_t>(scratch_, Z + s.n * (s.maxdeg + 1));
      subs_.push_back(std::move(s));
    }
  }

  size_t scratch_size() const { return scratch_; }

  void rhs(const VectorXd& x, VectorXd& dx, VectorXd& w, std::vector<double>& buf) const {
    w.setZero(x.size());
    for (auto& b : top_.blocks()) {
      int to = top_.offsets()[b.to], from = top_.offsets()[b.from];
      for (int k = 0; k < top_.dims()[b.to]; ++k) w[to + k] += b.weight * x[from + k];
    }
    for (int i = 0; i < top_.size(); ++i) {
      auto& s = subs_[i];
      int o = top_.offsets()[i], n = s.n, Z = static_cast<int>(s.K.cols()), P1 = s.maxdeg + 1;
      double* pw = buf.data();
      double* z = pw + n * P1;
      for (int k = 0; k < n; ++k) {
        pw[k * P1] = 1.0;
        for (int p = 1; p < P1; ++p) pw[k * P1 + p] = pw[k * P1 + p - 1] * x[o + k];
      }
      for (int j = 0; j < Z; ++j) {
        double v = 1.0;
        for (int k = 0; k < n; ++k) v *= pw[k * P1 + s.exps[j * n + k]];
        z[j] = v;
      }
      for (int a = 0; a < n; ++a) {
        double v = 0;
        for (int j = 0; j < Z; ++j) v += s.K(a, j) * z[j];
        for (int k = 0; k < n; ++k) v += s.D(a, k) * w[o + k];
        dx[o + a] = v;
      }
    }
  }

  double barrier(const VectorXd& x) const {
    double b = 0;
    for (int i = 0; i < top_.size(); ++i) {
      int o = top_.offsets()[i], n = subs_[i].n;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) b += x[o + a] * subs_[i].P(a, c) * x[o + c];
    }
    return b;
  }

 private:
  struct Sub {
    int n = 0, maxdeg = 0;
    MatrixXd K, D, P;
    std::vector<int> exps;
  };
  const Topology& top_;
  std::vector<Sub> subs_;
  size_t scratch_ = 0;
};

}  // namespace

std::vector<VerificationReport> verify_csc(const StorageCertificate& cert, const SubsystemModel& model,
                                           const GridSettings& g) {
  auto& spec = model.spec();
  if (spec.n != cert.n) throw std::invalid_argument("certificate and model disagree on the state dimension");
  if (!cert.has_levels()) throw std::invalid_argument("certificate has no level sets");
  std::vector<VerificationReport> out;
  out.push_back(level_report("6a", cert.P, spec.X0, cert.eta, true, g, g.tol));
  out.push_back(level_report("6b", cert.P, spec.Xa, cert.mu, false, g, g.tol));

  auto t0 = Clock::now();
  VerificationReport rep;
  rep.condition = "7";
  rep.tol = g.tol;
  std::vector<VectorXd> ws;
  for (auto& b : spec.W.boxes)
    for (long i = 0; i < grid_count(b.dim(), g.w_per_axis); ++i) ws.push_back(grid_point(b, g.w_per_axis, i));
  int n = spec.n;
  long count = 0;
  Worst w = sweep(
      spec.X, g.per_axis, g.workers,
      [&](const VectorXd& x) {
        double s = x.dot(cert.P * x);
        VectorXd u = eval_local_controller(cert, cert.U0T, x);
        VectorXd grad = cert.P * x * 2.0;
        double lie0 = grad.dot(model.rhs(x, u, VectorXd::Zero(n)));
        VectorXd lw = spec.D.transpose() * grad;
        double base = -cert.lambda * s + x.dot(cert.Z22 * x) - lie0;
        VectorXd zx = cert.Z12 * x;
        double worst = std::numeric_limits<double>::infinity();
        for (auto& wv : ws) worst = std::min(worst, base + wv.dot(cert.Z11 * wv) + 2.0 * wv.dot(zx) - lw.dot(wv));
        return worst / (1.0 + std::abs(s));
      },
      count);
  rep.samples = count * static_cast<long>(ws.size());
  rep.worst_margin = w.margin;
  rep.argmin = w.at;
  rep.pass = w.margin >= -g.tol;
  rep.seconds = since(t0);
  out.push_back(rep);
  return out;
}

std::string default_fixture_dir() {
  if (const char* env = std::getenv("BARRIERFORGE_FIXTURES")) return env;
  return std::string(BARRIERFORGE_DATA_DIR) + "/fixtures";
}

FixtureCertificate load_fixture(const std::string& id, const std::string& dir) {
  std::string path = dir + "/" + id + ".json";
  if (!std::filesystem::exists(path)) throw std::invalid_argument("unknown fixture '" + id + "' (looked in " + dir + ")");
  json j = read_json(path);
  FixtureCertificate fx;
  fx.benchmark = j.at("benchmark").get<std::string>();
  fx.n = j.at("n").get<int>();
  fx.m = j.at("m").get<int>();
  fx.N = j.at("N").get<int>();
  fx.T = j.at("T").get<int>();
  fx.topology = j.at("topology").get<std::string>();
  fx.phi_bar = j.at("phi_bar").get<double>();
  fx.lambda = j.at("lambda").get<double>();
  fx.eta_i = j.at("eta_i").get<double>();
  fx.mu_i = j.at("mu_i").get<double>();
  fx.eta = j.at("eta").get<double>();
  fx.mu = j.at("mu").get<double>();
  fx.S = polynomial_from_json(j.at("S"), fx.n);
  auto& ctrl = j.at("controller");
  if (static_cast<int>(ctrl.size()) != fx.m) throw std::invalid_argument(path + ": controller count differs from m");
  fx.controller = PolyMatrix(fx.m, 1, fx.n);
  for (int r = 0; r < fx.m; ++r) fx.controller(r, 0) = polynomial_from_json(ctrl[r], fx.n);
  fx.checksum = j.at("checksum").get<double>();

  double sum = 0;
  for (auto& [mono, c] : fx.S.terms()) sum += c;
  for (int r = 0; r < fx.m; ++r)
    for (auto& [mono, c] : fx.controller(r, 0).terms()) sum += c;
  if (std::abs(sum - fx.checksum) > 1e-6 * std::max(1.0, std::abs(sum)))
    throw std::runtime_error(path + ": coefficient checksum mismatch");

  fx.P = MatrixXd::Zero(fx.n, fx.n);
  for (auto& [mono, c] : fx.S.terms()) {
    if (mono.degree() != 2) throw std::invalid_argument(path + ": S must be a quadratic form");
    std::vector<int> idx;
    for (int k = 0; k < fx.n; ++k)
      for (int e = 0; e < mono.exps[k]; ++e) idx.push_back(k);
    if (idx[0] == idx[1]) fx.P(idx[0], idx[0]) += c;
    else {
      fx.P(idx[0], idx[1]) += 0.5 * c;
      fx.P(idx[1], idx[0]) += 0.5 * c;
    }
  }
  return fx;
}

std::vector<VerificationReport> verify_fixture(const FixtureCertificate& fx, const SubsystemModel& model, double slack,
                                               const GridSettings& g) {
  if (model.spec().n != fx.n) throw std::invalid_argument("fixture and model disagree on the state dimension");
  // relative slack on the level itself
  std::vector<VerificationReport> out;
  out.push_back(level_report("6a", fx.P, model.spec().X0, fx.eta_i * (1 + slack), true, g, 0.0));
  out.push_back(level_report("6b", fx.P, model.spec().Xa, fx.mu_i * (1 - slack), false, g, 0.0));
  return out;
}

LocalCertificate local_certificate(const FixtureCertificate& fx) {
  return {fx.P, fx.controller, fx.eta_i, fx.mu_i, fx.lambda};
}

BarrierCertificate fixture_cbc(const FixtureCertificate& fx, int N) {
  BarrierCertificate b;
  b.parts.push_back(local_certificate(fx));
  b.index.assign(N, 0);
  b.eta = N * fx.eta_i;
  b.mu = N * fx.mu_i;
  b.lambda = fx.lambda;
  return b;
}

QuadraticExtrema quadratic_box_extrema(const MatrixXd& P, const Box& box) {
  int n = box.dim();
  QuadraticExtrema q{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), {}, {}};
  // each coordinate: 0 = lower bound, 1 = upper bound, 2 = free
  long combos = grid_count(n, 3);
  for (long c = 0; c < combos; ++c) {
    std::vector<int> st(n);
    long t = c;
    std::vector<int> fr, fx;
    for (int i = 0; i < n; ++i) {
      st[i] = static_cast<int>(t % 3);
      t /= 3;
      (st[i] == 2 ? fr : fx).push_back(i);
    }
    VectorXd x(n);
    for (int i : fx) x[i] = st[i] == 0 ? box.lo[i] : box.hi[i];
    if (!fr.empty()) {
      // minimise over the free coordinates: P_ff x_f = -P_fc x_c
      int f = static_cast<int>(fr.size());
      MatrixXd Pff(f, f);
      VectorXd rhs = VectorXd::Zero(f);
      for (int a = 0; a < f; ++a) {
        for (int b = 0; b < f; ++b) Pff(a, b) = P(fr[a], fr[b]);
        for (int i : fx) rhs[a] -= P(fr[a], i) * x[i];
      }
      VectorXd xf = Pff.ldlt().solve(rhs);
      for (int a = 0; a < f; ++a) x[fr[a]] = xf[a];
      if (!box.contains(x, 1e-12)) continue;
    }
    double v = x.dot(P * x);
    if (v < q.min) {
      q.min = v;
      q.argmin = x;
    }
    if (fr.empty() && v > q.max) {
      q.max = v;
      q.argmax = x;
    }
  }
  return q;
}

std::vector<VectorXd> sample_initial_states(const NetworkModel& net, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<VectorXd> out;
  for (int s = 0; s < count; ++s) {
    VectorXd x(net.total_dim());
    for (int i = 0; i < net.topology.size(); ++i) {
      auto& boxes = net.subsystems[i].spec().X0.boxes;
      const Box& b = boxes[std::min<size_t>(boxes.size() - 1, static_cast<size_t>(U(rng) * boxes.size()))];
      int o = net.topology.offsets()[i];
      for (int k = 0; k < b.dim(); ++k) x[o + k] = b.lo[k] + (b.hi[k] - b.lo[k]) * U(rng);
    }
    out.push_back(std::move(x));
  }
  return out;
}

SafetyReport simulate_network_closed_loop(const NetworkModel& net, const BarrierCertificate* cbc,
                                          const std::vector<VectorXd>& x0, const SimulationSettings& set) {
  if (!(set.dt > 0) || !(set.horizon > 0)) throw std::invalid_argument("dt and horizon must be positive");
  if (cbc && cbc->size() != net.topology.size()) throw std::invalid_argument("certificate and network sizes differ");
  auto t0 = Clock::now();
  const Topology& top = net.topology;
  std::vector<int> uoff{0};
  for (auto& s : net.subsystems) uoff.push_back(uoff.back() + s.spec().m);
  long steps = static_cast<long>(std::llround(set.horizon / set.dt));

  SafetyReport rep;
  rep.closed_loop = cbc != nullptr;
  if (cbc) {
    rep.eta = cbc->eta;
    rep.mu = cbc->mu;
    rep.lambda = cbc->lambda;
  }
  rep.rows.resize(x0.size());
  std::vector<std::vector<DumpRow>> dumps(x0.size());
  Kernel kernel(net, cbc);

  parallel_for(
      static_cast<int>(x0.size()),
      [&](int s) {
        VectorXd wbuf(x0[s].size());
        std::vector<double> scratch(kernel.scratch_size());
        auto f = [&](const VectorXd& x) {
          VectorXd dx(x.size());
          kernel.rhs(x, dx, wbuf, scratch);
          return dx;
        };
        auto B = [&](const VectorXd& x) { return cbc ? kernel.barrier(x) : std::nan(""); };
        auto record = [&](double t, const VectorXd& x, double b) {
          for (int i = 0; i < top.size(); ++i)
            dumps[s].push_back({s, t, i, x.segment(top.offsets()[i], top.dims()[i]), b});
        };
        TrajectorySummary row;
        row.sample = s;
        row.min_decay_margin = std::numeric_limits<double>::infinity();
        VectorXd x = x0[s];
        double b0 = B(x);
        row.max_B = b0;
        if (net.in_unsafe(x)) {
          row.unsafe_entered = true;
          row.entry_time = 0;
        }
        if (set.dump_every > 0) record(0, x, b0);
        const double h = set.dt;
        long k = 0;
        for (; k < steps; ++k) {
          VectorXd k1 = f(x);
          VectorXd k2 = f(x + 0.5 * h * k1);
          VectorXd k3 = f(x + 0.5 * h * k2);
          VectorXd k4 = f(x + h * k3);
          x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
          double t = (k + 1) * h;
          if (!x.allFinite() || x.cwiseAbs().maxCoeff() > set.blowup) {
            row.diverged = true;
            break;
          }
          if (!row.unsafe_entered && net.in_unsafe(x)) {
            row.unsafe_entered = true;
            row.entry_time = t;
          }
          double b1 = B(x);
          if (cbc) {
            row.max_B = std::max(row.max_B, b1);
            double bm = 0.5 * (b0 + b1);
            double margin = -cbc->lambda * bm + set.decay_tol * std::max(1.0, bm) - (b1 - b0) / h;
            row.min_decay_margin = std::min(row.min_decay_margin, margin);
            ++row.decay_checked;
            if (margin >= 0) ++row.decay_ok;
          }
          b0 = b1;
          if (set.dump_every > 0 && (k + 1) % set.dump_every == 0) record(t, x, b1);
        }
        row.end_time = std::min(k + 1, steps) * h;
        if (!cbc) {
          row.max_B = std::nan("");
          row.min_decay_margin = std::nan("");
        }
        rep.rows[s] = row;
      },
      set.workers);

  long checked = 0, ok = 0;
  rep.max_B = cbc ? -std::numeric_limits<double>::infinity() : std::nan("");
  for (auto& r : rep.rows) {
    rep.unsafe_count += r.unsafe_entered;
    checked += r.decay_checked;
    ok += r.decay_ok;
    if (cbc) rep.max_B = std::max(rep.max_B, r.max_B);
  }
  rep.decay_fraction = checked ? static_cast<double>(ok) / checked : 1.0;
  for (auto& d : dumps) rep.dump.insert(rep.dump.end(), d.begin(), d.end());
  rep.seconds = since(t0);
  return rep;
}

void write_safety_csv(const SafetyReport& r, const std::string& path) {
  std::ostringstream os;
  os.precision(10);
  os << "sample,unsafe_entered,max_B,min_decay_margin\n";
  for (auto& row : r.rows)
    os << row.sample << ',' << (row.unsafe_entered ? 1 : 0) << ',' << row.max_B << ',' << row.min_decay_margin << '\n';
  write_text(path, os.str());
}

void write_trajectory_dump(const SafetyReport& r, const std::string& path) {
  std::ostringstream os;
  os.precision(10);
  int n = r.dump.empty() ? 0 : static_cast<int>(r.dump.front().x.size());
  os << "sample,t,subsystem";
  for (int k = 0; k < n; ++k) os << ",x_" << k + 1;
  os << ",B\n";
  for (auto& d : r.dump) {
    os << d.sample << ',' << d.t << ',' << d.subsystem;
    for (int k = 0; k < d.x.size(); ++k) os << ',' << d.x[k];
    os << ',' << d.B << '\n';
  }
  write_text(path, os.str());
}

}  // namespace barrierforge
