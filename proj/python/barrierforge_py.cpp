#include "barrierforge/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace barrierforge;

namespace {

BlockKind kind_from(const std::string& s) {
  if (s == "free") return BlockKind::free;
  if (s == "nonneg") return BlockKind::nonneg;
  if (s == "psd") return BlockKind::psd;
  throw std::invalid_argument("block kind must be free, nonneg or psd");
}

std::vector<Term> terms_from(const std::vector<std::tuple<int, int, int, double>>& ts) {
  std::vector<Term> out;
  out.reserve(ts.size());
  for (auto& [b, r, c, v] : ts) out.push_back({b, r, c, v});
  return out;
}

py::dict solution_dict(const SdpSolution& s) {
  py::dict d;
  d["status"] = to_string(s.status);
  d["ok"] = s.ok();
  d["values"] = s.values;
  d["y"] = s.y;
  d["primal_objective"] = s.primal_objective;
  d["dual_objective"] = s.dual_objective;
  d["primal_residual"] = s.primal_residual;
  d["dual_residual"] = s.dual_residual;
  d["gap"] = s.gap;
  d["min_psd_eigenvalue"] = s.min_psd_eigenvalue;
  d["iterations"] = s.iterations;
  d["message"] = s.message;
  return d;
}

// polynomial from [(exponents, coef), ...]
Polynomial poly_from(int n, const std::vector<std::pair<std::vector<int>, double>>& terms) {
  Polynomial p(n);
  for (auto& [e, c] : terms) {
    if (static_cast<int>(e.size()) != n) throw std::invalid_argument("exponent tuple has the wrong length");
    p.add_term(Monomial(e), c);
  }
  return p;
}

std::string report_json(const std::vector<VerificationReport>& reps) {
  json a = json::array();
  for (auto& r : reps)
    a.push_back({{"condition", r.condition}, {"samples", r.samples}, {"worst_margin", r.worst_margin},
                 {"pass", r.pass}, {"tol", r.tol}, {"seconds", r.seconds}, {"note", r.note}});
  return a.dump();
}

}  // namespace

PYBIND11_MODULE(_barrierforge, m) {
  py::register_exception<InfeasibleError>(m, "InfeasibleError");
  py::register_exception<ConditioningError>(m, "ConditioningError");
  py::register_exception<CollectionError>(m, "CollectionError");
  py::register_exception<RetryExhausted>(m, "RetryExhausted");
  py::register_exception<MissingArtifact>(m, "MissingArtifact");
  py::register_exception<CompositionFailed>(m, "CompositionFailed");
  py::register_exception<CompositionRefused>(m, "CompositionRefused");

  py::class_<SdpProblem>(m, "SdpProblem")
      .def(py::init<>())
      .def("add_block", [](SdpProblem& p, const std::string& name, const std::string& kind, int dim) {
        return p.add_block(name, kind_from(kind), dim);
      })
      .def("add_equality",
           [](SdpProblem& p, const std::vector<std::tuple<int, int, int, double>>& terms, double rhs) {
             p.equalities.push_back({terms_from(terms), rhs});
           },
           py::arg("terms"), py::arg("rhs"))
      .def("set_objective",
           [](SdpProblem& p, const std::vector<std::tuple<int, int, int, double>>& terms, double offset) {
             p.objective = terms_from(terms);
             p.objective_offset = offset;
             p.has_objective = true;
           },
           py::arg("terms"), py::arg("offset") = 0.0)
      .def("num_scalar_variables", &SdpProblem::num_scalar_variables)
      .def_property_readonly("num_equalities", [](const SdpProblem& p) { return p.equalities.size(); })
      .def("validate", &SdpProblem::validate);

  m.def(
      "solve_sdp",
      [](const SdpProblem& p, double feas_tol, double gap_tol, int max_iters) {
        SdpSettings s;
        s.feas_tol = feas_tol;
        s.gap_tol = gap_tol;
        s.max_iters = max_iters;
        SdpSolution sol;
        {
          py::gil_scoped_release nogil;
          sol = solve(p, s);
        }
        return solution_dict(sol);
      },
      py::arg("problem"), py::arg("feas_tol") = SdpSettings{}.feas_tol, py::arg("gap_tol") = SdpSettings{}.gap_tol,
      py::arg("max_iters") = SdpSettings{}.max_iters);

  m.def(
      "sos_check",
      [](int nvars, const std::vector<std::pair<std::vector<int>, double>>& terms) {
        Polynomial p = poly_from(nvars, terms);
        SosConstraint c;
        c.name = "p";
        PolyMatrix pm(1, 1, nvars);
        pm(0, 0) = p;
        c.expr = PolyExprMatrix::from_poly(pm);
        SosProgram prog;
        auto h = compile_scalar_sos(prog, c);
        auto sol = solve(prog.problem());
        py::dict d = solution_dict(sol);
        d["feasible"] = sol.ok();
        std::vector<std::vector<int>> basis;
        for (auto& b : h.basis) basis.push_back(b.exps);
        d["basis"] = basis;
        if (sol.ok()) d["gram"] = sol.values[h.gram_block];
        return d;
      },
      py::arg("nvars"), py::arg("terms"));

  m.def("default_fixture_dir", &default_fixture_dir);
  m.def("benchmark_names", &benchmark_names);

  m.def(
      "load_fixture_json",
      [](const std::string& id, const std::string& dir) {
        auto f = load_fixture(id, dir.empty() ? default_fixture_dir() : dir);
        json j = {{"benchmark", f.benchmark}, {"n", f.n},        {"m", f.m},          {"N", f.N},
                  {"T", f.T},                 {"topology", f.topology}, {"phi_bar", f.phi_bar}, {"P", to_json(f.P)},
                  {"eta_i", f.eta_i},         {"mu_i", f.mu_i},   {"eta", f.eta},      {"mu", f.mu},
                  {"lambda", f.lambda}};
        return j.dump();
      },
      py::arg("id"), py::arg("dir") = "");

  m.def(
      "synth_json",
      [](const std::string& config, const std::string& out_dir) {
        RunConfig cfg = load_config(config);
        SynthResult r;
        {
          py::gil_scoped_release nogil;
          r = run_synth(cfg, {out_dir, "", false});
        }
        json certs = json::array();
        for (auto& c : r.certs) certs.push_back(to_json(c));
        json att = json::array();
        for (auto& a : r.attempts) att.push_back({{"attempt", a.attempt}, {"T", a.T}, {"seed", a.seed}});
        return json{{"certificates", certs},
                    {"index", r.index},
                    {"attempts", att},
                    {"lambda_max", r.check.lambda_max},
                    {"eta", r.check.eta},
                    {"mu", r.check.mu},
                    {"passes", r.check.passes}}
            .dump();
      },
      py::arg("config"), py::arg("out_dir") = "");

  m.def(
      "compose_json",
      [](const std::string& certs_dir, const std::string& topology, const std::string& out_path) {
        auto r = run_compose(certs_dir, topology, out_path);
        return json{{"passes", r.check.passes},
                    {"lambda_max", r.check.lambda_max},
                    {"eta", r.check.eta},
                    {"mu", r.check.mu},
                    {"level_ok", r.check.level_ok},
                    {"iterations", r.check.iterations}}
            .dump();
      },
      py::arg("certs_dir"), py::arg("topology") = "", py::arg("out_path") = "");

  m.def(
      "verify_json",
      [](const std::string& target, const std::string& benchmark, const std::string& certs_dir, double slack,
         int points) {
        VerifyOptions o;
        o.target = target;
        o.benchmark = benchmark;
        o.certs_dir = certs_dir;
        o.slack = slack;
        if (points > 0) o.grid.per_axis = points;
        std::vector<VerificationReport> reps;
        {
          py::gil_scoped_release nogil;
          reps = run_verify(o);
        }
        return report_json(reps);
      },
      py::arg("target"), py::arg("benchmark") = "", py::arg("certs_dir") = "", py::arg("slack") = 0.01,
      py::arg("points") = 0);

  m.def(
      "lanczos_max_dense",
      [](const MatrixXd& A, double tol, std::uint64_t seed) {
        if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
        auto r = lanczos_max([&A](const VectorXd& x) { return VectorXd(A * x); }, static_cast<int>(A.rows()), tol, seed);
        return py::make_tuple(r.value, r.converged, r.iterations);
      },
      py::arg("A"), py::arg("tol") = 1e-10, py::arg("seed") = 1);
}
