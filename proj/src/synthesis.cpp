#include "copos/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>

#include "copos/errors.hpp"

namespace copos {

bool is_nonnegative(const Eigen::MatrixXd& M, double tol) { return (M.array() >= -tol).all(); }

bool is_metzler(const Eigen::MatrixXd& M, double tol) {
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      if (r != c && M(r, c) < -tol) return false;
  return true;
}

bool PositivityReport::all() const {
  return std::all_of(state_ok.begin(), state_ok.end(), [](bool b) { return b; }) &&
         std::all_of(input_ok.begin(), input_ok.end(), [](bool b) { return b; });
}

PositivityReport check_positivity(const MatrixList& A, const MatrixList& B, TimeDomain domain) {
  PositivityReport r;
  for (const auto& a : A) r.state_ok.push_back(domain == TimeDomain::kDiscrete ? is_nonnegative(a) : is_metzler(a));
  for (const auto& b : B) r.input_ok.push_back(is_nonnegative(b));
  return r;
}

double spectral_radius(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw DimensionMismatch("spectral_radius: matrix is not square");
  if (!M.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
  const auto n = M.rows();
  if (n == 0) return 0.0;
  if (n == 1) return std::abs(M(0, 0));
  if (n == 2) {
    const double tr = M(0, 0) + M(1, 1);
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    const double disc = 0.25 * tr * tr - det;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      return std::max(std::abs(0.5 * tr + s), std::abs(0.5 * tr - s));
    }
    return std::sqrt(det);  // complex pair, |lambda|^2 = det
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("spectral_radius: eigenvalue iteration did not converge for a " + std::to_string(n) +
                             "x" + std::to_string(n) + " matrix");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::VectorXd lyapunov_decrement(const Eigen::MatrixXd& A, const Eigen::VectorXd& p, bool dual) {
  if (dual) return A * p - p;
  return A.transpose() * p - p;
}

std::optional<StabilityCertificate> lcplf_stability(const MatrixList& A, const LcplfOptions& opt) {
  if (A.empty()) throw std::invalid_argument("lcplf_stability: empty vertex list");
  const auto n = A.front().rows();
  for (const auto& a : A)
    if (a.rows() != n || a.cols() != n) throw DimensionMismatch("lcplf_stability: vertex matrices differ in size");

  lp::LinearProgram prog;
  for (Eigen::Index k = 0; k < n; ++k) prog.add_variable(opt.p_min, opt.p_max, "p" + std::to_string(k + 1));
  for (std::size_t i = 0; i < A.size(); ++i) {
    const Eigen::MatrixXd G = (opt.dual ? A[i] : Eigen::MatrixXd(A[i].transpose())) -
                              Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index h = 0; h < n; ++h)
      prog.add_constraint(lp::strictify(G.row(h).transpose(), lp::StrictRelation::kMuchLess, 0.0, opt.epsilon,
                                        "vertex " + std::to_string(i + 1) + " row " + std::to_string(h + 1)));
  }
  const auto outcome = lp::solve(prog);
  if (!outcome.feasible()) return std::nullopt;

  StabilityCertificate cert;
  cert.p = outcome.solution;
  cert.margins.resize(static_cast<Eigen::Index>(A.size()));
  for (std::size_t i = 0; i < A.size(); ++i)
    cert.margins(static_cast<Eigen::Index>(i)) = lyapunov_decrement(A[i], cert.p, opt.dual).maxCoeff();
  return cert;
}

void DesignProblem::validate() const {
  if (A.empty() || A.size() != B.size()) throw DimensionMismatch("design problem: need matching A and B vertex lists");
  const auto n = A.front().rows();
  const auto m = B.front().cols();
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i].rows() != n || A[i].cols() != n) throw DimensionMismatch("design problem: A_i must be n x n");
    if (B[i].rows() != n || B[i].cols() != m) throw DimensionMismatch("design problem: B_i must be n x m");
  }
  if (plant_states < 0 || plant_states > n) throw DimensionMismatch("design problem: bad plant state count");
  for (const auto& [r, c] : integral_couplings)
    if (r < 0 || r >= n || c < 0 || c >= n) throw DimensionMismatch("design problem: coupling entry out of range");
}

DesignProblem make_design_problem(const AugmentedVertexSystem<double>& sys) {
  if (!sys.discrete) throw std::invalid_argument("make_design_problem: system must be discretised first");
  DesignProblem prob;
  for (int i = 0; i < kRules; ++i) {
    prob.A.emplace_back(sys.A[i]);
    prob.B.emplace_back(sys.B[i]);
  }
  prob.plant_states = AugmentedVertexSystem<double>::kPlantStates;
  // Output h is plant state h (C = I), regulated by integrator kPlantStates + h.
  for (int h = 0; h < prob.plant_states; ++h) prob.integral_couplings.push_back({h, prob.plant_states + h});
  prob.sampling_period = sys.T;
  return prob;
}

DesignProblem make_design_problem(const VertexSystem<double>& sys, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("make_design_problem: T must be > 0");
  DesignProblem prob;
  for (int i = 0; i < kRules; ++i) {
    prob.A.emplace_back(Eigen::Matrix2d::Identity() + T * sys.A[i]);
    prob.B.emplace_back(T * sys.B[i]);
  }
  prob.plant_states = 2;
  prob.sampling_period = T;
  return prob;
}

namespace {

std::vector<int> positivity_rows(const DesignProblem& prob, const SynthesisOptions& opt) {
  if (!opt.positivity_rows.empty()) {
    for (int h : opt.positivity_rows)
      if (h < 0 || h >= prob.states()) throw DimensionMismatch("positivity row " + std::to_string(h) + " out of range");
    return opt.positivity_rows;
  }
  std::vector<int> rows;
  for (int h = 0; h < prob.plant_states; ++h) rows.push_back(h);
  return rows;
}

/// Maps M_j(z, t) onto LP columns: one free column, or a (+, -) pair.
struct GainLayout {
  int n = 0, m = 0, r = 0;
  bool split = false;
  int base = 0;

  int column(int j, int z, int t, int part = 0) const {
    const int entry = (j * m + z) * n + t;
    return base + (split ? 2 * entry + part : entry);
  }
  template <typename F>
  void for_each(int j, int z, int t, F&& f) const {
    if (split) {
      f(column(j, z, t, 0), 1.0);
      f(column(j, z, t, 1), -1.0);
    } else {
      f(column(j, z, t), 1.0);
    }
  }
  double value(const Eigen::VectorXd& x, int j, int z, int t) const {
    return split ? x(column(j, z, t, 0)) - x(column(j, z, t, 1)) : x(column(j, z, t));
  }
};

GainLayout gain_layout(const DesignProblem& prob, const SynthesisOptions& opt) {
  GainLayout g;
  g.n = prob.states();
  g.m = prob.inputs();
  g.r = prob.rules();
  g.split = opt.objective == SynthesisObjective::kMinEffort;
  g.base = g.n;
  return g;
}

}  // namespace

lp::LinearProgram build_synthesis_lp(const DesignProblem& prob, const SynthesisOptions& opt) {
  prob.validate();
  if (!(opt.epsilon > 0.0) || !(opt.q_min > 0.0) || !(opt.q_max >= opt.q_min))
    throw std::invalid_argument("synthesis options: need epsilon > 0 and 0 < q_min <= q_max");
  const int n = prob.states(), m = prob.inputs(), r = prob.rules();
  const GainLayout g = gain_layout(prob, opt);

  lp::LinearProgram prog;
  // Q = diag(q) >> 0.
  for (int t = 0; t < n; ++t) prog.add_variable(opt.q_min, opt.q_max, "q" + std::to_string(t + 1));
  // M_j, optionally <= 0.
  for (int j = 0; j < r; ++j)
    for (int z = 0; z < m; ++z)
      for (int t = 0; t < n; ++t) {
        const std::string name = "m" + std::to_string(j + 1) + "_" + std::to_string(z + 1) + std::to_string(t + 1);
        if (g.split) {
          prog.add_variable(0.0, opt.enforce_nonpositive_gains ? 0.0 : lp::kInf, name + "+");
          prog.add_variable(0.0, lp::kInf, name + "-");
        } else {
          prog.add_variable(-lp::kInf, opt.enforce_nonpositive_gains ? 0.0 : lp::kInf, name);
        }
      }
  const int nv = prog.n_vars();

  const auto tag = [](int i, int j) { return "i=" + std::to_string(i + 1) + " j=" + std::to_string(j + 1); };
  const std::vector<int> rows = positivity_rows(prob, opt);
  const double coupling_margin = opt.integral_coupling_rate * prob.sampling_period;

  for (int i = 0; i < r; ++i) {
    const Eigen::MatrixXd& A = prob.A[i];
    const Eigen::MatrixXd& B = prob.B[i];
    for (int j = 0; j < r; ++j) {
      // Decrease: [(A_i - I) Q + B_i M_j] 1 << 0.
      for (int h = 0; h < n; ++h) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
        for (int t = 0; t < n; ++t) {
          c(t) += A(h, t) - (h == t ? 1.0 : 0.0);
          for (int z = 0; z < m; ++z)
            if (B(h, z) != 0.0) g.for_each(j, z, t, [&](int col, double s) { c(col) += s * B(h, z); });
        }
        prog.add_constraint(lp::strictify(std::move(c), lp::StrictRelation::kMuchLess, 0.0, opt.epsilon,
                                          "decrease " + tag(i, j) + " h=" + std::to_string(h + 1)));
      }
      // Positivity: (A_i Q + B_i M_j)_{ht} >= 0 on the configured rows, tightened to
      // a positive floor on the integral-coupling entries.
      for (int h = 0; h < n; ++h) {
        const bool positive_row = std::find(rows.begin(), rows.end(), h) != rows.end();
        for (int t = 0; t < n; ++t) {
          const bool coupling =
              coupling_margin > 0.0 && std::find(prob.integral_couplings.begin(), prob.integral_couplings.end(),
                                                 std::make_pair(h, t)) != prob.integral_couplings.end();
          if (!positive_row && !coupling) continue;
          Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
          c(t) += A(h, t) - (coupling ? coupling_margin : 0.0);
          for (int z = 0; z < m; ++z)
            if (B(h, z) != 0.0) g.for_each(j, z, t, [&](int col, double s) { c(col) += s * B(h, z); });
          prog.add_constraint(std::move(c), lp::Relation::kGreaterEqual, 0.0,
                              std::string(coupling ? "coupling " : "positivity ") + tag(i, j) + " h=" + std::to_string(h + 1) +
                                  " t=" + std::to_string(t + 1));
        }
      }
    }
  }

  if (opt.objective == SynthesisObjective::kMinEffort) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
    c.tail(nv - n).setOnes();
    prog.set_objective(std::move(c), lp::Sense::kMinimize);
  } else {
    prog.set_feasibility();
  }
  return prog;
}

SynthesisOutcome synthesize_pdc(const DesignProblem& prob, const SynthesisOptions& opt) {
  const lp::LinearProgram prog = build_synthesis_lp(prob, opt);
  SynthesisOutcome out;
  out.lp_variables = prog.n_vars();
  out.lp_constraints = prog.n_constraints();
  const lp::LpOutcome sol = lp::solve(prog);
  out.status = sol.status;
  out.diagnostics = sol.infeasibility;
  if (!sol.feasible()) return out;

  const int n = prob.states(), m = prob.inputs(), r = prob.rules();
  const GainLayout g = gain_layout(prob, opt);
  SynthesisResult res;
  res.q = sol.solution.head(n);
  for (int j = 0; j < r; ++j) {
    Eigen::MatrixXd M(m, n);
    for (int z = 0; z < m; ++z)
      for (int t = 0; t < n; ++t) M(z, t) = g.value(sol.solution, j, z, t);
    res.K.push_back(M * res.q.cwiseInverse().asDiagonal());
    res.M.push_back(std::move(M));
  }
  res.lp_objective = sol.objective_value;
  res.lp_iterations = sol.iterations;

  res.certificate.p = res.q;
  res.certificate.margins.resize(r * r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const Eigen::MatrixXd Acl = prob.A[i] + prob.B[i] * res.K[j];
      res.certificate.margins(i * r + j) = lyapunov_decrement(Acl, res.q, /*dual=*/true).maxCoeff();
    }
  res.report = verify_closed_loop(prob, res.K, opt, res.q);
  out.result = std::move(res);
  return out;
}

ClosedLoopReport verify_closed_loop(const DesignProblem& prob, const MatrixList& K, const SynthesisOptions& opt,
                                    const Eigen::VectorXd& p) {
  prob.validate();
  const int n = prob.states(), m = prob.inputs(), r = prob.rules();
  if (static_cast<int>(K.size()) != r) throw DimensionMismatch("verify_closed_loop: need one gain per rule");
  for (const auto& k : K)
    if (k.rows() != m || k.cols() != n) throw DimensionMismatch("verify_closed_loop: gain must be m x n");
  if (p.size() != 0 && p.size() != n) throw DimensionMismatch("verify_closed_loop: p must have n entries");
  const std::vector<int> rows = positivity_rows(prob, opt);

  ClosedLoopReport rep;
  MatrixList closed;
  closed.reserve(r * r);
  rep.min_row_entry = std::numeric_limits<double>::infinity();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      PairReport pr;
      pr.i = i;
      pr.j = j;
      pr.closed_loop = prob.A[i] + prob.B[i] * K[j];
      double lowest = std::numeric_limits<double>::infinity();
      for (int h : rows) lowest = std::min(lowest, pr.closed_loop.row(h).minCoeff());
      pr.min_row_entry = rows.empty() ? 0.0 : lowest;
      pr.rows_nonnegative = pr.min_row_entry >= -1e-9;
      pr.spectral_radius = spectral_radius(pr.closed_loop);
      closed.push_back(pr.closed_loop);
      rep.pairs.push_back(std::move(pr));
    }

  LcplfOptions lo;
  lo.epsilon = opt.epsilon;
  lo.p_min = opt.q_min;
  lo.p_max = opt.q_max;
  lo.dual = true;
  rep.independent_certificate = lcplf_stability(closed, lo);

  const Eigen::VectorXd pv = p.size() ? p : (rep.independent_certificate ? rep.independent_certificate->p : Eigen::VectorXd());
  rep.worst_decrement = -std::numeric_limits<double>::infinity();
  for (auto& pr : rep.pairs) {
    pr.decrement = pv.size() ? lyapunov_decrement(pr.closed_loop, pv, true).maxCoeff()
                             : std::numeric_limits<double>::infinity();
    rep.worst_decrement = std::max(rep.worst_decrement, pr.decrement);
    rep.worst_spectral_radius = std::max(rep.worst_spectral_radius, pr.spectral_radius);
    rep.min_row_entry = std::min(rep.min_row_entry, pr.min_row_entry);
  }
  rep.all_schur = rep.worst_spectral_radius < 1.0;
  rep.all_rows_nonnegative = rep.min_row_entry >= -1e-9;
  rep.decrement_ok = rep.worst_decrement < 0.0;
  return rep;
}

}  // namespace copos
