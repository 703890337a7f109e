#include "copos/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "copos/errors.hpp"

namespace copos::lp {

const char* to_string(Relation r) {
  switch (r) {
    case Relation::kLessEqual: return "<=";
    case Relation::kGreaterEqual: return ">=";
    case Relation::kEqual: return "=";
  }
  return "?";
}

const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
  }
  return "?";
}

LinearProgram::LinearProgram(int n_vars) {
  if (n_vars < 0) throw std::invalid_argument("LinearProgram: negative variable count");
  bounds_.assign(n_vars, VariableBounds{});
  names_.assign(n_vars, std::string{});
  objective_ = Eigen::VectorXd::Zero(n_vars);
}

int LinearProgram::add_variable(double lower, double upper, std::string name) {
  bounds_.push_back({lower, upper});
  names_.push_back(std::move(name));
  const int n = n_vars();
  objective_.conservativeResize(n);
  objective_(n - 1) = 0.0;
  for (auto& c : constraints_) {
    c.coeffs.conservativeResize(n);
    c.coeffs(n - 1) = 0.0;
  }
  return n - 1;
}

void LinearProgram::add_constraint(Eigen::VectorXd coeffs, Relation relation, double bound, std::string label) {
  add_constraint(Constraint{std::move(coeffs), relation, bound, std::move(label)});
}

void LinearProgram::add_constraint(Constraint c) {
  if (c.coeffs.size() != n_vars())
    throw std::invalid_argument("add_constraint: coefficient vector has length " + std::to_string(c.coeffs.size()) +
                                ", expected " + std::to_string(n_vars()));
  constraints_.push_back(std::move(c));
}

void LinearProgram::set_objective(Eigen::VectorXd coeffs, Sense sense) {
  if (coeffs.size() != n_vars()) throw std::invalid_argument("set_objective: wrong coefficient count");
  objective_ = std::move(coeffs);
  sense_ = sense;
}

void LinearProgram::validate() const {
  if (objective_.size() != n_vars()) throw std::invalid_argument("LinearProgram: objective length mismatch");
  if (!objective_.allFinite()) throw std::invalid_argument("LinearProgram: non-finite objective");
  for (int j = 0; j < n_vars(); ++j) {
    const auto& b = bounds_[j];
    if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper || b.lower == kInf || b.upper == -kInf)
      throw std::invalid_argument("LinearProgram: invalid bounds on variable " + std::to_string(j));
  }
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const auto& c = constraints_[i];
    if (c.coeffs.size() != n_vars() || !c.coeffs.allFinite() || !std::isfinite(c.bound))
      throw std::invalid_argument("LinearProgram: malformed constraint " + std::to_string(i));
  }
}

double LinearProgram::max_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (int j = 0; j < n_vars(); ++j) {
    worst = std::max(worst, bounds_[j].lower - x(j));
    worst = std::max(worst, x(j) - bounds_[j].upper);
  }
  for (const auto& c : constraints_) {
    const double lhs = c.coeffs.dot(x);
    switch (c.relation) {
      case Relation::kLessEqual: worst = std::max(worst, lhs - c.bound); break;
      case Relation::kGreaterEqual: worst = std::max(worst, c.bound - lhs); break;
      case Relation::kEqual: worst = std::max(worst, std::abs(lhs - c.bound)); break;
    }
  }
  return worst;
}

Constraint strictify(Eigen::VectorXd coeffs, StrictRelation relation, double rhs, double margin, std::string label) {
  if (!(margin > 0.0)) throw std::invalid_argument("strictify: margin must be > 0");
  if (relation == StrictRelation::kMuchLess)
    return {std::move(coeffs), Relation::kLessEqual, rhs - margin, std::move(label)};
  return {std::move(coeffs), Relation::kGreaterEqual, rhs + margin, std::move(label)};
}

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ColumnKind { kStructural, kSlack, kArtificial };

/// Program in the form  A y = b, y >= 0, b >= 0, rows equilibrated.
struct StandardForm {
  Tableau A;
  Eigen::VectorXd b;
  std::vector<ColumnKind> kind;
  std::vector<int> struct_var;     // original variable of each structural column
  std::vector<double> struct_sign;
  Eigen::VectorXd offset;          // x = offset + sum(sign * y)
  std::vector<int> initial_basis;
  std::vector<std::string> row_label;
  bool trivially_infeasible = false;
  std::vector<Diagnostic> trivial_diagnostics;
};

struct PendingRow {
  Eigen::VectorXd coeffs;  // over structural columns
  Relation relation;
  double rhs;
  std::string label;
};

StandardForm to_standard_form(const LinearProgram& lp, double tol) {
  StandardForm sf;
  const int n = lp.n_vars();
  sf.offset = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<int, double>> upper_rows;  // (structural column, bound)
  std::vector<std::vector<std::pair<int, double>>> columns_of_var(n);
  for (int j = 0; j < n; ++j) {
    const auto& bd = lp.bounds()[j];
    const auto add_col = [&](double sign) {
      const int col = static_cast<int>(sf.struct_var.size());
      sf.struct_var.push_back(j);
      sf.struct_sign.push_back(sign);
      columns_of_var[j].push_back({col, sign});
      return col;
    };
    if (std::isfinite(bd.lower)) {
      sf.offset(j) = bd.lower;
      const int col = add_col(+1.0);
      if (std::isfinite(bd.upper)) upper_rows.push_back({col, bd.upper - bd.lower});
    } else if (std::isfinite(bd.upper)) {
      sf.offset(j) = bd.upper;
      add_col(-1.0);
    } else {
      add_col(+1.0);
      add_col(-1.0);
    }
  }
  const int n_struct = static_cast<int>(sf.struct_var.size());

  std::vector<PendingRow> rows;
  rows.reserve(lp.constraints().size() + upper_rows.size());
  for (const auto& c : lp.constraints()) {
    PendingRow r{Eigen::VectorXd::Zero(n_struct), c.relation, c.bound - c.coeffs.dot(sf.offset), c.label};
    for (int j = 0; j < n; ++j) {
      if (c.coeffs(j) == 0.0) continue;
      for (const auto& [col, sign] : columns_of_var[j]) r.coeffs(col) = c.coeffs(j) * sign;
    }
    rows.push_back(std::move(r));
  }
  for (const auto& [col, ub] : upper_rows) {
    PendingRow r{Eigen::VectorXd::Zero(n_struct), Relation::kLessEqual, ub,
                 "upper bound of " + std::to_string(sf.struct_var[col])};
    r.coeffs(col) = 1.0;
    rows.push_back(std::move(r));
  }

  // Equilibrate, normalise the right-hand side sign and drop empty rows.
  std::vector<PendingRow> kept;
  kept.reserve(rows.size());
  for (auto& r : rows) {
    const double scale = r.coeffs.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
      const bool ok = (r.relation == Relation::kLessEqual && r.rhs >= -tol) ||
                      (r.relation == Relation::kGreaterEqual && r.rhs <= tol) ||
                      (r.relation == Relation::kEqual && std::abs(r.rhs) <= tol);
      if (!ok) {
        sf.trivially_infeasible = true;
        sf.trivial_diagnostics.push_back({r.label, std::abs(r.rhs)});
      }
      continue;
    }
    r.coeffs /= scale;
    r.rhs /= scale;
    if (r.rhs < 0.0 || (r.rhs == 0.0 && r.relation == Relation::kGreaterEqual)) {
      r.coeffs = -r.coeffs;
      r.rhs = -r.rhs;
      if (r.relation == Relation::kLessEqual)
        r.relation = Relation::kGreaterEqual;
      else if (r.relation == Relation::kGreaterEqual)
        r.relation = Relation::kLessEqual;
    }
    kept.push_back(std::move(r));
  }

  const int m = static_cast<int>(kept.size());
  int n_slack = 0, n_art = 0;
  for (const auto& r : kept) {
    if (r.relation != Relation::kEqual) ++n_slack;
    if (r.relation != Relation::kLessEqual) ++n_art;
  }
  const int N = n_struct + n_slack + n_art;
  sf.A = Tableau::Zero(m, N);
  sf.b = Eigen::VectorXd::Zero(m);
  sf.kind.assign(N, ColumnKind::kStructural);
  sf.initial_basis.assign(m, -1);
  sf.row_label.resize(m);
  int slack = n_struct, art = n_struct + n_slack;
  for (int i = 0; i < m; ++i) {
    const auto& r = kept[i];
    sf.A.row(i).head(n_struct) = r.coeffs.transpose();
    sf.b(i) = r.rhs;
    sf.row_label[i] = r.label;
    if (r.relation == Relation::kLessEqual) {
      sf.A(i, slack) = 1.0;
      sf.kind[slack] = ColumnKind::kSlack;
      sf.initial_basis[i] = slack++;
    } else {
      if (r.relation == Relation::kGreaterEqual) {
        sf.A(i, slack) = -1.0;
        sf.kind[slack] = ColumnKind::kSlack;
        ++slack;
      }
      sf.A(i, art) = 1.0;
      sf.kind[art] = ColumnKind::kArtificial;
      sf.initial_basis[i] = art++;
    }
  }
  return sf;
}

enum class PhaseResult { kOptimal, kUnbounded };

class Simplex {
 public:
  Simplex(Tableau& T, std::vector<int>& basis, const SolverOptions& opt) : T_(T), basis_(basis), opt_(opt) {}

  /// Minimises the objective whose reduced costs are in `cost`
  /// (last entry holds minus the current objective value).
  PhaseResult run(Eigen::RowVectorXd& cost, const std::vector<char>& eligible, long& iterations) {
    const int m = static_cast<int>(T_.rows());
    const int N = static_cast<int>(T_.cols()) - 1;
    bool bland = false;
    int degenerate_run = 0;
    for (;;) {
      if (++iterations > opt_.max_iterations) throw ConvergenceFailure("simplex: iteration limit reached");
      int enter = -1;
      double best = -opt_.cost_tolerance;
      for (int j = 0; j < N; ++j) {
        if (!eligible[j]) continue;
        if (cost(j) < best) {
          enter = j;
          if (bland) break;
          best = cost(j);
        }
      }
      if (enter < 0) return PhaseResult::kOptimal;

      int leave = -1;
      double min_ratio = kInf;
      for (int i = 0; i < m; ++i) {
        const double a = T_(i, enter);
        if (a <= opt_.pivot_tolerance) continue;
        const double ratio = T_(i, N) / a;
        if (leave < 0 || ratio < min_ratio - 1e-12 * std::max(1.0, std::abs(min_ratio))) {
          leave = i;
          min_ratio = ratio;
        } else if (ratio <= min_ratio + 1e-12 * std::max(1.0, std::abs(min_ratio))) {
          // Tie: Bland keeps the smallest basic index, Dantzig the larger pivot.
          if (bland ? basis_[i] < basis_[leave] : a > T_(leave, enter)) {
            leave = i;
            min_ratio = std::min(min_ratio, ratio);
          }
        }
      }
      if (leave < 0) return PhaseResult::kUnbounded;

      if (min_ratio <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_switch) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      pivot(leave, enter, cost);
    }
  }

  void pivot(int row, int col, Eigen::RowVectorXd& cost) {
    const double p = T_(row, col);
    T_.row(row) /= p;
    T_(row, col) = 1.0;
    const int m = static_cast<int>(T_.rows());
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f == 0.0) continue;
      T_.row(i).noalias() -= f * T_.row(row);
      T_(i, col) = 0.0;
    }
    const double fc = cost(col);
    if (fc != 0.0) {
      cost.noalias() -= fc * T_.row(row);
      cost(col) = 0.0;
    }
    basis_[row] = col;
  }

 private:
  Tableau& T_;
  std::vector<int>& basis_;
  const SolverOptions& opt_;
};

}  // namespace

LpOutcome solve(const LinearProgram& program, const SolverOptions& opt) {
  program.validate();
  LpOutcome out;
  StandardForm sf = to_standard_form(program, opt.feasibility_tolerance);
  if (sf.trivially_infeasible) {
    out.status = Status::kInfeasible;
    out.infeasibility = sf.trivial_diagnostics;
    return out;
  }
  const int m = static_cast<int>(sf.A.rows());
  const int N = static_cast<int>(sf.A.cols());

  Tableau T(m, N + 1);
  T.leftCols(N) = sf.A;
  T.col(N) = sf.b;
  std::vector<int> basis = sf.initial_basis;
  Simplex simplex(T, basis, opt);
  long iterations = 0;

  // Phase 1: minimise the sum of artificials.
  std::vector<char> eligible(N, 1);
  bool has_artificial = false;
  for (int j = 0; j < N; ++j)
    if (sf.kind[j] == ColumnKind::kArtificial) {
      eligible[j] = 0;
      has_artificial = true;
    }
  if (has_artificial) {
    Eigen::RowVectorXd cost = Eigen::RowVectorXd::Zero(N + 1);
    for (int i = 0; i < m; ++i)
      if (sf.kind[basis[i]] == ColumnKind::kArtificial) cost -= T.row(i);
    for (int i = 0; i < m; ++i) cost(basis[i]) = 0.0;
    simplex.run(cost, eligible, iterations);
    // Each artificial is judged against the scale of its own row; a global
    // scale would let one large bound row hide a small strictness margin.
    std::vector<int> origin(N, -1);
    for (int i = 0; i < m; ++i)
      if (sf.kind[sf.initial_basis[i]] == ColumnKind::kArtificial) origin[sf.initial_basis[i]] = i;
    const auto row_tol = [&](int r) { return opt.feasibility_tolerance * std::max(1.0, sf.b(r)); };
    bool infeasible = false;
    for (int i = 0; i < m; ++i)
      if (sf.kind[basis[i]] == ColumnKind::kArtificial && T(i, N) > row_tol(origin[basis[i]])) infeasible = true;
    if (infeasible) {
      out.status = Status::kInfeasible;
      out.iterations = static_cast<int>(iterations);
      for (int i = 0; i < m; ++i) {
        const int r = sf.kind[basis[i]] == ColumnKind::kArtificial ? origin[basis[i]] : -1;
        if (r >= 0 && T(i, N) > row_tol(r)) out.infeasibility.push_back({sf.row_label[r], T(i, N)});
      }
      std::stable_sort(out.infeasibility.begin(), out.infeasibility.end(),
                       [](const Diagnostic& a, const Diagnostic& b) { return a.residual > b.residual; });
      if (static_cast<int>(out.infeasibility.size()) > opt.max_diagnostics)
        out.infeasibility.resize(opt.max_diagnostics);
      return out;
    }
    // Drive zero-valued artificials out of the basis where possible.
    Eigen::RowVectorXd dummy = Eigen::RowVectorXd::Zero(N + 1);
    for (int i = 0; i < m; ++i) {
      if (sf.kind[basis[i]] != ColumnKind::kArtificial) continue;
      int best = -1;
      double best_abs = 1e-9;
      for (int j = 0; j < N; ++j) {
        if (sf.kind[j] == ColumnKind::kArtificial) continue;
        if (std::abs(T(i, j)) > best_abs) {
          best = j;
          best_abs = std::abs(T(i, j));
        }
      }
      if (best >= 0) simplex.pivot(i, best, dummy);
      // Otherwise the row is redundant; its artificial stays basic at zero
      // and can never enter again.
    }
  }

  const Sense sense = program.sense();
  if (sense != Sense::kFeasibility) {
    const double sgn = (sense == Sense::kMaximize) ? -1.0 : 1.0;
    Eigen::RowVectorXd cost = Eigen::RowVectorXd::Zero(N + 1);
    const int n_struct = static_cast<int>(sf.struct_var.size());
    for (int k = 0; k < n_struct; ++k) cost(k) = sgn * program.objective()(sf.struct_var[k]) * sf.struct_sign[k];
    for (int i = 0; i < m; ++i) {
      const double cb = cost(basis[i]);
      if (cb != 0.0) cost.noalias() -= cb * T.row(i);
    }
    for (int i = 0; i < m; ++i) cost(basis[i]) = 0.0;
    if (simplex.run(cost, eligible, iterations) == PhaseResult::kUnbounded) {
      out.status = Status::kUnbounded;
      out.iterations = static_cast<int>(iterations);
      return out;
    }
  }

  const auto recover = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd x = sf.offset;
    for (std::size_t k = 0; k < sf.struct_var.size(); ++k) x(sf.struct_var[k]) += sf.struct_sign[k] * y(k);
    return x;
  };
  Eigen::VectorXd y = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < m; ++i) y(basis[i]) = std::max(0.0, T(i, N));
  Eigen::VectorXd x = recover(y);

  if (program.max_violation(x) > opt.feasibility_tolerance) {
    // Refactor the final basis against the untouched rows.
    Eigen::MatrixXd AB(m, m);
    for (int i = 0; i < m; ++i) AB.col(i) = sf.A.col(basis[i]);
    Eigen::VectorXd yb = AB.partialPivLu().solve(sf.b);
    Eigen::VectorXd y2 = Eigen::VectorXd::Zero(N);
    for (int i = 0; i < m; ++i) y2(basis[i]) = std::max(0.0, yb(i));
    Eigen::VectorXd x2 = recover(y2);
    if (x2.allFinite() && program.max_violation(x2) < program.max_violation(x)) x = x2;
  }

  out.status = Status::kOptimal;
  out.solution = x;
  out.objective_value = (sense == Sense::kFeasibility) ? 0.0 : program.objective().dot(x);
  out.iterations = static_cast<int>(iterations);
  return out;
}

std::string dump(const LinearProgram& program) {
  std::ostringstream os;
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  const auto var = [&](int j) {
    return program.names()[j].empty() ? "x" + std::to_string(j) : program.names()[j];
  };
  const auto linear = [&](const Eigen::VectorXd& c) {
    std::string s;
    for (int j = 0; j < c.size(); ++j) {
      if (c(j) == 0.0) continue;
      if (!s.empty()) s += c(j) < 0 ? " - " : " + ";
      else if (c(j) < 0) s += "-";
      s += num(std::abs(c(j))) + "*" + var(j);
    }
    return s.empty() ? std::string("0") : s;
  };
  os << "# variables " << program.n_vars() << ", constraints " << program.n_constraints() << "\n";
  for (int j = 0; j < program.n_vars(); ++j)
    os << "var " << var(j) << " in [" << num(program.bounds()[j].lower) << ", " << num(program.bounds()[j].upper)
       << "]\n";
  switch (program.sense()) {
    case Sense::kMinimize: os << "minimize " << linear(program.objective()) << "\n"; break;
    case Sense::kMaximize: os << "maximize " << linear(program.objective()) << "\n"; break;
    case Sense::kFeasibility: os << "feasibility\n"; break;
  }
  for (int i = 0; i < program.n_constraints(); ++i) {
    const auto& c = program.constraints()[i];
    os << (c.label.empty() ? "c" + std::to_string(i) : c.label) << ": " << linear(c.coeffs) << " "
       << to_string(c.relation) << " " << num(c.bound) << "\n";
  }
  return os.str();
}

}  // namespace copos::lp
