// Dense linear programs and a two-phase primal simplex solver.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace copos::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { kLessEqual, kGreaterEqual, kEqual };
enum class Sense { kMinimize, kMaximize, kFeasibility };
enum class Status { kOptimal, kInfeasible, kUnbounded };

/// Elementwise strict relations (a << b, a >> b) before strictification.
enum class StrictRelation { kMuchLess, kMuchGreater };

const char* to_string(Relation r);
const char* to_string(Status s);

struct Constraint {
  Eigen::VectorXd coeffs;
  Relation relation = Relation::kLessEqual;
  double bound = 0.0;
  std::string label;
};

struct VariableBounds {
  double lower = 0.0;
  double upper = kInf;
};

class LinearProgram {
 public:
  LinearProgram() = default;
  explicit LinearProgram(int n_vars);

  /// Appends a variable; existing constraints are widened with a zero column.
  int add_variable(double lower = 0.0, double upper = kInf, std::string name = {});
  void add_constraint(Eigen::VectorXd coeffs, Relation relation, double bound, std::string label = {});
  void add_constraint(Constraint c);
  void set_objective(Eigen::VectorXd coeffs, Sense sense);
  void set_feasibility() { sense_ = Sense::kFeasibility; }

  int n_vars() const { return static_cast<int>(bounds_.size()); }
  int n_constraints() const { return static_cast<int>(constraints_.size()); }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<VariableBounds>& bounds() const { return bounds_; }
  const std::vector<std::string>& names() const { return names_; }
  const Eigen::VectorXd& objective() const { return objective_; }
  Sense sense() const { return sense_; }
  VariableBounds& bounds(int j) { return bounds_.at(j); }

  /// Throws std::invalid_argument on malformed programs.
  void validate() const;

  /// Largest violation of any constraint or bound at x (0 when feasible).
  double max_violation(const Eigen::VectorXd& x) const;

 private:
  std::vector<VariableBounds> bounds_;
  std::vector<std::string> names_;
  std::vector<Constraint> constraints_;
  Eigen::VectorXd objective_;
  Sense sense_ = Sense::kFeasibility;
};

/// a << rhs becomes a <= rhs - margin; a >> rhs becomes a >= rhs + margin.
Constraint strictify(Eigen::VectorXd coeffs, StrictRelation relation, double rhs, double margin,
                     std::string label = {});

struct Diagnostic {
  std::string label;
  double residual = 0.0;  // phase-1 artificial value, in scaled row units
};

struct LpOutcome {
  Status status = Status::kInfeasible;
  Eigen::VectorXd solution;
  double objective_value = 0.0;
  int iterations = 0;
  /// Rows still carrying artificial mass at the end of phase 1, largest first.
  std::vector<Diagnostic> infeasibility;

  bool feasible() const { return status == Status::kOptimal; }
};

struct SolverOptions {
  double pivot_tolerance = 1e-9;
  double cost_tolerance = 1e-10;
  double feasibility_tolerance = 1e-9;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 50;
  long max_iterations = 200000;
  int max_diagnostics = 10;
};

LpOutcome solve(const LinearProgram& program, const SolverOptions& options = {});

/// Human-readable listing, one constraint per line.
std::string dump(const LinearProgram& program);

}  // namespace copos::lp
