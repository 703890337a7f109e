// Positivity, linear co-positive Lyapunov analysis and LP-based PDC synthesis
// for discrete-time positive T-S fuzzy systems.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "copos/fuzzy.hpp"
#include "copos/lp.hpp"

namespace copos {

using MatrixList = std::vector<Eigen::MatrixXd>;

bool is_nonnegative(const Eigen::MatrixXd& M, double tol = 0.0);
bool is_metzler(const Eigen::MatrixXd& M, double tol = 0.0);

enum class TimeDomain { kDiscrete, kContinuous };

struct PositivityReport {
  std::vector<bool> state_ok;  // A_i nonnegative (discrete) or Metzler (continuous)
  std::vector<bool> input_ok;  // B_i nonnegative
  bool all() const;
};

PositivityReport check_positivity(const MatrixList& A, const MatrixList& B, TimeDomain domain);

/// Spectral radius; closed form for n <= 2, Hessenberg QR otherwise.
double spectral_radius(const Eigen::MatrixXd& M);

/// Linear co-positive Lyapunov function V(x) = p^T x.
struct StabilityCertificate {
  Eigen::VectorXd p;
  /// Largest entry of the decrement vector for each vertex (all < 0).
  Eigen::VectorXd margins;
};

struct LcplfOptions {
  double epsilon = 1e-6;
  double p_min = 1e-6;
  double p_max = 1e6;
  /// false: certificate for x+ = A_i x, i.e. (A_i^T - I) p << 0.
  /// true:  certificate for the dual x+ = A_i^T x, i.e. (A_i - I) p << 0.
  bool dual = false;
};

/// Decrement vector (A - I) p, or (A^T - I) p for the primal form.
Eigen::VectorXd lyapunov_decrement(const Eigen::MatrixXd& A, const Eigen::VectorXd& p, bool dual);

/// Returns nullopt when no LCPLF of this form exists.
std::optional<StabilityCertificate> lcplf_stability(const MatrixList& A, const LcplfOptions& options = {});

/// Discrete vertex set handed to the synthesis LP.
struct DesignProblem {
  MatrixList A;  // n x n
  MatrixList B;  // n x m
  /// Rows [0, plant_states) carry physical (cell-count) states.
  int plant_states = 0;
  /// Closed-loop entries (row, col) that must stay strictly positive: the
  /// coupling from each integrator into the plant row it regulates.
  std::vector<std::pair<int, int>> integral_couplings;
  double sampling_period = 1.0;

  int states() const { return A.empty() ? 0 : static_cast<int>(A.front().rows()); }
  int inputs() const { return B.empty() ? 0 : static_cast<int>(B.front().cols()); }
  int rules() const { return static_cast<int>(A.size()); }
  void validate() const;
};

DesignProblem make_design_problem(const AugmentedVertexSystem<double>& discrete_system);
/// Euler-discretised plant vertices without integral action.
DesignProblem make_design_problem(const VertexSystem<double>& system, double T);

enum class SynthesisObjective { kFeasibility, kMinEffort };

struct SynthesisOptions {
  double epsilon = 1e-6;
  /// Q = diag(q) with q_t in [q_min, q_max]; the feasible cone is homogeneous.
  double q_min = 1.0;
  double q_max = 1e6;
  /// M_j <= 0 elementwise.
  bool enforce_nonpositive_gains = false;
  /// Rows subject to closed-loop nonnegativity; empty selects the plant rows.
  std::vector<int> positivity_rows;
  SynthesisObjective objective = SynthesisObjective::kMinEffort;
  /// Minimum integrator-to-plant coupling rate (1/day) in the closed loop.
  double integral_coupling_rate = 1.0;
};

struct PairReport {
  int i = 0;
  int j = 0;
  Eigen::MatrixXd closed_loop;
  bool rows_nonnegative = false;
  double min_row_entry = 0.0;
  double spectral_radius = 0.0;
  /// Max entry of (A_i + B_i K_j - I) p.
  double decrement = 0.0;
};

struct ClosedLoopReport {
  std::vector<PairReport> pairs;
  double worst_spectral_radius = 0.0;
  double worst_decrement = 0.0;
  double min_row_entry = 0.0;
  bool all_schur = false;
  bool all_rows_nonnegative = false;
  bool decrement_ok = false;
  /// Certificate re-solved from scratch on the closed-loop vertex set.
  std::optional<StabilityCertificate> independent_certificate;

  bool passed() const { return all_schur && all_rows_nonnegative && decrement_ok && independent_certificate; }
};

struct SynthesisResult {
  Eigen::VectorXd q;  // diagonal of Q
  MatrixList M;
  MatrixList K;       // K_j = M_j Q^{-1}
  StabilityCertificate certificate;  // p = Q 1, one margin per (i, j) pair
  ClosedLoopReport report;
  double lp_objective = 0.0;
  int lp_iterations = 0;
};

struct SynthesisOutcome {
  lp::Status status = lp::Status::kInfeasible;
  std::optional<SynthesisResult> result;
  std::vector<lp::Diagnostic> diagnostics;
  int lp_variables = 0;
  int lp_constraints = 0;

  bool feasible() const { return result.has_value(); }
};

/// Assembles the LP; variable layout is q (n), then the M_j entries.
lp::LinearProgram build_synthesis_lp(const DesignProblem& problem, const SynthesisOptions& options);

SynthesisOutcome synthesize_pdc(const DesignProblem& problem, const SynthesisOptions& options = {});

/// Replays every closed-loop vertex pair from first principles. When `p` is
/// empty the decrement is measured with the independent certificate.
ClosedLoopReport verify_closed_loop(const DesignProblem& problem, const MatrixList& K,
                                    const SynthesisOptions& options = {}, const Eigen::VectorXd& p = {});

}  // namespace copos
