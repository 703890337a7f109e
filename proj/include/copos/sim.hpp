// Closed-loop treatment simulation under the fuzzy PDC law.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "copos/fuzzy.hpp"
#include "copos/model.hpp"
#include "copos/synthesis.hpp"

namespace copos::sim {

enum class Therapy { kNone, kChemoOnly, kImmunoOnly, kCombined };
enum class PlantMode { kContinuousRk4, kDiscreteEuler };

const char* to_string(Therapy t);
const char* to_string(PlantMode m);
Therapy parse_therapy(const std::string& s);
PlantMode parse_plant_mode(const std::string& s);

using Gain = Eigen::Matrix<double, 2, 4>;
using AugmentedState = Eigen::Matrix<double, 4, 1>;
using GainSet = std::array<Gain, kRules>;

/// Lower bound on x2 in the input change of variable.
inline constexpr double kDenominatorGuard = 1e-6;
inline constexpr double kIntegratorLimit = 1e6;

struct DoseCaps {
  double u1 = 1.0;
  double u2 = 1.0;
};

struct Scenario {
  std::string name;
  Therapy therapy = Therapy::kCombined;
  State<double> x0{600.0, 0.1};
  Eigen::Vector2d z_r{50.0, 1.6};
  double duration = 60.0;
  /// Zero selects the sampling period of the discrete system.
  double controller_period = 0.0;
  PlantMode plant = PlantMode::kContinuousRk4;
  /// RK4 substeps per controller period in continuous mode.
  int plant_substeps = 1;
  /// Spacing of recorded samples; zero records every controller period.
  double record_interval = 0.01;
  DoseCaps caps;

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State<double>> states;
  std::vector<Eigen::Vector2d> eI;
  std::vector<Eigen::Vector2d> u_raw;      // (u1, u2*) from the PDC law after masking
  std::vector<Eigen::Vector2d> u_applied;  // physical doses after recovery and clamping
  std::vector<Memberships<double>> memberships;
  long steps = 0;
  long premise_clamp_events = 0;
  long dose_clamp_events = 0;
  long integrator_clamp_events = 0;
  /// Extremes over every controller period, not just recorded samples.
  Eigen::Vector2d min_state{0.0, 0.0};
  Eigen::Vector2d min_dose{0.0, 0.0};
  Eigen::Vector2d max_dose{0.0, 0.0};

  std::size_t size() const { return times.size(); }
};

struct OutcomeMetrics {
  double max_tumor = 0.0;
  std::optional<double> time_to_benign;
  State<double> terminal_state{0.0, 0.0};
  double total_chemo_dose = 0.0;
  double total_immuno_dose = 0.0;
  double tracking_error = 0.0;
};

GainSet to_gain_set(const MatrixList& K);

/// u = sum_i h_i K_i xbar.
Eigen::Vector2d pdc_control(const Memberships<double>& h, const GainSet& K, const AugmentedState& xbar);
Eigen::VectorXd pdc_control(const Eigen::VectorXd& h, const MatrixList& K, const Eigen::VectorXd& xbar);

struct RecoveredInputs {
  Eigen::Vector2d applied;
  int clamped = 0;  // number of doses moved by the [0, cap] clamp
};

/// Inverts u2* = alpha + k_x2 x2 u2 and clamps both doses to [0, cap].
RecoveredInputs recover_inputs(const Eigen::Vector2d& raw, const State<double>& s, const ModelParams<double>& p,
                               const DoseCaps& caps);

/// Throws StepRejected when the state leaves the finite reals.
Trajectory run_closed_loop(const Scenario& scenario, const AugmentedVertexSystem<double>& system, const MatrixList& K,
                           const ModelParams<double>& params);

OutcomeMetrics summarize(const Trajectory& traj, const ModelParams<double>& params,
                         const Eigen::Vector2d& z_r = Eigen::Vector2d::Zero());

struct ScenarioResult {
  Trajectory trajectory;
  OutcomeMetrics metrics;
};

/// Runs scenarios concurrently; results are returned in input order.
std::vector<ScenarioResult> run_batch(const std::vector<Scenario>& scenarios, const AugmentedVertexSystem<double>& system,
                                      const MatrixList& K, const ModelParams<double>& params);

/// CSV with header t,x1,x2,eI1,eI2,u1_raw,u2star_raw,u1,u2,h1..h8.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace copos::sim
