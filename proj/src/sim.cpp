#include "copos/sim.hpp"

#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include "copos/errors.hpp"

namespace copos::sim {

const char* to_string(Therapy t) {
  switch (t) {
    case Therapy::kNone: return "none";
    case Therapy::kChemoOnly: return "chemo-only";
    case Therapy::kImmunoOnly: return "immuno-only";
    case Therapy::kCombined: return "combined";
  }
  return "?";
}

const char* to_string(PlantMode m) { return m == PlantMode::kContinuousRk4 ? "continuous-rk4" : "discrete-euler"; }

Therapy parse_therapy(const std::string& s) {
  for (Therapy t : {Therapy::kNone, Therapy::kChemoOnly, Therapy::kImmunoOnly, Therapy::kCombined})
    if (s == to_string(t)) return t;
  throw std::invalid_argument("unknown therapy '" + s + "' (none|chemo-only|immuno-only|combined)");
}

PlantMode parse_plant_mode(const std::string& s) {
  for (PlantMode m : {PlantMode::kContinuousRk4, PlantMode::kDiscreteEuler})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown plant mode '" + s + "' (continuous-rk4|discrete-euler)");
}

void Scenario::validate() const {
  if (!(x0(0) > 0.0) || !(x0(1) > 0.0) || !x0.allFinite())
    throw DomainError("scenario '" + name + "': x0 must lie in the positive orthant");
  if (!(duration > 0.0)) throw std::invalid_argument("scenario '" + name + "': duration must be > 0");
  if (controller_period < 0.0 || record_interval < 0.0)
    throw std::invalid_argument("scenario '" + name + "': periods must be >= 0");
  if (plant_substeps < 1) throw std::invalid_argument("scenario '" + name + "': plant_substeps must be >= 1");
  if (!(caps.u1 >= 0.0) || !(caps.u2 >= 0.0)) throw std::invalid_argument("scenario '" + name + "': caps must be >= 0");
  if (!z_r.allFinite()) throw std::invalid_argument("scenario '" + name + "': z_r must be finite");
}

GainSet to_gain_set(const MatrixList& K) {
  if (K.size() != static_cast<std::size_t>(kRules)) throw DimensionMismatch("expected one gain per rule");
  GainSet out;
  for (int i = 0; i < kRules; ++i) {
    if (K[i].rows() != 2 || K[i].cols() != 4) throw DimensionMismatch("gain K_i must be 2 x 4");
    out[i] = K[i];
  }
  return out;
}

Eigen::Vector2d pdc_control(const Memberships<double>& h, const GainSet& K, const AugmentedState& xbar) {
  Gain blended = Gain::Zero();
  for (int i = 0; i < kRules; ++i) blended.noalias() += h(i) * K[i];
  return blended * xbar;
}

Eigen::VectorXd pdc_control(const Eigen::VectorXd& h, const MatrixList& K, const Eigen::VectorXd& xbar) {
  if (h.size() != static_cast<Eigen::Index>(K.size()) || K.empty())
    throw DimensionMismatch("pdc_control: need one membership per gain");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(K.front().rows());
  for (std::size_t i = 0; i < K.size(); ++i) {
    if (K[i].cols() != xbar.size() || K[i].rows() != u.size()) throw DimensionMismatch("pdc_control: gain shape");
    u.noalias() += h(static_cast<Eigen::Index>(i)) * (K[i] * xbar);
  }
  return u;
}

RecoveredInputs recover_inputs(const Eigen::Vector2d& raw, const State<double>& s, const ModelParams<double>& p,
                               const DoseCaps& caps) {
  RecoveredInputs r;
  const double u1 = raw(0);
  const double u2 = (raw(1) - p.alpha) / (p.k_x2 * std::max(s(1), kDenominatorGuard));
  r.applied(0) = std::clamp(u1, 0.0, caps.u1);
  r.applied(1) = std::clamp(u2, 0.0, caps.u2);
  r.clamped = int(r.applied(0) != u1) + int(r.applied(1) != u2);
  return r;
}

namespace {

State<double> euler_step(const State<double>& s, const State<double>& f, double dt) {
  State<double> next = s + dt * f;
  if (!next.allFinite()) throw StepRejected("euler: non-finite state");
  next(0) = std::max(next(0), kPositivityFloor);
  next(1) = std::max(next(1), kPositivityFloor);
  return next;
}

struct Controller {
  const ModelParams<double>& params;
  const PremiseBounds<double>& bounds;
  const GainSet& K;
  Therapy therapy;

  struct Output {
    Memberships<double> h;
    Eigen::Vector2d raw;
    int premise_clamps;
    double growth;  // F(x1), shared with the first integration stage
  };

  Output operator()(const State<double>& s, const Eigen::Vector2d& eI) const {
    Output o;
    o.growth = gompertz(s(0), params);
    Premises<double> th = premise_values(params, s, o.growth);
    o.premise_clamps = clamp_to_sectors(th, bounds);
    o.h = membership(th, bounds);
    AugmentedState xbar;
    xbar << s, eI;
    o.raw = pdc_control(o.h, K, xbar);
    if (therapy == Therapy::kNone || therapy == Therapy::kChemoOnly) o.raw(1) = params.alpha;
    if (therapy == Therapy::kNone || therapy == Therapy::kImmunoOnly) o.raw(0) = 0.0;
    return o;
  }
};

}  // namespace

Trajectory run_closed_loop(const Scenario& sc, const AugmentedVertexSystem<double>& system, const MatrixList& K,
                           const ModelParams<double>& params) {
  sc.validate();
  params.validate();
  const GainSet gains = to_gain_set(K);
  const double period = sc.controller_period > 0.0 ? sc.controller_period : system.T;
  if (!(period > 0.0)) throw std::invalid_argument("run_closed_loop: controller period unresolved (system not discrete)");
  const long steps = std::max(1L, std::lround(sc.duration / period));
  const long every = sc.record_interval > 0.0 ? std::max(1L, std::lround(sc.record_interval / period)) : 1L;
  const Controller control{params, system.bounds, gains, sc.therapy};

  Trajectory tr;
  const std::size_t expected = static_cast<std::size_t>(steps / every + 2);
  tr.times.reserve(expected);
  tr.states.reserve(expected);
  tr.eI.reserve(expected);
  tr.u_raw.reserve(expected);
  tr.u_applied.reserve(expected);
  tr.memberships.reserve(expected);
  tr.min_state = sc.x0;
  tr.min_dose.setConstant(std::numeric_limits<double>::infinity());
  tr.max_dose.setConstant(-std::numeric_limits<double>::infinity());

  State<double> s = sc.x0;
  Eigen::Vector2d eI = Eigen::Vector2d::Zero();
  const double sub = period / sc.plant_substeps;

  const auto record = [&](double t, const Controller::Output& o, const Eigen::Vector2d& applied) {
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.eI.push_back(eI);
    tr.u_raw.push_back(o.raw);
    tr.u_applied.push_back(applied);
    tr.memberships.push_back(o.h);
  };

  long until_record = 0;
  for (long k = 0; k < steps; ++k) {
    const Controller::Output o = control(s, eI);
    const RecoveredInputs in = recover_inputs(o.raw, s, params, sc.caps);
    tr.premise_clamp_events += o.premise_clamps;
    tr.dose_clamp_events += in.clamped;
    tr.min_dose = tr.min_dose.cwiseMin(in.applied);
    tr.max_dose = tr.max_dose.cwiseMax(in.applied);
    if (until_record-- == 0) {
      record(period * double(k), o, in.applied);
      until_record = every - 1;
    }

    const Eigen::Vector2d z = s;  // C = I
    const State<double> f0 = derivatives(params, s, o.growth, in.applied(0), in.applied(1));
    if (sc.plant == PlantMode::kContinuousRk4) {
      s = rk4_step(params, s, f0, in.applied, sub);
      for (int j = 1; j < sc.plant_substeps; ++j) s = rk4_step(params, s, in.applied, sub);
    } else {
      s = euler_step(s, f0, period);
    }
    eI += period * (sc.z_r - z);
    for (int c = 0; c < 2; ++c) {
      if (std::abs(eI(c)) > kIntegratorLimit) {
        eI(c) = std::copysign(kIntegratorLimit, eI(c));
        ++tr.integrator_clamp_events;
      }
    }
    tr.min_state = tr.min_state.cwiseMin(s);
  }
  tr.steps = steps;

  // Final sample: the law is evaluated but never applied.
  const Controller::Output o = control(s, eI);
  const RecoveredInputs in = recover_inputs(o.raw, s, params, sc.caps);
  record(period * double(steps), o, in.applied);
  return tr;
}

OutcomeMetrics summarize(const Trajectory& tr, const ModelParams<double>& params, const Eigen::Vector2d& z_r) {
  if (tr.size() == 0) throw std::invalid_argument("summarize: empty trajectory");
  OutcomeMetrics m;
  m.terminal_state = tr.states.back();
  m.max_tumor = tr.states.front()(0);
  for (const auto& s : tr.states) m.max_tumor = std::max(m.max_tumor, s(0));
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double dt = tr.times[k] - tr.times[k - 1];
    m.total_chemo_dose += 0.5 * dt * (tr.u_applied[k](0) + tr.u_applied[k - 1](0));
    m.total_immuno_dose += 0.5 * dt * (tr.u_applied[k](1) + tr.u_applied[k - 1](1));
  }
  m.tracking_error = (m.terminal_state - z_r).norm();

  std::optional<double> saddle;
  for (const auto& e : find_equilibria(params))
    if (e.kind == EquilibriumKind::kSaddle) saddle = e.point(0);
  if (saddle) {
    // Last upward crossing decides: the tumor must stay below from then on.
    std::optional<double> entry;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const bool below = tr.states[k](0) < *saddle;
      if (below && !entry) entry = tr.times[k];
      if (!below) entry.reset();
    }
    m.time_to_benign = entry;
  }
  return m;
}

std::vector<ScenarioResult> run_batch(const std::vector<Scenario>& scenarios, const AugmentedVertexSystem<double>& system,
                                      const MatrixList& K, const ModelParams<double>& params) {
  std::vector<std::future<ScenarioResult>> jobs;
  jobs.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    jobs.push_back(std::async(std::launch::async, [&sc, &system, &K, &params] {
      ScenarioResult r;
      r.trajectory = run_closed_loop(sc, system, K, params);
      r.metrics = summarize(r.trajectory, params, sc.z_r);
      return r;
    }));
  }
  std::vector<ScenarioResult> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

namespace {

void put(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "t,x1,x2,eI1,eI2,u1_raw,u2star_raw,u1,u2";
  for (int i = 1; i <= kRules; ++i) out += ",h" + std::to_string(i);
  out += '\n';
  out.reserve(out.size() + tr.size() * 17 * 24);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double row[9] = {tr.times[k],    tr.states[k](0),    tr.states[k](1),    tr.eI[k](0),       tr.eI[k](1),
                           tr.u_raw[k](0), tr.u_raw[k](1), tr.u_applied[k](0), tr.u_applied[k](1)};
    for (int c = 0; c < 9; ++c) {
      if (c) out += ',';
      put(out, row[c]);
    }
    for (int i = 0; i < kRules; ++i) {
      out += ',';
      put(out, tr.memberships[k](i));
    }
    out += '\n';
  }
  return out;
}

}  // namespace copos::sim
