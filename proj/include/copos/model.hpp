// Reformed Stepanova tumor-immune dynamics.
//
//   x1' = mu_c x1 F(x1) - gamma x1 x2 - k_x1 x1 u1
//   x2' = mu_I (x1 - beta x1^2) x2 - delta x2 + alpha + k_x2 x2 u2
//
// with the Gompertz growth law F(x1) = -ln(x1 / x_inf). Time unit is days,
// x1 is in units of 10^6 cells and x2 is a dimensionless density.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "copos/errors.hpp"

namespace copos {

template <typename Scalar>
using State = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Input = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar = double>
struct ModelParams {
  Scalar mu_c;
  Scalar mu_I;
  Scalar gamma;
  Scalar beta;
  Scalar delta;
  Scalar alpha;
  Scalar x_inf;
  Scalar k_x1;
  Scalar k_x2;

  /// Coefficients of the "stepanova-table1" preset.
  static ModelParams table1() {
    return {Scalar(0.5599), Scalar(0.00484), Scalar(1),      Scalar(0.00264), Scalar(0.37451),
            Scalar(0.1181), Scalar(780),     Scalar(1),      Scalar(1)};
  }

  void validate() const {
    const std::pair<const char*, Scalar> fields[] = {
        {"mu_c", mu_c},   {"mu_I", mu_I},   {"gamma", gamma}, {"beta", beta}, {"delta", delta},
        {"alpha", alpha}, {"x_inf", x_inf}, {"k_x1", k_x1},   {"k_x2", k_x2}};
    for (const auto& [name, value] : fields) {
      if (!(value > Scalar(0)) || !std::isfinite(double(value)))
        throw DomainError(std::string("model parameter '") + name + "' must be finite and > 0");
    }
  }
};

/// States are clamped to this floor during integration; ln(x1) is singular at 0.
inline constexpr double kPositivityFloor = 1e-12;

template <typename Scalar>
Scalar gompertz(Scalar x1, const ModelParams<Scalar>& p) {
  if (!(x1 > Scalar(0))) throw DomainError("gompertz: x1 must be > 0");
  using std::log;
  // log(x_inf) does not depend on the state, which keeps the divide off the step latency chain.
  return log(p.x_inf) - log(x1);
}

/// Right-hand side with the growth term F(x1) already evaluated.
template <typename Scalar>
State<Scalar> derivatives(const ModelParams<Scalar>& p, const State<Scalar>& s, Scalar growth, Scalar u1, Scalar u2) {
  const Scalar x1 = s(0);
  const Scalar x2 = s(1);
  State<Scalar> d;
  d(0) = p.mu_c * x1 * growth - p.gamma * x1 * x2 - p.k_x1 * x1 * u1;
  d(1) = p.mu_I * (x1 - p.beta * x1 * x1) * x2 - p.delta * x2 + p.alpha + p.k_x2 * x2 * u2;
  return d;
}

/// Right-hand side of the model for constant doses (u1, u2).
template <typename Scalar>
State<Scalar> derivatives(const ModelParams<Scalar>& p, const State<Scalar>& s, Scalar u1, Scalar u2) {
  return derivatives(p, s, gompertz(s(0), p), u1, u2);
}

/// Analytic Jacobian of the unforced model.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> jacobian(const ModelParams<Scalar>& p, const State<Scalar>& s) {
  const Scalar x1 = s(0);
  const Scalar x2 = s(1);
  Eigen::Matrix<Scalar, 2, 2> J;
  // d/dx1 [mu_c x1 (-ln(x1/x_inf))] = mu_c (F(x1) - 1)
  J(0, 0) = p.mu_c * (gompertz(x1, p) - Scalar(1)) - p.gamma * x2;
  J(0, 1) = -p.gamma * x1;
  J(1, 0) = p.mu_I * (Scalar(1) - Scalar(2) * p.beta * x1) * x2;
  J(1, 1) = p.mu_I * (x1 - p.beta * x1 * x1) - p.delta;
  return J;
}

enum class EquilibriumKind { kStableNodeBenign, kStableNodeMalignant, kSaddle, kUnstable };

inline const char* to_string(EquilibriumKind kind) {
  switch (kind) {
    case EquilibriumKind::kStableNodeBenign: return "stable-node-benign";
    case EquilibriumKind::kStableNodeMalignant: return "stable-node-malignant";
    case EquilibriumKind::kSaddle: return "saddle";
    case EquilibriumKind::kUnstable: return "unstable";
  }
  return "unknown";
}

template <typename Scalar = double>
struct Equilibrium {
  State<Scalar> point;
  EquilibriumKind kind;
  std::complex<Scalar> eigenvalues[2];
};

namespace detail {

/// x2 on the nullcline x1' = 0 (x1 != 0, u = 0).
template <typename Scalar>
Scalar x2_on_tumor_nullcline(const ModelParams<Scalar>& p, Scalar x1) {
  return p.mu_c / p.gamma * gompertz(x1, p);
}

/// Residual of x2' = 0 restricted to the tumor nullcline.
template <typename Scalar>
Scalar reduced_residual(const ModelParams<Scalar>& p, Scalar x1) {
  const State<Scalar> s(x1, x2_on_tumor_nullcline(p, x1));
  return derivatives(p, s, Scalar(0), Scalar(0))(1);
}

}  // namespace detail

/// Scans the x2' = 0 residual along the x1' = 0 nullcline, bisects each sign
/// change to machine precision in x1 and classifies roots by Jacobian eigenvalues.
/// Roots with x2 <= 0 (outside the positive orthant) are discarded.
template <typename Scalar>
std::vector<Equilibrium<Scalar>> find_equilibria(const ModelParams<Scalar>& p, Scalar x1_lo, Scalar x1_hi,
                                                 int grid = 2000) {
  if (!(x1_lo > Scalar(0)) || !(x1_hi > x1_lo)) throw DomainError("find_equilibria: invalid scan interval");
  if (grid < 100) throw std::invalid_argument("find_equilibria: grid must be >= 100");

  std::vector<Equilibrium<Scalar>> out;
  const Scalar step = (x1_hi - x1_lo) / Scalar(grid);
  Scalar a = x1_lo;
  Scalar fa = detail::reduced_residual(p, a);
  for (int k = 1; k <= grid; ++k) {
    const Scalar b = (k == grid) ? x1_hi : x1_lo + step * Scalar(k);
    const Scalar fb = detail::reduced_residual(p, b);
    Scalar root;
    bool found = false;
    if (fa == Scalar(0)) {
      root = a;
      found = true;
    } else if ((fa < Scalar(0)) != (fb < Scalar(0)) && fb != Scalar(0)) {
      Scalar lo = a, hi = b, flo = fa;
      for (int it = 0; it < 200 && hi - lo > Scalar(4) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), lo); ++it) {
        const Scalar mid = Scalar(0.5) * (lo + hi);
        const Scalar fm = detail::reduced_residual(p, mid);
        if ((fm < Scalar(0)) == (flo < Scalar(0))) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      root = Scalar(0.5) * (lo + hi);
      found = true;
    }
    if (found) {
      const State<Scalar> s(root, detail::x2_on_tumor_nullcline(p, root));
      if (s(1) > Scalar(0)) {
        Equilibrium<Scalar> eq;
        eq.point = s;
        Eigen::EigenSolver<Eigen::Matrix<Scalar, 2, 2>> es(jacobian(p, s), false);
        eq.eigenvalues[0] = es.eigenvalues()(0);
        eq.eigenvalues[1] = es.eigenvalues()(1);
        const bool neg0 = eq.eigenvalues[0].real() < Scalar(0);
        const bool neg1 = eq.eigenvalues[1].real() < Scalar(0);
        if (neg0 && neg1)
          eq.kind = EquilibriumKind::kStableNodeBenign;  // refined below
        else if (neg0 != neg1)
          eq.kind = EquilibriumKind::kSaddle;
        else
          eq.kind = EquilibriumKind::kUnstable;
        out.push_back(eq);
      }
    }
    a = b;
    fa = fb;
  }

  // Stable points above the largest saddle are malignant.
  Scalar saddle_x1 = Scalar(-1);
  for (const auto& eq : out)
    if (eq.kind == EquilibriumKind::kSaddle) saddle_x1 = std::max(saddle_x1, eq.point(0));
  for (auto& eq : out)
    if (eq.kind == EquilibriumKind::kStableNodeBenign && saddle_x1 > Scalar(0) && eq.point(0) > saddle_x1)
      eq.kind = EquilibriumKind::kStableNodeMalignant;
  return out;
}

template <typename Scalar>
std::vector<Equilibrium<Scalar>> find_equilibria(const ModelParams<Scalar>& p) {
  return find_equilibria(p, Scalar(1), p.x_inf - Scalar(1), 2000);
}

/// Dose policy evaluated at the start of every integration step.
template <typename Scalar>
using DosePolicy = std::function<Input<Scalar>(Scalar t, const State<Scalar>& s)>;

template <typename Scalar = double>
struct OpenLoopTrajectory {
  std::vector<Scalar> times;
  std::vector<State<Scalar>> states;
  std::vector<Input<Scalar>> inputs;  // dose held over [times[k], times[k+1])
};

/// One classic RK4 step with doses held constant. Throws StepRejected if a
/// stage leaves the finite reals.
/// Variant reusing a first stage k1 = f(s, u) the caller already has.
template <typename Scalar>
State<Scalar> rk4_step(const ModelParams<Scalar>& p, const State<Scalar>& s, const State<Scalar>& k1,
                       const Input<Scalar>& u, Scalar dt) {
  const auto floor = [](State<Scalar> v) {
    v(0) = std::max(v(0), Scalar(kPositivityFloor));
    v(1) = std::max(v(1), Scalar(kPositivityFloor));
    return v;
  };
  const State<Scalar> k2 = derivatives(p, floor(s + Scalar(0.5) * dt * k1), u(0), u(1));
  const State<Scalar> k3 = derivatives(p, floor(s + Scalar(0.5) * dt * k2), u(0), u(1));
  const State<Scalar> k4 = derivatives(p, floor(s + dt * k3), u(0), u(1));
  State<Scalar> next = s + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
  if (!next.allFinite()) throw StepRejected("rk4: non-finite state");
  return floor(next);
}

template <typename Scalar>
State<Scalar> rk4_step(const ModelParams<Scalar>& p, const State<Scalar>& s, const Input<Scalar>& u, Scalar dt) {
  return rk4_step(p, s, derivatives(p, s, u(0), u(1)), u, dt);
}

template <typename Scalar>
OpenLoopTrajectory<Scalar> integrate_rk4(const ModelParams<Scalar>& p, const State<Scalar>& x0,
                                         const DosePolicy<Scalar>& policy, Scalar t_end, Scalar dt) {
  if (!(dt > Scalar(0)) || !(t_end >= dt)) throw std::invalid_argument("integrate_rk4: need dt > 0 and t_end >= dt");
  if (!(x0(0) > Scalar(0)) || !(x0(1) > Scalar(0))) throw DomainError("integrate_rk4: x0 outside positive orthant");
  using std::llround;
  const long steps = static_cast<long>(llround(double(t_end / dt)));
  OpenLoopTrajectory<Scalar> traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps + 1);
  State<Scalar> s = x0;
  for (long k = 0; k < steps; ++k) {
    const Scalar t = dt * Scalar(k);
    const Input<Scalar> u = policy ? policy(t, s) : Input<Scalar>::Zero();
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.inputs.push_back(u);
    s = rk4_step(p, s, u, dt);
  }
  traj.times.push_back(dt * Scalar(steps));
  traj.states.push_back(s);
  traj.inputs.push_back(traj.inputs.empty() ? Input<Scalar>::Zero() : traj.inputs.back());
  return traj;
}

}  // namespace copos
