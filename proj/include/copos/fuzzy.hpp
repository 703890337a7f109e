// Sector-nonlinearity T-S model of the transformed tumor-immune dynamics.
//
// After the change of input u2* = alpha + k_x2 x2 u2 the model reads
//   X' = diag(th1, th2) X + diag(th3, 1) U,   U = (u1, u2*)
// with premises
//   th1 = -mu_c ln(x1/x_inf) - gamma x2
//   th2 =  mu_I (x1 - beta x1^2) - delta
//   th3 = -k_x1 x1
// Each premise is written as a convex blend of its sector extremes, giving
// r = 8 rules. Rule i (0-based) takes corner bits (m, n, s) = (i>>2, i>>1, i)&1
// where bit 0 selects the max of the sector and bit 1 the min.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "copos/errors.hpp"
#include "copos/model.hpp"

namespace copos {

inline constexpr int kRules = 8;
inline constexpr int kPremises = 3;

template <typename Scalar = double>
struct Domain {
  Scalar x1_min = Scalar(0.1);
  Scalar x1_max = Scalar(1000);
  Scalar x2_min = Scalar(0);
  Scalar x2_max = Scalar(5);

  void validate() const {
    if (!(x1_min > Scalar(0)) || !(x1_max > x1_min))
      throw DegenerateSectorError("domain: need 0 < x1_min < x1_max");
    if (!(x2_min >= Scalar(0)) || !(x2_max > x2_min))
      throw DegenerateSectorError("domain: need 0 <= x2_min < x2_max");
  }
};

enum class ExtremaMode { kEndpoint, kGlobal };

inline const char* to_string(ExtremaMode m) { return m == ExtremaMode::kEndpoint ? "endpoint" : "global"; }

template <typename Scalar>
struct Sector {
  Scalar min;
  Scalar max;
  Scalar width() const { return max - min; }
  bool contains(Scalar v) const { return v >= min && v <= max; }
};

template <typename Scalar = double>
struct PremiseBounds {
  std::array<Sector<Scalar>, kPremises> sectors;
  ExtremaMode mode = ExtremaMode::kEndpoint;

  const Sector<Scalar>& operator[](int k) const { return sectors[k]; }
};

template <typename Scalar>
using Premises = Eigen::Matrix<Scalar, kPremises, 1>;

template <typename Scalar>
using Memberships = Eigen::Matrix<Scalar, kRules, 1>;

/// Corner of rule `rule` for premise `premise`: 0 = max, 1 = min.
constexpr int rule_corner(int rule, int premise) { return (rule >> (kPremises - 1 - premise)) & 1; }

/// Premises with the growth term F(x1) already evaluated.
template <typename Scalar>
Premises<Scalar> premise_values(const ModelParams<Scalar>& p, const State<Scalar>& s, Scalar growth) {
  const Scalar x1 = s(0);
  Premises<Scalar> th;
  th(0) = p.mu_c * growth - p.gamma * s(1);
  th(1) = p.mu_I * (x1 - p.beta * x1 * x1) - p.delta;
  th(2) = -p.k_x1 * x1;
  return th;
}

template <typename Scalar>
Premises<Scalar> premise_values(const ModelParams<Scalar>& p, const State<Scalar>& s) {
  if (!(s(0) > Scalar(0))) throw DomainError("premise_values: x1 must be > 0");
  return premise_values(p, s, gompertz(s(0), p));
}

template <typename Scalar>
PremiseBounds<Scalar> premise_bounds(const ModelParams<Scalar>& p, const Domain<Scalar>& d, ExtremaMode mode) {
  d.validate();
  PremiseBounds<Scalar> b;
  b.mode = mode;
  for (auto& sec : b.sectors) {
    sec.min = std::numeric_limits<Scalar>::infinity();
    sec.max = -std::numeric_limits<Scalar>::infinity();
  }
  const Scalar xs[2] = {d.x1_min, d.x1_max};
  const Scalar ys[2] = {d.x2_min, d.x2_max};
  for (Scalar x : xs) {
    for (Scalar y : ys) {
      const Premises<Scalar> th = premise_values(p, State<Scalar>(x, y));
      for (int k = 0; k < kPremises; ++k) {
        b.sectors[k].min = std::min(b.sectors[k].min, th(k));
        b.sectors[k].max = std::max(b.sectors[k].max, th(k));
      }
    }
  }
  if (mode == ExtremaMode::kGlobal) {
    // th1 and th3 are monotone in each argument, so corners already bound
    // them. th2 is concave in x1 with its vertex at 1/(2 beta).
    const Scalar vertex = Scalar(1) / (Scalar(2) * p.beta);
    if (vertex > d.x1_min && vertex < d.x1_max) {
      const Scalar peak = premise_values(p, State<Scalar>(vertex, d.x2_min))(1);
      b.sectors[1].max = std::max(b.sectors[1].max, peak);
    }
  }
  return b;
}

/// Clamps each premise into its sector; returns the number of premises moved.
template <typename Scalar>
int clamp_to_sectors(Premises<Scalar>& th, const PremiseBounds<Scalar>& b) {
  int moved = 0;
  for (int k = 0; k < kPremises; ++k) {
    const Scalar c = std::clamp(th(k), b[k].min, b[k].max);
    if (c != th(k)) ++moved;
    th(k) = c;
  }
  return moved;
}

/// Normalised grades M1, N1, S1 blended into the eight rule weights.
/// Premises outside their sector give affine (extrapolated) grades; callers
/// that need h on the simplex clamp with clamp_to_sectors first.
template <typename Scalar>
Memberships<Scalar> membership(const Premises<Scalar>& th, const PremiseBounds<Scalar>& b) {
  Scalar grade[kPremises][2];
  for (int k = 0; k < kPremises; ++k) {
    const Scalar w = b[k].width();
    if (!(w > Scalar(0))) throw DegenerateSectorError("membership: premise " + std::to_string(k + 1) + " has max == min");
    grade[k][0] = (th(k) - b[k].min) / w;
    grade[k][1] = Scalar(1) - grade[k][0];
  }
  Memberships<Scalar> h;
  for (int i = 0; i < kRules; ++i)
    h(i) = grade[0][rule_corner(i, 0)] * grade[1][rule_corner(i, 1)] * grade[2][rule_corner(i, 2)];
  return h;
}

template <typename Scalar = double>
struct VertexSystem {
  std::array<Eigen::Matrix<Scalar, 2, 2>, kRules> A;
  std::array<Eigen::Matrix<Scalar, 2, 2>, kRules> B;
  Eigen::Matrix<Scalar, 2, 2> C = Eigen::Matrix<Scalar, 2, 2>::Identity();
  PremiseBounds<Scalar> bounds;

  static constexpr int kStates = 2;
  static constexpr int kInputs = 2;
};

template <typename Scalar = double>
struct AugmentedVertexSystem {
  using StateMatrix = Eigen::Matrix<Scalar, 4, 4>;
  using InputMatrix = Eigen::Matrix<Scalar, 4, 2>;

  std::array<StateMatrix, kRules> A;
  std::array<InputMatrix, kRules> B;
  StateMatrix D = StateMatrix::Zero();
  Eigen::Matrix<Scalar, 2, 4> C = Eigen::Matrix<Scalar, 2, 4>::Zero();
  PremiseBounds<Scalar> bounds;
  bool discrete = false;
  Scalar T = Scalar(0);

  static constexpr int kStates = 4;
  static constexpr int kInputs = 2;
  static constexpr int kPlantStates = 2;
};

template <typename Scalar>
VertexSystem<Scalar> build_vertices(const PremiseBounds<Scalar>& b) {
  for (int k = 0; k < kPremises; ++k)
    if (!(b[k].width() > Scalar(0)))
      throw DegenerateSectorError("build_vertices: premise " + std::to_string(k + 1) + " has max == min");
  const auto corner = [&](int rule, int k) { return rule_corner(rule, k) == 0 ? b[k].max : b[k].min; };
  VertexSystem<Scalar> sys;
  sys.bounds = b;
  for (int i = 0; i < kRules; ++i) {
    sys.A[i] << corner(i, 0), Scalar(0), Scalar(0), corner(i, 1);
    sys.B[i] << corner(i, 2), Scalar(0), Scalar(0), Scalar(1);
  }
  return sys;
}

template <typename Scalar>
void check_simplex(const Memberships<Scalar>& h, Scalar tol = Scalar(1e-12)) {
  using std::abs;
  if (!(abs(h.sum() - Scalar(1)) <= tol) || (h.array() < -tol).any() || (h.array() > Scalar(1) + tol).any())
    throw SimplexViolation("membership vector is not on the probability simplex");
}

/// Convex combination of the vertex matrices.
template <typename System>
auto blend(const Memberships<typename System::StateMatrix::Scalar>& h, const System& sys) {
  check_simplex(h);
  typename System::StateMatrix A = System::StateMatrix::Zero();
  typename System::InputMatrix B = System::InputMatrix::Zero();
  for (int i = 0; i < kRules; ++i) {
    A.noalias() += h(i) * sys.A[i];
    B.noalias() += h(i) * sys.B[i];
  }
  return std::make_pair(A, B);
}

template <typename Scalar>
auto blend(const Memberships<Scalar>& h, const VertexSystem<Scalar>& sys) {
  check_simplex(h);
  Eigen::Matrix<Scalar, 2, 2> A = Eigen::Matrix<Scalar, 2, 2>::Zero();
  Eigen::Matrix<Scalar, 2, 2> B = Eigen::Matrix<Scalar, 2, 2>::Zero();
  for (int i = 0; i < kRules; ++i) {
    A.noalias() += h(i) * sys.A[i];
    B.noalias() += h(i) * sys.B[i];
  }
  return std::make_pair(A, B);
}

/// Integral-action augmentation: state (x1, x2, eI1, eI2) with eI' = z_r - C x.
template <typename Scalar>
AugmentedVertexSystem<Scalar> augment(const VertexSystem<Scalar>& sys) {
  AugmentedVertexSystem<Scalar> out;
  out.bounds = sys.bounds;
  for (int i = 0; i < kRules; ++i) {
    out.A[i].setZero();
    out.A[i].template topLeftCorner<2, 2>() = sys.A[i];
    out.A[i].template bottomLeftCorner<2, 2>() = -sys.C;
    out.B[i].setZero();
    out.B[i].template topRows<2>() = sys.B[i];
  }
  out.D.setZero();
  out.D.template bottomRightCorner<2, 2>().setIdentity();
  out.C.setZero();
  out.C.template leftCols<2>() = sys.C;
  return out;
}

template <typename Scalar>
AugmentedVertexSystem<Scalar> discretize_euler(const AugmentedVertexSystem<Scalar>& sys, Scalar T) {
  if (!(T > Scalar(0))) throw std::invalid_argument("discretize_euler: T must be > 0");
  if (sys.discrete) throw std::invalid_argument("discretize_euler: system is already discrete");
  using StateMatrix = typename AugmentedVertexSystem<Scalar>::StateMatrix;
  AugmentedVertexSystem<Scalar> out = sys;
  for (int i = 0; i < kRules; ++i) {
    out.A[i] = StateMatrix::Identity() + T * sys.A[i];
    out.B[i] = T * sys.B[i];
  }
  out.D = T * sys.D;
  out.discrete = true;
  out.T = T;
  return out;
}

/// Reference injection vector (0, 0, z_r).
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> stacked_reference(const Eigen::Matrix<Scalar, 2, 1>& z_r) {
  Eigen::Matrix<Scalar, 4, 1> v;
  v << Scalar(0), Scalar(0), z_r;
  return v;
}

}  // namespace copos
