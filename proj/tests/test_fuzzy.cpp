#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "copos/fuzzy.hpp"

using namespace copos;

namespace {

const ModelParams<double> P = ModelParams<double>::table1();
const Domain<double> D;

// Dense grid extremes of each premise; an oracle for the sector bounds.
std::array<std::pair<double, double>, 3> grid_extremes(int n) {
  std::array<std::pair<double, double>, 3> ext;
  ext.fill({1e300, -1e300});
  for (int a = 0; a <= n; ++a)
    for (int b = 0; b <= n; ++b) {
      const double x1 = D.x1_min + (D.x1_max - D.x1_min) * a / n;
      const double x2 = D.x2_min + (D.x2_max - D.x2_min) * b / n;
      const double th[3] = {-P.mu_c * std::log(x1 / P.x_inf) - P.gamma * x2,
                            P.mu_I * (x1 - P.beta * x1 * x1) - P.delta, -P.k_x1 * x1};
      for (int k = 0; k < 3; ++k) {
        ext[k].first = std::min(ext[k].first, th[k]);
        ext[k].second = std::max(ext[k].second, th[k]);
      }
    }
  return ext;
}

State<double> random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u1(D.x1_min, D.x1_max), u2(D.x2_min, D.x2_max);
  return {u1(rng), u2(rng)};
}

}  // namespace

TEST_CASE("endpoint sectors give the published vertex entries") {
  const auto b = premise_bounds(P, D, ExtremaMode::kEndpoint);
  CHECK(b[0].max == doctest::Approx(5.0178).epsilon(1e-4));
  CHECK(b[0].min == doctest::Approx(-5.1391).epsilon(1e-4));
  CHECK(b[1].max == doctest::Approx(-0.3740).epsilon(1e-3));
  CHECK(b[1].min == doctest::Approx(-8.3121).epsilon(1e-4));
  CHECK(b[2].max == doctest::Approx(-0.1));
  CHECK(b[2].min == doctest::Approx(-1000.0));

  const auto v = build_vertices(b);
  std::set<double> seen;
  for (int i = 0; i < kRules; ++i) {
    CHECK(v.A[i](0, 1) == 0.0);
    CHECK(v.A[i](1, 0) == 0.0);
    CHECK(v.B[i](1, 1) == 1.0);
    seen.insert(v.A[i](0, 0));
    seen.insert(v.A[i](1, 1));
    seen.insert(v.B[i](0, 0));
  }
  CHECK(seen.size() == 6);
  // Rule 1 takes every maximum, rule 8 every minimum.
  CHECK(v.A[0](0, 0) == b[0].max);
  CHECK(v.A[0](1, 1) == b[1].max);
  CHECK(v.B[0](0, 0) == b[2].max);
  CHECK(v.A[7](0, 0) == b[0].min);
  CHECK(v.A[7](1, 1) == b[1].min);
  CHECK(v.B[7](0, 0) == b[2].min);
  CHECK(v.A[5](0, 0) == b[0].min);
  CHECK(v.A[5](1, 1) == b[1].max);
  CHECK(v.B[5](0, 0) == b[2].min);
}

TEST_CASE("global sectors agree with a dense grid search") {
  const auto ext = grid_extremes(2000);
  const auto g = premise_bounds(P, D, ExtremaMode::kGlobal);
  const auto e = premise_bounds(P, D, ExtremaMode::kEndpoint);
  for (int k = 0; k < 3; ++k) {
    CHECK(g[k].min == doctest::Approx(ext[k].first).epsilon(1e-6));
    CHECK(g[k].max >= ext[k].second - 1e-12);
    CHECK(g[k].max - ext[k].second < 1e-5);
  }
  // The concave th2 peaks inside the domain, above both endpoints.
  CHECK(g[1].max == doctest::Approx(P.mu_I / (4 * P.beta) - P.delta).epsilon(1e-12));
  CHECK(g[1].max > e[1].max);
  CHECK(g[0].max == e[0].max);
  CHECK(g[2].min == e[2].min);
}

TEST_CASE("memberships stay on the simplex and reproduce the premise matrices") {
  const auto b = premise_bounds(P, D, ExtremaMode::kGlobal);
  const auto v = build_vertices(b);
  std::mt19937_64 rng(7);
  double worst_sum = 0, worst_matrix = 0;
  for (int n = 0; n < 10000; ++n) {
    const State<double> s = random_state(rng);
    Premises<double> th = premise_values(P, s);
    CHECK(clamp_to_sectors(th, b) == 0);
    const Memberships<double> h = membership(th, b);
    REQUIRE((h.array() >= 0.0).all());
    REQUIRE((h.array() <= 1.0).all());
    worst_sum = std::max(worst_sum, std::abs(h.sum() - 1.0));
    const auto [A, B] = blend(h, v);
    Eigen::Matrix2d Ad, Bd;
    Ad << th(0), 0, 0, th(1);
    Bd << th(2), 0, 0, 1;
    worst_matrix = std::max({worst_matrix, (A - Ad).cwiseAbs().maxCoeff(), (B - Bd).cwiseAbs().maxCoeff()});
  }
  CHECK(worst_sum < 1e-12);
  CHECK(worst_matrix < 1e-10);
}

TEST_CASE("endpoint sectors miss part of the th2 range, and clamping keeps h on the simplex") {
  const auto b = premise_bounds(P, D, ExtremaMode::kEndpoint);
  Premises<double> th = premise_values(P, State<double>(189.39, 1.0));
  CHECK_FALSE(b[1].contains(th(1)));
  CHECK(clamp_to_sectors(th, b) == 1);
  CHECK_NOTHROW(check_simplex(membership(th, b)));
}

TEST_CASE("membership of a vertex premise vector selects that rule") {
  const auto b = premise_bounds(P, D, ExtremaMode::kEndpoint);
  for (int i = 0; i < kRules; ++i) {
    Premises<double> th;
    for (int k = 0; k < 3; ++k) th(k) = rule_corner(i, k) == 0 ? b[k].max : b[k].min;
    const Memberships<double> h = membership(th, b);
    CHECK(h(i) == doctest::Approx(1.0));
    CHECK(h.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("degenerate domains and off-simplex weights are rejected") {
  Domain<double> d;
  d.x1_max = d.x1_min;
  CHECK_THROWS_AS(premise_bounds(P, d, ExtremaMode::kEndpoint), DegenerateSectorError);
  PremiseBounds<double> flat = premise_bounds(P, D, ExtremaMode::kEndpoint);
  flat.sectors[2].max = flat.sectors[2].min;
  CHECK_THROWS_AS(build_vertices(flat), DegenerateSectorError);
  CHECK_THROWS_AS(membership(Premises<double>(Premises<double>::Zero()), flat), DegenerateSectorError);
  Memberships<double> h = Memberships<double>::Zero();
  h(0) = 0.5;
  const auto v = build_vertices(premise_bounds(P, D, ExtremaMode::kEndpoint));
  CHECK_THROWS_AS(blend(h, v), SimplexViolation);
}

TEST_CASE("augmentation and Euler discretisation have the integral-action structure") {
  const auto v = build_vertices(premise_bounds(P, D, ExtremaMode::kEndpoint));
  const auto a = augment(v);
  const double T = 1e-3;
  const auto d = discretize_euler(a, T);
  CHECK(d.discrete);
  CHECK(d.T == T);
  CHECK_THROWS(discretize_euler(d, T));
  for (int i = 0; i < kRules; ++i) {
    CHECK((a.A[i].topLeftCorner<2, 2>() - v.A[i]).isZero());
    CHECK((a.A[i].bottomLeftCorner<2, 2>() + Eigen::Matrix2d::Identity()).isZero());
    CHECK(a.A[i].rightCols<2>().isZero());
    CHECK(a.B[i].bottomRows<2>().isZero());
    CHECK((d.A[i] - (Eigen::Matrix4d::Identity() + T * a.A[i])).isZero());
    CHECK((d.B[i] - T * a.B[i]).isZero());
  }
  CHECK((d.D.bottomRightCorner<2, 2>() - T * Eigen::Matrix2d::Identity()).isZero());
  CHECK((a.C.leftCols<2>() - Eigen::Matrix2d::Identity()).isZero());
  CHECK(stacked_reference(Eigen::Vector2d(50, 1.6)) == Eigen::Vector4d(0, 0, 50, 1.6));
}

TEST_CASE("unforced discrete fuzzy model tracks the RK4 solution over 10 days") {
  // U = (u1, u2*) = (0, alpha) is the untreated plant after the change of input.
  const auto v = build_vertices(premise_bounds(P, D, ExtremaMode::kGlobal));
  const double T = 1e-5;
  State<double> x(600, 0.1);
  const Eigen::Vector2d U(0.0, P.alpha);
  const long steps = std::lround(10.0 / T);
  for (long k = 0; k < steps; ++k) {
    const auto [A, B] = blend(membership(premise_values(P, x), v.bounds), v);
    x = x + T * (A * x + B * U);
  }
  const auto ref = integrate_rk4<double>(P, State<double>(600, 0.1), {}, 10.0, 1e-3).states.back();
  CHECK(std::abs(x(0) - ref(0)) / ref(0) < 0.02);
  CHECK(std::abs(x(1) - ref(1)) / ref(1) < 0.02);
}
