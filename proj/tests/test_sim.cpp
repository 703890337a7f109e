#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <charconv>
#include <random>
#include <sstream>

#include "copos/sim.hpp"

using namespace copos;
using namespace copos::sim;

namespace {

const ModelParams<double> P = ModelParams<double>::table1();

struct Fixture {
  AugmentedVertexSystem<double> sys;
  MatrixList K;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.sys = discretize_euler(augment(build_vertices(premise_bounds(P, Domain<double>{}, ExtremaMode::kEndpoint))), 1e-5);
    const auto out = synthesize_pdc(make_design_problem(x.sys));
    REQUIRE(out.feasible());
    x.K = out.result->K;
    return x;
  }();
  return f;
}

MatrixList random_gains(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixList K;
  for (int i = 0; i < kRules; ++i) {
    Eigen::MatrixXd k(2, 4);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) k(r, c) = g(rng);
    K.push_back(k);
  }
  return K;
}

}  // namespace

TEST_CASE("PDC law is the membership-weighted gain sum") {
  std::mt19937_64 rng(3);
  const MatrixList K = random_gains(rng);
  const GainSet G = to_gain_set(K);
  const AugmentedState x(600, 0.1, 2.0, -1.0);

  Memberships<double> e3 = Memberships<double>::Zero();
  e3(2) = 1;
  CHECK((pdc_control(e3, G, x) - K[2] * x).norm() < 1e-12);

  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Memberships<double> h;
    for (int i = 0; i < kRules; ++i) h(i) = u(rng);
    h /= h.sum();
    Eigen::Vector2d brute = Eigen::Vector2d::Zero();
    for (int i = 0; i < kRules; ++i)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) brute(r) += h(i) * K[i](r, c) * x(c);
    CHECK((pdc_control(h, G, x) - brute).norm() < 1e-10);
    CHECK((pdc_control(Eigen::VectorXd(h), K, Eigen::VectorXd(x)) - brute).norm() < 1e-10);
  }

  const MatrixList same(kRules, K[0]);
  Memberships<double> h1 = Memberships<double>::Constant(1.0 / 8);
  CHECK((pdc_control(h1, to_gain_set(same), x) - pdc_control(e3, to_gain_set(same), x)).norm() < 1e-12);
  CHECK_THROWS_AS(to_gain_set(MatrixList(3, K[0])), DimensionMismatch);
  CHECK_THROWS_AS(pdc_control(Eigen::VectorXd::Ones(3), K, Eigen::VectorXd(x)), DimensionMismatch);
}

TEST_CASE("input recovery inverts the change of variable and clamps") {
  const State<double> s(300, 0.8);
  const DoseCaps caps;
  auto r = recover_inputs(Eigen::Vector2d(0.2, P.alpha), s, P, caps);
  CHECK(r.applied(1) == 0.0);
  CHECK(r.clamped == 0);
  r = recover_inputs(Eigen::Vector2d(0.2, P.alpha + P.k_x2 * s(1)), s, P, caps);
  CHECK(r.applied(1) == doctest::Approx(1.0).epsilon(1e-14));
  r = recover_inputs(Eigen::Vector2d(-0.3, P.alpha), s, P, caps);
  CHECK(r.applied(0) == 0.0);
  CHECK(r.clamped == 1);
  r = recover_inputs(Eigen::Vector2d(5.0, 100.0), State<double>(300, 0.0), P, caps);
  CHECK(r.applied(0) == 1.0);
  CHECK(r.applied(1) == 1.0);
  CHECK(r.clamped == 2);
}

TEST_CASE("untreated closed loop reproduces the open-loop RK4 trajectory") {
  const auto& f = fixture();
  Scenario sc;
  sc.name = "none";
  sc.therapy = Therapy::kNone;
  sc.duration = 5.0;
  sc.controller_period = 1e-3;
  sc.record_interval = 0;
  const Trajectory tr = run_closed_loop(sc, f.sys, f.K, P);
  const auto ol = integrate_rk4<double>(P, sc.x0, {}, sc.duration, sc.controller_period);
  REQUIRE(tr.size() == ol.states.size());
  double worst = 0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    worst = std::max(worst, (tr.states[k] - ol.states[k]).cwiseAbs().maxCoeff());
    CHECK(tr.u_applied[k].isZero());
  }
  CHECK(worst <= 1e-9);
  const OutcomeMetrics m = summarize(tr, P);
  CHECK_FALSE(m.time_to_benign.has_value());
  CHECK(m.total_chemo_dose == 0.0);
  CHECK(m.total_immuno_dose == 0.0);
}

TEST_CASE("clamp events account exactly for raw-versus-applied differences") {
  const auto& f = fixture();
  Scenario sc;
  sc.name = "short";
  sc.duration = 0.05;
  sc.record_interval = 0;
  const Trajectory tr = run_closed_loop(sc, f.sys, f.K, P);
  long moved = 0;
  for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
    const double u2 = (tr.u_raw[k](1) - P.alpha) / (P.k_x2 * std::max(tr.states[k](1), kDenominatorGuard));
    moved += (tr.u_applied[k](0) != tr.u_raw[k](0)) + (tr.u_applied[k](1) != u2);
    CHECK((tr.u_applied[k].array() >= 0).all());
    CHECK((tr.u_applied[k].array() <= 1).all());
    CHECK(tr.memberships[k].sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(moved == tr.dose_clamp_events);
  CHECK(tr.steps + 1 == static_cast<long>(tr.size()));
}

TEST_CASE("combined therapy moves the tumor into the benign basin") {
  const auto& f = fixture();
  Scenario cont, disc;
  cont.name = "combined";
  disc = cont;
  disc.name = "combined-euler";
  disc.plant = PlantMode::kDiscreteEuler;
  const auto res = run_batch({cont, disc}, f.sys, f.K, P);
  REQUIRE(res.size() == 2);
  const Trajectory& tr = res[0].trajectory;
  const OutcomeMetrics& m = res[0].metrics;

  CHECK((tr.min_state.array() > 0).all());
  CHECK((tr.min_dose.array() >= 0).all());
  CHECK((tr.max_dose.array() <= 1).all());
  REQUIRE(m.time_to_benign.has_value());
  CHECK(*m.time_to_benign <= 20.0);
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (tr.times[k] >= *m.time_to_benign) CHECK(tr.states[k](0) < 355.4);
  CHECK(m.max_tumor == doctest::Approx(600.0));
  CHECK(std::abs(m.terminal_state(1) - 1.6) < 0.2);
  // With x2 held at its reference, the smallest tumor reachable with u1 >= 0
  // is the untreated balance x1 = x_inf exp(-gamma x2 / mu_c).
  const double floor_x1 = P.x_inf * std::exp(-P.gamma * m.terminal_state(1) / P.mu_c);
  CHECK(m.terminal_state(0) == doctest::Approx(floor_x1).epsilon(0.01));
  CHECK(m.total_chemo_dose > 0);
  CHECK(m.total_immuno_dose > 0);

  const auto& d = res[1].metrics.terminal_state;
  CHECK(std::abs(d(0) - m.terminal_state(0)) / m.terminal_state(0) < 0.05);
  CHECK(std::abs(d(1) - m.terminal_state(1)) / m.terminal_state(1) < 0.05);
}

TEST_CASE("batch results match individual runs in order") {
  const auto& f = fixture();
  std::vector<Scenario> list;
  for (Therapy t : {Therapy::kImmunoOnly, Therapy::kNone, Therapy::kChemoOnly}) {
    Scenario s;
    s.name = to_string(t);
    s.therapy = t;
    s.duration = 0.2;
    list.push_back(s);
  }
  const auto batch = run_batch(list, f.sys, f.K, P);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Trajectory solo = run_closed_loop(list[i], f.sys, f.K, P);
    CHECK(trajectory_csv(solo) == trajectory_csv(batch[i].trajectory));
  }
  // Masking: chemo-only never doses immunotherapy, immuno-only never doses chemo.
  for (const auto& u : batch[0].trajectory.u_applied) CHECK(u(0) == 0.0);
  for (const auto& u : batch[2].trajectory.u_applied) CHECK(u(1) == 0.0);
}

TEST_CASE("CSV export round-trips doubles") {
  const auto& f = fixture();
  Scenario sc;
  sc.name = "csv";
  sc.duration = 0.01;
  sc.record_interval = 0.001;
  const Trajectory tr = run_closed_loop(sc, f.sys, f.K, P);
  const std::string csv = trajectory_csv(tr);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x1,x2,eI1,eI2,u1_raw,u2star_raw,u1,u2,h1,h2,h3,h4,h5,h6,h7,h8");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> cells;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      double v;
      std::from_chars(line.data() + start, line.data() + end, v);
      cells.push_back(v);
      start = end + 1;
    }
    REQUIRE(cells.size() == 17);
    CHECK(cells[1] == tr.states[rows](0));
    CHECK(cells[4] == tr.eI[rows](1));
    CHECK(cells[16] == tr.memberships[rows](7));
    ++rows;
  }
  CHECK(rows == tr.size());
}

TEST_CASE("scenario validation") {
  Scenario sc;
  sc.x0 = State<double>(-1, 0.1);
  CHECK_THROWS_AS(sc.validate(), DomainError);
  sc.x0 = State<double>(600, 0.1);
  sc.duration = 0;
  CHECK_THROWS(sc.validate());
  CHECK(parse_therapy("immuno-only") == Therapy::kImmunoOnly);
  CHECK_THROWS(parse_therapy("surgery"));
  CHECK(parse_plant_mode("discrete-euler") == PlantMode::kDiscreteEuler);
}
