#include "copos/io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace copos::io {

namespace {

sim::Scenario scenario(std::string name, sim::Therapy therapy) {
  sim::Scenario s;
  s.name = std::move(name);
  s.therapy = therapy;
  return s;
}

std::string child(const std::string& where, const std::string& key) { return where + "/" + key; }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "/" : where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!keys.count(key)) throw ConfigError(child(where, key), "unknown key");
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(child(where, key), std::string("wrong type (") + it->type_name() + ")");
  }
}

void read_number(const json& obj, const char* key, const std::string& where, double& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) throw ConfigError(child(where, key), std::string("expected a number, got ") + it->type_name());
  out = it->get<double>();
}

Eigen::Vector2d read_pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where, "expected a two-element numeric array");
  return {v[0].get<double>(), v[1].get<double>()};
}

ExtremaMode parse_mode(const std::string& s, const std::string& where) {
  if (s == "endpoint") return ExtremaMode::kEndpoint;
  if (s == "global") return ExtremaMode::kGlobal;
  throw ConfigError(where, "mode must be 'endpoint' or 'global'");
}

sim::Scenario parse_scenario(const json& j, const std::string& where, const RunConfig& cfg) {
  reject_unknown(j, where,
                 {"name", "therapy", "x0", "z_r", "duration", "controller_period", "plant", "plant_substeps"});
  sim::Scenario s;
  s.caps = cfg.caps;
  s.record_interval = cfg.record_interval;
  read(j, "name", where, s.name);
  if (s.name.empty()) throw ConfigError(child(where, "name"), "scenario needs a non-empty name");
  if (j.contains("therapy")) {
    try {
      s.therapy = sim::parse_therapy(j["therapy"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(child(where, "therapy"), e.what());
    }
  }
  if (j.contains("plant")) {
    try {
      s.plant = sim::parse_plant_mode(j["plant"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(child(where, "plant"), e.what());
    }
  }
  if (j.contains("x0")) s.x0 = read_pair(j["x0"], child(where, "x0"));
  if (j.contains("z_r")) s.z_r = read_pair(j["z_r"], child(where, "z_r"));
  read_number(j, "duration", where, s.duration);
  read_number(j, "controller_period", where, s.controller_period);
  read(j, "plant_substeps", where, s.plant_substeps);
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(where, e.what());
  }
  return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"stepanova-table1", "reproduce-paper"}; }

RunConfig preset(const std::string& name) {
  RunConfig cfg;
  cfg.preset = name;
  if (name == "stepanova-table1") {
    cfg.scenarios = {scenario("combined", sim::Therapy::kCombined)};
  } else if (name == "reproduce-paper") {
    cfg.scenarios = {scenario("fig1_none", sim::Therapy::kNone), scenario("fig3_chemo", sim::Therapy::kChemoOnly),
                     scenario("fig4_immuno", sim::Therapy::kImmunoOnly),
                     scenario("fig5_combined", sim::Therapy::kCombined)};
  } else {
    throw ConfigError("/preset", "unknown preset '" + name + "'");
  }
  return cfg;
}

RunConfig parse_config(const json& doc, RunConfig cfg) {
  reject_unknown(doc, "", {"preset", "params", "domain", "fuzzy", "lp", "simulation", "output"});
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) throw ConfigError("/preset", "expected a string");
    cfg = preset(doc["preset"].get<std::string>());
  }

  if (doc.contains("params")) {
    const json& p = doc["params"];
    reject_unknown(p, "/params", {"mu_c", "mu_I", "gamma", "beta", "delta", "alpha", "x_inf", "k_x1", "k_x2"});
    auto& m = cfg.params;
    read_number(p, "mu_c", "/params", m.mu_c);
    read_number(p, "mu_I", "/params", m.mu_I);
    read_number(p, "gamma", "/params", m.gamma);
    read_number(p, "beta", "/params", m.beta);
    read_number(p, "delta", "/params", m.delta);
    read_number(p, "alpha", "/params", m.alpha);
    read_number(p, "x_inf", "/params", m.x_inf);
    read_number(p, "k_x1", "/params", m.k_x1);
    read_number(p, "k_x2", "/params", m.k_x2);
    try {
      m.validate();
    } catch (const std::exception& e) {
      throw ConfigError("/params", e.what());
    }
  }

  if (doc.contains("domain")) {
    const json& d = doc["domain"];
    reject_unknown(d, "/domain", {"x1_min", "x1_max", "x2_min", "x2_max"});
    read_number(d, "x1_min", "/domain", cfg.domain.x1_min);
    read_number(d, "x1_max", "/domain", cfg.domain.x1_max);
    read_number(d, "x2_min", "/domain", cfg.domain.x2_min);
    read_number(d, "x2_max", "/domain", cfg.domain.x2_max);
  }

  if (doc.contains("fuzzy")) {
    const json& f = doc["fuzzy"];
    reject_unknown(f, "/fuzzy", {"mode", "T"});
    if (f.contains("mode")) {
      std::string s;
      read(f, "mode", "/fuzzy", s);
      cfg.mode = parse_mode(s, "/fuzzy/mode");
    }
    read_number(f, "T", "/fuzzy", cfg.T);
    if (!(cfg.T > 0.0)) throw ConfigError("/fuzzy/T", "sampling period must be > 0");
  }

  if (doc.contains("lp")) {
    const json& l = doc["lp"];
    reject_unknown(l, "/lp",
                   {"epsilon", "q_min", "q_max", "enforce_nonpositive_gains", "positivity_rows", "objective",
                    "integral_coupling_rate", "dump"});
    auto& o = cfg.lp;
    read_number(l, "epsilon", "/lp", o.epsilon);
    read_number(l, "q_min", "/lp", o.q_min);
    read_number(l, "q_max", "/lp", o.q_max);
    read(l, "enforce_nonpositive_gains", "/lp", o.enforce_nonpositive_gains);
    read(l, "dump", "/lp", cfg.dump_lp);
    if (l.contains("positivity_rows")) {
      const json& rows = l["positivity_rows"];
      if (rows.is_string() && rows.get<std::string>() == "all") {
        o.positivity_rows = {0, 1, 2, 3};
      } else if (rows.is_string() && rows.get<std::string>() == "plant") {
        o.positivity_rows.clear();
      } else {
        read(l, "positivity_rows", "/lp", o.positivity_rows);
      }
    }
    if (l.contains("objective")) {
      std::string s;
      read(l, "objective", "/lp", s);
      if (s == "min-effort") o.objective = SynthesisObjective::kMinEffort;
      else if (s == "feasibility") o.objective = SynthesisObjective::kFeasibility;
      else throw ConfigError("/lp/objective", "must be 'min-effort' or 'feasibility'");
    }
    read_number(l, "integral_coupling_rate", "/lp", o.integral_coupling_rate);
    if (!(o.epsilon > 0.0)) throw ConfigError("/lp/epsilon", "must be > 0");
    if (!(o.q_min > 0.0) || !(o.q_max >= o.q_min)) throw ConfigError("/lp/q_max", "need 0 < q_min <= q_max");
    if (o.integral_coupling_rate < 0.0) throw ConfigError("/lp/integral_coupling_rate", "must be >= 0");
  }

  if (doc.contains("simulation")) {
    const json& s = doc["simulation"];
    reject_unknown(s, "/simulation", {"caps", "record_interval", "scenarios"});
    if (s.contains("caps")) {
      const Eigen::Vector2d c = read_pair(s["caps"], "/simulation/caps");
      if (!(c.array() >= 0.0).all()) throw ConfigError("/simulation/caps", "caps must be >= 0");
      cfg.caps = {c(0), c(1)};
    }
    read_number(s, "record_interval", "/simulation", cfg.record_interval);
    if (cfg.record_interval < 0.0) throw ConfigError("/simulation/record_interval", "must be >= 0");
    for (auto& sc : cfg.scenarios) {
      sc.caps = cfg.caps;
      sc.record_interval = cfg.record_interval;
    }
    if (s.contains("scenarios")) {
      const json& list = s["scenarios"];
      if (!list.is_array()) throw ConfigError("/simulation/scenarios", "expected an array");
      cfg.scenarios.clear();
      std::set<std::string> names;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = "/simulation/scenarios/" + std::to_string(i);
        cfg.scenarios.push_back(parse_scenario(list[i], where, cfg));
        if (!names.insert(cfg.scenarios.back().name).second)
          throw ConfigError(where + "/name", "duplicate scenario name");
      }
    }
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    reject_unknown(o, "/output", {"dir", "timestamp"});
    read(o, "dir", "/output", cfg.out_dir);
    read(o, "timestamp", "/output", cfg.timestamp);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "parse error in '" + path.string() + "': " + e.what());
  }
  return parse_config(doc, std::move(base));
}

void apply_strict_paper(RunConfig& cfg) {
  cfg.lp.enforce_nonpositive_gains = true;
  cfg.lp.objective = SynthesisObjective::kFeasibility;
  cfg.lp.integral_coupling_rate = 0.0;
}

json to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json bounds_json(const PremiseBounds<double>& b) {
  json out;
  out["mode"] = to_string(b.mode);
  json sectors = json::array();
  for (int k = 0; k < kPremises; ++k) sectors.push_back({{"min", b[k].min}, {"max", b[k].max}});
  out["sectors"] = std::move(sectors);
  return out;
}

template <typename Array>
json matrix_list(const Array& list) {
  json a = json::array();
  for (const auto& m : list) a.push_back(to_json(Eigen::MatrixXd(m)));
  return a;
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json j;
  j["preset"] = cfg.preset;
  const auto& p = cfg.params;
  j["params"] = {{"mu_c", p.mu_c},   {"mu_I", p.mu_I},   {"gamma", p.gamma}, {"beta", p.beta}, {"delta", p.delta},
                 {"alpha", p.alpha}, {"x_inf", p.x_inf}, {"k_x1", p.k_x1},   {"k_x2", p.k_x2}};
  j["domain"] = {{"x1_min", cfg.domain.x1_min},
                 {"x1_max", cfg.domain.x1_max},
                 {"x2_min", cfg.domain.x2_min},
                 {"x2_max", cfg.domain.x2_max}};
  j["fuzzy"] = {{"mode", to_string(cfg.mode)}, {"T", cfg.T}};
  j["lp"] = {{"epsilon", cfg.lp.epsilon},
             {"q_min", cfg.lp.q_min},
             {"q_max", cfg.lp.q_max},
             {"enforce_nonpositive_gains", cfg.lp.enforce_nonpositive_gains},
             {"positivity_rows", cfg.lp.positivity_rows.empty() ? json("plant") : json(cfg.lp.positivity_rows)},
             {"objective", cfg.lp.objective == SynthesisObjective::kMinEffort ? "min-effort" : "feasibility"},
             {"integral_coupling_rate", cfg.lp.integral_coupling_rate}};
  json scenarios = json::array();
  for (const auto& s : cfg.scenarios)
    scenarios.push_back({{"name", s.name},
                         {"therapy", sim::to_string(s.therapy)},
                         {"x0", {s.x0(0), s.x0(1)}},
                         {"z_r", {s.z_r(0), s.z_r(1)}},
                         {"duration", s.duration},
                         {"controller_period", s.controller_period},
                         {"plant", sim::to_string(s.plant)},
                         {"plant_substeps", s.plant_substeps}});
  j["simulation"] = {{"caps", {cfg.caps.u1, cfg.caps.u2}},
                     {"record_interval", cfg.record_interval},
                     {"scenarios", std::move(scenarios)}};
  return j;
}

json to_json(const std::vector<Equilibrium<double>>& eq) {
  json a = json::array();
  for (const auto& e : eq) {
    json ev = json::array();
    for (const auto& l : e.eigenvalues) ev.push_back({{"re", l.real()}, {"im", l.imag()}});
    a.push_back({{"x1", e.point(0)}, {"x2", e.point(1)}, {"kind", to_string(e.kind)}, {"eigenvalues", ev}});
  }
  return a;
}

json to_json(const VertexSystem<double>& sys) {
  json j;
  j["bounds"] = bounds_json(sys.bounds);
  j["A"] = matrix_list(sys.A);
  j["B"] = matrix_list(sys.B);
  j["C"] = to_json(Eigen::MatrixXd(sys.C));
  return j;
}

json to_json(const AugmentedVertexSystem<double>& sys) {
  json j;
  j["bounds"] = bounds_json(sys.bounds);
  j["discrete"] = sys.discrete;
  j["T"] = sys.T;
  j["A"] = matrix_list(sys.A);
  j["B"] = matrix_list(sys.B);
  j["C"] = to_json(Eigen::MatrixXd(sys.C));
  j["D"] = to_json(Eigen::MatrixXd(sys.D));
  return j;
}

json to_json(const SynthesisResult& res) {
  json j;
  j["q"] = vec(res.q);
  j["M"] = matrix_list(res.M);
  j["K"] = matrix_list(res.K);
  j["p"] = vec(res.certificate.p);
  j["lp_objective"] = res.lp_objective;
  j["lp_iterations"] = res.lp_iterations;
  const auto& r = res.report;
  json pairs = json::array();
  for (const auto& pr : r.pairs)
    pairs.push_back({{"i", pr.i + 1},
                     {"j", pr.j + 1},
                     {"spectral_radius", pr.spectral_radius},
                     {"min_row_entry", pr.min_row_entry},
                     {"rows_nonnegative", pr.rows_nonnegative},
                     {"decrement", pr.decrement}});
  j["report"] = {{"worst_spectral_radius", r.worst_spectral_radius},
                 {"worst_decrement", r.worst_decrement},
                 {"min_row_entry", r.min_row_entry},
                 {"all_schur", r.all_schur},
                 {"all_rows_nonnegative", r.all_rows_nonnegative},
                 {"decrement_ok", r.decrement_ok},
                 {"independent_certificate", r.independent_certificate ? vec(r.independent_certificate->p) : json()},
                 {"passed", r.passed()},
                 {"pairs", std::move(pairs)}};
  return j;
}

json to_json(const sim::OutcomeMetrics& m) {
  return {{"max_tumor", m.max_tumor},
          {"time_to_benign", m.time_to_benign ? json(*m.time_to_benign) : json()},
          {"terminal_state", {m.terminal_state(0), m.terminal_state(1)}},
          {"total_chemo_dose", m.total_chemo_dose},
          {"total_immuno_dose", m.total_immuno_dose},
          {"tracking_error", m.tracking_error}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace copos::io
