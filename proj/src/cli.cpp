#include "copos/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "copos/errors.hpp"
#include "copos/fuzzy.hpp"
#include "copos/io.hpp"
#include "copos/lp.hpp"
#include "copos/model.hpp"
#include "copos/sim.hpp"
#include "copos/synthesis.hpp"

namespace copos::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level log_level() {
  const char* env = std::getenv("COPOS_LOG");
  if (!env) return Level::kWarn;
  const std::string v = env;
  if (v == "error" || v == "0") return Level::kError;
  if (v == "info" || v == "2") return Level::kInfo;
  if (v == "debug" || v == "3") return Level::kDebug;
  return Level::kWarn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void operator()(Level l, const std::string& msg) const {
    static const char* tags[] = {"error", "warn", "info", "debug"};
    if (l <= level_) err_ << "copos[" << tags[static_cast<int>(l)] << "] " << msg << '\n';
  }

 private:
  std::ostream& err_;
  Level level_;
};

/// Failure carrying an exit code and a message for stderr.
struct Abort {
  int code;
  std::string message;
};

struct Flags {
  std::string config;
  std::string preset;
  std::string out;
  std::string mode;
  std::optional<double> T;
  bool strict_paper = false;
  bool no_timestamp = false;
  bool dump_lp = false;
};

io::RunConfig resolve(const Flags& f) {
  io::RunConfig cfg = io::preset(f.preset.empty() ? "stepanova-table1" : f.preset);
  if (!f.config.empty()) cfg = io::load_config(f.config, cfg);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.mode.empty()) {
    if (f.mode == "endpoint") cfg.mode = ExtremaMode::kEndpoint;
    else if (f.mode == "global") cfg.mode = ExtremaMode::kGlobal;
    else throw io::ConfigError("--mode", "must be 'endpoint' or 'global'");
  }
  if (f.T) {
    if (!(*f.T > 0.0)) throw io::ConfigError("--T", "sampling period must be > 0");
    cfg.T = *f.T;
  }
  if (f.strict_paper) io::apply_strict_paper(cfg);
  if (f.no_timestamp) cfg.timestamp = false;
  if (f.dump_lp) cfg.dump_lp = true;
  return cfg;
}

json stamped(json doc, const io::RunConfig& cfg) {
  if (!cfg.timestamp) return doc;
  json out;
  out["generated_at"] = io::utc_timestamp();
  for (auto& [k, v] : doc.items()) out[k] = v;
  return out;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

struct Pipeline {
  io::RunConfig cfg;
  const Log& log;
  std::ostream& out;

  VertexSystem<double> vertices() const {
    const PremiseBounds<double> b = premise_bounds(cfg.params, cfg.domain, cfg.mode);
    return build_vertices(b);
  }

  AugmentedVertexSystem<double> discrete(const VertexSystem<double>& v) const {
    return discretize_euler(augment(v), cfg.T);
  }

  SynthesisResult synthesize(const AugmentedVertexSystem<double>& sys) const {
    const DesignProblem prob = make_design_problem(sys);
    if (cfg.dump_lp) {
      const fs::path path = fs::path(cfg.out_dir) / "synthesis_lp.txt";
      io::write_text(path, lp::dump(build_synthesis_lp(prob, cfg.lp)));
      log(Level::kInfo, "LP written to " + path.string());
    }
    const auto t0 = std::chrono::steady_clock::now();
    SynthesisOutcome res = synthesize_pdc(prob, cfg.lp);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(Level::kInfo, "LP: " + std::to_string(res.lp_variables) + " variables, " +
                          std::to_string(res.lp_constraints) + " constraints, " + fmt(secs, 3) + " s");
    if (!res.feasible()) {
      std::ostringstream msg;
      msg << "synthesis LP " << lp::to_string(res.status) << " at T = " << cfg.T;
      for (const auto& d : res.diagnostics) msg << "\n  residual " << fmt(d.residual) << "  " << d.label;
      throw Abort{kLpInfeasible, msg.str()};
    }
    return std::move(*res.result);
  }

  void print_report(const ClosedLoopReport& r) const {
    out << "closed-loop verification over " << r.pairs.size() << " vertex pairs\n"
        << "  worst spectral radius   " << fmt(r.worst_spectral_radius, 12) << (r.all_schur ? "  ok" : "  FAIL") << '\n'
        << "  min plant-row entry     " << fmt(r.min_row_entry, 6) << (r.all_rows_nonnegative ? "  ok" : "  FAIL")
        << '\n'
        << "  worst Lyapunov decrement " << fmt(r.worst_decrement, 6) << (r.decrement_ok ? "  ok" : "  FAIL") << '\n'
        << "  independent certificate " << (r.independent_certificate ? "found" : "none") << '\n';
  }
};

int cmd_equilibria(const Pipeline& p) {
  const auto eq = find_equilibria(p.cfg.params);
  p.out << std::left << std::setw(14) << "x1" << std::setw(12) << "x2" << "kind\n";
  for (const auto& e : eq)
    p.out << std::setw(14) << fmt(e.point(0), 7) << std::setw(12) << fmt(e.point(1), 5) << to_string(e.kind) << '\n';
  json doc;
  doc["equilibria"] = io::to_json(eq);
  io::write_json(fs::path(p.cfg.out_dir) / "equilibria.json", stamped(doc, p.cfg));
  return kOk;
}

int cmd_fuzzify(const Pipeline& p) {
  const VertexSystem<double> v = p.vertices();
  const auto d = p.discrete(v);
  json doc;
  doc["continuous"] = io::to_json(v);
  doc["augmented_discrete"] = io::to_json(d);
  io::write_json(fs::path(p.cfg.out_dir) / "vertices.json", stamped(doc, p.cfg));
  p.out << "premise sectors (" << to_string(v.bounds.mode) << ")\n";
  for (int k = 0; k < kPremises; ++k)
    p.out << "  theta" << k + 1 << "  [" << fmt(v.bounds[k].min) << ", " << fmt(v.bounds[k].max) << "]\n";
  return kOk;
}

SynthesisResult synthesize_checked(const Pipeline& p) {
  const auto d = p.discrete(p.vertices());
  SynthesisResult r = p.synthesize(d);
  p.print_report(r.report);
  json doc = io::to_json(r);
  io::write_json(fs::path(p.cfg.out_dir) / "synthesis.json", stamped(doc, p.cfg));
  if (!r.report.passed()) throw Abort{kVerificationFailed, "closed-loop verification failed"};
  return r;
}

int cmd_synthesize(const Pipeline& p) {
  synthesize_checked(p);
  return kOk;
}

int cmd_simulate(const Pipeline& p) {
  const auto d = p.discrete(p.vertices());
  const SynthesisResult syn = synthesize_checked(p);
  std::vector<sim::ScenarioResult> results;
  try {
    results = sim::run_batch(p.cfg.scenarios, d, syn.K, p.cfg.params);
  } catch (const StepRejected& e) {
    throw Abort{kDiverged, std::string("simulation diverged: ") + e.what()};
  }
  const fs::path dir(p.cfg.out_dir);
  json summary = json::object();
  p.out << std::left << std::setw(16) << "scenario" << std::setw(12) << "max x1" << std::setw(14) << "to benign"
        << std::setw(22) << "terminal (x1, x2)" << std::setw(12) << "chemo" << "immuno\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& sc = p.cfg.scenarios[i];
    const auto& r = results[i];
    io::write_text(dir / (sc.name + ".csv"), sim::trajectory_csv(r.trajectory));
    json m = io::to_json(r.metrics);
    m["therapy"] = sim::to_string(sc.therapy);
    m["premise_clamp_events"] = r.trajectory.premise_clamp_events;
    m["dose_clamp_events"] = r.trajectory.dose_clamp_events;
    m["integrator_clamp_events"] = r.trajectory.integrator_clamp_events;
    io::write_json(dir / (sc.name + "_metrics.json"), stamped(m, p.cfg));
    summary[sc.name] = m;
    const auto& t = r.metrics.terminal_state;
    p.out << std::setw(16) << sc.name << std::setw(12) << fmt(r.metrics.max_tumor, 5) << std::setw(14)
          << (r.metrics.time_to_benign ? fmt(*r.metrics.time_to_benign, 4) : std::string("-")) << std::setw(22)
          << "(" + fmt(t(0), 5) + ", " + fmt(t(1), 4) + ")" << std::setw(12) << fmt(r.metrics.total_chemo_dose, 4)
          << fmt(r.metrics.total_immuno_dose, 4) << '\n';
  }
  json doc;
  doc["config"] = io::to_json(p.cfg);
  doc["scenarios"] = std::move(summary);
  io::write_json(dir / "metrics.json", stamped(doc, p.cfg));
  return kOk;
}

int cmd_report(const Pipeline& p) {
  cmd_equilibria(p);
  cmd_fuzzify(p);
  return cmd_simulate(p);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Positive T-S fuzzy control of tumor-immune dynamics", "copos"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  double T = 0.0;
  app.add_option("--config", f.config, "JSON configuration file");
  app.add_option("--preset", f.preset, "stepanova-table1 | reproduce-paper");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--mode", f.mode, "premise extrema: endpoint | global");
  auto* t_opt = app.add_option("--T", T, "sampling period in days");
  app.add_flag("--strict-paper", f.strict_paper, "feasibility LP with nonpositive gain variables and no coupling margin");
  app.add_flag("--no-timestamp", f.no_timestamp, "omit generated_at from JSON outputs");
  app.add_flag("--dump-lp", f.dump_lp, "write the synthesis LP as text");

  using Command = int (*)(const Pipeline&);
  Command command = nullptr;
  const std::pair<const char*, std::pair<const char*, Command>> subs[] = {
      {"equilibria", {"equilibria of the untreated model", cmd_equilibria}},
      {"fuzzify", {"premise sectors and vertex matrices", cmd_fuzzify}},
      {"synthesize", {"PDC gains from the positivity and stability LP", cmd_synthesize}},
      {"simulate", {"closed-loop treatment scenarios", cmd_simulate}},
      {"report", {"all of the above", cmd_report}},
  };
  for (const auto& [name, info] : subs) {
    Command c = info.second;
    app.add_subcommand(name, info.first)->callback([&command, c] { command = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }
  if (t_opt->count()) f.T = T;

  const Log log(err);
  try {
    const io::RunConfig cfg = resolve(f);
    log(Level::kDebug, "resolved config: " + io::to_json(cfg).dump());
    const Pipeline p{cfg, log, out};
    return command(p);
  } catch (const Abort& a) {
    log(Level::kError, a.message);
    return a.code;
  } catch (const io::ConfigError& e) {
    log(Level::kError, std::string("config: ") + e.what());
    return kConfigError;
  } catch (const DegenerateSectorError& e) {
    log(Level::kError, e.what());
    return kDegenerateSector;
  } catch (const StepRejected& e) {
    log(Level::kError, std::string("simulation diverged: ") + e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    log(Level::kError, e.what());
    return kInternalError;
  }
}

}  // namespace copos::cli
