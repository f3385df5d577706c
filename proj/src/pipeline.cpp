#include "rareforce/pipeline.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

namespace rareforce {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<const Potential> make_potential(const PotentialSpec& spec) {
  if (spec.kind == "skew_double_well") return std::make_shared<SkewDoubleWell>(spec.tilt);
  if (spec.kind == "free") return std::make_shared<FreePotential>(1);
  if (spec.kind == "harmonic") return std::make_shared<HarmonicPotential>(1, spec.stiffness, spec.center);
  throw std::invalid_argument("unknown potential kind " + spec.kind);
}

Experiment make_experiment(const RunConfig& cfg) {
  cfg.validate();
  Experiment exp;
  exp.config = cfg;
  exp.hash = config_hash(cfg);
  exp.set = std::make_shared<IntervalSet>(cfg.set_lo, cfg.set_hi);
  exp.model.potential = make_potential(cfg.potential);
  exp.model.observable = Observable::constant(cfg.sigma);
  exp.model.stopping_set = exp.set;
  exp.model.domain = SimulationDomain::interval(
      cfg.domain_lo, cfg.domain_hi, cfg.boundary == "abort" ? BoundaryBehavior::abort : BoundaryBehavior::reflect);
  exp.model.validate();
  if (cfg.x0) {
    exp.x0 = {*cfg.x0};
  } else {
    // The metastable state farthest from the target.
    const auto minima = local_minima_1d(*exp.model.potential, cfg.set_hi, cfg.domain_hi);
    exp.x0 = {minima.empty() ? 0.5 * (cfg.set_hi + cfg.domain_hi) : minima.back()};
  }
  return exp;
}

ObjectiveProblem Experiment::problem() const {
  ObjectiveProblem p;
  p.model = model;
  p.x0 = x0;
  p.sim = config.sim;
  p.sim.batch_size = config.descent.batch_size;
  return p;
}

Grid1D Experiment::grid() const { return reference_grid(*set, model.domain, config.reference.dx); }

GaussianAnsatz make_initial_ansatz(const Experiment& exp) {
  const RunConfig& c = exp.config;
  GaussianAnsatz ansatz =
      make_uniform_ansatz(c.ansatz.m, c.domain_lo, c.domain_hi, *exp.set, c.ansatz.stddev(), exp.x0[0]);
  if (c.ansatz.init == "fill_wells") {
    const auto nodes = exp.grid().nodes();
    ansatz.set_coefficients(init_fill_wells(ansatz, *exp.model.potential, nodes, exp.x0[0], c.set_hi));
  }
  return ansatz;
}

ReferenceSolution run_reference(const Experiment& exp) {
  const Grid1D grid = exp.grid();
  ReferenceSolution sol = solve_fk(*exp.model.potential, exp.config.sigma, exp.config.sim.epsilon, grid);
  sol.mfpt = solve_mfpt_pde(*exp.model.potential, exp.config.sim.epsilon, grid);
  return sol;
}

OptimizeOutcome run_optimize(const Experiment& exp, std::size_t shells) {
  const GaussianAnsatz initial = make_initial_ansatz(exp);
  const MilestoneLadder ladder =
      exp.config.ladder.thresholds.empty() || shells != exp.config.ladder.shells
          ? build_ladder(*exp.set, exp.model.domain, shells, initial)
          : build_ladder(*exp.set, exp.model.domain, exp.config.ladder.thresholds, initial);
  DescentConfig dc = exp.config.descent;
  dc.seed = exp.config.sim.seed;
  MilestoningResult r = run_milestoning(ladder, initial, exp.problem(), dc);
  OptimizeOutcome out{r.value(), std::move(r.traces), std::move(r.boundary_values), false, r.error};
  out.converged = r.complete;
  for (const auto& t : out.traces) out.converged = out.converged && t.converged;
  return out;
}

OptimizeOutcome run_optimize(const Experiment& exp) {
  const std::size_t k =
      exp.config.ladder.thresholds.empty() ? exp.config.ladder.shells : exp.config.ladder.thresholds.size() + 1;
  return run_optimize(exp, k);
}

CompositeValue value_from_json(const json& doc, const Experiment& exp) {
  GaussianAnsatz ansatz = ansatz_from_json(doc.at("ansatz"));
  MilestoneLadder ladder = doc.contains("ladder") ? ladder_from_json(doc.at("ladder"))
                                                  : build_ladder(*exp.set, exp.model.domain, 1, ansatz);
  return CompositeValue(std::move(ansatz), std::move(ladder));
}

double value_deviation(const CompositeValue& v, const ReferenceSolution& ref, double lo, double hi) {
  const double base = v.value(ref.grid.lo);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.grid.n; ++i) {
    const double x = ref.grid.node(i);
    if (x < lo - 1e-12 || x > hi + 1e-12) continue;
    worst = std::max(worst, std::abs(v.value(x) - base - ref.free_energy[i]));
  }
  return worst;
}

std::vector<double> tilted_mfpt(const Experiment& exp, const ControlField& control, const Grid1D& grid) {
  std::vector<double> g(grid.n);
  double x = 0.0, dv = 0.0, c = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    x = grid.node(i);
    exp.model.potential->gradient(std::span<const double>(&x, 1), std::span<double>(&dv, 1));
    control.evaluate(std::span<const double>(&x, 1), std::span<double>(&c, 1));
    g[i] = dv - std::numbers::sqrt2 * c;
  }
  return solve_mfpt_pde(g, exp.config.sim.epsilon, grid);
}

json gradcheck_at(const Experiment& exp, const GaussianAnsatz& ansatz) {
  const GradcheckSpec& gc = exp.config.gradcheck;
  ObjectiveProblem problem = exp.problem();
  problem.sim.batch_size = gc.batch_size;
  const GradientEstimate g = estimate_exact_gradient_fixed_horizon(ansatz, problem, gc.horizon);

  json comps = json::array();
  bool all = true;
  const double n = static_cast<double>(gc.batch_size);
  for (std::size_t j = 0; j < ansatz.size(); ++j) {
    GaussianAnsatz plus = ansatz, minus = ansatz;
    Eigen::VectorXd a = ansatz.coefficients();
    a[static_cast<Eigen::Index>(j)] += gc.fd_step;
    plus.set_coefficients(a);
    a[static_cast<Eigen::Index>(j)] -= 2.0 * gc.fd_step;
    minus.set_coefficients(a);
    const auto cp = cost_samples(plus, problem, gc.horizon);
    const auto cm = cost_samples(minus, problem, gc.horizon);
    double mean = 0.0;
    std::vector<double> d(cp.size());
    for (std::size_t i = 0; i < cp.size(); ++i) {
      d[i] = (cp[i] - cm[i]) / (2.0 * gc.fd_step);
      mean += d[i];
    }
    mean /= n;
    double var = 0.0;
    for (double v : d) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    const double fd_se = std::sqrt(var / n);
    const auto jj = static_cast<Eigen::Index>(j);
    const double combined = std::hypot(g.gradient_stderr[jj], fd_se);
    const double tol = std::max(3.0 * combined, 1e-3 * std::abs(mean));
    const bool pass = std::abs(g.gradient[jj] - mean) <= tol;
    all = all && pass;
    comps.push_back({{"index", j},
                     {"exact", g.gradient[jj]},
                     {"exact_stderr", g.gradient_stderr[jj]},
                     {"finite_difference", mean},
                     {"finite_difference_stderr", fd_se},
                     {"tolerance", tol},
                     {"pass", pass}});
  }
  std::vector<double> a(ansatz.coefficients().data(), ansatz.coefficients().data() + ansatz.size());
  return {{"coefficients", a}, {"cost", g.value}, {"components", comps}, {"pass", all}};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

namespace {

json oracle_probes(const Experiment& exp, const ReferenceSolution& ref) {
  const std::size_t k = exp.config.reference.probes;
  json probes = json::array();
  double worst = 0.0;
  for (std::size_t i = 1; i <= k; ++i) {
    const double x = ref.grid.lo + (ref.grid.hi - ref.grid.lo) * static_cast<double>(i) / static_cast<double>(k);
    const double pde = ref.interpolate(ref.mfpt, x);
    const double oracle =
        mfpt_quadrature_oracle(*exp.model.potential, exp.config.sim.epsilon, x, ref.grid.lo, ref.grid.hi);
    const double rel = std::abs(pde - oracle) / std::abs(oracle);
    worst = std::max(worst, rel);
    probes.push_back({{"x", x}, {"pde", pde}, {"oracle", oracle}, {"rel_error", rel}});
  }
  return {{"points", probes}, {"max_rel_error", worst}};
}

void write_trace(const fs::path& path, const DescentTrace& trace, const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  trace.write_csv(out, hash);
}

struct TraceRow {
  double cost;
  double stderr_;
};

std::vector<TraceRow> read_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TraceRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < 5) throw std::runtime_error("malformed trace row in " + path.string());
    rows.push_back({cells[1], cells[4]});
  }
  return rows;
}

}  // namespace

int cmd_reference(const Experiment& exp, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const ReferenceSolution ref = run_reference(exp);
  {
    std::ofstream csv(out_dir / "reference.csv");
    ref.write_csv(csv, exp.hash);
  }
  const auto via_sigma = mfpt_from_sigma_derivative(*exp.model.potential, exp.config.sim.epsilon, ref.grid);
  const auto residual = hjb_residual(ref, *exp.model.potential);
  double hjb_max = 0.0;
  for (double r : residual) hjb_max = std::max(hjb_max, std::abs(r));
  const double x0 = exp.x0[0];
  json doc;
  doc["config_hash"] = exp.hash;
  doc["x0"] = x0;
  doc["sigma"] = ref.sigma;
  doc["epsilon"] = ref.epsilon;
  doc["dx"] = ref.grid.dx();
  doc["psi_x0"] = ref.interpolate(ref.psi, x0);
  doc["free_energy_x0"] = ref.interpolate(ref.free_energy, x0);
  doc["mfpt_x0"] = ref.interpolate(ref.mfpt, x0);
  doc["sigma_derivative_rel_error"] = max_relative_error(via_sigma, ref.mfpt);
  doc["hjb_max_residual"] = hjb_max;
  doc["oracle"] = oracle_probes(exp, ref);
  write_json_file(out_dir / "reference.json", doc);
  std::cout << fmt::format("reference: mfpt(x0={:.6f}) = {:.6f}, F(x0) = {:.6f}, oracle max rel error {:.2e}\n", x0,
                           doc["mfpt_x0"].get<double>(), doc["free_energy_x0"].get<double>(),
                           doc["oracle"]["max_rel_error"].get<double>());
  return 0;
}

int write_optimize_artifacts(const Experiment& exp, const OptimizeOutcome& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const CompositeValue& v = r.value;
  json doc;
  doc["config_hash"] = exp.hash;
  doc["x0"] = exp.x0;
  doc["ansatz"] = ansatz_to_json(v.ansatz());
  if (v.ladder().shell_count() > 1) doc["ladder"] = ladder_to_json(v.ladder());
  doc["converged"] = r.converged;
  bool non_converging = false;
  for (const auto& t : r.traces) non_converging = non_converging || t.non_converging;
  doc["non_converging"] = non_converging;
  doc["boundary_values"] = r.boundary_values;
  doc["value_x0"] = v.value(exp.x0[0]);
  if (!r.error.empty()) doc["error"] = r.error;
  write_json_file(out_dir / "ansatz.json", doc);

  if (r.traces.size() == 1) {
    write_trace(out_dir / "trace.csv", r.traces.front(), exp.hash);
  } else {
    for (std::size_t i = 0; i < r.traces.size(); ++i) {
      write_trace(out_dir / fmt::format("trace_shell{}.csv", i), r.traces[i], exp.hash);
    }
  }
  std::size_t iters = 0;
  for (const auto& t : r.traces) iters += t.records.size();
  std::cout << fmt::format("optimize: {} shell(s), {} iterations, converged={}, F~(x0)={:.6f}\n", r.traces.size(),
                           iters, r.converged, doc["value_x0"].get<double>());
  if (!r.error.empty()) {
    std::cerr << "error: " << r.error << "\n";
    return 2;
  }
  return 0;
}

int cmd_optimize(const Experiment& exp, const fs::path& out_dir) {
  return write_optimize_artifacts(exp, run_optimize(exp), out_dir);
}

int cmd_estimate(const Experiment& exp, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::unique_ptr<ControlField> control;
  if (exp.config.estimate.control == "none") {
    control = std::make_unique<ZeroControl>(1);
  } else {
    const fs::path path = out_dir / "ansatz.json";
    if (!fs::exists(path)) throw std::runtime_error("estimate needs " + path.string() + "; run optimize first");
    control = std::make_unique<CompositeValue>(value_from_json(read_json_file(path), exp));
  }
  SimConfig sim = exp.config.sim;
  const std::size_t n = exp.config.estimate.paths;
  const EstimatorResult mfpt = estimate_mfpt_reweighted(*control, exp.model, exp.x0, sim, n);
  const PsiEstimate psi = estimate_psi_reweighted(*control, exp.model, exp.x0, sim, n);
  EstimatorResult fe = psi.psi;
  fe.estimate = psi.free_energy;
  fe.std_error = psi.free_energy_stderr;
  fe.ci95 = {fe.estimate - 1.96 * fe.std_error, fe.estimate + 1.96 * fe.std_error};

  json doc;
  doc["config_hash"] = exp.hash;
  doc["control"] = exp.config.estimate.control;
  doc["records"] = {estimate_to_json("mfpt", exp.x0, mfpt, exp.hash),
                    estimate_to_json("psi", exp.x0, psi.psi, exp.hash),
                    estimate_to_json("free_energy", exp.x0, fe, exp.hash)};
  write_json_file(out_dir / "estimates.json", doc);
  std::cout << fmt::format("estimate: mfpt = {:.5f} +- {:.5f}, F = {:.5f} +- {:.5f} ({} paths, ess {:.1f})\n",
                           mfpt.estimate, mfpt.std_error, fe.estimate, fe.std_error, n, mfpt.ess);
  return 0;
}

int cmd_gradcheck(const Experiment& exp, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const GradcheckSpec& gc = exp.config.gradcheck;
  GaussianAnsatz ansatz = make_initial_ansatz(exp);
  std::mt19937_64 rng(derive_seed(exp.config.sim.seed, 0x67c));
  std::normal_distribution<double> normal;
  json vectors = json::array();
  bool all = true;
  for (std::size_t v = 0; v < gc.vectors; ++v) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(ansatz.size()));
    for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = gc.coefficient_scale * normal(rng);
    ansatz.set_coefficients(a);
    json r = gradcheck_at(exp, ansatz);
    all = all && r["pass"].get<bool>();
    vectors.push_back(std::move(r));
  }
  json doc{{"config_hash", exp.hash},
           {"horizon", gc.horizon},
           {"fd_step", gc.fd_step},
           {"batch_size", gc.batch_size},
           {"vectors", vectors},
           {"pass", all}};
  write_json_file(out_dir / "gradcheck.json", doc);
  std::cout << fmt::format("gradcheck: {} vector(s), {}\n", gc.vectors, all ? "pass" : "FAIL");
  return all ? 0 : 1;
}

int cmd_compare(const Experiment& exp, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const ReferenceSolution ref = run_reference(exp);
  const double x0 = exp.x0[0];
  const double mfpt_ref = ref.interpolate(ref.mfpt, x0);
  const double f_ref = ref.interpolate(ref.free_energy, x0);
  json checks = json::array();
  bool all = true;
  auto add = [&](json check) {
    all = all && check["pass"].get<bool>();
    checks.push_back(std::move(check));
  };

  const json probes = oracle_probes(exp, ref);
  const double worst = probes["max_rel_error"].get<double>();
  add({{"name", "reference_vs_oracle"}, {"max_rel_error", worst}, {"limit", 1e-3}, {"pass", worst < 1e-3}});

  if (fs::exists(out_dir / "estimates.json")) {
    const json est = read_json_file(out_dir / "estimates.json");
    for (const auto& rec : est.at("records")) {
      if (rec.at("quantity") != "mfpt") continue;
      const double lo = rec.at("ci95")[0].get<double>();
      const double hi = rec.at("ci95")[1].get<double>();
      add({{"name", "mfpt_ci_covers_reference"},
           {"reference", mfpt_ref},
           {"ci95", {lo, hi}},
           {"pass", lo <= mfpt_ref && mfpt_ref <= hi}});
    }
  }

  if (fs::exists(out_dir / "ansatz.json")) {
    const CompositeValue v = value_from_json(read_json_file(out_dir / "ansatz.json"), exp);
    const double dev = value_deviation(v, ref, exp.config.set_hi, x0);
    const double limit = 5.0 * exp.config.descent.grad_tol;
    add({{"name", "value_function_deviation"}, {"max_abs_deviation", dev}, {"limit", limit}, {"pass", dev <= limit}});
    const auto tilted = tilted_mfpt(exp, v, ref.grid);
    const double ratio = mfpt_ref / ref.interpolate(tilted, x0);
    add({{"name", "tilted_speedup"}, {"ratio", ratio}, {"band", {30.0, 300.0}}, {"pass", ratio >= 30.0 && ratio <= 300.0}});
  }

  if (fs::exists(out_dir / "trace.csv")) {
    const auto rows = read_trace(out_dir / "trace.csv");
    const double allowance = exp.config.compare.discretization_allowance;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) worst_margin = std::min(worst_margin, r.cost - (f_ref - 3.0 * r.stderr_ - allowance));
    const bool pass = !rows.empty() && worst_margin >= 0.0;
    add({{"name", "variational_bound"},
         {"reference_F_x0", f_ref},
         {"allowance", allowance},
         {"iterates", rows.size()},
         {"min_margin", rows.empty() ? 0.0 : worst_margin},
         {"pass", pass}});
  }

  json doc{{"config_hash", exp.hash}, {"x0", x0}, {"checks", checks}, {"pass", all}};
  write_json_file(out_dir / "compare.json", doc);
  for (const auto& c : checks) {
    std::cout << fmt::format("compare: {:<28} {}\n", c["name"].get<std::string>(), c["pass"].get<bool>() ? "PASS" : "FAIL");
  }
  return all ? 0 : 1;
}

}  // namespace rareforce
