#include "nfheat/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nfheat/error.hpp"
#include "nfheat/output.hpp"
#include "nfheat/parameter_integral.hpp"
#include "nfheat/spde_solver.hpp"
#include "nfheat/verify.hpp"

namespace nfheat::cli {

namespace {

struct Options {
  std::string out;
  int threads = 0;

  // shared by the subcommands that declare them
  std::string model = "vicsek";
  int level = 3;
  int blowup = 0;
  std::string boundary = "reflecting";
  std::uint64_t seed = 42;
  std::string base = "gaussian";
  int depth = 6;

  // model
  int model_level = 2;

  // kernel
  std::string times = "0.01:0.5:log20";
  std::string format = "csv";
  std::string backend = "auto";

  // eta / solve
  std::string sigma = "preset:smooth";
  double T = 1.0;
  std::string eta_times;
  std::string measure_file;
  int steps = 64;
  std::string f = "sin:0.5";
  std::string u0 = "bump:center";
  double tol = 1e-8;
  int max_iter = 25;
  bool override_gate = false;
  bool residual = false;

  // verify
  std::string suite = "quick";
  std::vector<std::string> checks;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

geometry::FractalModel load_model(const std::string& name) {
  if (name == "vicsek" || name == "gasket") return geometry::build_preset(name);
  std::ifstream probe(name);
  if (!probe) throw ValidationError("unknown model '" + name + "' (vicsek, gasket, or a JSON file path)");
  return geometry::model_from_json(read_file(name));
}

kernel::Backend parse_backend(const std::string& s) {
  if (s == "auto") return kernel::Backend::automatic;
  if (s == "spectral") return kernel::Backend::spectral;
  if (s == "chebyshev") return kernel::Backend::chebyshev;
  throw ValidationError("unknown backend '" + s + "' (auto, spectral, chebyshev)");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_cells(const geometry::FractalModel& model, int blowup, int depth) {
  const double cells = std::pow(model.N, blowup + depth);
  require(cells <= static_cast<double>(1u << 22), "blowup + depth give more than 2^22 cells to store");
}

measure::MeasureRealization load_or_realize(const Options& o, const geometry::FractalModel& model) {
  if (!o.measure_file.empty()) {
    auto real = measure::MeasureRealization::from_json(read_file(o.measure_file), model);
    require(real.blowup() == o.blowup, "measure file blowup differs from --blowup");
    require(real.max_depth() >= o.depth, "measure file is shallower than --depth");
    return real;
  }
  return measure::MeasureRealization::realize(measure::parse_base(o.base, o.seed), model, o.blowup, o.depth);
}

// ---- subcommands: each returns its artifacts; nothing is written until it succeeds ----

output::Artifacts do_model(const Options& o) {
  require(o.model_level >= 0 && o.model_level <= 6, "--level must lie in [0, 6]");
  require(o.blowup >= 0 && o.blowup <= 3, "--blowup must lie in [0, 3]");
  const auto model = load_model(o.model);
  const auto vs = geometry::vertex_set(model, o.model_level, o.blowup);
  output::Artifacts art;
  art.add("vertices.csv", geometry::vertices_csv(vs, geometry::measure_weights(vs, model)));
  nlohmann::ordered_json j;
  j["name"] = model.name;
  j["N"] = model.N;
  j["alpha"] = model.alpha;
  j["dimension"] = model.d;
  j["d_f"] = model.d_f;
  j["d_w"] = model.d_w;
  j["d_s"] = model.d_s;
  j["time_scale"] = model.time_scale;
  j["diameter"] = model.diameter;
  j["essential_maps"] = model.essential;
  j["assumption1_k"] = model.assumption1_k ? nlohmann::json(*model.assumption1_k) : nlohmann::json(nullptr);
  j["level"] = o.model_level;
  j["blowup"] = o.blowup;
  j["vertices"] = vs.size();
  j["cells"] = vs.num_cells();
  j["connected"] = vs.connected();
  if (o.model_level >= 1 && vs.size() <= 4000) {
    const auto a1 = geometry::check_assumption1(model, 1, 2000, o.seed);
    j["assumption1_empirical_max_chain"] = a1.max_chain;
  }
  art.add("model.json", j.dump(2) + "\n");
  return art;
}

output::Artifacts do_kernel(const Options& o) {
  require(o.level >= 0 && o.level <= 5, "--level must lie in [0, 5]");
  require(o.blowup >= 0 && o.blowup <= 3, "--blowup must lie in [0, 3]");
  require(o.format == "csv" || o.format == "binary" || o.format == "both", "--format must be csv, binary or both");
  const auto model = load_model(o.model);
  const auto boundary = kernel::parse_boundary(o.boundary);
  const auto backend = parse_backend(o.backend);
  const auto times = parse_times(o.times);
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(model, o.level, o.blowup));
  require(vs->size() <= 20000, "kernel tables are limited to 20000 vertices");
  const auto gen = kernel::build_generator(vs, model, boundary);
  const kernel::HeatKernelTable table(gen, times, backend);
  output::Artifacts art;
  art.add("vertices.csv", geometry::vertices_csv(*vs, geometry::measure_weights(*vs, model)));
  if (o.format != "binary") art.add("kernel.csv", kernel::kernel_csv(table));
  if (o.format != "csv") art.add("kernel.bin", kernel::kernel_binary(table));
  nlohmann::ordered_json j;
  j["level"] = table.level();
  j["blowup"] = table.blowup();
  j["boundary"] = kernel::to_string(table.boundary());
  j["vertices"] = table.size();
  j["rate"] = table.rate();
  j["backend"] = table.spectral() ? "spectral" : "chebyshev";
  j["times"] = table.times();
  j["max_clipped_negative_density"] = table.max_clip();
  art.add("kernel_summary.json", j.dump(2) + "\n");
  return art;
}

output::Artifacts do_sm_sample(const Options& o) {
  require(o.blowup >= 0 && o.blowup <= 3, "--blowup must lie in [0, 3]");
  require(o.depth >= 0 && o.depth <= 12, "--depth must lie in [0, 12]");
  const auto model = load_model(o.model);
  check_cells(model, o.blowup, o.depth);
  const auto real =
      measure::MeasureRealization::realize(measure::parse_base(o.base, o.seed), model, o.blowup, o.depth);
  output::Artifacts art;
  art.add("realization.json", real.to_json());
  return art;
}

integral::HFunction make_h(const Options& o, const geometry::FractalModel& model,
                           const std::vector<double>& times) {
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(model, o.level, o.blowup));
  require(vs->size() <= kernel::kSpectralLimit, "the parameter integral needs at most 4000 vertices");
  const auto gen = kernel::build_generator(vs, model, kernel::parse_boundary(o.boundary));
  auto table = std::make_shared<kernel::HeatKernelTable>(gen, times, kernel::Backend::spectral);
  return integral::HFunction(table, model, integral::sigma_preset(o.sigma, model, o.blowup), o.T);
}

output::Artifacts do_eta(const Options& o) {
  require(o.level >= 1 && o.level <= 4, "--level must lie in [1, 4]");
  require(o.blowup >= 0 && o.blowup <= 2, "--blowup must lie in [0, 2]");
  require(o.depth >= 0 && o.depth <= 12, "--depth must lie in [0, 12]");
  require(o.T > 0 && o.T <= 100, "--T must lie in (0, 100]");
  const auto model = load_model(o.model);
  kernel::parse_boundary(o.boundary);
  if (o.measure_file.empty()) {
    measure::parse_base(o.base, o.seed);
    check_cells(model, o.blowup, std::min(o.depth, 8));
  }
  const auto times = o.eta_times.empty() ? integral::default_eta_times(model, o.level, o.T) : parse_times(o.eta_times);
  for (double t : times) require(t <= o.T, "eta times must not exceed --T");
  const auto hf = make_h(o, model, times);
  const auto real = load_or_realize(o, model);
  const auto ev = integral::eval_eta(hf, real, times, o.depth);
  output::Artifacts art;
  art.add("eta.csv", ev.csv());
  art.add("eta_convergence.csv", ev.convergence_csv());
  return art;
}

spde::ProblemSpec problem(const Options& o) {
  require(o.level >= 1 && o.level <= 4, "--level must lie in [1, 4]");
  require(o.blowup >= 0 && o.blowup <= 2, "--blowup must lie in [0, 2]");
  require(o.depth >= 0 && o.depth <= 12, "--depth must lie in [0, 12]");
  require(o.T > 0 && o.T <= 100, "--T must lie in (0, 100]");
  require(o.steps >= 1 && o.steps <= 4096, "--steps must lie in [1, 4096]");
  require(o.tol > 0 && o.tol < 1, "--tol must lie in (0, 1)");
  require(o.max_iter >= 1 && o.max_iter <= 1000, "--max-iter must lie in [1, 1000]");
  spde::ProblemSpec spec;
  spec.model = load_model(o.model);
  spec.level = o.level;
  spec.blowup = o.blowup;
  spec.boundary = kernel::parse_boundary(o.boundary);
  spec.T = o.T;
  spec.steps = o.steps;
  spec.u0 = o.u0;
  spec.f = o.f;
  spec.sigma = o.sigma;
  spec.base = measure::parse_base(o.base, o.seed);
  spec.depth = o.depth;
  spec.stop_tol = o.tol;
  spec.max_iter = o.max_iter;
  spec.override_gate = o.override_gate;
  if (o.measure_file.empty()) check_cells(spec.model, o.blowup, std::min(o.depth, 8));
  return spec;
}

std::string gate_csv(const spde::GateReport& g) {
  std::string s = "assumption,pass,detail\n";
  for (const auto& e : g.entries) s += e.name + "," + (e.pass ? "1" : "0") + ",\"" + e.detail + "\"\n";
  return s;
}

output::Artifacts do_solve(const Options& o, std::ostream& err) {
  const auto spec = problem(o);
  const auto gate = spde::assumption_gate(spec);
  if (!gate.all_pass()) {
    if (!spec.override_gate) throw ValidationError(gate.failures());
    err << "warning: proceeding past the gate: " << gate.failures() << "\n";
  }
  std::optional<measure::MeasureRealization> real;
  if (!o.measure_file.empty()) real = load_or_realize(o, spec.model);
  const spde::MildSolver solver(spec, std::move(real));
  const auto sol = solver.picard_solve();
  if (!sol.converged)
    throw ComputationError("Picard iteration did not converge in " + std::to_string(spec.max_iter) +
                           " iterations (last sup increment " +
                           fmt17(*std::max_element(sol.g.back().begin(), sol.g.back().end())) + ")");
  output::Artifacts art;
  art.add("solution.csv", sol.csv());
  art.add("diagnostics.csv", sol.diagnostics_csv(solver.f().C, solver.f().K));
  art.add("gate.csv", gate_csv(gate));
  nlohmann::ordered_json j;
  j["vertices"] = solver.size();
  j["steps"] = spec.steps;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["C_f"] = solver.f().C;
  j["K_f"] = solver.f().K;
  j["sup_u"] = sol.u.lpNorm<Eigen::Infinity>();
  if (o.residual) j["mild_residual"] = solver.residual(sol.u);
  art.add("solve_summary.json", j.dump(2) + "\n");
  return art;
}

output::Artifacts do_verify(const Options& o, std::ostream& out, int& status) {
  std::vector<std::string> names;
  if (o.suite == "custom") {
    names = o.checks;
  } else {
    require(o.checks.empty(), "--check is only valid with --suite custom");
    names = verify::suite(o.suite);
  }
  for (const auto& n : names) require(verify::find_check(n) != nullptr, "unknown check '" + n + "'");
  const auto rep = verify::run_checks(names, &out);
  output::Artifacts art;
  art.add("verify_report.json", rep.json());
  art.add("verify_report.csv", rep.csv());
  status = rep.all_pass() ? 0 : 1;
  return art;
}

void add_common(CLI::App* sub, Options& o, bool kernel_opts) {
  sub->add_option("--model", o.model, "vicsek, gasket, or a JSON model file")->capture_default_str();
  sub->add_option("--blowup", o.blowup, "blow-up exponent M")->capture_default_str();
  if (kernel_opts) {
    sub->add_option("--level", o.level, "graph level n")->capture_default_str();
    sub->add_option("--boundary", o.boundary, "reflecting or dirichlet")->capture_default_str();
  }
}

/// Global keys, then one section holding every option of the subcommand that ran.
std::string resolved_config(const Options& o, const CLI::App* sub) {
  std::string s = "threads=" + std::to_string(o.threads) + "\n";
  std::string section = sub->get_name();
  if (sub->get_parent() && sub->get_parent()->get_parent()) section = sub->get_parent()->get_name() + "." + section;
  s += "\n[" + section + "]\n" + sub->config_to_str(true, false);
  return s;
}

}  // namespace

std::vector<double> parse_times(const std::string& spec) {
  std::vector<double> t;
  auto num = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad time '" + s + "' in '" + spec + "'");
    }
  };
  const auto c1 = spec.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ValidationError("time grid '" + spec + "' needs a:b:logK or a:b:linK");
    const double a = num(spec.substr(0, c1)), b = num(spec.substr(c1 + 1, c2 - c1 - 1));
    const std::string kind = spec.substr(c2 + 1, 3), count = spec.substr(c2 + 4);
    const double k = num(count);
    if (k < 1 || k > 10000 || k != std::floor(k)) throw ValidationError("time grid count must be in [1, 10000]");
    if (!(a > 0) || !(b >= a)) throw ValidationError("time grid needs 0 < a <= b");
    if (kind == "log") {
      t = kernel::log_grid(a, b, static_cast<std::size_t>(k));
    } else if (kind == "lin") {
      for (int i = 0; i < static_cast<int>(k); ++i) t.push_back(k == 1 ? b : a + (b - a) * i / (k - 1));
    } else {
      throw ValidationError("time grid kind must be log or lin");
    }
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) t.push_back(num(item));
  }
  if (t.empty()) throw ValidationError("empty time grid");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0) || !std::isfinite(t[i])) throw ValidationError("times must be positive and finite");
    if (i > 0 && !(t[i] > t[i - 1])) throw ValidationError("times must be strictly increasing");
  }
  return t;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stochastic heat equation on nested fractals", "nfheat"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file; [section] names match subcommands");
  app.add_option("--out", o.out, "output directory (default $NFHEAT_OUTPUT_DIR or ./nfheat_out)");
  app.add_option("--threads", o.threads, "thread budget, 0 = runtime default")->check(CLI::Range(0, 1024));

  auto* model = app.add_subcommand("model", "vertex set and model properties");
  add_common(model, o, false);
  model->add_option("--level", o.model_level, "graph level n")->capture_default_str();
  model->add_option("--seed", o.seed, "seed for the chain-constant sampling")->capture_default_str();

  auto* kern = app.add_subcommand("kernel", "heat-kernel table");
  add_common(kern, o, true);
  kern->add_option("--times", o.times, "a:b:logK, a:b:linK or t1,t2,...")->capture_default_str();
  kern->add_option("--format", o.format, "csv, binary or both")->capture_default_str();
  kern->add_option("--backend", o.backend, "auto, spectral or chebyshev")->capture_default_str();

  auto* sm = app.add_subcommand("sm", "stochastic measures");
  sm->require_subcommand(1);
  auto* sample = sm->add_subcommand("sample", "realize and export cell masses");
  add_common(sample, o, false);
  sample->add_option("--base", o.base, "gaussian, stable:<a> or atomic:<n>")->capture_default_str();
  sample->add_option("--seed", o.seed)->capture_default_str();
  sample->add_option("--depth", o.depth)->capture_default_str();

  auto* eta = app.add_subcommand("eta", "parameter integral eta(t, x)");
  add_common(eta, o, true);
  eta->add_option("--base", o.base)->capture_default_str();
  eta->add_option("--seed", o.seed)->capture_default_str();
  eta->add_option("--depth", o.depth)->capture_default_str();
  eta->add_option("--sigma", o.sigma, "smooth, zero, const:<c>, holder:<b>, time")->capture_default_str();
  eta->add_option("--T", o.T)->capture_default_str();
  eta->add_option("--times", o.eta_times, "evaluation times (default: 8 in the scaling window)");
  eta->add_option("--measure", o.measure_file, "realization file from `sm sample`");

  auto* solve = app.add_subcommand("solve", "mild solution by Picard iteration");
  add_common(solve, o, true);
  solve->add_option("--base", o.base)->capture_default_str();
  solve->add_option("--seed", o.seed)->capture_default_str();
  solve->add_option("--depth", o.depth)->capture_default_str();
  solve->add_option("--sigma", o.sigma)->capture_default_str();
  solve->add_option("--T", o.T)->capture_default_str();
  solve->add_option("--steps", o.steps)->capture_default_str();
  solve->add_option("--f", o.f, "sin:<c>, zero, const:<c>, time")->capture_default_str();
  solve->add_option("--u0", o.u0, "bump:center, bump:<id>, const:<c>, zero")->capture_default_str();
  solve->add_option("--tol", o.tol, "Picard stopping tolerance")->capture_default_str();
  solve->add_option("--max-iter", o.max_iter)->capture_default_str();
  solve->add_option("--measure", o.measure_file, "realization file from `sm sample`");
  solve->add_flag("--override-gate,--override-assumption7", o.override_gate, "solve even if an assumption fails");
  solve->add_flag("--residual", o.residual, "also report the mild-equation residual");

  auto* ver = app.add_subcommand("verify", "acceptance checks");
  ver->add_option("--suite", o.suite, "quick, full or custom")
      ->check(CLI::IsMember({"quick", "full", "custom"}))
      ->capture_default_str();
  ver->add_option("--check", o.checks, "check names for --suite custom");

  std::vector<std::string> argv_store{"nfheat"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (o.threads > 0) omp_set_num_threads(o.threads);

  try {
    output::Artifacts art;
    std::string name;
    int status = 0;
    CLI::App* active = nullptr;
    for (auto* sub : {model, kern, sample, eta, solve, ver})
      if (sub->parsed()) active = sub;
    if (app.got_subcommand(model)) {
      name = "model";
      art = do_model(o);
    } else if (app.got_subcommand(kern)) {
      name = "kernel";
      art = do_kernel(o);
    } else if (app.got_subcommand(sm)) {
      name = "sm sample";
      art = do_sm_sample(o);
    } else if (app.got_subcommand(eta)) {
      name = "eta";
      art = do_eta(o);
    } else if (app.got_subcommand(solve)) {
      name = "solve";
      art = do_solve(o, err);
    } else {
      name = "verify";
      art = do_verify(o, out, status);
    }
    art.add("config.ini", resolved_config(o, active));
    const auto dir = output::resolve_output_dir(o.out);
    output::write_run(dir, name, art);
    out << name << ": wrote " << art.files.size() + 1 << " files to " << dir.string() << "\n";
    return status;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace nfheat::cli
