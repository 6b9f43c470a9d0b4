#include "nfheat/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "nfheat/cli.hpp"
#include "nfheat/error.hpp"
#include "nfheat/output.hpp"
#include "nfheat/parameter_integral.hpp"
#include "nfheat/spde_solver.hpp"

namespace nfheat::verify {

namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, const char* f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("nfheat_verify_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::shared_ptr<kernel::HeatKernelTable> make_table(const geometry::FractalModel& model, int level, int blowup,
                                                    kernel::Boundary boundary, std::vector<double> times,
                                                    kernel::Backend backend = kernel::Backend::automatic) {
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(model, level, blowup));
  const auto gen = kernel::build_generator(vs, model, boundary);
  return std::make_shared<kernel::HeatKernelTable>(gen, std::move(times), backend);
}

/// Largest blow-up whose level-n vertex set stays within `limit` vertices.
int largest_blowup(const geometry::FractalModel& model, int level, std::size_t limit) {
  int M = 0;
  for (int m = 1; m <= 4; ++m) {
    if (geometry::vertex_set(model, level, m).size() > limit) break;
    M = m;
  }
  return M;
}

spde::ProblemSpec vicsek_problem(std::uint64_t seed) {
  spde::ProblemSpec spec;
  spec.model = geometry::build_preset("vicsek");
  spec.level = 3;
  spec.depth = 5;
  spec.base = measure::parse_base("gaussian", seed);
  return spec;
}

// 1
CheckResult spectral_dimension() {
  CheckResult r;
  r.target = 0.0;
  r.tolerance = "|d_s - exact| <= 0.06 and < 120 s per model";
  bool ok = true;
  double worst = 0;
  for (const std::string name : {"vicsek", "gasket"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = geometry::build_preset(name);
    const int M = largest_blowup(model, 4, 2000);
    const auto [lo, hi] = kernel::scaling_window(model, 4);
    const auto table = make_table(model, 4, M, kernel::Boundary::reflecting, kernel::log_grid(lo, hi, 30));
    const auto est = kernel::estimate_spectral_dimension(*table);
    const double secs = seconds_since(t0);
    const double err = std::abs(est.d_s - model.d_s);
    worst = std::max(worst, err);
    ok = ok && err <= 0.06 && secs < 120;
    r.detail += (r.detail.empty() ? "" : "; ") + name + " M=" + std::to_string(M) + " V=" +
                std::to_string(table->size()) + ": " + num(est.d_s) + " vs " + num(model.d_s) + " (" +
                num(secs, "%.1f") + " s)";
  }
  r.measured = worst;
  r.pass = ok;
  return r;
}

// 2
CheckResult kernel_holder() {
  CheckResult r;
  const auto model = geometry::build_preset("vicsek");
  const auto [lo, hi] = kernel::scaling_window(model, 4);
  const auto table = make_table(model, 4, 0, kernel::Boundary::reflecting, kernel::log_grid(lo, hi, 30));
  const auto h = kernel::verify_holder(*table, model);
  r.measured = h.exponent;
  r.target = model.d_w - model.d_f;
  r.tolerance = ">= 0.9";
  r.pass = h.exponent >= 0.9;
  r.detail = std::to_string(h.times_used.size()) + " times, " + std::to_string(h.points) + " points, c1 in [" +
             num(h.c1_min) + ", " + num(h.c1) + "]";
  return r;
}

// 3
CheckResult kernel_structure() {
  CheckResult r;
  r.target = 1.0;
  r.tolerance = "symmetry, Chapman-Kolmogorov, mass <= 1e-8; detailed balance <= 1e-10 (measured = worst ratio)";
  const std::vector<double> times{0.01, 0.05, 0.06, 0.2, 0.25};
  const std::vector<std::array<int, 3>> ck{{0, 1, 2}, {1, 3, 4}};  // t_a + t_b = t_c
  double sym = 0, chap = 0, mass = 0, db = 0;
  for (const std::string name : {"vicsek", "gasket"}) {
    const auto model = geometry::build_preset(name);
    for (int level = 2; level <= 4; ++level) {
      for (auto boundary : {kernel::Boundary::reflecting, kernel::Boundary::dirichlet}) {
        const auto table = make_table(model, level, 0, boundary, times);
        const Eigen::VectorXd& m = table->weights();
        std::vector<Eigen::MatrixXd> P;
        for (double t : times) P.push_back(table->density(t));
        for (std::size_t i = 0; i < times.size(); ++i) {
          const double scale = P[i].cwiseAbs().maxCoeff();
          sym = std::max(sym, (P[i] - P[i].transpose()).cwiseAbs().maxCoeff() / scale);
          const Eigen::MatrixXd Q = table->probability(times[i]);
          const Eigen::MatrixXd F = m.asDiagonal() * Q;
          db = std::max(db, (F - F.transpose()).cwiseAbs().maxCoeff());
          if (boundary == kernel::Boundary::reflecting)
            mass = std::max(mass, (Q.rowwise().sum().array() - 1.0).abs().maxCoeff());
        }
        for (const auto& [a, b, c] : ck) {
          const Eigen::MatrixXd prod = P[a] * m.asDiagonal() * P[b];
          chap = std::max(chap, (prod - P[c]).cwiseAbs().maxCoeff() / P[c].cwiseAbs().maxCoeff());
        }
      }
    }
  }
  r.measured = std::max({sym / 1e-8, chap / 1e-8, mass / 1e-8, db / 1e-10});
  r.pass = r.measured <= 1.0;
  r.detail = "levels 2-4, vicsek and gasket, both boundaries: symmetry " + num(sym, "%.2e") + ", CK " +
             num(chap, "%.2e") + ", mass " + num(mass, "%.2e") + ", detailed balance " + num(db, "%.2e");
  return r;
}

// 4
CheckResult measure_consistency() {
  CheckResult r;
  r.target = 1.0;
  r.tolerance = "additivity <= 1e-12; variance within 5%; plateau in >= 95% of seeds (measured = worst ratio)";
  const auto model = geometry::build_preset("vicsek");
  const int N = model.N;

  double additivity = 0;
  boost::random::mt19937_64 rng(2024);
  for (const std::string base : {"gaussian", "stable:1.5"}) {
    const auto real = measure::MeasureRealization::realize(measure::parse_base(base, 42), model, 1, 10);
    boost::random::uniform_int_distribution<int> ud(0, real.max_depth() - 1);
    boost::random::uniform_int_distribution<std::size_t> uc(0, real.components() - 1);
    for (int s = 0; s < 5000; ++s) {
      const int d = ud(rng);
      const std::size_t c = uc(rng);
      const auto cells = static_cast<std::uint64_t>(std::llround(std::pow(N, d)));
      boost::random::uniform_int_distribution<std::uint64_t> uk(0, cells - 1);
      const std::uint64_t k = uk(rng);
      double kids = 0;
      for (int i = 0; i < N; ++i) kids += real.mass(c, d + 1, k * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(i));
      additivity = std::max(additivity, std::abs(real.mass(c, d, k) - kids));
    }
  }

  const int depth = 3, seeds = 10000;
  const std::size_t cells = static_cast<std::size_t>(std::llround(std::pow(N, depth)));
  std::vector<double> s1(cells, 0.0), s2(cells, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const auto real =
        measure::MeasureRealization::realize(measure::parse_base("gaussian", static_cast<std::uint64_t>(s)), model, 0, depth);
    const auto lm = real.level_masses(depth);
    for (std::size_t k = 0; k < cells; ++k) {
      s1[k] += lm[k];
      s2[k] += lm[k] * lm[k];
    }
  }
  const double expected = std::pow(N, -depth);
  double var_dev = 0;
  for (std::size_t k = 0; k < cells; ++k) {
    const double mean = s1[k] / seeds;
    const double var = (s2[k] - seeds * mean * mean) / (seeds - 1);
    var_dev = std::max(var_dev, std::abs(var / expected - 1.0));
  }

  const int L = 12, plateau_seeds = 100;
  const double beta = 0.5;
  int flat = 0;
  double worst_inc = 0;
  for (int s = 0; s < plateau_seeds; ++s) {
    const auto real = measure::MeasureRealization::realize(
        measure::parse_base("gaussian", 1000 + static_cast<std::uint64_t>(s)), model, 0, L);
    const auto p = measure::plateau(measure::cell_family_partial_sums(real, model, L, beta), 0.01);
    flat += p.flat ? 1 : 0;
    worst_inc = std::max(worst_inc, p.relative_increment);
  }
  const double frac = static_cast<double>(flat) / plateau_seeds;

  r.measured = std::max({additivity / 1e-12, var_dev / 0.05, frac > 0 ? 0.95 / frac : 1e300});
  r.pass = r.measured <= 1.0;
  r.detail = "additivity " + num(additivity, "%.2e") + " over 10000 nodes; max variance deviation " +
             num(100 * var_dev, "%.2f") + "% over " + std::to_string(cells) + " cells; plateau " +
             std::to_string(flat) + "/" + std::to_string(plateau_seeds) + " seeds (beta = 0.5, worst increment " +
             num(100 * worst_inc, "%.3f") + "%)";
  return r;
}

// 5
CheckResult parameter_integral() {
  CheckResult r;
  r.target = 1.0;
  r.tolerance = ">= 45/50 seeds with median ratio < 1; min h exponent >= 0.85 and > d_f/2 (measured = worst ratio)";
  const auto model = geometry::build_preset("vicsek");
  const int level = 4, depth = 8;
  const auto times = integral::default_eta_times(model, level, 1.0);
  const auto table = make_table(model, level, 0, kernel::Boundary::reflecting, times, kernel::Backend::spectral);
  const integral::HFunction hf(table, model, integral::sigma_preset("smooth", model, 0), 1.0);
  int good = 0, monotone = 0;
  double worst_ratio = 0;
  for (int s = 0; s < 50; ++s) {
    const auto real = measure::MeasureRealization::realize(
        measure::parse_base("gaussian", 500 + static_cast<std::uint64_t>(s)), model, 0, depth);
    const auto ev = integral::eval_eta(hf, real, times, depth);
    const double q = ev.median_ratio_last3();
    good += q < 1.0 ? 1 : 0;
    worst_ratio = std::max(worst_ratio, q);
    bool dec = true;
    for (std::size_t n = 2; n + 1 < ev.sup_increment.size(); ++n) dec = dec && ev.sup_increment[n + 1] < ev.sup_increment[n];
    monotone += dec ? 1 : 0;
  }
  double min_exp = std::numeric_limits<double>::infinity();
  std::string per_t;
  for (double t : times) {
    try {
      const auto fit = integral::estimate_h_holder(hf, t, 0);
      min_exp = std::min(min_exp, fit.exponent);
      per_t += (per_t.empty() ? "" : ", ") + num(t, "%.3g") + ":" + num(fit.exponent, "%.3f");
    } catch (const ComputationError&) {
      // fewer than two resolved scales at this t
    }
  }
  if (per_t.empty()) throw ComputationError("no eta time resolves two scales for the h fit");
  const double half_df = model.d_f / 2.0;
  r.measured = std::max({good > 0 ? 45.0 / good : 1e300, 0.85 / min_exp, min_exp > half_df ? 0.0 : 1e300});
  r.pass = good >= 45 && min_exp >= 0.85 && min_exp > half_df;
  r.detail = std::to_string(good) + "/50 seeds with median ratio < 1 (worst " + num(worst_ratio, "%.3f") + ", " +
             std::to_string(monotone) + "/50 strictly decreasing from n = 2); h exponents at x_0 {" + per_t +
             "}, min " + num(min_exp, "%.3f") + " vs d_f/2 = " + num(half_df, "%.4f");
  return r;
}

// 6
CheckResult picard_contraction() {
  CheckResult r;
  r.target = 1.1;
  r.tolerance = "g_n(T) <= 1.1 * bound for g_n > 1e-10; g_1 <= 2 C_f t + 1e-6; <= 10 iterations; < 300 s";
  const auto t0 = std::chrono::steady_clock::now();
  const spde::MildSolver solver(vicsek_problem(42));
  const auto sol = solver.picard_solve();
  const double secs = seconds_since(t0);
  const double C = solver.f().C, K = solver.f().K, T = solver.spec().T;
  bool g1_ok = sol.g.size() >= 2;
  double g1_excess = -1e300;
  if (g1_ok) {
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      const double excess = sol.g[1][i] - (2 * C * sol.times[i] + 1e-6);
      g1_excess = std::max(g1_excess, excess);
      g1_ok = g1_ok && excess <= 0;
    }
  }
  double worst_T = 0, worst_any_t = 0;
  for (std::size_t n = 1; n < sol.g.size(); ++n) {
    if (sol.g[n].back() > 1e-10) worst_T = std::max(worst_T, sol.g[n].back() / spde::picard_bound(C, K, static_cast<int>(n), T));
    for (std::size_t i = 1; i < sol.times.size(); ++i)
      if (sol.g[n][i] > 1e-10)
        worst_any_t = std::max(worst_any_t, sol.g[n][i] / spde::picard_bound(C, K, static_cast<int>(n), sol.times[i]));
  }
  r.measured = worst_T;
  r.pass = sol.converged && g1_ok && worst_T <= 1.1 && sol.iterations <= 10 && secs < 300;
  r.detail = std::to_string(sol.iterations) + " iterations, converged " + (sol.converged ? "yes" : "no") +
             ", max (g_1 - 2 C_f t) = " + num(g1_excess, "%.3e") + ", worst g_n(T)/bound " + num(worst_T, "%.4f") +
             " (over all grid t: " + num(worst_any_t, "%.3g") + "), " + num(secs, "%.1f") + " s";
  return r;
}

// 7
CheckResult uniqueness() {
  CheckResult r;
  r.target = 0.0;
  r.tolerance = "<= 1e-7 for every seed";
  double worst = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const spde::MildSolver solver(vicsek_problem(s));
    worst = std::max(worst, spde::uniqueness_check(solver, 1.0));
  }
  r.measured = worst;
  r.pass = worst <= 1e-7;
  r.detail = "10 seeds, starts u = 0 and u = D + 1";
  return r;
}

// 8
CheckResult assumption7_gate() {
  CheckResult r;
  r.target = 2.0;
  r.tolerance = "vicsek solve exits 0; gasket solve exits 2 with the Assumption 7 message and no outputs";
  const std::string expected = "Assumption 7 fails: spectral dimension d_s = 1.36521 is not below 4/3";
  TempDir tmp;
  std::ostringstream o1, e1, o2, e2;
  const auto vdir = (tmp.path() / "vicsek").string(), gdir = (tmp.path() / "gasket").string();
  const int vcode = cli::run({"--out", vdir, "solve", "--model", "vicsek", "--level", "2", "--depth", "4"}, o1, e1);
  const int gcode = cli::run({"--out", gdir, "solve", "--model", "gasket"}, o2, e2);
  const bool msg = e2.str().find(expected) != std::string::npos;
  const bool empty = !fs::exists(gdir);
  r.measured = gcode;
  r.pass = vcode == 0 && gcode == 2 && msg && empty;
  std::string gerr = e2.str();
  while (!gerr.empty() && gerr.back() == '\n') gerr.pop_back();
  r.detail = "vicsek exit " + std::to_string(vcode) + ", gasket exit " + std::to_string(gcode) + " (\"" + gerr +
             "\"), gasket output directory " + (empty ? "absent" : "present");
  return r;
}

// 9
CheckResult mild_residual() {
  CheckResult r;
  const spde::ProblemSpec ref = vicsek_problem(0);
  r.target = 2.0 * (ref.stop_tol + ref.quad.tol);
  r.tolerance = "<= 2 * (Picard tolerance + quadrature tolerance)";
  double worst = 0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const spde::MildSolver solver(vicsek_problem(s));
    const auto sol = solver.picard_solve();
    worst = std::max(worst, solver.residual(sol.u));
  }
  r.measured = worst;
  r.pass = worst <= r.target;
  r.detail = "5 seeds, level 3, depth 5, every grid point";
  return r;
}

// 10
CheckResult reproducibility() {
  CheckResult r;
  r.target = 0.0;
  r.tolerance = "byte-identical solution and diagnostics CSVs; manifest checksums match";
  TempDir tmp;
  const auto cfg = tmp.path() / "run.ini";
  {
    std::ofstream f(cfg);
    f << "[solve]\nmodel=vicsek\nlevel=3\ndepth=5\nseed=42\nf=sin:0.5\nsigma=preset:smooth\nu0=bump:center\n";
  }
  std::ostringstream o, e;
  std::vector<fs::path> dirs{tmp.path() / "a", tmp.path() / "b"};
  for (const auto& d : dirs) {
    const int code = cli::run({"--config", cfg.string(), "--out", d.string(), "solve"}, o, e);
    if (code != 0) throw ComputationError("solve run failed: " + e.str());
  }
  int differing = 0;
  for (const std::string f : {"solution.csv", "diagnostics.csv"})
    if (slurp(dirs[0] / f) != slurp(dirs[1] / f)) ++differing;
  bool manifest_ok = true;
  for (const auto& d : dirs) {
    const auto man = nlohmann::json::parse(slurp(d / "manifest.json"));
    for (const auto& f : man["files"])
      manifest_ok = manifest_ok && output::sha256_hex(slurp(d / f["path"].get<std::string>())) == f["sha256"];
  }
  r.measured = differing;
  r.pass = differing == 0 && manifest_ok;
  r.detail = std::to_string(differing) + " of 2 CSVs differ; manifest checksums " + (manifest_ok ? "match" : "MISMATCH");
  return r;
}

}  // namespace

const std::vector<Check>& registry() {
  static const std::vector<Check> checks{
      {"spectral_dimension", "d_s recovery on vicsek and gasket at level 4", true, spectral_dimension},
      {"kernel_holder", "kernel Hoelder exponent on vicsek at level 4", true, kernel_holder},
      {"kernel_structure", "symmetry, Chapman-Kolmogorov, mass, detailed balance", true, kernel_structure},
      {"measure_consistency", "additivity, cell variance, cell-family plateau", false, measure_consistency},
      {"parameter_integral", "S^(n) convergence over 50 seeds and h Hoelder exponent", false, parameter_integral},
      {"picard_contraction", "g_n bounds and iteration count", true, picard_contraction},
      {"uniqueness", "fixed points from two starts, 10 seeds", false, uniqueness},
      {"assumption7_gate", "vicsek accepted, gasket refused by the CLI", true, assumption7_gate},
      {"mild_residual", "fixed point reinserted into the mild equation, 5 seeds", false, mild_residual},
      {"reproducibility", "identical configs give identical CSVs", true, reproducibility},
  };
  return checks;
}

const Check* find_check(const std::string& name) {
  for (const auto& c : registry())
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<std::string> suite(const std::string& name) {
  if (name != "quick" && name != "full") throw ValidationError("unknown suite '" + name + "' (quick, full, custom)");
  std::vector<std::string> out;
  for (const auto& c : registry())
    if (name == "full" || c.quick) out.push_back(c.name);
  return out;
}

bool VerifyReport::all_pass() const {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

std::string VerifyReport::json() const {
  nlohmann::ordered_json j;
  j["overall"] = all_pass() ? "pass" : "fail";
  j["checks"] = nlohmann::json::array();
  for (const auto& r : results)
    j["checks"].push_back({{"name", r.name},
                           {"pass", r.pass},
                           {"measured", r.measured},
                           {"target", r.target},
                           {"tolerance", r.tolerance},
                           {"detail", r.detail},
                           {"seconds", r.seconds}});
  return j.dump(2) + "\n";
}

std::string VerifyReport::csv() const {
  auto quote = [](std::string s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::string s = "name,pass,measured,target,tolerance,seconds,detail\n";
  for (const auto& r : results)
    s += r.name + "," + (r.pass ? "1" : "0") + "," + num(r.measured, "%.10g") + "," + num(r.target, "%.10g") + "," +
         quote(r.tolerance) + "," + num(r.seconds, "%.3f") + "," + quote(r.detail) + "\n";
  return s;
}

VerifyReport run_checks(const std::vector<std::string>& names, std::ostream* progress) {
  VerifyReport rep;
  for (const auto& name : names) {
    const Check* c = find_check(name);
    CheckResult res;
    const auto t0 = std::chrono::steady_clock::now();
    if (!c) {
      res.detail = "unknown check";
    } else {
      try {
        res = c->run();
      } catch (const std::exception& e) {
        res = CheckResult{};
        res.detail = std::string("crashed: ") + e.what();
      }
    }
    res.name = name;
    res.seconds = seconds_since(t0);
    if (progress)
      *progress << (res.pass ? "PASS " : "FAIL ") << res.name << "  measured " << num(res.measured, "%.6g")
                << "  target " << num(res.target, "%.6g") << "  [" << res.tolerance << "]  " << res.detail << "  ("
                << num(res.seconds, "%.1f") << " s)" << std::endl;
    rep.results.push_back(std::move(res));
  }
  return rep;
}

}  // namespace nfheat::verify
