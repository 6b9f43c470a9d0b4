#include "nfheat/spde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "nfheat/error.hpp"

namespace nfheat::spde {

namespace {

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("bad " + what + " parameter '" + s + "'");
  }
}

std::pair<std::string, std::string> split(const std::string& spec) {
  const auto colon = spec.find(':');
  return {spec.substr(0, colon), colon == std::string::npos ? "" : spec.substr(colon + 1)};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

Nonlinearity f_preset(const std::string& spec, double T) {
  auto [head, arg] = split(spec);
  Nonlinearity f;
  f.name = spec;
  if (head == "sin") {
    const double c = arg.empty() ? 0.5 : parse_number(arg, "f");
    f.fn = [c](double, const geometry::Point&, double r) { return c * std::sin(r); };
    f.C = f.K = std::abs(c);
  } else if (head == "zero") {
    f.fn = [](double, const geometry::Point&, double) { return 0.0; };
  } else if (head == "const") {
    const double c = arg.empty() ? 1.0 : parse_number(arg, "f");
    f.fn = [c](double, const geometry::Point&, double) { return c; };
    f.C = std::abs(c);
  } else if (head == "time") {
    f.fn = [](double s, const geometry::Point&, double) { return s; };
    f.C = T;
  } else {
    throw ValidationError("unknown f '" + spec + "' (sin:<c>, zero, const:<c>, time)");
  }
  return f;
}

InitialCondition u0_preset(const std::string& spec, const geometry::FractalModel& model, const geometry::VertexSet& vs) {
  auto [head, arg] = split(spec);
  InitialCondition u;
  u.name = spec;
  if (head == "bump") {
    geometry::Point target = geometry::Point::Zero(model.d);
    for (std::size_t r = 0; r < model.boundary_size(); ++r) target += model.boundary_point(r);
    target *= std::pow(model.alpha, vs.blowup) / static_cast<double>(model.boundary_size());
    std::size_t best = 0;
    if (arg.empty() || arg == "center") {
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < vs.size(); ++v) {
        const double d = (vs.point(v) - target).norm();
        if (d < bd - 1e-12) {
          bd = d;
          best = v;
        }
      }
    } else {
      const double id = parse_number(arg, "u0");
      if (id < 0 || id >= static_cast<double>(vs.size()) || id != std::floor(id))
        throw ValidationError("u0 bump vertex out of range");
      best = static_cast<std::size_t>(id);
    }
    const geometry::Point c = vs.point(best);
    const double w = 0.15 * std::pow(model.alpha, vs.blowup);
    u.fn = [c, w](const geometry::Point& y) { return std::exp(-(y - c).squaredNorm() / (2 * w * w)); };
  } else if (head == "const") {
    const double c = arg.empty() ? 1.0 : parse_number(arg, "u0");
    u.fn = [c](const geometry::Point&) { return c; };
  } else if (head == "zero") {
    u.fn = [](const geometry::Point&) { return 0.0; };
  } else {
    throw ValidationError("unknown u0 '" + spec + "' (bump:center, bump:<id>, const:<c>, zero)");
  }
  return u;
}

bool GateReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const GateEntry& e) { return e.pass; });
}

const GateEntry* GateReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string GateReport::failures() const {
  std::string s;
  for (const auto& e : entries) {
    if (e.pass) continue;
    // "assumption7" -> "Assumption 7 fails: ..."
    std::string label = e.name;
    if (label.rfind("assumption", 0) == 0) label = "Assumption " + label.substr(10);
    s += (s.empty() ? "" : "; ") + label + " fails: " + e.detail;
  }
  return s;
}

GateReport assumption_gate(const ProblemSpec& spec) {
  GateReport rep;
  const auto& model = spec.model;
  const geometry::VertexSet vs = geometry::vertex_set(model, spec.level, spec.blowup);
  boost::random::mt19937_64 rng(12345);
  std::vector<std::size_t> ys;
  for (std::size_t i = 0; i < 48; ++i) ys.push_back(i * vs.size() / 48);
  std::vector<double> ss;
  for (int i = 0; i <= 8; ++i) ss.push_back(spec.T * i / 8.0);

  rep.entries.push_back({"assumption1", model.assumption1_k.has_value(),
                         model.assumption1_k ? "chain constant k = " + std::to_string(*model.assumption1_k)
                                             : "chain constant unverified for this model"});

  {
    const auto u0 = u0_preset(spec.u0, model, vs);
    double sup = 0, edge = 0;
    bool finite = true;
    for (std::size_t v = 0; v < vs.size(); ++v) {
      const double x = u0.fn(vs.point(v));
      finite = finite && std::isfinite(x);
      sup = std::max(sup, std::abs(x));
    }
    for (auto b : vs.boundary) edge = std::max(edge, std::abs(u0.fn(vs.point(b))));
    rep.entries.push_back({"assumption2", finite,
                           "sup |u0| = " + fmt(sup) + ", max |u0| on the outer boundary = " + fmt(edge)});
  }

  const auto f = f_preset(spec.f, spec.T);
  {
    double worst = 0;
    for (double s : ss)
      for (auto y : ys)
        for (int k = -20; k <= 20; ++k) worst = std::max(worst, std::abs(f.fn(s, vs.point(y), 0.5 * k)));
    rep.entries.push_back({"assumption3", worst <= f.C * (1 + 1e-12) + 1e-300,
                           "max |f| = " + fmt(worst) + " against C_f = " + fmt(f.C)});
    boost::random::uniform_real_distribution<double> ur(-10, 10), us(0, spec.T);
    boost::random::uniform_int_distribution<std::size_t> uy(0, vs.size() - 1);
    double ratio = 0;
    for (int i = 0; i < 2000; ++i) {
      const double s = us(rng), r1 = ur(rng), r2 = ur(rng);
      const auto y = vs.point(uy(rng));
      if (r1 == r2) continue;
      ratio = std::max(ratio, std::abs(f.fn(s, y, r1) - f.fn(s, y, r2)) / std::abs(r1 - r2));
    }
    rep.entries.push_back({"assumption4", ratio <= f.K * (1 + 1e-9) + 1e-15,
                           "max Lipschitz ratio = " + fmt(ratio) + " against K_f = " + fmt(f.K)});
  }

  {
    auto sigma = integral::sigma_preset(spec.sigma, model, spec.blowup);
    if (sigma.name == "time" || sigma.name == "preset:time") sigma.C = spec.T;
    double worst = 0;
    for (double s : ss)
      for (auto y : ys) worst = std::max(worst, std::abs(sigma.fn(s, vs.point(y))));
    rep.entries.push_back({"assumption5", worst <= sigma.C * (1 + 1e-12) + 1e-300,
                           "max |sigma| = " + fmt(worst) + " against C_sigma = " + fmt(sigma.C)});
    boost::random::uniform_real_distribution<double> us(0, spec.T);
    boost::random::uniform_int_distribution<std::size_t> uy(0, vs.size() - 1);
    double ratio = 0;
    for (int i = 0; i < 2000; ++i) {
      const double s = us(rng);
      const auto a = vs.point(uy(rng)), b = vs.point(uy(rng));
      const double d = (a - b).norm();
      if (d == 0) continue;
      ratio = std::max(ratio, std::abs(sigma.fn(s, a) - sigma.fn(s, b)) / std::pow(d, sigma.beta));
    }
    const bool exponent_ok = sigma.beta > model.d_f / 2.0;
    const bool constant_ok = ratio <= sigma.K * (1 + 1e-9) + 1e-15;
    rep.entries.push_back({"assumption6", exponent_ok && constant_ok,
                           "beta(sigma) = " + fmt(sigma.beta) + (exponent_ok ? " > " : " <= ") + "d_f/2 = " +
                               fmt(model.d_f / 2.0) + ", max Hoelder ratio = " + fmt(ratio) + " against K_sigma = " +
                               fmt(sigma.K)});
  }

  {
    const bool ok = model.d_s < 4.0 / 3.0;
    rep.entries.push_back({"assumption7", ok,
                           "spectral dimension d_s = " + fmt(model.d_s) + (ok ? " < 4/3" : " is not below 4/3")});
  }
  rep.entries.push_back({"assumption8", spec.base.atomless(),
                         spec.base.atomless() ? "base measure " + spec.base.describe() + " is atomless"
                                              : "base measure " + spec.base.describe() + " has atoms"});
  return rep;
}

double picard_bound(double C_f, double K_f, int n, double t) {
  return 2.0 * C_f * std::pow(K_f, n) * std::exp((n + 1) * std::log(t) - std::lgamma(n + 2.0));
}

std::string SolutionField::csv() const {
  std::string out = "t,x_id,u\n";
  char buf[96];
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t x = 0; x < vertex_ids.size(); ++x) {
      int len = std::snprintf(buf, sizeof buf, "%.17g,%u,%.17g\n", times[i], vertex_ids[x],
                              u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)));
      out.append(buf, static_cast<std::size_t>(len));
    }
  return out;
}

std::string SolutionField::diagnostics_csv(double C_f, double K_f) const {
  std::string out = "n,t,g_n,bound_44\n";
  char buf[128];
  for (std::size_t n = 0; n < g.size(); ++n)
    for (std::size_t i = 0; i < times.size(); ++i) {
      int len = 0;
      if (n == 0) {
        // the bound is stated for n >= 1; g_0 includes u0 and the stochastic term
        len = std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,\n", n, times[i], g[n][i]);
      } else {
        const double b = times[i] > 0 ? picard_bound(C_f, K_f, static_cast<int>(n), times[i]) : 0.0;
        len = std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", n, times[i], g[n][i], b);
      }
      out.append(buf, static_cast<std::size_t>(len));
    }
  return out;
}

MildSolver::MildSolver(ProblemSpec spec, std::optional<measure::MeasureRealization> realization)
    : spec_(std::move(spec)) {
  if (spec_.level < 0 || spec_.blowup < 0) throw ValidationError("solver: level and blowup must be nonnegative");
  if (!(spec_.T > 0) || !std::isfinite(spec_.T)) throw ValidationError("solver: T must be positive");
  if (spec_.steps < 1) throw ValidationError("solver: need at least one time step");
  if (spec_.max_iter < 1) throw ValidationError("solver: need at least one iteration");
  if (!(spec_.stop_tol > 0)) throw ValidationError("solver: stopping tolerance must be positive");
  gate_ = assumption_gate(spec_);
  f_ = f_preset(spec_.f, spec_.T);

  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(spec_.model, spec_.level, spec_.blowup));
  const auto gen = kernel::build_generator(vs, spec_.model, spec_.boundary);
  times_.resize(static_cast<std::size_t>(spec_.steps) + 1);
  for (int i = 0; i <= spec_.steps; ++i) times_[static_cast<std::size_t>(i)] = spec_.T * i / spec_.steps;
  times_.back() = spec_.T;
  kernel_ = std::make_shared<kernel::HeatKernelTable>(
      gen, std::vector<double>(times_.begin() + 1, times_.end()), kernel::Backend::spectral);
  for (auto id : kernel_->active()) points_.push_back(vs->point(id));

  const auto u0 = u0_preset(spec_.u0, spec_.model, *vs);
  const auto V = static_cast<Eigen::Index>(kernel_->size());
  u0_.resize(V);
  for (Eigen::Index x = 0; x < V; ++x) u0_[x] = u0.fn(points_[static_cast<std::size_t>(x)]);

  auto sigma = integral::sigma_preset(spec_.sigma, spec_.model, spec_.blowup);
  hf_ = std::make_unique<integral::HFunction>(kernel_, spec_.model, sigma, spec_.T, spec_.quad, !spec_.override_gate);
  if (realization) {
    real_ = std::move(realization);
  } else {
    real_ = measure::MeasureRealization::realize(spec_.base, spec_.model, spec_.blowup, spec_.depth);
  }
  if (spec_.depth > real_->max_depth()) throw ValidationError("solver: realization shallower than the requested depth");

  const auto J = static_cast<Eigen::Index>(times_.size());
  det_.resize(J, V);
  det_.row(0) = u0_.transpose();
  for (Eigen::Index i = 1; i < J; ++i) det_.row(i) = deterministic_term(times_[static_cast<std::size_t>(i)]).transpose();

  stoch_ = Eigen::MatrixXd::Zero(J, V);
  const auto ev = integral::eval_eta(*hf_, *real_, std::vector<double>(times_.begin() + 1, times_.end()), spec_.depth);
  stoch_.bottomRows(J - 1) = ev.eta();

  // product integration weights W0(k, q) = Delta int_0^1 e^{lambda Delta (1 - th)} l_q(th) dth
  theta_ = quad::gauss_legendre(spec_.product_order);
  const double dt = spec_.T / spec_.steps;
  const auto& lam = kernel_->eigenvalues();
  const auto fine = quad::graded_rule(1.0, 1.0 / (kernel_->spectral_bound() * dt), 12, 2.0);
  const auto P = static_cast<Eigen::Index>(theta_.size());
  Eigen::MatrixXd Lq(static_cast<Eigen::Index>(fine.size()), P);
  for (std::size_t j = 0; j < fine.size(); ++j) {
    const auto l = quad::lagrange_basis(theta_.nodes, fine.nodes[j]);
    for (Eigen::Index q = 0; q < P; ++q) Lq(static_cast<Eigen::Index>(j), q) = fine.weights[j] * l[static_cast<std::size_t>(q)];
  }
  Eigen::MatrixXd Ek(lam.size(), static_cast<Eigen::Index>(fine.size()));
  for (Eigen::Index k = 0; k < lam.size(); ++k)
    for (std::size_t j = 0; j < fine.size(); ++j)
      Ek(k, static_cast<Eigen::Index>(j)) = std::exp(lam[k] * dt * (1.0 - fine.nodes[j]));
  W0_ = dt * (Ek * Lq);
  step_decay_ = (lam * dt).array().exp().matrix();
}

Eigen::VectorXd MildSolver::deterministic_term(double t) const {
  if (t < 0 || t > spec_.T * (1 + 1e-12)) throw ValidationError("deterministic_term: time outside [0, T]");
  if (t == 0) return u0_;
  return kernel_->apply(t, u0_);
}

Eigen::MatrixXd MildSolver::nonlinear_term(const Eigen::MatrixXd& u) const {
  const auto J = static_cast<Eigen::Index>(times_.size());
  const auto V = static_cast<Eigen::Index>(size());
  if (u.rows() != J || u.cols() != V) throw ValidationError("nonlinear_term: field has wrong shape");
  const auto& phi = kernel_->eigenfunctions();
  const auto& m = kernel_->weights();
  const auto P = static_cast<Eigen::Index>(theta_.size());
  const double dt = spec_.T / spec_.steps;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(J, V);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(phi.cols());
  Eigen::MatrixXd F(V, P);
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    for (Eigen::Index q = 0; q < P; ++q) {
      const double th = theta_.nodes[static_cast<std::size_t>(q)];
      const double s = times_[static_cast<std::size_t>(j)] + dt * th;
      for (Eigen::Index y = 0; y < V; ++y) {
        const double uy = (1 - th) * u(j, y) + th * u(j + 1, y);
        F(y, q) = m[y] * f_.fn(s, points_[static_cast<std::size_t>(y)], uy);
      }
    }
    const Eigen::MatrixXd C = phi.transpose() * F;
    a = step_decay_.cwiseProduct(a) + W0_.cwiseProduct(C).rowwise().sum();
    out.row(j + 1) = (phi * a).transpose();
  }
  return out;
}

Eigen::VectorXd MildSolver::nonlinear_reference(const Eigen::MatrixXd& u, double t) const {
  const auto V = static_cast<Eigen::Index>(size());
  if (t < 0 || t > spec_.T * (1 + 1e-12)) throw ValidationError("nonlinear_reference: time outside [0, T]");
  if (t == 0) return Eigen::VectorXd::Zero(V);
  const auto& phi = kernel_->eigenfunctions();
  const auto& lam = kernel_->eigenvalues();
  const auto& m = kernel_->weights();
  const double dt = spec_.T / spec_.steps;
  const auto plain = quad::gauss_legendre(16);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(lam.size());
  Eigen::VectorXd F(V);
  for (std::size_t j = 0; j + 1 < times_.size() && times_[j] < t; ++j) {
    const double a = times_[j], b = std::min(times_[j + 1], t);
    if (b <= a) continue;
    const bool last = b >= t;
    const quad::Rule r = last ? quad::graded_rule(b - a, 1.0 / kernel_->spectral_bound(), 20, 2.0) : plain;
    const double scale = last ? 1.0 : (b - a);
    for (std::size_t q = 0; q < r.size(); ++q) {
      const double s = a + (last ? r.nodes[q] : (b - a) * r.nodes[q]);
      const double th = (s - times_[j]) / dt;
      for (Eigen::Index y = 0; y < V; ++y) {
        const double uy = (1 - th) * u(static_cast<Eigen::Index>(j), y) + th * u(static_cast<Eigen::Index>(j) + 1, y);
        F[y] = m[y] * f_.fn(s, points_[static_cast<std::size_t>(y)], uy);
      }
      const Eigen::VectorXd c = phi.transpose() * F;
      acc += (scale * r.weights[q]) * (lam * (t - s)).array().exp().matrix().cwiseProduct(c);
    }
  }
  return phi * acc;
}

Eigen::MatrixXd MildSolver::step(const Eigen::MatrixXd& u) const { return det_ + nonlinear_term(u) + stoch_; }

SolutionField MildSolver::picard(const Eigen::MatrixXd& start) const {
  SolutionField sol;
  sol.times = times_;
  sol.vertex_ids = kernel_->active();
  sol.stochastic = stoch_;
  Eigen::MatrixXd u = start;
  for (int n = 0; n < spec_.max_iter; ++n) {
    Eigen::MatrixXd next = step(u);
    std::vector<double> g(times_.size());
    double sup = 0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      g[i] = (next.row(static_cast<Eigen::Index>(i)) - u.row(static_cast<Eigen::Index>(i))).lpNorm<Eigen::Infinity>();
      sup = std::max(sup, g[i]);
    }
    if (!next.allFinite()) throw ComputationError("picard: iterate is not finite");
    sol.g.push_back(std::move(g));
    u.swap(next);
    sol.iterations = n + 1;
    if (sup < spec_.stop_tol) {
      sol.converged = true;
      break;
    }
  }
  sol.u = std::move(u);
  return sol;
}

SolutionField MildSolver::picard_solve() const {
  if (!gate_.all_pass()) {
    if (!spec_.override_gate) throw ValidationError("assumption gate failed: " + gate_.failures());
  }
  SolutionField sol = picard(Eigen::MatrixXd::Zero(det_.rows(), det_.cols()));
  return sol;
}

double MildSolver::residual(const Eigen::MatrixXd& u) const {
  double worst = (det_.row(0) - u.row(0)).lpNorm<Eigen::Infinity>();
  for (std::size_t i = 1; i < times_.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd r = det_.row(ii).transpose() + nonlinear_reference(u, times_[i]) +
                              stoch_.row(ii).transpose() - u.row(ii).transpose();
    worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double uniqueness_check(const MildSolver& solver, double offset) {
  const SolutionField a = solver.picard_solve();
  const Eigen::MatrixXd start = solver.deterministic().array() + offset;
  const SolutionField b = solver.picard(start);
  if (!a.converged || !b.converged) throw ComputationError("uniqueness_check: a Picard run did not converge");
  return (a.u - b.u).lpNorm<Eigen::Infinity>();
}

}  // namespace nfheat::spde
