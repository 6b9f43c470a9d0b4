#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfheat/heat_kernel.hpp"
#include "nfheat/parameter_integral.hpp"
#include "nfheat/stochastic_measure.hpp"

namespace nfheat::spde {

struct Nonlinearity {
  std::string name;
  std::function<double(double, const geometry::Point&, double)> fn;
  double C = 0.0;  // sup |f|
  double K = 0.0;  // Lipschitz constant in r
};
/// sin:<c> | zero | const:<c> | time (f = s, bounded by the horizon T)
Nonlinearity f_preset(const std::string& spec, double T);

struct InitialCondition {
  std::string name;
  std::function<double(const geometry::Point&)> fn;
};
/// bump:center | bump:<vertex id> | const:<c> | zero. The bump is a Gaussian of width 0.15 alpha^M.
InitialCondition u0_preset(const std::string& spec, const geometry::FractalModel& model, const geometry::VertexSet& vs);

struct ProblemSpec {
  geometry::FractalModel model;
  int level = 3;
  int blowup = 0;
  kernel::Boundary boundary = kernel::Boundary::reflecting;
  double T = 1.0;
  int steps = 64;
  std::string u0 = "bump:center";
  std::string f = "sin:0.5";
  std::string sigma = "smooth";
  measure::BaseSM base;
  int depth = 5;
  double stop_tol = 1e-8;
  int max_iter = 25;
  int product_order = 8;
  integral::QuadratureSpec quad;
  bool override_gate = false;
};

struct GateEntry {
  std::string name;
  bool pass = false;
  std::string detail;
};
struct GateReport {
  std::vector<GateEntry> entries;
  bool all_pass() const;
  const GateEntry* find(const std::string& name) const;
  std::string failures() const;
};
GateReport assumption_gate(const ProblemSpec& spec);

struct SolutionField {
  std::vector<double> times;
  std::vector<std::uint32_t> vertex_ids;
  Eigen::MatrixXd u;                   // (steps + 1) x V
  std::vector<std::vector<double>> g;  // g[n][i] = sup_x |u^(n+1) - u^(n)|(t_i)
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd stochastic;

  std::string csv() const;
  std::string diagnostics_csv(double C_f, double K_f) const;
};

/// Bound 2 C_f K_f^n t^{n+1} / (n+1)!
double picard_bound(double C_f, double K_f, int n, double t);

/// A prepared problem: kernel, h-function, measure and the frozen stochastic term.
class MildSolver {
 public:
  explicit MildSolver(ProblemSpec spec, std::optional<measure::MeasureRealization> realization = std::nullopt);

  const ProblemSpec& spec() const { return spec_; }
  const std::vector<double>& times() const { return times_; }
  const kernel::HeatKernelTable& kernel() const { return *kernel_; }
  std::shared_ptr<const kernel::HeatKernelTable> kernel_ptr() const { return kernel_; }
  const Nonlinearity& f() const { return f_; }
  const measure::MeasureRealization& realization() const { return *real_; }
  const GateReport& gate() const { return gate_; }
  std::size_t size() const { return kernel_->size(); }

  /// sum_y p(t,x,y) u0(y) m(y) at any t (t = 0 gives u0).
  Eigen::VectorXd deterministic_term(double t) const;
  const Eigen::MatrixXd& deterministic() const { return det_; }
  const Eigen::MatrixXd& stochastic() const { return stoch_; }
  /// Nonlinear term on the grid by product integration (the iteration operator).
  Eigen::MatrixXd nonlinear_term(const Eigen::MatrixXd& u) const;
  /// Same term at any t in [0, T] by direct composite quadrature, independent of the grid operator.
  Eigen::VectorXd nonlinear_reference(const Eigen::MatrixXd& u, double t) const;
  /// Iteration map D + N[u] + S.
  Eigen::MatrixXd step(const Eigen::MatrixXd& u) const;

  SolutionField picard(const Eigen::MatrixXd& start) const;
  /// Starts from zero; refuses when the gate fails without override.
  SolutionField picard_solve() const;
  /// max over the grid of |D + N_ref[u] + S - u|
  double residual(const Eigen::MatrixXd& u) const;

 private:
  ProblemSpec spec_;
  GateReport gate_;
  Nonlinearity f_;
  std::shared_ptr<const kernel::HeatKernelTable> kernel_;
  std::unique_ptr<integral::HFunction> hf_;
  std::optional<measure::MeasureRealization> real_;
  std::vector<double> times_;
  Eigen::VectorXd u0_;
  Eigen::MatrixXd det_, stoch_;
  std::vector<geometry::Point> points_;
  quad::Rule theta_;            // product-integration nodes on [0, 1]
  Eigen::MatrixXd W0_;          // K x p
  Eigen::VectorXd step_decay_;  // e^{lambda Delta}
};

/// sup |u - v| between the fixed points from zero and from deterministic_term + offset.
double uniqueness_check(const MildSolver& solver, double offset = 1.0);

}  // namespace nfheat::spde
