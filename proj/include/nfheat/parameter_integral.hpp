#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nfheat/heat_kernel.hpp"
#include "nfheat/quadrature.hpp"
#include "nfheat/stochastic_measure.hpp"

namespace nfheat::integral {

/// sigma(s, y) with |sigma| <= C, |sigma(s,y1) - sigma(s,y2)| <= K |y1 - y2|^beta.
struct Sigma {
  std::string name;
  std::function<double(double, const geometry::Point&)> fn;
  double C = 0.0;
  double K = 0.0;
  double beta = 1.0;
};

/// smooth | preset:smooth | zero | const:<c> | holder:<b> | time (sigma = s)
Sigma sigma_preset(const std::string& spec, const geometry::FractalModel& model, int blowup);

struct QuadratureSpec {
  int order = 12;
  int check_order = 20;
  double ratio = 2.0;
  double tol = 1e-8;
};

/// h(t, x, y) = int_0^t p(t - s, x, y) sigma(s, y) ds on the kernel's vertex set.
class HFunction {
 public:
  HFunction(std::shared_ptr<const kernel::HeatKernelTable> kernel, const geometry::FractalModel& model, Sigma sigma,
            double T, QuadratureSpec quad = {}, bool enforce_assumption6 = true);

  const kernel::HeatKernelTable& kernel() const { return *kernel_; }
  std::shared_ptr<const kernel::HeatKernelTable> kernel_ptr() const { return kernel_; }
  const Sigma& sigma() const { return sigma_; }
  const geometry::FractalModel& model() const { return model_; }
  double horizon() const { return T_; }
  const QuadratureSpec& quadrature() const { return quad_; }

  /// Pointwise value; two nested rules must agree to the absolute tolerance.
  double eval(double t, std::size_t x, std::size_t y) const;
  /// h(t, x, .) for all y.
  Eigen::VectorXd row(double t, std::size_t x) const;
  /// out(x, j) = sum_y h(t, x, y) W(y, j)
  Eigen::MatrixXd apply(double t, const Eigen::MatrixXd& W) const;
  /// Graded rule on (0, t) shared by the batch paths.
  quad::Rule rule(double t) const;

 private:
  Eigen::MatrixXd coefficient_block(double t) const;  // C(y, k) = phi(y,k) sum_q w_q e^{lambda_k (t - s_q)} sigma(s_q, y)
  void check_time(double t) const;

  std::shared_ptr<const kernel::HeatKernelTable> kernel_;
  geometry::FractalModel model_;
  Sigma sigma_;
  double T_;
  QuadratureSpec quad_;
  std::vector<geometry::Point> points_;  // coordinates of active vertices
};

/// Harmonic extension matrices A_i: values at psi_i(F^(0)) from values on F^(0), for the
/// cell-sharing network with unit conductances.
std::vector<Eigen::MatrixXd> harmonic_extension(const geometry::FractalModel& model);

/// G_n: (cells at local depth n) x (active kernel vertices); (G_n f)[cell] is f at the cell's anchor,
/// extended harmonically inside kernel cells when n exceeds the kernel level. Rows follow the
/// order of MeasureRealization::level_masses.
Eigen::SparseMatrix<double, Eigen::RowMajor> anchor_operator(const kernel::HeatKernelTable& kernel,
                                                             const geometry::FractalModel& model, int n,
                                                             measure::AnchorRule rule);

struct EtaEvaluation {
  std::vector<double> times;
  std::vector<std::uint32_t> vertex_ids;
  std::vector<Eigen::MatrixXd> partial;  // partial[n](i, x) = S^(n)(t_i, x)
  std::vector<double> sup_increment;     // sup_z |S^(n+1) - S^(n)|, n = 0..n_max-1

  const Eigen::MatrixXd& eta() const { return partial.back(); }
  /// Median of successive increment ratios over the last three levels.
  double median_ratio_last3() const;
  std::string csv() const;
  std::string convergence_csv() const;
};

EtaEvaluation eval_eta(const HFunction& hf, const measure::MeasureRealization& real, const std::vector<double>& times,
                       int n_max, measure::AnchorRule rule = measure::AnchorRule::first_fixed_point);

/// Default z-grid times: 8 log-spaced times in the scaling window, capped at T.
std::vector<double> default_eta_times(const geometry::FractalModel& model, int level, double T);

struct HolderFit {
  double exponent = 0.0;
  std::vector<int> levels;
  std::vector<double> distances, increments;
};
HolderFit estimate_h_holder(const HFunction& hf, double t, std::size_t x);

struct ModulusBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  double modulus = 0.0;
};
struct RegularityReport {
  std::vector<ModulusBin> bins;
  bool finite = true;
  bool decreasing = false;  // finest nonempty bin below the coarsest
};
RegularityReport path_regularity_report(const EtaEvaluation& eval, const geometry::VertexSet& vs,
                                        std::size_t bins = 8, std::size_t max_points = 2000);

struct IncrementBound {
  double K_h = 0.0;
  std::vector<double> lhs, rhs;  // for m = 0..n_max-2
  bool holds = false;
};
/// Tail sums of sup increments against the Cauchy-Schwarz bound with an empirical K_h.
IncrementBound increment_bound_check(const HFunction& hf, const measure::MeasureRealization& real,
                                     const std::vector<double>& times, int n_max, double beta_h);

}  // namespace nfheat::integral
