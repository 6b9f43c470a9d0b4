#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nfheat/geometry.hpp"

namespace nfheat::kernel {

enum class Boundary { reflecting, dirichlet };
Boundary parse_boundary(const std::string& s);
std::string to_string(Boundary b);

/// Continuous-time simple random walk on the cell-sharing graph of F^(n), sped up by
/// time_scale^n. Indices are positions in `active` (all vertices for reflecting walls).
struct GeneratorMatrix {
  int level = 0;
  double rate = 0.0;
  Boundary boundary = Boundary::reflecting;
  std::shared_ptr<const geometry::VertexSet> vertices;
  std::vector<std::uint32_t> active;
  std::vector<std::int64_t> index_of;  // vertex id -> active index, -1 if removed
  Eigen::VectorXd weights;             // m_n on active vertices
  Eigen::SparseMatrix<double, Eigen::RowMajor> L;
  bool approximate_conductances = false;

  std::size_t size() const { return active.size(); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(L); }
};

GeneratorMatrix build_generator(std::shared_ptr<const geometry::VertexSet> vs,
                                const geometry::FractalModel& model, Boundary boundary);

enum class Backend { automatic, spectral, chebyshev };
inline constexpr std::size_t kSpectralLimit = 4000;

/// Transition densities p_n(t, x, y) = P(t)[x][y] / m_n(y) of the walk. The spectral backend
/// evaluates exactly at any t > 0; the grid is what exports and fits iterate over.
class HeatKernelTable {
 public:
  HeatKernelTable(const GeneratorMatrix& gen, std::vector<double> times, Backend backend = Backend::automatic);

  int level() const { return level_; }
  int blowup() const { return vertices_->blowup; }
  Boundary boundary() const { return boundary_; }
  double rate() const { return rate_; }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  const std::vector<double>& times() const { return times_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const geometry::VertexSet& vertices() const { return *vertices_; }
  std::shared_ptr<const geometry::VertexSet> vertex_ptr() const { return vertices_; }
  const std::vector<std::uint32_t>& active() const { return active_; }
  const std::vector<std::int64_t>& index_of() const { return index_of_; }
  bool spectral() const { return spectral_; }

  /// Eigenpairs of the walk: L phi_k = lambda_k phi_k, sum_x m(x) phi_j(x) phi_k(x) = delta_jk.
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& eigenfunctions() const { return phi_; }
  /// Upper bound on |lambda| (Gershgorin).
  double spectral_bound() const { return 2.0 * rate_; }

  double density(double t, std::size_t x, std::size_t y) const;
  Eigen::MatrixXd density(double t) const;
  Eigen::VectorXd density_column(double t, std::size_t y) const;
  Eigen::VectorXd diagonal(double t) const;
  Eigen::MatrixXd probability(double t) const;
  /// (P(t) f)(x) = sum_y p(t,x,y) f(y) m(y)
  Eigen::MatrixXd apply(double t, const Eigen::MatrixXd& f) const;

  /// Largest magnitude of a negative density clipped to zero so far.
  double max_clip() const { return max_clip_.load(); }

 private:
  Eigen::MatrixXd expm_times(double t, const Eigen::MatrixXd& v) const;  // exp(tS) v
  void record_clip(double value) const;
  void clip(Eigen::MatrixXd& m) const;
  void check_time(double t) const;

  int level_ = 0;
  Boundary boundary_ = Boundary::reflecting;
  double rate_ = 0.0;
  std::shared_ptr<const geometry::VertexSet> vertices_;
  std::vector<std::uint32_t> active_;
  std::vector<std::int64_t> index_of_;
  std::vector<double> times_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd sqrt_w_;
  bool spectral_ = true;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd phi_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> S_;  // D^{1/2} L D^{-1/2}, Chebyshev backend
  mutable std::atomic<double> max_clip_{0.0};
};

/// Scaled modified Bessel values e^{-z} I_k(z), k = 0..kmax.
std::vector<double> scaled_bessel_i(double z, int kmax);

std::vector<double> log_grid(double a, double b, std::size_t count);
/// [10 time_scale^{-n}, 0.5]
std::pair<double, double> scaling_window(const geometry::FractalModel& model, int level);
/// A pair scale enters Hoelder fits at time t when it sits a factor alpha^2 below the diffusion
/// length diam * t^{1/d_w}.
bool resolved_scale(const geometry::FractalModel& model, double mean_distance, double t);

std::string kernel_csv(const HeatKernelTable& table);
std::string kernel_binary(const HeatKernelTable& table);

// ---- estimates of the kernel bounds ----

struct SpectralDimensionEstimate {
  double d_s = 0.0;
  double slope = 0.0;
  double t_min = 0.0, t_max = 0.0;
  std::size_t vertices_used = 0;
  bool narrow_window = false;  // less than a decade
  std::vector<double> t, mean_log_diagonal;
};
SpectralDimensionEstimate estimate_spectral_dimension(const HeatKernelTable& table);

struct HolderEstimate {
  double exponent = 0.0;
  double c1 = 0.0;
  double c1_min = 0.0;  // smallest per-time c1 over the times used
  std::vector<double> times_used;
  std::vector<double> per_time_exponent;
  std::vector<double> per_time_c1;
  std::size_t points = 0;
};
HolderEstimate verify_holder(const HeatKernelTable& table, const geometry::FractalModel& model);

struct KernelBoundFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double d_J = 0.0;
  double rms_residual = 0.0;
  double max_residual = 0.0;
  double fraction_below_envelope = 0.0;
  bool converged = false;
  double t_min = 0.0, t_max = 0.0, r_min = 0.0, r_max = 0.0;
  std::size_t points = 0;
};
KernelBoundFit fit_subgaussian(const HeatKernelTable& table, const geometry::FractalModel& model,
                               double floor = 1e-13);

/// Least-squares slope and intercept.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nfheat::kernel
