#include <algorithm>
#include <cmath>
#include <limits>

#include "nfheat/error.hpp"
#include "nfheat/heat_kernel.hpp"

namespace nfheat::kernel {

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) throw ComputationError("linear_fit: need two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw ComputationError("linear_fit: degenerate abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

namespace {

std::vector<std::size_t> interior_indices(const HeatKernelTable& table) {
  std::vector<char> outer(table.vertices().size(), 0);
  for (auto b : table.vertices().boundary) outer[b] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < table.size(); ++i)
    if (!outer[table.active()[i]]) out.push_back(i);
  return out;
}

std::vector<std::size_t> spread_sample(const std::vector<std::size_t>& from, std::size_t count) {
  if (from.size() <= count) return from;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(from[i * from.size() / count]);
  return out;
}

}  // namespace

SpectralDimensionEstimate estimate_spectral_dimension(const HeatKernelTable& table) {
  SpectralDimensionEstimate est;
  const double lo = 1.0 / table.rate(), hi = 1.0;
  for (double t : table.times())
    if (t >= lo * (1 - 1e-12) && t <= hi) est.t.push_back(t);
  if (est.t.size() < 2 || std::log10(est.t.back() / est.t.front()) < 0.5)
    throw ValidationError("estimate_spectral_dimension: time window narrower than half a decade");
  est.t_min = est.t.front();
  est.t_max = est.t.back();
  est.narrow_window = std::log10(est.t_max / est.t_min) < 1.0;
  auto interior = interior_indices(table);
  if (!table.spectral()) interior = spread_sample(interior, 64);
  if (interior.empty()) throw ValidationError("estimate_spectral_dimension: no interior vertices");
  est.vertices_used = interior.size();
  std::vector<double> lt;
  for (double t : est.t) {
    double acc = 0.0;
    if (table.spectral()) {
      Eigen::VectorXd d = table.diagonal(t);
      for (auto i : interior) acc += std::log(d[static_cast<Eigen::Index>(i)]);
    } else {
      for (auto i : interior) acc += std::log(table.density_column(t, i)[static_cast<Eigen::Index>(i)]);
    }
    est.mean_log_diagonal.push_back(acc / static_cast<double>(interior.size()));
    lt.push_back(std::log(t));
  }
  est.slope = linear_fit(lt, est.mean_log_diagonal).first;
  est.d_s = -2.0 * est.slope;
  return est;
}

HolderEstimate verify_holder(const HeatKernelTable& table, const geometry::FractalModel& model) {
  if (table.times().size() < 2) throw ValidationError("verify_holder: need at least two times");
  if (table.level() < 2) throw ValidationError("verify_holder: need kernel level >= 2");
  const auto scales = geometry::adjacent_pairs_by_scale(model, table.vertices());
  const double gamma = model.d_w - model.d_f;
  const auto [wlo, whi] = scaling_window(model, table.level());
  HolderEstimate est;
  std::vector<std::vector<double>> X, Y;
  double peak = 0.0, peak_inc = 0.0;
  for (double t : table.times()) {
    if (t < wlo * (1 - 1e-12) || t > whi) continue;
    std::vector<int> eligible;
    for (const auto& sp : scales)
      if (!sp.pairs.empty() && resolved_scale(model, sp.mean_distance, t)) eligible.push_back(sp.level);
    if (eligible.size() < 2) continue;
    const Eigen::MatrixXd P = table.density(t);
    peak = std::max(peak, P.maxCoeff());
    std::vector<double> xs, ys;
    double c1 = 0.0;
    for (const auto& sp : scales) {
      double maxinc = 0.0;
      for (std::size_t k = 0; k < sp.pairs.size(); ++k) {
        auto a = table.index_of()[sp.pairs[k].first], b = table.index_of()[sp.pairs[k].second];
        if (a < 0 || b < 0) continue;
        const double inc = (P.col(a) - P.col(b)).lpNorm<Eigen::Infinity>();
        maxinc = std::max(maxinc, inc);
        c1 = std::max(c1, t * inc / std::pow(sp.distances[k], gamma));
      }
      peak_inc = std::max(peak_inc, maxinc);
      if (std::find(eligible.begin(), eligible.end(), sp.level) != eligible.end() && maxinc > 0.0) {
        xs.push_back(std::log(sp.mean_distance));
        ys.push_back(std::log(maxinc));
      }
    }
    if (xs.size() < 2) continue;
    est.times_used.push_back(t);
    est.per_time_exponent.push_back(linear_fit(xs, ys).first);
    est.per_time_c1.push_back(c1);
    X.push_back(xs);
    Y.push_back(ys);
  }
  if (est.times_used.empty())
    throw ValidationError("verify_holder: no table time resolves two scales inside the scaling window");
  if (peak_inc <= 1e-12 * peak) throw ComputationError("verify_holder: all increments below floating noise");
  // pooled slope with a separate intercept per time
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double mx = 0, my = 0;
    for (std::size_t j = 0; j < X[i].size(); ++j) {
      mx += X[i][j];
      my += Y[i][j];
    }
    mx /= static_cast<double>(X[i].size());
    my /= static_cast<double>(X[i].size());
    for (std::size_t j = 0; j < X[i].size(); ++j) {
      sxx += (X[i][j] - mx) * (X[i][j] - mx);
      sxy += (X[i][j] - mx) * (Y[i][j] - my);
      ++est.points;
    }
  }
  est.exponent = sxy / sxx;
  est.c1 = *std::max_element(est.per_time_c1.begin(), est.per_time_c1.end());
  est.c1_min = *std::min_element(est.per_time_c1.begin(), est.per_time_c1.end());
  return est;
}

KernelBoundFit fit_subgaussian(const HeatKernelTable& table, const geometry::FractalModel& model, double floor) {
  const auto [wlo, whi] = scaling_window(model, table.level());
  std::vector<double> U, Y;
  KernelBoundFit fit;
  fit.t_min = std::numeric_limits<double>::infinity();
  fit.r_min = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> all(table.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto xs = spread_sample(all, 24);
  for (double t : table.times()) {
    if (t < wlo * (1 - 1e-12) || t > whi) continue;
    for (auto x : xs) {
      Eigen::VectorXd col = table.density_column(t, x);
      const auto px = table.vertices().point(table.active()[x]);
      for (std::size_t y = 0; y < table.size(); ++y) {
        const double p = col[static_cast<Eigen::Index>(y)];
        if (!(p * table.weights()[static_cast<Eigen::Index>(y)] > floor)) continue;
        const double r = (table.vertices().point(table.active()[y]) - px).norm();
        U.push_back(std::pow(r, model.d_w) / t);
        Y.push_back(std::log(p * std::pow(t, model.d_s / 2.0)));
        fit.t_min = std::min(fit.t_min, t);
        fit.t_max = std::max(fit.t_max, t);
        if (r > 0) fit.r_min = std::min(fit.r_min, r);
        fit.r_max = std::max(fit.r_max, r);
      }
    }
  }
  if (U.size() < 3) throw ValidationError("fit_subgaussian: not enough tail data in the scaling window");
  fit.points = U.size();

  // For fixed q the model Y = A - c3 U^q is linear; search q = 1/(d_J - 1) in log space.
  struct Inner {
    double sse, A, c3;
  };
  auto solve = [&](double q) {
    double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < U.size(); ++i) {
      const double x = -std::pow(U[i], q);
      s1 += 1;
      sx += x;
      sxx += x * x;
      sy += Y[i];
      sxy += x * Y[i];
    }
    const double det = s1 * sxx - sx * sx;
    Inner in{std::numeric_limits<double>::infinity(), 0, 0};
    if (det <= 0) return in;
    in.c3 = (s1 * sxy - sx * sy) / det;
    in.A = (sy - in.c3 * sx) / s1;
    in.sse = 0;
    for (std::size_t i = 0; i < U.size(); ++i) {
      const double r = Y[i] - (in.A - in.c3 * std::pow(U[i], q));
      in.sse += r * r;
    }
    return in;
  };
  const double lq_lo = std::log(0.05), lq_hi = std::log(20.0);
  const int grid = 48;
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double s = solve(std::exp(lq_lo + (lq_hi - lq_lo) * i / grid)).sse;
    if (s < best_sse) {
      best_sse = s;
      best = i;
    }
  }
  const double step = (lq_hi - lq_lo) / grid;
  double a = lq_lo + step * std::max(best - 1, 0), b = lq_lo + step * std::min(best + 1, grid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = solve(std::exp(c)).sse, fd = solve(std::exp(d)).sse;
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = solve(std::exp(c)).sse;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = solve(std::exp(d)).sse;
    }
  }
  const double q = std::exp(0.5 * (a + b));
  const Inner in = solve(q);
  fit.c2 = std::exp(in.A);
  fit.c3 = in.c3;
  fit.d_J = 1.0 + 1.0 / q;
  fit.converged = best > 0 && best < grid && in.c3 > 0.0 && std::isfinite(in.sse);
  double maxr = 0, ss = 0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double r = Y[i] - (in.A - in.c3 * std::pow(U[i], q));
    maxr = std::max(maxr, r);
    ss += r * r;
  }
  fit.max_residual = maxr;
  fit.rms_residual = std::sqrt(ss / static_cast<double>(U.size()));
  std::size_t below = 0;
  for (std::size_t i = 0; i < U.size(); ++i)
    if (Y[i] <= in.A + maxr - in.c3 * std::pow(U[i], q) + 1e-12) ++below;
  fit.fraction_below_envelope = static_cast<double>(below) / static_cast<double>(U.size());
  return fit;
}

}  // namespace nfheat::kernel
