#include "nfheat/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <lapacke.h>

#include "nfheat/error.hpp"

namespace nfheat::kernel {

Boundary parse_boundary(const std::string& s) {
  if (s == "reflecting") return Boundary::reflecting;
  if (s == "dirichlet") return Boundary::dirichlet;
  throw ValidationError("unknown boundary '" + s + "' (expected reflecting or dirichlet)");
}

std::string to_string(Boundary b) { return b == Boundary::reflecting ? "reflecting" : "dirichlet"; }

GeneratorMatrix build_generator(std::shared_ptr<const geometry::VertexSet> vs,
                                const geometry::FractalModel& model, Boundary boundary) {
  if (!vs) throw ValidationError("build_generator: no vertex set");
  if (!vs->connected()) throw ValidationError("build_generator: adjacency graph is disconnected");
  GeneratorMatrix g;
  g.level = vs->level;
  g.rate = std::pow(model.time_scale, vs->level);
  g.boundary = boundary;
  g.approximate_conductances = !model.preset;
  const std::size_t V = vs->size();
  g.index_of.assign(V, -1);
  std::vector<char> removed(V, 0);
  if (boundary == Boundary::dirichlet)
    for (auto b : vs->boundary) removed[b] = 1;
  for (std::size_t v = 0; v < V; ++v) {
    if (removed[v]) continue;
    g.index_of[v] = static_cast<std::int64_t>(g.active.size());
    g.active.push_back(static_cast<std::uint32_t>(v));
  }
  if (g.active.empty()) throw ValidationError("build_generator: no vertices remain");
  Eigen::VectorXd all_w = geometry::measure_weights(*vs, model);
  g.weights.resize(static_cast<Eigen::Index>(g.active.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < g.active.size(); ++i) {
    const auto u = g.active[i];
    g.weights[static_cast<Eigen::Index>(i)] = all_w[u];
    double deg = 0.0;
    for (auto e = vs->adj_offsets[u]; e < vs->adj_offsets[u + 1]; ++e) deg += vs->adj_weights[e];
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -g.rate);
    for (auto e = vs->adj_offsets[u]; e < vs->adj_offsets[u + 1]; ++e) {
      auto j = g.index_of[vs->adj_targets[e]];
      if (j < 0) continue;
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), g.rate * vs->adj_weights[e] / deg);
    }
  }
  const auto n = static_cast<Eigen::Index>(g.active.size());
  g.L.resize(n, n);
  g.L.setFromTriplets(trip.begin(), trip.end());
  g.vertices = std::move(vs);
  return g;
}

std::vector<double> scaled_bessel_i(double z, int kmax) {
  std::vector<double> out(static_cast<std::size_t>(kmax) + 1, 0.0);
  if (z == 0.0) {
    out[0] = 1.0;
    return out;
  }
  // Miller backward recurrence I_{k-1} = (2k/z) I_k + I_{k+1}, normalized by
  // I_0 + 2 sum_k I_k = e^z.
  const int start = kmax + 40 + static_cast<int>(std::sqrt(z));
  std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
  v[static_cast<std::size_t>(start)] = 1e-300;
  for (int k = start; k >= 1; --k) {
    v[static_cast<std::size_t>(k) - 1] = (2.0 * k / z) * v[static_cast<std::size_t>(k)] + v[static_cast<std::size_t>(k) + 1];
    if (v[static_cast<std::size_t>(k) - 1] > 1e250) {
      for (int j = k - 1; j <= start + 1; ++j) v[static_cast<std::size_t>(j)] *= 1e-250;
    }
  }
  double norm = v[0];
  for (int k = 1; k <= start; ++k) norm += 2.0 * v[static_cast<std::size_t>(k)];
  for (int k = 0; k <= kmax; ++k) out[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] / norm;
  return out;
}

HeatKernelTable::HeatKernelTable(const GeneratorMatrix& gen, std::vector<double> times, Backend backend)
    : level_(gen.level),
      boundary_(gen.boundary),
      rate_(gen.rate),
      vertices_(gen.vertices),
      active_(gen.active),
      index_of_(gen.index_of),
      times_(std::move(times)),
      weights_(gen.weights) {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(times_[i] > 0.0) || !std::isfinite(times_[i])) throw ValidationError("kernel: times must be positive");
    if (i > 0 && !(times_[i] > times_[i - 1])) throw ValidationError("kernel: times must be sorted increasing");
  }
  const auto n = static_cast<Eigen::Index>(gen.size());
  sqrt_w_ = weights_.cwiseSqrt();
  spectral_ = backend == Backend::spectral ||
              (backend == Backend::automatic && gen.size() <= kSpectralLimit);

  // S = D^{1/2} L D^{-1/2}; entries m_x L_xy / sqrt(m_x m_y), symmetrized against roundoff
  Eigen::SparseMatrix<double, Eigen::RowMajor> S = gen.L;
  for (Eigen::Index r = 0; r < S.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(S, r); it; ++it)
      it.valueRef() *= sqrt_w_[it.row()] / sqrt_w_[it.col()];
  Eigen::SparseMatrix<double, Eigen::RowMajor> St = S.transpose();
  S = (0.5 * (S + St)).eval();

  if (!spectral_) {
    S_ = std::move(S);
    return;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd(S);
  lambda_.resize(n);
  int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), A.data(),
                            static_cast<lapack_int>(n), lambda_.data());
  if (info != 0) throw ComputationError("kernel: eigendecomposition failed (info " + std::to_string(info) + ")");
  phi_ = sqrt_w_.cwiseInverse().asDiagonal() * A;
}

void HeatKernelTable::check_time(double t) const {
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("kernel: time must be positive");
}

void HeatKernelTable::record_clip(double value) const {
  double cur = max_clip_.load();
  while (value > cur && !max_clip_.compare_exchange_weak(cur, value)) {
  }
}

void HeatKernelTable::clip(Eigen::MatrixXd& m) const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m.data()[i] < 0.0) {
      worst = std::max(worst, -m.data()[i]);
      m.data()[i] = 0.0;
    }
  }
  if (worst > 0.0) record_clip(worst);
}

Eigen::MatrixXd HeatKernelTable::expm_times(double t, const Eigen::MatrixXd& v) const {
  const double half = 0.5 * spectral_bound();
  const double z = t * half;
  const int kmax = static_cast<int>(std::ceil(9.0 * std::sqrt(z) + 30.0));
  const auto c = scaled_bessel_i(z, kmax);
  // X = S / half + I has spectrum in [-1, 1]
  auto X = [&](const Eigen::MatrixXd& w) -> Eigen::MatrixXd { return (S_ * w) / half + w; };
  Eigen::MatrixXd t0 = v, t1 = X(v);
  Eigen::MatrixXd acc = c[0] * t0 + 2.0 * c[1] * t1;
  for (int k = 2; k <= kmax; ++k) {
    Eigen::MatrixXd t2 = 2.0 * X(t1) - t0;
    acc += 2.0 * c[static_cast<std::size_t>(k)] * t2;
    t0.swap(t1);
    t1.swap(t2);
  }
  return acc;
}

double HeatKernelTable::density(double t, std::size_t x, std::size_t y) const {
  check_time(t);
  if (x >= size() || y >= size()) throw ValidationError("kernel: vertex index out of range");
  double v;
  if (spectral_) {
    v = 0.0;
    const auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(y);
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) v += phi_(xi, k) * phi_(yi, k) * std::exp(lambda_[k] * t);
  } else {
    v = density_column(t, y)[static_cast<Eigen::Index>(x)];
  }
  if (v < 0.0) {
    record_clip(-v);
    v = 0.0;
  }
  return v;
}

Eigen::MatrixXd HeatKernelTable::density(double t) const {
  check_time(t);
  Eigen::MatrixXd out;
  if (spectral_) {
    Eigen::VectorXd e = (lambda_ * (0.5 * t)).array().exp();
    Eigen::MatrixXd B = phi_ * e.asDiagonal();
    out = B * B.transpose();
  } else {
    Eigen::MatrixXd I = sqrt_w_.cwiseInverse().asDiagonal();
    out = sqrt_w_.cwiseInverse().asDiagonal() * expm_times(t, I);
    out = (0.5 * (out + out.transpose())).eval();
  }
  clip(out);
  return out;
}

Eigen::VectorXd HeatKernelTable::density_column(double t, std::size_t y) const {
  check_time(t);
  if (y >= size()) throw ValidationError("kernel: vertex index out of range");
  Eigen::MatrixXd col;
  const auto yi = static_cast<Eigen::Index>(y);
  if (spectral_) {
    Eigen::VectorXd c = phi_.row(yi).transpose().cwiseProduct((lambda_ * t).array().exp().matrix());
    col = phi_ * c;
  } else {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), 1);
    e(yi, 0) = 1.0 / sqrt_w_[yi];
    col = sqrt_w_.cwiseInverse().asDiagonal() * expm_times(t, e);
  }
  clip(col);
  return col.col(0);
}

Eigen::VectorXd HeatKernelTable::diagonal(double t) const {
  check_time(t);
  Eigen::VectorXd d;
  if (spectral_) {
    d = phi_.cwiseAbs2() * (lambda_ * t).array().exp().matrix();
  } else {
    d = density(t).diagonal();
  }
  return d.cwiseMax(0.0);
}

Eigen::MatrixXd HeatKernelTable::probability(double t) const {
  return density(t) * weights_.asDiagonal();
}

Eigen::MatrixXd HeatKernelTable::apply(double t, const Eigen::MatrixXd& f) const {
  check_time(t);
  if (f.rows() != static_cast<Eigen::Index>(size())) throw ValidationError("kernel: apply dimension mismatch");
  if (spectral_) {
    Eigen::MatrixXd c = phi_.transpose() * (weights_.asDiagonal() * f);
    c = (lambda_ * t).array().exp().matrix().asDiagonal() * c;
    return phi_ * c;
  }
  return sqrt_w_.cwiseInverse().asDiagonal() * expm_times(t, sqrt_w_.asDiagonal() * f);
}

std::vector<double> log_grid(double a, double b, std::size_t count) {
  if (!(a > 0.0) || !(b >= a)) throw ValidationError("log_grid: need 0 < a <= b");
  if (count == 0) return {};
  if (count == 1) return {a};
  std::vector<double> g(count);
  const double la = std::log(a), lb = std::log(b);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(count - 1));
  g.front() = a;
  g.back() = b;
  return g;
}

std::pair<double, double> scaling_window(const geometry::FractalModel& model, int level) {
  return {10.0 * std::pow(model.time_scale, -level), 0.5};
}

bool resolved_scale(const geometry::FractalModel& model, double mean_distance, double t) {
  const double ell = model.diameter * std::pow(t, 1.0 / model.d_w);
  return mean_distance <= ell / (model.alpha * model.alpha);
}

std::string kernel_csv(const HeatKernelTable& table) {
  std::string out = "t,x_id,y_id,density\n";
  char buf[96];
  for (double t : table.times()) {
    Eigen::MatrixXd p = table.density(t);
    for (Eigen::Index x = 0; x < p.rows(); ++x)
      for (Eigen::Index y = 0; y < p.cols(); ++y) {
        int len = std::snprintf(buf, sizeof buf, "%.17g,%u,%u,%.17g\n", t, table.active()[static_cast<std::size_t>(x)],
                                table.active()[static_cast<std::size_t>(y)], p(x, y));
        out.append(buf, static_cast<std::size_t>(len));
      }
  }
  return out;
}

std::string kernel_binary(const HeatKernelTable& table) {
  std::string out;
  auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  const char magic[8] = {'N', 'F', 'H', 'K', 'T', 'B', 'L', '1'};
  put(magic, 8);
  std::uint32_t hdr[4] = {static_cast<std::uint32_t>(table.level()), static_cast<std::uint32_t>(table.blowup()),
                          table.boundary() == Boundary::reflecting ? 0u : 1u, 0u};
  put(hdr, sizeof hdr);
  std::uint64_t V = table.size(), K = table.times().size();
  put(&V, 8);
  put(&K, 8);
  put(table.times().data(), K * sizeof(double));
  for (auto id : table.active()) {
    std::uint64_t v = id;
    put(&v, 8);
  }
  for (double t : table.times()) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p = table.density(t);
    put(p.data(), static_cast<std::size_t>(p.size()) * sizeof(double));
  }
  return out;
}

}  // namespace nfheat::kernel
