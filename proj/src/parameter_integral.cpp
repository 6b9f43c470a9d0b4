#include "nfheat/parameter_integral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "nfheat/error.hpp"

namespace nfheat::integral {

namespace {

geometry::Point domain_center(const geometry::FractalModel& model, int blowup) {
  geometry::Point c = geometry::Point::Zero(model.d);
  for (std::size_t r = 0; r < model.boundary_size(); ++r) c += model.boundary_point(r);
  return std::pow(model.alpha, blowup) * c / static_cast<double>(model.boundary_size());
}

double domain_radius(const geometry::FractalModel& model, int blowup) {
  const geometry::Point c = domain_center(model, 0);
  double R = 0;
  for (std::size_t r = 0; r < model.boundary_size(); ++r) R = std::max(R, (model.boundary_point(r) - c).norm());
  return std::pow(model.alpha, blowup) * R;
}

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

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

Sigma sigma_preset(const std::string& spec_in, const geometry::FractalModel& model, int blowup) {
  std::string spec = spec_in.rfind("preset:", 0) == 0 ? spec_in.substr(7) : spec_in;
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  Sigma s;
  s.name = spec_in;
  const geometry::Point c = domain_center(model, blowup);
  if (head == "smooth") {
    // cos(s) times a Gaussian bump in y, width half the domain scale
    const double w = 0.5 * std::pow(model.alpha, blowup);
    s.fn = [c, w](double t, const geometry::Point& y) { return std::cos(t) * std::exp(-(y - c).squaredNorm() / (2 * w * w)); };
    s.C = 1.0;
    s.K = std::exp(-0.5) / w;
    s.beta = 1.0;
  } else if (head == "zero") {
    s.fn = [](double, const geometry::Point&) { return 0.0; };
    s.C = 0.0;
  } else if (head == "const") {
    const double v = arg.empty() ? 1.0 : parse_number(arg, "sigma");
    s.fn = [v](double, const geometry::Point&) { return v; };
    s.C = std::abs(v);
  } else if (head == "time") {
    s.fn = [](double t, const geometry::Point&) { return t; };
    s.C = 0.0;  // set from the horizon by HFunction
  } else if (head == "holder") {
    const double b = arg.empty() ? 0.5 : parse_number(arg, "sigma");
    if (!(b > 0.0 && b <= 1.0)) throw ValidationError("holder sigma exponent must lie in (0, 1]");
    const double R = domain_radius(model, blowup);
    s.fn = [c, b, R](double t, const geometry::Point& y) {
      return std::cos(t) * (1.0 + std::pow((y - c).norm(), b)) / (1.0 + std::pow(R, b));
    };
    s.C = 1.0;
    s.K = 1.0 / (1.0 + std::pow(R, b));
    s.beta = b;
  } else {
    throw ValidationError("unknown sigma '" + spec_in + "' (smooth, zero, const:<c>, time, holder:<b>)");
  }
  return s;
}

HFunction::HFunction(std::shared_ptr<const kernel::HeatKernelTable> kern, const geometry::FractalModel& model,
                     Sigma sigma, double T, QuadratureSpec quad, bool enforce_assumption6)
    : kernel_(std::move(kern)), model_(model), sigma_(std::move(sigma)), T_(T), quad_(quad) {
  if (!kernel_) throw ValidationError("HFunction: no kernel");
  if (!kernel_->spectral()) throw ValidationError("HFunction: the parameter integral needs the spectral kernel backend");
  if (!(T_ > 0.0) || !std::isfinite(T_)) throw ValidationError("HFunction: horizon must be positive");
  if (!sigma_.fn) throw ValidationError("HFunction: sigma has no function");
  if (sigma_.name == "time" || sigma_.name == "preset:time") sigma_.C = T_;
  if (enforce_assumption6 && !(sigma_.beta > model_.d_f / 2.0))
    throw ValidationError("HFunction: sigma Hoelder exponent must exceed d_f / 2");
  for (auto id : kernel_->active()) points_.push_back(kernel_->vertices().point(id));
}

void HFunction::check_time(double t) const {
  if (!(t > 0.0) || t > T_ * (1 + 1e-12)) throw ValidationError("h: time outside (0, T]");
}

quad::Rule HFunction::rule(double t) const {
  return quad::graded_rule(t, 1.0 / kernel_->spectral_bound(), quad_.order, quad_.ratio);
}

double HFunction::eval(double t, std::size_t x, std::size_t y) const {
  check_time(t);
  if (x >= kernel_->size() || y >= kernel_->size()) throw ValidationError("h: vertex index out of range");
  const auto& lam = kernel_->eigenvalues();
  const auto& phi = kernel_->eigenfunctions();
  Eigen::VectorXd c = phi.row(static_cast<Eigen::Index>(x)).transpose().cwiseProduct(phi.row(static_cast<Eigen::Index>(y)).transpose());
  auto integrate = [&](const quad::Rule& r) {
    double acc = 0;
    for (std::size_t q = 0; q < r.size(); ++q) {
      const double sg = sigma_.fn(r.nodes[q], points_[y]);
      if (sg == 0.0) continue;
      double p = 0;
      for (Eigen::Index k = 0; k < lam.size(); ++k) p += c[k] * std::exp(lam[k] * (t - r.nodes[q]));
      acc += r.weights[q] * p * sg;
    }
    return acc;
  };
  double width = 1.0 / kernel_->spectral_bound();
  double v = integrate(quad::graded_rule(t, width, quad_.order, quad_.ratio));
  for (int attempt = 0; attempt < 4; ++attempt) {
    width /= 2.0;
    const double w = integrate(quad::graded_rule(t, width, quad_.check_order, quad_.ratio));
    if (std::abs(w - v) <= quad_.tol) return w;
    v = w;
    width /= 2.0;
  }
  throw ComputationError("h: quadrature tolerance unreachable");
}

Eigen::MatrixXd HFunction::coefficient_block(double t) const {
  const auto& lam = kernel_->eigenvalues();
  const auto& phi = kernel_->eigenfunctions();
  const quad::Rule r = rule(t);
  const auto K = lam.size();
  const auto Q = static_cast<Eigen::Index>(r.size());
  const auto V = static_cast<Eigen::Index>(points_.size());
  Eigen::MatrixXd E(K, Q), Sg(Q, V);
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double s = r.nodes[static_cast<std::size_t>(q)];
    for (Eigen::Index k = 0; k < K; ++k) E(k, q) = r.weights[static_cast<std::size_t>(q)] * std::exp(lam[k] * (t - s));
    for (Eigen::Index y = 0; y < V; ++y) Sg(q, y) = sigma_.fn(s, points_[static_cast<std::size_t>(y)]);
  }
  Eigen::MatrixXd B = E * Sg;  // K x V
  return phi.cwiseProduct(B.transpose());
}

Eigen::VectorXd HFunction::row(double t, std::size_t x) const {
  check_time(t);
  if (x >= kernel_->size()) throw ValidationError("h: vertex index out of range");
  const Eigen::MatrixXd C = coefficient_block(t);
  return C * kernel_->eigenfunctions().row(static_cast<Eigen::Index>(x)).transpose();
}

Eigen::MatrixXd HFunction::apply(double t, const Eigen::MatrixXd& W) const {
  check_time(t);
  if (W.rows() != static_cast<Eigen::Index>(kernel_->size())) throw ValidationError("h: apply dimension mismatch");
  const Eigen::MatrixXd C = coefficient_block(t);
  return kernel_->eigenfunctions() * (C.transpose() * W);
}

std::vector<Eigen::MatrixXd> harmonic_extension(const geometry::FractalModel& model) {
  const geometry::VertexSet vs = geometry::vertex_set(model, 1, 0);
  const auto V = static_cast<Eigen::Index>(vs.size());
  const auto c = static_cast<Eigen::Index>(vs.corners);
  std::vector<Eigen::Index> pos(vs.size(), -1);
  std::vector<char> is_b(vs.size(), 0);
  for (auto b : vs.boundary) is_b[b] = 1;
  std::vector<std::uint32_t> interior;
  for (std::uint32_t v = 0; v < vs.size(); ++v)
    if (!is_b[v]) {
      pos[v] = static_cast<Eigen::Index>(interior.size());
      interior.push_back(v);
    }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(V, c);
  for (Eigen::Index a = 0; a < c; ++a) H(vs.boundary[static_cast<std::size_t>(a)], a) = 1.0;
  if (!interior.empty()) {
    const auto I = static_cast<Eigen::Index>(interior.size());
    Eigen::MatrixXd LII = Eigen::MatrixXd::Zero(I, I), rhs = Eigen::MatrixXd::Zero(I, c);
    for (Eigen::Index i = 0; i < I; ++i) {
      const auto u = interior[static_cast<std::size_t>(i)];
      for (auto e = vs.adj_offsets[u]; e < vs.adj_offsets[u + 1]; ++e) {
        const auto v = vs.adj_targets[e];
        const double w = vs.adj_weights[e];
        LII(i, i) += w;
        if (pos[v] >= 0) {
          LII(i, pos[v]) -= w;
        } else {
          for (Eigen::Index a = 0; a < c; ++a)
            if (vs.boundary[static_cast<std::size_t>(a)] == v) rhs(i, a) += w;
        }
      }
    }
    Eigen::MatrixXd sol = LII.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < I; ++i) H.row(interior[static_cast<std::size_t>(i)]) = sol.row(i);
  }
  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(model.N), Eigen::MatrixXd(c, c));
  for (int i = 0; i < model.N; ++i)
    for (Eigen::Index b = 0; b < c; ++b)
      A[static_cast<std::size_t>(i)].row(b) = H.row(vs.cell_vertices[static_cast<std::size_t>(i * c + b)]);
  return A;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> anchor_operator(const kernel::HeatKernelTable& kern,
                                                             const geometry::FractalModel& model, int n,
                                                             measure::AnchorRule rule) {
  const auto& vs = kern.vertices();
  const int nk = vs.level, M = vs.blowup, N = model.N;
  const std::size_t corners = vs.corners;
  const std::size_t r = rule == measure::AnchorRule::first_fixed_point ? 0 : corners - 1;
  const std::uint64_t comps = ipow(static_cast<std::uint64_t>(N), M);
  const std::uint64_t per = ipow(static_cast<std::uint64_t>(N), n);
  if (n < 0 || n > 30) throw ValidationError("anchor_operator: depth out of range");

  // coefficient rows e_r^T A_{s_m} ... A_{s_1} for every suffix below the kernel level
  const int m = std::max(n - nk, 0);
  std::vector<Eigen::RowVectorXd> rows;
  {
    const auto A = m > 0 ? harmonic_extension(model) : std::vector<Eigen::MatrixXd>{};
    const auto c = static_cast<Eigen::Index>(corners);
    std::function<void(int, const Eigen::MatrixXd&)> rec = [&](int depth, const Eigen::MatrixXd& G) {
      if (depth == m) {
        rows.push_back(G.row(static_cast<Eigen::Index>(r)));
        return;
      }
      for (int i = 0; i < N; ++i) rec(depth + 1, A[static_cast<std::size_t>(i)] * G);
    };
    rec(0, Eigen::MatrixXd::Identity(c, c));
  }
  // above the kernel level the anchor is a corner of the descendant cell along the fixing map
  std::uint64_t tail = 0, down = 1;
  for (int j = n; j < nk; ++j) {
    tail = tail * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(model.essential[r]);
    down *= static_cast<std::uint64_t>(N);
  }
  const std::uint64_t below = ipow(static_cast<std::uint64_t>(N), m);
  const std::uint64_t kcells = ipow(static_cast<std::uint64_t>(N), nk);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(comps * per * (m > 0 ? corners : 1));
  for (std::uint64_t cidx = 0; cidx < comps; ++cidx) {
    for (std::uint64_t k = 0; k < per; ++k) {
      const std::uint64_t row = cidx * per + k;
      const std::uint64_t anc = k / below;
      const std::uint64_t suffix = k % below;
      const std::uint64_t cell = cidx * kcells + anc * down + tail;
      const auto* cv = &vs.cell_vertices[cell * corners];
      if (m == 0) {
        const auto j = kern.index_of()[cv[r]];
        if (j >= 0) trip.emplace_back(static_cast<int>(row), static_cast<int>(j), 1.0);
        continue;
      }
      const auto& coef = rows[suffix];
      for (std::size_t a = 0; a < corners; ++a) {
        const auto j = kern.index_of()[cv[a]];
        if (j >= 0 && coef[static_cast<Eigen::Index>(a)] != 0.0)
          trip.emplace_back(static_cast<int>(row), static_cast<int>(j), coef[static_cast<Eigen::Index>(a)]);
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> G(static_cast<Eigen::Index>(comps * per),
                                                 static_cast<Eigen::Index>(kern.size()));
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

double EtaEvaluation::median_ratio_last3() const {
  std::vector<double> r;
  for (std::size_t n = 1; n < sup_increment.size(); ++n) {
    const double a = sup_increment[n - 1], b = sup_increment[n];
    r.push_back(a > 0 ? b / a : (b > 0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  if (r.empty()) return 0.0;
  std::vector<double> last(r.end() - static_cast<std::ptrdiff_t>(std::min<std::size_t>(3, r.size())), r.end());
  std::sort(last.begin(), last.end());
  return last.size() % 2 ? last[last.size() / 2] : 0.5 * (last[last.size() / 2 - 1] + last[last.size() / 2]);
}

std::string EtaEvaluation::csv() const {
  std::string out = "t,x_id,level,partial_sum\n";
  char buf[96];
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t x = 0; x < vertex_ids.size(); ++x)
      for (std::size_t n = 0; n < partial.size(); ++n) {
        int len = std::snprintf(buf, sizeof buf, "%.17g,%u,%zu,%.17g\n", times[i], vertex_ids[x], n,
                                partial[n](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)));
        out.append(buf, static_cast<std::size_t>(len));
      }
  return out;
}

std::string EtaEvaluation::convergence_csv() const {
  std::string out = "level,sup_increment\n";
  char buf[64];
  for (std::size_t n = 0; n < sup_increment.size(); ++n) {
    int len = std::snprintf(buf, sizeof buf, "%zu,%.17g\n", n, sup_increment[n]);
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

EtaEvaluation eval_eta(const HFunction& hf, const measure::MeasureRealization& real, const std::vector<double>& times,
                       int n_max, measure::AnchorRule rule) {
  const auto& kern = hf.kernel();
  if (real.N() != hf.model().N) throw ValidationError("eval_eta: realization belongs to a different model");
  if (real.blowup() != kern.blowup()) throw ValidationError("eval_eta: realization and kernel differ in blowup");
  if (n_max < 0 || n_max > real.max_depth()) throw ValidationError("eval_eta: measure depth below n_max");
  if (times.empty()) throw ValidationError("eval_eta: empty time grid");
  EtaEvaluation ev;
  ev.times = times;
  ev.vertex_ids = kern.active();
  const auto V = static_cast<Eigen::Index>(kern.size());
  Eigen::MatrixXd W(V, n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    const auto G = anchor_operator(kern, hf.model(), n, rule);
    const auto mu = real.level_masses(n);
    W.col(n) = G.transpose() * Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  }
  ev.partial.assign(static_cast<std::size_t>(n_max) + 1, Eigen::MatrixXd(static_cast<Eigen::Index>(times.size()), V));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Eigen::MatrixXd out = hf.apply(times[i], W);
    for (int n = 0; n <= n_max; ++n) ev.partial[static_cast<std::size_t>(n)].row(static_cast<Eigen::Index>(i)) = out.col(n).transpose();
  }
  for (int n = 0; n < n_max; ++n) {
    const double d = (ev.partial[static_cast<std::size_t>(n) + 1] - ev.partial[static_cast<std::size_t>(n)]).lpNorm<Eigen::Infinity>();
    ev.sup_increment.push_back(d);
  }
  for (const auto& p : ev.partial)
    if (!p.allFinite()) throw ComputationError("eval_eta: non-finite partial sum");
  return ev;
}

std::vector<double> default_eta_times(const geometry::FractalModel& model, int level, double T) {
  auto [lo, hi] = kernel::scaling_window(model, level);
  hi = std::min(hi, T);
  lo = std::min(lo, hi);
  return kernel::log_grid(lo, hi, lo == hi ? 1 : 8);
}

HolderFit estimate_h_holder(const HFunction& hf, double t, std::size_t x) {
  const auto& kern = hf.kernel();
  const auto& model = hf.model();
  if (kern.level() < 3) throw ValidationError("estimate_h_holder: need kernel level >= 3");
  const Eigen::VectorXd h = hf.row(t, x);
  const auto scales = geometry::adjacent_pairs_by_scale(model, kern.vertices());
  HolderFit fit;
  std::vector<double> lx, ly;
  for (const auto& sp : scales) {
    if (sp.pairs.empty() || !kernel::resolved_scale(model, sp.mean_distance, t)) continue;
    double inc = 0;
    for (const auto& [a, b] : sp.pairs) {
      if (a == b) continue;
      const auto i = kern.index_of()[a], j = kern.index_of()[b];
      if (i < 0 || j < 0) continue;
      inc = std::max(inc, std::abs(h[i] - h[j]));
    }
    if (!(inc > 0.0)) continue;
    fit.levels.push_back(sp.level);
    fit.distances.push_back(sp.mean_distance);
    fit.increments.push_back(inc);
    lx.push_back(std::log(sp.mean_distance));
    ly.push_back(std::log(inc));
  }
  if (lx.size() < 2) throw ComputationError("estimate_h_holder: degenerate regression (fewer than two scales)");
  fit.exponent = kernel::linear_fit(lx, ly).first;
  return fit;
}

RegularityReport path_regularity_report(const EtaEvaluation& ev, const geometry::VertexSet& vs, std::size_t nbins,
                                        std::size_t max_points) {
  RegularityReport rep;
  struct Z {
    double t;
    geometry::Point x;
    double v;
  };
  std::vector<Z> pts;
  const auto& eta = ev.eta();
  const std::size_t total = ev.times.size() * ev.vertex_ids.size();
  const std::size_t take = std::min(total, max_points);
  for (std::size_t s = 0; s < take; ++s) {
    const std::size_t f = s * total / take;
    const std::size_t i = f / ev.vertex_ids.size(), x = f % ev.vertex_ids.size();
    const double v = eta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x));
    if (!std::isfinite(v)) rep.finite = false;
    pts.push_back({ev.times[i], vs.point(ev.vertex_ids[x]), v});
  }
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double d = std::abs(pts[a].t - pts[b].t) + (pts[a].x - pts[b].x).norm();
      if (d > 0) {
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
    }
  if (!(dmax > 0) || nbins == 0) return rep;
  const double la = std::log(dmin), lb = std::log(dmax) + 1e-12;
  rep.bins.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    rep.bins[k].lo = std::exp(la + (lb - la) * static_cast<double>(k) / static_cast<double>(nbins));
    rep.bins[k].hi = std::exp(la + (lb - la) * static_cast<double>(k + 1) / static_cast<double>(nbins));
  }
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double d = std::abs(pts[a].t - pts[b].t) + (pts[a].x - pts[b].x).norm();
      if (!(d > 0)) continue;
      auto k = static_cast<std::size_t>((std::log(d) - la) / (lb - la) * static_cast<double>(nbins));
      k = std::min(k, nbins - 1);
      auto& bin = rep.bins[k];
      ++bin.count;
      const double diff = std::abs(pts[a].v - pts[b].v);
      if (!std::isfinite(diff)) rep.finite = false;
      bin.modulus = std::max(bin.modulus, diff);
    }
  const ModulusBin* fine = nullptr;
  const ModulusBin* coarse = nullptr;
  for (const auto& b : rep.bins)
    if (b.count) {
      if (!fine) fine = &b;
      coarse = &b;
    }
  rep.decreasing = fine && coarse && fine != coarse && fine->modulus < coarse->modulus;
  return rep;
}

IncrementBound increment_bound_check(const HFunction& hf, const measure::MeasureRealization& real,
                                     const std::vector<double>& times, int n_max, double beta_h) {
  const auto& kern = hf.kernel();
  const auto& model = hf.model();
  if (n_max < 2) throw ValidationError("increment_bound_check: need n_max >= 2");
  const auto ev = eval_eta(hf, real, times, n_max);
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> G;
  for (int n = 0; n <= n_max; ++n) G.push_back(anchor_operator(kern, model, n, measure::AnchorRule::first_fixed_point));
  IncrementBound res;
  const auto V = static_cast<Eigen::Index>(kern.size());
  const auto N = static_cast<Eigen::Index>(model.N);
  for (double t : times) {
    Eigen::MatrixXd H(V, V);  // H(y, x) = h(t, x, y)
    for (Eigen::Index x = 0; x < V; ++x) H.col(x) = hf.row(t, static_cast<std::size_t>(x));
    Eigen::MatrixXd prev = G[0] * H;
    for (int n = 0; n < n_max; ++n) {
      Eigen::MatrixXd next = G[static_cast<std::size_t>(n) + 1] * H;
      const double dist = model.diameter * std::pow(model.alpha, real.blowup() - n);
      // child rows of component c follow parent rows of the same component
      const Eigen::Index per_parent = prev.rows() / static_cast<Eigen::Index>(real.components());
      for (Eigen::Index j = 0; j < next.rows(); ++j) {
        const Eigen::Index comp = j / (per_parent * N), local = j % (per_parent * N);
        const Eigen::Index parent = comp * per_parent + local / N;
        const double d = (next.row(j) - prev.row(parent)).lpNorm<Eigen::Infinity>();
        res.K_h = std::max(res.K_h, d / std::pow(dist, beta_h));
      }
      prev.swap(next);
    }
  }
  const double beta = (beta_h - model.d_f / 2.0) / 2.0;
  const auto sq = real.sum_squares_by_depth(n_max);
  res.holds = true;
  for (int m = 0; m + 2 <= n_max; ++m) {
    double lhs = 0, geo = 0, obs = 0;
    for (int n = m; n < n_max; ++n) {
      lhs += ev.sup_increment[static_cast<std::size_t>(n)];
      const double cells = static_cast<double>(real.components()) * std::pow(static_cast<double>(model.N), n + 1);
      const double dist = model.diameter * std::pow(model.alpha, real.blowup() - n);
      geo += cells * std::pow(dist, 2 * beta_h) * std::pow(model.alpha, 2.0 * n * beta);
      obs += std::pow(model.alpha, -2.0 * n * beta) * sq[static_cast<std::size_t>(n) + 1];
    }
    const double rhs = res.K_h * std::sqrt(geo) * std::sqrt(obs);
    res.lhs.push_back(lhs);
    res.rhs.push_back(rhs);
    if (lhs > rhs * (1 + 1e-12) + 1e-300) res.holds = false;
  }
  return res;
}

}  // namespace nfheat::integral
