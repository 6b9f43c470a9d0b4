#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nfheat/error.hpp"
#include "nfheat/parameter_integral.hpp"

using namespace nfheat;
using namespace nfheat::integral;

namespace {

const geometry::FractalModel& vicsek() {
  static const auto m = geometry::build_preset("vicsek");
  return m;
}

std::shared_ptr<const kernel::HeatKernelTable> spectral_table(int level, int M = 0,
                                                              kernel::Boundary b = kernel::Boundary::reflecting) {
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(vicsek(), level, M));
  return std::make_shared<kernel::HeatKernelTable>(kernel::build_generator(vs, vicsek(), b),
                                                   default_eta_times(vicsek(), level, 1.0), kernel::Backend::spectral);
}

HFunction hfun(std::shared_ptr<const kernel::HeatKernelTable> k, const std::string& sigma, bool enforce = true) {
  return HFunction(std::move(k), vicsek(), sigma_preset(sigma, vicsek(), 0), 1.0, {}, enforce);
}

measure::MeasureRealization gaussian(std::uint64_t seed, int depth, int M = 0) {
  return measure::MeasureRealization::realize(measure::parse_base("gaussian", seed), vicsek(), M, depth);
}

}  // namespace

TEST_CASE("sigma presets") {
  const auto& m = vicsek();
  const geometry::Point y = m.boundary_point(0);
  CHECK(sigma_preset("zero", m, 0).fn(0.3, y) == 0.0);
  CHECK(sigma_preset("const:2.5", m, 0).fn(0.3, y) == 2.5);
  CHECK(sigma_preset("const:2.5", m, 0).C == 2.5);
  CHECK(sigma_preset("time", m, 0).fn(0.3, y) == 0.3);
  const auto smooth = sigma_preset("preset:smooth", m, 0);
  CHECK(smooth.beta == 1.0);
  CHECK(std::abs(smooth.fn(0.2, y)) <= smooth.C);
  CHECK(sigma_preset("holder:0.9", m, 0).beta == 0.9);
  CHECK_THROWS_AS(sigma_preset("holder:1.5", m, 0), ValidationError);
  CHECK_THROWS_AS(sigma_preset("const:abc", m, 0), ValidationError);
  CHECK_THROWS_AS(sigma_preset("wiggly", m, 0), ValidationError);
}

TEST_CASE("sigma Hoelder constants hold on sampled pairs") {
  const auto& m = vicsek();
  const auto vs = geometry::vertex_set(m, 3, 0);
  for (const std::string spec : {"smooth", "holder:0.8", "holder:1"}) {
    const auto s = sigma_preset(spec, m, 0);
    for (std::size_t a = 0; a < vs.size(); a += 7)
      for (std::size_t b = 0; b < vs.size(); b += 11) {
        const double d = (vs.point(a) - vs.point(b)).norm();
        if (d == 0) continue;
        CHECK(std::abs(s.fn(0.4, vs.point(a)) - s.fn(0.4, vs.point(b))) <= s.K * std::pow(d, s.beta) * (1 + 1e-12));
      }
  }
}

TEST_CASE("assumption 6 is enforced at construction") {
  const auto k = spectral_table(2);
  CHECK_THROWS_AS(hfun(k, "holder:0.5"), ValidationError);
  CHECK_NOTHROW(hfun(k, "holder:0.5", false));
  CHECK_NOTHROW(hfun(k, "holder:0.8"));
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(vicsek(), 2, 0));
  const auto cheb = std::make_shared<kernel::HeatKernelTable>(
      kernel::build_generator(vs, vicsek(), kernel::Boundary::reflecting), std::vector<double>{0.1},
      kernel::Backend::chebyshev);
  CHECK_THROWS_AS(hfun(cheb, "smooth"), ValidationError);
}

TEST_CASE("h time integrals against the weights") {
  const auto k = spectral_table(3);
  const auto& w = k->weights();
  const auto one = hfun(k, "const:1"), lin = hfun(k, "time"), zero = hfun(k, "zero");
  for (double t : {0.001, 0.02, 0.3, 1.0})
    for (std::size_t x : {std::size_t{0}, std::size_t{37}, k->size() - 1}) {
      CHECK(std::abs(w.dot(one.row(t, x)) - t) <= 1e-6);
      CHECK(std::abs(w.dot(lin.row(t, x)) - t * t / 2) <= 1e-6);
      CHECK(zero.row(t, x).cwiseAbs().maxCoeff() == 0.0);
      CHECK(zero.eval(t, x, 5) == 0.0);
    }
}

TEST_CASE("pointwise, row and batch paths agree") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const double t = 0.05;
  const auto r = hf.row(t, 10);
  for (std::size_t y : {std::size_t{0}, std::size_t{10}, std::size_t{11}, std::size_t{200}})
    CHECK(std::abs(hf.eval(t, 10, y) - r[static_cast<Eigen::Index>(y)]) <= 1e-8);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k->size()), 3);
  const Eigen::MatrixXd out = hf.apply(t, W);
  // out(x, j) = h(t, x, j); h is symmetric in x, y only when sigma has no y dependence
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(out(10, j) - r[j]) <= 1e-10);
  // weighted mass bound |sum_y m(y) h| <= C t
  CHECK(std::abs(k->weights().dot(r)) <= hf.sigma().C * t * (1 + 1e-9));
}

TEST_CASE("h time domain") {
  const auto hf = hfun(spectral_table(2), "smooth");
  CHECK_THROWS_AS(hf.eval(0.0, 0, 0), ValidationError);
  CHECK_THROWS_AS(hf.eval(1.5, 0, 0), ValidationError);
  CHECK_THROWS_AS(hf.eval(0.5, 0, 9999), ValidationError);
}

TEST_CASE("harmonic extension preserves constants and corners") {
  for (const std::string name : {"vicsek", "gasket"}) {
    const auto m = geometry::build_preset(name);
    const auto A = harmonic_extension(m);
    REQUIRE(A.size() == static_cast<std::size_t>(m.N));
    for (const auto& a : A) {
      CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(a.minCoeff() >= -1e-12);
    }
  }
  // gasket: the midpoint of an edge gets 2/5 from each end and 1/5 from the far corner
  const auto A = harmonic_extension(geometry::build_preset("gasket"));
  std::vector<double> row{A[0](1, 0), A[0](1, 1), A[0](1, 2)};
  std::sort(row.begin(), row.end());
  CHECK(row[0] == doctest::Approx(0.2));
  CHECK(row[2] == doctest::Approx(0.4));
}

TEST_CASE("anchor operator picks the anchor vertex") {
  const auto k = spectral_table(2, 1);
  const auto& vs = k->vertices();
  for (auto rule : {measure::AnchorRule::first_fixed_point, measure::AnchorRule::last_fixed_point})
    for (int n = 0; n <= 4; ++n) {
      const auto G = anchor_operator(*k, vicsek(), n, rule);
      CHECK(G.rows() == static_cast<Eigen::Index>(5 * std::pow(5, n)));
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k->size()));
      CHECK(((G * ones).array() - 1.0).abs().maxCoeff() < 1e-12);
      if (n > 2) continue;
      for (Eigen::Index row = 0; row < G.rows(); ++row) {
        const auto c = static_cast<std::size_t>(row) / static_cast<std::size_t>(std::pow(5, n));
        const auto idx = static_cast<std::uint64_t>(row) % static_cast<std::uint64_t>(std::pow(5, n));
        const auto v = vs.find(measure::anchor_point(vicsek(), 1, c, n, idx, rule));
        REQUIRE(v.has_value());
        CHECK(G.coeff(row, k->index_of()[*v]) == 1.0);
      }
    }
}

TEST_CASE("eta examples") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  CHECK(times.size() == 8);

  const auto z = eval_eta(hf, measure::MeasureRealization::zero(vicsek(), 0, 5), times, 5);
  CHECK(z.eta().cwiseAbs().maxCoeff() == 0.0);

  // an atom of weight 0.75: S^(0) is h at the root anchor
  measure::BaseSM b;
  b.kind = measure::BaseKind::atomic_series;
  b.atom_positions = {0.37};
  b.atom_coefficients = {0.75};
  b.random_signs = false;
  const auto atom = measure::MeasureRealization::realize(b, vicsek(), 0, 5);
  const auto ev = eval_eta(hf, atom, times, 5);
  const auto root = k->index_of()[*k->vertices().find(measure::anchor_point(vicsek(), 0, 0, 0, 0, measure::AnchorRule::first_fixed_point))];
  for (std::size_t i : {std::size_t{0}, std::size_t{7}})
    CHECK(std::abs(ev.partial[0](static_cast<Eigen::Index>(i), 12) - 0.75 * hf.eval(times[i], 12, static_cast<std::size_t>(root))) <= 1e-8);
  // at the kernel level the atom's cell anchor carries the whole mass
  const auto home = static_cast<std::uint64_t>(std::ceil(0.37 * 125) - 1);
  const auto v3 = k->index_of()[*k->vertices().find(measure::anchor_point(vicsek(), 0, 0, 3, home, measure::AnchorRule::first_fixed_point))];
  CHECK(std::abs(ev.partial[3](2, 5) - 0.75 * hf.eval(times[2], 5, static_cast<std::size_t>(v3))) <= 1e-8);

  CHECK_THROWS_AS(eval_eta(hf, atom, times, 6), ValidationError);
  CHECK_THROWS_AS(eval_eta(hf, gaussian(1, 3, 1), times, 3), ValidationError);
  CHECK_THROWS_AS(eval_eta(hf, atom, {}, 3), ValidationError);
}

TEST_CASE("eta is linear in the measure") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  const auto a = gaussian(1, 5), b = gaussian(2, 5);
  const auto sum = a.combine(1.0, b, 1.0);
  const auto ea = eval_eta(hf, a, times, 5), eb = eval_eta(hf, b, times, 5), es = eval_eta(hf, sum, times, 5);
  CHECK((es.eta() - ea.eta() - eb.eta()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("partial sums converge geometrically") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  // rate read off the h-regularity in the increment bound, with 50% slack
  const double beta_h = 0.95;
  const double cap = 1.5 * std::pow(vicsek().alpha, -(beta_h - vicsek().d_f / 2));
  int below = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const auto ev = eval_eta(hf, gaussian(40 + seed, 7), times, 7);
    const double q = ev.median_ratio_last3();
    CHECK(q <= cap);
    below += q < 1.0 ? 1 : 0;
  }
  CHECK(below >= 19);
}

TEST_CASE("anchor rules give the same limit") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  int ok = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto real = gaussian(900 + seed, 7);
    const auto a = eval_eta(hf, real, times, 7, measure::AnchorRule::first_fixed_point);
    const auto b = eval_eta(hf, real, times, 7, measure::AnchorRule::last_fixed_point);
    std::vector<double> d;
    for (std::size_t n = 3; n < a.partial.size(); ++n) d.push_back((a.partial[n] - b.partial[n]).lpNorm<Eigen::Infinity>());
    std::vector<double> r;
    for (std::size_t i = 1; i < d.size(); ++i) r.push_back(d[i] / d[i - 1]);
    std::sort(r.begin(), r.end());
    ok += r[r.size() / 2] < 1.0 ? 1 : 0;
  }
  CHECK(ok >= 9);
}

TEST_CASE("h is Hoelder in x at level 4") {
  const auto k = spectral_table(4);
  const auto hf = hfun(k, "smooth");
  const auto fit = estimate_h_holder(hf, 0.5, 0);
  CHECK(fit.levels.size() >= 2);
  CHECK(fit.exponent >= 0.85);
  CHECK(fit.exponent > vicsek().d_f / 2);
  CHECK_THROWS_AS(estimate_h_holder(hfun(spectral_table(2), "smooth"), 0.5, 0), ValidationError);
}

TEST_CASE("path regularity report") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);

  // constant field: modulus identically zero
  auto flat = eval_eta(hf, measure::MeasureRealization::zero(vicsek(), 0, 2), times, 2);
  for (auto& p : flat.partial) p.setConstant(3.0);
  const auto rc = path_regularity_report(flat, k->vertices());
  CHECK(rc.finite);
  for (const auto& bin : rc.bins) CHECK(bin.modulus == 0.0);
  CHECK_FALSE(rc.decreasing);

  int decreasing = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const auto ev = eval_eta(hf, gaussian(2000 + seed, 6), times, 6);
    const auto rep = path_regularity_report(ev, k->vertices(), 8, 600);
    CHECK(rep.finite);
    for (const auto& bin : rep.bins) CHECK(std::isfinite(bin.modulus));
    decreasing += rep.decreasing ? 1 : 0;
  }
  CHECK(decreasing >= 45);
}

TEST_CASE("increment bound from the Cauchy-Schwarz split") {
  auto vs = std::make_shared<geometry::VertexSet>(geometry::vertex_set(vicsek(), 3, 0));
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  const std::vector<double> few{times[2], times[7]};
  const auto k = std::make_shared<kernel::HeatKernelTable>(kernel::build_generator(vs, vicsek(), kernel::Boundary::reflecting),
                                                           few, kernel::Backend::spectral);
  const auto hf = hfun(k, "smooth");
  for (int seed = 0; seed < 3; ++seed) {
    const auto res = increment_bound_check(hf, gaussian(60 + seed, 6), few, 6, 0.95);
    CHECK(res.K_h > 0);
    CHECK(res.lhs.size() == 5);
    CHECK(res.holds);
  }
}

TEST_CASE("stable base gives a finite eta") {
  const auto k = spectral_table(3);
  const auto hf = hfun(k, "smooth");
  const auto times = default_eta_times(vicsek(), 3, 1.0);
  for (int seed = 0; seed < 10; ++seed) {
    const auto real = measure::MeasureRealization::realize(measure::parse_base("stable:1.5", seed), vicsek(), 0, 6);
    const auto ev = eval_eta(hf, real, times, 6);
    CHECK(ev.eta().allFinite());
  }
}

TEST_CASE("eta csv layout") {
  const auto k = spectral_table(1);
  const auto hf = hfun(k, "smooth");
  const auto ev = eval_eta(hf, gaussian(3, 2), {0.1, 0.2}, 2);
  const auto csv = ev.csv();
  CHECK(csv.rfind("t,x_id,level,partial_sum\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 16 * 3);
  const auto conv = ev.convergence_csv();
  CHECK(std::count(conv.begin(), conv.end(), '\n') == 3);
}
