#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nfheat/error.hpp"
#include "nfheat/stochastic_measure.hpp"

using namespace nfheat;
using namespace nfheat::measure;

namespace {

const geometry::FractalModel& vicsek() {
  static const auto m = geometry::build_preset("vicsek");
  return m;
}

BaseSM gaussian(std::uint64_t seed) { return parse_base("gaussian", seed); }

// Kolmogorov distribution tail, asymptotic form with the Stephens correction
double ks_pvalue(std::vector<double> x, double (*cdf)(double)) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * D;
  double p = 0;
  for (int k = 1; k <= 100; ++k) p += 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void check_additivity(const MeasureRealization& r, double abs_tol) {
  const int N = r.N();
  double worst = 0;
  for (std::size_t c = 0; c < r.components(); ++c)
    for (int d = 0; d < r.max_depth(); ++d) {
      const auto cells = static_cast<std::uint64_t>(std::llround(std::pow(N, d)));
      for (std::uint64_t k = 0; k < cells; ++k) {
        const double parent = r.mass(c, d, k);
        double sum = 0;
        for (int i = 0; i < N; ++i) sum += r.mass(c, d + 1, k * N + i);
        worst = std::max(worst, std::abs(parent - sum) / std::max(1.0, std::abs(parent)));
      }
    }
  CHECK(worst <= abs_tol);
}

}  // namespace

TEST_CASE("address to interval") {
  const auto& m = vicsek();
  auto iv = address_to_interval({0, {1, 1}}, m);
  CHECK(iv.k == 1);
  CHECK(iv.a == 0.0);
  CHECK(iv.b == doctest::Approx(1.0 / 25));
  iv = address_to_interval({0, {5}}, m);
  CHECK(iv.k == 5);
  CHECK(iv.a == doctest::Approx(0.8));
  CHECK(iv.b == doctest::Approx(1.0));
  iv = address_to_interval({0, {2, 3}}, m);
  CHECK(iv.k == 8);
  CHECK(iv.a == doctest::Approx(7.0 / 25));
  CHECK(iv.b == doctest::Approx(8.0 / 25));
  iv = address_to_interval({0, {}}, m);
  CHECK(iv.a == 0.0);
  CHECK(iv.b == 1.0);
  CHECK_THROWS_AS(address_to_interval({0, {6}}, m), ValidationError);
}

TEST_CASE("base measure descriptors") {
  CHECK(parse_base("gaussian", 1).kind == BaseKind::gaussian_white);
  const auto s = parse_base("stable:1.2", 1);
  CHECK(s.kind == BaseKind::symmetric_stable);
  CHECK(s.stability == doctest::Approx(1.2));
  const auto a = parse_base("atomic:3", 7);
  CHECK(a.kind == BaseKind::atomic_series);
  REQUIRE(a.atom_positions.size() == 3);
  CHECK(a.atom_coefficients[2] == doctest::Approx(0.125));
  CHECK_FALSE(a.atomless());
  CHECK(parse_base("gaussian", 1).atomless());
  CHECK_THROWS_AS(parse_base("stable:2.5", 1), ValidationError);
  CHECK_THROWS_AS(parse_base("stable:x", 1), ValidationError);
  CHECK_THROWS_AS(parse_base("atomic:0", 1), ValidationError);
  CHECK_THROWS_AS(parse_base("poisson", 1), ValidationError);
}

TEST_CASE("realize rejects bad shapes") {
  CHECK_THROWS_AS(MeasureRealization::realize(gaussian(1), vicsek(), 0, 31), ValidationError);
  CHECK_THROWS_AS(MeasureRealization::realize(gaussian(1), vicsek(), -1, 2), ValidationError);
  CHECK_THROWS_AS(MeasureRealization::realize(gaussian(1), vicsek(), 1, 2, {1.0, 2.0}), ValidationError);
  const auto r = MeasureRealization::realize(gaussian(1), vicsek(), 0, 3);
  CHECK_THROWS_AS(r.mass(0, 4, 0), ValidationError);
  CHECK_THROWS_AS(r.mass(0, 1, 5), ValidationError);
}

TEST_CASE("additivity on stored and streamed levels") {
  for (const std::string spec : {"gaussian", "stable:1.5", "stable:0.8", "atomic:6"})
    for (int stored : {-1, 2}) {
      const auto r = MeasureRealization::realize(parse_base(spec, 11), vicsek(), 1, 5, {}, stored);
      check_additivity(r, 1e-12);
    }
  const auto g = geometry::build_preset("gasket");
  check_additivity(MeasureRealization::realize(gaussian(3), g, 2, 6), 1e-12);
}

TEST_CASE("streamed levels equal stored levels") {
  const auto full = MeasureRealization::realize(gaussian(5), vicsek(), 0, 5);
  const auto lean = MeasureRealization::realize(gaussian(5), vicsek(), 0, 5, {}, 1);
  CHECK(full.stored_depth() == 5);
  CHECK(lean.stored_depth() == 1);
  for (int d = 0; d <= 5; ++d) CHECK(full.level_masses(d) == lean.level_masses(d));
  const auto a = full.sum_squares_by_depth(5), b = lean.sum_squares_by_depth(5);
  for (int d = 0; d <= 5; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-12));
}

TEST_CASE("seed determinism") {
  const auto a = MeasureRealization::realize(gaussian(42), vicsek(), 1, 4);
  const auto b = MeasureRealization::realize(gaussian(42), vicsek(), 1, 4);
  const auto c = MeasureRealization::realize(gaussian(43), vicsek(), 1, 4);
  CHECK(a.level_masses(4) == b.level_masses(4));
  CHECK(a.level_masses(4) != c.level_masses(4));
}

TEST_CASE("total mass variance over 10000 seeds") {
  double s = 0, s2 = 0;
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    const double m = MeasureRealization::realize(gaussian(static_cast<std::uint64_t>(seed)), vicsek(), 0, 0).total_mass();
    s += m;
    s2 += m * m;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var >= 0.95);
  CHECK(var <= 1.05);
}

TEST_CASE("depth-n gaussian masses are iid normal") {
  const auto r = MeasureRealization::realize(gaussian(2024), vicsek(), 0, 6);
  auto m = r.level_masses(6);
  m.resize(5000);
  const double scale = std::pow(5.0, 3.0);  // 1 / sd = 5^{n/2}
  for (double& v : m) v *= scale;
  CHECK(ks_pvalue(m, std_normal_cdf) > 0.01);
  // neighbouring cells are uncorrelated
  double cov = 0;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) cov += m[i] * m[i + 1];
  CHECK(std::abs(cov / (m.size() - 1)) < 4.0 / std::sqrt(5000.0));
}

TEST_CASE("single atom puts its coefficient in every cell containing it") {
  BaseSM b;
  b.kind = BaseKind::atomic_series;
  b.atom_positions = {0.37};
  b.atom_coefficients = {0.75};
  b.random_signs = false;
  const auto r = MeasureRealization::realize(b, vicsek(), 0, 5);
  for (int d = 0; d <= 5; ++d) {
    const double cells = std::pow(5.0, d);
    const auto home = static_cast<std::uint64_t>(std::ceil(0.37 * cells) - 1);
    for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(cells); ++k)
      CHECK(r.mass(0, d, k) == (k == home ? 0.75 : 0.0));
  }
  // the atom is never smoothed away
  CHECK(std::abs(r.mass(0, 5, static_cast<std::uint64_t>(std::ceil(0.37 * 3125) - 1))) == 0.75);
}

TEST_CASE("zero measure") {
  const auto z = MeasureRealization::zero(vicsek(), 1, 3);
  for (double v : z.level_masses(3)) CHECK(v == 0.0);
  CHECK(integrate([](const geometry::Point&) { return 1.0; }, z, vicsek(), 3) == 0.0);
}

TEST_CASE("default component weights") {
  const auto w = MeasureRealization::default_weights(4);
  CHECK(w == std::vector<double>{1.0, 0.5, 0.25, 0.125});
  const auto r = MeasureRealization::realize(gaussian(9), vicsek(), 1, 2);
  const auto plain = MeasureRealization::realize(gaussian(9), vicsek(), 1, 2, std::vector<double>(5, 1.0));
  double total = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    CHECK(r.mass(c, 1, 3) == doctest::Approx(std::ldexp(1.0, -static_cast<int>(c)) * plain.mass(c, 1, 3)));
    total += std::ldexp(1.0, -static_cast<int>(c)) * plain.mass(c, 0, 0);
  }
  CHECK(r.total_mass() == doctest::Approx(total));
  // full-word addressing: blow-up symbol first
  CHECK(r.mass({1, {3, 2, 4}}) == r.mass(2, 2, 1 * 5 + 3));
  CHECK_THROWS_AS(r.mass({0, {3}}), ValidationError);
}

TEST_CASE("integration sums") {
  const auto& m = vicsek();
  const auto r = MeasureRealization::realize(gaussian(17), m, 1, 5);
  const auto one = [](const geometry::Point&) { return 1.0; };
  for (int n = 0; n <= 5; ++n) {
    CHECK(integrate(one, r, m, n) == doctest::Approx(r.total_mass()).epsilon(1e-12));
    CHECK(integrate(one, r, m, n, AnchorRule::last_fixed_point) == doctest::Approx(r.total_mass()).epsilon(1e-12));
    CHECK(integrate([](const geometry::Point&) { return 0.0; }, r, m, n) == 0.0);
  }
  // indicator of one depth-2 cell, found by its anchor
  const auto target = anchor_point(m, 1, 3, 2, 7, AnchorRule::first_fixed_point);
  const auto ind = [&](const geometry::Point& p) { return (p - target).norm() < 1e-9 ? 1.0 : 0.0; };
  CHECK(integrate(ind, r, m, 2) == r.mass(3, 2, 7));
  CHECK_THROWS_AS(integrate([](const geometry::Point&) { return NAN; }, r, m, 1), ValidationError);
  CHECK_THROWS_AS(integrate(one, r, m, 6), ValidationError);
}

TEST_CASE("anchor rules agree in the limit") {
  const auto& m = vicsek();
  const auto g = [](const geometry::Point& p) { return std::sin(3 * p[0]) + p[1] * p[1]; };
  std::vector<double> ratios;
  int shrinking = 0, seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto r = MeasureRealization::realize(gaussian(100 + seed), m, 0, 7);
    std::vector<double> diff;
    for (int n = 2; n <= 7; ++n)
      diff.push_back(std::abs(integrate(g, r, m, n) - integrate(g, r, m, n, AnchorRule::last_fixed_point)));
    shrinking += diff.back() < diff.front() ? 1 : 0;
  }
  CHECK(shrinking >= seeds - 1);
}

TEST_CASE("square-sum diagnostic partial sums") {
  const auto& m = vicsek();
  const auto r = MeasureRealization::realize(gaussian(4), m, 0, 3);
  using G = std::function<double(const geometry::Point&)>;
  const std::vector<G> zeros(5, [](const geometry::Point&) { return 0.0; });
  for (double v : lemma22_diagnostic(zeros, r, m, 3)) CHECK(v == 0.0);

  std::vector<G> single{[](const geometry::Point&) { return 1.0; }};
  for (int k = 0; k < 4; ++k) single.emplace_back([](const geometry::Point&) { return 0.0; });
  for (double v : lemma22_diagnostic(single, r, m, 3))
    CHECK(v == doctest::Approx(r.total_mass() * r.total_mass()).epsilon(1e-12));

  // the cell family against explicit indicator integrals
  const double beta = 0.5;
  const int L = 3;
  std::vector<geometry::Point> leaf(125);
  for (std::uint64_t j = 0; j < 125; ++j) leaf[j] = anchor_point(m, 0, 0, 3, j, AnchorRule::first_fixed_point);
  std::vector<double> explicit_sums;
  double acc = 0;
  for (int l = 1; l <= L; ++l) {
    const auto width = static_cast<std::uint64_t>(std::pow(5, 3 - l));
    for (std::uint64_t k = 0; k < 125 / width; ++k) {
      // a depth-3 anchor lies in the depth-l cell with the same positional prefix
      const G ind = [&](const geometry::Point& p) {
        for (std::uint64_t j = 0; j < 125; ++j)
          if ((p - leaf[j]).norm() < 1e-12) return j / width == k ? std::pow(3.0, -l * beta) : 0.0;
        return 0.0;
      };
      const double v = integrate(ind, r, m, 3);
      acc += v * v;
    }
    explicit_sums.push_back(acc);
  }
  const auto fam = cell_family_partial_sums(r, m, L, beta);
  REQUIRE(fam.size() == 3);
  for (int l = 0; l < L; ++l) CHECK(fam[l] == doctest::Approx(explicit_sums[l]).epsilon(1e-10));
}

TEST_CASE("cell family plateaus for a gaussian base") {
  const auto& m = vicsek();
  int flat = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto r = MeasureRealization::realize(gaussian(700 + seed), m, 0, 10);
    const auto p = cell_family_partial_sums(r, m, 10, 0.5);
    for (std::size_t l = 1; l < p.size(); ++l) CHECK(p[l] >= p[l - 1]);
    flat += plateau(p).flat ? 1 : 0;
  }
  CHECK(flat >= 9);
}

TEST_CASE("plateau flag") {
  CHECK(plateau({}).flat);
  const auto p = plateau({1.0, 2.0, 2.0, 2.0});
  CHECK(p.relative_increment == 0.0);
  CHECK(p.flat);
  const auto q = plateau({1.0, 1.0, 1.5, 2.0});
  CHECK(q.relative_increment == doctest::Approx(0.5));
  CHECK_FALSE(q.flat);
}

TEST_CASE("continuity at the empty set") {
  const auto& m = vicsek();
  std::vector<std::vector<double>> maxes(9);
  std::vector<std::vector<double>> corner(9);
  for (int seed = 0; seed < 15; ++seed) {
    const auto r = MeasureRealization::realize(gaussian(300 + seed), m, 0, 8);
    for (int n = 2; n <= 8; ++n) {
      double mx = 0;
      for (double v : r.level_masses(n)) mx = std::max(mx, std::abs(v));
      maxes[n].push_back(mx);
      corner[n].push_back(std::abs(r.mass(0, n, 0)));
    }
  }
  for (int n = 3; n <= 8; ++n) CHECK(median(maxes[n]) < median(maxes[n - 1]));
  // the cell holding the first fixed point loses its mass
  CHECK(median(corner[8]) < 0.1 * median(corner[2]));
}

TEST_CASE("stable base stays finite and heavy tailed") {
  double biggest = 0;
  for (int seed = 0; seed < 200; ++seed) {
    const auto r = MeasureRealization::realize(parse_base("stable:1.5", seed), vicsek(), 0, 3);
    for (double v : r.level_masses(3)) {
      CHECK(std::isfinite(v));
      biggest = std::max(biggest, std::abs(v));
    }
  }
  // 25000 cells with scale 5^{-2}: a gaussian would stay below ~0.2
  CHECK(biggest > 0.5);
}

TEST_CASE("linear combination is cell-wise") {
  const auto a = MeasureRealization::realize(gaussian(1), vicsek(), 1, 3);
  const auto b = MeasureRealization::realize(parse_base("stable:1.5", 2), vicsek(), 1, 3);
  const auto c = a.combine(2.0, b, -0.5);
  for (int d = 0; d <= 3; ++d) {
    const auto x = a.level_masses(d), y = b.level_masses(d), z = c.level_masses(d);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(2 * x[i] - 0.5 * y[i]).epsilon(1e-14));
  }
  CHECK_FALSE(c.streamable());
  CHECK_THROWS_AS(c.sum_squares_by_depth(4), ValidationError);
  const auto other = MeasureRealization::realize(gaussian(1), vicsek(), 0, 3);
  CHECK_THROWS_AS(a.combine(1, other, 1), ValidationError);
}

TEST_CASE("json round trip") {
  const auto& m = vicsek();
  const auto r = MeasureRealization::realize(parse_base("stable:1.3", 8), m, 1, 6, {}, 3);
  const auto back = MeasureRealization::from_json(r.to_json(), m);
  CHECK(back.stored_depth() == 3);
  CHECK(back.max_depth() == 6);
  CHECK(back.component_weights() == r.component_weights());
  for (int d = 0; d <= 6; ++d) CHECK(back.level_masses(d) == r.level_masses(d));
  CHECK(back.to_json() == r.to_json());

  CHECK_THROWS_AS(MeasureRealization::from_json("{", m), ValidationError);
  CHECK_THROWS_AS(MeasureRealization::from_json(R"({"format":"other"})", m), ValidationError);
  CHECK_THROWS_AS(MeasureRealization::from_json(r.to_json(), geometry::build_preset("gasket")), ValidationError);
}
