#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nfheat/error.hpp"
#include "nfheat/geometry.hpp"

using namespace nfheat;
using namespace nfheat::geometry;

namespace {

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

}  // namespace

TEST_CASE("vicsek preset constants") {
  const auto m = build_preset("vicsek");
  CHECK(m.N == 5);
  CHECK(m.alpha == 3.0);
  CHECK(m.assumption1_k == 4);
  CHECK(m.d_f == doctest::Approx(std::log(5.0) / std::log(3.0)).epsilon(1e-14));
  CHECK(m.d_f == doctest::Approx(1.46497).epsilon(1e-5));
  CHECK(m.d_s == doctest::Approx(std::log(25.0) / std::log(15.0)).epsilon(1e-14));
  CHECK(m.d_w == doctest::Approx(std::log(15.0) / std::log(3.0)).epsilon(1e-14));
  CHECK(m.d_w == doctest::Approx(2.46497).epsilon(1e-5));
  CHECK(m.time_scale == doctest::Approx(15.0).epsilon(1e-13));
  CHECK(std::abs(m.d_w - 2 * m.d_f / m.d_s) < 1e-12);
}

TEST_CASE("gasket preset constants") {
  const auto m = build_preset("gasket");
  CHECK(m.N == 3);
  CHECK(m.alpha == 2.0);
  CHECK(m.d_s == doctest::Approx(std::log(9.0) / std::log(5.0)).epsilon(1e-14));
  CHECK(m.d_s == doctest::Approx(1.36521).epsilon(1e-5));
  CHECK(m.d_s > 4.0 / 3.0);
  CHECK(m.time_scale == doctest::Approx(5.0).epsilon(1e-13));
}

TEST_CASE("unknown preset is rejected") { CHECK_THROWS_AS(build_preset("carpet"), ValidationError); }

TEST_CASE("similitudes contract by 1/alpha on random pairs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (const std::string name : {"vicsek", "gasket"}) {
    const auto m = build_preset(name);
    for (const auto& map : m.maps)
      for (int k = 0; k < 1000; ++k) {
        const Point x = pt(u(rng), u(rng)), y = pt(u(rng), u(rng));
        const double ratio = (map.apply(x, m.alpha) - map.apply(y, m.alpha)).norm() / (x - y).norm();
        CHECK(std::abs(ratio * m.alpha - 1.0) <= 1e-12);
      }
  }
}

TEST_CASE("apply_word examples") {
  const auto m = build_preset("vicsek");
  const Point x = pt(0.3, 0.7);
  CHECK((apply_word(m, {0, {}}, x) - x).norm() == 0.0);
  CHECK((apply_word(m, {0, {1}}, pt(1, 1)) - pt(1.0 / 3, 1.0 / 3)).norm() < 1e-15);
  CHECK((apply_word(m, {1, {1}}, pt(1, 1)) - pt(1, 1)).norm() < 1e-15);
  // outermost symbol first: psi_3(psi_1(x))
  const Point inner = m.maps[0].apply(x, m.alpha);
  CHECK((apply_word(m, {0, {3, 1}}, x) - m.maps[2].apply(inner, m.alpha)).norm() < 1e-15);
  CHECK_THROWS_AS(apply_word(m, {0, {6}}, x), ValidationError);
  CHECK_THROWS_AS(apply_word(m, {0, {0}}, x), ValidationError);
}

TEST_CASE("cell images have diameter alpha^{M-n} diam(E)") {
  const auto m = build_preset("vicsek");
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> sym(1, 5), len(0, 5), M(0, 2);
  for (int k = 0; k < 200; ++k) {
    CellAddress a{M(rng), {}};
    const int n = len(rng);
    for (int j = 0; j < n; ++j) a.word.push_back(sym(rng));
    double diam = 0;
    for (std::size_t r = 0; r < m.boundary_size(); ++r)
      for (std::size_t s = 0; s < m.boundary_size(); ++s)
        diam = std::max(diam, (apply_word(m, a, m.boundary_point(r)) - apply_word(m, a, m.boundary_point(s))).norm());
    CHECK(std::abs(diam - std::pow(m.alpha, a.blowup - n) * m.diameter) < 1e-9);
  }
}

TEST_CASE("essential fixed points by brute force") {
  const auto v = build_preset("vicsek");
  const auto ess = essential_fixed_points(v);
  REQUIRE(ess.size() == 4);
  for (int i : ess) {
    const Point& p = v.maps[static_cast<std::size_t>(i)].fixed_point;
    CHECK((p - pt(0.5, 0.5)).norm() > 0.1);
  }
  CHECK(essential_fixed_points(build_preset("gasket")).size() == 3);

  FractalModel single;
  single.N = 1;
  single.alpha = 2;
  single.d = 2;
  single.maps.push_back({pt(0, 0), Eigen::MatrixXd::Identity(2, 2)});
  CHECK(essential_fixed_points(single).empty());
}

TEST_CASE("vicsek vertex counts follow V_{n+1} = 5 V_n - 4") {
  const auto m = build_preset("vicsek");
  std::size_t prev = 0;
  for (int n = 0; n <= 5; ++n) {
    const auto vs = vertex_set(m, n, 0);
    if (n == 0) {
      CHECK(vs.size() == 4);
      CHECK(vs.num_cells() == 1);
      for (std::size_t v = 0; v < vs.size(); ++v) CHECK(vs.cell_membership[v].size() == 1);
    } else {
      CHECK(vs.size() == 5 * prev - 4);
    }
    CHECK(vs.connected());
    prev = vs.size();
  }
  CHECK(vertex_set(m, 1, 0).size() == 16);
  CHECK(vertex_set(m, 3, 0).size() == 376);
}

TEST_CASE("cell membership is bounded and adjacency is cell sharing") {
  for (const std::string name : {"vicsek", "gasket"}) {
    const auto m = build_preset(name);
    const auto vs = vertex_set(m, 3, 1);
    CHECK(vs.connected());
    for (std::size_t v = 0; v < vs.size(); ++v) {
      CHECK(vs.cell_membership[v].size() >= 1);
      CHECK(vs.cell_membership[v].size() <= 2);
    }
    // each edge joins two corners of a common cell
    for (std::size_t u = 0; u < vs.size(); ++u)
      for (auto e = vs.adj_offsets[u]; e < vs.adj_offsets[u + 1]; ++e) {
        const auto w = vs.adj_targets[e];
        int shared = 0;
        for (auto c : vs.cell_membership[u])
          for (auto d : vs.cell_membership[w]) shared += c == d ? 1 : 0;
        CHECK(shared == static_cast<int>(vs.adj_weights[e]));
      }
  }
}

TEST_CASE("vertex lookup finds every vertex") {
  const auto vs = vertex_set(build_preset("vicsek"), 3, 0);
  for (std::size_t v = 0; v < vs.size(); ++v) CHECK(vs.find(vs.point(v)) == static_cast<std::uint32_t>(v));
  CHECK_FALSE(vs.find(pt(0.5, 0.5)).has_value());
}

TEST_CASE("measure weights") {
  const auto m = build_preset("vicsek");
  const auto w0 = measure_weights(vertex_set(m, 0, 0), m);
  for (Eigen::Index i = 0; i < w0.size(); ++i) CHECK(w0[i] == doctest::Approx(0.25));

  const auto vs1 = vertex_set(m, 1, 0);
  const auto w1 = measure_weights(vs1, m);
  CHECK(std::abs(w1.sum() - 1.0) < 1e-12);
  for (std::size_t v = 0; v < vs1.size(); ++v)
    CHECK(w1[static_cast<Eigen::Index>(v)] == doctest::Approx(vs1.cell_membership[v].size() / 20.0));

  const auto vs2 = vertex_set(m, 2, 1);
  CHECK(std::abs(measure_weights(vs2, m).sum() - 5.0) < 1e-12 * 5.0);

  const auto g = build_preset("gasket");
  for (int M = 0; M <= 2; ++M) {
    const auto vs = vertex_set(g, 3, M);
    CHECK(std::abs(measure_weights(vs, g).sum() - std::pow(g.alpha, M * g.d_f)) < 1e-12 * std::pow(3.0, M));
  }
}

TEST_CASE("mass of each depth-1 cell is 1/N") {
  const auto m = build_preset("vicsek");
  const auto vs = vertex_set(m, 3, 0);
  const auto cells_per_child = vs.num_cells() / 5;
  std::vector<double> share(5, 0.0);
  // a depth-3 cell's positional index starts with its depth-1 symbol
  for (std::size_t c = 0; c < vs.num_cells(); ++c) share[c / cells_per_child] += std::pow(5.0, -3);
  for (double s : share) CHECK(std::abs(s - 0.2) < 1e-12);
  // the same through the vertex weights: split shared vertices by cell
  const auto w = measure_weights(vs, m);
  std::vector<double> by_weight(5, 0.0);
  for (std::size_t v = 0; v < vs.size(); ++v)
    for (auto c : vs.cell_membership[v])
      by_weight[c / cells_per_child] += w[static_cast<Eigen::Index>(v)] / static_cast<double>(vs.cell_membership[v].size());
  for (double s : by_weight) CHECK(std::abs(s - 0.2) < 1e-12);
}

TEST_CASE("assumption 1 chains") {
  const auto v = check_assumption1(build_preset("vicsek"), 1, 2000);
  CHECK(v.max_chain >= 1);
  CHECK(v.max_chain <= 4);
  CHECK(v.vertex_pairs > 0);
  const auto g = check_assumption1(build_preset("gasket"), 1, 2000);
  CHECK(g.max_chain >= 1);
  CHECK(g.max_chain <= 3);
}

TEST_CASE("word indexing round trips") {
  for (std::uint64_t k = 0; k < 125; ++k) {
    const auto w = index_word(k, 3, 5);
    CHECK(word_index(w, 5) == k);
  }
}

TEST_CASE("model from JSON") {
  const std::string doc = R"({"name":"square","alpha":2,"d_s":2,
      "fixed_points":[[0,0],[1,0],[1,1],[0,1]]})";
  const auto m = model_from_json(doc);
  CHECK(m.N == 4);
  CHECK(m.d_f == doctest::Approx(2.0));
  CHECK(m.d_w == doctest::Approx(2.0));
  CHECK_FALSE(m.assumption1_k.has_value());
  CHECK(vertex_set(m, 2, 0).size() == 25);
  CHECK_THROWS_AS(model_from_json(R"({"alpha":2,"fixed_points":[[0,0],[1,0]]})"), ValidationError);
  CHECK_THROWS_AS(model_from_json("not json"), ValidationError);
}

TEST_CASE("vertices csv has one row per vertex") {
  const auto m = build_preset("vicsek");
  const auto vs = vertex_set(m, 1, 0);
  const auto csv = vertices_csv(vs, measure_weights(vs, m));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
  CHECK(csv.rfind("id,", 0) == 0);
}
