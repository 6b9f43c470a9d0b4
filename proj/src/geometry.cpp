#include "nfheat/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <nlohmann/json.hpp>

#include "nfheat/error.hpp"

namespace nfheat::geometry {

Point Similitude::apply(const Point& x, double alpha) const {
  return fixed_point + orthogonal * (x - fixed_point) / alpha;
}

namespace {

// Bucketed spatial hash. Buckets are much wider than the match tolerance, so a match can only
// sit in the bucket of the query or an immediate neighbour.
constexpr double kMatchTol = 1e-9;
constexpr double kBucket = 1e-6;

using Key = std::array<std::int64_t, 3>;
struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

Key key_of(const double* p, int d) {
  Key k{0, 0, 0};
  for (int i = 0; i < d; ++i) k[i] = static_cast<std::int64_t>(std::floor(p[i] / kBucket));
  return k;
}

}  // namespace

struct VertexSet::Lookup {
  int d = 0;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> buckets;

  // coord(v, i) returns coordinate i of stored vertex v
  template <class Coord>
  std::optional<std::uint32_t> find(const Coord& coord, const double* p) const {
    const Key base = key_of(p, d);
    std::array<int, 3> off{-1, -1, -1};
    for (int i = d; i < 3; ++i) off[i] = 0;
    while (true) {
      Key k = base;
      for (int i = 0; i < d; ++i) k[i] += off[i];
      auto it = buckets.find(k);
      if (it != buckets.end()) {
        for (auto v : it->second) {
          double dist = 0.0;
          for (int i = 0; i < d; ++i) dist = std::max(dist, std::abs(coord(v, i) - p[i]));
          if (dist <= kMatchTol) return v;
        }
      }
      int i = 0;
      while (i < d && off[i] == 1) off[i++] = -1;
      if (i == d) break;
      ++off[i];
    }
    return std::nullopt;
  }
};

std::optional<std::uint32_t> VertexSet::find(const Point& p) const {
  if (!lookup || p.size() != points.cols()) return std::nullopt;
  return lookup->find([this](std::uint32_t v, int i) { return points(v, i); }, p.data());
}

bool VertexSet::connected() const {
  const std::size_t V = size();
  if (V == 0) return false;
  std::vector<char> seen(V, 0);
  std::deque<std::uint32_t> queue{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    for (auto e = adj_offsets[u]; e < adj_offsets[u + 1]; ++e) {
      auto v = adj_targets[e];
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        queue.push_back(v);
      }
    }
  }
  return count == V;
}

Point apply_word(const FractalModel& model, const CellAddress& addr, const Point& x) {
  if (x.size() != model.d) throw ValidationError("apply_word: point dimension mismatch");
  Point y = x;
  for (auto it = addr.word.rbegin(); it != addr.word.rend(); ++it) {
    if (*it < 1 || *it > model.N) throw ValidationError("apply_word: symbol out of range");
    y = model.maps[*it - 1].apply(y, model.alpha);
  }
  return std::pow(model.alpha, addr.blowup) * y;
}

std::vector<int> essential_fixed_points(const FractalModel& model, double tol) {
  std::vector<int> out;
  const int N = model.N;
  for (int x = 0; x < N; ++x) {
    bool found = false;
    for (int j = 0; j < N && !found; ++j) {
      Point px = model.maps[j].apply(model.maps[x].fixed_point, model.alpha);
      for (int y = 0; y < N && !found; ++y) {
        for (int k = 0; k < N && !found; ++k) {
          if (j == k) continue;
          Point py = model.maps[k].apply(model.maps[y].fixed_point, model.alpha);
          if ((px - py).lpNorm<Eigen::Infinity>() <= tol) found = true;
        }
      }
    }
    if (found) out.push_back(x);
  }
  return out;
}

void finalize_model(FractalModel& model) {
  if (model.N < 1) throw ValidationError("model needs at least one map");
  if (!(model.alpha > 1.0)) throw ValidationError("alpha must exceed 1");
  if (!(model.d_s > 0.0)) throw ValidationError("d_s must be positive");
  for (auto& m : model.maps) {
    if (m.fixed_point.size() != model.d) throw ValidationError("fixed point dimension mismatch");
    if (m.orthogonal.size() == 0) m.orthogonal = Eigen::MatrixXd::Identity(model.d, model.d);
    if (m.orthogonal.rows() != model.d || m.orthogonal.cols() != model.d)
      throw ValidationError("orthogonal part has wrong shape");
    Eigen::MatrixXd g = m.orthogonal.transpose() * m.orthogonal;
    if ((g - Eigen::MatrixXd::Identity(model.d, model.d)).lpNorm<Eigen::Infinity>() > 1e-10)
      throw ValidationError("orthogonal part is not orthogonal");
  }
  model.d_f = std::log(static_cast<double>(model.N)) / std::log(model.alpha);
  model.d_w = 2.0 * model.d_f / model.d_s;
  model.time_scale = std::pow(model.alpha, model.d_w);
  model.essential = essential_fixed_points(model);
  model.diameter = 0.0;
  for (std::size_t a = 0; a < model.essential.size(); ++a)
    for (std::size_t b = a + 1; b < model.essential.size(); ++b)
      model.diameter = std::max(model.diameter, (model.boundary_point(a) - model.boundary_point(b)).norm());
}

FractalModel build_preset(const std::string& name) {
  FractalModel m;
  m.name = name;
  m.d = 2;
  m.preset = true;
  auto pt = [](double x, double y) {
    Point p(2);
    p << x, y;
    return p;
  };
  if (name == "vicsek") {
    m.N = 5;
    m.alpha = 3.0;
    for (auto p : {pt(0, 0), pt(0, 1), pt(1, 1), pt(1, 0), pt(0.5, 0.5)})
      m.maps.push_back({p, Eigen::MatrixXd::Identity(2, 2)});
    m.d_s = std::log(25.0) / std::log(15.0);
    m.assumption1_k = 4;
  } else if (name == "gasket") {
    m.N = 3;
    m.alpha = 2.0;
    for (auto p : {pt(0, 0), pt(1, 0), pt(0.5, std::sqrt(3.0) / 2.0)})
      m.maps.push_back({p, Eigen::MatrixXd::Identity(2, 2)});
    m.d_s = std::log(9.0) / std::log(5.0);
    m.assumption1_k = 3;
  } else {
    throw ValidationError("unknown preset '" + name + "' (expected vicsek or gasket)");
  }
  finalize_model(m);
  return m;
}

FractalModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("IFS document is not valid JSON: ") + e.what());
  }
  FractalModel m;
  try {
    m.name = j.value("name", std::string("custom"));
    m.alpha = j.at("alpha").get<double>();
    if (!j.contains("d_s")) throw ValidationError("IFS document must supply d_s");
    m.d_s = j.at("d_s").get<double>();
    auto fps = j.at("fixed_points");
    if (!fps.is_array() || fps.empty()) throw ValidationError("fixed_points must be a nonempty list");
    m.N = static_cast<int>(fps.size());
    m.d = static_cast<int>(fps[0].size());
    if (m.d < 1 || m.d > 3) throw ValidationError("ambient dimension must be 1..3");
    for (std::size_t i = 0; i < fps.size(); ++i) {
      auto v = fps[i].get<std::vector<double>>();
      if (static_cast<int>(v.size()) != m.d) throw ValidationError("fixed points differ in dimension");
      Similitude s;
      s.fixed_point = Eigen::Map<Point>(v.data(), m.d);
      if (j.contains("orthogonal")) {
        auto rows = j.at("orthogonal").at(i).get<std::vector<std::vector<double>>>();
        s.orthogonal.resize(m.d, m.d);
        if (static_cast<int>(rows.size()) != m.d) throw ValidationError("orthogonal part has wrong shape");
        for (int r = 0; r < m.d; ++r) {
          if (static_cast<int>(rows[r].size()) != m.d) throw ValidationError("orthogonal part has wrong shape");
          for (int c = 0; c < m.d; ++c) s.orthogonal(r, c) = rows[r][c];
        }
      }
      m.maps.push_back(s);
    }
    if (j.contains("assumption1_k")) m.assumption1_k = j.at("assumption1_k").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed IFS document: ") + e.what());
  }
  finalize_model(m);
  if (m.essential.size() < 2) throw ValidationError("IFS has fewer than two essential fixed points");
  return m;
}

std::uint64_t word_index(std::span<const int> word, int N) {
  std::uint64_t k = 0;
  for (int s : word) k = k * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(s - 1);
  return k;
}

std::vector<int> index_word(std::uint64_t index, std::size_t length, int N) {
  std::vector<int> w(length);
  for (std::size_t j = length; j-- > 0;) {
    w[j] = static_cast<int>(index % static_cast<std::uint64_t>(N)) + 1;
    index /= static_cast<std::uint64_t>(N);
  }
  return w;
}

VertexSet vertex_set(const FractalModel& model, int n, int M, std::uint64_t cell_budget) {
  if (n < 0 || M < 0) throw ValidationError("vertex_set: level and blowup must be nonnegative");
  if (model.essential.empty()) throw ValidationError("vertex_set: model has no essential fixed points");
  const int L = n + M;
  const double lcells = L * std::log(static_cast<double>(model.N));
  if (lcells > std::log(static_cast<double>(cell_budget)))
    throw ValidationError("vertex_set: level too large for the memory budget");
  std::uint64_t ncells = 1;
  for (int i = 0; i < L; ++i) ncells *= static_cast<std::uint64_t>(model.N);

  VertexSet vs;
  vs.level = n;
  vs.blowup = M;
  vs.corners = model.essential.size();
  const int d = model.d;
  auto lookup = std::make_shared<VertexSet::Lookup>();
  lookup->d = d;
  std::vector<double> coords;
  std::vector<std::uint32_t> cell_vertices;
  cell_vertices.reserve(ncells * vs.corners);

  const double scale = std::pow(model.alpha, M);
  std::vector<Eigen::MatrixXd> A(model.N);
  std::vector<Point> b(model.N);
  for (int i = 0; i < model.N; ++i) {
    A[i] = model.maps[i].orthogonal / model.alpha;
    b[i] = model.maps[i].fixed_point - A[i] * model.maps[i].fixed_point;
  }
  std::vector<Point> corners;
  for (std::size_t r = 0; r < vs.corners; ++r) corners.push_back(model.boundary_point(r));

  auto insert = [&](const Point& p) -> std::uint32_t {
    auto coord = [&](std::uint32_t v, int i) { return coords[static_cast<std::size_t>(v) * d + i]; };
    if (auto hit = lookup->find(coord, p.data())) return *hit;
    auto id = static_cast<std::uint32_t>(coords.size() / d);
    for (int i = 0; i < d; ++i) coords.push_back(p[i]);
    lookup->buckets[key_of(p.data(), d)].push_back(id);
    return id;
  };

  // Depth-first over words in positional order; (Aw, bw) is the affine form of psi_w.
  std::function<void(int, const Eigen::MatrixXd&, const Point&)> rec =
      [&](int depth, const Eigen::MatrixXd& Aw, const Point& bw) {
        if (depth == L) {
          for (const auto& c : corners) cell_vertices.push_back(insert(scale * (Aw * c + bw)));
          return;
        }
        for (int i = 0; i < model.N; ++i) rec(depth + 1, Aw * A[i], Aw * b[i] + bw);
      };
  rec(0, Eigen::MatrixXd::Identity(d, d), Point::Zero(d));

  const std::size_t V = coords.size() / d;
  vs.points.resize(static_cast<Eigen::Index>(V), d);
  for (std::size_t v = 0; v < V; ++v)
    for (int i = 0; i < d; ++i) vs.points(static_cast<Eigen::Index>(v), i) = coords[v * d + i];
  vs.cell_vertices = std::move(cell_vertices);
  vs.lookup = lookup;

  vs.cell_membership.assign(V, {});
  for (std::size_t c = 0; c < ncells; ++c)
    for (std::size_t r = 0; r < vs.corners; ++r)
      vs.cell_membership[vs.cell_vertices[c * vs.corners + r]].push_back(static_cast<std::uint32_t>(c));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(ncells * vs.corners * (vs.corners - 1));
  for (std::size_t c = 0; c < ncells; ++c) {
    const auto* cv = &vs.cell_vertices[c * vs.corners];
    for (std::size_t a = 0; a < vs.corners; ++a)
      for (std::size_t b2 = 0; b2 < vs.corners; ++b2)
        if (a != b2 && cv[a] != cv[b2]) edges.emplace_back(cv[a], cv[b2]);
  }
  std::sort(edges.begin(), edges.end());
  vs.adj_offsets.assign(V + 1, 0);
  for (std::size_t e = 0; e < edges.size();) {
    std::size_t f = e;
    while (f < edges.size() && edges[f] == edges[e]) ++f;
    vs.adj_targets.push_back(edges[e].second);
    vs.adj_weights.push_back(static_cast<double>(f - e));
    vs.adj_offsets[edges[e].first + 1]++;
    e = f;
  }
  std::partial_sum(vs.adj_offsets.begin(), vs.adj_offsets.end(), vs.adj_offsets.begin());

  for (const auto& c : corners) {
    auto id = vs.find(scale * c);
    if (!id) throw ComputationError("vertex_set: outer boundary point missing");
    vs.boundary.push_back(*id);
  }
  return vs;
}

Eigen::VectorXd measure_weights(const VertexSet& vs, const FractalModel& model) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vs.size()));
  const double share = std::pow(static_cast<double>(model.N), -vs.level) / static_cast<double>(vs.corners);
  for (std::size_t v = 0; v < vs.size(); ++v)
    w[static_cast<Eigen::Index>(v)] = share * static_cast<double>(vs.cell_membership[v].size());
  return w;
}

std::vector<ScalePairs> adjacent_pairs_by_scale(const FractalModel& model, const VertexSet& fine) {
  std::vector<ScalePairs> out;
  for (int m = 0; m <= fine.level; ++m) {
    VertexSet coarse = vertex_set(model, m, fine.blowup);
    ScalePairs sp;
    sp.level = m;
    std::vector<std::uint32_t> map(coarse.size());
    for (std::size_t v = 0; v < coarse.size(); ++v) {
      auto id = fine.find(coarse.point(v));
      if (!id) throw ComputationError("coarse vertex not found in fine vertex set");
      map[v] = *id;
    }
    double total = 0.0;
    for (std::size_t u = 0; u < coarse.size(); ++u) {
      for (auto e = coarse.adj_offsets[u]; e < coarse.adj_offsets[u + 1]; ++e) {
        auto v = coarse.adj_targets[e];
        if (v <= u) continue;
        double dist = (coarse.point(u) - coarse.point(v)).norm();
        sp.pairs.emplace_back(map[u], map[v]);
        sp.distances.push_back(dist);
        total += dist;
      }
    }
    sp.mean_distance = sp.pairs.empty() ? 0.0 : total / static_cast<double>(sp.pairs.size());
    out.push_back(std::move(sp));
  }
  return out;
}

namespace {

std::vector<std::vector<int>> all_pairs_hops(const VertexSet& vs) {
  const std::size_t V = vs.size();
  std::vector<std::vector<int>> dist(V, std::vector<int>(V, -1));
  for (std::size_t s = 0; s < V; ++s) {
    auto& d = dist[s];
    std::deque<std::uint32_t> q{static_cast<std::uint32_t>(s)};
    d[s] = 0;
    while (!q.empty()) {
      auto u = q.front();
      q.pop_front();
      for (auto e = vs.adj_offsets[u]; e < vs.adj_offsets[u + 1]; ++e) {
        auto v = vs.adj_targets[e];
        if (d[v] < 0) {
          d[v] = d[u] + 1;
          q.push_back(v);
        }
      }
    }
  }
  return dist;
}

}  // namespace

Assumption1Result check_assumption1(const FractalModel& model, int m, std::size_t samples,
                                    std::uint64_t seed) {
  VertexSet vs = vertex_set(model, m, 0);
  if (vs.size() > 5000) throw ValidationError("check_assumption1: level too large for all-pairs search");
  auto hops = all_pairs_hops(vs);
  const double radius = std::pow(model.alpha, -m) * model.diameter * (1.0 + 1e-12);
  Assumption1Result res;
  res.max_chain = 1;  // x = y

  for (std::size_t x = 0; x < vs.size(); ++x) {
    for (std::size_t y = x + 1; y < vs.size(); ++y) {
      if ((vs.point(x) - vs.point(y)).norm() > radius) continue;
      if (hops[x][y] < 0) throw ComputationError("check_assumption1: no chain exists");
      res.max_chain = std::max(res.max_chain, hops[x][y] + 1);
      ++res.vertex_pairs;
    }
  }

  // Random points deep inside depth-m cells: generic points of E.
  boost::random::mt19937_64 rng(seed);
  boost::random::uniform_int_distribution<int> sym(1, model.N);
  boost::random::uniform_int_distribution<std::size_t> corner(0, vs.corners - 1);
  const int extra = 14;
  std::vector<Point> pts;
  std::vector<std::uint64_t> cell;
  for (std::size_t s = 0; s < samples; ++s) {
    CellAddress a;
    for (int j = 0; j < m + extra; ++j) a.word.push_back(sym(rng));
    pts.push_back(apply_word(model, a, model.boundary_point(corner(rng))));
    cell.push_back(word_index(std::span<const int>(a.word.data(), static_cast<std::size_t>(m)), model.N));
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if ((pts[i] - pts[j]).norm() > radius) continue;
      ++res.sampled_pairs;
      int l = 2;
      if (cell[i] != cell[j]) {
        int best = -1;
        for (std::size_t a = 0; a < vs.corners; ++a)
          for (std::size_t b = 0; b < vs.corners; ++b) {
            int h = hops[vs.cell_vertices[cell[i] * vs.corners + a]][vs.cell_vertices[cell[j] * vs.corners + b]];
            if (h >= 0 && (best < 0 || h < best)) best = h;
          }
        if (best < 0) throw ComputationError("check_assumption1: no chain exists");
        l = best + 3;
      }
      res.max_chain = std::max(res.max_chain, l);
    }
  }
  res.pairs_checked = res.vertex_pairs + res.sampled_pairs;
  return res;
}

std::string vertices_csv(const VertexSet& vs, const Eigen::VectorXd& weights) {
  std::ostringstream os;
  os << "id";
  for (Eigen::Index i = 0; i < vs.points.cols(); ++i) os << ",x" << i;
  os << ",weight\n";
  char buf[64];
  for (std::size_t v = 0; v < vs.size(); ++v) {
    os << v;
    for (Eigen::Index i = 0; i < vs.points.cols(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", vs.points(static_cast<Eigen::Index>(v), i));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", weights[static_cast<Eigen::Index>(v)]);
    os << buf;
  }
  return os.str();
}

}  // namespace nfheat::geometry
