#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nfheat::geometry {

using Point = Eigen::VectorXd;

/// psi(x) = a + O (x - a) / alpha
struct Similitude {
  Point fixed_point;
  Eigen::MatrixXd orthogonal;  // identity for the presets

  Point apply(const Point& x, double alpha) const;
};

struct FractalModel {
  std::string name;
  int N = 0;
  double alpha = 0.0;
  int d = 0;
  std::vector<Similitude> maps;
  /// Essential fixed points as indices into `maps` (the map they are fixed by), in map order.
  std::vector<int> essential;
  std::optional<int> assumption1_k;
  double d_f = 0.0;
  double d_w = 0.0;
  double d_s = 0.0;
  double time_scale = 0.0;
  double diameter = 0.0;  // diam(E) = diam(F^(0))
  bool preset = false;    // uniform conductances are exact only for the shipped presets

  std::size_t boundary_size() const { return essential.size(); }
  Point boundary_point(std::size_t r) const { return maps[essential[r]].fixed_point; }
};

/// Fills d_f, d_w, time_scale, essential and diameter from maps, alpha and d_s.
void finalize_model(FractalModel& model);

FractalModel build_preset(const std::string& name);

/// JSON document: {"name":..., "alpha":..., "d_s":..., "fixed_points":[[..],..],
/// optional "orthogonal":[[[..]..],..], optional "assumption1_k"}.
FractalModel model_from_json(const std::string& text);

struct CellAddress {
  int blowup = 0;
  std::vector<int> word;  // symbols in 1..N

  std::size_t depth() const { return word.size(); }
};

/// alpha^M psi_{i_1} o ... o psi_{i_n}(x).
Point apply_word(const FractalModel& model, const CellAddress& addr, const Point& x);

/// Brute force over (x, j, y, k): x a fixed point, y a fixed point, j != k, psi_j(x) = psi_k(y).
/// Returns indices of maps whose fixed point is essential.
std::vector<int> essential_fixed_points(const FractalModel& model, double tol = 1e-9);

/// Positional index of a word: sum (i_j - 1) N^{n-j}.
std::uint64_t word_index(std::span<const int> word, int N);
std::vector<int> index_word(std::uint64_t index, std::size_t length, int N);

struct VertexSet {
  int level = 0;
  int blowup = 0;
  std::size_t corners = 0;  // |F^(0)|
  Eigen::MatrixXd points;   // V x d
  /// cell c occupies cell_vertices[c*corners .. (c+1)*corners), corner order = essential order.
  /// Cells are indexed by the positional value of their full (blowup + level) word.
  std::vector<std::uint32_t> cell_vertices;
  std::vector<std::vector<std::uint32_t>> cell_membership;
  /// CSR adjacency with multiplicity (number of shared cells) as edge weight.
  std::vector<std::uint32_t> adj_offsets;
  std::vector<std::uint32_t> adj_targets;
  std::vector<double> adj_weights;
  std::vector<std::uint32_t> boundary;  // images of F^(0) under x -> alpha^M x

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t num_cells() const { return cell_vertices.size() / corners; }
  Point point(std::size_t v) const { return points.row(static_cast<Eigen::Index>(v)).transpose(); }
  bool connected() const;
  /// Vertex id of the point within tol, if any (linear scan fallback is not used; spatial hash).
  std::optional<std::uint32_t> find(const Point& p) const;

  struct Lookup;
  std::shared_ptr<const Lookup> lookup;
};

inline constexpr std::uint64_t kDefaultCellBudget = 1ull << 24;

VertexSet vertex_set(const FractalModel& model, int n, int M,
                     std::uint64_t cell_budget = kDefaultCellBudget);

/// m_n(x): each depth-n cell carries N^{-n} (times N^M in total), split equally among its corners.
Eigen::VectorXd measure_weights(const VertexSet& vs, const FractalModel& model);

/// Pairs of vertices of the coarser level-m set (same blowup) that share a level-m cell,
/// expressed as ids in `fine`. Used by the Hoelder diagnostics.
struct ScalePairs {
  int level = 0;
  double mean_distance = 0.0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<double> distances;
};
std::vector<ScalePairs> adjacent_pairs_by_scale(const FractalModel& model, const VertexSet& fine);

struct Assumption1Result {
  int max_chain = 0;
  std::size_t pairs_checked = 0;
  std::size_t vertex_pairs = 0;
  std::size_t sampled_pairs = 0;
};

/// Shortest chains through F^(m) (consecutive points sharing a depth-m cell) for all vertex
/// pairs with |x - y| <= alpha^{-m} and for random interior pairs.
Assumption1Result check_assumption1(const FractalModel& model, int m, std::size_t samples,
                                    std::uint64_t seed = 1);

std::string vertices_csv(const VertexSet& vs, const Eigen::VectorXd& weights);

}  // namespace nfheat::geometry
