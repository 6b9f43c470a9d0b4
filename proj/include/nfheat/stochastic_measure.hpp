#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfheat/geometry.hpp"

namespace nfheat::measure {

enum class BaseKind { gaussian_white, symmetric_stable, atomic_series };

/// Stochastic measure on (0,1]. The atomic kind puts xi_n = s_n c_n at x_n with random signs
/// s_n; it has atoms and exists for testing.
struct BaseSM {
  BaseKind kind = BaseKind::gaussian_white;
  std::uint64_t seed = 0;
  double stability = 1.5;
  std::vector<double> atom_positions;
  std::vector<double> atom_coefficients;
  bool random_signs = true;

  bool atomless() const { return kind != BaseKind::atomic_series; }
  std::string describe() const;
};

/// "gaussian", "stable:<index>", "atomic:<count>"; atom positions come from the seed and the
/// coefficients are 2^{-n}.
BaseSM parse_base(const std::string& spec, std::uint64_t seed);

struct Interval {
  std::uint64_t k = 1;  // 1-based position
  double a = 0.0, b = 1.0;
};

/// Blow-up-local word (i_1..i_n) -> ((k-1)N^{-n}, k N^{-n}], k = 1 + sum (i_j - 1) N^{n-j}.
Interval address_to_interval(const geometry::CellAddress& addr, const geometry::FractalModel& model);

enum class AnchorRule { first_fixed_point, last_fixed_point };

/// Masses of all cells of alpha^M E down to a depth. Component j (the cells of depth M) carries
/// an independent copy of the base measure times weight j. Levels up to stored_depth are held in
/// memory; deeper levels are regenerated on demand from per-node random streams, so every cell
/// has one fixed value.
class MeasureRealization {
 public:
  static MeasureRealization realize(const BaseSM& base, const geometry::FractalModel& model, int M, int n_max,
                                    std::vector<double> component_weights = {}, int stored_depth = -1);
  static MeasureRealization zero(const geometry::FractalModel& model, int M, int n_max);

  /// 2^{-(j-1)} for j = 1..N^M
  static std::vector<double> default_weights(std::size_t components);

  int N() const { return N_; }
  std::string model_name() const { return model_name_; }
  int blowup() const { return blowup_; }
  int max_depth() const { return max_depth_; }
  int stored_depth() const { return stored_depth_; }
  bool streamable() const { return streamable_; }
  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& component_weights() const { return weights_; }
  const BaseSM& base() const { return base_; }

  /// Full word: M blow-up symbols followed by the local word.
  double mass(const geometry::CellAddress& addr) const;
  double mass(std::size_t component, int depth, std::uint64_t index) const;
  double total_mass() const;

  /// fn(component, index, mass) for every cell at local depth `depth`, in positional order.
  void for_each_cell(int depth, const std::function<void(std::size_t, std::uint64_t, double)>& fn) const;
  /// Masses at local depth, flattened as component * N^depth + index.
  std::vector<double> level_masses(int depth) const;
  /// sum_k mass(cell_k)^2 over local depths 0..depth (streams past the stored depth).
  std::vector<double> sum_squares_by_depth(int depth) const;

  /// Cell-wise linear combination a*this + b*other (same shape); the result is fully stored.
  MeasureRealization combine(double a, const MeasureRealization& other, double b) const;
  MeasureRealization scaled(double a) const { return combine(a, *this, 0.0); }

  std::string to_json() const;
  static MeasureRealization from_json(const std::string& text, const geometry::FractalModel& model);

 private:
  void children(std::size_t component, int depth, std::uint64_t index, double raw, double* out) const;
  double raw_root(std::size_t component) const;
  double raw_mass(std::size_t component, int depth, std::uint64_t index) const;

  int N_ = 0;
  std::string model_name_;
  int blowup_ = 0;
  int max_depth_ = 0;
  int stored_depth_ = 0;
  bool streamable_ = true;
  BaseSM base_;
  std::vector<double> weights_;
  std::vector<std::vector<std::vector<double>>> raw_;  // [component][depth][index]
};

/// sum over depth-n cells of g(anchor) * mass; anchor is the cell's image of the first (or last)
/// essential fixed point.
double integrate(const std::function<double(const geometry::Point&)>& g, const MeasureRealization& real,
                 const geometry::FractalModel& model, int n, AnchorRule rule = AnchorRule::first_fixed_point);

geometry::Point anchor_point(const geometry::FractalModel& model, int blowup, std::size_t component,
                             int depth, std::uint64_t index, AnchorRule rule);

/// Partial sums of sum_l (int g_l dmu)^2, each integral evaluated at depth n.
std::vector<double> lemma22_diagnostic(const std::vector<std::function<double(const geometry::Point&)>>& family,
                                       const MeasureRealization& real, const geometry::FractalModel& model, int n);

/// Same partial sums for the family {alpha^{-l beta} 1_C : C a depth-l cell, l = 1..L}, grouped by l.
/// The integral of an indicator of a depth-l cell is the mass of that cell.
std::vector<double> cell_family_partial_sums(const MeasureRealization& real, const geometry::FractalModel& model,
                                             int L, double beta);

struct Plateau {
  double relative_increment = 0.0;  // (P_L - P_{L/2}) / P_L
  bool flat = false;
};
Plateau plateau(const std::vector<double>& partial_sums, double threshold = 0.01);

}  // namespace nfheat::measure
