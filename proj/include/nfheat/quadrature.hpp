#pragma once

#include <vector>

namespace nfheat::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule on [0, 1]. Supported orders: 4, 6, 8, 10, 12, 16, 20, 24, 30.
Rule gauss_legendre(int order);

/// Composite Gauss-Legendre rule on [0, t]. Panel widths shrink by `ratio` toward s = t until
/// the last panel is no wider than min_width.
Rule graded_rule(double t, double min_width, int order, double ratio = 2.0);

/// Lagrange basis polynomials of the nodes, evaluated at x.
std::vector<double> lagrange_basis(const std::vector<double>& nodes, double x);

}  // namespace nfheat::quad
