#include "nfheat/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "nfheat/error.hpp"

namespace nfheat::quad {

namespace {

template <unsigned P>
Rule gl() {
  using G = boost::math::quadrature::gauss<double, P>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  Rule r;
  // boost stores the nonnegative half; 0 is the first abscissa for odd P
  for (std::size_t i = x.size(); i-- > 0;) {
    if (x[i] == 0.0) continue;
    r.nodes.push_back(0.5 * (1.0 - x[i]));
    r.weights.push_back(0.5 * w[i]);
  }
  if (P % 2 == 1) {
    r.nodes.push_back(0.5);
    r.weights.push_back(0.5 * w[0]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) continue;
    r.nodes.push_back(0.5 * (1.0 + x[i]));
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

}  // namespace

Rule gauss_legendre(int order) {
  switch (order) {
    case 4: return gl<4>();
    case 6: return gl<6>();
    case 8: return gl<8>();
    case 10: return gl<10>();
    case 12: return gl<12>();
    case 16: return gl<16>();
    case 20: return gl<20>();
    case 24: return gl<24>();
    case 30: return gl<30>();
    default: throw ValidationError("unsupported Gauss-Legendre order " + std::to_string(order));
  }
}

Rule graded_rule(double t, double min_width, int order, double ratio) {
  if (!(t > 0.0)) throw ValidationError("graded_rule: interval length must be positive");
  if (!(ratio > 1.0)) throw ValidationError("graded_rule: ratio must exceed 1");
  const Rule base = gauss_legendre(order);
  std::vector<double> edges{0.0};
  double remaining = t;
  while (remaining > min_width && edges.size() < 200) {
    remaining /= ratio;
    edges.push_back(t - remaining);
  }
  edges.push_back(t);
  Rule r;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double a = edges[p], h = edges[p + 1] - edges[p];
    for (std::size_t q = 0; q < base.size(); ++q) {
      r.nodes.push_back(a + h * base.nodes[q]);
      r.weights.push_back(h * base.weights[q]);
    }
  }
  return r;
}

std::vector<double> lagrange_basis(const std::vector<double>& nodes, double x) {
  std::vector<double> l(nodes.size(), 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (j != i) l[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
  return l;
}

}  // namespace nfheat::quad
