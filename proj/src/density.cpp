#include "sadl/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sadl/error.hpp"

namespace sadl {

Grid1D::Grid1D(double lo, double hi, std::size_t count) : x_min(lo), x_max(hi), n(count) {
  if (!(lo < hi)) throw ValidationError("Grid1D: need x_min < x_max");
  if (count < 64) throw ValidationError("Grid1D: need at least 64 points");
}

std::vector<double> Grid1D::points() const {
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = x(i);
  return p;
}

double DensityField::integral() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += grid.weight(i) * values[i];
  return acc;
}

double DensityField::boundary_mass() const {
  const std::size_t w = std::max<std::size_t>(1, grid.n / 50);
  double acc = 0.0;
  for (std::size_t i = 0; i < w; ++i) acc += grid.weight(i) * std::abs(values[i]);
  for (std::size_t i = grid.n - w; i < grid.n; ++i) acc += grid.weight(i) * std::abs(values[i]);
  return acc;
}

double DensityField::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double DensityField::min_value() const { return *std::min_element(values.begin(), values.end()); }

double normal_pdf(double var, double z) {
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

DensityField gaussian_field(const Grid1D& g, double mean, double var) {
  if (!(var > 0.0)) throw ValidationError("gaussian_field: variance must be positive");
  DensityField f(g, 0.0, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) f.values[i] = normal_pdf(var, g.x(i) - mean);
  return f;
}

}  // namespace sadl
