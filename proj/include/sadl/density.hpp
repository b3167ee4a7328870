#pragma once

#include <cstddef>
#include <vector>

namespace sadl {

struct Grid1D {
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t n = 2048;

  Grid1D() = default;
  Grid1D(double lo, double hi, std::size_t count);

  double dx() const { return (x_max - x_min) / static_cast<double>(n - 1); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  //! trapezoid weight
  double weight(std::size_t i) const { return (i == 0 || i + 1 == n) ? 0.5 * dx() : dx(); }
  std::vector<double> points() const;
  bool operator==(const Grid1D& o) const { return x_min == o.x_min && x_max == o.x_max && n == o.n; }
};

struct DensityField {
  Grid1D grid;
  double s = 0.0;
  double t = 0.0;
  std::vector<double> values;

  DensityField() = default;
  DensityField(const Grid1D& g, double s0, double t0) : grid(g), s(s0), t(t0), values(g.n, 0.0) {}

  double integral() const;
  //! mass on the outermost n/50 cells of each side
  double boundary_mass() const;
  double sup_norm() const;
  double min_value() const;
};

double normal_pdf(double var, double z);
DensityField gaussian_field(const Grid1D& g, double mean, double var);

}  // namespace sadl
