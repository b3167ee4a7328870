#pragma once

#include <vector>

#include "sadl/model.hpp"
#include "sadl/types.hpp"

namespace sadl {

//! RK4 solution of d theta/dt = -h(theta) on a uniform grid, with cubic Hermite
//! interpolation (node derivatives are -h, so the interpolant is C^1).
class MeanTrajectory {
 public:
  MeanTrajectory() = default;
  MeanTrajectory(std::vector<double> times, std::vector<Vec> values, std::vector<Vec> slopes);

  Vec operator()(double t) const;
  double t_end() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec>& values() const { return values_; }
  const Vec& initial() const { return values_.front(); }
  bool empty() const { return times_.empty(); }

 private:
  std::vector<double> times_;
  std::vector<Vec> values_;
  std::vector<Vec> slopes_;
  double dt_ = 0.0;
};

MeanTrajectory solve_mean_ode(const ProblemModel& m, const Vec& theta0, double t_end, double dt = 1e-3);

}  // namespace sadl
