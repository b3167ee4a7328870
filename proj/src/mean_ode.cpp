#include "sadl/mean_ode.hpp"

#include <cmath>
#include <string>

#include "sadl/error.hpp"

namespace sadl {

MeanTrajectory::MeanTrajectory(std::vector<double> times, std::vector<Vec> values, std::vector<Vec> slopes)
    : times_(std::move(times)), values_(std::move(values)), slopes_(std::move(slopes)) {
  if (times_.size() < 2) throw ValidationError("MeanTrajectory: need at least two nodes");
  dt_ = times_[1] - times_[0];
}

Vec MeanTrajectory::operator()(double t) const {
  if (times_.empty()) throw ValidationError("mean trajectory unavailable: solve the mean ODE first");
  if (t < 0.0 || t > times_.back() * (1 + 1e-12) + 1e-14)
    throw ValidationError("mean trajectory: t = " + std::to_string(t) + " outside [0, " +
                          std::to_string(times_.back()) + "]");
  std::size_t i = static_cast<std::size_t>(t / dt_);
  if (i >= times_.size() - 1) i = times_.size() - 2;
  // guard the uniform-index guess against rounding near nodes
  while (i > 0 && t < times_[i]) --i;
  while (i + 2 < times_.size() && t > times_[i + 1]) ++i;
  const double h = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * values_[i] + (h10 * h) * slopes_[i] + h01 * values_[i + 1] + (h11 * h) * slopes_[i + 1];
}

MeanTrajectory solve_mean_ode(const ProblemModel& m, const Vec& theta0, double t_end, double dt) {
  if (!(dt > 0.0)) throw ValidationError("solve_mean_ode: dt must be positive");
  if (!(t_end > 0.0)) throw ValidationError("solve_mean_ode: T must be positive");
  if (theta0.size() != m.dim) throw ValidationError("solve_mean_ode: theta0 has wrong dimension");
  const std::size_t n = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9)) + 1;
  std::vector<double> times(n + 1);
  std::vector<Vec> values(n + 1), slopes(n + 1);
  auto f = [&](const Vec& th) -> Vec { return -m.h(th); };
  Vec th = theta0;
  for (std::size_t i = 0; i <= n; ++i) {
    times[i] = static_cast<double>(i) * dt;
    values[i] = th;
    slopes[i] = f(th);
    if (!th.allFinite())
      throw NumericalError("solve_mean_ode: non-finite state at t = " + std::to_string(times[i]));
    if (i == n) break;
    const Vec k1 = slopes[i];
    const Vec k2 = f(th + 0.5 * dt * k1);
    const Vec k3 = f(th + 0.5 * dt * k2);
    const Vec k4 = f(th + dt * k3);
    th = th + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return MeanTrajectory(std::move(times), std::move(values), std::move(slopes));
}

}  // namespace sadl
