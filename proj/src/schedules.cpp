#include "sadl/schedules.hpp"

#include <cmath>
#include <string>

#include "sadl/error.hpp"

namespace sadl {

StepSchedule::StepSchedule(double A, double B, double beta, std::int64_t N)
    : A_(A), B_(B), beta_(beta), N_(N) {
  if (!(A > 0.0) || !std::isfinite(A)) throw ValidationError("schedule: A must be positive");
  if (!(B >= 0.0) || !std::isfinite(B)) throw ValidationError("schedule: B must be nonnegative");
  if (!(beta > 0.5 && beta <= 1.0))
    throw ValidationError("schedule: beta must lie in (1/2, 1], got " + std::to_string(beta));
  if (N < 0) throw ValidationError("schedule: N must be nonnegative");
}

double StepSchedule::gamma(std::int64_t k) const {
  if (k < 1) throw ValidationError("gamma: index must be >= 1, got " + std::to_string(k));
  const double kb = beta_ == 1.0 ? static_cast<double>(k) : std::exp(beta_ * std::log(static_cast<double>(k)));
  return A_ / (kb + B_);
}

double StepSchedule::gamma_shifted(std::int64_t k) const { return gamma(N_ + k); }

double StepSchedule::bar_alpha() const {
  if (beta_ < 1.0) return 0.0;
  return 1.0 / (2.0 * A_ * (B_ + 1.0));
}

double StepSchedule::alpha_step(std::int64_t k) const {
  const double g0 = gamma_shifted(k);
  const double g1 = gamma_shifted(k + 1);
  // sqrt(g0) - sqrt(g1) written as a quotient to avoid cancellation at large k
  const double num = (g0 - g1) / (std::sqrt(g0) + std::sqrt(g1));
  return num / (g1 * std::sqrt(g1));
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

TimeGrid time_grid(const StepSchedule& s, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("time_grid: T must be positive");
  TimeGrid g;
  g.N = s.N();
  g.T = T;
  g.t.push_back(0.0);
  CompensatedSum acc;
  std::int64_t k = 0;
  while (g.t.back() < T) {
    const double gk = s.gamma_shifted(k + 1);
    g.steps.push_back(gk);
    acc.add(gk);
    g.t.push_back(acc.value());
    ++k;
    if (k > 2'000'000'000LL) throw NumericalError("time_grid: horizon not reached");
  }
  g.M = g.t.size() - 1;
  return g;
}

TimeGrid time_grid_steps(const StepSchedule& s, std::size_t n_steps) {
  if (n_steps == 0) throw ValidationError("time_grid_steps: need at least one step");
  TimeGrid g;
  g.N = s.N();
  g.t.reserve(n_steps + 1);
  g.t.push_back(0.0);
  CompensatedSum acc;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double gk = s.gamma_shifted(static_cast<std::int64_t>(k) + 1);
    g.steps.push_back(gk);
    acc.add(gk);
    g.t.push_back(acc.value());
  }
  g.T = g.t.back();
  g.M = n_steps;
  return g;
}

}  // namespace sadl
