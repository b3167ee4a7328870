#pragma once

#include <cstdint>
#include <vector>

namespace sadl {

//! gamma_k = A / (k^beta + B), shifted by N.
class StepSchedule {
 public:
  StepSchedule(double A, double B, double beta, std::int64_t N = 0);

  double A() const { return A_; }
  double B() const { return B_; }
  double beta() const { return beta_; }
  std::int64_t N() const { return N_; }

  StepSchedule with_shift(std::int64_t N) const { return {A_, B_, beta_, N}; }

  //! Unshifted gamma_k, k >= 1.
  double gamma(std::int64_t k) const;
  //! gamma_k^N = gamma_{N+k}; needs N + k >= 1.
  double gamma_shifted(std::int64_t k) const;
  double bar_alpha() const;
  //! (sqrt(g_k) - sqrt(g_{k+1})) / g_{k+1}^{3/2} on the shifted sequence.
  double alpha_step(std::int64_t k) const;

 private:
  double A_, B_, beta_;
  std::int64_t N_;
};

struct TimeGrid {
  std::int64_t N = 0;
  double T = 0.0;
  std::vector<double> t;      // t_0 = 0, ..., t_M
  std::vector<double> steps;  // steps[k] = gamma^N_{k+1} = t_{k+1} - t_k
  std::size_t M = 0;

  double gamma_next(std::size_t k) const { return steps.at(k); }
};

//! Grid up to the first index with t_M >= T.
TimeGrid time_grid(const StepSchedule& s, double T);
//! Grid with exactly n_steps steps (T set to t_n).
TimeGrid time_grid_steps(const StepSchedule& s, std::size_t n_steps);

//! Neumaier running sum, used for grid times.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace sadl
