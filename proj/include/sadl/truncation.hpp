#pragma once

#include <memory>
#include <vector>

#include "sadl/mean_ode.hpp"
#include "sadl/model.hpp"
#include "sadl/schedules.hpp"
#include "sadl/types.hpp"

namespace sadl {

//! Unit bump exp(-1/(s(1-s))) on (0, 1), zero elsewhere.
double unit_bump(double s);
//! Integral of the unit bump over (0, 1), composite Gauss-Legendre.
double unit_bump_integral();
//! Normalized cumulative bump Phi(v) = k * int_0^v bump; piecewise Chebyshev interpolant.
double bump_cdf(double v);
//! Same quantity by direct quadrature (slow, kept as a reference).
double bump_cdf_quadrature(double v);

struct TruncationParams {
  double a = 0.0;
  double bump_norm = 0.0;
  std::int64_t N = 0;

  //! a_N = ln(1/gamma_1^N); requires gamma_1^N < 1/e.
  static TruncationParams from_schedule(const StepSchedule& s);
  //! Normalizer computed on [a, a+1] directly, for the invariance check.
  static double bump_norm_on_interval(double a);

  double phi(double u) const;
  double phi_quadrature(double u) const;
  Vec chi(const Vec& x) const;
  double chi1(double x) const;
};

//! F_N, G_N and the truncated drift F_N(t_k, x) chi_N(x) along one time grid.
class TruncatedDynamics {
 public:
  TruncatedDynamics(const ProblemModel& model, const StepSchedule& schedule, const MeanTrajectory& mean,
                    double T);

  const ProblemModel& model() const { return model_; }
  const StepSchedule& schedule() const { return schedule_; }
  const TruncationParams& params() const { return params_; }
  const TimeGrid& grid() const { return grid_; }
  const MeanTrajectory& mean() const { return mean_; }
  double a() const { return params_.a; }

  //! index k with t_k <= t < t_{k+1}, clamped to [0, M]
  std::size_t step_index(double t) const;
  double t(std::size_t k) const { return grid_t_[k]; }
  double gamma(std::size_t k) const { return gam_[k]; }  // gamma_k^N, k >= 0
  double alpha(std::size_t k) const { return alpha_[k]; }
  const Vec& mean_at(std::size_t k) const { return mean_at_[k]; }
  double bar_alpha() const { return bar_alpha_; }

  Mat F(std::size_t k, const Vec& x) const;
  Mat G(std::size_t k, const Vec& x) const;
  //! F(k, x) chi(x), evaluated through the exact secant form of the Dh integral.
  Vec drift(std::size_t k, const Vec& x) const;
  double drift1(std::size_t k, double x) const;
  //! G(k, x) x, same secant form.
  Vec untruncated_drift(std::size_t k, const Vec& x) const;
  //! theta-bar(t_k) + sqrt(gamma_k) chi(x): where the chain evaluates the noise.
  Vec noise_point(std::size_t k, const Vec& x) const;

 private:
  Mat integrated_jacobian(std::size_t k, const Vec& v) const;

  ProblemModel model_;
  StepSchedule schedule_;
  MeanTrajectory mean_;
  TruncationParams params_;
  TimeGrid grid_;
  std::vector<double> grid_t_;   // t_0..t_{M+1}
  std::vector<double> gam_;      // gamma_0..gamma_{M+2}
  std::vector<double> alpha_;    // alpha_0..alpha_{M+1}
  std::vector<Vec> mean_at_;     // theta-bar(t_k), k <= M+1
  std::vector<Vec> h_mean_;      // h(theta-bar(t_k))
  std::vector<double> sqrt_gam_;
  std::vector<double> inner_coef_;  // sqrt(gamma_k / gamma_{k+1}) / sqrt(gamma_k)
  double bar_alpha_ = 0.0;
};

//! Solves the mean ODE far enough for the grid of (schedule, T) and builds the dynamics.
TruncatedDynamics build_dynamics(const ProblemModel& model, const StepSchedule& schedule, const Vec& theta0,
                                 double T, double mean_dt = 1e-3);

}  // namespace sadl
