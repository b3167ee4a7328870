#pragma once

#include "sadl/mean_ode.hpp"
#include "sadl/truncation.hpp"

namespace sadl {

enum class FlowKind { limit, truncated };
//! Sign of the Jacobian term in the limit flow. minus: (bar-alpha I - Dh), the drift of
//! the limiting SDE; plus: (bar-alpha I + Dh), the other convention seen in print.
enum class JacobianSign { minus, plus };

//! theta_{t,s}(y): value at time t of the solution with value y at time s.
class FlowMap {
 public:
  FlowMap(const TruncatedDynamics& dyn, FlowKind kind, JacobianSign sign = JacobianSign::minus,
          double max_dt = 0.0);

  Vec operator()(double t, double s, const Vec& y) const;
  double eval1(double t, double s, double y) const { return (*this)(t, s, vec1(y))(0); }
  Vec rhs(double u, const Vec& theta) const;
  FlowKind kind() const { return kind_; }
  double max_dt() const { return max_dt_; }

 private:
  Vec rk4_segment(double u0, double u1, const Vec& y, std::size_t k) const;

  const TruncatedDynamics* dyn_;
  FlowKind kind_;
  JacobianSign sign_;
  double max_dt_;
};

//! sqrt(g_{k+1}) (-h(tb_k) - (tb_{k+1} - tb_k)/g_{k+1}) on the dynamics' grid.
Vec beta_defect(const TruncatedDynamics& dyn, std::size_t k);
Vec beta_defect(const ProblemModel& model, const MeanTrajectory& mean, const TimeGrid& grid, std::size_t k);

//! int_t^s R(theta-bar_u) du (composite Gauss-Legendre along the mean trajectory).
Mat sigma_bar(const ProblemModel& model, const MeanTrajectory& mean, double t, double s);

struct GaussianMoments {
  Vec mean;
  Mat cov;
};

//! Mean and covariance at time t of dX = C(u) X du + R^{1/2}(theta-bar_u) dB, X_0 = x0, where
//! C(u) = bar-alpha I - Dh(theta-bar_u) (or Dh(theta*) when stationary).
GaussianMoments limit_moments(const ProblemModel& model, const MeanTrajectory& mean, double bar_alpha,
                              const Vec& x0, double t, bool stationary = false, double dt = 1e-3);

}  // namespace sadl
