#include "sadl/flows.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sadl/error.hpp"
#include "sadl/quadrature.hpp"

namespace sadl {

FlowMap::FlowMap(const TruncatedDynamics& dyn, FlowKind kind, JacobianSign sign, double max_dt)
    : dyn_(&dyn), kind_(kind), sign_(sign), max_dt_(max_dt) {
  if (max_dt_ <= 0.0) max_dt_ = std::min(1e-3, dyn.gamma(1) / 4.0);
}

Vec FlowMap::rhs(double u, const Vec& theta) const {
  if (kind_ == FlowKind::truncated) return dyn_->drift(dyn_->step_index(u), theta);
  const ProblemModel& m = dyn_->model();
  const Mat J = m.Dh(dyn_->mean()(u));
  const double sgn = sign_ == JacobianSign::minus ? -1.0 : 1.0;
  return dyn_->bar_alpha() * theta + sgn * (J * theta);
}

Vec FlowMap::rk4_segment(double u0, double u1, const Vec& y, std::size_t k) const {
  const double len = u1 - u0;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::abs(len) / max_dt_ - 1e-9)));
  const double h = len / static_cast<double>(n);
  Vec th = y;
  if (kind_ == FlowKind::truncated) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec k1 = dyn_->drift(k, th);
      const Vec k2 = dyn_->drift(k, th + 0.5 * h * k1);
      const Vec k3 = dyn_->drift(k, th + 0.5 * h * k2);
      const Vec k4 = dyn_->drift(k, th + h * k3);
      th += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = u0 + static_cast<double>(i) * h;
      const Vec k1 = rhs(u, th);
      const Vec k2 = rhs(u + 0.5 * h, th + 0.5 * h * k1);
      const Vec k3 = rhs(u + 0.5 * h, th + 0.5 * h * k2);
      const Vec k4 = rhs(u + h, th + h * k3);
      th += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  if (!th.allFinite()) throw NumericalError("flow: non-finite state");
  return th;
}

Vec FlowMap::operator()(double t, double s, const Vec& y) const {
  if (t == s) return y;
  if (std::min(t, s) < 0.0) throw ValidationError("flow: negative time");
  if (kind_ == FlowKind::limit) return rk4_segment(s, t, y, 0);
  // truncated: split at grid times, drift frozen on [t_k, t_{k+1})
  Vec th = y;
  if (t > s) {
    double u = s;
    while (u < t) {
      const std::size_t k = dyn_->step_index(u);
      const double next = (k < dyn_->grid().M) ? std::min(t, dyn_->t(k + 1)) : t;
      th = rk4_segment(u, next, th, k);
      u = next;
    }
  } else {
    double u = s;
    while (u > t) {
      // piece containing times just below u
      std::size_t k = dyn_->step_index(u);
      if (k > 0 && dyn_->t(k) >= u) --k;
      const double next = std::max(t, dyn_->t(k));
      th = rk4_segment(u, next, th, k);
      u = next;
    }
  }
  return th;
}

Vec beta_defect(const ProblemModel& model, const MeanTrajectory& mean, const TimeGrid& grid, std::size_t k) {
  if (k + 1 >= grid.t.size()) throw ValidationError("beta_defect: index beyond grid");
  const Vec a = mean(grid.t[k]);
  const Vec b = mean(grid.t[k + 1]);
  const double g = grid.steps[k];
  return std::sqrt(g) * (-model.h(a) - (b - a) / g);
}

Vec beta_defect(const TruncatedDynamics& dyn, std::size_t k) {
  if (k > dyn.grid().M) throw ValidationError("beta_defect: index beyond grid");
  const Vec& a = dyn.mean_at(k);
  const Vec& b = dyn.mean_at(k + 1);
  const double g = dyn.t(k + 1) - dyn.t(k);
  return std::sqrt(g) * (-dyn.model().h(a) - (b - a) / g);
}

Mat sigma_bar(const ProblemModel& model, const MeanTrajectory& mean, double t, double s) {
  if (t > s) throw ValidationError("sigma_bar: need t <= s");
  const int d = model.dim;
  Mat acc = Mat::Zero(d, d);
  if (t == s) return acc;
  const QuadRule& gl = gauss_legendre_unit(7);
  const auto& nodes = mean.times();
  double dt = nodes.size() > 1 ? nodes[1] - nodes[0] : s - t;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((s - t) / dt)));
  const double h = (s - t) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u0 = t + static_cast<double>(i) * h;
    for (std::size_t q = 0; q < gl.x.size(); ++q) acc += (h * gl.w[q]) * model.R(mean(u0 + h * gl.x[q]));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(acc);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("sigma_bar: result not positive definite");
  return acc;
}

GaussianMoments limit_moments(const ProblemModel& model, const MeanTrajectory& mean, double bar_alpha,
                              const Vec& x0, double t, bool stationary, double dt) {
  const int d = model.dim;
  const Mat I = Mat::Identity(d, d);
  auto C = [&](double u) -> Mat {
    return bar_alpha * I - model.Dh(stationary ? model.root : Vec(mean(u)));
  };
  auto Rm = [&](double u) -> Mat { return model.R(stationary ? model.root : Vec(mean(u))); };
  GaussianMoments g{x0, Mat::Zero(d, d)};
  if (t <= 0.0) return g;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt)));
  const double h = t / static_cast<double>(n);
  auto fm = [&](double u, const Vec& m) -> Vec { return C(u) * m; };
  auto fp = [&](double u, const Mat& P) -> Mat {
    const Mat c = C(u);
    return c * P + P * c.transpose() + Rm(u);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) * h;
    const Vec m1 = fm(u, g.mean);
    const Vec m2 = fm(u + 0.5 * h, g.mean + 0.5 * h * m1);
    const Vec m3 = fm(u + 0.5 * h, g.mean + 0.5 * h * m2);
    const Vec m4 = fm(u + h, g.mean + h * m3);
    const Mat p1 = fp(u, g.cov);
    const Mat p2 = fp(u + 0.5 * h, g.cov + 0.5 * h * p1);
    const Mat p3 = fp(u + 0.5 * h, g.cov + 0.5 * h * p2);
    const Mat p4 = fp(u + h, g.cov + h * p3);
    g.mean += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    g.cov += (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
  }
  return g;
}

}  // namespace sadl
