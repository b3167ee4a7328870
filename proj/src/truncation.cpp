#include "sadl/truncation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "sadl/error.hpp"
#include "sadl/quadrature.hpp"

namespace sadl {

double unit_bump(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return std::exp(-1.0 / (s * (1.0 - s)));
}

namespace {
// composite Gauss-Legendre; adaptive rules stall where the bump underflows
template <class F>
double composite_gl(const F& f, double lo, double hi) {
  const QuadRule& gl = gauss_legendre_unit(20);
  constexpr int kPieces = 64;
  const double h = (hi - lo) / kPieces;
  double acc = 0.0;
  for (int i = 0; i < kPieces; ++i)
    for (std::size_t q = 0; q < gl.x.size(); ++q) acc += h * gl.w[q] * f(lo + h * (i + gl.x[q]));
  return acc;
}

double bump_integral(double lo, double hi) { return composite_gl(unit_bump, lo, hi); }
}  // namespace

double unit_bump_integral() {
  static const double v = bump_integral(0.0, 1.0);
  return v;
}

double bump_cdf_quadrature(double v) {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  if (v > 0.5) return 1.0 - bump_cdf_quadrature(1.0 - v);
  return bump_integral(0.0, v) / unit_bump_integral();
}

namespace {

// Piecewise Chebyshev (first kind) interpolant of Phi on [0, 1/2].
class BumpCdfTable {
 public:
  static constexpr int kPanels = 32;
  static constexpr int kDeg = 24;

  BumpCdfTable() {
    const double k = 1.0 / unit_bump_integral();
    const double width = 0.5 / kPanels;
    for (int j = 0; j <= kDeg; ++j) {
      nodes_[j] = std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * kDeg + 2.0));
      weights_[j] = ((j % 2) ? -1.0 : 1.0) * std::sin((2.0 * j + 1.0) * std::numbers::pi / (2.0 * kDeg + 2.0));
    }
    double base = 0.0;
    for (int p = 0; p < kPanels; ++p) {
      const double lo = p * width, hi = lo + width;
      for (int j = 0; j <= kDeg; ++j) {
        const double v = 0.5 * (lo + hi) + 0.5 * width * nodes_[j];
        values_[p][j] = base + k * bump_integral(lo, v);
      }
      base += k * bump_integral(lo, hi);
    }
  }

  double operator()(double v) const {
    const double width = 0.5 / kPanels;
    int p = static_cast<int>(v / width);
    p = std::clamp(p, 0, kPanels - 1);
    const double lo = p * width;
    const double x = (v - lo) / width * 2.0 - 1.0;
    double num = 0.0, den = 0.0;
    for (int j = 0; j <= kDeg; ++j) {
      const double d = x - nodes_[j];
      if (d == 0.0) return values_[p][j];
      const double c = weights_[j] / d;
      num += c * values_[p][j];
      den += c;
    }
    return num / den;
  }

 private:
  std::array<double, kDeg + 1> nodes_{};
  std::array<double, kDeg + 1> weights_{};
  std::array<std::array<double, kDeg + 1>, kPanels> values_{};
};

}  // namespace

double bump_cdf(double v) {
  static const BumpCdfTable table;
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  if (v == 0.5) return 0.5;
  if (v > 0.5) return 1.0 - table(1.0 - v);
  return table(v);
}

TruncationParams TruncationParams::from_schedule(const StepSchedule& s) {
  const double g1 = s.gamma_shifted(1);
  if (!(g1 < std::exp(-1.0)))
    throw ValidationError("truncation: need gamma_1^N < 1/e (got " + std::to_string(g1) + " at N = " +
                          std::to_string(s.N()) + "); increase N");
  TruncationParams p;
  p.a = std::log(1.0 / g1);
  p.bump_norm = 1.0 / unit_bump_integral();
  p.N = s.N();
  return p;
}

double TruncationParams::bump_norm_on_interval(double a) {
  auto f = [a](double t) { return unit_bump(t - a); };
  return 1.0 / composite_gl(f, a, a + 1.0);
}

double TruncationParams::phi(double u) const {
  if (u < 0.0) throw ValidationError("phi: argument must be nonnegative");
  if (u <= a) return 1.0;
  if (u >= a + 1.0) return 0.0;
  return bump_cdf(1.0 - (u - a));
}

double TruncationParams::phi_quadrature(double u) const {
  if (u < 0.0) throw ValidationError("phi: argument must be nonnegative");
  if (u <= a) return 1.0;
  if (u >= a + 1.0) return 0.0;
  const double upper = 2.0 * a + 1.0 - u;
  return bump_norm * bump_integral(0.0, upper - a);
}

Vec TruncationParams::chi(const Vec& x) const {
  const double r = x.norm();
  if (r <= a) return x;
  if (r >= a + 1.0) return Vec::Zero(x.size());
  return (a * phi(r) / r) * x;
}

double TruncationParams::chi1(double x) const {
  const double r = std::abs(x);
  if (r <= a) return x;
  if (r >= a + 1.0) return 0.0;
  return std::copysign(a * phi(r), x);
}

TruncatedDynamics::TruncatedDynamics(const ProblemModel& model, const StepSchedule& schedule,
                                     const MeanTrajectory& mean, double T)
    : model_(model),
      schedule_(schedule),
      mean_(mean),
      params_(TruncationParams::from_schedule(schedule)),
      grid_(time_grid(schedule, T)),
      bar_alpha_(schedule.bar_alpha()) {
  if (schedule.N() < 1) throw ValidationError("truncated dynamics: shift N must be >= 1");
  if (mean_.empty()) throw ValidationError("truncated dynamics: solve the mean ODE first");
  const std::size_t M = grid_.M;
  grid_t_ = grid_.t;
  grid_t_.push_back(grid_t_.back() + schedule.gamma_shifted(static_cast<std::int64_t>(M) + 1));
  if (mean_.t_end() < grid_t_.back())
    throw ValidationError("truncated dynamics: mean trajectory ends at " + std::to_string(mean_.t_end()) +
                          " but the grid needs " + std::to_string(grid_t_.back()) +
                          "; solve the mean ODE over a longer horizon");
  for (std::size_t k = 0; k <= M + 2; ++k) gam_.push_back(schedule.gamma_shifted(static_cast<std::int64_t>(k)));
  for (std::size_t k = 0; k <= M + 1; ++k) alpha_.push_back(schedule.alpha_step(static_cast<std::int64_t>(k)));
  for (std::size_t k = 0; k <= M + 1; ++k) {
    mean_at_.push_back(mean_(grid_t_[k]));
    h_mean_.push_back(model_.h(mean_at_.back()));
    sqrt_gam_.push_back(std::sqrt(gam_[k]));
    inner_coef_.push_back(std::sqrt(gam_[k] / gam_[k + 1]) / sqrt_gam_.back());
  }
}

std::size_t TruncatedDynamics::step_index(double t) const {
  const std::size_t M = grid_.M;
  if (t >= grid_t_[M]) return M;
  if (t <= 0.0) return 0;
  auto it = std::upper_bound(grid_t_.begin(), grid_t_.begin() + static_cast<std::ptrdiff_t>(M) + 1, t);
  return static_cast<std::size_t>(it - grid_t_.begin()) - 1;
}

Mat TruncatedDynamics::integrated_jacobian(std::size_t k, const Vec& v) const {
  const Vec& base = mean_at_[k];
  const int d = model_.dim;
  if (model_.smooth_builtin) {
    const QuadRule& gl = gauss_legendre_unit(16);
    Mat acc = Mat::Zero(d, d);
    for (std::size_t q = 0; q < gl.x.size(); ++q) acc += gl.w[q] * model_.Dh(base + gl.x[q] * v);
    return acc;
  }
  Mat acc(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      acc(i, j) = integrate_adaptive([&](double s) { return model_.Dh(base + s * v)(i, j); }, 0.0, 1.0, 1e-12);
  return acc;
}

Mat TruncatedDynamics::F(std::size_t k, const Vec& x) const {
  const double r = x.norm();
  const double sg = std::sqrt(gam_[k]);
  const Vec cx = params_.chi(x);
  const double scal = r <= params_.a ? alpha_[k] : bar_alpha_;
  const double ratio = r >= params_.a ? 1.0 : std::sqrt(gam_[k] / gam_[k + 1]);
  const int d = model_.dim;
  return scal * Mat::Identity(d, d) - ratio * integrated_jacobian(k, sg * cx);
}

Mat TruncatedDynamics::G(std::size_t k, const Vec& x) const {
  const double sg = std::sqrt(gam_[k]);
  const int d = model_.dim;
  return alpha_[k] * Mat::Identity(d, d) - std::sqrt(gam_[k] / gam_[k + 1]) * integrated_jacobian(k, sg * x);
}

Vec TruncatedDynamics::drift(std::size_t k, const Vec& x) const {
  const double r = x.norm();
  const double a = params_.a;
  if (r >= a + 1.0) return Vec::Zero(x.size());
  const double sg = sqrt_gam_[k];
  const Vec& base = mean_at_[k];
  if (r < a) {
    const Vec dh = model_.h(base + sg * x) - h_mean_[k];
    return alpha_[k] * x - inner_coef_[k] * dh;
  }
  const Vec cx = params_.chi(x);
  const Vec dh = model_.h(base + sg * cx) - h_mean_[k];
  const double scal = r <= a ? alpha_[k] : bar_alpha_;
  return scal * cx - dh / sg;
}

double TruncatedDynamics::drift1(std::size_t k, double x) const { return drift(k, vec1(x))(0); }

Vec TruncatedDynamics::untruncated_drift(std::size_t k, const Vec& x) const {
  const double sg = std::sqrt(gam_[k]);
  const Vec& base = mean_at_[k];
  const Vec dh = model_.h(base + sg * x) - model_.h(base);
  return alpha_[k] * x - (std::sqrt(gam_[k] / gam_[k + 1]) / sg) * dh;
}

Vec TruncatedDynamics::noise_point(std::size_t k, const Vec& x) const {
  return mean_at_[k] + std::sqrt(gam_[k]) * params_.chi(x);
}

TruncatedDynamics build_dynamics(const ProblemModel& model, const StepSchedule& schedule, const Vec& theta0,
                                 double T, double mean_dt) {
  const TimeGrid g = time_grid(schedule, T);
  const double horizon = g.t.back() + 2.0 * schedule.gamma_shifted(static_cast<std::int64_t>(g.M) + 1);
  return TruncatedDynamics(model, schedule, solve_mean_ode(model, theta0, horizon, mean_dt), T);
}

}  // namespace sadl
