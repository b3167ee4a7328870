#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sadl/density.hpp"
#include "sadl/kernels.hpp"
#include "sadl/truncation.hpp"

namespace sadl {

//! (2 pi var)^{-1/2} exp(-z^2 / (2 var)); var <= 0 rejected.
double gaussian_g(double var, double z);

//! Scalar diffusion dX = b(t, X) dt + sqrt(a(t)) dB. The drift is constant in t on the
//! pieces [bp_p, bp_{p+1}) (the last piece is unbounded); a(t) is continuous.
class ScalarDiffusion {
 public:
  using Drift = std::function<double(std::size_t piece, double x)>;
  using Rate = std::function<double(double t)>;

  ScalarDiffusion(std::vector<double> breakpoints, Drift drift, Rate rate, double max_dt);

  //! F_N(t, x) chi_N(x) with variance rate R(theta-bar_t); pieces are the chain grid cells.
  static ScalarDiffusion truncated(const TruncatedDynamics& dyn);
  static ScalarDiffusion drift_free(double rate);
  //! b = c x, constant rate
  static ScalarDiffusion ornstein_uhlenbeck(double c, double rate);

  std::size_t piece(double t) const;       // cell containing t
  std::size_t piece_left(double t) const;  // cell containing times just below t
  double drift_at(std::size_t piece, double x) const { return drift_(piece, x); }
  double drift(double t, double x) const { return drift_(piece(t), x); }
  double drift_slope_left(double t, double x) const;
  double rate(double t) const { return rate_(t); }
  double integrated_variance(double s, double t) const;
  bool constant_rate() const { return constant_rate_; }

  //! Value at time s of the solution through (t, y), s <= t.
  double backward_flow(double s, double t, double y) const;
  //! Value at time t of the solution through (s, x), s <= t.
  double forward_flow(double t, double s, double x) const;
  //! Backward flows of every y from time t, recorded at the ascending times rec (all <= t).
  //! out[i][n] = theta_{rec[i], t}(ys[n]).
  void backward_flow_table(double t, const std::vector<double>& ys, const std::vector<double>& rec,
                           std::vector<std::vector<double>>& out) const;

 private:
  void integrate(double from, double to, std::vector<double>& state) const;

  std::vector<double> bp_;
  Drift drift_;
  Rate rate_;
  double max_dt_;
  bool constant_rate_ = false;
  double const_rate_value_ = 0.0;
};

//! Truncated chain V^N in d = 1 with Gaussian innovations.
class ScalarChain {
 public:
  using Fn = std::function<double(std::size_t k, double x)>;

  ScalarChain(std::vector<double> times, std::vector<double> steps, Fn drift, Fn innovation_var,
              ScalarDiffusion flow_source);
  static ScalarChain truncated(const TruncatedDynamics& dyn);

  std::size_t size() const { return times_.size() - 1; }
  double t(std::size_t k) const { return times_[k]; }
  double step(std::size_t k) const { return steps_[k]; }  // gamma_{k+1}
  double drift(std::size_t k, double x) const { return drift_(k, x); }
  double innovation_var(std::size_t k, double x) const { return ivar_(k, x); }
  const ScalarDiffusion& flow() const { return flow_; }

  //! theta_{t_k, t_j}(y) for k = i..j (index k - i)
  std::vector<double> frozen_flows(std::size_t i, std::size_t j, double y) const;
  //! W_{k,j}(y) for k = i..j, from the frozen flows
  std::vector<double> frozen_variances(std::size_t i, std::size_t j, const std::vector<double>& flows) const;

 private:
  std::vector<double> times_;
  std::vector<double> steps_;
  Fn drift_;
  Fn ivar_;
  ScalarDiffusion flow_;
};

//! g_{sigma-bar(s,t)}(theta_{s,t}(y) - x)
double tilde_q(const ScalarDiffusion& diff, double s, double t, double x, double y);
//! (b(s,x) - b(s,theta)) d/dx tilde_q, theta = theta_{s,t}(y)
double kernel_H(const ScalarDiffusion& diff, double s, double t, double x, double y);
//! int tilde_q(s,t,x,y) |d theta_{s,t}(y)/dy| dy over the grid (should be close to 1)
double tilde_q_mass_diagnostic(const ScalarDiffusion& diff, double s, double t, double x, const Grid1D& grid);

//! Frozen-chain density g_{W_{i,j}(y)}(theta_{t_i,t_j}(y) - x).
double tilde_p(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y);
double frozen_variance_W(const ScalarChain& chain, std::size_t i, std::size_t j, double y);
//! One-step generator difference applied to tilde_p^y, closed form for Gaussian innovations.
double kernel_scriptK(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y);
//! The same quantity with the one-step expectations done by Gauss-Hermite quadrature.
double kernel_scriptK_quadrature(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y,
                                 int order = 20);

using KernelFn = std::function<double(double s, double t, double x, double y)>;

struct ConvolveResult {
  double value = 0.0;
  bool leak = false;  // integrand not negligible at the grid boundary
};

//! int_s^t du int f(s,u,x,z) g(u,t,z,y) dz, Gauss-Legendre in u, trapezoid in z.
ConvolveResult convolve_continuous(const KernelFn& f, const KernelFn& g, double s, double t, double x, double y,
                                   const Grid1D& grid, int order = 16);
//! sum_{k=i}^{j-1} gamma_{k+1} int f(t_i,t_k,x,z) g(t_k,t_j,z,y) dz. When f_is_density, f(t_i,t_i,x,.)
//! is the Dirac mass at x and the k = i term is gamma_{i+1} g(t_i,t_j,x,y).
ConvolveResult convolve_discrete(const KernelFn& f, const KernelFn& g, const std::vector<double>& times,
                                 const std::vector<double>& steps, std::size_t i, std::size_t j, double x, double y,
                                 const Grid1D& grid, bool f_is_density = true);

struct SeriesOptions {
  int r_max = 3;
  std::size_t n_time = 64;  // continuous series time nodes
  Exec exec = Exec::parallel;
};

struct SeriesResult {
  DensityField total;
  std::vector<DensityField> terms;
  std::vector<double> term_sup;
  std::vector<double> term_mass;
  std::vector<double> sup_ratio;           // sup_{r+1} / sup_r
  std::vector<double> implied_constant;    // (sup_r / (sup_0 * shape_r))^{1/r}
  bool resolution_failure = false;
  bool leak = false;
  std::string note;
};

//! Master-formula series for the transition density of diff from (s, x), on grid, at time t.
SeriesResult series_q(const ScalarDiffusion& diff, double s, double t, double x, const Grid1D& grid,
                      const SeriesOptions& opt = {});
//! Discrete series for the chain density from (t_0, x) to t_j.
SeriesResult series_p(const ScalarChain& chain, std::size_t j, double x, const Grid1D& grid,
                      const SeriesOptions& opt = {});

//! c_r (1 + |z|)^{-r}, c_r = (r - 1)/2; r <= 1 rejected.
double majorant_Q(double r, double z);
//! t^{-1/2} Q_m(t^{-1/2} x)
double majorant_scriptQ(double m, double t, double x);
//! Gamma(1/2)^r / Gamma(1 + r/2) (t - s)^{r/2}
double factorial_shape(int r, double span);

struct EnvelopeFit {
  double kappa = 0.0;
  std::vector<double> max_ratio;  // per N: max_y |q - p| / envelope
  bool dominated = false;
};

//! Fits kappa on the first pair and checks the remaining pairs against
//! kappa sqrt(g1) ln^2(1/g1) scriptQ_m(span, y - center).
EnvelopeFit envelope_fit(const std::vector<DensityField>& q, const std::vector<DensityField>& p,
                         const std::vector<double>& gamma1, const std::vector<double>& center, double span,
                         double m = 8.0);

}  // namespace sadl
