#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sadl/density.hpp"
#include "sadl/kernels.hpp"
#include "sadl/schedules.hpp"
#include "sadl/simulate.hpp"

namespace sadl {

//! 1.06 sigma-hat n^{-1/5}
double silverman_bandwidth(const std::vector<double>& samples);

//! Gaussian KDE on grid; bandwidth <= 0 selects Silverman's rule.
//! Kernels are cut at 8 bandwidths (relative error below 1e-13).
DensityField kde(const std::vector<double>& samples, double bandwidth, const Grid1D& grid,
                 Exec ex = Exec::parallel);
//! O(n_samples * n_grid) reference, no cut-off.
DensityField kde_reference(const std::vector<double>& samples, double bandwidth, const Grid1D& grid);

//! Counts per grid cell [x_i - dx/2, x_i + dx/2) divided by n dx.
DensityField histogram_density(const std::vector<double>& samples, const Grid1D& grid);

//! int |f - g| by trapezoid; halve gives the conventional TV.
double l1_distance(const DensityField& f, const DensityField& g, bool halve = false);
//! int (sqrt f - sqrt g)^2 with negative values clipped at 0.
double hellinger_sq(const DensityField& f, const DensityField& g);

struct SupPathSummary {
  std::vector<double> per_path;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0, max = 0.0;
};
//! Per path, max over recorded grid indices k >= 1 of |a_k - b_k|, divided by scale.
SupPathSummary sup_path_distance(const PathBundle& bundle, const std::string& a, const std::string& b,
                                 double scale = 1.0);
double quantile(std::vector<double> v, double q);

//! Transition density from (s, z) at time t, on a fixed grid.
using TransitionProvider = std::function<DensityField(double s, double t, double z)>;

struct GridJointResult {
  double value = 0.0;
  std::vector<double> per_step;      // contribution of (tau_{i-1}, tau_i)
  std::vector<double> single_step;   // max_z L1 of the one-step transitions
  double delta_N = 0.0;
  bool tau_spacing_ok = true;
  std::string note;
};

//! sum_i int q(0, tau_{i-1}, x, z) int |q - p|(tau_{i-1}, tau_i, z, w) dw dz.
//! tau[0] = 0; q(0, 0, x, .) is the Dirac mass at x. Spacing is checked against
//! (tau_i - tau_{i-1}) m / tau_m in [1/C, C].
GridJointResult grid_joint_l1_bound(const TransitionProvider& q, const TransitionProvider& p,
                                    const std::vector<double>& tau, double x, const Grid1D& z_grid,
                                    const StepSchedule& schedule, double C = 4.0);

//! m^{1/4} (1{beta<1} g^{(1/beta-1)/2} + sqrt(ln(1/g)) g^{1/4}) + m ln^2(1/g) sqrt(g), g = gamma_1^N
double delta_N(const StepSchedule& schedule, double m);

//! Gaussian transition providers for a d = 1 linear model: exact moments of the limit
//! diffusion and of the chain (drift slope at 0 held per step).
std::pair<TransitionProvider, TransitionProvider> linear_transition_providers(const TruncatedDynamics& dyn,
                                                                              const Grid1D& grid);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
//! least squares of ln value on ln N
RateFit rate_fit(const std::vector<double>& Ns, const std::vector<double>& values);
//! same after dividing values by ln^2 N
RateFit rate_fit_corrected(const std::vector<double>& Ns, const std::vector<double>& values);

//! Bootstrap standard error of a statistic; replicate r uses its own derived seed.
double bootstrap_stderr(const std::vector<double>& samples,
                        const std::function<double(const std::vector<double>&)>& statistic, std::size_t n_rep,
                        std::uint64_t seed, Exec ex = Exec::parallel);

enum class DistanceKind { L1, hellinger_sq, sup_path, grid_joint_L1_bound };
std::string to_string(DistanceKind k);

struct DistanceReport {
  DistanceKind kind = DistanceKind::L1;
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t N = 0;
  double T = 0.0;
  std::string model;
  std::size_t n_paths = 0;
};

}  // namespace sadl
