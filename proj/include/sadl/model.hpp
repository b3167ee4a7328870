#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sadl/rng.hpp"
#include "sadl/schedules.hpp"
#include "sadl/types.hpp"

namespace sadl {

//! A stochastic approximation problem: h, Dh, R, theta* and the noise map.
//! The observation is H(theta, eta) = h(theta) + xi(theta, eta) where eta is a
//! standard Gaussian vector of length dim.
struct ProblemModel {
  std::string name;
  int dim = 1;
  std::function<Vec(const Vec&)> mean_field;
  std::function<Mat(const Vec&)> jacobian;
  std::function<Mat(const Vec&)> noise_cov;
  std::function<Vec(const Vec&, const Vec&)> innovation;  // xi(theta, eta)
  Vec root;
  bool gaussian_innovations = true;
  bool state_independent_noise = false;
  //! user-supplied models get adaptive quadrature inside F_N / G_N
  bool smooth_builtin = true;

  Vec h(const Vec& th) const { return mean_field(th); }
  Mat Dh(const Vec& th) const { return jacobian(th); }
  Mat R(const Vec& th) const { return noise_cov(th); }
};

ProblemModel linear_gaussian(const Mat& A_mat, const Vec& root, const Mat& Sigma);
ProblemModel linear_gaussian_1d(double a, double root = 0.0, double sigma2 = 1.0);
//! h = th + 0.5 sin th, R = 1 + 0.2 sin^2 th, d = 1.
ProblemModel sine_perturbed();
//! h = 0, R = rate; only for kernel tests.
ProblemModel drift_free_1d(double rate = 1.0);

Vec draw_eta(int dim, RandomSource& rng);
Vec sample_H(const ProblemModel& m, const Vec& theta, RandomSource& rng);

//! Symmetric square root via eigendecomposition (negative eigenvalues clipped).
Mat sym_sqrt(const Mat& S);

//! Every eigenvalue of bar_alpha I - Dh(theta*) has negative real part.
bool check_lyapunov(const ProblemModel& m, const StepSchedule& s);
//! <theta - theta*, h(theta)> >= delta |theta - theta*|^2 on every sample.
bool check_inward(const ProblemModel& m, double delta, const std::vector<Vec>& samples);
//! The schedule side of the inward condition: delta > 1/(2A) when beta = 1.
bool inward_rate_compatible(const StepSchedule& s, double delta);

struct ModelCheckRow {
  std::string check;
  Vec theta;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

//! Statistical and structural checks of a model on a theta grid: root residual,
//! FD Jacobian, symmetry and positivity of R, sample mean and covariance bands.
std::vector<ModelCheckRow> validate_model(const ProblemModel& m, const std::vector<Vec>& thetas,
                                          std::size_t n_draws, std::uint64_t seed);

}  // namespace sadl
