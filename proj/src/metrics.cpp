#include "sadl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sadl/error.hpp"
#include "sadl/parametrix.hpp"

namespace sadl {

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_same_grid(const DensityField& f, const DensityField& g) {
  if (!(f.grid == g.grid) || f.values.size() != g.values.size())
    throw ValidationError("density fields live on different grids");
}

double sample_sd(const std::vector<double>& s) {
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double v = 0.0;
  for (double x : s) v += (x - mean) * (x - mean);
  return std::sqrt(v / (n - 1.0));
}
}  // namespace

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) throw ValidationError("kde: need at least two samples");
  const double sd = sample_sd(samples);
  const double scale = std::max(std::abs(samples.front()), std::abs(samples.back()));
  // rounding in the mean leaves a tiny spread for constant samples
  if (!(sd > 1e-12 * scale) || !(sd > 0.0)) throw ValidationError("kde: degenerate samples (zero variance); pass an explicit bandwidth");
  return 1.06 * sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityField kde(const std::vector<double>& samples, double bandwidth, const Grid1D& grid, Exec ex) {
  if (samples.empty()) throw ValidationError("kde: no samples");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  DensityField f(grid, 0.0, 0.0);
  const double norm = kInvSqrt2Pi / (h * static_cast<double>(s.size()));
  const double ih = 1.0 / h;
  for_each_index(ex, grid.n, [&](std::size_t i) {
    const double x = grid.x(i);
    auto lo = std::lower_bound(s.begin(), s.end(), x - 8.0 * h);
    auto hi = std::upper_bound(lo, s.end(), x + 8.0 * h);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (x - *it) * ih;
      acc += std::exp(-0.5 * u * u);
    }
    f.values[i] = acc * norm;
  });
  return f;
}

DensityField kde_reference(const std::vector<double>& samples, double bandwidth, const Grid1D& grid) {
  if (samples.empty()) throw ValidationError("kde: no samples");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  DensityField f(grid, 0.0, 0.0);
  for (std::size_t i = 0; i < grid.n; ++i) {
    double acc = 0.0;
    for (double v : samples) acc += normal_pdf(h * h, grid.x(i) - v);
    f.values[i] = acc / static_cast<double>(samples.size());
  }
  return f;
}

DensityField histogram_density(const std::vector<double>& samples, const Grid1D& grid) {
  if (samples.empty()) throw ValidationError("histogram: no samples");
  DensityField f(grid, 0.0, 0.0);
  const double dx = grid.dx();
  for (double v : samples) {
    const double u = std::floor((v - grid.x_min) / dx + 0.5);
    if (u >= 0.0 && u < static_cast<double>(grid.n)) f.values[static_cast<std::size_t>(u)] += 1.0;
  }
  const double c = 1.0 / (static_cast<double>(samples.size()) * dx);
  for (double& v : f.values) v *= c;
  return f;
}

double l1_distance(const DensityField& f, const DensityField& g, bool halve) {
  require_same_grid(f, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.grid.n; ++i) acc += f.grid.weight(i) * std::abs(f.values[i] - g.values[i]);
  return halve ? 0.5 * acc : acc;
}

double hellinger_sq(const DensityField& f, const DensityField& g) {
  require_same_grid(f, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.grid.n; ++i) {
    const double d = std::sqrt(std::max(0.0, f.values[i])) - std::sqrt(std::max(0.0, g.values[i]));
    acc += f.grid.weight(i) * d * d;
  }
  return acc;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double f = pos - static_cast<double>(i);
  return v[i] * (1.0 - f) + v[i + 1] * f;
}

SupPathSummary sup_path_distance(const PathBundle& bundle, const std::string& a, const std::string& b,
                                 double scale) {
  if (!bundle.innovations_shared)
    throw ValidationError("sup_path_distance: processes were not driven by shared innovations");
  auto ia = bundle.paths.find(a), ib = bundle.paths.find(b);
  if (ia == bundle.paths.end() || ib == bundle.paths.end())
    throw ValidationError("sup_path_distance: process '" + (ia == bundle.paths.end() ? a : b) + "' not in bundle");
  const PathArray& A = ia->second;
  const PathArray& B = ib->second;
  if (A.n_paths != B.n_paths || A.n_times != B.n_times || A.dim != B.dim)
    throw ValidationError("sup_path_distance: shape mismatch");
  SupPathSummary out;
  out.per_path.assign(A.n_paths, 0.0);
  for (std::size_t p = 0; p < A.n_paths; ++p) {
    double m = 0.0;
    for (std::size_t k = 1; k < A.n_times; ++k) {
      double d2 = 0.0;
      for (int i = 0; i < A.dim; ++i) {
        const double d = A.at(p, k, i) - B.at(p, k, i);
        d2 += d * d;
      }
      m = std::max(m, std::sqrt(d2));
    }
    out.per_path[p] = m / scale;
  }
  out.q50 = quantile(out.per_path, 0.5);
  out.q90 = quantile(out.per_path, 0.9);
  out.q99 = quantile(out.per_path, 0.99);
  out.max = *std::max_element(out.per_path.begin(), out.per_path.end());
  return out;
}

double delta_N(const StepSchedule& schedule, double m) {
  const double g = schedule.gamma_shifted(1);
  const double L = std::log(1.0 / g);
  double first = std::sqrt(L) * std::pow(g, 0.25);
  if (schedule.beta() < 1.0) first += std::pow(g, 0.5 * (1.0 / schedule.beta() - 1.0));
  return std::pow(m, 0.25) * first + m * L * L * std::sqrt(g);
}

GridJointResult grid_joint_l1_bound(const TransitionProvider& q, const TransitionProvider& p,
                                    const std::vector<double>& tau, double x, const Grid1D& z_grid,
                                    const StepSchedule& schedule, double C) {
  if (tau.size() < 2 || tau[0] != 0.0) throw ValidationError("grid_joint_l1_bound: tau must start at 0");
  const std::size_t m = tau.size() - 1;
  GridJointResult res;
  for (std::size_t i = 1; i <= m; ++i) {
    if (!(tau[i] > tau[i - 1])) throw ValidationError("grid_joint_l1_bound: tau must increase");
    const double r = (tau[i] - tau[i - 1]) * static_cast<double>(m) / tau[m];
    if (r < 1.0 / C || r > C) res.tau_spacing_ok = false;
  }
  if (!res.tau_spacing_ok) res.note = "tau spacing is not proportional to tau_m / m within the factor C";
  for (std::size_t i = 1; i <= m; ++i) {
    double contrib = 0.0, worst = 0.0;
    if (i == 1) {
      contrib = l1_distance(q(tau[0], tau[1], x), p(tau[0], tau[1], x));
      worst = contrib;
    } else {
      const DensityField w = q(0.0, tau[i - 1], x);
      if (!(w.grid == z_grid)) throw ValidationError("grid_joint_l1_bound: provider grid differs from z grid");
      const double wmax = w.sup_norm();
      for (std::size_t n = 0; n < z_grid.n; ++n) {
        if (w.values[n] < 1e-12 * wmax) continue;
        const double z = z_grid.x(n);
        const double d = l1_distance(q(tau[i - 1], tau[i], z), p(tau[i - 1], tau[i], z));
        worst = std::max(worst, d);
        contrib += z_grid.weight(n) * w.values[n] * d;
      }
    }
    res.per_step.push_back(contrib);
    res.single_step.push_back(worst);
    res.value += contrib;
  }
  res.delta_N = delta_N(schedule, static_cast<double>(m));
  return res;
}

std::pair<TransitionProvider, TransitionProvider> linear_transition_providers(const TruncatedDynamics& dyn,
                                                                              const Grid1D& grid) {
  if (dyn.model().dim != 1 || !dyn.model().state_independent_noise)
    throw UnsupportedCapability("linear_transition_providers: d = 1 models with constant noise only");
  const TruncatedDynamics* d = &dyn;
  const double c = dyn.bar_alpha() - dyn.model().Dh(dyn.model().root)(0, 0);
  const double R = dyn.model().R(dyn.model().root)(0, 0);
  TransitionProvider q = [c, R, grid](double s, double t, double z) {
    const double span = t - s;
    const double var = std::abs(c) < 1e-14 ? R * span : R * std::expm1(2.0 * c * span) / (2.0 * c);
    return gaussian_field(grid, z * std::exp(c * span), var);
  };
  TransitionProvider p = [d, grid](double s, double t, double z) {
    const std::size_t i = d->step_index(s + 1e-12 * std::max(1.0, s));
    const std::size_t j = d->step_index(t + 1e-12 * std::max(1.0, t));
    double mean = z, var = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      const double g = d->gamma(k + 1);
      const double e = 1e-6;
      const double slope = (d->drift1(k, e) - d->drift1(k, -e)) / (2.0 * e);
      const double f = 1.0 + g * slope;
      mean *= f;
      var = f * f * var + g * d->model().R(d->noise_point(k, vec1(0.0)))(0, 0);
    }
    if (!(var > 0.0)) throw ValidationError("linear_transition_providers: s and t are in the same grid cell");
    return gaussian_field(grid, mean, var);
  };
  return {q, p};
}

namespace {
RateFit ols(const std::vector<double>& X, const std::vector<double>& Y) {
  const double n = static_cast<double>(X.size());
  const double mx = std::accumulate(X.begin(), X.end(), 0.0) / n;
  const double my = std::accumulate(Y.begin(), Y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    sxx += (X[i] - mx) * (X[i] - mx);
    sxy += (X[i] - mx) * (Y[i] - my);
    syy += (Y[i] - my) * (Y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("rate_fit: N values must differ");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

void check_rate_input(const std::vector<double>& Ns, const std::vector<double>& v) {
  if (Ns.size() != v.size()) throw ValidationError("rate_fit: size mismatch");
  if (Ns.size() < 3) throw ValidationError("rate_fit: need at least 3 points");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw ValidationError("rate_fit: values must be positive");
    if (!(Ns[i] > 1.0)) throw ValidationError("rate_fit: N must exceed 1");
  }
}
}  // namespace

RateFit rate_fit(const std::vector<double>& Ns, const std::vector<double>& values) {
  check_rate_input(Ns, values);
  std::vector<double> X, Y;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    X.push_back(std::log(Ns[i]));
    Y.push_back(std::log(values[i]));
  }
  return ols(X, Y);
}

RateFit rate_fit_corrected(const std::vector<double>& Ns, const std::vector<double>& values) {
  check_rate_input(Ns, values);
  std::vector<double> X, Y;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    const double L = std::log(Ns[i]);
    X.push_back(L);
    Y.push_back(std::log(values[i] / (L * L)));
  }
  return ols(X, Y);
}

double bootstrap_stderr(const std::vector<double>& samples,
                        const std::function<double(const std::vector<double>&)>& statistic, std::size_t n_rep,
                        std::uint64_t seed, Exec ex) {
  if (n_rep < 2) throw ValidationError("bootstrap: need at least 2 replicates");
  if (samples.empty()) throw ValidationError("bootstrap: no samples");
  std::vector<double> stats(n_rep);
  const std::size_t n = samples.size();
  for_each_index(ex, n_rep, [&](std::size_t r) {
    RandomSource rng(seed, r, StreamTag::bootstrap);
    std::vector<double> re(n);
    for (std::size_t i = 0; i < n; ++i) re[i] = samples[rng.bits() % n];
    stats[r] = statistic(re);
  });
  const double mean = std::accumulate(stats.begin(), stats.end(), 0.0) / static_cast<double>(n_rep);
  double v = 0.0;
  for (double s : stats) v += (s - mean) * (s - mean);
  return std::sqrt(v / static_cast<double>(n_rep - 1));
}

std::string to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::L1: return "L1";
    case DistanceKind::hellinger_sq: return "hellinger_sq";
    case DistanceKind::sup_path: return "sup_path";
    case DistanceKind::grid_joint_L1_bound: return "grid_joint_L1_bound";
  }
  return "unknown";
}

}  // namespace sadl
