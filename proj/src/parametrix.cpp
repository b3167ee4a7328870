#include "sadl/parametrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sadl/error.hpp"
#include "sadl/quadrature.hpp"

namespace sadl {

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kWindow = 9.0;  // Gaussian window in standard deviations

inline double gauss(double var, double z) { return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * z * z / var); }

struct Support {
  std::size_t lo = 0, hi = 0;  // inclusive; lo > hi means empty
};

Support support_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  Support s{1, 0};
  if (m == 0.0) return s;
  const double thr = m * 1e-18;
  std::size_t lo = 0, hi = v.size() - 1;
  while (lo < v.size() && std::abs(v[lo]) <= thr) ++lo;
  while (hi > lo && std::abs(v[hi]) <= thr) --hi;
  s.lo = lo;
  s.hi = hi;
  return s;
}

// grid index range covering [c - r, c + r]
inline bool window(const Grid1D& g, double c, double r, std::size_t& lo, std::size_t& hi) {
  const double dx = g.dx();
  const double a = std::ceil((c - r - g.x_min) / dx);
  const double b = std::floor((c + r - g.x_min) / dx);
  if (b < 0.0 || a > static_cast<double>(g.n - 1) || a > b) return false;
  lo = static_cast<std::size_t>(std::max(0.0, a));
  hi = static_cast<std::size_t>(std::min(static_cast<double>(g.n - 1), b));
  return true;
}

}  // namespace

double gaussian_g(double var, double z) {
  if (!(var > 0.0)) throw ValidationError("gaussian_g: variance must be positive");
  return gauss(var, z);
}

// ---------------------------------------------------------------- ScalarDiffusion

ScalarDiffusion::ScalarDiffusion(std::vector<double> breakpoints, Drift drift, Rate rate, double max_dt)
    : bp_(std::move(breakpoints)), drift_(std::move(drift)), rate_(std::move(rate)), max_dt_(max_dt) {
  if (bp_.empty()) bp_.push_back(0.0);
  if (!(max_dt_ > 0.0)) throw ValidationError("ScalarDiffusion: max_dt must be positive");
  for (std::size_t i = 1; i < bp_.size(); ++i)
    if (!(bp_[i] > bp_[i - 1])) throw ValidationError("ScalarDiffusion: breakpoints must increase");
}

ScalarDiffusion ScalarDiffusion::truncated(const TruncatedDynamics& dyn) {
  if (dyn.model().dim != 1) throw ValidationError("parametrix: d = 1 only");
  std::vector<double> bp(dyn.grid().t.begin(), dyn.grid().t.end());
  const TruncatedDynamics* d = &dyn;
  ScalarDiffusion sd(
      std::move(bp), [d](std::size_t p, double x) { return d->drift1(p, x); },
      [d](double t) { return d->model().R(d->mean()(t))(0, 0); }, 0.01);
  if (dyn.model().state_independent_noise) {
    // R does not depend on theta, so neither does the rate
    sd.constant_rate_ = true;
    sd.const_rate_value_ = dyn.model().R(dyn.mean_at(0))(0, 0);
  }
  return sd;
}

ScalarDiffusion ScalarDiffusion::drift_free(double rate) {
  if (!(rate > 0.0)) throw ValidationError("drift_free: rate must be positive");
  ScalarDiffusion sd({0.0}, [](std::size_t, double) { return 0.0; }, [rate](double) { return rate; }, 1e-3);
  sd.constant_rate_ = true;
  sd.const_rate_value_ = rate;
  return sd;
}

ScalarDiffusion ScalarDiffusion::ornstein_uhlenbeck(double c, double rate) {
  if (!(rate > 0.0)) throw ValidationError("ornstein_uhlenbeck: rate must be positive");
  ScalarDiffusion sd({0.0}, [c](std::size_t, double x) { return c * x; }, [rate](double) { return rate; }, 1e-3);
  sd.constant_rate_ = true;
  sd.const_rate_value_ = rate;
  return sd;
}

std::size_t ScalarDiffusion::piece(double t) const {
  auto it = std::upper_bound(bp_.begin(), bp_.end(), t);
  if (it == bp_.begin()) return 0;
  return static_cast<std::size_t>(it - bp_.begin()) - 1;
}

std::size_t ScalarDiffusion::piece_left(double t) const {
  auto it = std::lower_bound(bp_.begin(), bp_.end(), t);
  if (it == bp_.begin()) return 0;
  return static_cast<std::size_t>(it - bp_.begin()) - 1;
}

double ScalarDiffusion::drift_slope_left(double t, double x) const {
  const std::size_t p = piece_left(t);
  const double e = 1e-5 * std::max(1.0, std::abs(x));
  return (drift_(p, x + e) - drift_(p, x - e)) / (2.0 * e);
}

double ScalarDiffusion::integrated_variance(double s, double t) const {
  if (t < s) throw ValidationError("integrated_variance: need s <= t");
  if (constant_rate_) return const_rate_value_ * (t - s);
  if (t == s) return 0.0;
  const QuadRule& gl = gauss_legendre_unit(7);
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((t - s) / 0.01)));
  const double h = (t - s) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u0 = s + static_cast<double>(i) * h;
    for (std::size_t q = 0; q < gl.x.size(); ++q) acc += h * gl.w[q] * rate_(u0 + h * gl.x[q]);
  }
  return acc;
}

void ScalarDiffusion::integrate(double from, double to, std::vector<double>& st) const {
  if (from == to) return;
  const bool fwd = to > from;
  double u = from;
  while (fwd ? u < to : u > to) {
    std::size_t p;
    double next;
    if (fwd) {
      p = piece(u);
      next = (p + 1 < bp_.size()) ? std::min(to, bp_[p + 1]) : to;
    } else {
      p = piece_left(u);
      next = std::max(to, bp_[p]);
      if (p == 0 && next > to && bp_[0] >= u) next = to;
    }
    const double len = next - u;
    const std::size_t n =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::abs(len) / max_dt_ - 1e-9)));
    const double h = len / static_cast<double>(n);
    for (double& y : st) {
      double th = y;
      for (std::size_t i = 0; i < n; ++i) {
        const double k1 = drift_(p, th);
        const double k2 = drift_(p, th + 0.5 * h * k1);
        const double k3 = drift_(p, th + 0.5 * h * k2);
        const double k4 = drift_(p, th + h * k3);
        th += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      y = th;
    }
    u = next;
  }
}

double ScalarDiffusion::backward_flow(double s, double t, double y) const {
  if (s > t) throw ValidationError("backward_flow: need s <= t");
  std::vector<double> st{y};
  integrate(t, s, st);
  return st[0];
}

double ScalarDiffusion::forward_flow(double t, double s, double x) const {
  if (s > t) throw ValidationError("forward_flow: need s <= t");
  std::vector<double> st{x};
  integrate(s, t, st);
  return st[0];
}

void ScalarDiffusion::backward_flow_table(double t, const std::vector<double>& ys, const std::vector<double>& rec,
                                          std::vector<std::vector<double>>& out) const {
  out.assign(rec.size(), {});
  std::vector<double> st = ys;
  double cur = t;
  for (std::size_t i = rec.size(); i-- > 0;) {
    if (rec[i] > cur) throw ValidationError("backward_flow_table: record times must be ascending and <= t");
    integrate(cur, rec[i], st);
    cur = rec[i];
    out[i] = st;
  }
}

// ---------------------------------------------------------------- ScalarChain

ScalarChain::ScalarChain(std::vector<double> times, std::vector<double> steps, Fn drift, Fn innovation_var,
                         ScalarDiffusion flow_source)
    : times_(std::move(times)),
      steps_(std::move(steps)),
      drift_(std::move(drift)),
      ivar_(std::move(innovation_var)),
      flow_(std::move(flow_source)) {
  if (times_.size() < 2 || steps_.size() + 1 < times_.size())
    throw ValidationError("ScalarChain: inconsistent grid");
}

ScalarChain ScalarChain::truncated(const TruncatedDynamics& dyn) {
  if (dyn.model().dim != 1) throw ValidationError("parametrix: d = 1 only");
  if (!dyn.model().gaussian_innovations)
    throw UnsupportedCapability(
        "chain parametrix needs Gaussian innovations; use the Monte Carlo density estimate (kde) instead");
  const TruncatedDynamics* d = &dyn;
  std::vector<double> steps;
  for (std::size_t k = 0; k < dyn.grid().M; ++k) steps.push_back(dyn.gamma(k + 1));
  return ScalarChain(
      dyn.grid().t, std::move(steps), [d](std::size_t k, double x) { return d->drift1(k, x); },
      [d](std::size_t k, double x) { return d->model().R(d->noise_point(k, vec1(x)))(0, 0); },
      ScalarDiffusion::truncated(dyn));
}

std::vector<double> ScalarChain::frozen_flows(std::size_t i, std::size_t j, double y) const {
  if (!(i <= j) || j >= times_.size()) throw ValidationError("frozen_flows: need i <= j <= J");
  std::vector<double> rec(times_.begin() + static_cast<std::ptrdiff_t>(i),
                          times_.begin() + static_cast<std::ptrdiff_t>(j) + 1);
  std::vector<std::vector<double>> tab;
  flow_.backward_flow_table(times_[j], {y}, rec, tab);
  std::vector<double> out(tab.size());
  for (std::size_t k = 0; k < tab.size(); ++k) out[k] = tab[k][0];
  return out;
}

std::vector<double> ScalarChain::frozen_variances(std::size_t i, std::size_t j, const std::vector<double>& flows) const {
  std::vector<double> W(j - i + 1, 0.0);
  for (std::size_t k = j; k-- > i;) W[k - i] = W[k + 1 - i] + steps_[k] * ivar_(k, flows[k - i]);
  return W;
}

// ---------------------------------------------------------------- pointwise kernels

double tilde_q(const ScalarDiffusion& diff, double s, double t, double x, double y) {
  if (!(s < t)) throw ValidationError("tilde_q: need s < t");
  const double th = diff.backward_flow(s, t, y);
  return gaussian_g(diff.integrated_variance(s, t), th - x);
}

double kernel_H(const ScalarDiffusion& diff, double s, double t, double x, double y) {
  if (!(s < t)) throw ValidationError("kernel_H: need s < t");
  const double th = diff.backward_flow(s, t, y);
  const double v = diff.integrated_variance(s, t);
  return (diff.drift(s, x) - diff.drift(s, th)) * (th - x) / v * gaussian_g(v, th - x);
}

double tilde_q_mass_diagnostic(const ScalarDiffusion& diff, double s, double t, double x, const Grid1D& grid) {
  const double v = diff.integrated_variance(s, t);
  std::vector<std::vector<double>> tab;
  const auto ys = grid.points();
  diff.backward_flow_table(t, ys, {s}, tab);
  double acc = 0.0;
  for (std::size_t n = 0; n < grid.n; ++n) {
    const std::size_t a = n == 0 ? 0 : n - 1;
    const std::size_t b = n + 1 == grid.n ? n : n + 1;
    const double jac = (tab[0][b] - tab[0][a]) / (ys[b] - ys[a]);
    acc += grid.weight(n) * gauss(v, tab[0][n] - x) * std::abs(jac);
  }
  return acc;
}

double frozen_variance_W(const ScalarChain& chain, std::size_t i, std::size_t j, double y) {
  if (!(i < j) || j > chain.size()) throw ValidationError("frozen_variance_W: need i < j <= J");
  const auto fl = chain.frozen_flows(i, j, y);
  return chain.frozen_variances(i, j, fl)[0];
}

double tilde_p(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y) {
  if (!(i < j) || j > chain.size()) throw ValidationError("tilde_p: need i < j <= J");
  const auto fl = chain.frozen_flows(i, j, y);
  const auto W = chain.frozen_variances(i, j, fl);
  return gaussian_g(W[0], fl[0] - x);
}

double kernel_scriptK(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y) {
  if (!(i < j) || j > chain.size()) throw ValidationError("kernel_scriptK: need i < j <= J");
  const auto fl = chain.frozen_flows(i, j, y);
  const auto W = chain.frozen_variances(i, j, fl);
  const double g = chain.step(i);
  const double a = gauss(W[1] + g * chain.innovation_var(i, x), fl[1] - x - g * chain.drift(i, x));
  const double b = gauss(W[0], fl[0] - x);
  return (a - b) / g;
}

double kernel_scriptK_quadrature(const ScalarChain& chain, std::size_t i, std::size_t j, double x, double y,
                                 int order) {
  if (!(i < j) || j > chain.size()) throw ValidationError("kernel_scriptK: need i < j <= J");
  const auto fl = chain.frozen_flows(i, j, y);
  const auto W = chain.frozen_variances(i, j, fl);
  const double g = chain.step(i);
  // one-step laws: z = mean + sqrt(var) Z
  const double mN = x + g * chain.drift(i, x), vN = g * chain.innovation_var(i, x);
  const double mF = x + (fl[1] - fl[0]), vF = g * chain.innovation_var(i, fl[0]);
  if (j == i + 1) {
    // tilde_p(t_j, t_j, z, y) is the Dirac mass at y
    return (gauss(vN, y - mN) - gauss(vF, y - mF)) / g;
  }
  const QuadRule gh = gauss_hermite_normal(order);
  double eN = 0.0, eF = 0.0;
  for (std::size_t q = 0; q < gh.x.size(); ++q) {
    eN += gh.w[q] * gauss(W[1], fl[1] - (mN + std::sqrt(vN) * gh.x[q]));
    eF += gh.w[q] * gauss(W[1], fl[1] - (mF + std::sqrt(vF) * gh.x[q]));
  }
  return (eN - eF) / g;
}

// ---------------------------------------------------------------- convolutions

ConvolveResult convolve_continuous(const KernelFn& f, const KernelFn& g, double s, double t, double x, double y,
                                   const Grid1D& grid, int order) {
  if (!(s < t)) throw ValidationError("convolve: need s < t");
  const QuadRule& gl = gauss_legendre_unit(order);
  ConvolveResult res;
  double edge = 0.0, peak = 0.0;
  for (std::size_t q = 0; q < gl.x.size(); ++q) {
    const double u = s + (t - s) * gl.x[q];
    double inner = 0.0;
    for (std::size_t n = 0; n < grid.n; ++n) {
      const double z = grid.x(n);
      const double v = f(s, u, x, z) * g(u, t, z, y);
      inner += grid.weight(n) * v;
      peak = std::max(peak, std::abs(v));
      if (n == 0 || n + 1 == grid.n) edge = std::max(edge, std::abs(v));
    }
    res.value += (t - s) * gl.w[q] * inner;
  }
  res.leak = peak > 0.0 && edge > 1e-6 * peak;
  return res;
}

ConvolveResult convolve_discrete(const KernelFn& f, const KernelFn& g, const std::vector<double>& times,
                                 const std::vector<double>& steps, std::size_t i, std::size_t j, double x, double y,
                                 const Grid1D& grid, bool f_is_density) {
  if (!(i < j) || j >= times.size() || steps.size() < j) throw ValidationError("convolve: need i < j <= J");
  ConvolveResult res;
  double edge = 0.0, peak = 0.0;
  for (std::size_t k = i; k < j; ++k) {
    if (k == i && f_is_density) {
      res.value += steps[k] * g(times[i], times[j], x, y);
      continue;
    }
    double inner = 0.0;
    for (std::size_t n = 0; n < grid.n; ++n) {
      const double z = grid.x(n);
      const double v = f(times[i], times[k], x, z) * g(times[k], times[j], z, y);
      inner += grid.weight(n) * v;
      peak = std::max(peak, std::abs(v));
      if (n == 0 || n + 1 == grid.n) edge = std::max(edge, std::abs(v));
    }
    res.value += steps[k] * inner;
  }
  res.leak = peak > 0.0 && edge > 1e-6 * peak;
  return res;
}

// ---------------------------------------------------------------- series

double factorial_shape(int r, double span) {
  return std::pow(std::tgamma(0.5), r) / std::tgamma(1.0 + 0.5 * r) * std::pow(span, 0.5 * r);
}

namespace {

void finish_series(SeriesResult& res, double span) {
  const std::size_t R = res.terms.size();
  res.total = res.terms[0];
  for (std::size_t r = 1; r < R; ++r)
    for (std::size_t n = 0; n < res.total.values.size(); ++n) res.total.values[n] += res.terms[r].values[n];
  for (std::size_t r = 0; r < R; ++r) {
    res.term_sup.push_back(res.terms[r].sup_norm());
    res.term_mass.push_back(res.terms[r].integral());
  }
  for (std::size_t r = 0; r + 1 < R; ++r)
    res.sup_ratio.push_back(res.term_sup[r] > 0.0 ? res.term_sup[r + 1] / res.term_sup[r] : 0.0);
  res.implied_constant.push_back(1.0);
  for (std::size_t r = 1; r < R; ++r) {
    const double q = res.term_sup[r] / (res.term_sup[0] * factorial_shape(static_cast<int>(r), span));
    res.implied_constant.push_back(q > 0.0 ? std::pow(q, 1.0 / static_cast<double>(r)) : 0.0);
  }
  for (std::size_t r = 3; r < res.sup_ratio.size(); ++r)
    if (res.sup_ratio[r] >= 1.0 && res.term_sup[r + 1] > 1e-14) res.resolution_failure = true;
  if (res.resolution_failure) res.note = "series terms do not decay beyond r = 3: refine the space or time grid";
  res.leak = res.total.boundary_mass() > 1e-6;
}

}  // namespace

SeriesResult series_q(const ScalarDiffusion& diff, double s, double t, double x, const Grid1D& grid,
                      const SeriesOptions& opt) {
  if (!(s < t)) throw ValidationError("series_q: need s < t");
  if (opt.r_max < 0) throw ValidationError("series_q: r_max must be >= 0");
  if (opt.n_time < 2) throw ValidationError("series_q: need at least 2 time nodes");
  const std::size_t nt = opt.n_time;
  const std::size_t R = static_cast<std::size_t>(opt.r_max);
  const std::size_t n = grid.n;
  const double h = (t - s) / static_cast<double>(nt);
  std::vector<double> u(nt + 1), A(nt + 1, 0.0);
  for (std::size_t l = 0; l <= nt; ++l) u[l] = (l == nt) ? t : s + static_cast<double>(l) * h;
  for (std::size_t l = 1; l <= nt; ++l) A[l] = A[l - 1] + diff.integrated_variance(u[l - 1], u[l]);
  const auto ys = grid.points();
  std::vector<double> wz(n);
  for (std::size_t i = 0; i < n; ++i) wz[i] = grid.weight(i);

  // drift at the time nodes, used inside H
  std::vector<std::vector<double>> bz(nt, std::vector<double>(n));
  for (std::size_t l = 0; l < nt; ++l)
    for (std::size_t i = 0; i < n; ++i) bz[l][i] = diff.drift(u[l], ys[i]);
  const double bx0 = diff.drift(u[0], x);

  // term[r][m][y]
  std::vector<std::vector<std::vector<double>>> term(R + 1, std::vector<std::vector<double>>(nt + 1));
  std::vector<std::vector<Support>> supp(R + 1, std::vector<Support>(nt + 1));
  std::vector<std::vector<double>> tab;
  std::vector<double> rec(u.begin(), u.begin() + 1);

  for (std::size_t m = 1; m <= nt; ++m) {
    rec.assign(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(m));
    diff.backward_flow_table(u[m], ys, rec, tab);
    for (std::size_t r = 0; r <= R; ++r) term[r][m].assign(n, 0.0);
    std::vector<double> bth(m * n);
    for (std::size_t l = 0; l < m; ++l)
      for (std::size_t i = 0; i < n; ++i) bth[l * n + i] = diff.drift(u[l], tab[l][i]);
    std::vector<double> slope(n);
    for (std::size_t i = 0; i < n; ++i) slope[i] = diff.drift_slope_left(u[m], ys[i]);

    for_each_index(opt.exec, n, [&](std::size_t yi) {
      std::vector<double> acc(R + 1, 0.0);
      const double v0 = A[m] - A[0];
      const double th0 = tab[0][yi];
      term[0][m][yi] = gauss(v0, th0 - x);
      if (R == 0) return;
      // u = s endpoint: the Dirac start turns the convolution into H(s, u_m, x, y)
      acc[0] += 0.5 * (bx0 - bth[yi]) * (th0 - x) / v0 * gauss(v0, th0 - x);
      for (std::size_t l = 1; l < m; ++l) {
        const double v = A[m] - A[l];
        const double th = tab[l][yi];
        const double bt = bth[l * n + yi];
        std::size_t lo, hi;
        if (!window(grid, th, kWindow * std::sqrt(v), lo, hi)) continue;
        const double iv = 1.0 / v;
        const double nc = kInvSqrt2Pi * std::sqrt(iv);
        const auto& bl = bz[l];
        std::size_t ulo = hi + 1, uhi = 0;
        for (std::size_t r = 0; r < R; ++r) {
          ulo = std::min(ulo, std::max(lo, supp[r][l].lo));
          uhi = std::max(uhi, std::min(hi, supp[r][l].hi));
        }
        if (ulo > uhi) continue;
        for (std::size_t zi = ulo; zi <= uhi; ++zi) {
          const double d = th - ys[zi];
          const double H = wz[zi] * (bl[zi] - bt) * d * iv * nc * std::exp(-0.5 * d * d * iv);
          for (std::size_t r = 0; r < R; ++r) acc[r] += term[r][l][zi] * H;
        }
      }
      // u = t endpoint: the kernel collapses to -b'(y) times the previous term at (u_m, y)
      for (std::size_t r = 0; r < R; ++r) {
        term[r + 1][m][yi] = h * (acc[r] + 0.5 * (-slope[yi]) * term[r][m][yi]);
      }
    });
    for (std::size_t r = 0; r <= R; ++r) supp[r][m] = support_of(term[r][m]);
  }

  SeriesResult res;
  for (std::size_t r = 0; r <= R; ++r) {
    DensityField f(grid, s, t);
    f.values = term[r][nt];
    res.terms.push_back(std::move(f));
  }
  finish_series(res, t - s);
  return res;
}

SeriesResult series_p(const ScalarChain& chain, std::size_t J, double x, const Grid1D& grid, const SeriesOptions& opt) {
  if (J < 1 || J > chain.size()) throw ValidationError("series_p: need 1 <= j <= J");
  if (opt.r_max < 0) throw ValidationError("series_p: r_max must be >= 0");
  const std::size_t R = static_cast<std::size_t>(opt.r_max);
  const std::size_t n = grid.n;
  const auto ys = grid.points();
  std::vector<double> wz(n);
  for (std::size_t i = 0; i < n; ++i) wz[i] = grid.weight(i);

  // one-step mean and variance maps on the grid, per step
  std::vector<std::vector<double>> mz(J, std::vector<double>(n)), vz(J, std::vector<double>(n));
  std::vector<double> vmax(J, 0.0), bmax(J, 0.0);
  for (std::size_t k = 0; k < J; ++k) {
    const double g = chain.step(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double b = chain.drift(k, ys[i]);
      mz[k][i] = ys[i] + g * b;
      vz[k][i] = g * chain.innovation_var(k, ys[i]);
      vmax[k] = std::max(vmax[k], vz[k][i]);
      bmax[k] = std::max(bmax[k], std::abs(g * b));
    }
  }
  const double g0 = chain.step(0);
  const double mx0 = x + g0 * chain.drift(0, x);
  const double vx0 = g0 * chain.innovation_var(0, x);

  std::vector<std::vector<std::vector<double>>> term(R + 1, std::vector<std::vector<double>>(J + 1));
  std::vector<std::vector<Support>> supp(R + 1, std::vector<Support>(J + 1));
  std::vector<std::vector<double>> tab;
  std::vector<double> W;

  for (std::size_t j = 1; j <= J; ++j) {
    std::vector<double> rec(j + 1);
    for (std::size_t k = 0; k <= j; ++k) rec[k] = chain.t(k);
    chain.flow().backward_flow_table(chain.t(j), ys, rec, tab);
    // W[k * n + y] = W_{k,j}(y)
    W.assign((j + 1) * n, 0.0);
    for (std::size_t k = j; k-- > 0;)
      for (std::size_t i = 0; i < n; ++i)
        W[k * n + i] = W[(k + 1) * n + i] + chain.step(k) * chain.innovation_var(k, tab[k][i]);
    for (std::size_t r = 0; r <= R; ++r) term[r][j].assign(n, 0.0);

    for_each_index(opt.exec, n, [&](std::size_t yi) {
      term[0][j][yi] = gauss(W[yi], tab[0][yi] - x);
      if (R == 0) return;
      std::vector<double> acc(R + 1, 0.0);
      // k = 0: the chain starts at the Dirac mass in x
      acc[1] += gauss(W[n + yi] + vx0, tab[1][yi] - mx0) - gauss(W[yi], tab[0][yi] - x);
      for (std::size_t k = 1; k < j; ++k) {
        const double th1 = tab[k + 1][yi], th0 = tab[k][yi];
        const double W1 = W[(k + 1) * n + yi], W0 = W[k * n + yi];
        const double rad = kWindow * std::sqrt(std::max(W0, W1 + vmax[k])) + std::abs(th1 - th0) + bmax[k];
        std::size_t lo, hi;
        if (!window(grid, th0, rad, lo, hi)) continue;
        const double iv0 = 1.0 / W0;
        const double nc0 = kInvSqrt2Pi * std::sqrt(iv0);
        const double* mk = mz[k].data();
        const double* vk = vz[k].data();
        std::size_t ulo = hi + 1, uhi = 0;
        for (std::size_t r = 0; r < R; ++r) {
          ulo = std::min(ulo, std::max(lo, supp[r][k].lo));
          uhi = std::max(uhi, std::min(hi, supp[r][k].hi));
        }
        if (ulo > uhi) continue;
        for (std::size_t zi = ulo; zi <= uhi; ++zi) {
          const double V1 = W1 + vk[zi];
          const double d1 = th1 - mk[zi];
          const double d0 = th0 - ys[zi];
          const double K = wz[zi] * (kInvSqrt2Pi / std::sqrt(V1) * std::exp(-0.5 * d1 * d1 / V1) -
                                     nc0 * std::exp(-0.5 * d0 * d0 * iv0));
          for (std::size_t r = 0; r < R; ++r) acc[r + 1] += term[r][k][zi] * K;
        }
      }
      for (std::size_t r = 1; r <= R; ++r) term[r][j][yi] = acc[r];
    });
    for (std::size_t r = 0; r <= R; ++r) supp[r][j] = support_of(term[r][j]);
  }

  SeriesResult res;
  for (std::size_t r = 0; r <= R; ++r) {
    DensityField f(grid, chain.t(0), chain.t(J));
    f.values = term[r][J];
    res.terms.push_back(std::move(f));
  }
  finish_series(res, chain.t(J) - chain.t(0));
  return res;
}

// ---------------------------------------------------------------- majorants

double majorant_Q(double r, double z) {
  if (!(r > 1.0)) throw ValidationError("majorant_Q: need r > 1 for integrability in d = 1");
  return 0.5 * (r - 1.0) * std::pow(1.0 + std::abs(z), -r);
}

double majorant_scriptQ(double m, double t, double x) {
  if (!(t > 0.0)) throw ValidationError("majorant_scriptQ: need t > 0");
  const double st = std::sqrt(t);
  return majorant_Q(m, x / st) / st;
}

EnvelopeFit envelope_fit(const std::vector<DensityField>& q, const std::vector<DensityField>& p,
                         const std::vector<double>& gamma1, const std::vector<double>& center, double span,
                         double m) {
  if (q.empty() || q.size() != p.size() || q.size() != gamma1.size() || q.size() != center.size())
    throw ValidationError("envelope_fit: inconsistent inputs");
  EnvelopeFit fit;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (!(q[a].grid == p[a].grid)) throw ValidationError("envelope_fit: grid mismatch");
    const double g = gamma1[a];
    const double scale = std::sqrt(g) * std::pow(std::log(1.0 / g), 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < q[a].grid.n; ++i) {
      const double env = scale * majorant_scriptQ(m, span, q[a].grid.x(i) - center[a]);
      worst = std::max(worst, std::abs(q[a].values[i] - p[a].values[i]) / env);
    }
    fit.max_ratio.push_back(worst);
  }
  fit.kappa = fit.max_ratio[0];
  fit.dominated = true;
  for (std::size_t a = 1; a < fit.max_ratio.size(); ++a)
    if (fit.max_ratio[a] > fit.kappa) fit.dominated = false;
  return fit;
}

}  // namespace sadl
