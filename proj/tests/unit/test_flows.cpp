#include <doctest.h>

#include <cmath>

#include "sadl/flows.hpp"

using namespace sadl;

namespace {
StepSchedule sched(std::int64_t N) { return StepSchedule(1.0, 0.0, 1.0, N); }
}

TEST_CASE("mean ODE examples") {
  auto lin = linear_gaussian_1d(1.0);
  auto tr = solve_mean_ode(lin, vec1(1.0), 1.0);
  CHECK(std::abs(tr(1.0)(0) - std::exp(-1.0)) < 1e-8);
  CHECK(tr(0.0)(0) == 1.0);
  CHECK(tr.initial()(0) == 1.0);
  auto eq = solve_mean_ode(linear_gaussian_1d(1.0, 0.3), vec1(0.3), 2.0);
  for (double t = 0.0; t <= 2.0; t += 0.1) CHECK(eq(t)(0) == 0.3);
}

TEST_CASE("mean ODE residual on interpolated points") {
  auto m = sine_perturbed();
  auto tr = solve_mean_ode(m, vec1(2.0), 3.0);
  const double h = 1e-4;
  for (double t = 0.013; t < 2.9; t += 0.0371) {
    const double d = (tr(t + h)(0) - tr(t - h)(0)) / (2 * h);
    CHECK(std::abs(d + m.h(tr(t))(0)) < 1e-6);
  }
}

TEST_CASE("mean ODE step halving") {
  auto m = sine_perturbed();
  const double a = solve_mean_ode(m, vec1(1.0), 1.0, 0.1)(1.0)(0);
  const double b = solve_mean_ode(m, vec1(1.0), 1.0, 0.05)(1.0)(0);
  const double c = solve_mean_ode(m, vec1(1.0), 1.0, 0.025)(1.0)(0);
  const double ratio = std::abs(a - b) / std::abs(b - c);
  MESSAGE("RK4 refinement ratio ", ratio);
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("flow boundary condition and outer region") {
  auto dyn = build_dynamics(sine_perturbed(), sched(1000), vec1(1.0), 0.5);
  FlowMap lim(dyn, FlowKind::limit), tr(dyn, FlowKind::truncated);
  for (double y : {-7.0, 0.0, 2.5}) {
    CHECK(lim.eval1(0.3, 0.3, y) == y);
    CHECK(tr.eval1(0.3, 0.3, y) == y);
  }
  const double far = dyn.a() + 1.0;
  CHECK(tr.eval1(0.0, 0.5, far) == far);
  CHECK(tr.eval1(0.5, 0.1, -far - 3.0) == -far - 3.0);
}

TEST_CASE("limit flow of the linear model") {
  const double a = 1.3;
  auto dyn = build_dynamics(linear_gaussian_1d(a), sched(1000), vec1(1.0), 1.0);
  FlowMap lim(dyn, FlowKind::limit), plus(dyn, FlowKind::limit, JacobianSign::plus);
  const double ab = dyn.bar_alpha();
  for (double y : {-2.0, 0.7}) {
    CHECK(std::abs(lim.eval1(0.8, 0.1, y) - y * std::exp((ab - a) * 0.7)) < 1e-10);
    CHECK(std::abs(lim.eval1(0.1, 0.8, y) - y * std::exp(-(ab - a) * 0.7)) < 1e-10);
    CHECK(std::abs(plus.eval1(0.8, 0.1, y) - y * std::exp((ab + a) * 0.7)) < 1e-10);
  }
}

TEST_CASE("semigroup and inversion") {
  auto dyn = build_dynamics(sine_perturbed(), sched(1000), vec1(1.0), 0.5);
  for (auto kind : {FlowKind::limit, FlowKind::truncated}) {
    FlowMap f(dyn, kind);
    for (double y : {-5.0, -1.0, 0.4, 3.0, dyn.a() + 0.5}) {
      const double t = 0.05, u = 0.23, s = 0.47;
      CHECK(std::abs(f.eval1(t, u, f.eval1(u, s, y)) - f.eval1(t, s, y)) < 1e-6);
      CHECK(std::abs(f.eval1(s, t, f.eval1(t, s, y)) - y) < 1e-6);
    }
  }
}

TEST_CASE("beta defect examples") {
  auto at_root = build_dynamics(linear_gaussian_1d(1.0), sched(1000), vec1(0.0), 0.5);
  for (std::size_t k = 0; k < at_root.grid().M; ++k) CHECK(beta_defect(at_root, k)(0) == 0.0);

  auto dyn = build_dynamics(linear_gaussian_1d(1.0), sched(1000), vec1(1.0), 0.5);
  for (std::size_t k = 0; k <= dyn.grid().M; ++k)
    CHECK(std::abs(beta_defect(dyn, k)(0)) <= 2.0 * std::pow(dyn.gamma(k + 1), 1.5));
}

TEST_CASE("beta defect ratio is stable and the defect shrinks") {
  for (const auto& m : {linear_gaussian_1d(1.0), sine_perturbed()}) {
    std::vector<double> ratio, maxb;
    for (std::int64_t N : {100, 1000, 10000}) {
      auto dyn = build_dynamics(m, sched(N), vec1(1.0), 0.5);
      double r = 0.0, b = 0.0;
      for (std::size_t k = 0; k <= dyn.grid().M; ++k) {
        const double v = std::abs(beta_defect(dyn, k)(0));
        r = std::max(r, v / std::pow(dyn.gamma(k + 1), 1.5));
        b = std::max(b, v);
      }
      ratio.push_back(r);
      maxb.push_back(b);
    }
    CHECK(std::max({ratio[0], ratio[1], ratio[2]}) / std::min({ratio[0], ratio[1], ratio[2]}) <= 2.0);
    CHECK(maxb[1] < maxb[0]);
    CHECK(maxb[2] < maxb[1]);
  }
}

TEST_CASE("sigma bar") {
  auto lin = linear_gaussian_1d(1.0, 0.0, 2.5);
  auto tr = solve_mean_ode(lin, vec1(1.0), 1.0);
  CHECK(std::abs(sigma_bar(lin, tr, 0.2, 0.9)(0, 0) - 0.7 * 2.5) < 1e-13);

  auto m = sine_perturbed();
  auto ts = solve_mean_ode(m, vec1(1.0), 1.5);
  const double eps = 1e-6;
  const double slope = sigma_bar(m, ts, 0.4, 0.4 + eps)(0, 0) / eps;
  CHECK(std::abs(slope - m.R(ts(0.4))(0, 0)) < 1e-6);

  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += m.R(ts((i + 0.5) / n))(0, 0);
  acc /= n;
  CHECK(std::abs(sigma_bar(m, ts, 0.0, 1.0)(0, 0) - acc) < 1e-7);
}

TEST_CASE("limit moments of the OU case") {
  const double a = 1.0;
  auto dyn = build_dynamics(linear_gaussian_1d(a, 0.0, 1.0), sched(1000), vec1(1.0), 1.0);
  const double c = dyn.bar_alpha() - a;
  auto g = limit_moments(dyn.model(), dyn.mean(), dyn.bar_alpha(), vec1(0.5), 1.0);
  CHECK(std::abs(g.mean(0) - 0.5 * std::exp(c)) < 1e-10);
  CHECK(std::abs(g.cov(0, 0) - (std::exp(2 * c) - 1.0) / (2 * c)) < 1e-10);
}
