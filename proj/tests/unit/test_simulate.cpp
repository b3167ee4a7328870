#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sadl/error.hpp"
#include "sadl/metrics.hpp"
#include "sadl/path_io.hpp"
#include "sadl/simulate.hpp"

using namespace sadl;

namespace {
StepSchedule sched(std::int64_t N) { return StepSchedule(1.0, 0.0, 1.0, N); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}
double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}
}  // namespace

TEST_CASE("Robbins-Monro noiseless examples") {
  auto m = linear_gaussian_1d(1.0, 0.0, 0.0);
  StepSchedule s(1.0, 0.0, 1.0);
  RandomSource rng(1);
  auto p = run_rm(m, s, vec1(3.0), 5, rng);
  CHECK(p.values[1](0) == 0.0);
  auto q = run_rm(m, s, vec1(0.0), 50, rng);
  for (auto& v : q.values) CHECK(v(0) == 0.0);
  CHECK_THROWS_AS(run_rm(m, s, vec1(0.0), 0, rng), ValidationError);
}

TEST_CASE("Robbins-Monro consistency") {
  auto m = linear_gaussian_1d(1.0, 0.0, 1.0);
  StepSchedule s(1.0, 0.0, 1.0);
  const std::size_t n = 10000;
  std::vector<double> last(n);
  for_each_index(Exec::parallel, n, [&](std::size_t p) {
    RandomSource rng(42, p, StreamTag::robbins_monro);
    last[p] = run_rm(m, s, vec1(1.0), 10000, rng).values.back()(0);
  });
  const double se = std::sqrt(var_of(last) / n);
  CHECK(std::abs(mean_of(last)) < 3.0 * se);
}

TEST_CASE("Robbins-Monro divergence is flagged") {
  // gamma_k > 2 for the first couple hundred steps, so theta overshoots geometrically
  auto m = linear_gaussian_1d(1.0, 0.0, 0.0);
  StepSchedule s(50.0, 0.0, 0.6);
  RandomSource rng(1);
  auto p = run_rm(m, s, vec1(1.0), 500, rng);
  CHECK(p.diverged);
  CHECK(p.diverged_at > 0);
}

TEST_CASE("direct and representation modes agree") {
  Mat A(2, 2), S(2, 2);
  A << 1.0, 0.3, 0.1, 2.0;
  S << 1.0, 0.2, 0.2, 0.5;
  Vec root(2), th0(2);
  root << 0.5, -0.2;
  th0 << 1.5, 0.4;
  auto dyn = build_dynamics(linear_gaussian(A, root, S), sched(100), th0, 2.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RandomSource r1(seed), r2(seed);
    auto a = run_U(dyn, th0, r1, UMode::direct, 100);
    auto b = run_U(dyn, th0, r2, UMode::lemma1, 100);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) worst = std::max(worst, (a.values[k] - b.values[k]).norm());
    CHECK(worst < 1e-9);
  }
  // sine model, state-dependent noise
  auto dyn2 = build_dynamics(sine_perturbed(), sched(100), vec1(1.0), 2.0);
  RandomSource r1(9), r2(9);
  auto a = run_U(dyn2, vec1(1.2), r1, UMode::direct);
  auto b = run_U(dyn2, vec1(1.2), r2, UMode::lemma1);
  for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(std::abs(a.values[k](0) - b.values[k](0)) < 1e-9);
}

TEST_CASE("noiseless U is driven by the defects only") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0, 0.0, 0.0), sched(1000), vec1(1.0), 0.5);
  RandomSource rng(3);
  auto p = run_U(dyn, dyn.mean_at(0), rng, UMode::direct);
  CHECK(p.values[0](0) == 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < p.values.size(); ++k) {
    acc += std::abs(beta_defect(dyn, k)(0));
    CHECK(std::abs(p.values[k + 1](0)) <= acc / std::sqrt(dyn.gamma(k + 1)) + 1e-12);
  }
  CHECK(std::abs(p.values.back()(0)) < 1e-2);
}

TEST_CASE("first step of U by hand") {
  auto m = sine_perturbed();
  auto dyn = build_dynamics(m, sched(1000), vec1(1.0), 0.5);
  RandomSource rng(77);
  const Vec th0 = vec1(1.1);
  auto p = run_U(dyn, th0, rng, UMode::lemma1, 1, true);
  const double H = m.h(th0)(0) + m.innovation(th0, p.eta[0])(0);
  const double expect = (th0(0) - dyn.gamma(1) * H - dyn.mean_at(1)(0)) / std::sqrt(dyn.gamma(1));
  CHECK(std::abs(p.values[1](0) - expect) < 1e-10);
}

TEST_CASE("U minus V stays inside the defect envelope in the ball") {
  const double a_mat = 1.0;
  auto dyn = build_dynamics(linear_gaussian_1d(a_mat), sched(1000), vec1(1.0), 0.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource r1(seed), r2(seed);
    auto U = run_U(dyn, dyn.mean_at(0), r1, UMode::direct);
    auto V = run_V(dyn, vec1(0.0), r2);
    double env = 0.0;
    for (std::size_t k = 0; k + 1 < U.values.size(); ++k) {
      if (std::abs(U.values[k](0)) > dyn.a() || std::abs(V.values[k](0)) > dyn.a()) break;
      const double G = std::abs(dyn.G(k, U.values[k])(0, 0));
      env = (1.0 + dyn.gamma(k + 1) * G) * env + std::abs(beta_defect(dyn, k)(0));
      CHECK(std::abs(U.values[k + 1](0) - V.values[k + 1](0)) <= env + 1e-12);
    }
  }
}

TEST_CASE("V frozen beyond the truncation radius without noise") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0, 0.0, 0.0), sched(1000), vec1(1.0), 0.5);
  RandomSource rng(1);
  const double v0 = dyn.a() + 1.0;
  auto p = run_V(dyn, vec1(v0), rng);
  for (auto& v : p.values) CHECK(v(0) == v0);
}

TEST_CASE("sup-path statistic scales like sqrt(gamma_1)") {
  std::vector<double> q99, g1;
  for (std::int64_t N : {100, 10000}) {
    auto dyn = build_dynamics(linear_gaussian_1d(1.0), sched(N), vec1(1.0), 1.0);
    BundleRequest req;
    req.processes = {"U", "V"};
    req.n_paths = 500;
    req.seed = 5;
    auto b = simulate_bundle(dyn, req);
    q99.push_back(sup_path_distance(b, "U", "V").q99);
    g1.push_back(dyn.gamma(1));
  }
  const double predicted = std::sqrt(g1[0] / g1[1]);
  const double measured = q99[0] / q99[1];
  MESSAGE("sup ratio ", measured, " predicted ", predicted);
  CHECK(measured / predicted >= 0.5);
  CHECK(measured / predicted <= 2.0);
}

TEST_CASE("variance of U at T approaches the OU variance") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0), sched(10000), vec1(1.0), 0.5);
  const std::size_t n = 10000;
  std::vector<double> last(n);
  for_each_index(Exec::parallel, n, [&](std::size_t p) {
    RandomSource rng(8, p, StreamTag::renormalized);
    last[p] = run_U(dyn, dyn.mean_at(0), rng, UMode::direct).values.back()(0);
  });
  const double tM = dyn.grid().t[dyn.grid().M];
  const double v = limit_moments(dyn.model(), dyn.mean(), dyn.bar_alpha(), vec1(0.0), tM).cov(0, 0);
  CHECK(std::abs(var_of(last) / v - 1.0) < 0.05);
}

TEST_CASE("frozen chain telescoping identity") {
  auto dyn = build_dynamics(sine_perturbed(), sched(1000), vec1(1.0), 0.5);
  FlowMap fl(dyn, FlowKind::truncated);
  RandomSource rng(4);
  const std::size_t i = 3, j = 40;
  const double y = 0.8;
  auto fc = run_frozen_chain(dyn, fl, vec1(y), i, j, vec1(0.1), rng);
  for (std::size_t k = i; k <= j; ++k) {
    double s = 0.0;
    for (std::size_t l = k; l < j; ++l) s += std::sqrt(dyn.gamma(l + 1)) * fc.xi[l - i](0);
    const double r = fc.values[j - i](0) - fc.values[k - i](0) - (y - fc.flow[k - i](0)) + s;
    CHECK(std::abs(r) < 1e-9);
  }
  CHECK(fc.flow[j - i](0) == y);
}

TEST_CASE("frozen chain without noise follows the flow") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0, 0.0, 0.0), sched(1000), vec1(1.0), 0.5);
  FlowMap fl(dyn, FlowKind::truncated);
  RandomSource rng(4);
  auto fc = run_frozen_chain(dyn, fl, vec1(1.5), 0, 60, vec1(0.2), rng);
  for (std::size_t k = 0; k < fc.values.size(); ++k)
    CHECK(std::abs(fc.values[k](0) - (0.2 + fc.flow[k](0) - fc.flow[0](0))) < 1e-14);
}

TEST_CASE("frozen chain increments are centered") {
  auto dyn = build_dynamics(sine_perturbed(), sched(1000), vec1(1.0), 0.5);
  FlowMap fl(dyn, FlowKind::truncated);
  const std::size_t n = 100000;
  const auto tab = frozen_flow_table(dyn, fl, vec1(0.5), 0, 5);
  std::vector<double> inc(n);
  for_each_index(Exec::parallel, n, [&](std::size_t p) {
    RandomSource rng(11, p, StreamTag::frozen_chain);
    auto fc = run_frozen_chain(dyn, fl, vec1(0.5), 0, 5, vec1(0.0), rng);
    inc[p] = (fc.values[5](0) - fc.values[0](0)) - (tab[5](0) - tab[0](0));
  });
  CHECK(std::abs(mean_of(inc)) < 3.0 * std::sqrt(var_of(inc) / n));
}

TEST_CASE("limit diffusion moments match OU") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0), sched(100), vec1(1.0), 1.0);
  DiffusionConfig cfg;
  cfg.kind = DiffusionKind::limit;
  cfg.dt = dyn.gamma(1);
  const std::size_t n = 100000;
  auto xs = terminal_diffusion_samples(dyn, cfg, 0.5, 1.0, n, 21);
  const double c = dyn.bar_alpha() - 1.0;
  const double m = 0.5 * std::exp(c), v = (std::exp(2 * c) - 1.0) / (2 * c);
  CHECK(std::abs(mean_of(xs) - m) < 3.0 * std::sqrt(v / n));
  CHECK(std::abs(var_of(xs) - v) < 3.0 * v * std::sqrt(2.0 / n));
}

TEST_CASE("noiseless diffusions") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0, 0.0, 0.0), sched(1000), vec1(1.0), 0.5);
  FlowMap lim(dyn, FlowKind::limit);
  DiffusionConfig cfg;
  RandomSource rng(2);
  std::vector<double> rec{0.1, 0.25, 0.5};
  auto p = run_diffusion(dyn, cfg, vec1(1.0), rec, rng);
  for (std::size_t i = 0; i < rec.size(); ++i)
    CHECK(std::abs(p.values[i](0) - lim.eval1(rec[i], 0.0, 1.0)) < 10.0 * default_diffusion_dt(dyn));
  cfg.kind = DiffusionKind::truncated;
  const double far = dyn.a() + 1.5;
  auto q = run_diffusion(dyn, cfg, vec1(far), rec, rng);
  for (auto& v : q.values) CHECK(v(0) == far);
  cfg.dt = 1.0;
  CHECK_THROWS_AS(run_diffusion(dyn, cfg, vec1(0.0), rec, rng), ValidationError);
}

TEST_CASE("bundles are reproducible and schedule independent") {
  auto dyn = build_dynamics(sine_perturbed(), sched(100), vec1(1.0), 0.5);
  BundleRequest req;
  req.processes = {"theta", "U", "V", "X", "X_trunc", "V_frozen"};
  req.n_paths = 37;
  req.seed = 99;
  auto a = simulate_bundle(dyn, req, Exec::parallel);
  auto b = simulate_bundle(dyn, req, Exec::serial);
  auto c = simulate_bundle(dyn, req, Exec::parallel);
  CHECK(a.innovations_shared);
  for (auto& [name, arr] : a.paths) {
    CHECK(arr.data == b.paths.at(name).data);
    CHECK(arr.data == c.paths.at(name).data);
  }
  for (std::size_t p = 0; p < 37; ++p) CHECK(a.paths.at("U").at(p, 0, 0) == a.paths.at("V").at(p, 0, 0));
  req.seed = 100;
  auto d = simulate_bundle(dyn, req);
  CHECK(d.paths.at("U").data != a.paths.at("U").data);
  req.processes = {"bogus"};
  CHECK_THROWS_AS(simulate_bundle(dyn, req), ValidationError);
}

TEST_CASE("CSV and binary cache") {
  auto dyn = build_dynamics(linear_gaussian_1d(1.0), sched(100), vec1(1.0), 0.1);
  BundleRequest req;
  req.processes = {"U"};
  req.n_paths = 3;
  auto b = simulate_bundle(dyn, req);
  std::ostringstream os;
  write_process_csv(os, b, "U");
  const std::string s = os.str();
  CHECK(s.rfind("path_id,k,t,x_1\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : s) lines += ch == '\n';
  CHECK(lines == 1 + 3 * b.times.size());
  CHECK(s.find('\r') == std::string::npos);

  const std::string file = "test_cache_roundtrip.bin";
  write_cache(file, b.times, b.paths.at("U"));
  auto back = read_cache(file);
  CHECK(back.times == b.times);
  CHECK(back.paths.data == b.paths.at("U").data);
  CHECK(back.paths.n_paths == 3);
  std::remove(file.c_str());
  CHECK(fmt_num(0.1) == "0.1");
}
