#include "sadl/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sadl/error.hpp"

namespace sadl {

Vec PathArray::state(std::size_t p, std::size_t k) const {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = at(p, k, i);
  return v;
}

void PathArray::set_state(std::size_t p, std::size_t k, const Vec& v) {
  for (int i = 0; i < dim; ++i) at(p, k, i) = v(i);
}

namespace {

bool diverged(const Vec& x) { return !x.allFinite() || x.norm() > kDivergenceBound; }

std::size_t resolve_steps(const TruncatedDynamics& dyn, std::size_t n_steps) {
  const std::size_t M = dyn.grid().M;
  if (n_steps == 0) return M;
  if (n_steps > M) throw ValidationError("requested " + std::to_string(n_steps) + " steps but the grid has " +
                                         std::to_string(M));
  return n_steps;
}

Vec v_step(const TruncatedDynamics& dyn, std::size_t k, const Vec& V, const Vec& eta) {
  const double g = dyn.gamma(k + 1);
  const ProblemModel& m = dyn.model();
  return V + g * dyn.drift(k, V) - std::sqrt(g) * m.innovation(dyn.noise_point(k, V), eta);
}

}  // namespace

ChainPath run_rm(const ProblemModel& model, const StepSchedule& schedule, const Vec& theta0, std::size_t n_steps,
                 RandomSource& rng, bool log_eta) {
  if (n_steps < 1) throw ValidationError("run_rm: n_steps must be >= 1");
  if (theta0.size() != model.dim) throw ValidationError("run_rm: theta0 has wrong dimension");
  ChainPath p;
  p.values.reserve(n_steps + 1);
  p.values.push_back(theta0);
  Vec th = theta0;
  for (std::size_t n = 0; n < n_steps; ++n) {
    const Vec eta = draw_eta(model.dim, rng);
    if (log_eta) p.eta.push_back(eta);
    const double g = schedule.gamma_shifted(static_cast<std::int64_t>(n) + 1);
    th = th - g * (model.h(th) + model.innovation(th, eta));
    if (diverged(th)) {
      p.diverged = true;
      p.diverged_at = n + 1;
      break;
    }
    p.values.push_back(th);
  }
  return p;
}

ChainPath run_U(const TruncatedDynamics& dyn, const Vec& theta0N, RandomSource& rng, UMode mode,
                std::size_t n_steps, bool log_eta) {
  const std::size_t n = resolve_steps(dyn, n_steps);
  const ProblemModel& m = dyn.model();
  if (theta0N.size() != m.dim) throw ValidationError("run_U: theta0 has wrong dimension");
  ChainPath p;
  p.values.reserve(n + 1);
  Vec U = (theta0N - dyn.mean_at(0)) / std::sqrt(dyn.gamma(0));
  p.values.push_back(U);
  Vec th = theta0N;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec eta = draw_eta(m.dim, rng);
    if (log_eta) p.eta.push_back(eta);
    const double g = dyn.gamma(k + 1);
    if (mode == UMode::direct) {
      th = th - g * (m.h(th) + m.innovation(th, eta));
      U = (th - dyn.mean_at(k + 1)) / std::sqrt(g);
    } else {
      const Vec point = dyn.mean_at(k) + std::sqrt(dyn.gamma(k)) * U;
      U = U + g * (dyn.G(k, U) * U) - std::sqrt(g) * m.innovation(point, eta) + beta_defect(dyn, k);
      th = dyn.mean_at(k + 1) + std::sqrt(g) * U;
    }
    if (diverged(th)) {
      p.diverged = true;
      p.diverged_at = k + 1;
      break;
    }
    p.values.push_back(U);
  }
  return p;
}

ChainPath run_V(const TruncatedDynamics& dyn, const Vec& V0, RandomSource& rng, std::size_t n_steps, bool log_eta) {
  const std::size_t n = resolve_steps(dyn, n_steps);
  const ProblemModel& m = dyn.model();
  if (V0.size() != m.dim) throw ValidationError("run_V: V0 has wrong dimension");
  ChainPath p;
  p.values.reserve(n + 1);
  Vec V = V0;
  p.values.push_back(V);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec eta = draw_eta(m.dim, rng);
    if (log_eta) p.eta.push_back(eta);
    V = v_step(dyn, k, V, eta);
    p.values.push_back(V);
  }
  return p;
}

std::vector<Vec> frozen_flow_table(const TruncatedDynamics& dyn, const FlowMap& truncated_flow, const Vec& y,
                                   std::size_t i, std::size_t j) {
  if (!(i < j) || j > dyn.grid().M) throw ValidationError("frozen chain: need i < j <= M");
  if (truncated_flow.kind() != FlowKind::truncated) throw ValidationError("frozen chain: needs the truncated flow");
  std::vector<Vec> tab(j - i + 1);
  tab[j - i] = y;
  for (std::size_t k = j; k > i; --k) tab[k - 1 - i] = truncated_flow(dyn.t(k - 1), dyn.t(k), tab[k - i]);
  return tab;
}

FrozenChainPath run_frozen_chain(const TruncatedDynamics& dyn, const FlowMap& truncated_flow, const Vec& y,
                                 std::size_t i, std::size_t j, const Vec& start, RandomSource& rng) {
  const ProblemModel& m = dyn.model();
  FrozenChainPath out;
  out.flow = frozen_flow_table(dyn, truncated_flow, y, i, j);
  out.values.push_back(start);
  Vec V = start;
  for (std::size_t k = i; k < j; ++k) {
    const Vec eta = draw_eta(m.dim, rng);
    const Vec& th = out.flow[k - i];
    const Vec point = dyn.mean_at(k) + std::sqrt(dyn.gamma(k)) * dyn.params().chi(th);
    const Vec xi = m.innovation(point, eta);
    V = V + (out.flow[k + 1 - i] - th) - std::sqrt(dyn.gamma(k + 1)) * xi;
    out.xi.push_back(xi);
    out.values.push_back(V);
  }
  return out;
}

double default_diffusion_dt(const TruncatedDynamics& dyn) { return dyn.gamma(dyn.grid().M) / 2.0; }

namespace {

struct PlanStep {
  double u = 0.0;
  double h = 0.0;
  std::size_t k = 0;
  Mat C;  // linear drift matrix (limit, stationary)
  Mat S;  // noise square root
  long record = -1;
};

std::vector<PlanStep> make_plan(const TruncatedDynamics& dyn, const DiffusionConfig& cfg,
                                const std::vector<double>& record_times, bool& record_zero) {
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_diffusion_dt(dyn);
  const ProblemModel& m = dyn.model();
  const int d = m.dim;
  const Mat I = Mat::Identity(d, d);
  std::vector<PlanStep> plan;
  double u = 0.0;
  record_zero = false;
  Mat Cst, Sst;
  if (cfg.kind == DiffusionKind::stationary) {
    Cst = dyn.bar_alpha() * I - m.Dh(m.root);
    Sst = sym_sqrt(m.R(m.root));
  }
  for (std::size_t r = 0; r < record_times.size(); ++r) {
    const double tau = record_times[r];
    if (r > 0 && tau < record_times[r - 1]) throw ValidationError("run_diffusion: record times must be sorted");
    if (tau < 0.0) throw ValidationError("run_diffusion: negative record time");
    if (tau == u) {
      if (plan.empty()) record_zero = true;
      else plan.back().record = static_cast<long>(r);
      continue;
    }
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((tau - u) / dt - 1e-9)));
    const double h = (tau - u) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      PlanStep st;
      st.u = u + static_cast<double>(i) * h;
      st.h = h;
      if (cfg.kind == DiffusionKind::stationary) {
        st.C = Cst;
        st.S = Sst;
      } else {
        const Vec mb = dyn.mean()(st.u);
        if (cfg.kind == DiffusionKind::limit) st.C = dyn.bar_alpha() * I - m.Dh(mb);
        else st.k = dyn.step_index(st.u);
        st.S = sym_sqrt(m.R(mb));
      }
      plan.push_back(std::move(st));
    }
    plan.back().record = static_cast<long>(r);
    u = tau;
  }
  return plan;
}

ChainPath run_plan(const TruncatedDynamics& dyn, DiffusionKind kind, const std::vector<PlanStep>& plan,
                   bool record_zero, std::size_t n_records, const Vec& X0, RandomSource& rng) {
  const int d = dyn.model().dim;
  ChainPath p;
  p.values.reserve(n_records);
  Vec X = X0;
  if (record_zero) p.values.push_back(X);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const PlanStep& st = plan[i];
    const Vec eta = draw_eta(d, rng);
    const Vec drift = kind == DiffusionKind::truncated ? dyn.drift(st.k, X) : Vec(st.C * X);
    X = X + st.h * drift + std::sqrt(st.h) * (st.S * eta);
    if (!X.allFinite()) {
      p.diverged = true;
      p.diverged_at = i + 1;
      break;
    }
    if (st.record >= 0) p.values.push_back(X);
  }
  return p;
}

}  // namespace

ChainPath run_diffusion(const TruncatedDynamics& dyn, const DiffusionConfig& cfg, const Vec& X0,
                        const std::vector<double>& record_times, RandomSource& rng) {
  if (X0.size() != dyn.model().dim) throw ValidationError("run_diffusion: X0 has wrong dimension");
  if (cfg.dt < 0.0) throw ValidationError("run_diffusion: dt must be positive");
  if (cfg.dt > 0.0 && cfg.dt > dyn.gamma(1) * (1 + 1e-12))
    throw ValidationError("run_diffusion: dt must not exceed gamma_1^N");
  bool rz = false;
  const auto plan = make_plan(dyn, cfg, record_times, rz);
  return run_plan(dyn, cfg.kind, plan, rz, record_times.size(), X0, rng);
}

PathBundle simulate_bundle(const TruncatedDynamics& dyn, const BundleRequest& req, Exec ex) {
  const ProblemModel& m = dyn.model();
  const int d = m.dim;
  PathBundle b;
  b.grid = dyn.grid();
  b.times = dyn.grid().t;
  b.master_seed = req.seed;
  const std::size_t nt = b.times.size();
  const std::size_t M = dyn.grid().M;
  const Vec theta0N = req.theta0N.size() ? req.theta0N : dyn.mean_at(0);
  const Vec X0 = req.X0.size() ? req.X0 : Vec(Vec::Zero(d));
  const Vec U0 = (theta0N - dyn.mean_at(0)) / std::sqrt(dyn.gamma(0));

  bool want_u = false, want_v = false;
  for (const auto& name : req.processes) {
    if (name == "U") want_u = true;
    if (name == "V") want_v = true;
  }
  b.innovations_shared = want_u && want_v;

  std::vector<std::vector<PathFlag>> flags(req.n_paths);
  for (const auto& name : req.processes) {
    PathArray arr(req.n_paths, nt, d);
    std::fill(arr.data.begin(), arr.data.end(), std::numeric_limits<double>::quiet_NaN());
    auto store = [&](std::size_t p, const ChainPath& cp) {
      for (std::size_t k = 0; k < cp.values.size() && k < nt; ++k) arr.set_state(p, k, cp.values[k]);
      if (cp.diverged) flags[p].push_back({name, p, cp.diverged_at, "divergence guard"});
    };
    if (name == "theta") {
      for_each_index(ex, req.n_paths, [&](std::size_t p) {
        RandomSource rng(req.seed, p, StreamTag::renormalized);
        store(p, run_rm(m, dyn.schedule(), theta0N, M, rng));
      });
    } else if (name == "U") {
      for_each_index(ex, req.n_paths, [&](std::size_t p) {
        RandomSource rng(req.seed, p, StreamTag::renormalized);
        store(p, run_U(dyn, theta0N, rng, UMode::direct));
      });
    } else if (name == "V") {
      for_each_index(ex, req.n_paths, [&](std::size_t p) {
        RandomSource rng(req.seed, p, StreamTag::renormalized);
        store(p, run_V(dyn, U0, rng));
      });
    } else if (name == "X" || name == "X_trunc" || name == "X_star") {
      DiffusionConfig cfg;
      cfg.kind = name == "X" ? DiffusionKind::limit
                             : (name == "X_trunc" ? DiffusionKind::truncated : DiffusionKind::stationary);
      cfg.dt = req.dt;
      if (cfg.kind == DiffusionKind::stationary && !check_lyapunov(m, dyn.schedule()))
        throw ValidationError("X_star requested but the Lyapunov condition fails for this model and schedule");
      bool rz = false;
      const auto plan = make_plan(dyn, cfg, b.times, rz);
      for_each_index(ex, req.n_paths, [&](std::size_t p) {
        RandomSource rng(req.seed, p, StreamTag::diffusion);
        store(p, run_plan(dyn, cfg.kind, plan, rz, nt, X0, rng));
      });
    } else if (name == "V_frozen") {
      const FlowMap fl(dyn, FlowKind::truncated);
      const Vec y = Vec::Zero(d);
      for_each_index(ex, req.n_paths, [&](std::size_t p) {
        RandomSource rng(req.seed, p, StreamTag::frozen_chain);
        const FrozenChainPath fc = run_frozen_chain(dyn, fl, y, 0, M, U0, rng);
        ChainPath cp;
        cp.values = fc.values;
        store(p, cp);
      });
    } else {
      throw ValidationError("unknown process '" + name + "' (expected theta, U, V, X, X_trunc, X_star, V_frozen)");
    }
    b.paths.emplace(name, std::move(arr));
  }
  for (auto& f : flags)
    for (auto& x : f) b.flags.push_back(std::move(x));
  return b;
}

CoupledSweep simulate_coupled_sweep(const std::vector<const TruncatedDynamics*>& dyns, const Vec& V0,
                                    std::size_t n_paths, std::uint64_t seed, Exec ex) {
  if (dyns.empty()) throw ValidationError("coupled sweep: no dynamics given");
  for (auto* d : dyns)
    if (d->model().dim != 1) throw ValidationError("coupled sweep: d = 1 only");
  CoupledSweep out;
  // union of normalized grid times
  std::vector<double> uni;
  std::vector<std::vector<double>> norm(dyns.size());
  for (std::size_t a = 0; a < dyns.size(); ++a) {
    const auto& g = dyns[a]->grid();
    const double tM = g.t[g.M];
    out.Ns.push_back(g.N);
    out.t_terminal.push_back(tM);
    for (std::size_t k = 1; k <= g.M; ++k) {
      const double u = (k == g.M) ? 1.0 : g.t[k] / tM;
      norm[a].push_back(u);
      uni.push_back(u);
    }
  }
  std::sort(uni.begin(), uni.end());
  uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
  std::vector<std::vector<std::size_t>> pos(dyns.size());
  for (std::size_t a = 0; a < dyns.size(); ++a)
    for (double u : norm[a])
      pos[a].push_back(static_cast<std::size_t>(std::lower_bound(uni.begin(), uni.end(), u) - uni.begin()));
  std::vector<double> sq(uni.size());
  for (std::size_t i = 0; i < uni.size(); ++i) sq[i] = std::sqrt(uni[i] - (i ? uni[i - 1] : 0.0));

  out.terminal.assign(dyns.size(), std::vector<double>(n_paths));
  for_each_index(ex, n_paths, [&](std::size_t p) {
    RandomSource rng(seed, p, StreamTag::brownian_sweep);
    std::vector<double> B(uni.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < uni.size(); ++i) {
      acc += sq[i] * rng.normal();
      B[i] = acc;
    }
    for (std::size_t a = 0; a < dyns.size(); ++a) {
      const TruncatedDynamics& dyn = *dyns[a];
      const double rt = std::sqrt(out.t_terminal[a]);
      Vec V = V0;
      double prev = 0.0;
      for (std::size_t k = 0; k < dyn.grid().M; ++k) {
        const double cur = B[pos[a][k]];
        const Vec eta = vec1(rt * (cur - prev) / std::sqrt(dyn.gamma(k + 1)));
        prev = cur;
        V = v_step(dyn, k, V, eta);
      }
      out.terminal[a][p] = V(0);
    }
  });
  return out;
}

std::vector<double> terminal_chain_samples(const TruncatedDynamics& dyn, double V0, std::size_t j,
                                           std::size_t n_paths, std::uint64_t seed, Exec ex) {
  if (dyn.model().dim != 1) throw ValidationError("terminal_chain_samples: d = 1 only");
  if (j > dyn.grid().M) throw ValidationError("terminal_chain_samples: step beyond grid");
  std::vector<double> out(n_paths);
  for_each_index(ex, n_paths, [&](std::size_t p) {
    RandomSource rng(seed, p, StreamTag::chain_histogram);
    Vec V = vec1(V0);
    for (std::size_t k = 0; k < j; ++k) V = v_step(dyn, k, V, vec1(rng.normal()));
    out[p] = V(0);
  });
  return out;
}

std::vector<double> terminal_diffusion_samples(const TruncatedDynamics& dyn, const DiffusionConfig& cfg, double X0,
                                               double t, std::size_t n_paths, std::uint64_t seed, Exec ex) {
  if (dyn.model().dim != 1) throw ValidationError("terminal_diffusion_samples: d = 1 only");
  bool rz = false;
  const auto plan = make_plan(dyn, cfg, {t}, rz);
  std::vector<double> out(n_paths);
  for_each_index(ex, n_paths, [&](std::size_t p) {
    RandomSource rng(seed, p, StreamTag::diffusion);
    const ChainPath cp = run_plan(dyn, cfg.kind, plan, rz, 1, vec1(X0), rng);
    out[p] = cp.diverged ? std::numeric_limits<double>::quiet_NaN() : cp.values.back()(0);
  });
  return out;
}

}  // namespace sadl
