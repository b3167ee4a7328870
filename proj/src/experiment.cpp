#include "sadl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sadl/error.hpp"
#include "sadl/flows.hpp"
#include "sadl/metrics.hpp"
#include "sadl/parametrix.hpp"
#include "sadl/path_io.hpp"
#include "sadl/simulate.hpp"
#include "sadl/svg.hpp"

namespace fs = std::filesystem;

namespace sadl {

namespace {

std::string num(double x) { return fmt_num(x); }

std::ofstream open_csv(const RunContext& ctx, const std::string& file) {
  std::ofstream f(ctx.path(file), std::ios::binary);
  if (!f) throw ValidationError("cannot write " + ctx.path(file));
  return f;
}

void say(const RunContext& ctx, const std::string& s) {
  if (ctx.log) *ctx.log << s << '\n';
}

TruncatedDynamics dynamics_for(const ExperimentConfig& c, std::int64_t N, double T) {
  return build_dynamics(c.model(), StepSchedule(c.A, c.B, c.beta, N), c.theta0, T);
}

void write_density(const RunContext& ctx, const std::string& file, const DensityField& f) {
  auto o = open_csv(ctx, file);
  o << "x,value\n";
  for (std::size_t i = 0; i < f.grid.n; ++i) o << num(f.grid.x(i)) << ',' << num(f.values[i]) << '\n';
}

nlohmann::json series_json(const SeriesResult& r) {
  nlohmann::json j;
  j["mass"] = r.total.integral();
  j["boundary_mass"] = r.total.boundary_mass();
  j["term_sup"] = r.term_sup;
  j["term_mass"] = r.term_mass;
  j["sup_ratio"] = r.sup_ratio;
  j["implied_constant"] = r.implied_constant;
  j["resolution_failure"] = r.resolution_failure;
  j["leak"] = r.leak;
  j["note"] = r.note;
  return j;
}

}  // namespace

RunContext::RunContext(ExperimentConfig c, std::string dir, std::ostream* l, Exec ex)
    : cfg(std::move(c)), out_dir(std::move(dir)), exec(ex), log(l) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const std::string probe = (fs::path(out_dir) / ".write_probe").string();
  std::ofstream f(probe);
  if (ec || !f)
    throw ValidationError(fmt::format("{}:{}: output.dir: '{}' is not writable", cfg.file.source(),
                                      cfg.file.line_of("output.dir"), out_dir));
  f.close();
  fs::remove(probe, ec);
}

std::string RunContext::path(const std::string& file) const { return (fs::path(out_dir) / file).string(); }

// ---------------------------------------------------------------- validate-model

void stage_validate_model(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const ProblemModel m = c.model();
  std::vector<Vec> thetas;
  for (int s = -3; s <= 3; ++s)
    for (int i = 0; i < m.dim; ++i) {
      if (s == 0 && i > 0) continue;
      Vec th = m.root;
      th(i) += s;
      thetas.push_back(th);
    }
  const auto rows = validate_model(m, thetas, 4000, c.seed);
  auto o = open_csv(ctx, "model_check.csv");
  o << "check,theta,value,bound,pass\n";
  bool all = true;
  for (const auto& r : rows) {
    std::string th;
    for (int i = 0; i < r.theta.size(); ++i) th += (i ? " " : "") + num(r.theta(i));
    o << r.check << ',' << th << ',' << num(r.value) << ',' << num(r.bound) << ',' << (r.pass ? "true" : "false")
      << '\n';
    all = all && r.pass;
  }
  const bool lyap = check_lyapunov(m, c.schedule());
  o << "lyapunov,," << (lyap ? 1 : 0) << ",1," << (lyap ? "true" : "false") << '\n';
  ctx.add("model_check.csv", "validate-model");
  say(ctx, fmt::format("validate-model: {} checks, all pass: {}, lyapunov: {}", rows.size(), all, lyap));
}

// ---------------------------------------------------------------- truncation-report

void stage_truncation_report(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto tp = TruncationParams::from_schedule(c.schedule());
  {
    auto o = open_csv(ctx, "truncation_phi.csv");
    o << "u,phi,chi\n";
    const std::size_t n = 401;
    const double hi = tp.a + 1.5;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = hi * static_cast<double>(i) / static_cast<double>(n - 1);
      o << num(u) << ',' << num(tp.phi(u)) << ',' << num(tp.chi1(u)) << '\n';
    }
  }
  {
    auto o = open_csv(ctx, "truncation_summary.csv");
    o << "N,gamma1,a_N,k_N\n";
    std::set<std::int64_t> Ns(c.N_sweep.begin(), c.N_sweep.end());
    Ns.insert(c.N);
    for (auto N : Ns) {
      const auto p = TruncationParams::from_schedule(c.schedule().with_shift(N));
      o << N << ',' << num(c.schedule().with_shift(N).gamma_shifted(1)) << ',' << num(p.a) << ','
        << num(p.bump_norm) << '\n';
    }
  }
  ctx.add("truncation_phi.csv", "truncation-report");
  ctx.add("truncation_summary.csv", "truncation-report");
  say(ctx, fmt::format("truncation-report: N = {}, a_N = {}, k_N = {}", c.N, num(tp.a), num(tp.bump_norm)));
}

// ---------------------------------------------------------------- flows-report

void stage_flows_report(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const ProblemModel m = c.model();
  const int d = m.dim;
  {
    const auto mean = solve_mean_ode(m, c.theta0, c.T);
    auto o = open_csv(ctx, "mean_ode.csv");
    o << "t";
    for (int i = 0; i < d; ++i) o << ",theta_" << i + 1;
    o << '\n';
    for (std::size_t k = 0; k <= 200; ++k) {
      const double t = c.T * static_cast<double>(k) / 200.0;
      const Vec v = mean(t);
      o << num(t);
      for (int i = 0; i < d; ++i) o << ',' << num(v(i));
      o << '\n';
    }
    ctx.add("mean_ode.csv", "flows-report");
  }
  auto fr = open_csv(ctx, "flow_ratio.csv");
  fr << "N,t,y,ratio\n";
  auto bd = open_csv(ctx, "beta_defect.csv");
  bd << "N,k,t,beta_norm,scaled\n";
  auto bs = open_csv(ctx, "beta_summary.csv");
  bs << "N,max_beta,max_scaled\n";
  std::vector<PlotSeries> plot;
  for (auto N : c.N_sweep) {
    const auto dyn = dynamics_for(c, N, c.T);
    const FlowMap lim(dyn, FlowKind::limit), tr(dyn, FlowKind::truncated);
    const double g1 = dyn.gamma(1);
    const double scale = std::sqrt(g1) * std::log(1.0 / g1);
    const double T = dyn.grid().t.back();
    for (int it = 0; it < 4; ++it) {
      const double t = T * (0.5 + 0.125 * it);
      for (int iy = 0; iy < 9; ++iy) {
        const double y = -0.5 * dyn.a() + dyn.a() * iy / 8.0;
        Vec yv = Vec::Zero(d);
        yv(0) = y;
        const double r = (tr(t, T, yv) - lim(t, T, yv)).norm() / scale;
        fr << N << ',' << num(t) << ',' << num(y) << ',' << num(r) << '\n';
      }
    }
    double mb = 0.0, ms = 0.0;
    PlotSeries ps{fmt::format("N = {}", N), {}, {}, false};
    for (std::size_t k = 0; k < dyn.grid().M; ++k) {
      const double b = beta_defect(dyn, k).norm();
      const double s = b / std::pow(dyn.gamma(k + 1), 1.5);
      bd << N << ',' << k << ',' << num(dyn.t(k)) << ',' << num(b) << ',' << num(s) << '\n';
      mb = std::max(mb, b);
      ms = std::max(ms, s);
      ps.x.push_back(dyn.t(k));
      ps.y.push_back(s);
    }
    bs << N << ',' << num(mb) << ',' << num(ms) << '\n';
    plot.push_back(std::move(ps));
  }
  write_svg(ctx.path("beta_defect.svg"), {"scaled Euler defect |beta| / gamma^1.5", "t", "ratio", false, false},
            plot);
  for (const char* f : {"flow_ratio.csv", "beta_defect.csv", "beta_summary.csv", "beta_defect.svg"})
    ctx.add(f, "flows-report");
  say(ctx, "flows-report: mean ODE, flow ratios and Euler defects written");
}

// ---------------------------------------------------------------- simulate

void stage_simulate(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto dyn = dynamics_for(c, c.N, c.T);
  BundleRequest req;
  req.processes = c.processes;
  req.n_paths = c.n_paths;
  req.seed = c.seed;
  req.dt = c.dt;
  const PathBundle b = simulate_bundle(dyn, req, ctx.exec);
  for (const auto& [name, arr] : b.paths) {
    const std::string file = "paths_" + name + ".csv";
    write_process_csv(ctx.path(file), b, name);
    ctx.add(file, "simulate");
    if (arr.data.size() > c.cache_threshold) {
      const std::string bin = "paths_" + name + ".bin";
      write_cache(ctx.path(bin), b.times, arr);
      ctx.add(bin, "simulate");
    }
  }
  if (!b.flags.empty()) {
    auto o = open_csv(ctx, "flagged_paths.csv");
    o << "process,path,step,message\n";
    for (const auto& f : b.flags) {
      o << f.process << ',' << f.path << ',' << f.step << ',' << f.message << '\n';
      ctx.flagged.push_back(fmt::format("{} path {} step {}: {}", f.process, f.path, f.step, f.message));
    }
    ctx.add("flagged_paths.csv", "simulate");
  }
  say(ctx, fmt::format("simulate: N = {}, M = {}, {} paths, processes: {}", c.N, dyn.grid().M, c.n_paths,
                       fmt::join(c.processes, " ")));
}

// ---------------------------------------------------------------- parametrix

void stage_parametrix(RunContext& ctx) {
  const auto& c = ctx.cfg;
  if (c.model().dim != 1) throw UnsupportedCapability("parametrix: d = 1 only");
  const Grid1D grid(c.px_min, c.px_max, c.pn);
  SeriesOptions opt;
  opt.r_max = c.r_max;
  opt.n_time = c.n_time;
  opt.exec = ctx.exec;
  nlohmann::json diag;

  auto run_one = [&](std::int64_t N, bool write) {
    const auto dyn = dynamics_for(c, N, c.pt);
    const std::size_t J = dyn.grid().M;
    const double t = dyn.t(J);
    const auto diff = ScalarDiffusion::truncated(dyn);
    SeriesResult q = series_q(diff, 0.0, t, c.px0, grid, opt);
    SeriesResult p;
    if (c.chain_series) p = series_p(ScalarChain::truncated(dyn), J, c.px0, grid, opt);
    if (write) {
      write_density(ctx, "parametrix_q.csv", q.total);
      ctx.add("parametrix_q.csv", "parametrix");
      diag["N"] = N;
      diag["t"] = t;
      diag["x0"] = c.px0;
      diag["q"] = series_json(q);
      if (c.chain_series) {
        write_density(ctx, "parametrix_p.csv", p.total);
        ctx.add("parametrix_p.csv", "parametrix");
        diag["p"] = series_json(p);
        diag["L1_q_p"] = l1_distance(q.total, p.total, c.halve);
      }
      auto o = open_csv(ctx, "parametrix_terms.csv");
      o << "series,r,sup,mass,implied_constant\n";
      auto rows = [&](const char* name, const SeriesResult& s) {
        for (std::size_t r = 0; r < s.term_sup.size(); ++r)
          o << name << ',' << r << ',' << num(s.term_sup[r]) << ',' << num(s.term_mass[r]) << ','
            << num(s.implied_constant[r]) << '\n';
      };
      rows("q", q);
      if (c.chain_series) rows("p", p);
      ctx.add("parametrix_terms.csv", "parametrix");
      if (q.resolution_failure || (c.chain_series && p.resolution_failure))
        say(ctx, "parametrix: warning: series terms do not decay; refine the grid");
    }
    return std::make_tuple(std::move(q), std::move(p), dyn.gamma(1), t);
  };

  auto [q0, p0, g0, t0] = run_one(c.N, true);
  // envelope fit over the sweep entries no larger than the configured N
  if (c.chain_series) {
    std::vector<DensityField> qs, ps;
    std::vector<double> gs, cs;
    std::vector<std::int64_t> used;
    for (auto N : c.N_sweep) {
      if (N > c.N) continue;
      if (N == c.N) {
        qs.push_back(q0.total);
        ps.push_back(p0.total);
        gs.push_back(g0);
      } else {
        auto [q, p, g, t] = run_one(N, false);
        qs.push_back(q.total);
        ps.push_back(p.total);
        gs.push_back(g);
      }
      cs.push_back(c.px0);
      used.push_back(N);
    }
    if (qs.size() >= 2) {
      const auto fit = envelope_fit(qs, ps, gs, cs, t0);
      diag["envelope"] = {{"N", used}, {"kappa", fit.kappa}, {"max_ratio", fit.max_ratio},
                          {"dominated", fit.dominated}};
    } else {
      diag["envelope"] = {{"note", "needs two sweep entries with N <= schedule.N"}};
    }
  }
  std::ofstream jf(ctx.path("parametrix_diagnostics.json"), std::ios::binary);
  jf << diag.dump(2) << '\n';
  ctx.add("parametrix_diagnostics.json", "parametrix");
  say(ctx, fmt::format("parametrix: q mass {}", num(q0.total.integral())));
}

// ---------------------------------------------------------------- rates

void stage_rates(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const ProblemModel m = c.model();
  const std::set<std::string> want(c.distances.begin(), c.distances.end());
  const Grid1D grid(c.kde_min, c.kde_max, c.kde_n);
  auto o = open_csv(ctx, "rates.csv");
  o << "N,distance_kind,value,stderr\n";
  auto env = open_csv(ctx, "rates_envelope.csv");
  env << "N,m,delta_N,tau_spacing_ok\n";
  std::map<std::string, std::vector<double>> vals;
  std::vector<double> Ns;
  bool density_ok = m.dim == 1;
  if (!density_ok) say(ctx, "rates: density distances need d = 1; only sup_path is reported");
  for (auto N : c.N_sweep) {
    const auto dyn = dynamics_for(c, N, c.T);
    const std::size_t M = dyn.grid().M;
    Ns.push_back(static_cast<double>(N));
    auto put = [&](const std::string& kind, double v, double se) {
      o << N << ',' << kind << ',' << num(v) << ',' << num(se) << '\n';
      vals[kind].push_back(v);
    };
    if (density_ok && (want.count("L1") || want.count("hellinger_sq"))) {
      const auto samples = terminal_chain_samples(dyn, 0.0, M, c.metric_paths,
                                                  stream_seed(c.seed, static_cast<std::uint64_t>(N),
                                                              StreamTag::chain_histogram),
                                                  ctx.exec);
      const auto lm = limit_moments(m, dyn.mean(), dyn.bar_alpha(), vec1(0.0), dyn.t(M));
      const DensityField q = gaussian_field(grid, lm.mean(0), lm.cov(0, 0));
      const DensityField p = kde(samples, 0.0, grid, ctx.exec);
      const std::uint64_t bseed = stream_seed(c.seed, static_cast<std::uint64_t>(N), StreamTag::bootstrap);
      if (want.count("L1")) {
        double se = 0.0;
        if (c.bootstrap >= 2)
          se = bootstrap_stderr(
              samples, [&](const std::vector<double>& s) { return l1_distance(kde(s, 0.0, grid, Exec::serial), q, c.halve); },
              c.bootstrap, bseed, ctx.exec);
        put("L1", l1_distance(p, q, c.halve), se);
      }
      if (want.count("hellinger_sq")) {
        double se = 0.0;
        if (c.bootstrap >= 2)
          se = bootstrap_stderr(
              samples, [&](const std::vector<double>& s) { return hellinger_sq(kde(s, 0.0, grid, Exec::serial), q); },
              c.bootstrap, bseed + 1, ctx.exec);
        put("hellinger_sq", hellinger_sq(p, q), se);
      }
    }
    if (want.count("sup_path")) {
      BundleRequest req;
      req.processes = {"U", "V"};
      req.n_paths = std::min<std::size_t>(c.metric_paths, 500);
      req.seed = stream_seed(c.seed, static_cast<std::uint64_t>(N), StreamTag::renormalized);
      const PathBundle b = simulate_bundle(dyn, req, ctx.exec);
      const auto s = sup_path_distance(b, "U", "V", std::sqrt(dyn.gamma(1)));
      put("sup_path", s.q99, 0.0);
    }
    if (want.count("grid_joint_L1_bound")) {
      if (m.dim == 1 && m.state_independent_noise && M >= 3) {
        std::vector<double> tau{0.0};
        for (std::size_t l = 1; l <= c.tau_m; ++l) {
          const auto k = static_cast<std::size_t>(
              std::llround(static_cast<double>(l) * static_cast<double>(M - 1) / static_cast<double>(c.tau_m)));
          if (dyn.t(k) > tau.back()) tau.push_back(dyn.t(k));
        }
        const auto prov = linear_transition_providers(dyn, grid);
        const auto g = grid_joint_l1_bound(prov.first, prov.second, tau, 0.0, grid, dyn.schedule());
        put("grid_joint_L1_bound", c.halve ? 0.5 * g.value : g.value, 0.0);
        env << N << ',' << tau.size() - 1 << ',' << num(g.delta_N) << ',' << (g.tau_spacing_ok ? "true" : "false")
            << '\n';
      } else {
        say(ctx, "rates: grid_joint_L1_bound needs a d = 1 model with state-independent noise; skipped");
      }
    }
  }
  auto fits = open_csv(ctx, "rates_fit.csv");
  fits << "distance_kind,fit,slope,intercept,r2\n";
  std::vector<PlotSeries> plot;
  for (const auto& [kind, v] : vals) {
    plot.push_back({kind, Ns, v, true});
    bool positive = v.size() >= 3;
    for (double x : v) positive = positive && x > 0.0;
    if (!positive) continue;
    const auto f = rate_fit(Ns, v);
    const auto fc = rate_fit_corrected(Ns, v);
    fits << kind << ",plain," << num(f.slope) << ',' << num(f.intercept) << ',' << num(f.r2) << '\n';
    fits << kind << ",log2_corrected," << num(fc.slope) << ',' << num(fc.intercept) << ',' << num(fc.r2) << '\n';
  }
  write_svg(ctx.path("rates.svg"), {"distance vs N", "N", "value", true, true}, plot);
  for (const char* f : {"rates.csv", "rates_envelope.csv", "rates_fit.csv", "rates.svg"}) ctx.add(f, "rates");
  say(ctx, "rates: KDE bias floors the measurable L1 near 1e-2; compare slopes, not levels");
}

void run_pipeline(RunContext& ctx) {
  stage_validate_model(ctx);
  stage_truncation_report(ctx);
  stage_flows_report(ctx);
  stage_simulate(ctx);
  if (ctx.cfg.model().dim == 1) {
    stage_parametrix(ctx);
  } else {
    say(ctx, "parametrix: skipped (d > 1)");
  }
  stage_rates(ctx);
}

void write_manifest(RunContext& ctx, const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = ctx.cfg.file.source();
  j["config_hash"] = config_hash(ctx.cfg.file.text());
  j["seed"] = ctx.cfg.seed;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["timestamp"] = buf;
  std::set<std::string> listed;
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& a : ctx.artifacts) {
    arts.push_back({{"file", a.file}, {"stage", a.stage}});
    listed.insert(a.file);
  }
  arts.push_back({{"file", "manifest.json"}, {"stage", "run"}});
  listed.insert("manifest.json");
  std::vector<std::string> others;
  for (const auto& e : fs::directory_iterator(ctx.out_dir))
    if (e.is_regular_file() && !listed.count(e.path().filename().string()))
      others.push_back(e.path().filename().string());
  std::sort(others.begin(), others.end());
  for (const auto& f : others) arts.push_back({{"file", f}, {"stage", "pre-existing"}});
  j["artifacts"] = arts;
  if (!ctx.flagged.empty()) j["flagged"] = ctx.flagged;
  std::ofstream f(ctx.path("manifest.json"), std::ios::binary);
  f << j.dump(2) << '\n';
}

}  // namespace sadl
