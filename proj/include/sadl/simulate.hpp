#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sadl/flows.hpp"
#include "sadl/kernels.hpp"
#include "sadl/rng.hpp"
#include "sadl/truncation.hpp"

namespace sadl {

inline constexpr double kDivergenceBound = 1e9;

//! n_paths x n_times x d, row-major by path then time.
struct PathArray {
  std::size_t n_paths = 0;
  std::size_t n_times = 0;
  int dim = 1;
  std::vector<double> data;

  PathArray() = default;
  PathArray(std::size_t np, std::size_t nt, int d) : n_paths(np), n_times(nt), dim(d), data(np * nt * d, 0.0) {}
  double& at(std::size_t p, std::size_t k, int i) { return data[(p * n_times + k) * dim + i]; }
  double at(std::size_t p, std::size_t k, int i) const { return data[(p * n_times + k) * dim + i]; }
  Vec state(std::size_t p, std::size_t k) const;
  void set_state(std::size_t p, std::size_t k, const Vec& v);
};

struct PathFlag {
  std::string process;
  std::size_t path = 0;
  std::size_t step = 0;
  std::string message;
};

struct PathBundle {
  TimeGrid grid;
  std::vector<double> times;  // recording times for every process
  std::map<std::string, PathArray> paths;
  std::uint64_t master_seed = 0;
  bool innovations_shared = false;
  std::vector<PathFlag> flags;
};

struct ChainPath {
  std::vector<Vec> values;
  std::vector<Vec> eta;  // filled when logging is requested
  bool diverged = false;
  std::size_t diverged_at = 0;
};

//! theta_{n+1} = theta_n - gamma^N_{n+1} H(theta_n, eta_{n+1}).
ChainPath run_rm(const ProblemModel& model, const StepSchedule& schedule, const Vec& theta0, std::size_t n_steps,
                 RandomSource& rng, bool log_eta = false);

enum class UMode { direct, lemma1 };

//! Renormalized process; n_steps = 0 means the grid's M.
ChainPath run_U(const TruncatedDynamics& dyn, const Vec& theta0N, RandomSource& rng, UMode mode,
                std::size_t n_steps = 0, bool log_eta = false);
ChainPath run_V(const TruncatedDynamics& dyn, const Vec& V0, RandomSource& rng, std::size_t n_steps = 0,
                bool log_eta = false);

struct FrozenChainPath {
  std::vector<Vec> values;  // steps i..j
  std::vector<Vec> xi;      // xi_k, k = i..j-1
  std::vector<Vec> flow;    // theta^N_{t_k, t_j}(y), k = i..j
};

FrozenChainPath run_frozen_chain(const TruncatedDynamics& dyn, const FlowMap& truncated_flow, const Vec& y,
                                 std::size_t i, std::size_t j, const Vec& start, RandomSource& rng);
//! Backward truncated flow from (t_j, y) recorded at t_k, k = i..j.
std::vector<Vec> frozen_flow_table(const TruncatedDynamics& dyn, const FlowMap& truncated_flow, const Vec& y,
                                   std::size_t i, std::size_t j);

enum class DiffusionKind { limit, truncated, stationary };

struct DiffusionConfig {
  DiffusionKind kind = DiffusionKind::limit;
  double dt = 0.0;  // 0: gamma^N_M / 2
};

//! Euler-Maruyama; steps are aligned so every recording time is hit exactly.
ChainPath run_diffusion(const TruncatedDynamics& dyn, const DiffusionConfig& cfg, const Vec& X0,
                        const std::vector<double>& record_times, RandomSource& rng);

double default_diffusion_dt(const TruncatedDynamics& dyn);

struct BundleRequest {
  std::vector<std::string> processes;  // theta, U, V, X, X_trunc, X_star, V_frozen
  std::size_t n_paths = 100;
  std::uint64_t seed = 1;
  Vec theta0N;  // empty: theta-bar_0
  Vec X0;       // empty: zero
  double dt = 0.0;
};

PathBundle simulate_bundle(const TruncatedDynamics& dyn, const BundleRequest& req, Exec ex = Exec::parallel);

//! Terminal values of V^N at t_{M(N)} for several shifts, all driven by one Brownian path
//! per sample on normalized time [0, 1]. d = 1 only.
struct CoupledSweep {
  std::vector<std::int64_t> Ns;
  std::vector<double> t_terminal;
  std::vector<std::vector<double>> terminal;  // [N index][path]
};

CoupledSweep simulate_coupled_sweep(const std::vector<const TruncatedDynamics*>& dyns, const Vec& V0,
                                    std::size_t n_paths, std::uint64_t seed, Exec ex = Exec::parallel);

//! Values at the last grid time of many independent paths (d = 1), for histograms.
std::vector<double> terminal_chain_samples(const TruncatedDynamics& dyn, double V0, std::size_t j,
                                           std::size_t n_paths, std::uint64_t seed, Exec ex = Exec::parallel);
std::vector<double> terminal_diffusion_samples(const TruncatedDynamics& dyn, const DiffusionConfig& cfg, double X0,
                                               double t, std::size_t n_paths, std::uint64_t seed,
                                               Exec ex = Exec::parallel);

}  // namespace sadl
