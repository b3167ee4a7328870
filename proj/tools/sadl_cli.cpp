//! sadl: experiment runner. Subcommands share --config/--seed/--out/--threads/--halve.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sadl/error.hpp"
#include "sadl/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
  int threads = 0;
  bool halve = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config file")->required();
  sub->add_option("--seed", c.seed, "master seed (overrides sim.seed)");
  sub->add_option("--out", c.out, "output directory (overrides output.dir)");
  sub->add_option("--threads", c.threads, "worker cap (0 = runtime default)");
  sub->add_flag("--halve", c.halve, "report TV = L1 / 2 instead of the plain L1 integral");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic approximation diffusion-limit toolkit"};
  app.require_subcommand(1);
  Common c;
  const std::pair<const char*, const char*> cmds[] = {
      {"run", "all stages in dependency order"},
      {"simulate", "paths of the configured processes"},
      {"flows-report", "mean ODE, flow comparison ratios, Euler defects"},
      {"truncation-report", "a_N, k_N and the cutoff profile"},
      {"parametrix", "series densities for the diffusion and the chain"},
      {"rates", "distances over the N sweep and rate fits"},
      {"validate-model", "structural and statistical model checks"},
  };
  for (const auto& [name, help] : cmds) add_common(app.add_subcommand(name, help), c);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    sadl::ExperimentConfig cfg = sadl::load_experiment(sadl::ConfigFile::load(c.config));
    if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
    if (c.halve) cfg.halve = true;
    if (!c.out.empty()) cfg.out_dir = c.out;
    sadl::set_thread_count(c.threads);
    sadl::RunContext ctx(cfg, cfg.out_dir, &std::cout);
    if (cmd == "run") sadl::run_pipeline(ctx);
    else if (cmd == "simulate") sadl::stage_simulate(ctx);
    else if (cmd == "flows-report") sadl::stage_flows_report(ctx);
    else if (cmd == "truncation-report") sadl::stage_truncation_report(ctx);
    else if (cmd == "parametrix") sadl::stage_parametrix(ctx);
    else if (cmd == "rates") sadl::stage_rates(ctx);
    else if (cmd == "validate-model") sadl::stage_validate_model(ctx);
    sadl::write_manifest(ctx, cmd);
    if (!ctx.flagged.empty()) {
      std::cerr << "numerical problems on " << ctx.flagged.size() << " path(s):\n";
      for (const auto& f : ctx.flagged) std::cerr << "  " << f << '\n';
      return 3;
    }
  } catch (const sadl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sadl::UnsupportedCapability& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sadl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
