#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sadl/config.hpp"
#include "sadl/kernels.hpp"

namespace sadl {

struct Artifact {
  std::string file;  // relative to the output directory
  std::string stage;
};

struct RunContext {
  ExperimentConfig cfg;
  std::string out_dir;
  Exec exec = Exec::parallel;
  std::ostream* log = nullptr;  // human-readable progress; may be null
  std::vector<Artifact> artifacts;
  std::vector<std::string> flagged;  // numerical problems found along the way

  RunContext(ExperimentConfig c, std::string dir, std::ostream* l = nullptr, Exec ex = Exec::parallel);
  std::string path(const std::string& file) const;
  void add(const std::string& file, const std::string& stage) { artifacts.push_back({file, stage}); }
};

void stage_validate_model(RunContext& ctx);
void stage_truncation_report(RunContext& ctx);
void stage_flows_report(RunContext& ctx);
void stage_simulate(RunContext& ctx);
void stage_parametrix(RunContext& ctx);
void stage_rates(RunContext& ctx);

//! All stages in dependency order.
void run_pipeline(RunContext& ctx);

//! manifest.json: config hash, seed, artifacts with producing stage, plus any other file found
//! in the output directory.
void write_manifest(RunContext& ctx, const std::string& command);

}  // namespace sadl
