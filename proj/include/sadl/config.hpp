#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sadl/model.hpp"
#include "sadl/schedules.hpp"
#include "sadl/types.hpp"

namespace sadl {

//! Raw key-value file: "[section]" headers, "key = value" lines, '#' comments.
//! Values are numbers, true/false, bare or "quoted" strings, or bracketed lists
//! (possibly nested, for matrices). Keys are addressed as "section.key".
class ConfigFile {
 public:
  struct Entry {
    std::string raw;
    int line = 0;
  };

  static ConfigFile parse(const std::string& text, const std::string& source = "config");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  int line_of(const std::string& key) const;
  const std::string& source() const { return source_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& text() const { return text_; }

  double get_double(const std::string& key, double def) const;
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& def) const;
  //! row-major nested list, e.g. [[1, 0.3], [0.1, 2]]; a flat list is one row
  std::vector<std::vector<double>> get_matrix(const std::string& key) const;

  //! ValidationError "source:line: message" (line 0: no line reference)
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  std::string source_;
  std::string text_;
  std::map<std::string, Entry> entries_;
};

struct ExperimentConfig {
  // schedule
  double A = 1.0, B = 0.0, beta = 1.0;
  std::int64_t N = 1000;
  // model
  std::string model_kind = "linear_gaussian";
  Mat A_mat = mat1(1.0);
  Vec root = vec1(0.0);
  Mat Sigma = mat1(1.0);
  Vec theta0;  // mean ODE start; defaults to root + 1
  // sim
  std::size_t n_paths = 1000;
  double T = 0.5;
  std::uint64_t seed = 1;
  std::vector<std::string> processes{"theta", "U", "V", "X"};
  double dt = 0.0;
  std::size_t cache_threshold = 2000000;  // values per process above which a binary cache is written
  // parametrix
  double px_min = -5.0, px_max = 5.0;
  std::size_t pn = 256;
  int r_max = 3;
  std::size_t n_time = 64;
  double px0 = 0.0;
  double pt = 0.5;
  bool chain_series = true;
  // metrics
  std::vector<std::string> distances{"L1", "hellinger_sq", "sup_path", "grid_joint_L1_bound"};
  std::vector<std::int64_t> N_sweep{100, 1000, 10000};
  std::size_t metric_paths = 20000;
  std::size_t tau_m = 4;
  std::size_t bootstrap = 20;
  bool halve = false;
  double kde_min = -6.0, kde_max = 6.0;
  std::size_t kde_n = 512;
  // output
  std::string out_dir = "out";

  ConfigFile file;

  StepSchedule schedule() const { return {A, B, beta, N}; }
  ProblemModel model() const;
};

//! Parses and validates; every error names the offending line.
ExperimentConfig load_experiment(const ConfigFile& cf);

//! FNV-1a 64 of the config text, hex.
std::string config_hash(const std::string& text);

}  // namespace sadl
