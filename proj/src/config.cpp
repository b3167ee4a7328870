#include "sadl/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sadl/error.hpp"

namespace sadl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// strip a trailing comment that is not inside quotes
std::string strip_comment(const std::string& s) {
  bool q = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') q = !q;
    if (s[i] == '#' && !q) return s.substr(0, i);
  }
  return s;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> k{
      {"schedule", {"A", "B", "beta", "N"}},
      {"model", {"kind", "A_mat", "root", "Sigma", "theta0"}},
      {"sim", {"n_paths", "T", "seed", "processes", "dt", "cache_threshold"}},
      {"parametrix", {"x_min", "x_max", "n", "r_max", "n_time", "x0", "t", "chain"}},
      {"metrics",
       {"distances", "N_sweep", "n_paths", "tau_m", "bootstrap", "halve", "kde_min", "kde_max", "kde_n"}},
      {"output", {"dir"}},
  };
  return k;
}

bool parse_number(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  if (*b == '+') ++b;
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

// splits "[a, [b, c], d]" into top-level items; the input must be bracketed
bool split_list(const std::string& s, std::vector<std::string>& items) {
  const std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') return false;
  items.clear();
  int depth = 0;
  std::string cur;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const char c = t[i];
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (depth < 0) return false;
    if (c == ',' && depth == 0) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) return false;
  if (!trim(cur).empty() || !items.empty()) items.push_back(trim(cur));
  for (const auto& it : items)
    if (it.empty()) return false;
  return true;
}

std::string unquote(const std::string& s) {
  const std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  return t;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cf;
  cf.source_ = source;
  cf.text_ = text;
  std::istringstream in(text);
  std::string line, section;
  int ln = 0;
  auto err = [&](const std::string& m) { throw ValidationError(fmt::format("{}:{}: {}", source, ln, m)); };
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[' && s.find('=') == std::string::npos) {
      if (s.back() != ']') err("unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!known_keys().count(section)) err("unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) err("expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (section.empty()) err("key '" + key + "' appears before any [section]");
    if (key.empty()) err("empty key");
    if (val.empty()) err("missing value for '" + key + "'");
    if (!known_keys().at(section).count(key)) err("unknown key '" + key + "' in [" + section + "]");
    const std::string full = section + "." + key;
    if (cf.entries_.count(full)) err("duplicate key '" + full + "'");
    cf.entries_[full] = Entry{val, ln};
  }
  return cf;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("{}:0: cannot open config file", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

int ConfigFile::line_of(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

void ConfigFile::fail(const std::string& key, const std::string& message) const {
  throw ValidationError(fmt::format("{}:{}: {}: {}", source_, line_of(key), key, message));
}

double ConfigFile::get_double(const std::string& key, double def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  double v;
  if (!parse_number(it->second.raw, v) || !std::isfinite(v)) fail(key, "expected a number, got '" + it->second.raw + "'");
  return v;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  double v;
  if (!parse_number(it->second.raw, v) || v != std::floor(v) || std::abs(v) > 9e15)
    fail(key, "expected an integer, got '" + it->second.raw + "'");
  return static_cast<std::int64_t>(v);
}

bool ConfigFile::get_bool(const std::string& key, bool def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  if (it->second.raw == "true") return true;
  if (it->second.raw == "false") return false;
  fail(key, "expected true or false, got '" + it->second.raw + "'");
}

std::string ConfigFile::get_string(const std::string& key, const std::string& def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  return unquote(it->second.raw);
}

std::vector<double> ConfigFile::get_doubles(const std::string& key, const std::vector<double>& def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  std::vector<std::string> items;
  if (!split_list(it->second.raw, items)) fail(key, "expected a list like [1, 2, 3]");
  std::vector<double> out;
  for (const auto& s : items) {
    double v;
    if (!parse_number(s, v) || !std::isfinite(v)) fail(key, "list entry '" + s + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> ConfigFile::get_strings(const std::string& key, const std::vector<std::string>& def) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return def;
  std::vector<std::string> items;
  if (!split_list(it->second.raw, items)) fail(key, "expected a list like [a, b]");
  for (auto& s : items) s = unquote(s);
  return items;
}

std::vector<std::vector<double>> ConfigFile::get_matrix(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "missing");
  std::vector<std::string> rows;
  if (!split_list(it->second.raw, rows)) fail(key, "expected a nested list like [[1, 0], [0, 1]]");
  std::vector<std::vector<double>> out;
  const bool nested = !rows.empty() && rows[0].front() == '[';
  if (!nested) {
    out.push_back(get_doubles(key, {}));
    return out;
  }
  for (const auto& r : rows) {
    std::vector<std::string> items;
    if (!split_list(r, items)) fail(key, "malformed row '" + r + "'");
    std::vector<double> row;
    for (const auto& s : items) {
      double v;
      if (!parse_number(s, v) || !std::isfinite(v)) fail(key, "matrix entry '" + s + "' is not a number");
      row.push_back(v);
    }
    if (!out.empty() && row.size() != out[0].size()) fail(key, "rows have different lengths");
    out.push_back(row);
  }
  return out;
}

ProblemModel ExperimentConfig::model() const {
  if (model_kind == "sine_perturbed") return sine_perturbed();
  return linear_gaussian(A_mat, root, Sigma);
}

namespace {

Mat to_mat(const ConfigFile& cf, const std::string& key, int d) {
  const auto m = cf.get_matrix(key);
  if (static_cast<int>(m.size()) != d || static_cast<int>(m[0].size()) != d)
    cf.fail(key, fmt::format("expected a {}x{} matrix", d, d));
  Mat out(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = m[i][j];
  return out;
}

Vec to_vec(const ConfigFile& cf, const std::string& key, int d) {
  const auto v = cf.get_doubles(key, {});
  if (static_cast<int>(v.size()) != d) cf.fail(key, fmt::format("expected {} entries", d));
  Vec out(d);
  for (int i = 0; i < d; ++i) out(i) = v[i];
  return out;
}

std::size_t positive_size(const ConfigFile& cf, const std::string& key, std::int64_t def) {
  const auto v = cf.get_int(key, def);
  if (v < 1) cf.fail(key, "must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig load_experiment(const ConfigFile& cf) {
  ExperimentConfig c;
  c.file = cf;
  c.A = cf.get_double("schedule.A", c.A);
  c.B = cf.get_double("schedule.B", c.B);
  c.beta = cf.get_double("schedule.beta", c.beta);
  c.N = cf.get_int("schedule.N", c.N);
  try {
    StepSchedule s(c.A, c.B, c.beta, c.N);
    if (c.N < 1) throw ValidationError("N must be >= 1");
    (void)s.gamma_shifted(1);
  } catch (const ValidationError& e) {
    const std::string key = !(c.beta > 0.5 && c.beta <= 1.0) ? "schedule.beta"
                            : !(c.A > 0.0)                   ? "schedule.A"
                            : c.N < 1                        ? "schedule.N"
                                                             : "schedule.B";
    cf.fail(key, e.what());
  }
  if (!(std::exp(-1.0) > c.schedule().gamma_shifted(1)))
    cf.fail("schedule.N", "needs gamma_1^N < 1/e so that a_N = ln(1/gamma_1^N) > 1");

  c.model_kind = cf.get_string("model.kind", c.model_kind);
  if (c.model_kind == "linear_gaussian") {
    if (cf.has("model.A_mat")) {
      const auto m = cf.get_matrix("model.A_mat");
      const int d = static_cast<int>(m.size());
      if (d < 1 || d > kMaxDim) cf.fail("model.A_mat", fmt::format("dimension must be between 1 and {}", kMaxDim));
      c.A_mat = to_mat(cf, "model.A_mat", d);
    }
    const int d = static_cast<int>(c.A_mat.rows());
    c.root = cf.has("model.root") ? to_vec(cf, "model.root", d) : Vec(Vec::Zero(d));
    c.Sigma = cf.has("model.Sigma") ? to_mat(cf, "model.Sigma", d) : Mat(Mat::Identity(d, d));
    try {
      (void)linear_gaussian(c.A_mat, c.root, c.Sigma);
    } catch (const ValidationError& e) {
      cf.fail(cf.has("model.Sigma") ? "model.Sigma" : "model.A_mat", e.what());
    }
  } else if (c.model_kind == "sine_perturbed") {
    for (const char* k : {"model.A_mat", "model.root", "model.Sigma"})
      if (cf.has(k)) cf.fail(k, "not used by sine_perturbed");
    c.A_mat = mat1(1.0);
    c.root = vec1(0.0);
  } else {
    cf.fail("model.kind", "unknown model kind '" + c.model_kind + "' (linear_gaussian, sine_perturbed)");
  }
  const int d = static_cast<int>(c.root.size());
  c.theta0 = cf.has("model.theta0") ? to_vec(cf, "model.theta0", d) : Vec(c.root + Vec::Ones(d));

  c.n_paths = positive_size(cf, "sim.n_paths", static_cast<std::int64_t>(c.n_paths));
  c.T = cf.get_double("sim.T", c.T);
  if (!(c.T > 0.0)) cf.fail("sim.T", "must be positive");
  const auto seed = cf.get_int("sim.seed", static_cast<std::int64_t>(c.seed));
  if (seed < 0) cf.fail("sim.seed", "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.processes = cf.get_strings("sim.processes", c.processes);
  static const std::set<std::string> procs{"theta", "U", "V", "X", "X_trunc", "X_star", "V_frozen"};
  for (const auto& p : c.processes)
    if (!procs.count(p)) cf.fail("sim.processes", "unknown process '" + p + "'");
  c.dt = cf.get_double("sim.dt", c.dt);
  if (c.dt < 0.0) cf.fail("sim.dt", "must be >= 0 (0 selects gamma_M / 2)");
  if (c.dt > c.schedule().gamma_shifted(1)) cf.fail("sim.dt", "must not exceed gamma_1^N");
  c.cache_threshold = positive_size(cf, "sim.cache_threshold", static_cast<std::int64_t>(c.cache_threshold));

  c.px_min = cf.get_double("parametrix.x_min", c.px_min);
  c.px_max = cf.get_double("parametrix.x_max", c.px_max);
  if (!(c.px_max > c.px_min)) cf.fail("parametrix.x_max", "must exceed parametrix.x_min");
  c.pn = positive_size(cf, "parametrix.n", static_cast<std::int64_t>(c.pn));
  if (c.pn < 64) cf.fail("parametrix.n", "needs at least 64 points");
  c.r_max = static_cast<int>(cf.get_int("parametrix.r_max", c.r_max));
  if (c.r_max < 0 || c.r_max > 12) cf.fail("parametrix.r_max", "must be in 0..12");
  c.n_time = positive_size(cf, "parametrix.n_time", static_cast<std::int64_t>(c.n_time));
  if (c.n_time < 2) cf.fail("parametrix.n_time", "needs at least 2 nodes");
  c.px0 = cf.get_double("parametrix.x0", c.px0);
  c.pt = cf.get_double("parametrix.t", c.pt);
  if (!(c.pt > 0.0) || c.pt > c.T) cf.fail("parametrix.t", "must lie in (0, sim.T]");
  c.chain_series = cf.get_bool("parametrix.chain", c.chain_series);

  c.distances = cf.get_strings("metrics.distances", c.distances);
  static const std::set<std::string> kinds{"L1", "hellinger_sq", "sup_path", "grid_joint_L1_bound"};
  for (const auto& k : c.distances)
    if (!kinds.count(k)) cf.fail("metrics.distances", "unknown distance '" + k + "'");
  if (cf.has("metrics.N_sweep")) {
    c.N_sweep.clear();
    for (double v : cf.get_doubles("metrics.N_sweep", {})) {
      if (v != std::floor(v) || v < 1.0) cf.fail("metrics.N_sweep", "entries must be positive integers");
      c.N_sweep.push_back(static_cast<std::int64_t>(v));
    }
  }
  for (auto n : c.N_sweep)
    if (!(c.schedule().with_shift(n).gamma_shifted(1) < std::exp(-1.0)))
      cf.fail("metrics.N_sweep", fmt::format("N = {} gives gamma_1^N >= 1/e", n));
  c.metric_paths = positive_size(cf, "metrics.n_paths", static_cast<std::int64_t>(c.metric_paths));
  if (c.metric_paths < 1000) cf.fail("metrics.n_paths", "kde needs at least 1000 samples");
  c.tau_m = positive_size(cf, "metrics.tau_m", static_cast<std::int64_t>(c.tau_m));
  c.bootstrap = static_cast<std::size_t>(cf.get_int("metrics.bootstrap", static_cast<std::int64_t>(c.bootstrap)));
  if (c.bootstrap == 1) cf.fail("metrics.bootstrap", "use 0 (off) or at least 2 replicates");
  c.halve = cf.get_bool("metrics.halve", c.halve);
  c.kde_min = cf.get_double("metrics.kde_min", c.kde_min);
  c.kde_max = cf.get_double("metrics.kde_max", c.kde_max);
  if (!(c.kde_max > c.kde_min)) cf.fail("metrics.kde_max", "must exceed metrics.kde_min");
  c.kde_n = positive_size(cf, "metrics.kde_n", static_cast<std::int64_t>(c.kde_n));
  if (c.kde_n < 64) cf.fail("metrics.kde_n", "needs at least 64 points");

  c.out_dir = cf.get_string("output.dir", c.out_dir);
  return c;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace sadl
