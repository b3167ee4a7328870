#pragma once

#include <iosfwd>
#include <string>

#include "sadl/simulate.hpp"

namespace sadl {

//! Columns: path_id,k,t,x_1..x_d
void write_process_csv(std::ostream& os, const PathBundle& b, const std::string& process);
void write_process_csv(const std::string& file, const PathBundle& b, const std::string& process);

//! Binary cache, little-endian: "SADL1", u32 n_paths, u32 n_times, u32 d,
//! f64 times[n_times], f64 data[n_paths * n_times * d] (path-major, then time, then component).
void write_cache(const std::string& file, const std::vector<double>& times, const PathArray& arr);
struct CacheContents {
  std::vector<double> times;
  PathArray paths;
};
CacheContents read_cache(const std::string& file);

//! Shortest round-trip decimal form, used for every numeric CSV field.
std::string fmt_num(double x);

}  // namespace sadl
