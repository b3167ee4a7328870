#include "sadl/path_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "sadl/error.hpp"

namespace sadl {

static_assert(std::endian::native == std::endian::little, "binary cache assumes a little-endian host");

std::string fmt_num(double x) { return fmt::format("{}", x); }

void write_process_csv(std::ostream& os, const PathBundle& b, const std::string& process) {
  auto it = b.paths.find(process);
  if (it == b.paths.end()) throw ValidationError("no process '" + process + "' in bundle");
  const PathArray& a = it->second;
  os << "path_id,k,t";
  for (int i = 0; i < a.dim; ++i) os << ",x_" << (i + 1);
  os << '\n';
  std::string line;
  for (std::size_t p = 0; p < a.n_paths; ++p)
    for (std::size_t k = 0; k < a.n_times; ++k) {
      line = fmt::format("{},{},{}", p, k, fmt_num(b.times[k]));
      for (int i = 0; i < a.dim; ++i) {
        line += ',';
        line += fmt_num(a.at(p, k, i));
      }
      line += '\n';
      os << line;
    }
}

void write_process_csv(const std::string& file, const PathBundle& b, const std::string& process) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + file + " for writing");
  write_process_csv(os, b, process);
}

namespace {
void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
}  // namespace

void write_cache(const std::string& file, const std::vector<double>& times, const PathArray& arr) {
  if (times.size() != arr.n_times) throw ValidationError("write_cache: times/paths mismatch");
  std::ofstream os(file, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + file + " for writing");
  os.write("SADL1", 5);
  put_u32(os, static_cast<std::uint32_t>(arr.n_paths));
  put_u32(os, static_cast<std::uint32_t>(arr.n_times));
  put_u32(os, static_cast<std::uint32_t>(arr.dim));
  os.write(reinterpret_cast<const char*>(times.data()), static_cast<std::streamsize>(times.size() * 8));
  os.write(reinterpret_cast<const char*>(arr.data.data()), static_cast<std::streamsize>(arr.data.size() * 8));
}

CacheContents read_cache(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + file);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "SADL1", 5) != 0) throw ValidationError(file + ": not a SADL1 cache");
  const std::uint32_t np = get_u32(is), nt = get_u32(is), d = get_u32(is);
  CacheContents c;
  c.times.resize(nt);
  c.paths = PathArray(np, nt, static_cast<int>(d));
  is.read(reinterpret_cast<char*>(c.times.data()), static_cast<std::streamsize>(nt) * 8);
  is.read(reinterpret_cast<char*>(c.paths.data.data()), static_cast<std::streamsize>(c.paths.data.size() * 8));
  if (!is) throw ValidationError(file + ": truncated cache");
  return c;
}

}  // namespace sadl
