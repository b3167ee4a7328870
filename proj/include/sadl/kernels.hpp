#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace sadl {

//! serial is the reference path; parallel runs the same per-index body under OpenMP.
//! Bodies write only to slots owned by their index, so both produce identical results.
enum class Exec { serial, parallel };

template <class F>
void for_each_index(Exec ex, std::size_t n, F&& body) {
  if (ex == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr err;
  std::mutex mu;
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < sn; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

//! Caps the OpenMP worker count (0 leaves the runtime default).
void set_thread_count(int n);
int thread_count();

}  // namespace sadl
