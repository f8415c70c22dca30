#pragma once

#include <mutex>

namespace sapp::detail {

// FFTW's planner is not thread-safe; every plan create/destroy goes through this.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace sapp::detail
