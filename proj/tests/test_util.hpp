#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"
#include "cycpl/volgrid.hpp"
#include "doctest.h"

namespace testutil {

inline cycpl::VolumeGrid random_volume(cycpl::Dims dims, std::uint64_t seed, double lo = -1.0,
                                       double hi = 1.0) {
  cycpl::Rng rng(seed);
  std::vector<float> v(dims.count());
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return cycpl::VolumeGrid(dims, std::move(v));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cycpl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <typename F>
cycpl::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const cycpl::Error& e) {
    return e.code();
  }
  FAIL("expected a cycpl::Error");
  return cycpl::ErrorCode::Config;
}

}  // namespace testutil
