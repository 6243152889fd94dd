#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "spde/simulate.hpp"

namespace spde::io {

/// CSV with header `t,y,value`, one row per grid node; every `time_stride`-th
/// time index is written (the last one always).
void write_csv(const Trajectory& traj, std::ostream& out, std::size_t time_stride = 1);

/// Binary dump: int64 rows (n_time + 1), int64 cols (n_space), then the
/// row-major matrix as 64-bit floats. Everything little-endian.
void write_binary(const Trajectory& traj, std::ostream& out);

struct RawMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> values;
};

/// Throws NumericalError on truncated or inconsistent input.
RawMatrix read_binary(std::istream& in);

/// Reads a binary dump and attaches model and grid; dimensions must agree.
Trajectory load_trajectory(const std::filesystem::path& path, const ModelSpec& model, const GridSpec& grid);

}  // namespace spde::io
