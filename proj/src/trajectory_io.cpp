#include "spde/trajectory_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "spde/errors.hpp"

namespace spde::io {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

template <class T>
T get_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw NumericalError("trajectory binary: truncated input");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& out, std::size_t time_stride) {
  if (time_stride == 0) time_stride = 1;
  const auto& g = traj.grid();
  out << "t,y,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < traj.rows(); ++i) {
    if (i % time_stride != 0 && i + 1 != traj.rows()) continue;
    for (std::size_t k = 0; k < traj.cols(); ++k) out << g.t(i) << ',' << g.y(k) << ',' << traj.at(i, k) << '\n';
  }
}

void write_binary(const Trajectory& traj, std::ostream& out) {
  put_le<std::int64_t>(out, static_cast<std::int64_t>(traj.rows()));
  put_le<std::int64_t>(out, static_cast<std::int64_t>(traj.cols()));
  for (double v : traj.values()) put_le<double>(out, v);
}

RawMatrix read_binary(std::istream& in) {
  RawMatrix m;
  m.rows = get_le<std::int64_t>(in);
  m.cols = get_le<std::int64_t>(in);
  if (m.rows < 1 || m.cols < 1 || m.rows > (std::int64_t{1} << 40) / m.cols)
    throw NumericalError("trajectory binary: implausible dimensions");
  m.values.resize(static_cast<std::size_t>(m.rows * m.cols));
  for (auto& v : m.values) v = get_le<double>(in);
  return m;
}

Trajectory load_trajectory(const std::filesystem::path& path, const ModelSpec& model, const GridSpec& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trajectory file: " + path.string());
  auto raw = read_binary(in);
  if (static_cast<std::size_t>(raw.rows) != grid.n_time + 1 || static_cast<std::size_t>(raw.cols) != grid.n_space)
    throw ConfigError("trajectory file " + path.string() + " does not match the configured grid");
  return Trajectory(model, grid, 0, std::move(raw.values));
}

}  // namespace spde::io
