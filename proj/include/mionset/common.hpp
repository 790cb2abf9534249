#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mionset {

// printf-style formatting into a std::string, used for error messages and
// fixed-precision serialization.
inline std::string strfmt(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list args2;
  va_copy(args2, args);
  int n = std::vsnprintf(nullptr, 0, fmt, args);
  va_end(args);
  std::string out;
  if (n > 0) {
    out.resize(static_cast<size_t>(n));
    std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
  }
  va_end(args2);
  return out;
}

// splitmix64 round. Used to derive independent sub-seeds (per predictor pair,
// per tuning fold) from one master seed so that work items stay decoupled from
// scheduling order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string read_file(const std::filesystem::path& path);

// Writes to a temp file in the same directory, then renames over the target,
// so partially written artifacts are never observed under the final name.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

// Little-endian float32 payload helpers (.f32 files).
std::vector<float> read_f32_file(const std::filesystem::path& path);
void write_f32_file(const std::filesystem::path& path, const std::vector<float>& values);

}  // namespace mionset
