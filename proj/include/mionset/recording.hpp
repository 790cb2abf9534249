#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mionset {

inline constexpr const char* kLabelMi = "mi_task";
inline constexpr const char* kLabelRest = "rest";

struct Marker {
  std::int64_t onset_sample = 0;
  std::int64_t duration_samples = 0;
  std::string label;  // "mi_task" or "rest"
};

// Multichannel time series plus metadata. Samples are stored time-major
// (row = sample, column = channel) in float32, matching the on-disk payload.
struct Recording {
  double sample_rate_hz = 0.0;
  std::vector<std::string> channels;
  Eigen::MatrixXf samples;  // n_samples x n_channels
  std::map<std::string, std::vector<std::string>> topology;  // channel -> neighbors
  std::vector<Marker> markers;

  std::int64_t n_samples() const { return samples.rows(); }
  int n_channels() const { return static_cast<int>(samples.cols()); }

  // Throws std::runtime_error describing the first violated invariant.
  void validate() const;
};

// A recording is stored as <name>.json (metadata) + <name>.f32 (little-endian
// float32 payload, time-major). `base` may be given with or without one of
// those extensions.
Recording load_recording(const std::filesystem::path& base);
void save_recording(const Recording& rec, const std::filesystem::path& base);

}  // namespace mionset
