#include "mionset/quantizer.hpp"

#include <cmath>

#include "mionset/common.hpp"

namespace mionset {

void Codebook::validate() const {
  if (v < 2) throw std::runtime_error("codebook: v must be >= 2");
  if (channels < 1 || scales < 1) throw std::runtime_error("codebook: empty pair grid");
  if (lo.rows() != channels || lo.cols() != scales || hi.rows() != channels || hi.cols() != scales) {
    throw std::runtime_error("codebook: lo/hi shape mismatch");
  }
  for (int c = 0; c < channels; ++c) {
    for (int s = 0; s < scales; ++s) {
      if (!(lo(c, s) < hi(c, s))) {
        throw std::runtime_error(strfmt("codebook: lo >= hi for channel %d, scale %d", c, s));
      }
    }
  }
}

Codebook fit_codebook(const WindowPair& train, int v) {
  if (v < 2) throw std::runtime_error("codebook: v must be >= 2");
  const WindowTensor& in = train.inputs;
  const WindowTensor& tg = train.targets;
  if (in.n_windows < 1 || in.data.empty()) throw std::runtime_error("codebook: empty training tensor");
  if (in.channels != tg.channels || in.scales != tg.scales || in.n_windows != tg.n_windows) {
    throw std::runtime_error("codebook: input/target tensors disagree on shape");
  }

  Codebook cb;
  cb.v = v;
  cb.channels = in.channels;
  cb.scales = in.scales;
  cb.lo.setConstant(in.channels, in.scales, std::numeric_limits<double>::infinity());
  cb.hi.setConstant(in.channels, in.scales, -std::numeric_limits<double>::infinity());

  auto scan = [&](const WindowTensor& wt) {
    for (std::int64_t w = 0; w < wt.n_windows; ++w) {
      for (int t = 0; t < wt.window_len; ++t) {
        for (int c = 0; c < wt.channels; ++c) {
          for (int s = 0; s < wt.scales; ++s) {
            const double x = wt.at(w, t, c, s);
            if (!std::isfinite(x)) {
              throw std::runtime_error(strfmt("codebook: non-finite value at channel %d, scale %d", c, s));
            }
            if (x < cb.lo(c, s)) cb.lo(c, s) = x;
            if (x > cb.hi(c, s)) cb.hi(c, s) = x;
          }
        }
      }
    }
  };
  scan(in);
  scan(tg);

  for (int c = 0; c < cb.channels; ++c) {
    for (int s = 0; s < cb.scales; ++s) {
      if (!(cb.lo(c, s) < cb.hi(c, s))) {
        throw std::runtime_error(
            strfmt("codebook: constant series for channel %d, scale %d (lo = hi = %g)", c, s, cb.lo(c, s)));
      }
    }
  }
  return cb;
}

int quantize(double x, int channel, int scale, const Codebook& cb) {
  if (!std::isfinite(x)) throw std::runtime_error("quantize: non-finite input");
  const double lo = cb.lo(channel, scale);
  const double hi = cb.hi(channel, scale);
  const double level = std::floor((x - lo) / (hi - lo) * cb.v);
  if (level < 0) return 0;
  if (level > cb.v - 1) return cb.v - 1;
  return static_cast<int>(level);
}

double dequantize(int level, int channel, int scale, const Codebook& cb) {
  if (level < 0 || level >= cb.v) {
    throw std::runtime_error(strfmt("dequantize: level %d outside [0, %d)", level, cb.v));
  }
  const double lo = cb.lo(channel, scale);
  const double hi = cb.hi(channel, scale);
  return lo + (level + 0.5) * (hi - lo) / cb.v;
}

Eigen::VectorXd one_hot(int level, int v) {
  if (v < 2) throw std::runtime_error("one_hot: v must be >= 2");
  if (level < 0 || level >= v) {
    throw std::runtime_error(strfmt("one_hot: level %d outside [0, %d)", level, v));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v);
  out[level] = 1.0;
  return out;
}

Eigen::MatrixXi quantize_windows(const WindowTensor& wt, int channel, int scale, const Codebook& cb) {
  Eigen::MatrixXi levels(wt.window_len, wt.n_windows);
  for (std::int64_t w = 0; w < wt.n_windows; ++w) {
    for (int t = 0; t < wt.window_len; ++t) {
      levels(t, w) = quantize(wt.at(w, t, channel, scale), channel, scale, cb);
    }
  }
  return levels;
}

Eigen::VectorXi quantize_series(const SeriesTensor& series, int channel, int scale, const Codebook& cb) {
  Eigen::VectorXi levels(series.time);
  for (std::int64_t t = 0; t < series.time; ++t) {
    levels[t] = quantize(series.at(t, channel, scale), channel, scale, cb);
  }
  return levels;
}

}  // namespace mionset
