#ifndef TURNECHO_WAVELET_HPP
#define TURNECHO_WAVELET_HPP

// Daubechies-2 multiresolution analysis of monthly series.
//
// A series of length N is split into 7 additive components: six detail
// components and the level-6 smooth. Scale k in 1..6 holds the detail of
// level 7-k (scale 6 is the finest, level 1), scale 0 holds the smooth.
//
// Boundaries: the series is extended by half-sample reflection on both sides
// and padded up to a multiple of 2^6 before a circular transform.

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "turnecho/core.hpp"

namespace turnecho {

inline constexpr int kScaleCount = 7;
inline constexpr int kLevels = 6;

template <typename Scalar = double>
struct FilterPair {
  std::array<Scalar, 4> scaling;
  std::array<Scalar, 4> wavelet;
};

/// DB2 scaling filter ((1+√3), (3+√3), (3-√3), (1-√3)) / (4√2) and its
/// quadrature mirror g[k] = (-1)^k h[3-k].
template <typename Scalar = double>
FilterPair<Scalar> db2_filters() {
  using std::sqrt;
  const Scalar s3 = sqrt(Scalar(3));
  const Scalar norm = Scalar(4) * sqrt(Scalar(2));
  FilterPair<Scalar> f;
  f.scaling = {(1 + s3) / norm, (3 + s3) / norm, (3 - s3) / norm, (1 - s3) / norm};
  for (int k = 0; k < 4; ++k) f.wavelet[k] = (k % 2 == 0 ? 1 : -1) * f.scaling[3 - k];
  return f;
}

enum class Transform { DWT, MODWT };
enum class DecompositionMode { FullSample, Causal };

std::string_view to_string(Transform t);
std::string_view to_string(DecompositionMode m);

struct WaveletConfig {
  Transform transform = Transform::DWT;
  DecompositionMode mode = DecompositionMode::FullSample;
  int min_length = 64;      ///< shortest series (or causal window) decomposed
  int causal_window = 128;  ///< trailing window length in causal mode
  int boundary_pad = 192;   ///< reflected samples added on each side
};

/// Per-series additive decomposition; row i of `components` is month
/// span.first + i, column s is scale s.
template <typename Scalar = double>
struct ScaleDecomposition {
  using Components = Eigen::Matrix<Scalar, Eigen::Dynamic, kScaleCount>;

  std::string stock_id;
  MonthRange span{Month(0), Month(-1)};
  DecompositionMode mode = DecompositionMode::FullSample;
  Components components;

  auto component(int scale) const { return components.col(scale); }
  Scalar at(int scale, Month m) const { return components(m - span.first, scale); }
  int length() const { return static_cast<int>(components.rows()); }
};

struct ScaleLabel {
  int scale;
  std::string cycle_band;
};

/// Cycle label reported for a scale: 6 -> "0~2months", 5 -> "2~4months",
/// ..., 1 -> "32~64months", 0 -> ">64months". Throws ConfigError otherwise.
ScaleLabel scale_cycle_label(int scale);

/// Detail level carried by a scale (7 - scale), or kLevels for the smooth.
inline int scale_level(int scale) {
  if (scale < 0 || scale >= kScaleCount)
    throw ConfigError(fmt::format("scale {} outside 0..6", scale));
  return scale == 0 ? kLevels : kScaleCount - scale;
}

/// Nominal passband of a scale in periods (months): level j detail covers
/// [2^j, 2^(j+1)]; the smooth covers periods above 2^(kLevels+1).
inline std::pair<double, double> scale_period_band(int scale) {
  const int level = scale_level(scale);
  if (scale == 0) return {std::ldexp(1.0, kLevels + 1), std::numeric_limits<double>::infinity()};
  return {std::ldexp(1.0, level), std::ldexp(1.0, level + 1)};
}

namespace detail {

/// Half-sample symmetric index into [0, n).
inline int reflect_index(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

template <typename Scalar>
struct Extension {
  std::vector<Scalar> values;
  int offset;  ///< position of the first original sample
};

template <typename Scalar>
Extension<Scalar> reflect_extend(const Scalar* x, int n, int pad, int multiple) {
  int total = n + 2 * pad;
  if (multiple > 1) total = ((total + multiple - 1) / multiple) * multiple;
  const int left = (total - n) / 2;
  Extension<Scalar> ext{std::vector<Scalar>(static_cast<std::size_t>(total)), left};
  for (int i = 0; i < total; ++i) ext.values[i] = x[reflect_index(i - left, n)];
  return ext;
}

// Circular decimated DWT, one level.
template <typename Scalar>
void dwt_analysis(const std::vector<Scalar>& v, std::vector<Scalar>& approx,
                  std::vector<Scalar>& detail, const FilterPair<Scalar>& f) {
  const int n = static_cast<int>(v.size());
  const int half = n / 2;
  approx.assign(half, Scalar(0));
  detail.assign(half, Scalar(0));
  for (int t = 0; t < half; ++t) {
    Scalar a(0), d(0);
    for (int l = 0; l < 4; ++l) {
      int idx = 2 * t + 1 - l;
      if (idx < 0) idx += n;
      a += f.scaling[l] * v[idx];
      d += f.wavelet[l] * v[idx];
    }
    approx[t] = a;
    detail[t] = d;
  }
}

// Inverse of one analysis level; either input may be empty (treated as zero).
template <typename Scalar>
std::vector<Scalar> dwt_synthesis(const std::vector<Scalar>& approx,
                                  const std::vector<Scalar>& detail, int half,
                                  const FilterPair<Scalar>& f) {
  const int n = 2 * half;
  std::vector<Scalar> v(static_cast<std::size_t>(n), Scalar(0));
  for (int t = 0; t < half; ++t) {
    const Scalar a = approx.empty() ? Scalar(0) : approx[t];
    const Scalar d = detail.empty() ? Scalar(0) : detail[t];
    for (int l = 0; l < 4; ++l) {
      int idx = 2 * t + 1 - l;
      if (idx < 0) idx += n;
      v[idx] += f.scaling[l] * a + f.wavelet[l] * d;
    }
  }
  return v;
}

// Returns the 7 components on the extended grid, index = scale.
template <typename Scalar>
std::array<std::vector<Scalar>, kScaleCount> dwt_mra(const std::vector<Scalar>& ext) {
  const auto f = db2_filters<Scalar>();
  std::vector<std::vector<Scalar>> details(kLevels);
  std::vector<Scalar> approx = ext, next;
  for (int j = 0; j < kLevels; ++j) {
    dwt_analysis(approx, next, details[j], f);
    approx.swap(next);
  }
  const int m = static_cast<int>(ext.size());
  std::array<std::vector<Scalar>, kScaleCount> out;
  auto cascade = [&](std::vector<Scalar> v, int level) {
    for (int k = level; k >= 1; --k) {
      const int half = m >> k;
      v = dwt_synthesis(v, {}, half, f);
    }
    return v;
  };
  for (int j = 1; j <= kLevels; ++j) {
    const int half = m >> j;
    auto v = dwt_synthesis<Scalar>({}, details[j - 1], half, f);
    out[kScaleCount - j] = cascade(std::move(v), j - 1);
  }
  out[0] = cascade(approx, kLevels);
  return out;
}

// Circular MODWT multiresolution analysis (pyramid algorithm).
template <typename Scalar>
std::array<std::vector<Scalar>, kScaleCount> modwt_mra(const std::vector<Scalar>& ext) {
  const auto f = db2_filters<Scalar>();
  const Scalar r2 = std::sqrt(Scalar(2));
  std::array<Scalar, 4> h, g;
  for (int l = 0; l < 4; ++l) {
    h[l] = f.scaling[l] / r2;
    g[l] = f.wavelet[l] / r2;
  }
  const int n = static_cast<int>(ext.size());
  auto wrap = [n](long i) { return static_cast<int>(((i % n) + n) % n); };

  std::vector<std::vector<Scalar>> w(kLevels);
  std::vector<Scalar> v = ext;
  for (int j = 1; j <= kLevels; ++j) {
    const long step = 1L << (j - 1);
    std::vector<Scalar> wj(n, Scalar(0)), vj(n, Scalar(0));
    for (int t = 0; t < n; ++t)
      for (int l = 0; l < 4; ++l) {
        const Scalar x = v[wrap(t - step * l)];
        wj[t] += g[l] * x;
        vj[t] += h[l] * x;
      }
    w[j - 1] = std::move(wj);
    v = std::move(vj);
  }
  auto inverse = [&](const std::vector<Scalar>* wj, const std::vector<Scalar>& vj, int j) {
    const long step = 1L << (j - 1);
    std::vector<Scalar> out(n, Scalar(0));
    for (int t = 0; t < n; ++t)
      for (int l = 0; l < 4; ++l) {
        const int idx = wrap(t + step * l);
        out[t] += h[l] * vj[idx] + (wj ? g[l] * (*wj)[idx] : Scalar(0));
      }
    return out;
  };
  std::array<std::vector<Scalar>, kScaleCount> out;
  const std::vector<Scalar> zeros(n, Scalar(0));
  for (int j = 1; j <= kLevels; ++j) {
    auto cur = inverse(&w[j - 1], zeros, j);
    for (int k = j - 1; k >= 1; --k) cur = inverse(nullptr, cur, k);
    out[kScaleCount - j] = std::move(cur);
  }
  auto cur = v;
  for (int k = kLevels; k >= 1; --k) cur = inverse(nullptr, cur, k);
  out[0] = std::move(cur);
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, kScaleCount> full_sample_components(
    const Scalar* x, int n, const WaveletConfig& cfg) {
  const int multiple = cfg.transform == Transform::DWT ? (1 << kLevels) : 1;
  const auto ext = reflect_extend(x, n, cfg.boundary_pad, multiple);
  const auto parts =
      cfg.transform == Transform::DWT ? dwt_mra(ext.values) : modwt_mra(ext.values);
  Eigen::Matrix<Scalar, Eigen::Dynamic, kScaleCount> out(n, kScaleCount);
  for (int s = 0; s < kScaleCount; ++s)
    for (int i = 0; i < n; ++i) out(i, s) = parts[s][ext.offset + i];
  return out;
}

}  // namespace detail

/// Linear weights mapping a trailing window to the value of each scale at the
/// window's last month. weights(length).row(s) * window == component s at
/// the last sample of a full decomposition of that window.
template <typename Scalar = double>
class CausalKernel {
 public:
  explicit CausalKernel(const WaveletConfig& cfg) : cfg_(cfg) {
    if (cfg.causal_window < cfg.min_length)
      throw ConfigError("causal window shorter than the minimum decomposition length");
    for (int len = cfg.min_length; len <= cfg.causal_window; ++len) {
      Eigen::Matrix<Scalar, kScaleCount, Eigen::Dynamic> w(kScaleCount, len);
      std::vector<Scalar> impulse(static_cast<std::size_t>(len), Scalar(0));
      for (int i = 0; i < len; ++i) {
        impulse[i] = Scalar(1);
        const auto comp = detail::full_sample_components(impulse.data(), len, cfg);
        w.col(i) = comp.row(len - 1).transpose();
        impulse[i] = Scalar(0);
      }
      weights_.push_back(std::move(w));
    }
  }

  const WaveletConfig& config() const { return cfg_; }
  const Eigen::Matrix<Scalar, kScaleCount, Eigen::Dynamic>& weights(int length) const {
    return weights_.at(static_cast<std::size_t>(length - cfg_.min_length));
  }

 private:
  WaveletConfig cfg_;
  std::vector<Eigen::Matrix<Scalar, kScaleCount, Eigen::Dynamic>> weights_;
};

namespace detail {

template <typename Derived>
void validate_series(const Eigen::MatrixBase<Derived>& series, int min_length) {
  if (series.size() < min_length)
    throw DataError(fmt::format("series of length {} shorter than the {}-month minimum",
                                series.size(), min_length));
  if (!series.allFinite()) throw DataError("series contains non-finite values");
}

}  // namespace detail

/// Decomposes a contiguous, finite series into 7 additive scale components.
/// Full-sample mode uses the whole series. Causal mode reports, for each
/// month t with at least min_length months of history, the values at t of a
/// decomposition of the trailing window ending at t; the returned span
/// starts at first + min_length - 1. Throws DataError on short or non-finite
/// input.
template <typename Derived>
ScaleDecomposition<typename Derived::Scalar> decompose(
    const Eigen::MatrixBase<Derived>& series, const WaveletConfig& cfg = {},
    Month first = Month(0), std::string stock_id = {},
    const CausalKernel<typename Derived::Scalar>* kernel = nullptr) {
  using Scalar = typename Derived::Scalar;
  detail::validate_series(series, cfg.min_length);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = series;
  const int n = static_cast<int>(x.size());

  ScaleDecomposition<Scalar> out;
  out.stock_id = std::move(stock_id);
  out.mode = cfg.mode;
  if (cfg.mode == DecompositionMode::FullSample) {
    out.span = {first, first + (n - 1)};
    out.components = detail::full_sample_components(x.data(), n, cfg);
    return out;
  }

  std::optional<CausalKernel<Scalar>> local;
  if (!kernel) kernel = &local.emplace(cfg);
  const int start = cfg.min_length - 1;
  out.span = {first + start, first + (n - 1)};
  out.components.resize(n - start, kScaleCount);
  for (int t = start; t < n; ++t) {
    const int len = std::min(t + 1, cfg.causal_window);
    out.components.row(t - start) =
        (kernel->weights(len) * x.segment(t + 1 - len, len)).transpose();
  }
  return out;
}

/// Elementwise sum of the components.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reconstruct(const ScaleDecomposition<Scalar>& d) {
  return d.components.rowwise().sum();
}

/// Contiguous run of a series with missing values removed.
struct Segment {
  int start;  ///< index of the first sample in the original series
  Eigen::VectorXd values;
};

/// Forward-fills isolated one-month gaps and splits the series at longer
/// gaps. Leading and trailing gaps are dropped.
std::vector<Segment> contiguous_segments(const Eigen::Ref<const Eigen::VectorXd>& series);

/// Delimited export: stock_id, month, scale0..scale6, reconstructed.
void write_decomposition(std::ostream& out, const ScaleDecomposition<double>& d,
                         bool header = true);

}  // namespace turnecho

#endif  // TURNECHO_WAVELET_HPP
