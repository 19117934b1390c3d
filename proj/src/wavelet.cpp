#include "turnecho/wavelet.hpp"

#include <ostream>

namespace turnecho {

std::string_view to_string(Transform t) {
  return t == Transform::DWT ? "dwt" : "modwt";
}

std::string_view to_string(DecompositionMode m) {
  return m == DecompositionMode::FullSample ? "full_sample" : "causal";
}

ScaleLabel scale_cycle_label(int scale) {
  static const std::array<const char*, kScaleCount> labels = {
      ">64months",   "32~64months", "16~32months", "8~16months",
      "4~8months",   "2~4months",   "0~2months"};
  if (scale < 0 || scale >= kScaleCount)
    throw ConfigError(fmt::format("scale {} outside 0..6", scale));
  return {scale, labels[static_cast<std::size_t>(scale)]};
}

std::vector<Segment> contiguous_segments(const Eigen::Ref<const Eigen::VectorXd>& series) {
  std::vector<Segment> out;
  const auto n = static_cast<int>(series.size());
  int i = 0;
  while (i < n) {
    while (i < n && !present(series[i])) ++i;
    if (i >= n) break;
    const int start = i;
    std::vector<double> values;
    while (i < n) {
      if (present(series[i])) {
        values.push_back(series[i]);
        ++i;
      } else if (i + 1 < n && present(series[i + 1])) {
        values.push_back(values.back());  // single-month gap
        ++i;
      } else {
        break;
      }
    }
    out.push_back({start, Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                           static_cast<Eigen::Index>(values.size()))});
  }
  return out;
}

void write_decomposition(std::ostream& out, const ScaleDecomposition<double>& d, bool header) {
  if (header) {
    out << "stock_id,month";
    for (int s = 0; s < kScaleCount; ++s) out << ",scale" << s;
    out << ",reconstructed\n";
  }
  const Eigen::VectorXd total = reconstruct(d);
  for (int i = 0; i < d.length(); ++i) {
    out << d.stock_id << ',' << (d.span.first + i).str();
    for (int s = 0; s < kScaleCount; ++s) out << fmt::format(",{}", d.components(i, s));
    out << fmt::format(",{}\n", total[i]);
  }
}

}  // namespace turnecho
