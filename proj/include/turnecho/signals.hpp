#ifndef TURNECHO_SIGNALS_HPP
#define TURNECHO_SIGNALS_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "turnecho/core.hpp"
#include "turnecho/panel_data.hpp"
#include "turnecho/wavelet.hpp"

namespace turnecho {

/// Sort and regression variables. Each is keyed by the month whose return it
/// is meant to predict and uses only data from earlier months.
enum class Signal : int {
  R_6_2 = 0,  ///< compound return over t-6 .. t-2
  R_12_7,     ///< compound return over t-12 .. t-7
  R_1_0,      ///< return of t-1
  TurnAll,    ///< mean turnover over t-3 .. t-1
  TurnAve0,   ///< mean scale component over t-3 .. t-1, scales 0..6 follow
  TurnAve1,
  TurnAve2,
  TurnAve3,
  TurnAve4,
  TurnAve5,
  TurnAve6,
  LogME,  ///< log market equity at t-1
  LogBM,  ///< log book-to-market at t-1
};
inline constexpr int kSignalCount = 13;

inline Signal turn_ave(int scale) {
  if (scale < 0 || scale >= kScaleCount) throw ConfigError("turn_ave scale outside 0..6");
  return static_cast<Signal>(static_cast<int>(Signal::TurnAve0) + scale);
}
inline bool is_wavelet_signal(Signal s) {
  return s >= Signal::TurnAve0 && s <= Signal::TurnAve6;
}

/// Canonical lowercase name, e.g. "r_6_2", "turn_ave_4", "log_me".
std::string_view to_string(Signal s);
/// Accepts canonical names case-insensitively plus "mom_6_2", "mom_12_7",
/// "turn_all". Throws ConfigError otherwise.
Signal parse_signal(std::string_view name);
std::vector<Signal> all_signals();

/// Compound return over months formation-m .. formation-max(n,1) of a dense
/// return row whose column 0 is month `origin`. NaN when any month of the
/// window is missing or outside the row.
double cumulative_return(const Eigen::Ref<const Eigen::ArrayXd>& returns, Month origin,
                         Month formation, int m, int n);

/// Mean of one scale component over formation-window .. formation-1. NaN when
/// any of those months falls outside the decomposed span.
double avg_cyclic_turnover(const ScaleDecomposition<double>& d, int scale, Month formation,
                           int window = 3);

enum class TurnoverInput { Raw, Log };

struct SignalConfig {
  WaveletConfig wavelet;
  TurnoverInput input = TurnoverInput::Raw;
  int turnover_window = 3;
  /// When false the turn_ave signals are left absent and no decomposition runs.
  bool wavelet_signals = true;
};

/// Immutable stock x month signal arrays aligned with the source dataset.
class SignalPanel {
 public:
  SignalPanel() = default;
  SignalPanel(std::vector<std::string> stock_ids, MonthRange range);

  std::size_t stock_count() const { return stock_ids_.size(); }
  const std::vector<std::string>& stock_ids() const { return stock_ids_; }
  MonthRange month_range() const { return range_; }
  int column(Month m) const { return range_.contains(m) ? (m - range_.first) : -1; }

  double get(Signal s, std::size_t stock, Month m) const {
    const int c = column(m);
    return c < 0 ? kMissing : values_[idx(s)](static_cast<Eigen::Index>(stock), c);
  }
  const Eigen::ArrayXXd& values(Signal s) const { return values_[idx(s)]; }
  Eigen::ArrayXXd& values(Signal s) { return values_[idx(s)]; }
  std::size_t present_count(Signal s) const;

  /// Per-scale component values (stock x month), NaN outside decomposed spans.
  const Eigen::ArrayXXd& component(int scale) const { return components_.at(scale); }
  Eigen::ArrayXXd& component(int scale) { return components_.at(scale); }
  bool has_components() const { return has_components_; }
  void set_has_components(bool v) { has_components_ = v; }

  /// Stocks whose turnover had at least one decomposable segment.
  std::size_t decomposed_stocks = 0;

 private:
  static std::size_t idx(Signal s) { return static_cast<std::size_t>(s); }

  std::vector<std::string> stock_ids_;
  MonthRange range_{Month(0), Month(-1)};
  std::array<Eigen::ArrayXXd, kSignalCount> values_;
  std::array<Eigen::ArrayXXd, kScaleCount> components_;
  bool has_components_ = false;
};

/// Builds every signal. Turnover is split into contiguous segments (single
/// missing months forward-filled); segments of at least min_length months
/// are decomposed. Components at months whose turnover was missing stay
/// absent.
SignalPanel build_signals(const PanelDataset& dataset, const SignalConfig& cfg = {});

struct CorrelationMatrix {
  std::vector<Signal> signals;
  Eigen::MatrixXd rho;                     ///< NaN where a pair lacks observations
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> joint;  ///< joint observation counts
};

/// Pooled Pearson correlations over all stock-months, pairwise on jointly
/// present values. Pairs with fewer than `min_joint` observations are NaN.
/// Restricting to `months` when it is non-empty.
CorrelationMatrix signal_correlations(const SignalPanel& panel, const std::vector<Signal>& signals,
                                      MonthRange months = {Month(0), Month(-1)},
                                      long min_joint = 30);

/// Delimited export: stock_id, month, one column per signal. Rows where all
/// requested signals are absent are omitted.
void write_signals(std::ostream& out, const SignalPanel& panel, const std::vector<Signal>& signals);

}  // namespace turnecho

#endif  // TURNECHO_SIGNALS_HPP
