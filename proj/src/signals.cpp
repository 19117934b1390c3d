#include "turnecho/signals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <ostream>

#include <fmt/format.h>

namespace turnecho {

namespace {

constexpr std::array<std::string_view, kSignalCount> kNames = {
    "r_6_2",      "r_12_7",     "r_1_0",      "turn_all",   "turn_ave_0", "turn_ave_1", "turn_ave_2",
    "turn_ave_3", "turn_ave_4", "turn_ave_5", "turn_ave_6", "log_me",     "log_bm"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Mean of row[c - window .. c - 1]; NaN when any is missing or out of range.
double trailing_mean(const Eigen::ArrayXXd& a, Eigen::Index row, int c, int window) {
  if (c - window < 0) return kMissing;
  double sum = 0;
  for (int k = c - window; k < c; ++k) {
    const double v = a(row, k);
    if (!present(v)) return kMissing;
    sum += v;
  }
  return sum / window;
}

}  // namespace

std::string_view to_string(Signal s) { return kNames.at(static_cast<std::size_t>(s)); }

Signal parse_signal(std::string_view name) {
  const std::string n = lower(name);
  for (int i = 0; i < kSignalCount; ++i)
    if (n == kNames[i]) return static_cast<Signal>(i);
  if (n == "mom_6_2") return Signal::R_6_2;
  if (n == "mom_12_7") return Signal::R_12_7;
  if (n == "turnall") return Signal::TurnAll;
  throw ConfigError(fmt::format("unknown signal '{}'", name));
}

std::vector<Signal> all_signals() {
  std::vector<Signal> out;
  for (int i = 0; i < kSignalCount; ++i) out.push_back(static_cast<Signal>(i));
  return out;
}

double cumulative_return(const Eigen::Ref<const Eigen::ArrayXd>& returns, Month origin,
                         Month formation, int m, int n) {
  if (m < n || n < 0 || m < 1)
    throw ConfigError(fmt::format("invalid return window m={} n={}", m, n));
  const int last = formation - origin - std::max(n, 1);
  const int first = formation - origin - m;
  if (first < 0 || last >= returns.size()) return kMissing;
  if (first == last) return returns[first];
  double growth = 1.0;
  for (int c = first; c <= last; ++c) {
    if (!present(returns[c])) return kMissing;
    growth *= 1.0 + returns[c];
  }
  return growth - 1.0;
}

double avg_cyclic_turnover(const ScaleDecomposition<double>& d, int scale, Month formation,
                           int window) {
  if (scale < 0 || scale >= kScaleCount) throw ConfigError("scale outside 0..6");
  if (d.span.empty() || formation - window < d.span.first || formation - 1 > d.span.last)
    return kMissing;
  double sum = 0;
  for (int k = 1; k <= window; ++k) sum += d.at(scale, formation - k);
  return sum / window;
}

SignalPanel::SignalPanel(std::vector<std::string> stock_ids, MonthRange range)
    : stock_ids_(std::move(stock_ids)), range_(range) {
  const auto rows = static_cast<Eigen::Index>(stock_ids_.size());
  const Eigen::Index cols = range.empty() ? 0 : range.size();
  for (auto& v : values_) v = Eigen::ArrayXXd::Constant(rows, cols, kMissing);
  for (auto& v : components_) v = Eigen::ArrayXXd::Constant(rows, cols, kMissing);
}

std::size_t SignalPanel::present_count(Signal s) const {
  const auto& v = values_[idx(s)];
  return static_cast<std::size_t>((v == v).count());
}

SignalPanel build_signals(const PanelDataset& dataset, const SignalConfig& cfg) {
  if (cfg.turnover_window < 1) throw ConfigError("turnover window must be positive");
  SignalPanel panel(dataset.stock_ids(), dataset.month_range());
  const int cols = dataset.month_count();
  const std::size_t stocks = dataset.stock_count();
  const Month origin = dataset.month_range().first;

  std::optional<CausalKernel<double>> kernel;
  if (cfg.wavelet_signals && cfg.wavelet.mode == DecompositionMode::Causal) kernel.emplace(cfg.wavelet);

  const auto& ret = dataset.returns();
  const auto& turn = dataset.turnovers();
  const auto& me = dataset.market_equities();
  const auto& bm = dataset.book_to_markets();
  auto& r62 = panel.values(Signal::R_6_2);
  auto& r127 = panel.values(Signal::R_12_7);
  auto& r10 = panel.values(Signal::R_1_0);
  auto& tall = panel.values(Signal::TurnAll);
  auto& lme = panel.values(Signal::LogME);
  auto& lbm = panel.values(Signal::LogBM);

  std::vector<char> decomposed(stocks, 0);
  parallel_for(stocks, [&](std::size_t s) {
    const auto row = static_cast<Eigen::Index>(s);
    const Eigen::ArrayXd r = ret.row(row).transpose();
    for (int c = 1; c < cols; ++c) {
      const Month t = origin + c;
      r62(row, c) = cumulative_return(r, origin, t, 6, 2);
      r127(row, c) = cumulative_return(r, origin, t, 12, 7);
      r10(row, c) = cumulative_return(r, origin, t, 1, 0);
      tall(row, c) = trailing_mean(turn, row, c, cfg.turnover_window);
      if (present(me(row, c - 1))) lme(row, c) = std::log(me(row, c - 1));
      if (present(bm(row, c - 1)) && bm(row, c - 1) > 0) lbm(row, c) = std::log(bm(row, c - 1));
    }
    if (!cfg.wavelet_signals) return;

    Eigen::VectorXd input = turn.row(row).transpose();
    if (cfg.input == TurnoverInput::Log)
      for (auto& v : input) v = (present(v) && v > 0) ? std::log(v) : kMissing;
    for (const auto& seg : contiguous_segments(input)) {
      if (seg.values.size() < cfg.wavelet.min_length) continue;
      const auto d = decompose(seg.values, cfg.wavelet, origin + seg.start, {},
                               kernel ? &*kernel : nullptr);
      decomposed[s] = 1;
      for (Month m = d.span.first; m <= d.span.last; ++m) {
        const int c = m - origin;
        if (!present(input[c])) continue;
        for (int k = 0; k < kScaleCount; ++k) panel.component(k)(row, c) = d.at(k, m);
      }
    }
    for (int k = 0; k < kScaleCount; ++k) {
      auto& out = panel.values(turn_ave(k));
      const auto& comp = panel.component(k);
      for (int c = 1; c < cols; ++c) out(row, c) = trailing_mean(comp, row, c, cfg.turnover_window);
    }
  });
  panel.set_has_components(cfg.wavelet_signals);
  panel.decomposed_stocks = static_cast<std::size_t>(std::count(decomposed.begin(), decomposed.end(), 1));
  return panel;
}

CorrelationMatrix signal_correlations(const SignalPanel& panel, const std::vector<Signal>& signals,
                                      MonthRange months, long min_joint) {
  if (signals.size() < 2) throw ConfigError("correlations need at least two signals");
  const auto k = static_cast<Eigen::Index>(signals.size());
  CorrelationMatrix out{signals, Eigen::MatrixXd::Constant(k, k, kMissing),
                        Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, k)};
  int c0 = 0, c1 = panel.month_range().size() - 1;
  if (!months.empty()) {
    c0 = std::max(0, months.first - panel.month_range().first);
    c1 = std::min(c1, months.last - panel.month_range().first);
  }
  if (panel.month_range().empty() || c1 < c0) return out;
  const Eigen::Index width = c1 - c0 + 1;
  const auto rows = static_cast<Eigen::Index>(panel.stock_count());

  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      const auto a = panel.values(signals[i]).middleCols(c0, width);
      const auto b = panel.values(signals[j]).middleCols(c0, width);
      // two-pass on the joint sample for numerical stability
      long n = 0;
      double sa = 0, sb = 0;
      for (Eigen::Index c = 0; c < width; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
          if (present(a(r, c)) && present(b(r, c))) {
            ++n;
            sa += a(r, c);
            sb += b(r, c);
          }
      out.joint(i, j) = out.joint(j, i) = n;
      if (n < min_joint) continue;
      const double ma = sa / n, mb = sb / n;
      double saa = 0, sbb = 0, sab = 0;
      for (Eigen::Index c = 0; c < width; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
          if (present(a(r, c)) && present(b(r, c))) {
            const double da = a(r, c) - ma, db = b(r, c) - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
          }
      if (saa <= 0 || sbb <= 0) continue;
      out.rho(i, j) = out.rho(j, i) = i == j ? 1.0 : sab / std::sqrt(saa * sbb);
    }
  return out;
}

void write_signals(std::ostream& out, const SignalPanel& panel, const std::vector<Signal>& signals) {
  out << "stock_id,month";
  for (auto s : signals) out << ',' << to_string(s);
  out << '\n';
  const MonthRange range = panel.month_range();
  if (range.empty()) return;
  for (Month m = range.first; m <= range.last; ++m)
    for (std::size_t s = 0; s < panel.stock_count(); ++s) {
      bool any = false;
      for (auto sig : signals) any = any || present(panel.get(sig, s, m));
      if (!any) continue;
      out << panel.stock_ids()[s] << ',' << m.yyyymm();
      for (auto sig : signals) {
        const double v = panel.get(sig, s, m);
        out << ',';
        if (present(v)) out << fmt::format("{}", v);
      }
      out << '\n';
    }
}

}  // namespace turnecho
