#ifndef TURNECHO_PANEL_DATA_HPP
#define TURNECHO_PANEL_DATA_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turnecho/core.hpp"

namespace turnecho {

/// One stock-month record. Missing numeric fields hold NaN.
struct PanelObservation {
  std::string stock_id;
  Month month;
  double ret = kMissing;           ///< simple monthly return, decimal
  double price = kMissing;         ///< absolute end-of-month price
  double turnover_raw = kMissing;  ///< shares traded / shares outstanding, as reported
  double turnover = kMissing;      ///< after the NASDAQ volume adjustment
  double market_equity = kMissing;
  double book_to_market = kMissing;
  Exchange exchange = Exchange::NYSE;
};

/// Divisor applied to reported NASDAQ turnover to remove dealer double counting.
/// 2.0 through 2000-12, 1.8 during 2001, 1.6 during 2002-2003, 1.0 afterwards.
/// Other exchanges always get 1.0.
double nasdaq_turnover_divisor(Month month, Exchange exchange);

/// Adjusted turnover. Apply exactly once: the adjustment is not idempotent.
/// Throws DataError on negative input.
double adjust_nasdaq_turnover(double turnover_raw, Month month, Exchange exchange);

/// Immutable stock-by-month panel. Fields are stored as dense
/// (stock x month) arrays with NaN marking absence; stocks are ordered by
/// stock_id and months run contiguously over month_range().
class PanelDataset {
 public:
  PanelDataset() = default;

  /// Validates and packs observations. Throws DataError on a duplicate
  /// (stock_id, month) or on an invariant violation (ME <= 0, turnover < 0).
  explicit PanelDataset(std::vector<PanelObservation> observations);

  std::size_t stock_count() const { return stock_ids_.size(); }
  const std::vector<std::string>& stock_ids() const { return stock_ids_; }
  const std::string& stock_id(std::size_t stock) const { return stock_ids_.at(stock); }
  std::optional<std::size_t> find_stock(const std::string& id) const;

  MonthRange month_range() const { return range_; }
  int month_count() const { return range_.size(); }
  /// Column of `m` in the dense arrays, or -1 when outside month_range().
  int column(Month m) const {
    return range_.contains(m) ? (m - range_.first) : -1;
  }
  std::size_t observation_count() const { return observation_count_; }

  bool has(std::size_t stock, Month m) const {
    const int c = column(m);
    return c >= 0 && observed_(stock, c) != 0;
  }
  double ret(std::size_t stock, Month m) const { return at(ret_, stock, m); }
  double price(std::size_t stock, Month m) const { return at(price_, stock, m); }
  double turnover(std::size_t stock, Month m) const { return at(turnover_, stock, m); }
  double turnover_raw(std::size_t stock, Month m) const { return at(turnover_raw_, stock, m); }
  double market_equity(std::size_t stock, Month m) const { return at(market_equity_, stock, m); }
  double book_to_market(std::size_t stock, Month m) const { return at(book_to_market_, stock, m); }
  std::optional<Exchange> exchange(std::size_t stock, Month m) const;

  const Eigen::ArrayXXd& returns() const { return ret_; }
  const Eigen::ArrayXXd& prices() const { return price_; }
  const Eigen::ArrayXXd& turnovers() const { return turnover_; }
  const Eigen::ArrayXXd& market_equities() const { return market_equity_; }
  const Eigen::ArrayXXd& book_to_markets() const { return book_to_market_; }

  std::optional<PanelObservation> observation(std::size_t stock, Month m) const;
  /// All observations ordered by (month, stock_id).
  std::vector<PanelObservation> observations() const;

 private:
  double at(const Eigen::ArrayXXd& a, std::size_t stock, Month m) const {
    const int c = column(m);
    return c < 0 ? kMissing : a(static_cast<Eigen::Index>(stock), c);
  }

  std::vector<std::string> stock_ids_;
  MonthRange range_{Month(0), Month(-1)};
  std::size_t observation_count_ = 0;
  Eigen::ArrayXXd ret_, price_, turnover_, turnover_raw_, market_equity_, book_to_market_;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> observed_, exchange_;
};

/// Column names used when reading a panel file. Empty optional names mean
/// the field is not supplied.
struct PanelSchema {
  std::string stock_id = "stock_id";
  std::string month = "month";
  std::string ret = "ret";
  std::string price = "price";
  std::string turnover = "turnover";
  std::string market_equity = "market_equity";
  std::string shares_outstanding;  ///< used for ME = |price| * shares when market_equity is absent
  double shares_multiplier = 1.0;
  std::string book_to_market = "book_to_market";
  std::string exchange = "exchange";
};

/// Rows read / kept / dropped per reason.
struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::map<std::string, std::size_t> dropped;

  std::size_t rows_dropped() const;
  /// key=value lines, one per counter.
  std::string str() const;
};

struct LoadedPanel {
  PanelDataset dataset;
  LoadReport report;
};

/// Guesses the field delimiter (comma, tab or pipe) from a header line.
char detect_delimiter(const std::string& header_line);

/// Reads a delimited panel with a header row. The NASDAQ adjustment is
/// applied to turnover here. Rows whose mandatory fields (stock id, month,
/// price, exchange) do not parse are dropped and counted; a missing
/// mandatory column or a duplicate (stock_id, month) throws DataError.
LoadedPanel load_panel(std::istream& in, const PanelSchema& schema = {});
LoadedPanel load_panel_file(const std::string& path, const PanelSchema& schema = {});

/// Writes the canonical comma-delimited layout read by the default schema.
/// Turnover is written unadjusted so that reloading reproduces the dataset.
void write_panel(std::ostream& out, const PanelDataset& dataset);

/// Price filter applied at a formation month.
struct EligibilityPolicy {
  double min_price = 5.0;
  /// When positive, the price filter must also hold in each observed month
  /// of the preceding `history_months` months.
  int history_months = 0;
};

/// Stocks observed at `month` with price >= min_price and market equity
/// present, as sorted stock indices. Throws ConfigError when `month` is
/// outside the dataset range.
std::vector<std::size_t> eligible_stocks(const PanelDataset& dataset, Month month,
                                         const EligibilityPolicy& policy = {});

enum class Factor : int { MKT = 0, SMB, HML, STR, LIQ };
inline constexpr int kFactorCount = 5;
std::string_view to_string(Factor f);

/// Monthly factor returns in decimal units. Columns that were not supplied
/// only fail when requested.
class FactorTable {
 public:
  FactorTable() = default;

  void set(Month m, Factor f, double value);
  bool has_column(Factor f) const { return columns_[static_cast<int>(f)]; }
  bool has(Month m, Factor f) const;
  /// Throws DataError when the column or the month is missing.
  double get(Month m, Factor f) const;
  std::vector<Month> months() const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::map<Month, std::array<double, kFactorCount>> rows_;
  std::array<bool, kFactorCount> columns_{};
};

/// Reads a French-library style file: first column YYYYMM, remaining
/// columns factor returns in percent. Recognized headers (case-insensitive):
/// Mkt-RF/MKT, SMB, HML, ST_Rev/STR, LIQ/PS_VWF; others are ignored.
/// Throws DataError on duplicate months or unparseable values.
FactorTable load_factor_table(std::istream& in);
FactorTable load_factor_table_file(const std::string& path);
void write_factor_table(std::ostream& out, const FactorTable& table);

}  // namespace turnecho

#endif  // TURNECHO_PANEL_DATA_HPP
