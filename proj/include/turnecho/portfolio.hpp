#ifndef TURNECHO_PORTFOLIO_HPP
#define TURNECHO_PORTFOLIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "turnecho/core.hpp"
#include "turnecho/panel_data.hpp"
#include "turnecho/signals.hpp"

namespace turnecho {

enum class Weighting { Value, Equal };
enum class BreakpointUniverse { AllEligible, NYSEOnly };
enum class Dependence { Independent, Conditional };

std::string_view to_string(Weighting w);
std::string_view to_string(BreakpointUniverse b);
std::string_view to_string(Dependence d);

struct SortSpec {
  Signal row_signal = Signal::TurnAve4;
  int row_groups = 10;
  std::optional<Signal> column_signal;  ///< absent for a univariate sort
  int column_groups = 5;
  Weighting weighting = Weighting::Value;
  BreakpointUniverse breakpoints = BreakpointUniverse::AllEligible;
  Dependence dependence = Dependence::Independent;
  EligibilityPolicy eligibility;

  bool bivariate() const { return column_signal.has_value(); }
  int columns() const { return bivariate() ? column_groups : 1; }
  /// Throws ConfigError when a group count is below 2.
  void validate() const;
};

/// Monthly returns of one portfolio cell, indexed by holding month.
struct PortfolioSeries {
  int row_group = 0;     ///< 1-based; 0 for a difference series
  int column_group = 0;  ///< 1-based; 0 for univariate or difference series
  std::vector<Month> months;
  std::vector<double> returns;
  std::vector<int> counts;           ///< members with a realized return
  std::vector<double> weight_mass;   ///< sum of member weights

  std::size_t size() const { return months.size(); }
  bool empty() const { return months.empty(); }
  std::optional<double> at(Month m) const;
  void push(Month m, double r, int count, double mass);
};

/// Sorted breakpoints b_1..b_{k-1}: b_q is the ceil(q*n/k)-th smallest value.
/// Throws DataError when fewer than k values are supplied or all are equal.
std::vector<double> quantile_breakpoints(std::vector<double> values, int k);

/// Group 1..k for a value: 1 + #{q : value > b_q}. Ties go to the lower group.
int group_of(double value, const std::vector<double>& breakpoints);

/// Groups 1..k for each value, breakpoints taken from `universe` (the values
/// themselves when null). Absent values get group 0. Throws DataError on fewer
/// present values than groups or identical values.
std::vector<int> assign_groups(const std::vector<double>& values, int k,
                               const std::vector<double>* universe = nullptr);

struct WeightedReturn {
  double value = kMissing;
  int members = 0;   ///< members that contributed
  int dropped = 0;   ///< members without a realized return
  double weight_mass = 0;
};

/// sum(w r) / sum(w) over members whose return is present. Throws DataError
/// on empty membership, non-positive weights, or when every member lacks a
/// return.
WeightedReturn vw_return(const std::vector<double>& weights, const std::vector<double>& realized);

struct SkippedMonth {
  Month formation;
  std::string reason;
};

/// k_row x k_col grid of cell series plus bookkeeping.
struct SortResult {
  SortSpec spec;
  std::vector<PortfolioSeries> cells;  ///< row-major
  PortfolioSeries universe;            ///< all sorted stocks, same weighting
  std::vector<SkippedMonth> skipped;
  long dropped_members = 0;
  int formation_months = 0;

  const PortfolioSeries& cell(int row_group, int column_group = 1) const {
    return cells.at(static_cast<std::size_t>((row_group - 1) * spec.columns() + column_group - 1));
  }
};

/// For each formation month f in `formation`: eligibility at f, signals of
/// holding month f+1 (built from data up to f), weights from market equity at
/// f, realized returns at f+1. Months in which a cell ends up empty or
/// breakpoints cannot be formed are skipped and listed. Throws ConfigError on
/// an empty range or invalid spec.
SortResult run_sort(const PanelDataset& dataset, const SignalPanel& panel, const SortSpec& spec,
                    MonthRange formation);

/// high - low on the months both series share. Throws DataError when they
/// share none.
PortfolioSeries diff_series(const PortfolioSeries& high, const PortfolioSeries& low);

}  // namespace turnecho

#endif  // TURNECHO_PORTFOLIO_HPP
