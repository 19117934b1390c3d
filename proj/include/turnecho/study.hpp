#ifndef TURNECHO_STUDY_HPP
#define TURNECHO_STUDY_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "turnecho/econometrics.hpp"
#include "turnecho/panel_data.hpp"
#include "turnecho/portfolio.hpp"
#include "turnecho/report.hpp"
#include "turnecho/signals.hpp"
#include "turnecho/synth.hpp"

namespace turnecho {

/// Full-battery configuration. Exactly one data source: a panel file (with
/// an optional factor file) or a synthetic config.
struct StudyConfig {
  std::optional<std::string> panel_path;
  PanelSchema schema;
  std::optional<std::string> factor_path;
  std::optional<SynthConfig> synth;

  /// Return months analysed; the whole panel when absent.
  std::optional<MonthRange> months;
  EligibilityPolicy eligibility;
  SignalConfig signals;
  Weighting weighting = Weighting::Value;
  BreakpointUniverse breakpoints = BreakpointUniverse::AllEligible;
  LagPolicy lag;
  bool fmb_winsorize = false;
  std::set<int> tables{1, 2, 3, 4, 5, 6, 7, 8};
  /// Empty keeps results in memory only.
  std::string output_dir;

  /// Structural checks plus existence of referenced files. Throws ConfigError.
  void validate() const;
  /// Factors the selected tables regress on.
  std::vector<Factor> required_factors() const;
  bool needs_wavelet() const;
};

/// Reads the JSON form. Relative paths resolve against `base_dir`.
StudyConfig parse_study_config(std::string_view json_text, const std::string& base_dir = {});
StudyConfig load_study_config_file(const std::string& path);
/// Canonical JSON with every field spelled out; the config hash covers all
/// of it except output_dir.
std::string study_config_json(const StudyConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);

/// Group-mean tests of one univariate sort plus FF3 alphas.
struct UnivariateStats {
  SortResult sort;
  PortfolioSeries diff;  ///< high minus low
  std::vector<MeanTest> means;  ///< groups then Diff
  std::vector<RegressionResult<double>> alphas;  ///< same order; empty without factors
};

/// Mean tests of a bivariate sort on the (rows+1) x (columns+1) grid whose
/// last row and column are the high-minus-low spreads.
struct BivariateStats {
  SortResult sort;
  std::vector<std::vector<PortfolioSeries>> series;
  std::vector<std::vector<MeanTest>> tests;

  /// Column high-minus-low spread within row group r (1-based); r = rows+1
  /// is the Diff row.
  const PortfolioSeries& row_diff(int r) const { return series.at(r - 1).back(); }
};

struct StageRecord {
  std::string stage;
  std::string detail;
};

struct StudyResults {
  std::uint64_t config_hash = 0;
  std::vector<StageRecord> log;
  std::vector<std::pair<std::string, std::string>> manifest;  ///< ordered key=value
  std::vector<Table> tables;

  MonthRange months{Month(0), Month(-1)};
  std::size_t stocks = 0;
  std::size_t observations = 0;
  std::optional<CorrelationMatrix> correlations;
  std::map<Signal, UnivariateStats> univariate;
  /// Keyed by (scale, column signal).
  std::map<std::pair<int, Signal>, BivariateStats> bivariate;
  std::vector<RegressionResult<double>> spanning;  ///< momentum on cyclic spreads, table5 column order
  std::vector<FMBResult> fama_macbeth;
  std::vector<RegressionResult<double>> short_term_reversal;
  std::vector<RegressionResult<double>> factor_spanning;

  bool ran(std::string_view stage) const;
  const Table* table(std::string_view name) const;
  /// Every t-statistic shown in the named tables.
  std::vector<double> reported_t_stats(const std::vector<int>& table_ids) const;
};

/// Runs the selected battery in order: validate, load or generate,
/// decompose, signals with the correlation table, univariate sorts,
/// bivariate sorts, spanning tests, Fama-MacBeth, reversal attribution.
/// With an output directory, tables are written as each stage finishes and
/// the manifest at the end; a failing stage leaves the finished files, a
/// FAILED marker and a manifest ending in status=FAILED, and rethrows the
/// error with the stage name prefixed.
StudyResults run_study(const StudyConfig& cfg);

/// Input panel of the study, loaded or generated.
struct StudyData {
  PanelDataset dataset;
  FactorTable factors;
  std::optional<LoadReport> report;
};
StudyData load_study_data(const StudyConfig& cfg);

/// Canonical formation range for holding months `holding`.
inline MonthRange formation_range(MonthRange holding) { return {holding.first - 1, holding.last - 1}; }

}  // namespace turnecho

#endif  // TURNECHO_STUDY_HPP
