#ifndef TURNECHO_SYNTH_HPP
#define TURNECHO_SYNTH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "turnecho/core.hpp"
#include "turnecho/panel_data.hpp"

namespace turnecho {

/// Sinusoidal turnover cycle planted in one wavelet scale. Periods are drawn
/// per stock from [period_lo, period_hi]; zeros select the interior of the
/// scale's dyadic band.
struct CycleSpec {
  int scale = 4;
  double amplitude = 0.0;
  double fraction = 1.0;          ///< share of stocks carrying the cycle
  double amplitude_spread = 0.5;  ///< per-stock amplitude in amplitude * [1 - s, 1 + s]
  double period_lo = 0.0;
  double period_hi = 0.0;
};

/// Return-model regressors, all computed by the generator from its own
/// latent series and keyed like the pipeline's signals (data up to t-1):
/// r_6_2, r_12_7, r_1_0, turn_all, cycle_<k> (3-month mean of the planted
/// scale-k cycles), log_me, log_bm.
struct ReturnTerm {
  std::string variable;
  double coef = 0.0;
};

struct InteractionTerm {
  std::string left;
  std::string right;
  double coef = 0.0;
};

struct FactorSpec {
  double mean = 0.0;
  double vol = 0.0;
  double loading_mean = 0.0;
  double loading_sd = 0.0;
};

struct SynthConfig {
  int stocks = 3000;
  int months = 624;
  Month start = Month::from_year_month(1969, 1);
  std::uint64_t seed = 1;

  double baseline_lo = 0.15;  ///< per-stock mean turnover range
  double baseline_hi = 0.45;
  double turnover_noise = 0.065;
  std::vector<CycleSpec> cycles;

  double mu = 0.0;  ///< common mean return
  double idio_vol_lo = 0.04;
  double idio_vol_hi = 0.10;
  /// Volatility of a common monthly shock to the r_6_2 slope.
  double rr_slope_vol = 0.0;
  std::vector<ReturnTerm> linear;
  std::vector<InteractionTerm> interactions;
  std::array<FactorSpec, kFactorCount> factors{};

  double churn_rate = 0.0;  ///< probability that a stock-month is unobserved
  double nyse_share = 0.4;
  double amex_share = 0.1;
  double price_lo = 10.0;
  double price_hi = 200.0;
  double log_me_mean = 6.0;
  double log_me_sd = 1.5;

  /// Throws ConfigError on stocks < 50, months < 128, negative amplitudes,
  /// unknown variables or inconsistent ranges.
  void validate() const;

  /// Desk-scale panel with planted cycles in scales 3..5, a momentum term
  /// structure and a reversal of recent returns among high scale-4/5 cycle
  /// stocks.
  static SynthConfig echo_default();
  /// Same shape with every cycle amplitude, return coefficient, factor
  /// loading and mean set to zero.
  static SynthConfig null_model();
};

SynthConfig parse_synth_config(std::string_view json_text);
SynthConfig load_synth_config_file(const std::string& path);
std::string synth_config_json(const SynthConfig& cfg);

struct SynthPanel {
  PanelDataset dataset;
  FactorTable factors;
};

/// Generates the panel and factor table. Output depends only on the config.
SynthPanel generate_panel(const SynthConfig& cfg);

/// Mixes a seed with a stream index (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace turnecho

#endif  // TURNECHO_SYNTH_HPP
