#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "turnecho/econometrics.hpp"
#include "turnecho/report.hpp"
#include "turnecho/study.hpp"

using namespace turnecho;

namespace {

// Data-source flags shared by the analysis verbs. A study config supplies
// defaults; explicit flags override it.
struct Source {
  std::string config;
  std::string panel;
  std::string factors;
  std::string synth;
  std::string preset;
  std::int64_t seed = -1;
  std::string mode;
  std::string transform;
  double min_price = -1;
  std::string first, last;

  void add(CLI::App* app) {
    app->add_option("--config", config, "study config (JSON)");
    app->add_option("--panel", panel, "panel file");
    app->add_option("--factors", factors, "factor file (French-library layout)");
    app->add_option("--synth", synth, "synthetic panel config (JSON)");
    app->add_option("--preset", preset, "synthetic preset: echo or null")->check(CLI::IsMember({"echo", "null"}));
    app->add_option("--seed", seed, "synthetic seed");
    app->add_option("--mode", mode, "wavelet mode")->check(CLI::IsMember({"full_sample", "causal"}));
    app->add_option("--transform", transform, "wavelet transform")->check(CLI::IsMember({"dwt", "modwt"}));
    app->add_option("--min-price", min_price, "eligibility price floor");
    app->add_option("--first", first, "first return month (YYYY-MM)");
    app->add_option("--last", last, "last return month (YYYY-MM)");
  }

  StudyConfig study() const {
    StudyConfig c = config.empty() ? StudyConfig{} : load_study_config_file(config);
    if (!panel.empty()) {
      c.panel_path = panel;
      c.synth.reset();
    }
    if (!factors.empty()) c.factor_path = factors;
    if (!synth.empty()) {
      c.synth = load_synth_config_file(synth);
      c.panel_path.reset();
    }
    if (!preset.empty()) {
      c.synth = preset == "echo" ? SynthConfig::echo_default() : SynthConfig::null_model();
      c.panel_path.reset();
    }
    if (seed >= 0) {
      if (!c.synth) throw ConfigError("--seed needs a synthetic source");
      c.synth->seed = static_cast<std::uint64_t>(seed);
    }
    if (!mode.empty())
      c.signals.wavelet.mode = mode == "causal" ? DecompositionMode::Causal : DecompositionMode::FullSample;
    if (!transform.empty()) c.signals.wavelet.transform = transform == "modwt" ? Transform::MODWT : Transform::DWT;
    if (min_price >= 0) c.eligibility.min_price = min_price;
    if (!first.empty() || !last.empty()) {
      MonthRange r = c.months.value_or(MonthRange{Month(-100000), Month(100000)});
      if (!first.empty()) r.first = parse_month(first);
      if (!last.empty()) r.last = parse_month(last);
      c.months = r;
    }
    if (!c.panel_path && !c.synth) throw ConfigError("no data source: give --panel, --synth, --preset or --config");
    return c;
  }

  static Month parse_month(const std::string& s) {
    try {
      return Month::parse(s);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
};

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw ConfigError(fmt::format("cannot write '{}'", path));
  return file;
}

std::vector<Signal> parse_signals(const std::vector<std::string>& names) {
  std::vector<Signal> out;
  for (const auto& n : names) out.push_back(parse_signal(n));
  return out;
}

MonthRange holding(const StudyConfig& c, const PanelDataset& ds) {
  MonthRange r = ds.month_range();
  if (c.months) r = {std::max(r.first, c.months->first), std::min(r.last, c.months->last)};
  if (r.empty()) throw ConfigError("month range does not overlap the panel");
  return r;
}

LagPolicy lag_policy(int lag, const StudyConfig& c) { return lag >= 0 ? LagPolicy::fixed(lag) : c.lag; }

int load_check(const Source& src) {
  const StudyConfig c = src.study();
  const auto d = load_study_data(c);
  const auto& ds = d.dataset;
  std::cout << fmt::format("stocks={}\nobservations={}\nfirst_month={}\nlast_month={}\n", ds.stock_count(),
                           ds.observation_count(), ds.month_range().first.str(), ds.month_range().last.str());
  if (d.report) std::cout << d.report->str();
  for (int f = 0; f < kFactorCount; ++f)
    std::cout << fmt::format("factor.{}={}\n", to_string(static_cast<Factor>(f)),
                             d.factors.has_column(static_cast<Factor>(f)) ? "present" : "absent");
  return 0;
}

int decompose_verb(const Source& src, const std::string& stock, const std::string& out_path) {
  const StudyConfig c = src.study();
  const auto d = load_study_data(c);
  const auto& ds = d.dataset;
  std::ofstream file;
  std::ostream& out = output(out_path, file);
  bool header = true;
  std::size_t written = 0;
  const auto* kernel_ptr = static_cast<const CausalKernel<double>*>(nullptr);
  std::optional<CausalKernel<double>> kernel;
  if (c.signals.wavelet.mode == DecompositionMode::Causal) {
    kernel.emplace(c.signals.wavelet);
    kernel_ptr = &*kernel;
  }
  for (std::size_t s = 0; s < ds.stock_count(); ++s) {
    if (!stock.empty() && ds.stock_id(s) != stock) continue;
    const Eigen::VectorXd row = ds.turnovers().row(static_cast<Eigen::Index>(s)).transpose();
    for (const auto& seg : contiguous_segments(row)) {
      if (seg.values.size() < c.signals.wavelet.min_length) continue;
      const auto dec = decompose(seg.values, c.signals.wavelet,
                                 ds.month_range().first + seg.start, ds.stock_id(s), kernel_ptr);
      write_decomposition(out, dec, header);
      header = false;
      ++written;
    }
  }
  if (!stock.empty() && written == 0)
    throw DataError(fmt::format("stock '{}' has no decomposable turnover segment", stock));
  return 0;
}

int signals_verb(const Source& src, const std::vector<std::string>& names, const std::string& out_path) {
  const StudyConfig c = src.study();
  const auto d = load_study_data(c);
  const auto sig = names.empty() ? all_signals() : parse_signals(names);
  SignalConfig sc = c.signals;
  sc.wavelet_signals = std::any_of(sig.begin(), sig.end(), is_wavelet_signal);
  const auto panel = build_signals(d.dataset, sc);
  std::ofstream file;
  write_signals(output(out_path, file), panel, sig);
  return 0;
}

struct SortFlags {
  std::string row = "turn_ave_4";
  int row_groups = 10;
  std::string column;
  int column_groups = 5;
  std::string weighting = "value";
  std::string breakpoints = "all_eligible";
  bool conditional = false;
  int lag = -1;
  std::string out;
};

int sort_verb(const Source& src, const SortFlags& f) {
  const StudyConfig c = src.study();
  const auto d = load_study_data(c);
  SortSpec spec;
  spec.row_signal = parse_signal(f.row);
  spec.row_groups = f.row_groups;
  if (!f.column.empty()) spec.column_signal = parse_signal(f.column);
  spec.column_groups = f.column_groups;
  spec.weighting = f.weighting == "equal" ? Weighting::Equal : Weighting::Value;
  spec.breakpoints = f.breakpoints == "nyse_only" ? BreakpointUniverse::NYSEOnly : BreakpointUniverse::AllEligible;
  spec.dependence = f.conditional ? Dependence::Conditional : Dependence::Independent;
  spec.eligibility = c.eligibility;
  spec.validate();
  SignalConfig sc = c.signals;
  sc.wavelet_signals = is_wavelet_signal(spec.row_signal) ||
                       (spec.column_signal && is_wavelet_signal(*spec.column_signal));
  const auto panel = build_signals(d.dataset, sc);
  const MonthRange h = holding(c, d.dataset);
  const auto res = run_sort(d.dataset, panel, spec, formation_range(h));
  const LagPolicy lag = lag_policy(f.lag, c);
  auto est = [&](const PortfolioSeries& s) {
    const auto m = mean_return_test(s, lag);
    return Estimate{to_percent(m.mean), m.t};
  };
  Table t;
  if (!spec.bivariate()) {
    UnivariateLine line{std::string(to_string(spec.row_signal)), {}, {}};
    for (int g = 1; g <= spec.row_groups; ++g) line.groups.push_back(est(res.cell(g)));
    line.diff = est(diff_series(res.cell(spec.row_groups), res.cell(1)));
    t = univariate_table("sort", "univariate sort (percent per month)", {line});
  } else {
    BivariateBlock b{std::string(to_string(spec.row_signal)), std::string(to_string(*spec.column_signal)), {}};
    const int R = spec.row_groups, C = spec.column_groups;
    std::vector<std::vector<PortfolioSeries>> grid(R + 1, std::vector<PortfolioSeries>(C + 1));
    for (int r = 1; r <= R; ++r) {
      for (int k = 1; k <= C; ++k) grid[r - 1][k - 1] = res.cell(r, k);
      grid[r - 1][C] = diff_series(res.cell(r, C), res.cell(r, 1));
    }
    for (int k = 0; k <= C; ++k) grid[R][k] = diff_series(grid[R - 1][k], grid[0][k]);
    for (const auto& row : grid) {
      std::vector<Estimate> line;
      for (const auto& s : row) line.push_back(est(s));
      b.grid.push_back(std::move(line));
    }
    t = bivariate_table("sort", "bivariate sort (percent per month)", {b});
  }
  std::ofstream file;
  write_table(output(f.out, file), t);
  if (!res.skipped.empty()) std::cerr << fmt::format("skipped {} formation months\n", res.skipped.size());
  return 0;
}

int fmb_verb(const Source& src, const std::vector<std::string>& regs, bool intercept, int lag, bool winsor,
             const std::string& out_path) {
  const StudyConfig c = src.study();
  const auto d = load_study_data(c);
  FMBConfig f;
  f.regressors = parse_signals(regs);
  f.intercept = intercept;
  f.lag = lag_policy(lag, c);
  f.winsorize = winsor;
  f.eligibility = c.eligibility;
  SignalConfig sc = c.signals;
  sc.wavelet_signals = std::any_of(f.regressors.begin(), f.regressors.end(), is_wavelet_signal);
  const auto panel = build_signals(d.dataset, sc);
  const auto r = fama_macbeth(d.dataset, panel, f, holding(c, d.dataset));
  ModelColumn m;
  for (std::size_t i = 0; i < r.names.size(); ++i)
    m.terms.push_back({r.names[i], {to_percent(r.premium[static_cast<Eigen::Index>(i)]),
                                    r.t[static_cast<Eigen::Index>(i)]}});
  m.adj_r2 = r.avg_adj_r2;
  m.n = r.avg_n;
  std::ofstream file;
  write_table(output(out_path, file),
              regression_table("fmb", "Fama-MacBeth premiums (percent)", {{"", {m}}}, "Average n"));
  if (r.degenerate) std::cerr << "warning: degenerate slope series, t-statistics unavailable\n";
  return 0;
}

// Reads month,name1,name2,... with decimal returns.
std::map<std::string, PortfolioSeries> read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open series file '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("series file is empty");
  const char delim = detect_delimiter(line);
  auto split = [&](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, delim)) f.push_back(cell);
    return f;
  };
  const auto header = split(line);
  std::map<std::string, PortfolioSeries> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    const Month m = Month::parse(f.at(0));
    for (std::size_t i = 1; i < header.size() && i < f.size(); ++i) {
      if (f[i].empty()) continue;
      try {
        out[header[i]].push(m, std::stod(f[i]), 1, 1.0);
      } catch (const std::logic_error&) {
        throw DataError(fmt::format("bad value '{}' in series file", f[i]));
      }
    }
  }
  return out;
}

int span_verb(const std::string& series_path, const std::string& y, const std::vector<std::string>& xs, bool ff3,
              const std::vector<std::string>& factor_names, const std::string& factor_path, int lag,
              const std::string& out_path) {
  const auto series = read_series(series_path);
  auto get = [&](const std::string& n) -> const PortfolioSeries& {
    auto it = series.find(n);
    if (it == series.end()) throw ConfigError(fmt::format("series '{}' not in '{}'", n, series_path));
    return it->second;
  };
  std::optional<FactorTable> factors;
  if (!factor_path.empty()) factors = load_factor_table_file(factor_path);
  if ((ff3 || !factor_names.empty()) && !factors) throw ConfigError("factor regressors need --factors");
  const LagPolicy lp = lag >= 0 ? LagPolicy::fixed(lag) : LagPolicy{};
  RegressionResult<double> r;
  if (!factor_names.empty()) {
    if (!xs.empty() || ff3) throw ConfigError("--factor-set cannot be combined with --x or --ff3");
    std::vector<Factor> fs;
    for (const auto& n : factor_names) {
      bool found = false;
      for (int k = 0; k < kFactorCount; ++k)
        if (to_string(static_cast<Factor>(k)) == n) {
          fs.push_back(static_cast<Factor>(k));
          found = true;
        }
      if (!found) throw ConfigError(fmt::format("unknown factor '{}'", n));
    }
    r = factor_alpha(get(y), *factors, fs, lp);
  } else {
    std::vector<PortfolioSeries> span;
    for (const auto& x : xs) span.push_back(get(x));
    r = spanning_regression(get(y), span, xs, ff3, factors ? &*factors : nullptr, lp);
  }
  ModelColumn m;
  for (int i = 0; i < r.parameters(); ++i) {
    const bool icpt = r.names[i] == "const";
    m.terms.push_back({icpt ? "Intercept" : r.names[i], {icpt ? to_percent(r.coef[i]) : r.coef[i], r.t[i]}});
  }
  m.adj_r2 = r.adj_r2;
  m.n = r.n;
  std::ofstream file;
  write_table(output(out_path, file),
              regression_table("span", "spanning regression (intercept in percent)", {{"y=" + y, {m}}}));
  return 0;
}

int study_verb(const Source& src, const std::string& out_dir, const std::vector<int>& tables, int lag) {
  StudyConfig c = src.study();
  if (!out_dir.empty()) c.output_dir = out_dir;
  if (!tables.empty()) c.tables = {tables.begin(), tables.end()};
  if (lag >= 0) c.lag = LagPolicy::fixed(lag);
  if (c.output_dir.empty()) throw ConfigError("study needs an output directory (--out or output_dir)");
  const auto res = run_study(c);
  std::cout << fmt::format("config_hash={:016x}\ntables={}\noutput_dir={}\n", res.config_hash, res.tables.size(),
                           c.output_dir);
  return 0;
}

int synth_verb(const std::string& cfg_path, const std::string& preset, std::int64_t seed, int stocks, int months,
               const std::string& panel_out, const std::string& factors_out, bool dump_config) {
  SynthConfig c = !cfg_path.empty()    ? load_synth_config_file(cfg_path)
                  : preset == "null" ? SynthConfig::null_model()
                                     : SynthConfig::echo_default();
  if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
  if (stocks > 0) c.stocks = stocks;
  if (months > 0) c.months = months;
  c.validate();
  if (dump_config) {
    std::cout << synth_config_json(c) << '\n';
    return 0;
  }
  if (panel_out.empty()) throw ConfigError("synth needs --out");
  const auto p = generate_panel(c);
  {
    std::ofstream file;
    write_panel(output(panel_out, file), p.dataset);
  }
  if (!factors_out.empty()) {
    std::ofstream file;
    write_factor_table(output(factors_out, file), p.factors);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyclic turnover and momentum term-structure toolkit"};
  app.require_subcommand(1);

  Source src;

  auto* load = app.add_subcommand("load-check", "load a panel and report row accounting");
  src.add(load);

  std::string stock, out;
  auto* dec = app.add_subcommand("decompose", "write per-stock scale components of turnover");
  src.add(dec);
  dec->add_option("--stock", stock, "only this stock_id");
  dec->add_option("--out", out, "output file (default stdout)");

  std::vector<std::string> sig_names;
  auto* sig = app.add_subcommand("signals", "write sort and regression signals");
  src.add(sig);
  sig->add_option("--signals", sig_names, "signal names (default all)")->delimiter(',');
  sig->add_option("--out", out, "output file (default stdout)");

  SortFlags sf;
  auto* sort = app.add_subcommand("sort", "univariate or bivariate portfolio sort");
  src.add(sort);
  sort->add_option("--row", sf.row, "row sort signal");
  sort->add_option("--row-groups", sf.row_groups, "row groups");
  sort->add_option("--column", sf.column, "column sort signal (bivariate)");
  sort->add_option("--column-groups", sf.column_groups, "column groups");
  sort->add_option("--weighting", sf.weighting)->check(CLI::IsMember({"value", "equal"}));
  sort->add_option("--breakpoints", sf.breakpoints)->check(CLI::IsMember({"all_eligible", "nyse_only"}));
  sort->add_flag("--conditional", sf.conditional, "sort columns within each row group");
  sort->add_option("--lag", sf.lag, "Newey-West lag (default automatic)");
  sort->add_option("--out", sf.out, "output file (default stdout)");

  std::vector<std::string> regs{"r_6_2", "r_12_7", "r_1_0", "log_me", "log_bm"};
  bool intercept = false, winsor = false;
  int lag = -1;
  auto* fmb = app.add_subcommand("fmb", "Fama-MacBeth regression");
  src.add(fmb);
  fmb->add_option("--regressors", regs, "signal names")->delimiter(',');
  fmb->add_flag("--intercept", intercept, "fit a cross-sectional intercept");
  fmb->add_flag("--winsorize", winsor, "winsorize regressors at 1%/99%");
  fmb->add_option("--lag", lag, "Newey-West lag (default automatic)");
  fmb->add_option("--out", out, "output file (default stdout)");

  std::string series_path, y, factor_path;
  std::vector<std::string> xs, factor_set;
  bool ff3 = false;
  auto* span = app.add_subcommand("span", "spanning regression of one return series on others");
  span->add_option("--series", series_path, "month,name,... file of decimal returns")->required();
  span->add_option("--y", y, "dependent series")->required();
  span->add_option("--x", xs, "spanning series")->delimiter(',');
  span->add_flag("--ff3", ff3, "add MKT, SMB, HML");
  span->add_option("--factor-set", factor_set, "regress on these factors only")->delimiter(',');
  span->add_option("--factors", factor_path, "factor file");
  span->add_option("--lag", lag, "Newey-West lag (default automatic)");
  span->add_option("--out", out, "output file (default stdout)");

  std::vector<int> tables;
  auto* study = app.add_subcommand("study", "run the full table battery");
  src.add(study);
  study->add_option("--out", out, "output directory");
  study->add_option("--tables", tables, "tables to produce (1..8)")->delimiter(',');
  study->add_option("--lag", lag, "Newey-West lag (default automatic)");

  std::string synth_cfg, preset = "echo", factors_out;
  std::int64_t seed = -1;
  int stocks = 0, months = 0;
  bool dump = false;
  auto* syn = app.add_subcommand("synth", "generate a synthetic panel and factor file");
  syn->add_option("--config", synth_cfg, "synthetic config (JSON)");
  syn->add_option("--preset", preset, "echo or null")->check(CLI::IsMember({"echo", "null"}));
  syn->add_option("--seed", seed, "generator seed");
  syn->add_option("--stocks", stocks, "number of stocks");
  syn->add_option("--months", months, "number of months");
  syn->add_option("--out", out, "panel output file");
  syn->add_option("--factors-out", factors_out, "factor output file");
  syn->add_flag("--print-config", dump, "print the effective config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*load) return load_check(src);
    if (*dec) return decompose_verb(src, stock, out);
    if (*sig) return signals_verb(src, sig_names, out);
    if (*sort) return sort_verb(src, sf);
    if (*fmb) return fmb_verb(src, regs, intercept, lag, winsor, out);
    if (*span) return span_verb(series_path, y, xs, ff3, factor_set, factor_path, lag, out);
    if (*study) return study_verb(src, out, tables, lag);
    if (*syn) return synth_verb(synth_cfg, preset, seed, stocks, months, out, factors_out, dump);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
