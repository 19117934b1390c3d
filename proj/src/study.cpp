#include "turnecho/study.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "json.hpp"

namespace turnecho {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename E>
E parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, E>> options,
             const char* what) {
  for (const auto& [name, value] : options)
    if (text == name) return value;
  throw ConfigError(fmt::format("unknown {} '{}'", what, text));
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", it.key(), where));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string resolve(const std::string& base, const std::string& path) {
  if (base.empty() || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

Month parse_config_month(const std::string& text) {
  try {
    return Month::parse(text);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::string_view to_string(TurnoverInput i) { return i == TurnoverInput::Raw ? "raw" : "log"; }

StudyConfig from_json(const json& raw, const std::string& base) {
  if (!raw.is_object()) throw ConfigError("study config must be an object");
  // null marks an absent optional, as written by study_config_json
  json j = json::object();
  for (auto it = raw.begin(); it != raw.end(); ++it)
    if (!it->is_null()) j[it.key()] = *it;
  check_keys(j,
             {"panel", "schema", "factors", "synth", "synth_file", "months", "eligibility", "wavelet",
              "turnover_input", "turnover_window", "weighting", "breakpoints", "lag",
              "fmb_winsorize", "tables", "output_dir"},
             "study config");
  StudyConfig c;
  if (auto it = j.find("panel"); it != j.end()) c.panel_path = resolve(base, it->get<std::string>());
  if (auto it = j.find("factors"); it != j.end()) c.factor_path = resolve(base, it->get<std::string>());
  if (j.contains("synth") && j.contains("synth_file"))
    throw ConfigError("give either synth or synth_file, not both");
  if (auto it = j.find("synth"); it != j.end()) c.synth = parse_synth_config(it->dump());
  if (auto it = j.find("synth_file"); it != j.end())
    c.synth = load_synth_config_file(resolve(base, it->get<std::string>()));
  if (auto it = j.find("schema"); it != j.end()) {
    check_keys(*it,
               {"stock_id", "month", "ret", "price", "turnover", "market_equity",
                "shares_outstanding", "shares_multiplier", "book_to_market", "exchange"},
               "schema");
    auto& s = c.schema;
    read(*it, "stock_id", s.stock_id);
    read(*it, "month", s.month);
    read(*it, "ret", s.ret);
    read(*it, "price", s.price);
    read(*it, "turnover", s.turnover);
    read(*it, "market_equity", s.market_equity);
    read(*it, "shares_outstanding", s.shares_outstanding);
    read(*it, "shares_multiplier", s.shares_multiplier);
    read(*it, "book_to_market", s.book_to_market);
    read(*it, "exchange", s.exchange);
  }
  if (auto it = j.find("months"); it != j.end()) {
    check_keys(*it, {"first", "last"}, "months");
    c.months = MonthRange{parse_config_month(it->at("first").get<std::string>()),
                          parse_config_month(it->at("last").get<std::string>())};
  }
  if (auto it = j.find("eligibility"); it != j.end()) {
    check_keys(*it, {"min_price", "history_months"}, "eligibility");
    read(*it, "min_price", c.eligibility.min_price);
    read(*it, "history_months", c.eligibility.history_months);
  }
  if (auto it = j.find("wavelet"); it != j.end()) {
    check_keys(*it, {"transform", "mode", "min_length", "causal_window", "boundary_pad"}, "wavelet");
    auto& w = c.signals.wavelet;
    if (it->contains("transform"))
      w.transform = parse_enum<Transform>(it->at("transform").get<std::string>(),
                                          {{"dwt", Transform::DWT}, {"modwt", Transform::MODWT}},
                                          "transform");
    if (it->contains("mode"))
      w.mode = parse_enum<DecompositionMode>(
          it->at("mode").get<std::string>(),
          {{"full_sample", DecompositionMode::FullSample}, {"causal", DecompositionMode::Causal}},
          "wavelet mode");
    read(*it, "min_length", w.min_length);
    read(*it, "causal_window", w.causal_window);
    read(*it, "boundary_pad", w.boundary_pad);
  }
  if (auto it = j.find("turnover_input"); it != j.end())
    c.signals.input = parse_enum<TurnoverInput>(it->get<std::string>(),
                                                {{"raw", TurnoverInput::Raw}, {"log", TurnoverInput::Log}},
                                                "turnover input");
  read(j, "turnover_window", c.signals.turnover_window);
  if (auto it = j.find("weighting"); it != j.end())
    c.weighting = parse_enum<Weighting>(it->get<std::string>(),
                                        {{"value", Weighting::Value}, {"equal", Weighting::Equal}},
                                        "weighting");
  if (auto it = j.find("breakpoints"); it != j.end())
    c.breakpoints = parse_enum<BreakpointUniverse>(
        it->get<std::string>(),
        {{"all_eligible", BreakpointUniverse::AllEligible}, {"nyse_only", BreakpointUniverse::NYSEOnly}},
        "breakpoint universe");
  if (auto it = j.find("lag"); it != j.end()) {
    if (it->is_string()) {
      if (it->get<std::string>() != "auto") throw ConfigError("lag must be \"auto\" or an integer");
      c.lag = LagPolicy{};
    } else {
      c.lag = LagPolicy::fixed(it->get<int>());
    }
  }
  read(j, "fmb_winsorize", c.fmb_winsorize);
  if (auto it = j.find("tables"); it != j.end()) {
    c.tables.clear();
    for (const auto& t : *it) c.tables.insert(t.get<int>());
  }
  if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = resolve(base, it->get<std::string>());
  return c;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

StudyConfig parse_study_config(std::string_view json_text, const std::string& base_dir) {
  try {
    return from_json(json::parse(json_text), base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("study config: {}", e.what()));
  }
}

StudyConfig load_study_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open study config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str(), fs::path(path).parent_path().string());
}

std::string study_config_json(const StudyConfig& c) {
  json j;
  j["panel"] = c.panel_path ? json(*c.panel_path) : json(nullptr);
  j["factors"] = c.factor_path ? json(*c.factor_path) : json(nullptr);
  j["synth"] = c.synth ? json::parse(synth_config_json(*c.synth)) : json(nullptr);
  const auto& s = c.schema;
  j["schema"] = {{"stock_id", s.stock_id},
                 {"month", s.month},
                 {"ret", s.ret},
                 {"price", s.price},
                 {"turnover", s.turnover},
                 {"market_equity", s.market_equity},
                 {"shares_outstanding", s.shares_outstanding},
                 {"shares_multiplier", s.shares_multiplier},
                 {"book_to_market", s.book_to_market},
                 {"exchange", s.exchange}};
  j["months"] = c.months ? json{{"first", c.months->first.str()}, {"last", c.months->last.str()}}
                         : json(nullptr);
  j["eligibility"] = {{"min_price", c.eligibility.min_price},
                      {"history_months", c.eligibility.history_months}};
  const auto& w = c.signals.wavelet;
  j["wavelet"] = {{"transform", w.transform == Transform::DWT ? "dwt" : "modwt"},
                  {"mode", to_string(w.mode)},
                  {"min_length", w.min_length},
                  {"causal_window", w.causal_window},
                  {"boundary_pad", w.boundary_pad}};
  j["turnover_input"] = to_string(c.signals.input);
  j["turnover_window"] = c.signals.turnover_window;
  j["weighting"] = to_string(c.weighting);
  j["breakpoints"] = to_string(c.breakpoints);
  j["lag"] = c.lag.automatic ? json("auto") : json(c.lag.lag);
  j["fmb_winsorize"] = c.fmb_winsorize;
  j["tables"] = std::vector<int>(c.tables.begin(), c.tables.end());
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

void StudyConfig::validate() const {
  if (panel_path.has_value() == synth.has_value())
    throw ConfigError("study needs exactly one data source: a panel file or a synth config");
  if (panel_path && !fs::exists(*panel_path))
    throw ConfigError(fmt::format("panel file '{}' does not exist", *panel_path));
  if (factor_path && !fs::exists(*factor_path))
    throw ConfigError(fmt::format("factor file '{}' does not exist", *factor_path));
  if (synth) synth->validate();
  if (months && months->empty()) throw ConfigError("study month range is empty");
  if (tables.empty()) throw ConfigError("no tables selected");
  for (int t : tables)
    if (t < 1 || t > 8) throw ConfigError(fmt::format("table {} outside 1..8", t));
  if (!lag.automatic && lag.lag < 0) throw ConfigError("lag must be >= 0");
  if (signals.turnover_window < 1) throw ConfigError("turnover window must be >= 1");
  if (signals.wavelet.min_length < 16) throw ConfigError("wavelet min_length must be >= 16");
  if (eligibility.min_price < 0) throw ConfigError("min_price must be >= 0");
  if (!required_factors().empty() && !factor_path && !synth)
    throw ConfigError("selected tables need a factor file");
}

std::vector<Factor> StudyConfig::required_factors() const {
  std::set<Factor> need;
  auto add = [&](std::initializer_list<Factor> fs) { need.insert(fs.begin(), fs.end()); };
  if (tables.count(1) || tables.count(5)) add({Factor::MKT, Factor::SMB, Factor::HML});
  if (tables.count(7)) add({Factor::MKT, Factor::STR});
  if (tables.count(8)) add({Factor::MKT, Factor::SMB, Factor::HML, Factor::LIQ});
  return {need.begin(), need.end()};
}

bool StudyConfig::needs_wavelet() const {
  for (int t : {3, 4, 5, 6, 7, 8})
    if (tables.count(t)) return true;
  return false;
}

StudyData load_study_data(const StudyConfig& cfg) {
  StudyData d;
  if (cfg.synth) {
    auto p = generate_panel(*cfg.synth);
    d.dataset = std::move(p.dataset);
    d.factors = std::move(p.factors);
  } else {
    auto loaded = load_panel_file(*cfg.panel_path, cfg.schema);
    d.dataset = std::move(loaded.dataset);
    d.report = std::move(loaded.report);
  }
  if (cfg.factor_path) d.factors = load_factor_table_file(*cfg.factor_path);
  return d;
}

bool StudyResults::ran(std::string_view stage) const {
  for (const auto& r : log)
    if (r.stage == stage) return true;
  return false;
}

const Table* StudyResults::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<double> StudyResults::reported_t_stats(const std::vector<int>& ids) const {
  std::vector<double> out;
  auto has = [&](int id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
  auto push_reg = [&](const RegressionResult<double>& r) {
    for (Eigen::Index i = 0; i < r.t.size(); ++i) out.push_back(r.t[i]);
  };
  if (has(1) && table("table1"))
    for (const auto& [s, u] : univariate) {
      for (const auto& m : u.means) out.push_back(m.t);
      for (const auto& a : u.alphas) out.push_back(a.t[0]);
    }
  if (has(4) && table("table4"))
    for (const auto& [k, b] : bivariate)
      for (const auto& row : b.tests)
        for (const auto& m : row) out.push_back(m.t);
  if (has(5))
    for (const auto& r : spanning) push_reg(r);
  if (has(6))
    for (const auto& f : fama_macbeth)
      for (Eigen::Index i = 0; i < f.t.size(); ++i) out.push_back(f.t[i]);
  if (has(7))
    for (const auto& r : short_term_reversal) push_reg(r);
  if (has(8))
    for (const auto& r : factor_spanning) push_reg(r);
  return out;
}

namespace {

constexpr int kRowGroups = 10;
constexpr int kColumnGroups = 5;

Estimate pct(const MeanTest& m) { return {to_percent(m.mean), m.t}; }

// The study's working state; stages append to `res`.
class Runner {
 public:
  Runner(const StudyConfig& cfg, StudyResults& res) : cfg_(cfg), res_(res) {}

  void run() {
    stage("validate", [&] { validate(); });
    stage(cfg_.synth ? "generate" : "load", [&] { load(); });
    stage(cfg_.needs_wavelet() ? "decompose" : "signals", [&] { signals(); });
    if (cfg_.needs_wavelet()) log("signals", present_counts());
    if (cfg_.tables.count(2)) stage("table2", [&] { table2(); });
    if (cfg_.tables.count(3)) stage("table3", [&] { table3(); });
    if (cfg_.tables.count(1) || cfg_.tables.count(5)) stage("sort_univariate", [&] { univariate(); });
    if (cfg_.tables.count(1)) stage("table1", [&] { table1(); });
    if (!bivariate_needs().empty()) stage("sort_bivariate", [&] { bivariate(); });
    if (cfg_.tables.count(4)) stage("table4", [&] { table4(); });
    if (cfg_.tables.count(5)) stage("table5", [&] { table5(); });
    if (cfg_.tables.count(6)) stage("table6", [&] { table6(); });
    if (cfg_.tables.count(7)) stage("table7", [&] { table7(); });
    if (cfg_.tables.count(8)) stage("table8", [&] { table8(); });
  }

  const std::string& current() const { return current_; }

  void write_manifest(bool ok, const std::string& message) {
    if (cfg_.output_dir.empty()) return;
    fs::create_directories(cfg_.output_dir);
    std::ofstream out(fs::path(cfg_.output_dir) / "manifest.txt", std::ios::binary);
    for (const auto& [k, v] : res_.manifest) out << k << '=' << v << '\n';
    for (std::size_t i = 0; i < res_.log.size(); ++i)
      out << fmt::format("stage.{:02d}={}", i + 1, res_.log[i].stage)
          << (res_.log[i].detail.empty() ? "" : " " + res_.log[i].detail) << '\n';
    if (ok) {
      out << "status=OK\n";
    } else {
      out << "status=FAILED\nfailed_stage=" << current_ << "\nerror=" << message << '\n';
      std::ofstream marker(fs::path(cfg_.output_dir) / "FAILED", std::ios::binary);
      marker << "stage=" << current_ << "\nerror=" << message << '\n';
    }
    out << fmt::format("generated_at={:%Y-%m-%dT%H:%M:%SZ}\n",
                       std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
  }

 private:
  template <typename F>
  void stage(const std::string& name, F&& body) {
    current_ = name;
    body();
    log(name, detail_);
    detail_.clear();
  }

  void log(const std::string& name, const std::string& detail) { res_.log.push_back({name, detail}); }
  void note(const std::string& key, const std::string& value) { res_.manifest.emplace_back(key, value); }

  void emit(Table t, const std::string& lag_note) {
    note(fmt::format("table.{}.stage", t.name), current_);
    note(fmt::format("table.{}.rows", t.name), std::to_string(t.rows.size()));
    if (!lag_note.empty()) note(fmt::format("table.{}.lag", t.name), lag_note);
    if (!cfg_.output_dir.empty()) save_table(cfg_.output_dir, t);
    res_.tables.push_back(std::move(t));
  }

  void validate() {
    cfg_.validate();
    if (cfg_.factor_path) {
      factors_ = load_factor_table_file(*cfg_.factor_path);
      for (Factor f : cfg_.required_factors())
        if (!factors_.has_column(f))
          throw ConfigError(fmt::format("factor {} is required by the selected tables but missing from '{}'",
                                        to_string(f), *cfg_.factor_path));
      factors_loaded_ = true;
    }
    if (!cfg_.output_dir.empty()) {
      fs::create_directories(cfg_.output_dir);
      fs::remove(fs::path(cfg_.output_dir) / "FAILED");
    }
    note("config_hash", fmt::format("{:016x}", res_.config_hash));
    note("source", cfg_.synth ? "synth" : "file");
    if (cfg_.synth) note("seed", std::to_string(cfg_.synth->seed));
    if (cfg_.panel_path) note("panel", *cfg_.panel_path);
    if (cfg_.factor_path) note("factors", *cfg_.factor_path);
    note("lag_policy", cfg_.lag.automatic ? "auto floor(4(T/100)^(2/9))" : fmt::format("fixed {}", cfg_.lag.lag));
    note("weighting", std::string(to_string(cfg_.weighting)));
    note("breakpoints", std::string(to_string(cfg_.breakpoints)));
    note("min_price", format_number(cfg_.eligibility.min_price));
  }

  void load() {
    StudyConfig no_factor_file = cfg_;
    if (factors_loaded_) no_factor_file.factor_path.reset();
    auto d = load_study_data(no_factor_file);
    dataset_ = std::move(d.dataset);
    if (!factors_loaded_) factors_ = std::move(d.factors);
    if (d.report)
      for (const auto& [k, v] : d.report->dropped) note("load.dropped." + k, std::to_string(v));
    const MonthRange data = dataset_.month_range();
    if (data.empty()) throw DataError("panel has no observations");
    holding_ = data;
    if (cfg_.months) holding_ = {std::max(cfg_.months->first, data.first), std::min(cfg_.months->last, data.last)};
    if (holding_.empty()) throw ConfigError("study month range does not overlap the panel");
    if (!cfg_.factor_path && !cfg_.synth && !cfg_.required_factors().empty())
      throw ConfigError("selected tables need factors");
    res_.months = holding_;
    res_.stocks = dataset_.stock_count();
    res_.observations = dataset_.observation_count();
    note("months", fmt::format("{}..{}", holding_.first.str(), holding_.last.str()));
    note("stocks", std::to_string(res_.stocks));
    note("observations", std::to_string(res_.observations));
    detail_ = fmt::format("stocks={} observations={}", res_.stocks, res_.observations);
  }

  void signals() {
    SignalConfig sc = cfg_.signals;
    sc.wavelet_signals = cfg_.needs_wavelet();
    panel_ = build_signals(dataset_, sc);
    if (sc.wavelet_signals) {
      note("wavelet.transform", std::string(to_string(sc.wavelet.transform)));
      note("wavelet.mode", std::string(to_string(sc.wavelet.mode)));
      note("wavelet.decomposed_stocks", std::to_string(panel_.decomposed_stocks));
      detail_ = fmt::format("decomposed_stocks={}", panel_.decomposed_stocks);
    } else {
      detail_ = present_counts();
    }
  }

  std::string present_counts() const {
    std::string s;
    for (Signal g : all_signals()) {
      if (is_wavelet_signal(g) && !cfg_.needs_wavelet()) continue;
      s += fmt::format("{}{}={}", s.empty() ? "" : " ", to_string(g), panel_.present_count(g));
    }
    return s;
  }

  void table2() {
    Table t{"table2", "Scale to cycle correspondence", {"scale", "cycle_label", "level", "period_lo", "period_hi"}, {}};
    for (int s = kScaleCount - 1; s >= 0; --s) {
      const auto [lo, hi] = scale_period_band(s);
      t.rows.push_back({std::to_string(s), scale_cycle_label(s).cycle_band, std::to_string(scale_level(s)),
                        format_number(lo), std::isinf(hi) ? "inf" : format_number(hi)});
    }
    emit(std::move(t), "");
  }

  void table3() {
    std::vector<Signal> sig;
    for (int k = 0; k < kScaleCount; ++k) sig.push_back(turn_ave(k));
    sig.insert(sig.end(), {Signal::TurnAll, Signal::R_12_7, Signal::R_6_2});
    auto c = signal_correlations(panel_, sig, holding_);
    std::vector<std::string> labels;
    std::vector<std::vector<double>> v(sig.size(), std::vector<double>(sig.size()));
    for (std::size_t i = 0; i < sig.size(); ++i) {
      labels.emplace_back(to_string(sig[i]));
      for (std::size_t j = 0; j < sig.size(); ++j) v[i][j] = c.rho(i, j);
    }
    res_.correlations = std::move(c);
    emit(matrix_table("table3", "Pooled correlations of signals", labels, v), "");
  }

  SortSpec base_spec() const {
    SortSpec s;
    s.weighting = cfg_.weighting;
    s.breakpoints = cfg_.breakpoints;
    s.eligibility = cfg_.eligibility;
    return s;
  }

  MeanTest mean(const PortfolioSeries& s) const { return mean_return_test(s, cfg_.lag); }

  void univariate() {
    const bool alphas = cfg_.tables.count(1) > 0;
    const std::vector<Factor> ff3{Factor::MKT, Factor::SMB, Factor::HML};
    for (Signal sig : {Signal::R_6_2, Signal::R_12_7}) {
      SortSpec spec = base_spec();
      spec.row_signal = sig;
      spec.row_groups = kRowGroups;
      UnivariateStats u;
      u.sort = run_sort(dataset_, panel_, spec, formation_range(holding_));
      u.diff = diff_series(u.sort.cell(kRowGroups), u.sort.cell(1));
      std::vector<const PortfolioSeries*> all;
      for (int g = 1; g <= kRowGroups; ++g) all.push_back(&u.sort.cell(g));
      all.push_back(&u.diff);
      for (const auto* s : all) {
        u.means.push_back(mean(*s));
        if (alphas) u.alphas.push_back(factor_alpha(*s, factors_, ff3, cfg_.lag));
      }
      note(fmt::format("sort.{}.months", to_string(sig)), std::to_string(u.diff.size()));
      note(fmt::format("sort.{}.skipped", to_string(sig)), std::to_string(u.sort.skipped.size()));
      res_.univariate.emplace(sig, std::move(u));
    }
    detail_ = "signals=r_6_2,r_12_7";
  }

  std::string lag_of(const std::vector<MeanTest>& tests) const {
    int lo = 1 << 30, hi = -1;
    for (const auto& m : tests) {
      lo = std::min(lo, m.lag);
      hi = std::max(hi, m.lag);
    }
    return lo == hi ? std::to_string(lo) : fmt::format("{}..{}", lo, hi);
  }

  void table1() {
    std::vector<UnivariateLine> lines;
    std::vector<MeanTest> all;
    for (Signal sig : {Signal::R_6_2, Signal::R_12_7}) {
      const auto& u = res_.univariate.at(sig);
      UnivariateLine m{std::string(to_string(sig)), {}, {}}, a{"alpha_ff3", {}, {}};
      for (int g = 0; g < kRowGroups; ++g) {
        m.groups.push_back(pct(u.means[g]));
        a.groups.push_back({to_percent(u.alphas[g].coef[0]), u.alphas[g].t[0]});
      }
      m.diff = pct(u.means.back());
      a.diff = {to_percent(u.alphas.back().coef[0]), u.alphas.back().t[0]};
      lines.push_back(std::move(m));
      lines.push_back(std::move(a));
      all.insert(all.end(), u.means.begin(), u.means.end());
    }
    emit(univariate_table("table1", "Momentum decile returns (percent per month) and FF3 alphas", lines),
         lag_of(all));
  }

  std::vector<std::pair<int, Signal>> bivariate_needs() const {
    std::set<std::pair<int, Signal>> need;
    if (cfg_.tables.count(4))
      for (int s = 0; s < kScaleCount; ++s) {
        need.insert({s, Signal::R_6_2});
        need.insert({s, Signal::R_12_7});
      }
    if (cfg_.tables.count(5))
      need.insert({{4, Signal::R_6_2}, {5, Signal::R_6_2}, {3, Signal::R_12_7}, {4, Signal::R_12_7}});
    if (cfg_.tables.count(7) || cfg_.tables.count(8))
      need.insert({{4, Signal::R_6_2}, {5, Signal::R_6_2}});
    return {need.begin(), need.end()};
  }

  void bivariate() {
    for (const auto& key : bivariate_needs()) {
      SortSpec spec = base_spec();
      spec.row_signal = turn_ave(key.first);
      spec.row_groups = kRowGroups;
      spec.column_signal = key.second;
      spec.column_groups = kColumnGroups;
      BivariateStats b;
      b.sort = run_sort(dataset_, panel_, spec, formation_range(holding_));
      b.series.assign(kRowGroups + 1, std::vector<PortfolioSeries>(kColumnGroups + 1));
      for (int r = 1; r <= kRowGroups; ++r) {
        for (int c = 1; c <= kColumnGroups; ++c) b.series[r - 1][c - 1] = b.sort.cell(r, c);
        b.series[r - 1][kColumnGroups] = diff_series(b.sort.cell(r, kColumnGroups), b.sort.cell(r, 1));
      }
      for (int c = 0; c <= kColumnGroups; ++c)
        b.series[kRowGroups][c] = diff_series(b.series[kRowGroups - 1][c], b.series[0][c]);
      b.tests.resize(kRowGroups + 1);
      for (int r = 0; r <= kRowGroups; ++r)
        for (int c = 0; c <= kColumnGroups; ++c) b.tests[r].push_back(mean(b.series[r][c]));
      note(fmt::format("sort.turn_ave_{}x{}.months", key.first, to_string(key.second)),
           std::to_string(b.series[kRowGroups][kColumnGroups].size()));
      note(fmt::format("sort.turn_ave_{}x{}.skipped", key.first, to_string(key.second)),
           std::to_string(b.sort.skipped.size()));
      res_.bivariate.emplace(key, std::move(b));
    }
    detail_ = fmt::format("sorts={}", res_.bivariate.size());
  }

  BivariateBlock block(int scale, Signal col) const {
    const auto& b = res_.bivariate.at({scale, col});
    BivariateBlock out{std::to_string(scale), std::string(to_string(col)), {}};
    for (const auto& row : b.tests) {
      std::vector<Estimate> line;
      for (const auto& m : row) line.push_back(pct(m));
      out.grid.push_back(std::move(line));
    }
    return out;
  }

  void table4() {
    auto lag = [&](std::initializer_list<int> scales) {
      std::vector<MeanTest> all;
      for (int s : scales)
        for (Signal c : {Signal::R_6_2, Signal::R_12_7})
          for (const auto& row : res_.bivariate.at({s, c}).tests) all.insert(all.end(), row.begin(), row.end());
      return lag_of(all);
    };
    emit(bivariate_table("table4",
                         "Cyclic turnover decile x momentum quintile returns (percent per month)",
                         {block(4, Signal::R_6_2), block(4, Signal::R_12_7), block(5, Signal::R_6_2),
                          block(5, Signal::R_12_7)}),
         lag({4, 5}));
    for (int s : {0, 1, 2, 3, 6})
      emit(bivariate_table(fmt::format("appendix/table4_scale{}", s),
                           fmt::format("Cyclic turnover scale {} x momentum quintile returns", s),
                           {block(s, Signal::R_6_2), block(s, Signal::R_12_7)}),
           lag({s}));
  }

  // Intercept in percent, slopes as estimated; `hide` terms are reported as flags.
  static ModelColumn column(const RegressionResult<double>& r, const std::vector<std::string>& hide = {},
                            const std::string& flag = {}) {
    ModelColumn m;
    for (int i = 0; i < r.parameters(); ++i) {
      const std::string& n = r.names[i];
      if (std::find(hide.begin(), hide.end(), n) != hide.end()) continue;
      const bool icpt = n == "const";
      m.terms.push_back({icpt ? "Intercept" : n, {icpt ? to_percent(r.coef[i]) : r.coef[i], r.t[i]}});
    }
    if (!flag.empty()) m.flags.push_back({flag, hide.empty() ? "No" : "Yes"});
    m.adj_r2 = r.adj_r2;
    m.n = r.n;
    return m;
  }

  static std::string lags(const std::vector<RegressionResult<double>>& rs) {
    std::set<int> l;
    for (const auto& r : rs) l.insert(r.lag);
    std::string s;
    for (int v : l) s += (s.empty() ? "" : ",") + std::to_string(v);
    return s;
  }

  const PortfolioSeries& t10(int scale, Signal col) const {
    return res_.bivariate.at({scale, col}).row_diff(kRowGroups);
  }

  void table5() {
    const std::vector<std::string> ff3{"MKT", "SMB", "HML"};
    struct Panel {
      std::string label;
      Signal dep;
      std::string first_name, second_name;
      const PortfolioSeries *first, *second;
    };
    const Panel panels[] = {
        {"A: y=MOM_6_2", Signal::R_6_2, "reversal_cycle4", "reversal_cycle5", &t10(4, Signal::R_6_2),
         &t10(5, Signal::R_6_2)},
        {"B: y=MOM_12_7", Signal::R_12_7, "control_cycle4", "control_cycle3", &t10(4, Signal::R_12_7),
         &t10(3, Signal::R_12_7)},
    };
    std::vector<ModelPanel> out;
    std::size_t begin = res_.spanning.size();
    for (const auto& p : panels) {
      const auto& y = res_.univariate.at(p.dep).diff;
      ModelPanel mp{p.label, {}};
      const std::vector<std::pair<std::vector<PortfolioSeries>, std::vector<std::string>>> sets{
          {{*p.first}, {p.first_name}},
          {{*p.second}, {p.second_name}},
          {{*p.first, *p.second}, {p.first_name, p.second_name}}};
      for (const auto& [span, names] : sets)
        for (bool ff : {false, true}) {
          auto r = spanning_regression(y, span, names, ff, &factors_, cfg_.lag);
          mp.models.push_back(column(r, ff ? ff3 : std::vector<std::string>{}, "FF3 control"));
          res_.spanning.push_back(std::move(r));
        }
      out.push_back(std::move(mp));
    }
    emit(regression_table("table5", "Momentum spreads on cyclic reversal spreads (intercept in percent)", out,
                          "n", true),
         lags(std::vector<RegressionResult<double>>(res_.spanning.begin() + static_cast<std::ptrdiff_t>(begin), res_.spanning.end())));
  }

  void table6() {
    const std::vector<std::vector<Signal>> specs{
        {Signal::R_6_2, Signal::R_12_7, Signal::TurnAve3, Signal::TurnAve4, Signal::TurnAve5, Signal::R_1_0,
         Signal::LogME, Signal::LogBM},
        {Signal::R_6_2, Signal::R_12_7, Signal::TurnAll, Signal::R_1_0, Signal::LogME, Signal::LogBM},
        {Signal::R_6_2, Signal::R_12_7, Signal::R_1_0, Signal::LogME, Signal::LogBM}};
    std::vector<ModelPanel> out;
    std::set<int> lag;
    for (bool intercept : {false, true}) {
      ModelPanel mp{intercept ? "with intercept" : "no intercept", {}};
      for (const auto& regs : specs) {
        FMBConfig f;
        f.regressors = regs;
        f.intercept = intercept;
        f.lag = cfg_.lag;
        f.winsorize = cfg_.fmb_winsorize;
        f.eligibility = cfg_.eligibility;
        auto r = fama_macbeth(dataset_, panel_, f, holding_);
        ModelColumn m;
        for (std::size_t i = 0; i < r.names.size(); ++i)
          m.terms.push_back({r.names[i] == "const" ? "Intercept" : r.names[i],
                             {to_percent(r.premium[static_cast<Eigen::Index>(i)]),
                              r.t[static_cast<Eigen::Index>(i)]}});
        m.adj_r2 = r.avg_adj_r2;
        m.n = r.avg_n;
        mp.models.push_back(std::move(m));
        lag.insert(r.lag);
        note(fmt::format("fmb.model{}.months", res_.fama_macbeth.size() + 1), std::to_string(r.months.size()));
        res_.fama_macbeth.push_back(std::move(r));
      }
      out.push_back(std::move(mp));
    }
    std::string l;
    for (int v : lag) l += (l.empty() ? "" : ",") + std::to_string(v);
    emit(regression_table("table6", "Fama-MacBeth premiums (percent)", out, "Average n"), l);
  }

  void attribution(const char* name, const char* title, const std::vector<std::vector<Factor>>& sets,
                   std::vector<RegressionResult<double>>& store) {
    std::vector<ModelPanel> out;
    for (int scale : {4, 5}) {
      ModelPanel mp{fmt::format("y=reversal_cycle{}", scale), {}};
      for (const auto& fs : sets) {
        auto r = factor_alpha(t10(scale, Signal::R_6_2), factors_, fs, cfg_.lag);
        mp.models.push_back(column(r));
        store.push_back(std::move(r));
      }
      out.push_back(std::move(mp));
    }
    emit(regression_table(name, title, out), lags(store));
  }

  void table7() {
    attribution("table7", "Cyclic reversal on short-term reversal (intercept in percent)",
                {{Factor::STR}, {Factor::MKT, Factor::STR}}, res_.short_term_reversal);
  }

  void table8() {
    attribution("table8", "Cyclic reversal on market, FF3 and liquidity factors (intercept in percent)",
                {{Factor::MKT},
                 {Factor::MKT, Factor::SMB, Factor::HML},
                 {Factor::MKT, Factor::SMB, Factor::HML, Factor::LIQ}},
                res_.factor_spanning);
  }

  const StudyConfig& cfg_;
  StudyResults& res_;
  std::string current_;
  std::string detail_;
  PanelDataset dataset_;
  FactorTable factors_;
  bool factors_loaded_ = false;
  SignalPanel panel_;
  MonthRange holding_{Month(0), Month(-1)};
};

template <typename E>
[[noreturn]] void rethrow_tagged(Runner& runner, const E& e) {
  const std::string msg = e.what();
  runner.write_manifest(false, msg);
  throw E(fmt::format("stage {}: {}", runner.current(), msg));
}

}  // namespace

StudyResults run_study(const StudyConfig& cfg) {
  StudyResults res;
  StudyConfig hashed = cfg;
  hashed.output_dir.clear();
  res.config_hash = fnv1a64(study_config_json(hashed));
  Runner runner(cfg, res);
  try {
    runner.run();
  } catch (const ConfigError& e) {
    rethrow_tagged(runner, e);
  } catch (const DataError& e) {
    rethrow_tagged(runner, e);
  } catch (const NumericalError& e) {
    rethrow_tagged(runner, e);
  } catch (const std::exception& e) {
    rethrow_tagged(runner, std::runtime_error(e.what()));
  }
  runner.write_manifest(true, {});
  return res;
}

}  // namespace turnecho
