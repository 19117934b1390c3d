#include "turnecho/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "turnecho/wavelet.hpp"

namespace turnecho {

namespace {

using json = nlohmann::json;

enum class Var { R62, R127, R10, TurnAll, LogME, LogBM, Cycle0 };
constexpr int kVarCount = static_cast<int>(Var::Cycle0) + kScaleCount;

int parse_var(const std::string& name) {
  if (name == "r_6_2") return static_cast<int>(Var::R62);
  if (name == "r_12_7") return static_cast<int>(Var::R127);
  if (name == "r_1_0") return static_cast<int>(Var::R10);
  if (name == "turn_all") return static_cast<int>(Var::TurnAll);
  if (name == "log_me") return static_cast<int>(Var::LogME);
  if (name == "log_bm") return static_cast<int>(Var::LogBM);
  if (name.rfind("cycle_", 0) == 0 && name.size() == 7 && name[6] >= '0' && name[6] <= '6')
    return static_cast<int>(Var::Cycle0) + (name[6] - '0');
  throw ConfigError(fmt::format("unknown return-model variable '{}'", name));
}

std::pair<double, double> cycle_periods(const CycleSpec& c) {
  if (c.period_lo > 0 && c.period_hi > 0) return {c.period_lo, c.period_hi};
  const auto [lo, hi] = scale_period_band(c.scale);
  return {1.25 * lo, 0.875 * hi};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void SynthConfig::validate() const {
  if (stocks < 50) throw ConfigError(fmt::format("synthetic panel needs >= 50 stocks, got {}", stocks));
  if (months < 128) throw ConfigError(fmt::format("synthetic panel needs >= 128 months, got {}", months));
  if (!(baseline_lo > 0 && baseline_lo <= baseline_hi)) throw ConfigError("invalid baseline turnover range");
  if (!(turnover_noise >= 0)) throw ConfigError("turnover noise must be >= 0");
  if (!(idio_vol_lo >= 0 && idio_vol_lo <= idio_vol_hi)) throw ConfigError("invalid idiosyncratic volatility range");
  if (!(rr_slope_vol >= 0)) throw ConfigError("rr_slope_vol must be >= 0");
  if (!(churn_rate >= 0 && churn_rate < 1)) throw ConfigError("churn rate must lie in [0, 1)");
  if (!(nyse_share >= 0 && amex_share >= 0 && nyse_share + amex_share <= 1))
    throw ConfigError("exchange shares must be non-negative and sum to at most 1");
  if (!(price_lo > 0 && price_lo <= price_hi)) throw ConfigError("invalid initial price range");
  if (!(log_me_sd >= 0)) throw ConfigError("log_me_sd must be >= 0");
  for (const auto& c : cycles) {
    if (c.scale < 1 || c.scale >= kScaleCount)
      throw ConfigError(fmt::format("cycle scale {} outside 1..6", c.scale));
    if (c.amplitude < 0) throw ConfigError("cycle amplitudes must be >= 0");
    if (!(c.fraction >= 0 && c.fraction <= 1)) throw ConfigError("cycle fraction must lie in [0, 1]");
    if (!(c.amplitude_spread >= 0 && c.amplitude_spread <= 1))
      throw ConfigError("cycle amplitude spread must lie in [0, 1]");
    const auto [lo, hi] = cycle_periods(c);
    if (!(lo >= 2 && lo <= hi)) throw ConfigError("cycle periods must satisfy 2 <= lo <= hi");
  }
  for (const auto& f : factors)
    if (!(f.vol >= 0 && f.loading_sd >= 0)) throw ConfigError("factor volatilities must be >= 0");
  for (const auto& l : linear) parse_var(l.variable);
  for (const auto& i : interactions) {
    parse_var(i.left);
    parse_var(i.right);
  }
}

SynthConfig SynthConfig::echo_default() {
  SynthConfig c;
  c.cycles = {{3, 0.03}, {4, 0.03}, {5, 0.03}};
  c.linear = {{"r_6_2", 0.01}, {"r_12_7", 0.02}, {"r_1_0", -0.03}};
  c.interactions = {{"r_6_2", "cycle_4", -2.0}, {"r_6_2", "cycle_5", -3.0}};
  c.rr_slope_vol = 0.02;
  c.factors[static_cast<int>(Factor::MKT)] = {0.006, 0.045, 1.0, 0.3};
  c.factors[static_cast<int>(Factor::SMB)] = {0.002, 0.03, 0.5, 0.5};
  c.factors[static_cast<int>(Factor::HML)] = {0.003, 0.03, 0.2, 0.5};
  c.factors[static_cast<int>(Factor::STR)] = {0.004, 0.035, 0.0, 0.3};
  c.factors[static_cast<int>(Factor::LIQ)] = {0.004, 0.035, 0.0, 0.3};
  return c;
}

SynthConfig SynthConfig::null_model() {
  SynthConfig c = echo_default();
  for (auto& cy : c.cycles) cy.amplitude = 0;
  for (auto& l : c.linear) l.coef = 0;
  for (auto& i : c.interactions) i.coef = 0;
  c.rr_slope_vol = 0;
  c.mu = 0;
  for (auto& f : c.factors) {
    f.mean = 0;
    f.loading_mean = 0;
    f.loading_sd = 0;
  }
  return c;
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(fmt::format("unknown key '{}' in {}", it.key(), where));
  }
}

SynthConfig from_json(const json& j) {
  check_keys(j,
             {"stocks", "months", "start", "seed", "baseline_lo", "baseline_hi", "turnover_noise",
              "cycles", "mu", "idio_vol_lo", "idio_vol_hi", "rr_slope_vol", "linear",
              "interactions", "factors", "churn_rate", "nyse_share", "amex_share", "price_lo",
              "price_hi", "log_me_mean", "log_me_sd", "preset"},
             "synth config");
  SynthConfig c;
  if (auto it = j.find("preset"); it != j.end()) {
    const auto p = it->get<std::string>();
    if (p == "echo") c = SynthConfig::echo_default();
    else if (p == "null") c = SynthConfig::null_model();
    else if (p != "empty") throw ConfigError(fmt::format("unknown synth preset '{}'", p));
  }
  read(j, "stocks", c.stocks);
  read(j, "months", c.months);
  if (auto it = j.find("start"); it != j.end()) {
    try {
      c.start = Month::parse(it->get<std::string>());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "seed", c.seed);
  read(j, "baseline_lo", c.baseline_lo);
  read(j, "baseline_hi", c.baseline_hi);
  read(j, "turnover_noise", c.turnover_noise);
  read(j, "mu", c.mu);
  read(j, "idio_vol_lo", c.idio_vol_lo);
  read(j, "idio_vol_hi", c.idio_vol_hi);
  read(j, "rr_slope_vol", c.rr_slope_vol);
  read(j, "churn_rate", c.churn_rate);
  read(j, "nyse_share", c.nyse_share);
  read(j, "amex_share", c.amex_share);
  read(j, "price_lo", c.price_lo);
  read(j, "price_hi", c.price_hi);
  read(j, "log_me_mean", c.log_me_mean);
  read(j, "log_me_sd", c.log_me_sd);
  if (auto it = j.find("cycles"); it != j.end()) {
    c.cycles.clear();
    for (const auto& e : *it) {
      check_keys(e, {"scale", "amplitude", "fraction", "amplitude_spread", "period_lo", "period_hi"},
                 "cycle");
      CycleSpec cy;
      read(e, "scale", cy.scale);
      read(e, "amplitude", cy.amplitude);
      read(e, "fraction", cy.fraction);
      read(e, "amplitude_spread", cy.amplitude_spread);
      read(e, "period_lo", cy.period_lo);
      read(e, "period_hi", cy.period_hi);
      c.cycles.push_back(cy);
    }
  }
  if (auto it = j.find("linear"); it != j.end()) {
    c.linear.clear();
    for (const auto& e : *it) {
      check_keys(e, {"variable", "coef"}, "linear term");
      c.linear.push_back({e.at("variable").get<std::string>(), e.value("coef", 0.0)});
    }
  }
  if (auto it = j.find("interactions"); it != j.end()) {
    c.interactions.clear();
    for (const auto& e : *it) {
      check_keys(e, {"left", "right", "coef"}, "interaction term");
      c.interactions.push_back({e.at("left").get<std::string>(), e.at("right").get<std::string>(),
                                e.value("coef", 0.0)});
    }
  }
  if (auto it = j.find("factors"); it != j.end()) {
    check_keys(*it, {"MKT", "SMB", "HML", "STR", "LIQ"}, "factors");
    for (int f = 0; f < kFactorCount; ++f) {
      const std::string name(to_string(static_cast<Factor>(f)));
      if (auto fi = it->find(name); fi != it->end()) {
        check_keys(*fi, {"mean", "vol", "loading_mean", "loading_sd"}, "factor");
        auto& spec = c.factors[f];
        read(*fi, "mean", spec.mean);
        read(*fi, "vol", spec.vol);
        read(*fi, "loading_mean", spec.loading_mean);
        read(*fi, "loading_sd", spec.loading_sd);
      }
    }
  }
  return c;
}

}  // namespace

SynthConfig parse_synth_config(std::string_view json_text) {
  SynthConfig c;
  try {
    c = from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("synth config: {}", e.what()));
  }
  c.validate();
  return c;
}

SynthConfig load_synth_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open synth config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_config(ss.str());
}

std::string synth_config_json(const SynthConfig& c) {
  json j;
  j["stocks"] = c.stocks;
  j["months"] = c.months;
  j["start"] = c.start.str();
  j["seed"] = c.seed;
  j["baseline_lo"] = c.baseline_lo;
  j["baseline_hi"] = c.baseline_hi;
  j["turnover_noise"] = c.turnover_noise;
  j["mu"] = c.mu;
  j["idio_vol_lo"] = c.idio_vol_lo;
  j["idio_vol_hi"] = c.idio_vol_hi;
  j["rr_slope_vol"] = c.rr_slope_vol;
  j["churn_rate"] = c.churn_rate;
  j["nyse_share"] = c.nyse_share;
  j["amex_share"] = c.amex_share;
  j["price_lo"] = c.price_lo;
  j["price_hi"] = c.price_hi;
  j["log_me_mean"] = c.log_me_mean;
  j["log_me_sd"] = c.log_me_sd;
  j["cycles"] = json::array();
  for (const auto& cy : c.cycles)
    j["cycles"].push_back({{"scale", cy.scale},
                           {"amplitude", cy.amplitude},
                           {"fraction", cy.fraction},
                           {"amplitude_spread", cy.amplitude_spread},
                           {"period_lo", cy.period_lo},
                           {"period_hi", cy.period_hi}});
  j["linear"] = json::array();
  for (const auto& l : c.linear) j["linear"].push_back({{"variable", l.variable}, {"coef", l.coef}});
  j["interactions"] = json::array();
  for (const auto& i : c.interactions)
    j["interactions"].push_back({{"left", i.left}, {"right", i.right}, {"coef", i.coef}});
  json f = json::object();
  for (int k = 0; k < kFactorCount; ++k) {
    const auto& s = c.factors[k];
    f[std::string(to_string(static_cast<Factor>(k)))] = {
        {"mean", s.mean}, {"vol", s.vol}, {"loading_mean", s.loading_mean}, {"loading_sd", s.loading_sd}};
  }
  j["factors"] = f;
  return j.dump(2);
}

namespace {

struct Term {
  int a, b;  // b < 0 for a linear term
  double coef;
};

struct Common {
  std::vector<std::array<double, kFactorCount>> factors;
  std::vector<double> rr_shock;
};

// Latent history of one stock. Every month is simulated; churned months are
// only hidden from the output.
void simulate_stock(const SynthConfig& cfg, const Common& common, const std::vector<Term>& terms,
                    int s, std::vector<PanelObservation>& out) {
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s) + 1));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const int T = cfg.months;
  const double draw = u01(rng);
  const Exchange ex = draw < cfg.nyse_share                    ? Exchange::NYSE
                      : draw < cfg.nyse_share + cfg.amex_share ? Exchange::AMEX
                                                               : Exchange::NASDAQ;
  const double baseline = uniform(cfg.baseline_lo, cfg.baseline_hi);
  const double idio = uniform(cfg.idio_vol_lo, cfg.idio_vol_hi);
  std::array<double, kFactorCount> beta{};
  for (int f = 0; f < kFactorCount; ++f)
    beta[f] = cfg.factors[f].loading_mean + cfg.factors[f].loading_sd * n01(rng);

  struct Wave {
    int scale;
    double amplitude, omega, phase;
  };
  std::vector<Wave> waves;
  for (const auto& c : cfg.cycles) {
    // draws happen even for non-carriers so that stock streams stay aligned
    const bool carrier = u01(rng) < c.fraction;
    const double amp = c.amplitude * (1.0 + c.amplitude_spread * (2.0 * u01(rng) - 1.0));
    const auto [lo, hi] = cycle_periods(c);
    const double period = uniform(lo, hi);
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);
    if (carrier && amp > 0) waves.push_back({c.scale, amp, 2.0 * std::numbers::pi / period, phase});
  }

  std::vector<double> ret(T), turn(T), log_me(T), log_bm(T);
  std::vector<std::array<double, kScaleCount>> cyc(T);
  double price = std::exp(uniform(std::log(cfg.price_lo), std::log(cfg.price_hi)));
  double me = std::exp(cfg.log_me_mean + cfg.log_me_sd * n01(rng));
  double lbm = -0.5 + 0.5 * n01(rng);

  auto trailing_mean = [](const std::vector<double>& v, int t, int w) {
    if (t < w) return kMissing;
    double acc = 0;
    for (int k = t - w; k < t; ++k) acc += v[k];
    return acc / w;
  };
  auto compound = [&](int t, int m, int n) {
    if (t < m) return kMissing;
    double acc = 1;
    for (int k = t - m; k <= t - n; ++k) acc *= 1.0 + ret[k];
    return acc - 1.0;
  };

  std::array<double, kVarCount> x{};
  for (int t = 0; t < T; ++t) {
    cyc[t].fill(0.0);
    for (const auto& w : waves) cyc[t][w.scale] += w.amplitude * std::sin(w.omega * t + w.phase);
    double tv = baseline + cfg.turnover_noise * n01(rng);
    for (int k = 0; k < kScaleCount; ++k) tv += cyc[t][k];
    turn[t] = std::max(tv, 0.0);

    x[static_cast<int>(Var::R62)] = compound(t, 6, 2);
    x[static_cast<int>(Var::R127)] = compound(t, 12, 7);
    x[static_cast<int>(Var::R10)] = t >= 1 ? ret[t - 1] : kMissing;
    x[static_cast<int>(Var::TurnAll)] = trailing_mean(turn, t, 3);
    x[static_cast<int>(Var::LogME)] = t >= 1 ? log_me[t - 1] : kMissing;
    x[static_cast<int>(Var::LogBM)] = t >= 1 ? log_bm[t - 1] : kMissing;
    for (int k = 0; k < kScaleCount; ++k) {
      double acc = kMissing;
      if (t >= 3) acc = (cyc[t - 1][k] + cyc[t - 2][k] + cyc[t - 3][k]) / 3.0;
      x[static_cast<int>(Var::Cycle0) + k] = acc;
    }

    // terms whose inputs predate the panel contribute nothing
    double r = cfg.mu + idio * n01(rng);
    for (int f = 0; f < kFactorCount; ++f) r += beta[f] * common.factors[t][f];
    for (const auto& term : terms) {
      const double v = term.b < 0 ? x[term.a] : x[term.a] * x[term.b];
      if (present(v)) r += term.coef * v;
    }
    if (present(x[static_cast<int>(Var::R62)])) r += common.rr_shock[t] * x[static_cast<int>(Var::R62)];
    r = std::max(r, -0.95);
    ret[t] = r;

    price *= 1.0 + r;
    me *= 1.0 + r;
    // splits keep prices in a realistic range and leave ME unchanged
    if (price > 500.0) price /= 5.0;
    if (price < 3.0) price *= 5.0;
    lbm = -0.5 + 0.97 * (lbm + 0.5) + 0.1 * n01(rng);
    log_me[t] = std::log(me);
    log_bm[t] = lbm;

    const bool hidden = cfg.churn_rate > 0 && u01(rng) < cfg.churn_rate;
    if (hidden) continue;
    PanelObservation o;
    o.stock_id = fmt::format("S{:05d}", s);
    o.month = cfg.start + t;
    o.ret = r;
    o.price = price;
    o.exchange = ex;
    o.turnover_raw = turn[t] * nasdaq_turnover_divisor(o.month, ex);
    o.turnover = turn[t];
    o.market_equity = me;
    o.book_to_market = std::exp(lbm);
    out.push_back(std::move(o));
  }
}

}  // namespace

SynthPanel generate_panel(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Term> terms;
  for (const auto& l : cfg.linear)
    if (l.coef != 0) terms.push_back({parse_var(l.variable), -1, l.coef});
  for (const auto& i : cfg.interactions)
    if (i.coef != 0) terms.push_back({parse_var(i.left), parse_var(i.right), i.coef});

  Common common;
  common.factors.resize(cfg.months);
  common.rr_shock.resize(cfg.months);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  std::normal_distribution<double> n01(0.0, 1.0);
  SynthPanel panel;
  for (int t = 0; t < cfg.months; ++t) {
    for (int f = 0; f < kFactorCount; ++f) {
      common.factors[t][f] = cfg.factors[f].mean + cfg.factors[f].vol * n01(rng);
      panel.factors.set(cfg.start + t, static_cast<Factor>(f), common.factors[t][f]);
    }
    common.rr_shock[t] = cfg.rr_slope_vol * n01(rng);
  }

  std::vector<std::vector<PanelObservation>> per_stock(static_cast<std::size_t>(cfg.stocks));
  parallel_for(per_stock.size(), [&](std::size_t s) {
    per_stock[s].reserve(static_cast<std::size_t>(cfg.months));
    simulate_stock(cfg, common, terms, static_cast<int>(s), per_stock[s]);
  });
  std::vector<PanelObservation> all;
  all.reserve(static_cast<std::size_t>(cfg.stocks) * cfg.months);
  for (auto& v : per_stock)
    for (auto& o : v) all.push_back(std::move(o));
  panel.dataset = PanelDataset(std::move(all));
  return panel;
}

}  // namespace turnecho
