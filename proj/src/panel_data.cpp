#include "turnecho/panel_data.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace turnecho {

double nasdaq_turnover_divisor(Month month, Exchange exchange) {
  if (exchange != Exchange::NASDAQ) return 1.0;
  if (month < Month::from_year_month(2001, 1)) return 2.0;
  if (month < Month::from_year_month(2002, 1)) return 1.8;
  if (month < Month::from_year_month(2004, 1)) return 1.6;
  return 1.0;
}

double adjust_nasdaq_turnover(double turnover_raw, Month month, Exchange exchange) {
  if (turnover_raw < 0.0)
    throw DataError(fmt::format("negative turnover {} at {}", turnover_raw, month.str()));
  return turnover_raw / nasdaq_turnover_divisor(month, exchange);
}

// --- PanelDataset ----------------------------------------------------------

PanelDataset::PanelDataset(std::vector<PanelObservation> observations) {
  if (observations.empty()) return;

  stock_ids_.reserve(observations.size());
  Month lo = observations.front().month;
  Month hi = lo;
  for (const auto& o : observations) {
    stock_ids_.push_back(o.stock_id);
    lo = std::min(lo, o.month);
    hi = std::max(hi, o.month);
  }
  std::sort(stock_ids_.begin(), stock_ids_.end());
  stock_ids_.erase(std::unique(stock_ids_.begin(), stock_ids_.end()), stock_ids_.end());
  range_ = {lo, hi};

  const Eigen::Index rows = static_cast<Eigen::Index>(stock_ids_.size());
  const Eigen::Index cols = range_.size();
  for (auto* a : {&ret_, &price_, &turnover_, &turnover_raw_, &market_equity_, &book_to_market_})
    a->setConstant(rows, cols, kMissing);
  observed_.setZero(rows, cols);
  exchange_.setZero(rows, cols);

  for (auto& o : observations) {
    const auto s = static_cast<Eigen::Index>(*find_stock(o.stock_id));
    const int c = column(o.month);
    if (observed_(s, c))
      throw DataError(fmt::format("duplicate observation for stock {} at {}", o.stock_id,
                                  o.month.str()));
    if (present(o.market_equity) && !(o.market_equity > 0.0))
      throw DataError(fmt::format("non-positive market equity for stock {} at {}", o.stock_id,
                                  o.month.str()));
    if (present(o.turnover_raw) && o.turnover_raw < 0.0)
      throw DataError(
          fmt::format("negative turnover for stock {} at {}", o.stock_id, o.month.str()));
    observed_(s, c) = 1;
    exchange_(s, c) = static_cast<std::uint8_t>(o.exchange);
    ret_(s, c) = o.ret;
    price_(s, c) = present(o.price) ? std::abs(o.price) : kMissing;
    turnover_raw_(s, c) = o.turnover_raw;
    turnover_(s, c) = present(o.turnover) ? o.turnover
                      : present(o.turnover_raw)
                          ? adjust_nasdaq_turnover(o.turnover_raw, o.month, o.exchange)
                          : kMissing;
    market_equity_(s, c) = o.market_equity;
    book_to_market_(s, c) = o.book_to_market;
    ++observation_count_;
  }
}

std::optional<std::size_t> PanelDataset::find_stock(const std::string& id) const {
  auto it = std::lower_bound(stock_ids_.begin(), stock_ids_.end(), id);
  if (it == stock_ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - stock_ids_.begin());
}

std::optional<Exchange> PanelDataset::exchange(std::size_t stock, Month m) const {
  if (!has(stock, m)) return std::nullopt;
  return static_cast<Exchange>(exchange_(static_cast<Eigen::Index>(stock), column(m)));
}

std::optional<PanelObservation> PanelDataset::observation(std::size_t stock, Month m) const {
  if (!has(stock, m)) return std::nullopt;
  const auto s = static_cast<Eigen::Index>(stock);
  const int c = column(m);
  PanelObservation o;
  o.stock_id = stock_ids_[stock];
  o.month = m;
  o.ret = ret_(s, c);
  o.price = price_(s, c);
  o.turnover_raw = turnover_raw_(s, c);
  o.turnover = turnover_(s, c);
  o.market_equity = market_equity_(s, c);
  o.book_to_market = book_to_market_(s, c);
  o.exchange = static_cast<Exchange>(exchange_(s, c));
  return o;
}

std::vector<PanelObservation> PanelDataset::observations() const {
  std::vector<PanelObservation> out;
  out.reserve(observation_count_);
  for (Month m = range_.first; m <= range_.last; ++m)
    for (std::size_t s = 0; s < stock_count(); ++s)
      if (auto o = observation(s, m)) out.push_back(std::move(*o));
  return out;
}

// --- delimited text --------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<Exchange> parse_exchange(std::string_view s) {
  s = trim(s);
  std::string u(s);
  for (auto& ch : u) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (u == "NYSE" || u == "N" || u == "1" || u == "31") return Exchange::NYSE;
  if (u == "AMEX" || u == "A" || u == "2" || u == "32") return Exchange::AMEX;
  if (u == "NASDAQ" || u == "Q" || u == "3" || u == "33") return Exchange::NASDAQ;
  return std::nullopt;
}

class HeaderIndex {
 public:
  explicit HeaderIndex(const std::vector<std::string_view>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) index_.emplace(lower(header[i]), i);
  }
  std::optional<std::size_t> find(const std::string& name) const {
    if (name.empty()) return std::nullopt;
    auto it = index_.find(lower(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t require(const std::string& name, std::string_view field) const {
    auto i = find(name);
    if (!i)
      throw DataError(fmt::format("missing mandatory column '{}' (field {})", name, field));
    return *i;
  }

 private:
  static std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  }
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace

char detect_delimiter(const std::string& header_line) {
  const std::array<char, 3> candidates{',', '\t', '|'};
  char best = ',';
  std::ptrdiff_t best_count = 0;
  for (char c : candidates) {
    const auto n = std::count(header_line.begin(), header_line.end(), c);
    if (n > best_count) {
      best = c;
      best_count = n;
    }
  }
  return best;
}

std::size_t LoadReport::rows_dropped() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : dropped) n += count;
  return n;
}

std::string LoadReport::str() const {
  std::string out = fmt::format("rows_read={}\nrows_kept={}\nrows_dropped={}\n", rows_read,
                                rows_kept, rows_dropped());
  for (const auto& [reason, count] : dropped) out += fmt::format("dropped[{}]={}\n", reason, count);
  return out;
}

LoadedPanel load_panel(std::istream& in, const PanelSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("panel input is empty");
  const char delim = detect_delimiter(line);
  const auto header = split(line, delim);
  const HeaderIndex idx(header);

  const auto c_id = idx.require(schema.stock_id, "stock_id");
  const auto c_month = idx.require(schema.month, "month");
  const auto c_price = idx.require(schema.price, "price");
  const auto c_exch = idx.require(schema.exchange, "exchange");
  const auto c_ret = idx.require(schema.ret, "ret");
  const auto c_turn = idx.require(schema.turnover, "turnover");
  const auto c_me = idx.find(schema.market_equity);
  const auto c_shares = idx.find(schema.shares_outstanding);
  if (!c_me && !c_shares)
    throw DataError(fmt::format("missing mandatory column '{}' (field market_equity)",
                                schema.market_equity));
  const auto c_bm = idx.find(schema.book_to_market);

  LoadReport report;
  std::vector<PanelObservation> rows;
  auto drop = [&report](const char* reason) { ++report.dropped[reason]; };

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++report.rows_read;
    const auto f = split(line, delim);
    if (f.size() < header.size()) {
      drop("short row");
      continue;
    }
    PanelObservation o;
    o.stock_id = std::string(f[c_id]);
    if (o.stock_id.empty()) {
      drop("missing stock_id");
      continue;
    }
    try {
      o.month = Month::parse(f[c_month]);
    } catch (const DataError&) {
      drop("bad month");
      continue;
    }
    const auto price = parse_double(f[c_price]);
    if (!price || *price == 0.0) {
      drop("missing price");
      continue;
    }
    o.price = std::abs(*price);
    const auto exch = parse_exchange(f[c_exch]);
    if (!exch) {
      drop("unknown exchange");
      continue;
    }
    o.exchange = *exch;
    o.ret = parse_double(f[c_ret]).value_or(kMissing);
    o.turnover_raw = parse_double(f[c_turn]).value_or(kMissing);
    if (present(o.turnover_raw) && o.turnover_raw < 0.0) {
      drop("negative turnover");
      continue;
    }
    if (present(o.turnover_raw))
      o.turnover = adjust_nasdaq_turnover(o.turnover_raw, o.month, o.exchange);
    if (c_me) {
      o.market_equity = parse_double(f[*c_me]).value_or(kMissing);
    } else if (auto sh = parse_double(f[*c_shares])) {
      o.market_equity = o.price * *sh * schema.shares_multiplier;
    }
    if (present(o.market_equity) && !(o.market_equity > 0.0)) {
      drop("nonpositive market_equity");
      continue;
    }
    if (c_bm) o.book_to_market = parse_double(f[*c_bm]).value_or(kMissing);
    rows.push_back(std::move(o));
  }
  report.rows_kept = rows.size();
  return {PanelDataset(std::move(rows)), std::move(report)};
}

LoadedPanel load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open panel file '{}'", path));
  return load_panel(in, schema);
}

namespace {
std::string num(double v) { return present(v) ? fmt::format("{}", v) : std::string(); }
}  // namespace

void write_panel(std::ostream& out, const PanelDataset& dataset) {
  out << "stock_id,month,ret,price,turnover,market_equity,book_to_market,exchange\n";
  for (const auto& o : dataset.observations()) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", o.stock_id, o.month.yyyymm(), num(o.ret),
                       num(o.price), num(o.turnover_raw), num(o.market_equity),
                       num(o.book_to_market), to_string(o.exchange));
  }
}

std::vector<std::size_t> eligible_stocks(const PanelDataset& dataset, Month month,
                                         const EligibilityPolicy& policy) {
  if (!dataset.month_range().contains(month))
    throw ConfigError(fmt::format("month {} outside dataset range", month.str()));
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < dataset.stock_count(); ++s) {
    if (!dataset.has(s, month)) continue;
    const double p = dataset.price(s, month);
    if (!(p >= policy.min_price) || !present(dataset.market_equity(s, month))) continue;
    bool history_ok = true;
    for (int k = 1; k <= policy.history_months && history_ok; ++k) {
      const double hp = dataset.price(s, month - k);
      if (present(hp) && hp < policy.min_price) history_ok = false;
    }
    if (history_ok) out.push_back(s);
  }
  return out;
}

// --- factors ----------------------------------------------------------------

std::string_view to_string(Factor f) {
  switch (f) {
    case Factor::MKT: return "MKT";
    case Factor::SMB: return "SMB";
    case Factor::HML: return "HML";
    case Factor::STR: return "STR";
    case Factor::LIQ: return "LIQ";
  }
  return "?";
}

void FactorTable::set(Month m, Factor f, double value) {
  auto [it, inserted] = rows_.try_emplace(m);
  if (inserted) it->second.fill(kMissing);
  it->second[static_cast<int>(f)] = value;
  columns_[static_cast<int>(f)] = true;
}

bool FactorTable::has(Month m, Factor f) const {
  auto it = rows_.find(m);
  return it != rows_.end() && present(it->second[static_cast<int>(f)]);
}

double FactorTable::get(Month m, Factor f) const {
  if (!has_column(f)) throw DataError(fmt::format("factor {} not loaded", to_string(f)));
  auto it = rows_.find(m);
  if (it == rows_.end() || !present(it->second[static_cast<int>(f)]))
    throw DataError(fmt::format("factor {} missing for month {}", to_string(f), m.str()));
  return it->second[static_cast<int>(f)];
}

std::vector<Month> FactorTable::months() const {
  std::vector<Month> out;
  out.reserve(rows_.size());
  for (const auto& [m, row] : rows_) out.push_back(m);
  return out;
}

namespace {

std::optional<Factor> factor_from_header(std::string_view name) {
  std::string u(trim(name));
  for (auto& ch : u) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (u == "MKT" || u == "MKT-RF" || u == "MKT_RF" || u == "MKTRF") return Factor::MKT;
  if (u == "SMB") return Factor::SMB;
  if (u == "HML") return Factor::HML;
  if (u == "STR" || u == "ST_REV" || u == "ST-REV") return Factor::STR;
  if (u == "LIQ" || u == "PS_VWF") return Factor::LIQ;
  return std::nullopt;
}

}  // namespace

FactorTable load_factor_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("factor input is empty");
  const char delim = detect_delimiter(line);
  const auto header = split(line, delim);
  std::vector<std::pair<std::size_t, Factor>> columns;
  for (std::size_t i = 1; i < header.size(); ++i)
    if (auto f = factor_from_header(header[i])) columns.emplace_back(i, *f);
  if (columns.empty()) throw DataError("factor input has no recognized factor column");

  FactorTable table;
  std::map<Month, bool> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, delim);
    const Month m = Month::parse(f[0]);
    if (!seen.emplace(m, true).second)
      throw DataError(fmt::format("duplicate factor month {}", m.str()));
    for (const auto& [col, factor] : columns) {
      if (col >= f.size() || f[col].empty()) continue;
      const auto v = parse_double(f[col]);
      if (!v)
        throw DataError(fmt::format("unparseable factor value '{}' on line {}", f[col], line_no));
      table.set(m, factor, *v / 100.0);
    }
  }
  return table;
}

FactorTable load_factor_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open factor file '{}'", path));
  return load_factor_table(in);
}

void write_factor_table(std::ostream& out, const FactorTable& table) {
  std::vector<Factor> cols;
  for (int i = 0; i < kFactorCount; ++i)
    if (table.has_column(static_cast<Factor>(i))) cols.push_back(static_cast<Factor>(i));
  out << "month";
  for (auto f : cols) out << ',' << to_string(f);
  out << '\n';
  for (Month m : table.months()) {
    out << m.yyyymm();
    for (auto f : cols) {
      out << ',';
      if (table.has(m, f)) out << fmt::format("{}", table.get(m, f) * 100.0);
    }
    out << '\n';
  }
}

}  // namespace turnecho
