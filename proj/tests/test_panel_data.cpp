#include <random>
#include <sstream>

#include "doctest.h"
#include "turnecho/panel_data.hpp"

using namespace turnecho;

namespace {

Month ym(int y, int m) { return Month::from_year_month(y, m); }

PanelObservation obs(std::string id, Month m, double price, double me = 100.0,
                     Exchange ex = Exchange::NYSE) {
  PanelObservation o;
  o.stock_id = std::move(id);
  o.month = m;
  o.ret = 0.01;
  o.price = price;
  o.turnover_raw = 0.1;
  o.market_equity = me;
  o.exchange = ex;
  return o;
}

std::vector<std::string> ids(const PanelDataset& d, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(d.stock_id(i));
  return out;
}

}  // namespace

TEST_CASE("month encoding") {
  CHECK(ym(1969, 1).index() == 0);
  CHECK(ym(1968, 12).index() == -1);
  CHECK(ym(2020, 12).index() == 623);
  CHECK(Month::parse("199507") == ym(1995, 7));
  CHECK(Month::parse("1995-07") == ym(1995, 7));
  CHECK(Month::parse("19950731") == ym(1995, 7));
  CHECK(Month(-1).year() == 1968);
  CHECK(Month(-1).month_of_year() == 12);
  CHECK(ym(2001, 6).str() == "2001-06");
  CHECK_THROWS_AS(Month::parse("1995-13"), DataError);
  CHECK_THROWS_AS(Month::parse("abc"), DataError);
}

TEST_CASE("adjust_nasdaq_turnover") {
  CHECK(adjust_nasdaq_turnover(2.0, ym(1999, 5), Exchange::NASDAQ) == doctest::Approx(1.0));
  CHECK(adjust_nasdaq_turnover(1.8, ym(2001, 6), Exchange::NASDAQ) == doctest::Approx(1.0));
  CHECK(adjust_nasdaq_turnover(0.5, ym(2010, 3), Exchange::NYSE) == 0.5);
  CHECK(adjust_nasdaq_turnover(0.0, ym(1980, 1), Exchange::NASDAQ) == 0.0);

  SUBCASE("boundaries") {
    CHECK(nasdaq_turnover_divisor(ym(2000, 12), Exchange::NASDAQ) == 2.0);
    CHECK(nasdaq_turnover_divisor(ym(2001, 1), Exchange::NASDAQ) == 1.8);
    CHECK(nasdaq_turnover_divisor(ym(2001, 12), Exchange::NASDAQ) == 1.8);
    CHECK(nasdaq_turnover_divisor(ym(2002, 1), Exchange::NASDAQ) == 1.6);
    CHECK(nasdaq_turnover_divisor(ym(2003, 12), Exchange::NASDAQ) == 1.6);
    CHECK(nasdaq_turnover_divisor(ym(2004, 1), Exchange::NASDAQ) == 1.0);
    CHECK(nasdaq_turnover_divisor(ym(1990, 1), Exchange::AMEX) == 1.0);
  }
  SUBCASE("negative rejected") {
    CHECK_THROWS_AS(adjust_nasdaq_turnover(-0.1, ym(1990, 1), Exchange::NYSE), DataError);
  }
  SUBCASE("piecewise linear, not idempotent") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
      const Month m(static_cast<int>(rng() % 624));
      const double a = u(rng), b = u(rng);
      const double slope = 1.0 / nasdaq_turnover_divisor(m, Exchange::NASDAQ);
      CHECK(adjust_nasdaq_turnover(a + b, m, Exchange::NASDAQ) ==
            doctest::Approx(adjust_nasdaq_turnover(a, m, Exchange::NASDAQ) +
                            adjust_nasdaq_turnover(b, m, Exchange::NASDAQ)));
      CHECK(adjust_nasdaq_turnover(a, m, Exchange::NASDAQ) == doctest::Approx(slope * a));
    }
    const double once = adjust_nasdaq_turnover(1.0, ym(1990, 1), Exchange::NASDAQ);
    CHECK(adjust_nasdaq_turnover(once, ym(1990, 1), Exchange::NASDAQ) != once);
  }
}

TEST_CASE("load_panel") {
  SUBCASE("well-formed input") {
    std::istringstream in(
        "stock_id,month,ret,price,turnover,market_equity,book_to_market,exchange\n"
        "A,196901,0.01,10,0.2,100,0.5,NYSE\n"
        "B,196901,-0.02,20,0.3,200,,AMEX\n"
        "A,196902,0.03,11,0.1,110,0.5,NYSE\n");
    const auto loaded = load_panel(in);
    CHECK(loaded.dataset.observation_count() == 3);
    CHECK(loaded.report.rows_read == 3);
    CHECK(loaded.report.rows_kept == 3);
    CHECK(loaded.report.rows_dropped() == 0);
    CHECK(loaded.dataset.stock_count() == 2);
    CHECK(!present(loaded.dataset.book_to_market(1, ym(1969, 1))));
  }
  SUBCASE("missing price dropped and reported") {
    std::istringstream in(
        "stock_id,month,ret,price,turnover,market_equity,book_to_market,exchange\n"
        "A,196901,0.01,,0.2,100,0.5,NYSE\n"
        "B,196901,0.01,12,0.2,100,0.5,NYSE\n");
    const auto loaded = load_panel(in);
    CHECK(loaded.dataset.observation_count() == 1);
    CHECK(loaded.report.dropped.at("missing price") == 1);
    CHECK(loaded.report.str().find("dropped[missing price]=1") != std::string::npos);
  }
  SUBCASE("NASDAQ adjustment applied at load") {
    std::istringstream in(
        "stock_id\tmonth\tret\tprice\tturnover\tmarket_equity\tbook_to_market\texchange\n"
        "Q\t1995-07\t0.0\t30\t1.0\t500\t1.0\t3\n");
    const auto loaded = load_panel(in);
    CHECK(loaded.dataset.turnover(0, ym(1995, 7)) == 0.5);
    CHECK(loaded.dataset.turnover_raw(0, ym(1995, 7)) == 1.0);
  }
  SUBCASE("negative CRSP price uses absolute value; pipe delimiter; custom names") {
    PanelSchema schema;
    schema.stock_id = "permno";
    schema.month = "date";
    schema.price = "prc";
    schema.exchange = "exchcd";
    schema.market_equity = "";
    schema.shares_outstanding = "shrout";
    schema.shares_multiplier = 1000.0;
    std::istringstream in(
        "permno|date|ret|prc|turnover|shrout|exchcd\n"
        "10001|19860131|0.05|-12.5|0.1|2000|1\n");
    const auto loaded = load_panel(in, schema);
    CHECK(loaded.dataset.price(0, ym(1986, 1)) == 12.5);
    CHECK(loaded.dataset.market_equity(0, ym(1986, 1)) == doctest::Approx(12.5 * 2e6));
  }
  SUBCASE("errors") {
    std::istringstream missing("stock_id,month,ret,turnover,market_equity,exchange\nA,196901,0,1,1,1\n");
    CHECK_THROWS_AS(load_panel(missing), DataError);
    std::istringstream dup(
        "stock_id,month,ret,price,turnover,market_equity,book_to_market,exchange\n"
        "A,196901,0.01,10,0.2,100,0.5,NYSE\n"
        "A,1969-01,0.01,10,0.2,100,0.5,NYSE\n");
    CHECK_THROWS_AS(load_panel(dup), DataError);
  }
}

TEST_CASE("load -> write -> load round trip is bit-identical") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n01;
  std::vector<PanelObservation> rows;
  const std::array<Exchange, 3> ex{Exchange::NYSE, Exchange::AMEX, Exchange::NASDAQ};
  for (int s = 0; s < 20; ++s)
    for (int t = 360; t < 420; ++t) {
      if (rng() % 10 == 0) continue;
      PanelObservation o;
      o.stock_id = "S" + std::to_string(s);
      o.month = Month(t);
      o.ret = 0.05 * n01(rng);
      o.price = std::exp(2.0 + n01(rng));
      o.turnover_raw = std::abs(0.1 + 0.03 * n01(rng));
      o.market_equity = std::exp(10.0 + n01(rng));
      o.book_to_market = (rng() % 5 == 0) ? kMissing : std::exp(n01(rng));
      o.exchange = ex[static_cast<std::size_t>(s % 3)];
      rows.push_back(o);
    }
  const PanelDataset original(rows);
  std::stringstream first;
  write_panel(first, original);
  const auto reloaded = load_panel(first).dataset;
  std::stringstream second;
  write_panel(second, reloaded);
  CHECK(first.str() == second.str());

  const auto a = original.observations();
  const auto b = reloaded.observations();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].stock_id == b[i].stock_id);
    CHECK(a[i].month == b[i].month);
    CHECK(a[i].turnover == b[i].turnover);
    CHECK(a[i].price == b[i].price);
    CHECK(a[i].exchange == b[i].exchange);
  }
}

TEST_CASE("observations iterate by (month, stock_id)") {
  const PanelDataset d({obs("B", Month(1), 10), obs("A", Month(1), 10), obs("B", Month(0), 10),
                        obs("C", Month(0), 10)});
  const auto o = d.observations();
  REQUIRE(o.size() == 4);
  CHECK((o[0].month == Month(0) && o[0].stock_id == "B"));
  CHECK((o[1].month == Month(0) && o[1].stock_id == "C"));
  CHECK((o[2].month == Month(1) && o[2].stock_id == "A"));
  CHECK((o[3].month == Month(1) && o[3].stock_id == "B"));
}

TEST_CASE("eligible_stocks") {
  const Month m(10);
  SUBCASE("price threshold keeps exactly 5.00") {
    const PanelDataset d({obs("A", m, 4.99), obs("B", m, 5.00), obs("C", m, 12.0)});
    CHECK(ids(d, eligible_stocks(d, m)) == std::vector<std::string>{"B", "C"});
  }
  SUBCASE("all below threshold") {
    const PanelDataset d({obs("A", m, 1.0), obs("B", m, 4.0)});
    CHECK(eligible_stocks(d, m).empty());
  }
  SUBCASE("missing market equity excluded") {
    const PanelDataset d({obs("A", m, 10.0, kMissing), obs("B", m, 10.0)});
    CHECK(ids(d, eligible_stocks(d, m)) == std::vector<std::string>{"B"});
  }
  SUBCASE("out of range month") {
    const PanelDataset d({obs("A", m, 10.0)});
    CHECK_THROWS_AS(eligible_stocks(d, Month(11)), ConfigError);
  }
  SUBCASE("history filter") {
    const PanelDataset d({obs("A", Month(9), 4.0), obs("A", m, 10.0), obs("B", m, 10.0)});
    EligibilityPolicy p;
    p.history_months = 3;
    CHECK(ids(d, eligible_stocks(d, m, p)) == std::vector<std::string>{"B"});
    CHECK(eligible_stocks(d, m).size() == 2);
  }
  SUBCASE("subset of observed stocks") {
    std::mt19937_64 rng(3);
    std::vector<PanelObservation> rows;
    for (int s = 0; s < 50; ++s)
      if (rng() % 3) rows.push_back(obs("S" + std::to_string(s), m, 1.0 + (rng() % 100) / 10.0));
    rows.push_back(obs("Z", Month(9), 10.0));
    const PanelDataset d(rows);
    for (auto s : eligible_stocks(d, m)) CHECK(d.has(s, m));
  }
}

TEST_CASE("load_factor_table") {
  SUBCASE("percent to decimal") {
    std::istringstream in("month,Mkt-RF,SMB,HML,RF\n196901,1.23,0.5,-0.25,0.4\n196902,-2,1,1,0.4\n");
    const auto t = load_factor_table(in);
    CHECK(t.get(Month(0), Factor::MKT) == doctest::Approx(0.0123));
    CHECK(t.get(Month(1), Factor::HML) == doctest::Approx(0.01));
    CHECK(t.size() == 2);
  }
  SUBCASE("duplicate month") {
    std::istringstream in("month,MKT\n196901,1\n196901,2\n");
    CHECK_THROWS_AS(load_factor_table(in), DataError);
  }
  SUBCASE("unparseable value") {
    std::istringstream in("month,MKT\n196901,abc\n");
    CHECK_THROWS_AS(load_factor_table(in), DataError);
  }
  SUBCASE("missing LIQ errors lazily") {
    std::istringstream in("month,MKT\n196901,1\n");
    const auto t = load_factor_table(in);
    CHECK_FALSE(t.has_column(Factor::LIQ));
    CHECK_THROWS_AS(t.get(Month(0), Factor::LIQ), DataError);
    CHECK_THROWS_AS(t.get(Month(5), Factor::MKT), DataError);
  }
}
