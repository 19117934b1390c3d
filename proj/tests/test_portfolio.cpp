#include <numeric>
#include <random>

#include "doctest.h"
#include "turnecho/portfolio.hpp"

using namespace turnecho;

namespace {

const Month kStart = Month::from_year_month(2000, 1);

struct Fixture {
  PanelDataset ds;
  SignalPanel panel;
};

// Returns at month t+1 are a deterministic function of a signal stored in the
// panel at t+1, so sorts can be checked against the generating rule.
Fixture planted(int stocks, int months, std::uint64_t seed, bool equal_me = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> sig(stocks, std::vector<double>(months)), col = sig;
  for (auto& row : sig)
    for (auto& v : row) v = u(rng);
  for (auto& row : col)
    for (auto& v : row) v = u(rng);
  std::vector<PanelObservation> obs;
  for (int s = 0; s < stocks; ++s)
    for (int t = 0; t < months; ++t) {
      PanelObservation o;
      o.stock_id = fmt::format("S{:04d}", s);
      o.month = kStart + t;
      o.ret = 0.01 * sig[s][t] - 0.002 * col[s][t];
      o.price = 10 + s % 7;
      o.turnover_raw = 0.1;
      o.market_equity = equal_me ? 50.0 : 10.0 + (s * 37 % 101) + t;
      o.exchange = s % 3 == 0 ? Exchange::NYSE : Exchange::NASDAQ;
      obs.push_back(o);
    }
  Fixture f{PanelDataset(std::move(obs)), {}};
  f.panel = SignalPanel(f.ds.stock_ids(), f.ds.month_range());
  for (int s = 0; s < stocks; ++s)
    for (int t = 0; t < months; ++t) {
      f.panel.values(Signal::TurnAve4)(s, t) = sig[s][t];
      f.panel.values(Signal::R_6_2)(s, t) = col[s][t];
    }
  return f;
}

}  // namespace

TEST_CASE("assign_groups") {
  std::vector<double> v{3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
  const auto g10 = assign_groups(v, 10);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(g10[i] == static_cast<int>(v[i]));
  const auto g5 = assign_groups(v, 5);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(g5[i] == (static_cast<int>(v[i]) + 1) / 2);

  CHECK_THROWS_AS(assign_groups(std::vector<double>(20, 1.5), 10), DataError);
  CHECK_THROWS_AS(assign_groups({1, 2, 3}, 5), DataError);
  CHECK_THROWS_AS(assign_groups({1, 2, 3}, 1), ConfigError);

  SUBCASE("ties go to the lower group") {
    // both breakpoints equal 2, so the middle group is empty
    const auto g = assign_groups({1, 2, 2, 2, 3, 4}, 3);
    CHECK(g == std::vector<int>{1, 1, 1, 1, 3, 3});
    CHECK(assign_groups({1, 2, 2, 3}, 2) == std::vector<int>{1, 1, 1, 2});
  }
  SUBCASE("absent values are skipped") {
    const auto g = assign_groups({kMissing, 1, 2}, 2);
    CHECK(g == std::vector<int>{0, 1, 2});
  }
  SUBCASE("monotone transform invariance and full coverage") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    std::vector<double> x(503), y(503);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = n01(rng);
      y[i] = std::exp(3 * x[i]) + 7;
    }
    const auto gx = assign_groups(x, 10), gy = assign_groups(y, 10);
    CHECK(gx == gy);
    std::vector<int> sizes(11, 0);
    for (int g : gx) {
      REQUIRE(g >= 1);
      REQUIRE(g <= 10);
      ++sizes[g];
    }
    for (int g = 1; g <= 10; ++g) CHECK(std::abs(sizes[g] - 50) <= 1);
  }
  SUBCASE("external breakpoint universe") {
    const std::vector<double> u{0, 10};
    CHECK(assign_groups({-5, 0, 3, 20}, 2, &u) == std::vector<int>{1, 1, 2, 2});
  }
}

TEST_CASE("vw_return") {
  CHECK(vw_return({5}, {0.02}).value == 0.02);
  CHECK(vw_return({1, 3}, {0.0, 0.04}).value == doctest::Approx(0.03));
  CHECK(vw_return({1, 7, 2}, {0.013, 0.013, 0.013}).value == doctest::Approx(0.013));
  const auto w = vw_return({1, 2, 3}, {0.1, kMissing, 0.4});
  CHECK(w.dropped == 1);
  CHECK(w.members == 2);
  CHECK(w.value == doctest::Approx((0.1 + 1.2) / 4));
  CHECK_THROWS_AS(vw_return({}, {}), DataError);
  CHECK_THROWS_AS(vw_return({1}, {kMissing}), DataError);
  CHECK_THROWS_AS(vw_return({0}, {0.1}), DataError);

  SUBCASE("lies within member range") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.3, 0.3), wgt(0.1, 100);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> ws(13), rs(13);
      for (int i = 0; i < 13; ++i) {
        ws[i] = wgt(rng);
        rs[i] = u(rng);
      }
      const double v = vw_return(ws, rs).value;
      CHECK(v >= *std::min_element(rs.begin(), rs.end()));
      CHECK(v <= *std::max_element(rs.begin(), rs.end()));
    }
  }
}

TEST_CASE("diff_series") {
  PortfolioSeries a, b;
  for (int i = 1; i <= 10; ++i) a.push(Month(i), 0.01, 3, 1);
  for (int i = 5; i <= 15; ++i) b.push(Month(i), -0.01, 4, 1);
  const auto d = diff_series(a, b);
  REQUIRE(d.size() == 6);
  CHECK(d.months.front() == Month(5));
  CHECK(d.months.back() == Month(10));
  for (double r : d.returns) CHECK(r == doctest::Approx(0.02));
  for (double r : diff_series(a, a).returns) CHECK(r == 0.0);
  PortfolioSeries c;
  c.push(Month(30), 0.1, 1, 1);
  CHECK_THROWS_AS(diff_series(a, c), DataError);
}

TEST_CASE("run_sort univariate") {
  auto f = planted(300, 14, 1);
  SortSpec spec;
  const MonthRange range{kStart, kStart + 12};
  const auto res = run_sort(f.ds, f.panel, spec, range);
  CHECK(res.skipped.empty());
  CHECK(res.formation_months == 13);
  REQUIRE(res.cells.size() == 10);
  for (const auto& c : res.cells) CHECK(c.size() == 13);
  CHECK(res.cell(1).months.front() == kStart + 1);

  SUBCASE("planted monotone relation gives increasing decile means") {
    double prev = -1;
    for (int g = 1; g <= 10; ++g) {
      const auto& c = res.cell(g);
      const double mean = std::accumulate(c.returns.begin(), c.returns.end(), 0.0) / c.size();
      CHECK(mean > prev);
      prev = mean;
    }
  }
  SUBCASE("full partition accounting") {
    for (std::size_t m = 0; m < res.universe.size(); ++m) {
      double num = 0, den = 0;
      for (const auto& c : res.cells) {
        num += c.returns[m] * c.weight_mass[m];
        den += c.weight_mass[m];
      }
      CHECK(std::abs(num / den - res.universe.returns[m]) < 1e-10);
    }
  }
  SUBCASE("sign symmetry") {
    auto neg = f;
    neg.panel.values(Signal::TurnAve4) = -f.panel.values(Signal::TurnAve4);
    const auto rn = run_sort(neg.ds, neg.panel, spec, range);
    const auto d = diff_series(res.cell(10), res.cell(1));
    const auto dn = diff_series(rn.cell(1), rn.cell(10));
    REQUIRE(d.size() == dn.size());
    const auto dn_hl = diff_series(rn.cell(10), rn.cell(1));
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d.returns[i] == doctest::Approx(dn.returns[i]).epsilon(1e-14));
      CHECK(dn_hl.returns[i] == doctest::Approx(-d.returns[i]).epsilon(1e-14));
    }
  }
  SUBCASE("equal weighting equals value weighting when ME is equal") {
    auto g = planted(300, 14, 1, true);
    SortSpec ew = spec;
    ew.weighting = Weighting::Equal;
    const auto a = run_sort(g.ds, g.panel, spec, range);
    const auto b = run_sort(g.ds, g.panel, ew, range);
    for (int k = 1; k <= 10; ++k)
      for (std::size_t i = 0; i < a.cell(k).size(); ++i)
        CHECK(a.cell(k).returns[i] == doctest::Approx(b.cell(k).returns[i]).epsilon(1e-14));
  }
  SUBCASE("NYSE breakpoints change composition but keep every stock") {
    SortSpec ny = spec;
    ny.breakpoints = BreakpointUniverse::NYSEOnly;
    const auto r = run_sort(f.ds, f.panel, ny, range);
    int total = 0, base = 0;
    for (int g = 1; g <= 10; ++g) {
      total += r.cell(g).counts[0];
      base += res.cell(g).counts[0];
    }
    CHECK(total == base);
  }
  SUBCASE("missing next-month returns are dropped and counted") {
    std::vector<PanelObservation> obs = f.ds.observations();
    for (auto& o : obs)
      if (o.month == kStart + 5 && o.stock_id < "S0010") o.ret = kMissing;
    const PanelDataset ds(std::move(obs));
    const auto r = run_sort(ds, f.panel, spec, range);
    CHECK(r.dropped_members == 10);
  }
  SUBCASE("empty range") {
    CHECK_THROWS_AS(run_sort(f.ds, f.panel, spec, {kStart + 20, kStart + 30}), ConfigError);
  }
}

TEST_CASE("run_sort price filter and infeasible months") {
  auto f = planted(40, 6, 2);
  std::vector<PanelObservation> obs = f.ds.observations();
  for (auto& o : obs)
    if (o.month == kStart + 2) o.price = 4.99;
  const PanelDataset ds(std::move(obs));
  const auto r = run_sort(ds, f.panel, SortSpec{}, {kStart, kStart + 4});
  REQUIRE(r.skipped.size() == 1);
  CHECK(r.skipped[0].formation == kStart + 2);
  CHECK(!r.cell(1).at(kStart + 3).has_value());
  CHECK(r.cell(1).at(kStart + 4).has_value());
}

TEST_CASE("run_sort bivariate") {
  auto f = planted(3000, 4, 3);
  SortSpec spec;
  spec.column_signal = Signal::R_6_2;
  const auto res = run_sort(f.ds, f.panel, spec, {kStart, kStart + 2});
  REQUIRE(res.cells.size() == 50);
  CHECK(res.skipped.empty());
  double avg = 0;
  for (const auto& c : res.cells) {
    REQUIRE(c.size() == 3);
    CHECK(c.counts[0] > 20);
    avg += c.counts[0] / 50.0;
  }
  CHECK(avg == doctest::Approx(60.0));
  CHECK(res.cell(10, 5).row_group == 10);
  CHECK(res.cell(10, 5).column_group == 5);

  SUBCASE("conditional sort balances columns within each row") {
    spec.dependence = Dependence::Conditional;
    const auto c = run_sort(f.ds, f.panel, spec, {kStart, kStart + 2});
    for (int r = 1; r <= 10; ++r) {
      const int lo = c.cell(r, 1).counts[0];
      for (int k = 2; k <= 5; ++k) CHECK(std::abs(c.cell(r, k).counts[0] - lo) <= 1);
    }
  }
  SUBCASE("column return gradient follows the planted sign") {
    double hi = 0, lo = 0;
    for (int r = 1; r <= 10; ++r) {
      hi += res.cell(r, 5).returns[0];
      lo += res.cell(r, 1).returns[0];
    }
    CHECK(hi < lo);
  }
}
