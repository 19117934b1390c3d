#include "turnecho/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace turnecho {

std::string_view to_string(Weighting w) { return w == Weighting::Value ? "value" : "equal"; }
std::string_view to_string(BreakpointUniverse b) {
  return b == BreakpointUniverse::AllEligible ? "all_eligible" : "nyse_only";
}
std::string_view to_string(Dependence d) {
  return d == Dependence::Independent ? "independent" : "conditional";
}

void SortSpec::validate() const {
  if (row_groups < 2) throw ConfigError("row group count must be at least 2");
  if (bivariate() && column_groups < 2) throw ConfigError("column group count must be at least 2");
}

std::optional<double> PortfolioSeries::at(Month m) const {
  const auto it = std::lower_bound(months.begin(), months.end(), m);
  if (it == months.end() || *it != m) return std::nullopt;
  return returns[static_cast<std::size_t>(it - months.begin())];
}

void PortfolioSeries::push(Month m, double r, int count, double mass) {
  months.push_back(m);
  returns.push_back(r);
  counts.push_back(count);
  weight_mass.push_back(mass);
}

std::vector<double> quantile_breakpoints(std::vector<double> values, int k) {
  if (k < 2) throw ConfigError("group count must be at least 2");
  std::erase_if(values, [](double v) { return !present(v); });
  const auto n = static_cast<long>(values.size());
  if (n < k)
    throw DataError(fmt::format("{} values cannot fill {} groups", n, k));
  std::sort(values.begin(), values.end());
  if (values.front() == values.back()) throw DataError("all sort values identical");
  std::vector<double> b(static_cast<std::size_t>(k - 1));
  for (int q = 1; q < k; ++q) {
    const long rank = (q * n + k - 1) / k;  // ceil(q n / k), 1-based
    b[q - 1] = values[static_cast<std::size_t>(rank - 1)];
  }
  return b;
}

int group_of(double value, const std::vector<double>& breakpoints) {
  return 1 + static_cast<int>(std::lower_bound(breakpoints.begin(), breakpoints.end(), value) -
                              breakpoints.begin());
}

std::vector<int> assign_groups(const std::vector<double>& values, int k,
                               const std::vector<double>* universe) {
  const auto b = quantile_breakpoints(universe ? *universe : values, k);
  std::vector<int> out(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (present(values[i])) out[i] = group_of(values[i], b);
  return out;
}

WeightedReturn vw_return(const std::vector<double>& weights, const std::vector<double>& realized) {
  if (weights.empty()) throw DataError("empty portfolio");
  if (weights.size() != realized.size()) throw DataError("weights and returns differ in length");
  WeightedReturn out;
  double num = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0)) throw DataError("portfolio weight must be positive");
    if (!present(realized[i])) {
      ++out.dropped;
      continue;
    }
    num += weights[i] * realized[i];
    out.weight_mass += weights[i];
    ++out.members;
  }
  if (out.members == 0) throw DataError("no member has a realized return");
  out.value = num / out.weight_mass;
  return out;
}

namespace {

struct MonthOutcome {
  bool ok = false;
  std::string reason;
  std::vector<WeightedReturn> cells;
  WeightedReturn universe;
  int dropped = 0;
};

MonthOutcome form_month(const PanelDataset& ds, const SignalPanel& panel, const SortSpec& spec,
                        Month f) {
  MonthOutcome out;
  const Month h = f + 1;
  std::vector<std::size_t> members;
  std::vector<double> row_v, col_v, weight, realized;
  std::vector<char> nyse;
  for (std::size_t s : eligible_stocks(ds, f, spec.eligibility)) {
    const double rv = panel.get(spec.row_signal, s, h);
    if (!present(rv)) continue;
    const double cv = spec.bivariate() ? panel.get(*spec.column_signal, s, h) : 0.0;
    if (!present(cv)) continue;
    const double me = ds.market_equity(s, f);
    if (!(me > 0)) continue;
    members.push_back(s);
    row_v.push_back(rv);
    col_v.push_back(cv);
    weight.push_back(spec.weighting == Weighting::Value ? me : 1.0);
    realized.push_back(ds.ret(s, h));
    nyse.push_back(ds.exchange(s, f) == Exchange::NYSE);
  }

  auto universe_of = [&](const std::vector<double>& v, const std::vector<int>* within, int group) {
    std::vector<double> u;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (within && (*within)[i] != group) continue;
      if (spec.breakpoints == BreakpointUniverse::NYSEOnly && !nyse[i]) continue;
      u.push_back(v[i]);
    }
    return u;
  };

  const int kr = spec.row_groups, kc = spec.columns();
  std::vector<int> rg(members.size(), 0), cg(members.size(), 1);
  try {
    const auto rb = quantile_breakpoints(universe_of(row_v, nullptr, 0), kr);
    for (std::size_t i = 0; i < members.size(); ++i) rg[i] = group_of(row_v[i], rb);
    if (spec.bivariate()) {
      if (spec.dependence == Dependence::Independent) {
        const auto cb = quantile_breakpoints(universe_of(col_v, nullptr, 0), kc);
        for (std::size_t i = 0; i < members.size(); ++i) cg[i] = group_of(col_v[i], cb);
      } else {
        for (int g = 1; g <= kr; ++g) {
          const auto cb = quantile_breakpoints(universe_of(col_v, &rg, g), kc);
          for (std::size_t i = 0; i < members.size(); ++i)
            if (rg[i] == g) cg[i] = group_of(col_v[i], cb);
        }
      }
    }
  } catch (const DataError& e) {
    out.reason = e.what();
    return out;
  }

  std::vector<std::vector<double>> cw(static_cast<std::size_t>(kr * kc)), cr(cw.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto cell = static_cast<std::size_t>((rg[i] - 1) * kc + cg[i] - 1);
    cw[cell].push_back(weight[i]);
    cr[cell].push_back(realized[i]);
  }
  for (std::size_t c = 0; c < cw.size(); ++c) {
    const auto present_returns =
        std::count_if(cr[c].begin(), cr[c].end(), [](double r) { return present(r); });
    if (present_returns == 0) {
      out.reason = fmt::format("cell ({},{}) empty", c / kc + 1, c % kc + 1);
      return out;
    }
    out.cells.push_back(vw_return(cw[c], cr[c]));
    out.dropped += out.cells.back().dropped;
  }
  out.universe = vw_return(weight, realized);
  out.ok = true;
  return out;
}

}  // namespace

SortResult run_sort(const PanelDataset& dataset, const SignalPanel& panel, const SortSpec& spec,
                    MonthRange formation) {
  spec.validate();
  const MonthRange data = dataset.month_range();
  if (data.empty()) throw ConfigError("empty dataset");
  const Month first = std::max(formation.first, data.first);
  const Month last = std::min(formation.last, data.last - 1);
  if (formation.empty() || last < first) throw ConfigError("empty formation month range");

  const auto n = static_cast<std::size_t>(last - first + 1);
  std::vector<MonthOutcome> outcomes(n);
  parallel_for(n, [&](std::size_t i) {
    outcomes[i] = form_month(dataset, panel, spec, first + static_cast<int>(i));
  });

  SortResult result;
  result.spec = spec;
  const int kc = spec.columns();
  for (int r = 1; r <= spec.row_groups; ++r)
    for (int c = 1; c <= kc; ++c) {
      PortfolioSeries s;
      s.row_group = r;
      s.column_group = spec.bivariate() ? c : 0;
      result.cells.push_back(std::move(s));
    }
  result.formation_months = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Month f = first + static_cast<int>(i);
    const auto& o = outcomes[i];
    if (!o.ok) {
      result.skipped.push_back({f, o.reason});
      continue;
    }
    for (std::size_t c = 0; c < o.cells.size(); ++c)
      result.cells[c].push(f + 1, o.cells[c].value, o.cells[c].members, o.cells[c].weight_mass);
    result.universe.push(f + 1, o.universe.value, o.universe.members, o.universe.weight_mass);
    result.dropped_members += o.dropped;
  }
  return result;
}

PortfolioSeries diff_series(const PortfolioSeries& high, const PortfolioSeries& low) {
  PortfolioSeries out;
  std::size_t i = 0, j = 0;
  while (i < high.size() && j < low.size()) {
    if (high.months[i] < low.months[j]) {
      ++i;
    } else if (low.months[j] < high.months[i]) {
      ++j;
    } else {
      out.push(high.months[i], high.returns[i] - low.returns[j], high.counts[i] + low.counts[j],
               kMissing);
      ++i;
      ++j;
    }
  }
  if (out.empty()) throw DataError("difference of series with no common month");
  return out;
}

}  // namespace turnecho
