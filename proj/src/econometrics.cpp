#include "turnecho/econometrics.hpp"

#include <algorithm>
#include <numeric>

namespace turnecho {

namespace {

// Months present in every series, ascending.
std::vector<Month> common_months(const std::vector<const PortfolioSeries*>& series) {
  if (series.empty()) return {};
  std::vector<Month> out = series.front()->months;
  for (std::size_t i = 1; i < series.size(); ++i) {
    std::vector<Month> next;
    std::set_intersection(out.begin(), out.end(), series[i]->months.begin(),
                          series[i]->months.end(), std::back_inserter(next));
    out.swap(next);
  }
  return out;
}

RegressionResult<double> time_series_regression(const std::vector<Month>& months,
                                                const PortfolioSeries& dependent,
                                                const std::vector<const PortfolioSeries*>& spanning,
                                                std::vector<std::string> names,
                                                const std::vector<Factor>& factor_set,
                                                const FactorTable* factors, const LagPolicy& lag) {
  const auto n = static_cast<Eigen::Index>(months.size());
  const auto k = static_cast<Eigen::Index>(spanning.size() + factor_set.size());
  Eigen::VectorXd y(n);
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Month m = months[i];
    y[i] = *dependent.at(m);
    Eigen::Index j = 0;
    for (const auto* s : spanning) X(i, j++) = *s->at(m);
    for (Factor f : factor_set) {
      if (!factors) throw ConfigError("factor regression without a factor table");
      X(i, j++) = factors->get(m, f);
    }
  }
  for (Factor f : factor_set) names.emplace_back(to_string(f));
  return newey_west(ols(y, X, true, std::move(names)), lag);
}

}  // namespace

MeanTest mean_return_test(const PortfolioSeries& series, const LagPolicy& lag) {
  if (static_cast<int>(series.size()) < kMinMeanTestMonths)
    throw DataError(fmt::format("{} months is below the {}-month minimum", series.size(),
                                kMinMeanTestMonths));
  const auto r = time_series_regression(series.months, series, {}, {}, {}, nullptr, lag);
  return {r.coef[0], r.se[0], r.t[0], r.n, r.lag, r.degenerate};
}

RegressionResult<double> factor_alpha(const PortfolioSeries& series, const FactorTable& factors,
                                      const std::vector<Factor>& factor_set, const LagPolicy& lag) {
  return time_series_regression(series.months, series, {}, {}, factor_set, &factors, lag);
}

RegressionResult<double> spanning_regression(const PortfolioSeries& dependent,
                                             const std::vector<PortfolioSeries>& spanning,
                                             const std::vector<std::string>& spanning_names,
                                             bool ff3, const FactorTable* factors,
                                             const LagPolicy& lag) {
  std::vector<const PortfolioSeries*> all{&dependent};
  std::vector<const PortfolioSeries*> span;
  for (const auto& s : spanning) {
    all.push_back(&s);
    span.push_back(&s);
  }
  std::vector<std::string> names = spanning_names;
  for (std::size_t i = names.size(); i < spanning.size(); ++i) names.push_back(fmt::format("s{}", i + 1));
  std::vector<Factor> fs;
  if (ff3) fs = {Factor::MKT, Factor::SMB, Factor::HML};
  return time_series_regression(common_months(all), dependent, span, names, fs, factors, lag);
}

void winsorize(std::vector<double>& values, double lower, double upper) {
  std::vector<double> sorted;
  for (double v : values)
    if (present(v)) sorted.push_back(v);
  if (sorted.size() < 2) return;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double a = quantile(lower), b = quantile(upper);
  for (double& v : values)
    if (present(v)) v = std::clamp(v, a, b);
}

namespace {

struct CrossSection {
  bool ok = false;
  std::string reason;
  Eigen::VectorXd slopes;
  double adj_r2 = kMissing;
  int n = 0;
};

CrossSection cross_section(const PanelDataset& ds, const SignalPanel& panel, const FMBConfig& cfg,
                           Month t) {
  CrossSection out;
  const auto k = static_cast<Eigen::Index>(cfg.regressors.size());
  std::vector<double> y;
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(k));
  if (!ds.month_range().contains(t - 1)) {
    out.reason = "no formation month";
    return out;
  }
  for (std::size_t s : eligible_stocks(ds, t - 1, cfg.eligibility)) {
    const double r = ds.ret(s, t);
    if (!present(r)) continue;
    bool complete = true;
    for (Eigen::Index j = 0; j < k && complete; ++j) complete = present(panel.get(cfg.regressors[j], s, t));
    if (!complete) continue;
    y.push_back(r);
    for (Eigen::Index j = 0; j < k; ++j) cols[j].push_back(panel.get(cfg.regressors[j], s, t));
  }
  const int params = static_cast<int>(k) + (cfg.intercept ? 1 : 0);
  if (static_cast<int>(y.size()) < params + cfg.min_extra_stocks) {
    out.reason = fmt::format("{} complete stocks", y.size());
    return out;
  }
  if (cfg.winsorize)
    for (auto& c : cols) winsorize(c, cfg.winsor_lower, cfg.winsor_upper);
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index j = 0; j < k; ++j) X.col(j) = Eigen::Map<const Eigen::VectorXd>(cols[j].data(), n);
  try {
    const auto r = ols(Eigen::Map<const Eigen::VectorXd>(y.data(), n), X, cfg.intercept);
    out.slopes = r.coef;
    out.adj_r2 = r.adj_r2;
    out.n = r.n;
    out.ok = true;
  } catch (const NumericalError& e) {
    out.reason = e.what();
  }
  return out;
}

}  // namespace

FMBResult fama_macbeth(const PanelDataset& dataset, const SignalPanel& panel, const FMBConfig& cfg,
                       MonthRange months) {
  if (cfg.regressors.empty()) throw ConfigError("Fama-MacBeth needs at least one regressor");
  const MonthRange data = dataset.month_range();
  const Month first = std::max(months.first, data.first + 1);
  const Month last = std::min(months.last, data.last);
  if (months.empty() || last < first) throw ConfigError("empty Fama-MacBeth month range");

  const auto T = static_cast<std::size_t>(last - first + 1);
  std::vector<CrossSection> sections(T);
  parallel_for(T, [&](std::size_t i) {
    sections[i] = cross_section(dataset, panel, cfg, first + static_cast<int>(i));
  });

  FMBResult res;
  if (cfg.intercept) res.names.push_back("const");
  for (Signal s : cfg.regressors) res.names.emplace_back(to_string(s));
  const auto p = static_cast<Eigen::Index>(res.names.size());

  std::vector<const CrossSection*> good;
  for (std::size_t i = 0; i < T; ++i) {
    const Month t = first + static_cast<int>(i);
    if (!sections[i].ok) {
      res.skipped.push_back({t - 1, sections[i].reason});
      continue;
    }
    good.push_back(&sections[i]);
    res.months.push_back(t);
  }
  if (good.empty()) throw DataError("no feasible Fama-MacBeth month");

  const auto G = static_cast<Eigen::Index>(good.size());
  res.slopes.resize(G, p);
  double r2_sum = 0, n_sum = 0;
  for (Eigen::Index i = 0; i < G; ++i) {
    res.slopes.row(i) = good[i]->slopes.transpose();
    res.adj_r2.push_back(good[i]->adj_r2);
    res.counts.push_back(good[i]->n);
    r2_sum += good[i]->adj_r2;
    n_sum += good[i]->n;
  }
  res.avg_adj_r2 = r2_sum / static_cast<double>(G);
  res.avg_n = n_sum / static_cast<double>(G);
  res.premium = res.slopes.colwise().mean().transpose();
  res.se = Eigen::VectorXd::Constant(p, kMissing);
  res.t = Eigen::VectorXd::Constant(p, kMissing);
  res.lag = cfg.lag.resolve(static_cast<int>(G));
  if (G < 3) {
    res.degenerate = true;
    return res;
  }
  const Eigen::MatrixXd none(G, 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto r = newey_west(ols(res.slopes.col(j), none, true), res.lag);
    res.se[j] = r.se[0];
    res.t[j] = r.degenerate ? kMissing : res.premium[j] / r.se[0];
    res.degenerate = res.degenerate || r.degenerate;
  }
  return res;
}

}  // namespace turnecho
