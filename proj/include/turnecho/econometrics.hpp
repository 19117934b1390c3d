#ifndef TURNECHO_ECONOMETRICS_HPP
#define TURNECHO_ECONOMETRICS_HPP

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <fmt/format.h>

#include "turnecho/core.hpp"
#include "turnecho/panel_data.hpp"
#include "turnecho/portfolio.hpp"
#include "turnecho/signals.hpp"

namespace turnecho {

/// Decimal to percent. The only place the scale changes.
inline double to_percent(double decimal) { return 100.0 * decimal; }

/// Residuals below this fraction of ||y|| make standard errors meaningless.
inline constexpr double kDegenerateResidual = 1e-10;

template <typename Scalar = double>
struct RegressionResult {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::vector<std::string> names;  ///< "const" first when an intercept is fitted
  bool intercept = false;
  Vector coef, se, t;
  Matrix cov;
  Scalar r2 = 0, adj_r2 = 0;  ///< uncentered without an intercept
  int n = 0;
  int lag = -1;  ///< -1 for classical errors
  /// Residuals vanish: se is zero and t is NaN.
  bool degenerate = false;

  // kept for the HAC step
  Matrix design;
  Vector residuals;
  Matrix xtx_inv;

  int parameters() const { return static_cast<int>(coef.size()); }
  /// Index of a named coefficient. Throws ConfigError.
  int index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw ConfigError(fmt::format("no coefficient named '{}'", name));
  }
};

/// How many autocovariance lags the Bartlett kernel includes.
struct LagPolicy {
  bool automatic = true;
  int lag = 0;

  static LagPolicy fixed(int l) { return {false, l}; }
  /// floor(4 (T/100)^(2/9)) when automatic.
  int resolve(int T) const {
    return automatic ? static_cast<int>(std::floor(4.0 * std::pow(T / 100.0, 2.0 / 9.0))) : lag;
  }
};

namespace detail {

template <typename Scalar>
void finish_errors(RegressionResult<Scalar>& r) {
  r.se = r.cov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  r.t = r.coef.cwiseQuotient(r.se);
  if (r.degenerate) {
    r.se.setZero();
    r.t.setConstant(std::numeric_limits<Scalar>::quiet_NaN());
  }
}

}  // namespace detail

/// Least squares with classical standard errors. Rows of X are observations;
/// a leading constant column is added when `intercept`. Throws DataError on a
/// length mismatch or fewer than regressors + 2 observations, NumericalError
/// on rank deficiency.
template <typename DY, typename DX>
RegressionResult<typename DY::Scalar> ols(const Eigen::MatrixBase<DY>& y,
                                          const Eigen::MatrixBase<DX>& X, bool intercept,
                                          std::vector<std::string> names = {}) {
  using Scalar = typename DY::Scalar;
  using Result = RegressionResult<Scalar>;
  using Matrix = typename Result::Matrix;
  using Vector = typename Result::Vector;

  const auto n = y.size();
  if (X.rows() != n)
    throw DataError(fmt::format("{} observations but {} regressor rows", n, X.rows()));
  const auto k = X.cols() + (intercept ? 1 : 0);
  if (k == 0) throw ConfigError("regression without regressors");
  if (n < X.cols() + 2)
    throw DataError(fmt::format("{} observations too few for {} regressors", n, X.cols()));

  Result r;
  r.intercept = intercept;
  r.n = static_cast<int>(n);
  r.design.resize(n, k);
  if (intercept) r.design.col(0).setOnes();
  r.design.rightCols(X.cols()) = X;
  if (intercept) r.names.push_back("const");
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    r.names.push_back(j < static_cast<Eigen::Index>(names.size()) ? names[j] : fmt::format("x{}", j + 1));

  Eigen::ColPivHouseholderQR<Matrix> qr(r.design);
  qr.setThreshold(Scalar(1e-10));
  if (qr.rank() < k) throw NumericalError("regressor matrix is rank deficient");
  r.coef = qr.solve(Vector(y));
  r.residuals = y - r.design * r.coef;

  const Matrix R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Matrix Rinv = R.template triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
  const Matrix inner = Rinv * Rinv.transpose();
  r.xtx_inv = qr.colsPermutation() * inner * qr.colsPermutation().transpose();

  const Scalar ssr = r.residuals.squaredNorm();
  const Scalar tss = intercept ? (y.array() - y.mean()).matrix().squaredNorm() : y.squaredNorm();
  r.r2 = tss > 0 ? Scalar(1) - ssr / tss : Scalar(1);
  const Scalar dof_total = intercept ? Scalar(n - 1) : Scalar(n);
  r.adj_r2 = Scalar(1) - (Scalar(1) - r.r2) * dof_total / Scalar(n - k);
  r.degenerate = std::sqrt(ssr) <= kDegenerateResidual * y.norm();
  r.cov = (ssr / Scalar(n - k)) * r.xtx_inv;
  detail::finish_errors(r);
  return r;
}

/// Replaces the errors with the Bartlett-kernel HAC covariance
/// (X'X)^-1 S (X'X)^-1, S = sum_l w_l sum_t e_t e_{t-l} (x_t x_{t-l}' + x_{t-l} x_t'),
/// w_l = 1 - l/(L+1), no small-sample scaling. Lag 0 is White's estimator.
/// Throws ConfigError when lag < 0 or lag >= n.
template <typename Scalar>
RegressionResult<Scalar> newey_west(RegressionResult<Scalar> r, int lag) {
  using Matrix = typename RegressionResult<Scalar>::Matrix;
  if (lag < 0 || lag >= r.n)
    throw ConfigError(fmt::format("lag {} invalid for {} observations", lag, r.n));
  const Matrix u = r.design.array().colwise() * r.residuals.array();  // scores e_t x_t
  Matrix S = u.transpose() * u;
  for (int l = 1; l <= lag; ++l) {
    const Scalar w = Scalar(1) - Scalar(l) / Scalar(lag + 1);
    const Matrix G = u.bottomRows(r.n - l).transpose() * u.topRows(r.n - l);
    S += w * (G + G.transpose());
  }
  r.cov = r.xtx_inv * S * r.xtx_inv;
  r.lag = lag;
  detail::finish_errors(r);
  return r;
}

template <typename Scalar>
RegressionResult<Scalar> newey_west(RegressionResult<Scalar> r, const LagPolicy& policy) {
  const int lag = policy.resolve(r.n);
  return newey_west(std::move(r), lag);
}

struct MeanTest {
  double mean = kMissing;  ///< decimal
  double se = kMissing;
  double t = kMissing;
  int n = 0;
  int lag = 0;
  bool degenerate = false;
};

inline constexpr int kMinMeanTestMonths = 24;

/// Regression of the series on a constant with HAC errors. Throws DataError
/// below 24 months.
MeanTest mean_return_test(const PortfolioSeries& series, const LagPolicy& lag = {});

/// Time-series regression of the portfolio on the chosen factors with HAC
/// errors; the intercept is the alpha. Throws DataError when a factor month
/// is missing.
RegressionResult<double> factor_alpha(const PortfolioSeries& series, const FactorTable& factors,
                                      const std::vector<Factor>& factor_set,
                                      const LagPolicy& lag = {});

/// Dependent portfolio on spanning portfolios (plus MKT, SMB, HML when
/// `ff3`), on the months all series share. The intercept is the premium left
/// after controlling for the spanning set.
RegressionResult<double> spanning_regression(const PortfolioSeries& dependent,
                                             const std::vector<PortfolioSeries>& spanning,
                                             const std::vector<std::string>& spanning_names,
                                             bool ff3, const FactorTable* factors,
                                             const LagPolicy& lag = {});

struct FMBConfig {
  std::vector<Signal> regressors;
  bool intercept = false;
  LagPolicy lag;
  bool winsorize = false;
  double winsor_lower = 0.01;
  double winsor_upper = 0.99;
  EligibilityPolicy eligibility;
  /// A month needs at least parameters + min_extra_stocks complete stocks.
  int min_extra_stocks = 5;
};

struct FMBResult {
  std::vector<std::string> names;
  Eigen::VectorXd premium, se, t;
  double avg_adj_r2 = kMissing;
  double avg_n = 0;
  int lag = 0;
  bool degenerate = false;
  std::vector<Month> months;           ///< months with a feasible cross-section
  Eigen::MatrixXd slopes;              ///< months x parameters
  std::vector<double> adj_r2;          ///< per month
  std::vector<int> counts;             ///< per month
  std::vector<SkippedMonth> skipped;   ///< formation month = return month - 1
};

/// For each return month t in `months`: stocks eligible at t-1 with every
/// regressor present at t and a return at t, cross-sectional OLS of returns
/// on the regressors. Premiums are slope means with HAC t-statistics.
/// Infeasible months are skipped and listed; throws DataError when none is
/// feasible.
FMBResult fama_macbeth(const PanelDataset& dataset, const SignalPanel& panel, const FMBConfig& cfg,
                       MonthRange months);

/// Clamps values to the [lower, upper] empirical quantiles of the present values.
void winsorize(std::vector<double>& values, double lower, double upper);

}  // namespace turnecho

#endif  // TURNECHO_ECONOMETRICS_HPP
