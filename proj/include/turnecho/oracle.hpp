#ifndef TURNECHO_ORACLE_HPP
#define TURNECHO_ORACLE_HPP

// Reference computations used to check the estimators. Written with plain
// std containers and explicit loops; nothing here calls into the
// econometrics or wavelet code.

#include <vector>

namespace turnecho::oracle {

using Matrix = std::vector<std::vector<double>>;

/// HAC covariance of OLS coefficients, evaluated as
///   (X'X)^-1 [ sum_t sum_s w(|t-s|) e_t e_s x_t x_s' ] (X'X)^-1
/// with Bartlett weights w(d) = 1 - d/(lag+1) for d <= lag, by explicit
/// double summation. `X` is row-major (one row per observation) and must
/// already contain an intercept column if one is wanted.
Matrix brute_force_hac(const std::vector<double>& y, const Matrix& X, int lag);

/// Fraction of discrete-Fourier energy, zero frequency excluded, at periods
/// p with lo <= p <= hi months. Throws DataError for series shorter than 64
/// or with no energy away from zero frequency.
double spectral_band_energy(const std::vector<double>& series, double lo, double hi);

}  // namespace turnecho::oracle

#endif  // TURNECHO_ORACLE_HPP
