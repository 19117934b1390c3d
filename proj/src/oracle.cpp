#include "turnecho/oracle.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "turnecho/core.hpp"

namespace turnecho::oracle {

namespace {

Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-300) throw NumericalError("oracle: singular matrix");
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = a[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col][c] /= d;
      inv[col][c] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

}  // namespace

Matrix brute_force_hac(const std::vector<double>& y, const Matrix& X, int lag) {
  const std::size_t T = y.size();
  if (X.size() != T || T == 0) throw ConfigError("oracle: row count mismatch");
  const std::size_t k = X[0].size();

  Matrix xtx(k, std::vector<double>(k, 0.0));
  std::vector<double> xty(k, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < k; ++i) {
      xty[i] += X[t][i] * y[t];
      for (std::size_t j = 0; j < k; ++j) xtx[i][j] += X[t][i] * X[t][j];
    }
  const Matrix bread = invert(xtx);
  std::vector<double> beta(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) beta[i] += bread[i][j] * xty[j];
  std::vector<double> e(T);
  for (std::size_t t = 0; t < T; ++t) {
    double fit = 0.0;
    for (std::size_t i = 0; i < k; ++i) fit += X[t][i] * beta[i];
    e[t] = y[t] - fit;
  }

  Matrix meat(k, std::vector<double>(k, 0.0));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < T; ++s) {
      const long d = std::labs(static_cast<long>(t) - static_cast<long>(s));
      if (d > lag) continue;
      const double w = 1.0 - static_cast<double>(d) / (lag + 1.0);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) meat[i][j] += w * e[t] * e[s] * X[t][i] * X[s][j];
    }
  return multiply(multiply(bread, meat), bread);
}

double spectral_band_energy(const std::vector<double>& series, double lo, double hi) {
  const std::size_t n = series.size();
  if (n < 64) throw DataError("spectral_band_energy: series shorter than 64");
  double total = 0.0;
  double in_band = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) /
                           static_cast<double>(n);
      acc += series[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    const double energy = std::norm(acc);
    const double period = static_cast<double>(n) / static_cast<double>(std::min(k, n - k));
    total += energy;
    if (period >= lo && period <= hi) in_band += energy;
  }
  double scale = 0.0;
  for (double v : series) scale += v * v;
  if (total <= 1e-24 * std::max(1.0, scale * static_cast<double>(n)))
    throw DataError("spectral_band_energy: no energy away from zero frequency");
  return in_band / total;
}

}  // namespace turnecho::oracle
