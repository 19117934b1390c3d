#include <numbers>
#include <set>
#include <random>

#include "doctest.h"
#include "turnecho/oracle.hpp"
#include "turnecho/wavelet.hpp"

using namespace turnecho;

namespace {

Eigen::VectorXd random_series(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.15, 0.05);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = d(rng);
  return x;
}

Eigen::VectorXd sinusoid(int n, double period, double phase = 0.3) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * i / period + phase);
  return x;
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Scale whose nominal dyadic band contains the period: 2^j < p <= 2^(j+1)
// maps to detail level j, i.e. scale 7 - j.
int dyadic_scale(double period) {
  int j = 1;
  while (std::ldexp(1.0, j + 1) < period) ++j;
  return kScaleCount - j;
}

}  // namespace

TEST_CASE("db2_filters") {
  const auto f = db2_filters();
  double sum = 0, sq = 0, gsq = 0, shift2 = 0;
  for (int k = 0; k < 4; ++k) {
    sum += f.scaling[k];
    sq += f.scaling[k] * f.scaling[k];
    gsq += f.wavelet[k] * f.wavelet[k];
    CHECK(f.wavelet[k] == (k % 2 == 0 ? 1 : -1) * f.scaling[3 - k]);
  }
  for (int k = 0; k + 2 < 4; ++k) shift2 += f.scaling[k] * f.scaling[k + 2];
  CHECK(std::abs(sum - std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(sq - 1.0) < 1e-12);
  CHECK(std::abs(gsq - 1.0) < 1e-12);
  CHECK(std::abs(shift2) < 1e-12);

  const auto ff = db2_filters<float>();
  CHECK(std::abs(ff.scaling[0] + ff.scaling[1] + ff.scaling[2] + ff.scaling[3] - std::sqrt(2.0f)) <
        1e-6f);
}

TEST_CASE("scale_cycle_label") {
  CHECK(scale_cycle_label(4).cycle_band == "4~8months");
  CHECK(scale_cycle_label(0).cycle_band == ">64months");
  CHECK(scale_cycle_label(6).cycle_band == "0~2months");
  CHECK(scale_cycle_label(5).cycle_band == "2~4months");
  CHECK_THROWS_AS(scale_cycle_label(7), ConfigError);
  CHECK_THROWS_AS(scale_cycle_label(-1), ConfigError);
  std::set<std::string> seen;
  for (int s = 0; s < kScaleCount; ++s) seen.insert(scale_cycle_label(s).cycle_band);
  CHECK(seen.size() == kScaleCount);
  CHECK(scale_level(6) == 1);
  CHECK(scale_level(1) == 6);
  CHECK(scale_level(0) == 6);
}

TEST_CASE("constant series passes only through the smooth") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(128, 0.37);
  for (auto t : {Transform::DWT, Transform::MODWT}) {
    WaveletConfig cfg;
    cfg.transform = t;
    const auto d = decompose(x, cfg);
    REQUIRE(d.components.cols() == kScaleCount);
    CHECK(max_abs_diff(d.component(0), x) < 1e-8);
    for (int s = 1; s < kScaleCount; ++s) CHECK(d.component(s).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("perfect reconstruction") {
  for (auto t : {Transform::DWT, Transform::MODWT})
    for (int n : {64, 120, 256, 317, 624}) {
      WaveletConfig cfg;
      cfg.transform = t;
      const auto x = random_series(n, static_cast<std::uint64_t>(n));
      const auto d = decompose(x, cfg);
      CHECK(d.length() == n);
      CHECK(max_abs_diff(reconstruct(d), x) < 1e-8);
    }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(100);
  CHECK(reconstruct(decompose(zero)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linearity") {
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_series(200, 10 + trial);
    const auto y = random_series(200, 100 + trial);
    const double a = 1.7, b = -0.4;
    const auto dx = decompose(x);
    const auto dy = decompose(y);
    const auto dz = decompose(Eigen::VectorXd(a * x + b * y));
    CHECK((dz.components - (a * dx.components + b * dy.components)).cwiseAbs().maxCoeff() < 1e-8);
    // summing component pairs reconstructs x + y
    const Eigen::VectorXd sum = (dx.components + dy.components).rowwise().sum();
    CHECK(max_abs_diff(sum, x + y) < 1e-8);
  }
}

TEST_CASE("band localization against the Fourier oracle") {
  const int n = 768;  // every test period divides n
  for (double p : {3.0, 6.0, 12.0, 24.0, 48.0}) {
    CAPTURE(p);
    const Eigen::VectorXd x = sinusoid(n, p);
    const int expected = dyadic_scale(p);
    const auto [lo, hi] = scale_period_band(expected);
    CHECK(oracle::spectral_band_energy({x.data(), x.data() + n}, lo, hi) > 0.95);

    const auto d = decompose(x);
    Eigen::Array<double, kScaleCount, 1> energy;
    for (int s = 0; s < kScaleCount; ++s) energy[s] = d.component(s).squaredNorm();
    int best = 1;
    for (int s = 1; s < kScaleCount; ++s)
      if (energy[s] > energy[best]) best = s;
    CHECK(best == expected);
    CHECK(energy[expected] / energy.sum() > 0.6);

    // decimation aliases part of the component outside its nominal band
    const Eigen::VectorXd c = d.component(expected);
    CHECK(oracle::spectral_band_energy({c.data(), c.data() + n}, lo, hi) > 0.6);
  }
}

TEST_CASE("period-3 and period-12 cycles land in the finest and level-3 details") {
  const auto d3 = decompose(sinusoid(512, 3.0));
  double total = 0;
  for (int s = 0; s < kScaleCount; ++s) total += d3.component(s).squaredNorm();
  CHECK(d3.component(6).squaredNorm() / total > 0.6);

  const auto d12 = decompose(sinusoid(512, 12.0));
  Eigen::Index best = 0;
  Eigen::VectorXd e(kScaleCount);
  for (int s = 0; s < kScaleCount; ++s) e[s] = d12.component(s).squaredNorm();
  e.maxCoeff(&best);
  CHECK(best == 4);
}

TEST_CASE("cross-scale near-orthogonality on white noise") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  Eigen::VectorXd x(1024);
  for (auto& v : x) v = n01(rng);
  const auto d = decompose(x);
  for (int a = 1; a < kScaleCount; ++a)
    for (int b = a + 1; b < kScaleCount; ++b) {
      const Eigen::VectorXd u = d.component(a).array() - d.component(a).mean();
      const Eigen::VectorXd v = d.component(b).array() - d.component(b).mean();
      const double rho = u.dot(v) / (u.norm() * v.norm());
      CAPTURE(a);
      CAPTURE(b);
      CHECK(std::abs(rho) < 0.15);
    }
}

TEST_CASE("causal mode") {
  const auto x = random_series(300, 5);
  WaveletConfig cfg;
  cfg.mode = DecompositionMode::Causal;
  const CausalKernel<double> kernel(cfg);
  const auto d = decompose(x, cfg, Month(0), "S", &kernel);
  CHECK(d.span.first == Month(cfg.min_length - 1));
  CHECK(d.span.last == Month(299));
  CHECK(max_abs_diff(reconstruct(d), x.tail(d.length())) < 1e-8);

  SUBCASE("matches a direct decomposition of the trailing window") {
    WaveletConfig full;
    for (int t : {63, 100, 127, 128, 299}) {
      const int len = std::min(t + 1, cfg.causal_window);
      const auto direct = decompose(Eigen::VectorXd(x.segment(t + 1 - len, len)), full);
      for (int s = 0; s < kScaleCount; ++s)
        CHECK(std::abs(direct.components(len - 1, s) - d.at(s, Month(t))) < 1e-10);
    }
  }
  SUBCASE("no look-ahead") {
    Eigen::VectorXd y = x;
    const int t = 180;
    for (int i = t + 1; i < y.size(); ++i) y[i] += 10.0 * std::sin(i);
    const auto dy = decompose(y, cfg, Month(0), "S", &kernel);
    for (Month m = d.span.first; m <= Month(t); ++m)
      for (int s = 0; s < kScaleCount; ++s) CHECK(dy.at(s, m) == d.at(s, m));
  }
}

TEST_CASE("decompose errors") {
  CHECK_THROWS_AS(decompose(Eigen::VectorXd::Ones(63)), DataError);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(100);
  bad[50] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(decompose(bad), DataError);
  bad[50] = kMissing;
  CHECK_THROWS_AS(decompose(bad), DataError);
}

TEST_CASE("contiguous_segments fills single gaps and splits longer ones") {
  Eigen::VectorXd x(12);
  x << kMissing, 1, 2, kMissing, 4, 5, kMissing, kMissing, 8, 9, 10, kMissing;
  const auto segs = contiguous_segments(x);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].start == 1);
  CHECK(segs[0].values.size() == 5);
  CHECK(segs[0].values[2] == 2);  // forward filled
  CHECK(segs[1].start == 8);
  CHECK(segs[1].values.size() == 3);
}
