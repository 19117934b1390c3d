#ifndef TURNECHO_CORE_HPP
#define TURNECHO_CORE_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <exception>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace turnecho {

/// Error raised for malformed configuration or invalid arguments (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised for malformed or insufficient data (exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised when a numerical procedure cannot produce a result (exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calendar month as an integer offset from January 1969.
class Month {
 public:
  constexpr Month() = default;
  constexpr explicit Month(int index) : index_(index) {}

  static constexpr Month from_year_month(int year, int month) {
    return Month((year - 1969) * 12 + (month - 1));
  }

  /// Parses YYYYMM, YYYY-MM, YYYY/MM or YYYYMMDD. Throws DataError.
  static Month parse(std::string_view text);

  constexpr int index() const { return index_; }
  constexpr int year() const { return 1969 + floor_div(index_, 12); }
  constexpr int month_of_year() const { return index_ - floor_div(index_, 12) * 12 + 1; }

  /// YYYY-MM
  std::string str() const;
  /// YYYYMM as an integer, the form used in French-library files.
  constexpr int yyyymm() const { return year() * 100 + month_of_year(); }

  constexpr Month operator+(int n) const { return Month(index_ + n); }
  constexpr Month operator-(int n) const { return Month(index_ - n); }
  constexpr int operator-(Month other) const { return index_ - other.index_; }
  constexpr Month& operator++() {
    ++index_;
    return *this;
  }
  constexpr auto operator<=>(const Month&) const = default;

 private:
  static constexpr int floor_div(int a, int b) { return (a >= 0) ? a / b : -((-a + b - 1) / b); }
  int index_ = 0;
};

/// Inclusive month interval.
struct MonthRange {
  Month first;
  Month last;

  constexpr bool empty() const { return last < first; }
  constexpr int size() const { return empty() ? 0 : (last - first) + 1; }
  constexpr bool contains(Month m) const { return first <= m && m <= last; }
};

enum class Exchange : unsigned char { NYSE = 1, AMEX = 2, NASDAQ = 3 };

std::string_view to_string(Exchange e);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool present(double v) { return !std::isnan(v); }

/// Runs body(i) for i in [0, n) across hardware threads. Each index must
/// write only to its own output slot; the result is then independent of
/// scheduling.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace turnecho

#endif  // TURNECHO_CORE_HPP
