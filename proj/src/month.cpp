#include "turnecho/core.hpp"

#include <charconv>

#include <fmt/format.h>

namespace turnecho {

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Month Month::parse(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r'))
    text.remove_suffix(1);

  int year = 0;
  int month = 0;
  bool ok = false;
  if (text.size() == 7 && (text[4] == '-' || text[4] == '/')) {
    ok = parse_int(text.substr(0, 4), year) && parse_int(text.substr(5, 2), month);
  } else if (text.size() == 6) {
    ok = parse_int(text.substr(0, 4), year) && parse_int(text.substr(4, 2), month);
  } else if (text.size() == 8) {
    int day = 0;
    ok = parse_int(text.substr(0, 4), year) && parse_int(text.substr(4, 2), month) &&
         parse_int(text.substr(6, 2), day);
  } else if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    ok = parse_int(text.substr(0, 4), year) && parse_int(text.substr(5, 2), month);
  }
  if (!ok || month < 1 || month > 12 || year < 1800 || year > 2999)
    throw DataError(fmt::format("unparseable month '{}'", text));
  return from_year_month(year, month);
}

std::string Month::str() const { return fmt::format("{:04d}-{:02d}", year(), month_of_year()); }

std::string_view to_string(Exchange e) {
  switch (e) {
    case Exchange::NYSE: return "NYSE";
    case Exchange::AMEX: return "AMEX";
    case Exchange::NASDAQ: return "NASDAQ";
  }
  return "?";
}

}  // namespace turnecho
