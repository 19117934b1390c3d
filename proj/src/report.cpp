#include "turnecho/report.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

namespace turnecho {

std::string format_number(double v) {
  if (!present(v)) return "NA";
  std::string s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

namespace {

std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_row(std::ostream& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

}  // namespace

void write_table(std::ostream& out, const Table& table) {
  write_row(out, table.header);
  for (const auto& r : table.rows) write_row(out, r);
}

void save_table(const std::string& dir, const Table& table) {
  const auto path = std::filesystem::path(dir) / (table.name + ".csv");
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  write_table(out, table);
  if (!out) throw ConfigError(fmt::format("failed writing '{}'", path.string()));
}

Table univariate_table(std::string name, std::string title, const std::vector<UnivariateLine>& lines) {
  if (lines.empty() || lines.front().groups.size() < 2)
    throw DataError(fmt::format("{}: no univariate results", name));
  const std::size_t k = lines.front().groups.size();
  Table t{std::move(name), std::move(title), {"variable", "L"}, {}};
  for (std::size_t g = 2; g < k; ++g) t.header.push_back(std::to_string(g));
  t.header.push_back("H");
  t.header.push_back("Diff");
  for (const auto& line : lines) {
    if (line.groups.size() != k) throw DataError(fmt::format("{}: ragged group counts", t.name));
    std::vector<std::string> est{line.label}, ts{""};
    for (const auto& e : line.groups) {
      est.push_back(format_number(e.value));
      ts.push_back(format_number(e.t));
    }
    est.push_back(format_number(line.diff.value));
    ts.push_back(format_number(line.diff.t));
    t.rows.push_back(std::move(est));
    t.rows.push_back(std::move(ts));
  }
  return t;
}

Table bivariate_table(std::string name, std::string title, const std::vector<BivariateBlock>& blocks) {
  if (blocks.empty() || blocks.front().grid.size() < 3)
    throw DataError(fmt::format("{}: no bivariate results", name));
  const std::size_t rows = blocks.front().grid.size();
  const std::size_t cols = blocks.front().grid.front().size();
  if (cols < 3) throw DataError(fmt::format("{}: no bivariate results", name));
  Table t{std::move(name), std::move(title), {"scale", "column_signal", "row"}, {}};
  for (std::size_t c = 1; c < cols; ++c) t.header.push_back(fmt::format("C{}", c));
  t.header.push_back("Diff");
  for (std::size_t c = 1; c < cols; ++c) t.header.push_back(fmt::format("t_C{}", c));
  t.header.push_back("t_Diff");
  for (const auto& b : blocks) {
    if (b.grid.size() != rows) throw DataError(fmt::format("{}: ragged bivariate grid", t.name));
    for (std::size_t r = 0; r < rows; ++r) {
      if (b.grid[r].size() != cols) throw DataError(fmt::format("{}: ragged bivariate grid", t.name));
      std::vector<std::string> line{b.label, b.column_name,
                                    r + 1 < rows ? fmt::format("T{}", r + 1) : std::string("Diff")};
      for (const auto& e : b.grid[r]) line.push_back(format_number(e.value));
      for (const auto& e : b.grid[r]) line.push_back(format_number(e.t));
      t.rows.push_back(std::move(line));
    }
  }
  return t;
}

Table regression_table(std::string name, std::string title, const std::vector<ModelPanel>& panels,
                       const std::string& n_label, bool stacked) {
  std::size_t total = 0;
  for (const auto& p : panels) total = stacked ? std::max(total, p.models.size()) : total + p.models.size();
  if (total == 0) throw DataError(fmt::format("{}: no regression results", name));
  Table t{std::move(name), std::move(title), {"panel", "variable"}, {}};
  for (std::size_t m = 1; m <= total; ++m) t.header.push_back(fmt::format("({})", m));

  std::size_t offset = 0;
  for (const auto& p : panels) {
    std::vector<std::string> terms, flags;
    auto add = [](std::vector<std::string>& v, const std::string& s) {
      if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& m : p.models) {
      for (const auto& [n, e] : m.terms) add(terms, n);
      for (const auto& [n, f] : m.flags) add(flags, n);
    }
    auto blank = [&] {
      std::vector<std::string> row(total + 2);
      row[0] = p.label;
      return row;
    };
    for (const auto& term : terms) {
      auto est = blank(), ts = blank();
      est[1] = term;
      for (std::size_t m = 0; m < p.models.size(); ++m)
        for (const auto& [n, e] : p.models[m].terms)
          if (n == term) {
            est[offset + m + 2] = format_number(e.value);
            ts[offset + m + 2] = format_number(e.t);
          }
      t.rows.push_back(std::move(est));
      t.rows.push_back(std::move(ts));
    }
    for (const auto& flag : flags) {
      auto row = blank();
      row[1] = flag;
      for (std::size_t m = 0; m < p.models.size(); ++m)
        for (const auto& [n, f] : p.models[m].flags)
          if (n == flag) row[offset + m + 2] = f;
      t.rows.push_back(std::move(row));
    }
    auto r2 = blank(), nn = blank();
    r2[1] = "Adj R2";
    nn[1] = n_label;
    for (std::size_t m = 0; m < p.models.size(); ++m) {
      r2[offset + m + 2] = format_number(p.models[m].adj_r2);
      nn[offset + m + 2] = present(p.models[m].n) ? fmt::format("{:.0f}", p.models[m].n) : "NA";
    }
    t.rows.push_back(std::move(r2));
    t.rows.push_back(std::move(nn));
    if (!stacked) offset += p.models.size();
  }
  return t;
}

Table matrix_table(std::string name, std::string title, const std::vector<std::string>& labels,
                   const std::vector<std::vector<double>>& values) {
  if (labels.empty() || values.size() != labels.size())
    throw DataError(fmt::format("{}: no matrix results", name));
  Table t{std::move(name), std::move(title), {"variable"}, {}};
  for (const auto& l : labels) t.header.push_back(l);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (values[i].size() != labels.size()) throw DataError(fmt::format("{}: ragged matrix", t.name));
    std::vector<std::string> row{labels[i]};
    for (double v : values[i]) row.push_back(format_number(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace turnecho
