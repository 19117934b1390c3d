#ifndef TURNECHO_REPORT_HPP
#define TURNECHO_REPORT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "turnecho/core.hpp"

namespace turnecho {

/// Delimited text table. `name` is the output path stem relative to the
/// report directory, e.g. "table1" or "appendix/table4_scale0".
struct Table {
  std::string name;
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// A point estimate and its t-statistic, already in display units.
struct Estimate {
  double value = kMissing;
  double t = kMissing;
};

/// Three decimals, "NA" for absent values. Negative zero prints as 0.000.
std::string format_number(double v);

/// Comma-delimited, header first. Cells containing commas or quotes are quoted.
void write_table(std::ostream& out, const Table& table);

/// Writes <dir>/<name>.csv, creating subdirectories.
void save_table(const std::string& dir, const Table& table);

/// One row block of a univariate sort table: estimates on the first line,
/// t-statistics on the next.
struct UnivariateLine {
  std::string label;
  std::vector<Estimate> groups;  ///< low to high
  Estimate diff;
};

/// Columns L, 2 .. k-1, H, Diff. Throws DataError when `lines` is empty or
/// group counts disagree.
Table univariate_table(std::string name, std::string title, const std::vector<UnivariateLine>& lines);

/// rows x columns cell grid plus the Diff column and Diff row, all in
/// display units; grid[r][c] with r, c running to rows and columns
/// inclusive (the last index is Diff).
struct BivariateBlock {
  std::string label;        ///< first column value, e.g. "4"
  std::string column_name;  ///< second column value, e.g. "r_6_2"
  std::vector<std::vector<Estimate>> grid;
};

/// Per block: rows T1..Tk then Diff; estimate columns C1..Cm, Diff on the
/// left and matching t-statistic columns on the right. Throws DataError on
/// empty or ragged input.
Table bivariate_table(std::string name, std::string title, const std::vector<BivariateBlock>& blocks);

/// One regression model column.
struct ModelColumn {
  std::vector<std::pair<std::string, Estimate>> terms;    ///< display units
  std::vector<std::pair<std::string, std::string>> flags;  ///< e.g. {"FF3 control", "Yes"}
  double adj_r2 = kMissing;
  double n = kMissing;  ///< observations, or average cross-section size
};

struct ModelPanel {
  std::string label;
  std::vector<ModelColumn> models;
};

/// Columns: panel, variable, (1) .. (M). Side by side, models are numbered
/// across panels; stacked, every panel restarts at (1) on its own rows.
/// Each term takes two lines (estimate, t); flag, Adj R2 and n rows follow.
/// Throws DataError when no model is present.
Table regression_table(std::string name, std::string title, const std::vector<ModelPanel>& panels,
                       const std::string& n_label = "n", bool stacked = false);

/// Square matrix with row and column labels. Throws DataError when empty.
Table matrix_table(std::string name, std::string title, const std::vector<std::string>& labels,
                   const std::vector<std::vector<double>>& values);

}  // namespace turnecho

#endif  // TURNECHO_REPORT_HPP
