#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsf::cli_analysis {

/// Tidy CSV table of string cells. Numbers are formatted before insertion.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  /// Index of a header column; throws std::out_of_range when absent.
  std::size_t column(const std::string& name) const;
};

/// Comma-separated, one header line, '\n' line endings, no quoting.
void write_table(std::ostream& out, const Table& table);
void save_table(const std::filesystem::path& path, const Table& table);

/// Throws datapipe::IngestionError on ragged rows or an empty stream.
Table read_table(std::istream& in);
Table load_table(const std::filesystem::path& path);

}  // namespace tsf::cli_analysis
