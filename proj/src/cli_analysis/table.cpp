#include "tsf/cli_analysis/table.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tsf/datapipe/types.hpp"

namespace tsf::cli_analysis {

using datapipe::IngestionError;

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw std::invalid_argument("table row has " + std::to_string(row.size()) + " cells, expected " +
                                std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::out_of_range("no column '" + name + "'");
}

namespace {

void write_line(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_table(std::ostream& out, const Table& table) {
  write_line(out, table.header);
  for (const auto& row : table.rows) write_line(out, row);
}

void save_table(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_table(out, table);
}

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw IngestionError("empty table");
  t.header = split_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw IngestionError("table line " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                           " cells");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  return read_table(in);
}

}  // namespace tsf::cli_analysis
