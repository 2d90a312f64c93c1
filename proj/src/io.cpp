#include "surveycalib/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace surveycalib {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no, std::size_t col) {
  if (cell == "nan" || cell == "NaN" || cell == "inf" || cell == "-inf")
    throw std::runtime_error("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                             ": non-finite value '" + cell + "'");
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || cell.empty())
    throw std::runtime_error("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                             ": not a number: '" + cell + "'");
  return value;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("failed to format a number");
  return std::string(buf, ptr);
}

Index CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<Index>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw std::runtime_error("CSV input is empty (a header row is required)");
  table.header = split_line(line);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) throw std::runtime_error("CSV header has an empty column name");
    for (std::size_t i = 0; i < j; ++i)
      if (table.header[i] == table.header[j])
        throw std::runtime_error("CSV header repeats column '" + table.header[j] + "'");
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.header.size()) + " fields, found " +
                               std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) row[j] = parse_cell(cells[j], line_no, j);
    rows.push_back(std::move(row));
  }

  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return read_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& values) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

PopulationFrame frame_from_csv(const CsvTable& table, const std::vector<std::string>& aux_columns,
                               const std::vector<std::string>& outcome_columns) {
  std::vector<std::string> aux = aux_columns;
  std::vector<std::string> outcomes = outcome_columns;
  auto listed = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  if (aux.empty()) {
    for (const auto& h : table.header)
      if (!listed(outcomes, h)) aux.push_back(h);
  } else if (outcomes.empty()) {
    for (const auto& h : table.header)
      if (!listed(aux, h)) outcomes.push_back(h);
  }

  std::vector<std::string> missing;
  for (const auto* list : {&aux, &outcomes})
    for (const auto& name : *list)
      if (table.column(name) < 0) missing.push_back(name);
  if (!missing.empty()) {
    std::string msg = "CSV has no column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw std::invalid_argument(msg);
  }
  for (const auto& name : aux)
    if (listed(outcomes, name))
      throw std::invalid_argument("column '" + name + "' is both auxiliary and outcome");

  Matrix x(table.values.rows(), static_cast<Index>(aux.size()));
  for (std::size_t j = 0; j < aux.size(); ++j) x.col(static_cast<Index>(j)) = table.values.col(table.column(aux[j]));
  Matrix y(table.values.rows(), static_cast<Index>(outcomes.size()));
  for (std::size_t j = 0; j < outcomes.size(); ++j)
    y.col(static_cast<Index>(j)) = table.values.col(table.column(outcomes[j]));
  return PopulationFrame(std::move(x), std::move(y), aux, outcomes);
}

void write_population_csv(std::ostream& out, const PopulationFrame& frame) {
  std::vector<std::string> header = frame.aux_names();
  header.insert(header.end(), frame.outcome_names().begin(), frame.outcome_names().end());
  Matrix values(frame.size(), frame.aux_dim() + frame.outcome_dim());
  values.leftCols(frame.aux_dim()) = frame.aux().rowwise() + frame.column_means().transpose();
  values.rightCols(frame.outcome_dim()) = frame.outcomes();
  write_csv(out, header, values);
}

}  // namespace surveycalib
