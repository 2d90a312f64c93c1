#pragma once

#include "surveycalib/core.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace surveycalib {

/// Shortest decimal that parses back to the same double; "nan", "inf" and
/// "-inf" for non-finite values.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;   // rows x header.size()

  Index column(const std::string& name) const;   // -1 when absent
};

/// Numeric CSV with a mandatory header row. Throws std::runtime_error with
/// the line number on ragged rows or non-numeric cells.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& values);

/// Build a frame from named CSV columns. Empty `aux_columns` means every
/// column not listed in `outcome_columns`; empty `outcome_columns` with
/// non-empty aux means every remaining column.
PopulationFrame frame_from_csv(const CsvTable& table, const std::vector<std::string>& aux_columns,
                               const std::vector<std::string>& outcome_columns);

/// Auxiliary columns followed by outcome columns, original (uncentered) scale.
void write_population_csv(std::ostream& out, const PopulationFrame& frame);

}  // namespace surveycalib
