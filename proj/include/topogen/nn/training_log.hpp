#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "topogen/core/io.hpp"

namespace topogen::nn {

// Tabular training trace, written as CSV (step, loss[, aux...]).
struct TrainingLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(const std::vector<double>& row) { rows.push_back(row); }

  std::string to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out << ',';
      out << columns[i];
    }
    out << '\n';
    out.precision(10);
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << row[i];
      }
      out << '\n';
    }
    return out.str();
  }

  void save(const std::filesystem::path& path) const { write_file(path, to_csv()); }
};

}  // namespace topogen::nn
