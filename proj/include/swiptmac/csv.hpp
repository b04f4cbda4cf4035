#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include "swiptmac/errors.hpp"

namespace swiptmac {

/// 9 significant digits, locale independent; empty cells stay empty.
inline std::string csv_number(double v) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, p);
}

/// Row-oriented CSV assembly; cells are pre-rendered strings so callers
/// control empty cells and text columns.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
      throw invalid_parameter("CsvTable: row width does not match the header");
    rows_.push_back(std::move(cells));
  }

  std::string to_string() const {
    std::string out = join(header_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw invalid_parameter("CsvTable: cannot open '" + path + "' for writing");
    f << to_string();
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ",";
      line += cells[i];
    }
    line += "\n";
    return line;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace swiptmac
