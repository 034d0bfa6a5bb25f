#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace htbnp {

/// Fixed %.17g formatting so CSV artifacts are byte-identical across reruns.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) os << ',';
      os << columns_[i];
    }
    os << '\n';
    body_ = os.str();
  }

  /// Free-form comment header lines (written as "# key=value" before the
  /// column header by prepending at write time).
  void add_comment(const std::string& line) { comments_.push_back("# " + line); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw std::invalid_argument("CsvWriter: cell count mismatch");
    std::ostringstream os;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
    body_ += os.str();
  }

  void row_values(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_double(v));
    row(s);
  }

  std::string str() const {
    std::string out;
    for (const auto& c : comments_) out += c + "\n";
    out += body_;
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("CsvWriter: cannot open " + path.string());
    f << str();
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::string body_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }
  std::vector<double> numeric_column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw std::runtime_error("csv: missing column '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(std::stod(r[static_cast<std::size_t>(idx)]));
    return out;
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool header_done = false;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      table.columns = cells;
      header_done = true;
    } else {
      cells.resize(table.columns.size());
      table.rows.push_back(cells);
    }
  }
  return table;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("fnv1a64_file: cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return fnv1a64(os.str());
}

}  // namespace htbnp
