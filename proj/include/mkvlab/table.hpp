#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mkv {

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);
/// Strict parse of a whole string; throws InvalidArgument.
double parse_double(const std::string& s);

struct Cell {
  std::string text;
  Cell(double x) : text(format_double(x)) {}  // NOLINT
  Cell(int x) : text(std::to_string(x)) {}    // NOLINT
  Cell(long x) : text(std::to_string(x)) {}   // NOLINT
  Cell(long long x) : text(std::to_string(x)) {}               // NOLINT
  Cell(unsigned long x) : text(std::to_string(x)) {}           // NOLINT
  Cell(unsigned long long x) : text(std::to_string(x)) {}      // NOLINT
  Cell(bool b) : text(b ? "1" : "0") {}                        // NOLINT
  Cell(std::string s) : text(std::move(s)) {}                  // NOLINT
  Cell(const char* s) : text(s) {}                             // NOLINT
};

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<Cell> row);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// key=value lines in insertion order.
class Summary {
 public:
  void set(const std::string& key, Cell value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string str() const;
  void write(const std::string& path) const;
  static Summary parse(const std::string& text);

  bool operator==(const Summary&) const = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace mkv
