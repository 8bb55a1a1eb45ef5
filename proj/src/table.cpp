#include "mkvlab/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mkvlab/error.hpp"

namespace mkv {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double x = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e || b == e) throw InvalidArgument("not a number: '" + s + "'");
  return x;
}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != header_.size()) throw InvalidArgument("row width does not match the header");
  std::vector<std::string> r;
  r.reserve(row.size());
  for (auto& c : row) r.push_back(std::move(c.text));
  rows_.push_back(std::move(r));
}

namespace {

void join(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::string CsvTable::str() const {
  std::string out;
  join(out, header_);
  for (const auto& r : rows_) join(out, r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_text(path, str()); }

void Summary::set(const std::string& key, Cell value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) throw InvalidArgument("bad summary key");
  if (value.text.find('\n') != std::string::npos) throw InvalidArgument("summary values are single-line");
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value.text);
      return;
    }
  entries_.emplace_back(key, std::move(value.text));
}

const std::string& Summary::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw InvalidArgument("no summary key '" + key + "'");
}

bool Summary::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return true;
  return false;
}

std::string Summary::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void Summary::write(const std::string& path) const { write_text(path, str()); }

Summary Summary::parse(const std::string& text) {
  Summary s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("summary line without '=': " + line);
    s.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return s;
}

}  // namespace mkv
