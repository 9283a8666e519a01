#include "psychfm/io.hpp"

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "psychfm/error.hpp"

namespace psychfm::io {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view junk = " \t\r\n\"";
  while (!s.empty() && junk.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && junk.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && ptr == s.data() + s.size()) return v;
  // Integral values written as reals ("3.0") are accepted.
  if (auto r = parse_real(s); r && std::floor(*r) == *r && std::abs(*r) < 9.0e15)
    return static_cast<long long>(*r);
  return std::nullopt;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  std::string s(buf);
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

CsvTable CsvTable::read(const std::filesystem::path& path) { return parse(read_file(path)); }

CsvTable CsvTable::parse(std::string_view text) {
  CsvTable t;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name(trim(fields[i]));
        if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
        t.index_.emplace(name, i);
        t.header_.push_back(std::move(name));
      }
      have_header = true;
    } else {
      if (fields.size() != t.header_.size())
        throw RowError(line_no, "expected " + std::to_string(t.header_.size()) + " fields, got " +
                                    std::to_string(fields.size()));
      std::vector<std::string> row;
      row.reserve(fields.size());
      for (auto f : fields) row.emplace_back(trim(f));
      t.rows_.push_back(std::move(row));
      t.lines_.push_back(line_no);
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw FormatError("empty CSV: no header row");
  return t;
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t CsvTable::column(std::string_view name) const {
  if (auto c = find_column(name)) return *c;
  throw SchemaError(std::string(name));
}

std::string_view CsvTable::cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

double CsvTable::real(std::size_t row, std::size_t col) const {
  if (auto v = parse_real(rows_[row][col])) return *v;
  throw RowError(lines_[row], "cannot parse '" + rows_[row][col] + "' in column " + header_[col]);
}

long long CsvTable::integer(std::size_t row, std::size_t col) const {
  if (auto v = parse_int(rows_[row][col])) return *v;
  throw RowError(lines_[row],
                 "cannot parse integer '" + rows_[row][col] + "' in column " + header_[col]);
}

TokenReader::TokenReader(std::string text, std::string source)
    : text_(std::move(text)), source_(std::move(source)) {}

std::string TokenReader::next_line() {
  if (pos_ >= text_.size()) throw FormatError(source_ + ": unexpected end of file");
  auto end = text_.find('\n', pos_);
  if (end == std::string::npos) end = text_.size();
  std::string line = text_.substr(pos_, end - pos_);
  pos_ = end + 1;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool TokenReader::at_end() const {
  for (std::size_t i = pos_; i < text_.size(); ++i)
    if (!std::isspace(static_cast<unsigned char>(text_[i]))) return false;
  return true;
}

std::string TokenReader::next_token() {
  while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  if (pos_ >= text_.size()) throw FormatError(source_ + ": truncated (unexpected end of file)");
  const auto start = pos_;
  while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  return text_.substr(start, pos_ - start);
}

double TokenReader::next_real() {
  auto tok = next_token();
  if (auto v = parse_real(tok)) return *v;
  throw FormatError(source_ + ": bad number '" + tok + "'");
}

long long TokenReader::next_int() {
  auto tok = next_token();
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw FormatError(source_ + ": bad integer '" + tok + "'");
  return v;
}

std::vector<double> TokenReader::reals(std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(next_real());
  return out;
}

}  // namespace psychfm::io
