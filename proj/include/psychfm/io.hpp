#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace psychfm::io {

/// Splits one CSV line on commas. Quoting is not supported; none of the
/// formats read here produce quoted fields.
std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

std::optional<double> parse_real(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest text that parses back to exactly the same double.
std::string format_real(double v);

/// Fixed-point text with the given number of decimals.
std::string format_fixed(double v, int decimals);

/// A header-indexed CSV file held in memory.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(std::string_view text);

  /// Column index for name, throwing SchemaError when absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  /// 1-based line number of data row i in the source text.
  std::size_t line_of(std::size_t i) const { return lines_[i]; }

  std::string_view cell(std::size_t row, std::size_t col) const;
  double real(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

std::string read_file(const std::filesystem::path& path);
/// Writes text atomically enough for our purposes; creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view text);

/// Whitespace-separated token reader over a model file, tracking line numbers
/// for error messages.
class TokenReader {
 public:
  TokenReader(std::string text, std::string source);
  std::string next_line();
  bool at_end() const;
  double next_real();
  long long next_int();
  std::vector<double> reals(std::size_t count);
  const std::string& source() const { return source_; }

 private:
  std::string next_token();
  std::string text_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace psychfm::io
