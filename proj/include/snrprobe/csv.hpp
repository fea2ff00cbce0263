#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace snrprobe {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a whole field; throws CorruptFile on trailing garbage.
double parse_double(const std::string& field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> numeric_column(const std::string& name) const;
};

/// Comma-separated, `\n` line endings, no quoting (fields must not contain
/// commas, quotes or newlines).
std::string to_csv(const CsvTable& table);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

/// Rejects ragged rows and quoted fields.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace snrprobe
