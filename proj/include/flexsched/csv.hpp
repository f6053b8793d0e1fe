#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flexsched::csv {

/// Numeric CSV table. Lines of the form "# key=value" before the header are
/// collected as metadata; other '#' lines are ignored.
struct Table {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index by name; throws InvalidArgument when absent.
  std::size_t column_index(std::string_view name) const;
  bool has_column(std::string_view name) const;
  std::vector<double> column(std::string_view name) const;
};

Table parse(std::istream& in, const std::string& source_name = "<stream>");
Table read(const std::filesystem::path& path);

/// Shortest representation that round-trips exactly.
std::string format(double value);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void meta(std::string_view key, std::string_view value);
  void header(std::span<const std::string> columns);
  void header(std::initializer_list<std::string_view> columns);
  void row(std::span<const double> values);

  /// Mixed row: each cell already formatted.
  void raw_row(std::span<const std::string> cells);

  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace flexsched::csv
