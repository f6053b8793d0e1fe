#include "flexsched/csv.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "flexsched/errors.hpp"

namespace flexsched::csv {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    cells.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

}  // namespace

std::size_t Table::column_index(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw InvalidArgument("csv: missing column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::vector<double> Table::column(std::string_view name) const {
  const auto idx = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[idx]);
  return out;
}

Table parse(std::istream& in, const std::string& source_name) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      const auto body = trim(view.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos && table.header.empty()) {
        table.meta[std::string(trim(body.substr(0, eq)))] =
            std::string(trim(body.substr(eq + 1)));
      }
      continue;
    }
    const auto cells = split(view);
    if (table.header.empty()) {
      for (auto c : cells) table.header.emplace_back(c);
      continue;
    }
    if (cells.size() != table.header.size()) {
      std::ostringstream msg;
      msg << source_name << ":" << line_no << ": expected "
          << table.header.size() << " cells, got " << cells.size();
      throw InvalidArgument(msg.str());
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto cell = cells[i];
      const auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), row[i]);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        std::ostringstream msg;
        msg << source_name << ":" << line_no << ": column '"
            << table.header[i] << "' is not numeric: '" << cell << "'";
        throw InvalidArgument(msg.str());
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) {
    throw InvalidArgument(source_name + ": no header row");
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse(in, path.string());
}

std::string format(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  out_.open(path);
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
}

void Writer::meta(std::string_view key, std::string_view value) {
  out_ << "# " << key << "=" << value << "\n";
}

void Writer::header(std::span<const std::string> columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
}

void Writer::header(std::initializer_list<std::string_view> columns) {
  bool first = true;
  for (auto c : columns) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void Writer::row(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format(values[i]);
  }
  out_ << '\n';
}

void Writer::raw_row(std::span<const std::string> cells) { header(cells); }

void Writer::close() {
  out_.close();
  if (out_.fail()) throw IoError("failed writing '" + path_.string() + "'");
}

}  // namespace flexsched::csv
