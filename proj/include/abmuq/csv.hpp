#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace abmuq::csv {

// Plain comma-separated table with a header row. No quoting: every field
// this project writes is numeric or a bare identifier.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws ConfigError if absent.
  std::size_t column(std::string_view name) const;
};

Table parse(std::istream& in, const std::string& source = "<stream>");
Table read(const std::filesystem::path& path);

// Shortest representation that round-trips.
std::string format(double v);

double to_double(const std::string& field, const std::string& context);
std::uint64_t to_u64(const std::string& field, const std::string& context);
long long to_int(const std::string& field, const std::string& context);

// Writes header and rows; creates parent directories.
void write(const std::filesystem::path& path, const Table& table);

}  // namespace abmuq::csv
