#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace caudit::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
// Blank lines are skipped. Throws ParseError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
std::string join(const std::vector<std::string>& fields);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace caudit::csv
