#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace rircoh::cli {

// Comma-separated, LF-terminated rows. Cells are written verbatim; callers
// only pass numbers and identifiers without commas or quotes.
class CsvWriter {
public:
  explicit CsvWriter(std::initializer_list<std::string_view> header);

  CsvWriter& cell(std::string_view value);
  CsvWriter& cell(double value);
  CsvWriter& end_row();

  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

private:
  std::string text_;
  bool row_open_ = false;
};

void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace rircoh::cli
