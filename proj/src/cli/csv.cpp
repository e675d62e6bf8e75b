#include "cli/csv.hpp"

#include "rircoh/cli.hpp"
#include "rircoh/errors.hpp"

#include <fstream>

namespace rircoh::cli {

CsvWriter::CsvWriter(std::initializer_list<std::string_view> header) {
  for (const auto h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(std::string_view value) {
  if (row_open_) text_ += ',';
  text_ += value;
  row_open_ = true;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_number(value)); }

CsvWriter& CsvWriter::end_row() {
  text_ += '\n';
  row_open_ = false;
  return *this;
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text_file(path, text_); }

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace rircoh::cli
