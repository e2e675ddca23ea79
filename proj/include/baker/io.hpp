#pragma once

// CSV output with round-trip precision.

#include <fstream>
#include <string>
#include <vector>

namespace baker {

/// 17 significant digits ("%.17g"); "nan", "inf", "-inf" for non-finite.
std::string format_real(double x);

/// Writes a header line and rows, "," separated, "\n" terminated.  Throws
/// IoError (with the path) when the file cannot be written.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& add(const std::string& cell);
  CsvWriter& add(double x);
  CsvWriter& add(long long x);
  CsvWriter& add(int x) { return add(static_cast<long long>(x)); }
  void end_row();
  void close();

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t cells_ = 0;
};

/// Writes `content` to `path` verbatim (binary mode).
void write_file(const std::string& path, const std::string& content);

}  // namespace baker
