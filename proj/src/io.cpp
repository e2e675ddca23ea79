#include "baker/io.hpp"

#include <cmath>
#include <cstdio>

#include "baker/errors.hpp"

namespace baker {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  // + 0.0 turns -0 into 0
  std::snprintf(buf, sizeof buf, "%.17g", x + 0.0);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot open " + path + " for writing");
  for (const auto& h : header) add(h);
  end_row();
}

CsvWriter::~CsvWriter() {
  if (out_.is_open()) out_.close();
}

CsvWriter& CsvWriter::add(const std::string& cell) {
  if (cells_ > 0) out_ << ',';
  out_ << cell;
  ++cells_;
  return *this;
}

CsvWriter& CsvWriter::add(double x) { return add(format_real(x)); }

CsvWriter& CsvWriter::add(long long x) { return add(std::to_string(x)); }

void CsvWriter::end_row() {
  if (cells_ != columns_) throw IoError(path_ + ": row has " + std::to_string(cells_) + " cells, expected " +
                                        std::to_string(columns_));
  out_ << '\n';
  cells_ = 0;
  if (!out_) throw IoError("write failed: " + path_);
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw IoError("write failed: " + path_);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (out.fail()) throw IoError("write failed: " + path);
}

}  // namespace baker
