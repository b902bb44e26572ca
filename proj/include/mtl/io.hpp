#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "mtl/metrics.hpp"

namespace mtl {

/// Builds CSV text in memory. Numbers use the shortest text that round-trips exactly.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& add(const std::string& s);
  CsvTable& add(const char* s) { return add(std::string(s)); }
  CsvTable& add(double v);
  CsvTable& add(long v);
  CsvTable& add(int v) { return add(static_cast<long>(v)); }
  CsvTable& add(std::uint64_t v);

  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_double(double v);

/// SHA-1 over "blob <size>\0<content>", as `git hash-object` computes it.
std::string git_blob_hash(const std::string& content);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

std::string to_json(const RunRecord& r);
RunRecord run_record_from_json(const std::string& text);
std::string to_json(const std::vector<RunRecord>& records);
std::vector<RunRecord> run_records_from_json(const std::string& text);

}  // namespace mtl
