#include "mtl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include <json.hpp>

namespace mtl {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest text that parses back to the same double.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  if (!rows_.empty() && rows_.back().size() != header_.size()) {
    throw std::logic_error("csv row has " + std::to_string(rows_.back().size()) + " cells, header has " +
                           std::to_string(header_.size()));
  }
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(const std::string& s) {
  if (rows_.empty()) throw std::logic_error("csv: add() before row()");
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    rows_.back().push_back(q + "\"");
  } else {
    rows_.back().push_back(s);
  }
  return *this;
}

CsvTable& CsvTable::add(double v) { return add(format_double(v)); }
CsvTable& CsvTable::add(long v) { return add(std::to_string(v)); }
CsvTable& CsvTable::add(std::uint64_t v) { return add(std::to_string(v)); }

std::string CsvTable::str() const {
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    return line + "\n";
  };
  std::string out = join(header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) throw std::logic_error("csv row width differs from header");
    out += join(r);
  }
  return out;
}

std::string git_blob_hash(const std::string& content) {
  const std::string head = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha1: out of memory");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) && EVP_DigestUpdate(ctx, head.data(), head.size()) &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

// Doubles are stored as shortest round-trip strings so non-finite values survive and the
// round trip is exact.
json num(double v) { return format_double(v); }
double num(const json& j) { return std::stod(j.get<std::string>()); }

json record_json(const RunRecord& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["method"] = r.method;
  j["optimizer"] = r.optimizer;
  j["lr"] = num(r.lr);
  j["metric_names"] = r.metric_names;
  j["higher_is_better"] = r.higher_is_better;
  j["val_metrics"] = json::array();
  for (const auto& epoch : r.val_metrics) {
    json e = json::array();
    for (double v : epoch) e.push_back(num(v));
    j["val_metrics"].push_back(e);
  }
  j["val_delta_m"] = json::array();
  for (double v : r.val_delta_m) j["val_delta_m"].push_back(num(v));
  j["best_epoch"] = r.best_epoch;
  j["test_metrics"] = json::array();
  for (double v : r.test_metrics) j["test_metrics"].push_back(num(v));
  j["test_delta_m"] = num(r.test_delta_m);
  j["failed"] = r.failed;
  j["failure"] = r.failure;
  return j;
}

RunRecord record_from(const json& j) {
  RunRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.method = j.at("method").get<std::string>();
  r.optimizer = j.at("optimizer").get<std::string>();
  r.lr = num(j.at("lr"));
  r.metric_names = j.at("metric_names").get<std::vector<std::string>>();
  r.higher_is_better = j.at("higher_is_better").get<std::vector<bool>>();
  for (const auto& e : j.at("val_metrics")) {
    std::vector<double> epoch;
    for (const auto& v : e) epoch.push_back(num(v));
    r.val_metrics.push_back(std::move(epoch));
  }
  for (const auto& v : j.at("val_delta_m")) r.val_delta_m.push_back(num(v));
  r.best_epoch = j.at("best_epoch").get<int>();
  for (const auto& v : j.at("test_metrics")) r.test_metrics.push_back(num(v));
  r.test_delta_m = num(j.at("test_delta_m"));
  r.failed = j.at("failed").get<bool>();
  r.failure = j.at("failure").get<std::string>();
  return r;
}

}  // namespace

std::string to_json(const RunRecord& r) { return record_json(r).dump(2); }

RunRecord run_record_from_json(const std::string& text) { return record_from(json::parse(text)); }

std::string to_json(const std::vector<RunRecord>& records) {
  json j = json::array();
  for (const auto& r : records) j.push_back(record_json(r));
  return j.dump(2);
}

std::vector<RunRecord> run_records_from_json(const std::string& text) {
  std::vector<RunRecord> out;
  for (const auto& j : json::parse(text)) out.push_back(record_from(j));
  return out;
}

}  // namespace mtl
