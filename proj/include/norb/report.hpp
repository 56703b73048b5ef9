#pragma once
// CSV data files with a versioned schema line and a JSON run report. Both
// serialize through shortest round-trip number formatting so a rerun under
// the same seed reproduces the artifact byte for byte.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace norb {

std::string format_double(double v);

// Layout: "#schema,<kind>,v<version>", an optional "#meta,k,v,..." line,
// a column header, then numeric rows.
struct CsvDoc {
  std::string kind;
  int version = 1;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void set_meta(const std::string& key, double value);
  double meta_num(const std::string& key, double fallback) const;
};

std::string csv_to_string(const CsvDoc& d);
void write_csv(const std::string& path, const CsvDoc& d);
CsvDoc read_csv(const std::string& path);

// Accumulates configuration echo, hashes, and tolerance checks; pass is the
// conjunction of every check added.
class Report {
 public:
  nlohmann::json& root() { return j_; }
  const nlohmann::json& root() const { return j_; }

  // pass iff lo <= value <= hi; bounds may be infinite
  void add_check(const std::string& name, double value, double lo, double hi);
  void add_note(const std::string& name, double value);
  void add_artifact(const std::string& path);
  bool all_pass() const { return all_pass_; }
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  nlohmann::json j_;
  bool all_pass_ = true;
};

}  // namespace norb
