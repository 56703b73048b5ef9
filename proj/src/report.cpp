#include "norb/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "norb/util.hpp"

namespace norb {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void CsvDoc::set_meta(const std::string& key, double value) {
  meta.push_back({key, format_double(value)});
}

double CsvDoc::meta_num(const std::string& key, double fallback) const {
  for (const auto& [k, v] : meta)
    if (k == key) return std::strtod(v.c_str(), nullptr);
  return fallback;
}

std::string csv_to_string(const CsvDoc& d) {
  std::string out = "#schema," + d.kind + ",v" + std::to_string(d.version) + "\n";
  if (!d.meta.empty()) {
    out += "#meta";
    for (const auto& [k, v] : d.meta) out += "," + k + "," + v;
    out += "\n";
  }
  for (std::size_t c = 0; c < d.columns.size(); ++c)
    out += (c ? "," : "") + d.columns[c];
  out += "\n";
  for (const auto& row : d.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ",";
      out += format_double(row[c]);
    }
    out += "\n";
  }
  return out;
}

void write_csv(const std::string& path, const CsvDoc& d) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot write " + path);
  f << csv_to_string(d);
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

CsvDoc read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw config_error("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = split_commas(line);
  if (head.size() != 3 || head[0] != "#schema")
    throw config_error("missing #schema line in " + path);
  if (head[2] != "v1")
    throw config_error("unsupported schema version " + head[2] + " in " + path);
  CsvDoc d;
  d.kind = head[1];
  if (!std::getline(f, line)) throw config_error("truncated file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#meta", 0) == 0) {
    auto toks = split_commas(line);
    for (std::size_t i = 1; i + 1 < toks.size(); i += 2)
      d.meta.push_back({toks[i], toks[i + 1]});
    if (!std::getline(f, line)) throw config_error("truncated file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  }
  d.columns = split_commas(line);
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_commas(line);
    if (toks.size() != d.columns.size())
      throw config_error("ragged row in " + path);
    std::vector<double> row;
    for (const auto& t : toks) row.push_back(std::strtod(t.c_str(), nullptr));
    d.rows.push_back(std::move(row));
  }
  return d;
}

void Report::add_check(const std::string& name, double value, double lo,
                       double hi) {
  const bool pass = std::isfinite(value) && value >= lo && value <= hi;
  nlohmann::json c;
  c["name"] = name;
  c["value"] = value;
  if (std::isfinite(lo)) c["lo"] = lo;
  if (std::isfinite(hi)) c["hi"] = hi;
  c["pass"] = pass;
  j_["checks"].push_back(c);
  all_pass_ = all_pass_ && pass;
}

void Report::add_note(const std::string& name, double value) {
  j_["notes"][name] = value;
}

void Report::add_artifact(const std::string& path) {
  j_["artifacts"].push_back(path);
}

std::string Report::to_string() const {
  nlohmann::json out = j_;
  out["pass"] = all_pass_;
  return out.dump(2) + "\n";
}

void Report::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot write " + path);
  f << to_string();
}

}  // namespace norb
