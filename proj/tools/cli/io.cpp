#include "cli/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace flipscale::cli {

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw std::logic_error("table row has " + std::to_string(row.size()) +
                           " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string cell_text(const Cell& c) {
  struct {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const { return s; }
  } visit;
  return std::visit(visit, c);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    if (j) out += ',';
    out += csv_field(t.columns[j]);
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += csv_field(cell_text(row[j]));
    }
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json to_json(const Table& t) {
  nlohmann::ordered_json j;
  j["schema"] = kTableSchema;
  j["columns"] = t.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& c : row) {
      if (std::holds_alternative<std::monostate>(c)) {
        r.push_back(nullptr);
      } else if (const double* d = std::get_if<double>(&c)) {
        if (std::isfinite(*d)) {
          r.push_back(*d);
        } else {
          r.push_back(format_double(*d));
        }
      } else if (const auto* i = std::get_if<std::int64_t>(&c)) {
        r.push_back(*i);
      } else {
        r.push_back(std::get<std::string>(c));
      }
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw std::runtime_error("text after closing quote at byte " + std::to_string(i));
        }
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"') {
      if (field_started && !field.empty()) {
        throw std::runtime_error("quote inside unquoted field at byte " + std::to_string(i));
      }
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
      ++i;
    } else if (c == '\r' || c == '\n') {
      end_record();
      i += (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ? 2 : 1;
    } else {
      field += c;
      field_started = true;
      ++i;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

namespace {

void check_csv(const std::string& text, std::vector<std::string>& problems) {
  std::vector<std::vector<std::string>> records;
  try {
    records = parse_csv(text);
  } catch (const std::exception& e) {
    problems.push_back(std::string("CSV: ") + e.what());
    return;
  }
  if (records.empty()) {
    problems.push_back("CSV: missing header row");
    return;
  }
  const auto& header = records.front();
  std::set<std::string> names;
  for (const auto& h : header) {
    if (h.empty()) problems.push_back("CSV: empty column name");
    if (!names.insert(h).second) problems.push_back("CSV: duplicate column " + h);
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      problems.push_back("CSV: record " + std::to_string(r) + " has " +
                         std::to_string(records[r].size()) + " fields, header has " +
                         std::to_string(header.size()));
    }
  }
}

void require(bool ok, const std::string& what, std::vector<std::string>& problems) {
  if (!ok) problems.push_back(what);
}

bool is_hex64(const nlohmann::json& v) {
  if (!v.is_string()) return false;
  const auto s = v.get<std::string>();
  return s.size() == 64 && s.find_first_not_of("0123456789abcdef") == std::string::npos;
}

void check_table(const nlohmann::json& j, std::vector<std::string>& problems) {
  require(j.contains("columns") && j["columns"].is_array() && !j["columns"].empty(),
          "table: columns must be a nonempty array", problems);
  require(j.contains("rows") && j["rows"].is_array(), "table: rows must be an array",
          problems);
  if (!problems.empty()) return;
  for (const auto& c : j["columns"]) require(c.is_string(), "table: column names must be strings", problems);
  const std::size_t width = j["columns"].size();
  std::size_t r = 0;
  for (const auto& row : j["rows"]) {
    if (!row.is_array() || row.size() != width) {
      problems.push_back("table: row " + std::to_string(r) + " does not match the columns");
    } else {
      for (const auto& c : row) {
        require(c.is_number() || c.is_string() || c.is_null() || c.is_boolean(),
                "table: row " + std::to_string(r) + " has a nested value", problems);
      }
    }
    ++r;
  }
}

void check_manifest(const nlohmann::json& j, const std::filesystem::path& where,
                    std::vector<std::string>& problems) {
  for (const char* key : {"version", "command", "started_utc"}) {
    require(j.contains(key) && j[key].is_string(), std::string("manifest: ") + key + " must be a string", problems);
  }
  require(j.contains("args") && j["args"].is_array(), "manifest: args must be an array", problems);
  require(j.contains("parameters") && j["parameters"].is_object(), "manifest: parameters must be an object", problems);
  require(j.contains("seed") && j["seed"].is_number_unsigned(), "manifest: seed must be an unsigned integer", problems);
  require(j.contains("wall_clock_seconds") && j["wall_clock_seconds"].is_number() &&
              j["wall_clock_seconds"].get<double>() >= 0,
          "manifest: wall_clock_seconds must be a nonnegative number", problems);
  require(j.contains("summary") && j["summary"].is_object(), "manifest: summary must be an object", problems);
  require(j.contains("outputs") && j["outputs"].is_array(), "manifest: outputs must be an array", problems);
  if (!problems.empty()) return;
  for (const auto& a : j["args"]) require(a.is_string(), "manifest: args must be strings", problems);
  for (const auto& o : j["outputs"]) {
    if (!o.is_object() || !o.contains("path") || !o["path"].is_string() ||
        !o.contains("sha256") || !is_hex64(o["sha256"]) || !o.contains("bytes") ||
        !o["bytes"].is_number_unsigned()) {
      problems.push_back("manifest: malformed output entry");
      continue;
    }
    const auto file = where.parent_path() / o["path"].get<std::string>();
    std::string bytes;
    try {
      bytes = read_file(file);
    } catch (const std::exception& e) {
      problems.push_back(std::string("manifest: ") + e.what());
      continue;
    }
    require(bytes.size() == o["bytes"].get<std::size_t>() && sha256_hex(bytes) == o["sha256"],
            "manifest: digest mismatch for " + file.string(), problems);
  }
}

void check_function(const nlohmann::json& j, std::vector<std::string>& problems) {
  require(j.contains("mode") && j["mode"].is_string(), "function: mode must be a string", problems);
  require(j.contains("n") && j["n"].is_number_unsigned(), "function: n must be an unsigned integer", problems);
  require(j.contains("a_n") && j["a_n"].is_number(), "function: a_n must be a number", problems);
  require(j.contains("atoms") && j["atoms"].is_array() && !j["atoms"].empty(),
          "function: atoms must be a nonempty array", problems);
  require(j.contains("global_counts") && j["global_counts"].is_array(),
          "function: global_counts must be an array", problems);
}

}  // namespace

std::vector<std::string> validate_file(const std::filesystem::path& p) {
  std::vector<std::string> problems;
  std::string text;
  try {
    text = read_file(p);
  } catch (const std::exception& e) {
    return {e.what()};
  }
  if (p.extension() == ".csv") {
    check_csv(text, problems);
    return problems;
  }
  if (p.extension() != ".json") return {"unknown file type: " + p.string()};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    return {std::string("JSON: ") + e.what()};
  }
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
    return {"JSON: missing schema tag"};
  }
  const auto schema = j["schema"].get<std::string>();
  if (schema == kTableSchema) {
    check_table(j, problems);
  } else if (schema == kManifestSchema) {
    check_manifest(j, p, problems);
  } else if (schema == kFunctionSchema) {
    check_function(j, problems);
  } else {
    problems.push_back("JSON: unknown schema " + schema);
  }
  return problems;
}

}  // namespace flipscale::cli
