#pragma once

// Tables, CSV/JSON serialization, digests and the output validators used by
// the command-line tool.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace flipscale::cli {

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

inline constexpr const char* kTableSchema = "flipscale.table/1";
inline constexpr const char* kManifestSchema = "flipscale.manifest/1";
inline constexpr const char* kFunctionSchema = "flipscale.function/1";

// Shortest decimal text that reads back to the same double; "inf", "-inf"
// and "nan" for non-finite values.
std::string format_double(double v);

// Header row plus one line per row; fields containing a comma, quote or
// line break are quoted, with embedded quotes doubled.
std::string to_csv(const Table& t);
// {"schema": ..., "columns": [...], "rows": [[...], ...]}; non-finite
// numbers become the strings "inf", "-inf", "nan"; empty cells are null.
nlohmann::ordered_json to_json(const Table& t);

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& bytes);

// Parsed CSV records; throws std::runtime_error on malformed quoting.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Returns an empty list when the file is valid, otherwise the problems.
// CSV files need a header and a constant field count; JSON files must
// carry one of the schemas above. Manifests also have their output
// digests checked against the files next to them.
std::vector<std::string> validate_file(const std::filesystem::path& p);

}  // namespace flipscale::cli
