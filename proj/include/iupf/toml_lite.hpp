#pragma once

// Minimal TOML reader/writer covering the scenario schema: tables, arrays of
// tables, dotted keys, strings, integers, floats, booleans and inline arrays.
// Documents are held as ordered JSON trees so key order survives a round trip.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace iupf::toml {

using Document = nlohmann::ordered_json;

/// Throws ParseError (with the 1-based line) on malformed input.
Document parse(std::string_view text);
Document parse_file(const std::filesystem::path& path);

/// Parses one value as it would appear right of '='. Text that is not a
/// valid literal is taken as a bare string.
Document parse_value(std::string_view text);

/// Serializes scalars first, then tables, then arrays of tables.
std::string dump(const Document& doc);

/// Shortest round-trip text for a float, always marked as a float.
std::string format_float(double v);

}  // namespace iupf::toml
