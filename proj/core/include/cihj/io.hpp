#pragma once

#include <filesystem>
#include <string>

#include "cihj/control.hpp"
#include "cihj/grid.hpp"

namespace cihj {

/// Writes content to path via a temporary file and rename, so partially
/// written artifacts are never observed.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// FNV-1a 64-bit digest of a byte string, as "fnv1a:<hex>".
std::string fnv1a_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal for a double ("%.17g" fallback-free).
std::string format_double(double v);

/// One row per node: time, coordinates.
std::string path_to_csv(const GridPath& path);

/// Columns: node,time,value,s0..sK (full stopped-path samples).
std::string value_table_to_csv(const ValueTable& table);

/// Inverse of value_table_to_csv; validates against the given spec.
ValueTable value_table_from_csv(const GridSpec& spec, const std::string& csv);

} // namespace cihj
