#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace wrcp {

using KeyValues = std::map<std::string, std::string>;

/// Flat `key=value` text, one pair per line; `#` starts a comment line.
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const KeyValues& values, const std::filesystem::path& path);

double kv_double(const KeyValues& kv, const std::string& key);
std::size_t kv_size(const KeyValues& kv, const std::string& key);
std::uint64_t kv_u64(const KeyValues& kv, const std::string& key);

} // namespace wrcp
