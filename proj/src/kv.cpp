#include "wrcp/kv.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>

#include "wrcp/error.hpp"

namespace wrcp {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::string& require(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw DomainError("missing key '" + key + "'");
  }
  return it->second;
}

} // namespace

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open " + path.string());
  }
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("expected key=value in " + path.string(), line_no);
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

void write_key_values(const KeyValues& values, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw std::runtime_error("cannot write " + path.string());
  }
  for (const auto& [k, v] : values) {
    os << k << '=' << v << '\n';
  }
  if (!os) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

double kv_double(const KeyValues& kv, const std::string& key) {
  const auto& s = require(kv, key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DomainError("key '" + key + "': not a number: " + s);
  }
  return v;
}

std::uint64_t kv_u64(const KeyValues& kv, const std::string& key) {
  const auto& s = require(kv, key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DomainError("key '" + key + "': not a non-negative integer: " + s);
  }
  return v;
}

std::size_t kv_size(const KeyValues& kv, const std::string& key) {
  return static_cast<std::size_t>(kv_u64(kv, key));
}

} // namespace wrcp
