#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ntg {

/// Parses flat key=value text. Blank lines and '#' comments are skipped;
/// whitespace around keys and values is trimmed. Throws DataError with the
/// line number on malformed lines or repeated keys.
std::vector<std::pair<std::string, std::string>> parse_kv(const std::string &text);

/// Value conversions that throw DataError naming the key.
int kv_int(const std::string &key, const std::string &v);
std::uint64_t kv_u64(const std::string &key, const std::string &v);
double kv_double(const std::string &key, const std::string &v);
bool kv_bool(const std::string &key, const std::string &v);

}  // namespace ntg
