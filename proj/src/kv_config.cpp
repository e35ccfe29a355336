#include "ntg/kv_config.hpp"

#include <cmath>
#include <set>

#include "ntg/road_graph.hpp"

namespace ntg {

namespace {
std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string &text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second)
      throw DataError("config line " + std::to_string(line_no) + ": repeated key " + key);
    out.emplace_back(key, value);
  }
  return out;
}

int kv_int(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size() || x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception &) {
    throw DataError("config: " + key + " expects an integer, got \"" + v + "\"");
  }
}

std::uint64_t kv_u64(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception &) {
    throw DataError("config: " + key + " expects a non-negative integer, got \"" + v + "\"");
  }
}

double kv_double(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception &) {
    throw DataError("config: " + key + " expects a number, got \"" + v + "\"");
  }
}

bool kv_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("config: " + key + " expects true/false, got \"" + v + "\"");
}

}  // namespace ntg
