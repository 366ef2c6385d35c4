#include "ssc/kv.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssc {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line.substr(0, line.find('#')));
    if (s.empty()) continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + s + "'");
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
    }
    if (!kv.emplace(key, value).second) {
      throw std::invalid_argument("duplicate key: " + key);
    }
  }
  return kv;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_kv_text(buf.str());
}

bool take_string(std::map<std::string, std::string>& kv, const std::string& key,
                 std::string& out) {
  auto it = kv.find(key);
  if (it == kv.end()) return false;
  out = it->second;
  kv.erase(it);
  return true;
}

bool take_double(std::map<std::string, std::string>& kv, const std::string& key,
                 double& out) {
  std::string s;
  if (!take_string(kv, key, s)) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument(key + ": not a number: '" + s + "'");
  return true;
}

bool take_int(std::map<std::string, std::string>& kv, const std::string& key, int& out) {
  std::string s;
  if (!take_string(kv, key, s)) return false;
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": not an integer: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument(key + ": not an integer: '" + s + "'");
  out = static_cast<int>(v);
  return true;
}

bool take_u64(std::map<std::string, std::string>& kv, const std::string& key,
              std::uint64_t& out) {
  std::string s;
  if (!take_string(kv, key, s)) return false;
  std::size_t used = 0;
  try {
    out = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": not an unsigned integer: '" + s + "'");
  }
  if (used != s.size()) {
    throw std::invalid_argument(key + ": not an unsigned integer: '" + s + "'");
  }
  return true;
}

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
  std::istringstream ss(value);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  ss.clear();
  std::string rest;
  if (ss >> rest) {
    throw std::invalid_argument(key + ": expected numbers, got '" + rest + "'");
  }
  return out;
}

}  // namespace ssc
