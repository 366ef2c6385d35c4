#pragma once

#include <map>
#include <string>
#include <vector>

namespace ssc {

// Flat key=value text. '#' starts a comment, blank lines are skipped, keys and
// values are trimmed. Duplicate keys are an error.
std::map<std::string, std::string> read_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Typed lookup helpers. Each consumes the key from the map so callers can
// reject leftovers as unknown keys.
bool take_string(std::map<std::string, std::string>& kv, const std::string& key,
                 std::string& out);
bool take_double(std::map<std::string, std::string>& kv, const std::string& key,
                 double& out);
bool take_int(std::map<std::string, std::string>& kv, const std::string& key, int& out);
bool take_u64(std::map<std::string, std::string>& kv, const std::string& key,
              std::uint64_t& out);

// Splits a value on whitespace and parses every token as double.
std::vector<double> parse_doubles(const std::string& value, const std::string& key);

}  // namespace ssc
