#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace lookahead {

// Flat key=value config text. Blank lines and '#' comments are skipped.
// Serialization sorts keys, so equal maps serialize to equal bytes.
std::map<std::string, std::string> parse_kv(const std::string& text);
std::string serialize_kv(const std::map<std::string, std::string>& kv);

std::map<std::string, std::string> load_kv_file(const std::string& path);
void save_kv_file(const std::string& path, const std::map<std::string, std::string>& kv);

// Typed lookups; the *_or forms return the fallback when the key is absent,
// the required forms throw ConfigError.
std::string kv_required(const std::map<std::string, std::string>& kv, const std::string& key);
std::string kv_or(const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::string& fallback);
long kv_long_or(const std::map<std::string, std::string>& kv, const std::string& key, long fallback);
std::uint64_t kv_u64_or(const std::map<std::string, std::string>& kv, const std::string& key,
                        std::uint64_t fallback);
double kv_double_or(const std::map<std::string, std::string>& kv, const std::string& key,
                    double fallback);
bool kv_bool_or(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback);

} // namespace lookahead
