#include "lookahead/kv.hpp"

#include <fstream>
#include <sstream>

#include "lookahead/errors.hpp"

namespace lookahead {

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got \"" + line + "\"");
        }
        const std::string key = line.substr(0, eq);
        if (kv.count(key)) {
            throw ConfigError("config: duplicate key \"" + key + "\"");
        }
        kv[key] = line.substr(eq + 1);
    }
    return kv;
}

std::string serialize_kv(const std::map<std::string, std::string>& kv) {
    std::ostringstream out;
    for (const auto& [k, v] : kv) {
        out << k << '=' << v << '\n';
    }
    return out.str();
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv(buf.str());
}

void save_kv_file(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write config file " + path);
    }
    out << serialize_kv(kv);
    if (!out) {
        throw ConfigError("write failed for " + path);
    }
}

std::string kv_required(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw ConfigError("config: missing required key \"" + key + "\"");
    }
    return it->second;
}

std::string kv_or(const std::map<std::string, std::string>& kv, const std::string& key,
                  const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

namespace {

template <class F>
auto parse_or_throw(const std::string& key, const std::string& val, F&& f) {
    try {
        std::size_t used = 0;
        auto out = f(val, &used);
        if (used != val.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad value for \"" + key + "\": \"" + val + "\"");
    }
}

} // namespace

long kv_long_or(const std::map<std::string, std::string>& kv, const std::string& key, long fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    return parse_or_throw(key, it->second,
                          [](const std::string& s, std::size_t* n) { return std::stol(s, n); });
}

std::uint64_t kv_u64_or(const std::map<std::string, std::string>& kv, const std::string& key,
                        std::uint64_t fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    return parse_or_throw(key, it->second, [](const std::string& s, std::size_t* n) {
        return static_cast<std::uint64_t>(std::stoull(s, n));
    });
}

double kv_double_or(const std::map<std::string, std::string>& kv, const std::string& key,
                    double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    return parse_or_throw(key, it->second,
                          [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
}

bool kv_bool_or(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    if (it->second == "1" || it->second == "true") {
        return true;
    }
    if (it->second == "0" || it->second == "false") {
        return false;
    }
    throw ConfigError("config: bad boolean for \"" + key + "\": \"" + it->second + "\"");
}

} // namespace lookahead
