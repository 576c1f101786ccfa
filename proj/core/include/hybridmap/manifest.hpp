#pragma once

#include <map>
#include <string>

#include "hybridmap/errors.hpp"

namespace hybridmap {

// Canonical key=value text: one pair per line, keys sorted, LF line ends.
// Used by the hybrid manifest, baseline indexes, and config files.
using KvMap = std::map<std::string, std::string>;

inline std::string kv_serialize(const KvMap& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

inline KvMap kv_parse(const std::string& text) {
    KvMap kv;
    size_t pos = 0;
    size_t line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw CorruptManifest("line " + std::to_string(line_no) + ": missing '='");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline const std::string& kv_need(const KvMap& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw CorruptManifest("missing key: " + key);
    return it->second;
}

inline uint64_t kv_need_u64(const KvMap& kv, const std::string& key) {
    try {
        return std::stoull(kv_need(kv, key));
    } catch (const CorruptManifest&) {
        throw;
    } catch (...) {
        throw CorruptManifest("bad integer for key: " + key);
    }
}

inline int64_t kv_need_i64(const KvMap& kv, const std::string& key) {
    try {
        return std::stoll(kv_need(kv, key));
    } catch (const CorruptManifest&) {
        throw;
    } catch (...) {
        throw CorruptManifest("bad integer for key: " + key);
    }
}

inline double kv_need_double(const KvMap& kv, const std::string& key) {
    try {
        return std::stod(kv_need(kv, key));
    } catch (const CorruptManifest&) {
        throw;
    } catch (...) {
        throw CorruptManifest("bad number for key: " + key);
    }
}

} // namespace hybridmap
