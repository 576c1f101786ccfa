#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hybridmap/errors.hpp"

// Little-endian byte readers/writers shared by every on-disk format.
namespace hybridmap {

using Bytes = std::vector<uint8_t>;

inline void put_bytes(Bytes& out, const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename T>
inline void put_le(Bytes& out, T v) {
    static_assert(std::is_integral_v<T>);
    for (size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<uint8_t>(static_cast<std::make_unsigned_t<T>>(v) >> (8 * i)));
}

inline void put_f32(Bytes& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le<uint32_t>(out, bits);
}

inline void put_str(Bytes& out, const std::string& s) {
    put_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

// Cursor over a byte buffer; every read checks bounds and throws CorruptBlob.
struct ByteReader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;

    ByteReader(const uint8_t* data, size_t size) : p(data), n(size) {}
    explicit ByteReader(const Bytes& b) : p(b.data()), n(b.size()) {}

    void need(size_t k) const {
        if (pos + k > n) throw CorruptBlob("truncated input (" + std::to_string(n) + " bytes)");
    }

    template <typename T>
    T le() {
        static_assert(std::is_integral_v<T>);
        need(sizeof(T));
        std::make_unsigned_t<T> v = 0;
        for (size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::make_unsigned_t<T>>(p[pos + i]) << (8 * i);
        pos += sizeof(T);
        return static_cast<T>(v);
    }

    float f32() {
        uint32_t bits = le<uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str() {
        uint32_t len = le<uint32_t>();
        need(len);
        std::string s(reinterpret_cast<const char*>(p + pos), len);
        pos += len;
        return s;
    }

    void raw(void* dst, size_t k) {
        need(k);
        std::memcpy(dst, p + pos, k);
        pos += k;
    }

    bool done() const { return pos == n; }
};

inline void write_file(const std::filesystem::path& path, const Bytes& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for write: " + path.string());
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error("write failed: " + path.string());
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for write: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw Error("write failed: " + path.string());
}

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw MissingComponent("cannot open: " + path.string());
    auto size = f.tellg();
    f.seekg(0);
    Bytes data(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(data.data()), size);
    if (!f) throw Error("read failed: " + path.string());
    return data;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    Bytes b = read_file(path);
    return std::string(b.begin(), b.end());
}

// FNV-1a, used for stable content hashes (relation fingerprints, arch ids).
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

template <typename T>
inline uint64_t fnv1a_value(T v, uint64_t h = 14695981039346656037ull) {
    static_assert(std::is_trivially_copyable_v<T>);
    return fnv1a(&v, sizeof(T), h);
}

} // namespace hybridmap
