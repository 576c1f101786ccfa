#include "hybridmap/codec.hpp"

#include <unordered_map>

#include <lzma.h>
#include <zlib.h>

#if __has_include(<zstd.h>)
#include <zstd.h>
#else
// Stable one-shot API, present in every libzstd since 1.3; declared here so a
// runtime-only libzstd.so.1 (no dev package) is sufficient.
extern "C" {
size_t ZSTD_compressBound(size_t srcSize);
size_t ZSTD_compress(void* dst, size_t dstCapacity, const void* src, size_t srcSize, int level);
size_t ZSTD_decompress(void* dst, size_t dstCapacity, const void* src, size_t srcSize);
unsigned long long ZSTD_getFrameContentSize(const void* src, size_t srcSize);
unsigned ZSTD_isError(size_t code);
}
#define ZSTD_CONTENTSIZE_UNKNOWN (0ULL - 1)
#define ZSTD_CONTENTSIZE_ERROR (0ULL - 2)
#endif

namespace hybridmap {

const char* codec_name(CodecId id) {
    switch (id) {
        case CodecId::none: return "none";
        case CodecId::dictionary: return "dict";
        case CodecId::gzip: return "gzip";
        case CodecId::zstandard: return "zstd";
        case CodecId::lzma: return "lzma";
    }
    throw Error("bad codec id");
}

CodecId codec_from_name(const std::string& name) {
    if (name == "none") return CodecId::none;
    if (name == "dict" || name == "dictionary") return CodecId::dictionary;
    if (name == "gzip") return CodecId::gzip;
    if (name == "zstd" || name == "zstandard") return CodecId::zstandard;
    if (name == "lzma" || name == "xz") return CodecId::lzma;
    throw Error("unknown codec: " + name);
}

int codec_effective_level(CodecId id, int level) {
    if (level > 0) return level;
    switch (id) {
        case CodecId::zstandard: return 1;
        case CodecId::gzip: return 6;
        case CodecId::lzma: return 6;
        default: return 0;
    }
}

// ---- dictionary codec -------------------------------------------------------
//
// Container: 'D' 'C' mode(u8). mode 0 = stored (raw payload follows).
// mode 1 = dict: sym_width(u8) code_width(u8) dict_count(u32) orig_len(u64),
// then dict_count*sym_width dictionary bytes, floor(orig_len/sym_width) codes
// of code_width bytes, and orig_len%sym_width raw tail bytes.
// Symbols are fixed-width byte groups; first-occurrence code assignment.

namespace {

constexpr size_t kDictCap = 65536;

uint64_t load_sym(const uint8_t* p, size_t w) {
    uint64_t v = 0;
    for (size_t i = 0; i < w; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

Bytes dict_compress(const Bytes& in) {
    Bytes best;
    best.reserve(in.size() + 3);
    best.push_back('D');
    best.push_back('C');
    best.push_back(0);
    best.insert(best.end(), in.begin(), in.end());

    for (size_t w : {8, 4, 2}) {
        if (in.size() < 2 * w) continue;
        size_t count = in.size() / w;
        std::unordered_map<uint64_t, uint32_t> codes;
        std::vector<uint64_t> dict;
        codes.reserve(1024);
        bool overflow = false;
        for (size_t i = 0; i < count; ++i) {
            uint64_t sym = load_sym(in.data() + i * w, w);
            if (codes.emplace(sym, static_cast<uint32_t>(dict.size())).second) {
                dict.push_back(sym);
                if (dict.size() > kDictCap) {
                    overflow = true;
                    break;
                }
            }
        }
        if (overflow) continue;
        size_t code_width = dict.size() <= 256 ? 1 : 2;
        size_t total = 3 + 1 + 1 + 4 + 8 + dict.size() * w + count * code_width + in.size() % w;
        if (total >= best.size()) continue;

        Bytes out;
        out.reserve(total);
        out.push_back('D');
        out.push_back('C');
        out.push_back(1);
        out.push_back(static_cast<uint8_t>(w));
        out.push_back(static_cast<uint8_t>(code_width));
        put_le<uint32_t>(out, static_cast<uint32_t>(dict.size()));
        put_le<uint64_t>(out, static_cast<uint64_t>(in.size()));
        for (uint64_t sym : dict)
            for (size_t b = 0; b < w; ++b) out.push_back(static_cast<uint8_t>(sym >> (8 * b)));
        for (size_t i = 0; i < count; ++i) {
            uint32_t c = codes[load_sym(in.data() + i * w, w)];
            out.push_back(static_cast<uint8_t>(c));
            if (code_width == 2) out.push_back(static_cast<uint8_t>(c >> 8));
        }
        out.insert(out.end(), in.begin() + count * w, in.end());
        best = std::move(out);
    }
    return best;
}

Bytes dict_decompress(const Bytes& in) {
    ByteReader r(in);
    if (r.le<uint8_t>() != 'D' || r.le<uint8_t>() != 'C')
        throw CorruptBlob("dictionary codec: bad magic");
    uint8_t mode = r.le<uint8_t>();
    if (mode == 0) {
        Bytes out(in.begin() + 3, in.end());
        return out;
    }
    if (mode != 1) throw CorruptBlob("dictionary codec: bad mode");
    size_t w = r.le<uint8_t>();
    size_t code_width = r.le<uint8_t>();
    if ((w != 2 && w != 4 && w != 8) || (code_width != 1 && code_width != 2))
        throw CorruptBlob("dictionary codec: bad widths");
    uint32_t dict_count = r.le<uint32_t>();
    uint64_t orig_len = r.le<uint64_t>();
    r.need(dict_count * w);
    const uint8_t* dict = r.p + r.pos;
    r.pos += dict_count * w;
    size_t count = orig_len / w;
    size_t tail = orig_len % w;
    r.need(count * code_width + tail);
    Bytes out;
    out.reserve(orig_len);
    for (size_t i = 0; i < count; ++i) {
        uint32_t c = r.p[r.pos + i * code_width];
        if (code_width == 2) c |= static_cast<uint32_t>(r.p[r.pos + i * code_width + 1]) << 8;
        if (c >= dict_count) throw CorruptBlob("dictionary codec: code out of range");
        out.insert(out.end(), dict + c * w, dict + c * w + w);
    }
    r.pos += count * code_width;
    out.insert(out.end(), r.p + r.pos, r.p + r.pos + tail);
    return out;
}

// ---- gzip (zlib with gzip wrapper) ------------------------------------------

Bytes gzip_compress(const Bytes& in, int level) {
    z_stream strm{};
    if (deflateInit2(&strm, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("deflateInit2 failed");
    Bytes out(deflateBound(&strm, static_cast<uLong>(in.size())) + 32);
    strm.next_in = const_cast<Bytef*>(in.data());
    strm.avail_in = static_cast<uInt>(in.size());
    strm.next_out = out.data();
    strm.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&strm, Z_FINISH);
    deflateEnd(&strm);
    if (rc != Z_STREAM_END) throw Error("deflate failed");
    out.resize(out.size() - strm.avail_out);
    return out;
}

Bytes gzip_decompress(const Bytes& in) {
    z_stream strm{};
    if (inflateInit2(&strm, 15 + 16) != Z_OK) throw Error("inflateInit2 failed");
    Bytes out;
    out.resize(std::max<size_t>(64, in.size() * 4));
    strm.next_in = const_cast<Bytef*>(in.data());
    strm.avail_in = static_cast<uInt>(in.size());
    size_t written = 0;
    int rc;
    do {
        if (written == out.size()) out.resize(out.size() * 2);
        strm.next_out = out.data() + written;
        strm.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&strm, Z_NO_FLUSH);
        written = out.size() - strm.avail_out;
        if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
            inflateEnd(&strm);
            throw CorruptBlob("gzip: inflate failed");
        }
        if (rc == Z_BUF_ERROR && strm.avail_in == 0 && written < out.size()) {
            inflateEnd(&strm);
            throw CorruptBlob("gzip: truncated stream");
        }
    } while (rc != Z_STREAM_END);
    inflateEnd(&strm);
    out.resize(written);
    return out;
}

// ---- lzma (xz container) -----------------------------------------------------

Bytes lzma_compress_bytes(const Bytes& in, int preset) {
    size_t cap = lzma_stream_buffer_bound(in.size());
    Bytes out(cap);
    size_t out_pos = 0;
    lzma_ret rc = lzma_easy_buffer_encode(static_cast<uint32_t>(preset), LZMA_CHECK_CRC32, nullptr,
                                          in.data(), in.size(), out.data(), &out_pos, cap);
    if (rc != LZMA_OK) throw Error("lzma encode failed");
    out.resize(out_pos);
    return out;
}

Bytes lzma_decompress_bytes(const Bytes& in) {
    size_t cap = std::max<size_t>(64, in.size() * 4);
    for (;;) {
        Bytes out(cap);
        uint64_t memlimit = UINT64_MAX;
        size_t in_pos = 0;
        size_t out_pos = 0;
        lzma_ret rc = lzma_stream_buffer_decode(&memlimit, 0, nullptr, in.data(), &in_pos,
                                                in.size(), out.data(), &out_pos, cap);
        if (rc == LZMA_OK) {
            out.resize(out_pos);
            return out;
        }
        if (rc == LZMA_BUF_ERROR && cap < (1ull << 40)) {
            cap *= 2;
            continue;
        }
        throw CorruptBlob("lzma: decode failed");
    }
}

// ---- zstandard ---------------------------------------------------------------

Bytes zstd_compress_bytes(const Bytes& in, int level) {
    size_t cap = ZSTD_compressBound(in.size());
    Bytes out(cap);
    size_t n = ZSTD_compress(out.data(), cap, in.data(), in.size(), level);
    if (ZSTD_isError(n)) throw Error("zstd compress failed");
    out.resize(n);
    return out;
}

Bytes zstd_decompress_bytes(const Bytes& in) {
    unsigned long long size = ZSTD_getFrameContentSize(in.data(), in.size());
    if (size == ZSTD_CONTENTSIZE_ERROR || size == ZSTD_CONTENTSIZE_UNKNOWN)
        throw CorruptBlob("zstd: bad frame header");
    Bytes out(static_cast<size_t>(size));
    size_t n = ZSTD_decompress(out.data(), out.size(), in.data(), in.size());
    if (ZSTD_isError(n) || n != out.size()) throw CorruptBlob("zstd: decompress failed");
    return out;
}

} // namespace

Bytes compress(CodecId id, const Bytes& input, int level) {
    level = codec_effective_level(id, level);
    switch (id) {
        case CodecId::none: return input;
        case CodecId::dictionary: return dict_compress(input);
        case CodecId::gzip: return gzip_compress(input, level);
        case CodecId::zstandard: return zstd_compress_bytes(input, level);
        case CodecId::lzma: return lzma_compress_bytes(input, level);
    }
    throw Error("bad codec id");
}

Bytes decompress(CodecId id, const Bytes& input) {
    switch (id) {
        case CodecId::none: return input;
        case CodecId::dictionary: return dict_decompress(input);
        case CodecId::gzip: return gzip_decompress(input);
        case CodecId::zstandard: return zstd_decompress_bytes(input);
        case CodecId::lzma: return lzma_decompress_bytes(input);
    }
    throw Error("bad codec id");
}

} // namespace hybridmap
