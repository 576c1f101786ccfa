#pragma once

#include <cstdint>
#include <string>

#include "hybridmap/serde.hpp"

namespace hybridmap {

// Lossless byte codecs. gzip/zstandard/lzma payloads are conforming wire
// formats (any standard tool can decode a partition file); `dictionary` is a
// self-describing symbol-remap container defined here.
enum class CodecId : uint8_t {
    none = 0,
    dictionary = 1,
    gzip = 2,
    zstandard = 3,
    lzma = 4,
};

// Short id, used as the partition file extension and manifest value.
const char* codec_name(CodecId id);
CodecId codec_from_name(const std::string& name);

// level <= 0 selects the codec default (zstandard 1, gzip 6, lzma preset 6).
int codec_effective_level(CodecId id, int level);

Bytes compress(CodecId id, const Bytes& input, int level = 0);
Bytes decompress(CodecId id, const Bytes& input);

} // namespace hybridmap
