#pragma once

#include <cstdint>

#include "hybridmap/serde.hpp"

namespace hybridmap {

// One bit per key in [domain_min, domain_min + span): set <=> key exists.
// Serialized: domain_min (i64 LE), span (u64 LE), then ceil(span/8) bytes,
// bit k stored at byte k/8, bit position k%8 (LSB first).
class ExistenceBitVector {
  public:
    ExistenceBitVector() = default;
    ExistenceBitVector(int64_t domain_min, uint64_t span)
        : domain_min_(domain_min), span_(span), bytes_((span + 7) / 8, 0) {}

    int64_t domain_min() const { return domain_min_; }
    uint64_t span() const { return span_; }

    bool get(uint64_t index) const {
        if (index >= span_) return false;
        return (bytes_[index >> 3] >> (index & 7)) & 1;
    }

    // Grows the span when setting past the end (dynamic bit array).
    void set(uint64_t index, bool value) {
        if (index >= span_) {
            if (!value) return;
            span_ = index + 1;
            bytes_.resize((span_ + 7) / 8, 0);
        }
        uint8_t mask = static_cast<uint8_t>(1u << (index & 7));
        if (value)
            bytes_[index >> 3] |= mask;
        else
            bytes_[index >> 3] &= static_cast<uint8_t>(~mask);
    }

    uint64_t count_set() const {
        uint64_t total = 0;
        for (uint8_t b : bytes_) total += static_cast<uint64_t>(__builtin_popcount(b));
        return total;
    }

    size_t serialized_size() const { return 16 + bytes_.size(); }

    Bytes serialize() const {
        Bytes out;
        out.reserve(serialized_size());
        put_le<int64_t>(out, domain_min_);
        put_le<uint64_t>(out, span_);
        put_bytes(out, bytes_.data(), bytes_.size());
        return out;
    }

    static ExistenceBitVector deserialize(const Bytes& blob) {
        ByteReader r(blob);
        ExistenceBitVector bv;
        bv.domain_min_ = r.le<int64_t>();
        bv.span_ = r.le<uint64_t>();
        bv.bytes_.resize((bv.span_ + 7) / 8);
        r.raw(bv.bytes_.data(), bv.bytes_.size());
        if (!r.done()) throw CorruptBlob("bit vector: trailing bytes");
        return bv;
    }

  private:
    int64_t domain_min_ = 0;
    uint64_t span_ = 0;
    Bytes bytes_;
};

} // namespace hybridmap
