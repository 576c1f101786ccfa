#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hybridmap/serde.hpp"

namespace hybridmap {

enum class ColumnKind : uint8_t { key_component = 0, value = 1 };

// Dictionary-encoded column: code i <-> dictionary[i], all entries distinct.
struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::value;
    std::vector<std::string> dictionary;

    uint32_t cardinality() const { return static_cast<uint32_t>(dictionary.size()); }
};

// One component of a composite key: integer values in [domain_min,
// domain_min + domain_span).
struct KeyComponent {
    std::string column;
    int64_t domain_min = 0;
    uint64_t domain_span = 1;
};

// Mixed-radix bijection between key tuples and dense indices: with components
// listed most-significant first, index = sum_i (k_i - min_i) * weight_i where
// weight_i is the product of the spans after i. decode(encode(k)) == k.
class KeyCodec {
  public:
    KeyCodec() = default;
    explicit KeyCodec(std::vector<KeyComponent> components);

    uint64_t encode(const std::vector<int64_t>& tuple) const;
    std::vector<int64_t> decode(uint64_t index) const;

    uint64_t domain_size() const { return domain_size_; }
    const std::vector<KeyComponent>& components() const { return components_; }
    const std::vector<uint64_t>& weights() const { return weights_; }

  private:
    std::vector<KeyComponent> components_;
    std::vector<uint64_t> weights_;
    uint64_t domain_size_ = 1;
};

// Columnar integer-coded relation: unique encoded keys plus m value columns.
struct EncodedRelation {
    KeyCodec key_codec;
    std::vector<ColumnSchema> value_columns;
    std::vector<uint64_t> keys;
    std::vector<std::vector<uint32_t>> columns; // one code array per value column

    size_t row_count() const { return keys.size(); }
    size_t column_count() const { return value_columns.size(); }
    // Fixed-width bytes of one row when laid out as u64 key + u32 per code.
    size_t row_width() const { return 8 + 4 * value_columns.size(); }
    uint64_t content_hash() const;

    Bytes serialize() const;
    static EncodedRelation deserialize(const Bytes& blob);
};

// Per-column dictionaries for converting predicted codes back to values.
struct DecodeMap {
    std::vector<std::vector<std::string>> columns;

    // Wire format: u32 column count; per column u32 entry count, then each
    // entry as u32 byte length + UTF-8 bytes. All integers little-endian.
    Bytes serialize() const;
    static DecodeMap deserialize(const Bytes& blob);
    size_t serialized_size() const { return serialize().size(); }

    static DecodeMap from_relation(const EncodedRelation& rel);
};

// Raw tabular input: column names plus string cells, row-major.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> rows;
};

// Builds an EncodedRelation from raw rows. Dictionaries are assigned in first
// occurrence order; each key component's domain is [min seen, max seen].
// Key cells must parse as integers; duplicate composite keys are rejected.
EncodedRelation encode_relation(const RawTable& raw, const std::vector<std::string>& key_columns);

std::vector<float> one_hot(uint32_t code, uint32_t cardinality);

using MaybeCode = std::optional<uint32_t>;
using MaybeRow = std::optional<std::vector<uint32_t>>;

// Converts per-column code arrays to original values; NULL passes through.
std::vector<std::vector<std::optional<std::string>>> decode_predictions(
    const std::vector<std::vector<MaybeCode>>& codes, const DecodeMap& map);

} // namespace hybridmap
