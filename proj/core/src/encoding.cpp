#include "hybridmap/encoding.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

namespace hybridmap {

KeyCodec::KeyCodec(std::vector<KeyComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw Error("key codec needs at least one component");
    weights_.assign(components_.size(), 1);
    domain_size_ = 1;
    for (size_t i = components_.size(); i-- > 0;) {
        const auto& c = components_[i];
        if (c.domain_span == 0) throw Error("key component span must be positive");
        weights_[i] = domain_size_;
        if (c.domain_span > UINT64_MAX / domain_size_)
            throw DomainOverflow("key domain exceeds 64 bits at component " + c.column);
        domain_size_ *= c.domain_span;
    }
}

uint64_t KeyCodec::encode(const std::vector<int64_t>& tuple) const {
    if (tuple.size() != components_.size())
        throw DimensionMismatch("key tuple has " + std::to_string(tuple.size()) + " components, expected " +
                                std::to_string(components_.size()));
    uint64_t index = 0;
    for (size_t i = 0; i < components_.size(); ++i) {
        const auto& c = components_[i];
        if (tuple[i] < c.domain_min ||
            static_cast<uint64_t>(tuple[i] - c.domain_min) >= c.domain_span)
            throw KeyOutOfDomain("component " + c.column + " value " + std::to_string(tuple[i]) +
                                 " outside [" + std::to_string(c.domain_min) + ", " +
                                 std::to_string(c.domain_min + static_cast<int64_t>(c.domain_span)) + ")");
        index += static_cast<uint64_t>(tuple[i] - c.domain_min) * weights_[i];
    }
    return index;
}

std::vector<int64_t> KeyCodec::decode(uint64_t index) const {
    if (index >= domain_size_) throw KeyOutOfDomain("index " + std::to_string(index) + " beyond domain");
    std::vector<int64_t> tuple(components_.size());
    for (size_t i = 0; i < components_.size(); ++i) {
        uint64_t digit = (index / weights_[i]) % components_[i].domain_span;
        tuple[i] = components_[i].domain_min + static_cast<int64_t>(digit);
    }
    return tuple;
}

uint64_t EncodedRelation::content_hash() const {
    uint64_t h = fnv1a_value<uint64_t>(keys.size());
    h = fnv1a_value<uint64_t>(columns.size(), h);
    h = fnv1a(keys.data(), keys.size() * sizeof(uint64_t), h);
    for (const auto& col : columns) h = fnv1a(col.data(), col.size() * sizeof(uint32_t), h);
    for (const auto& schema : value_columns)
        for (const auto& entry : schema.dictionary) h = fnv1a(entry.data(), entry.size(), h);
    return h;
}

Bytes EncodedRelation::serialize() const {
    Bytes out;
    put_bytes(out, "HREL", 4);
    put_le<uint16_t>(out, 1);
    put_le<uint32_t>(out, static_cast<uint32_t>(key_codec.components().size()));
    for (const auto& c : key_codec.components()) {
        put_str(out, c.column);
        put_le<int64_t>(out, c.domain_min);
        put_le<uint64_t>(out, c.domain_span);
    }
    put_le<uint32_t>(out, static_cast<uint32_t>(value_columns.size()));
    for (const auto& col : value_columns) {
        put_str(out, col.name);
        put_le<uint32_t>(out, col.cardinality());
        for (const auto& entry : col.dictionary) put_str(out, entry);
    }
    put_le<uint64_t>(out, keys.size());
    for (uint64_t k : keys) put_le<uint64_t>(out, k);
    for (const auto& col : columns)
        for (uint32_t v : col) put_le<uint32_t>(out, v);
    return out;
}

EncodedRelation EncodedRelation::deserialize(const Bytes& blob) {
    ByteReader r(blob);
    char magic[4];
    r.raw(magic, 4);
    if (std::string_view(magic, 4) != "HREL") throw CorruptBlob("relation: bad magic");
    if (r.le<uint16_t>() != 1) throw CorruptBlob("relation: bad version");
    EncodedRelation rel;
    uint32_t nkc = r.le<uint32_t>();
    std::vector<KeyComponent> comps(nkc);
    for (auto& c : comps) {
        c.column = r.str();
        c.domain_min = r.le<int64_t>();
        c.domain_span = r.le<uint64_t>();
    }
    rel.key_codec = KeyCodec(std::move(comps));
    uint32_t ncols = r.le<uint32_t>();
    rel.value_columns.resize(ncols);
    for (auto& col : rel.value_columns) {
        col.name = r.str();
        col.kind = ColumnKind::value;
        uint32_t card = r.le<uint32_t>();
        col.dictionary.resize(card);
        for (auto& entry : col.dictionary) entry = r.str();
    }
    uint64_t n = r.le<uint64_t>();
    rel.keys.resize(n);
    for (auto& k : rel.keys) k = r.le<uint64_t>();
    rel.columns.assign(ncols, std::vector<uint32_t>(n));
    for (auto& col : rel.columns)
        for (auto& v : col) v = r.le<uint32_t>();
    if (!r.done()) throw CorruptBlob("relation: trailing bytes");
    return rel;
}

Bytes DecodeMap::serialize() const {
    Bytes out;
    put_le<uint32_t>(out, static_cast<uint32_t>(columns.size()));
    for (const auto& col : columns) {
        put_le<uint32_t>(out, static_cast<uint32_t>(col.size()));
        for (const auto& entry : col) put_str(out, entry);
    }
    return out;
}

DecodeMap DecodeMap::deserialize(const Bytes& blob) {
    ByteReader r(blob);
    DecodeMap map;
    uint32_t ncols = r.le<uint32_t>();
    map.columns.resize(ncols);
    for (auto& col : map.columns) {
        uint32_t n = r.le<uint32_t>();
        col.resize(n);
        for (auto& entry : col) entry = r.str();
    }
    if (!r.done()) throw CorruptBlob("decode map: trailing bytes");
    return map;
}

DecodeMap DecodeMap::from_relation(const EncodedRelation& rel) {
    DecodeMap map;
    map.columns.reserve(rel.value_columns.size());
    for (const auto& col : rel.value_columns) map.columns.push_back(col.dictionary);
    return map;
}

namespace {

int64_t parse_key_cell(const std::string& cell, const std::string& column, size_t row) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw ParseError("key column " + column + " row " + std::to_string(row) +
                         ": not an integer: '" + cell + "'");
    return v;
}

} // namespace

EncodedRelation encode_relation(const RawTable& raw, const std::vector<std::string>& key_columns) {
    if (key_columns.empty()) throw Error("at least one key column required");
    std::unordered_map<std::string, size_t> col_index;
    for (size_t i = 0; i < raw.column_names.size(); ++i) col_index[raw.column_names[i]] = i;

    std::vector<size_t> key_idx;
    std::unordered_set<size_t> key_set;
    for (const auto& name : key_columns) {
        auto it = col_index.find(name);
        if (it == col_index.end()) throw UnknownColumn(name);
        key_idx.push_back(it->second);
        key_set.insert(it->second);
    }
    std::vector<size_t> value_idx;
    for (size_t i = 0; i < raw.column_names.size(); ++i)
        if (!key_set.count(i)) value_idx.push_back(i);

    size_t n = raw.rows.size();
    for (size_t r = 0; r < n; ++r)
        if (raw.rows[r].size() != raw.column_names.size())
            throw ParseError("row " + std::to_string(r) + " has " + std::to_string(raw.rows[r].size()) +
                             " cells, expected " + std::to_string(raw.column_names.size()));

    // Key domains are the observed [min, max] per component.
    std::vector<std::vector<int64_t>> key_values(key_idx.size(), std::vector<int64_t>(n));
    std::vector<KeyComponent> comps(key_idx.size());
    for (size_t c = 0; c < key_idx.size(); ++c) {
        comps[c].column = raw.column_names[key_idx[c]];
        int64_t lo = 0, hi = 0;
        for (size_t r = 0; r < n; ++r) {
            int64_t v = parse_key_cell(raw.rows[r][key_idx[c]], comps[c].column, r);
            key_values[c][r] = v;
            if (r == 0) {
                lo = hi = v;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        comps[c].domain_min = lo;
        comps[c].domain_span = n == 0 ? 1 : static_cast<uint64_t>(hi - lo) + 1;
    }

    EncodedRelation rel;
    rel.key_codec = KeyCodec(std::move(comps));

    rel.keys.resize(n);
    {
        std::vector<int64_t> tuple(key_idx.size());
        std::unordered_map<uint64_t, size_t> seen;
        seen.reserve(n * 2);
        for (size_t r = 0; r < n; ++r) {
            for (size_t c = 0; c < key_idx.size(); ++c) tuple[c] = key_values[c][r];
            uint64_t index = rel.key_codec.encode(tuple);
            auto [it, inserted] = seen.emplace(index, r);
            if (!inserted)
                throw DuplicateKey("rows " + std::to_string(it->second) + " and " + std::to_string(r) +
                                   " share a composite key");
            rel.keys[r] = index;
        }
    }

    rel.value_columns.resize(value_idx.size());
    rel.columns.assign(value_idx.size(), {});
    for (size_t c = 0; c < value_idx.size(); ++c) {
        auto& schema = rel.value_columns[c];
        schema.name = raw.column_names[value_idx[c]];
        schema.kind = ColumnKind::value;
        auto& codes = rel.columns[c];
        codes.resize(n);
        std::unordered_map<std::string, uint32_t> dict;
        for (size_t r = 0; r < n; ++r) {
            const std::string& cell = raw.rows[r][value_idx[c]];
            auto [it, inserted] = dict.emplace(cell, static_cast<uint32_t>(schema.dictionary.size()));
            if (inserted) schema.dictionary.push_back(cell);
            codes[r] = it->second;
        }
    }
    return rel;
}

std::vector<float> one_hot(uint32_t code, uint32_t cardinality) {
    if (code >= cardinality)
        throw CodeOutOfRange("code " + std::to_string(code) + " for cardinality " +
                             std::to_string(cardinality));
    std::vector<float> v(cardinality, 0.0f);
    v[code] = 1.0f;
    return v;
}

std::vector<std::vector<std::optional<std::string>>> decode_predictions(
    const std::vector<std::vector<MaybeCode>>& codes, const DecodeMap& map) {
    if (codes.size() != map.columns.size())
        throw DimensionMismatch("decode: " + std::to_string(codes.size()) + " columns vs map " +
                                std::to_string(map.columns.size()));
    std::vector<std::vector<std::optional<std::string>>> out(codes.size());
    for (size_t c = 0; c < codes.size(); ++c) {
        out[c].resize(codes[c].size());
        for (size_t r = 0; r < codes[c].size(); ++r) {
            if (!codes[c][r].has_value()) continue; // NULL passes through
            uint32_t code = *codes[c][r];
            if (code >= map.columns[c].size())
                throw CodeOutOfRange("column " + std::to_string(c) + " code " + std::to_string(code));
            out[c][r] = map.columns[c][code];
        }
    }
    return out;
}

} // namespace hybridmap
