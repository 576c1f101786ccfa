#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hybridmap/cache.hpp"
#include "hybridmap/codec.hpp"
#include "hybridmap/serde.hpp"

namespace hybridmap {

// Flat fixed-width rows: key index plus one code per value column.
struct RowBlock {
    size_t columns = 0;
    std::vector<uint64_t> keys;
    std::vector<uint32_t> values; // keys.size() * columns, row-major

    size_t row_count() const { return keys.size(); }
    size_t row_width() const { return 8 + 4 * columns; }
    std::span<const uint32_t> row(size_t r) const {
        return {values.data() + r * columns, columns};
    }
    void push(uint64_t key, std::span<const uint32_t> codes) {
        keys.push_back(key);
        values.insert(values.end(), codes.begin(), codes.end());
    }
    void sort_by_key();
};

// Sorted, equally partitioned, block-compressed misclassified rows plus a
// mutable overlay. Sealed partition ranges are disjoint and globally sorted;
// overlay entries shadow sealed entries. Partition payload: entry_count rows
// of (u64 key, u32 code per column), little-endian, sorted by key.
class AuxTable {
  public:
    enum class OverlayOp : uint8_t { put = 1, tombstone = 2 };

    struct OverlayEntry {
        OverlayOp op = OverlayOp::put;
        std::vector<uint32_t> values;
    };

    struct SealedPartition {
        uint64_t min_key = 0;
        uint64_t max_key = 0;
        uint32_t entry_count = 0;
        uint64_t compressed_bytes = 0;
        Bytes blob;                 // set while in memory
        std::filesystem::path file; // set when backed by disk (lazy load)
    };

    // Result of probing one key.
    struct Probe {
        enum Kind : uint8_t { none = 0, found = 1, tombstone = 2 } kind = none;
        std::vector<uint32_t> values;
    };

    AuxTable() = default;
    AuxTable(size_t columns, size_t partition_target_bytes, CodecId codec, int codec_level);

    // Seals `rows` (sorted unique keys required) into equally sized partitions
    // of max(1, partition_target_bytes / row_width) entries each.
    static AuxTable build(RowBlock rows, size_t partition_target_bytes, CodecId codec,
                          int codec_level);

    // Probes every key; results align with input order. Keys are processed in
    // sorted order internally so each partition is decompressed at most once.
    std::vector<Probe> probe_batch(std::span<const uint64_t> keys, PartitionCache& cache,
                                   LookupStats* stats = nullptr) const;

    void overlay_put(uint64_t key, std::span<const uint32_t> values);
    void overlay_tombstone(uint64_t key);
    const OverlayEntry* overlay_find(uint64_t key) const;

    // True when some sealed partition's [min,max] range covers the key.
    bool sealed_range_covers(uint64_t key) const;

    // Merges the overlay into re-sorted, re-compressed sealed runs; tombstoned
    // keys are dropped. No-op (sealed blobs untouched) when the overlay is empty.
    void compact(PartitionCache& cache);

    // All live rows (sealed shadowed by overlay), sorted by key.
    RowBlock materialize(PartitionCache& cache) const;

    void persist(const std::filesystem::path& aux_dir) const;

    size_t columns() const { return columns_; }
    CodecId codec() const { return codec_; }
    int codec_level() const { return codec_level_; }
    size_t partition_target_bytes() const { return target_bytes_; }
    const std::vector<SealedPartition>& sealed() const { return sealed_; }
    const std::map<uint64_t, OverlayEntry>& overlay() const { return overlay_; }
    uint64_t live_entry_count(PartitionCache& cache) const;

    // Framed overlay record bytes: u8 op + u64 key (+ values for puts).
    size_t overlay_log_bytes() const;
    size_t sealed_bytes() const;
    size_t serialized_size() const { return sealed_bytes() + overlay_log_bytes(); }

    Bytes serialize_overlay() const;
    void replay_overlay(const Bytes& log);

    // Wires lazily loaded partitions to files under `aux_dir`; `cache_tag`
    // must be unique per store so cache ids do not collide.
    void attach_storage(std::vector<SealedPartition> sealed, std::string cache_tag);
    void set_cache_tag(std::string tag) { cache_tag_ = std::move(tag); }

  private:
    std::shared_ptr<const Bytes> partition_rows(size_t partition_index, LookupStats* stats,
                                                PartitionCache& cache) const;
    void seal_rows(const RowBlock& rows);

    size_t columns_ = 0;
    size_t target_bytes_ = 128 * 1024;
    CodecId codec_ = CodecId::zstandard;
    int codec_level_ = 0;
    std::vector<SealedPartition> sealed_;
    std::map<uint64_t, OverlayEntry> overlay_;
    std::string cache_tag_;
};

} // namespace hybridmap
