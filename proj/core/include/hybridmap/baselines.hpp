#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hybridmap/auxtable.hpp"
#include "hybridmap/cache.hpp"
#include "hybridmap/codec.hpp"
#include "hybridmap/encoding.hpp"

namespace hybridmap {

// Key-sorted fixed-width rows in equally sized compressed partitions with an
// uncompressed range index. Lookup: range index -> partition -> binary search.
class ArrayRep {
  public:
    ArrayRep() = default;

    static ArrayRep build(const EncodedRelation& data, CodecId codec, size_t partition_bytes,
                          int codec_level = 0);

    // NULL for absent keys. Keys are probed in sorted order so each partition
    // is decompressed at most once per batch.
    std::vector<MaybeRow> lookup(std::span<const uint64_t> keys, PartitionCache& cache,
                                 LookupStats* stats = nullptr) const;

    size_t columns() const { return parts_.columns(); }
    size_t partition_count() const { return parts_.sealed().size(); }
    size_t payload_bytes() const { return parts_.sealed_bytes(); }
    size_t index_bytes() const;
    size_t serialized_size() const { return payload_bytes() + index_bytes(); }
    uint64_t row_count() const;
    CodecId codec() const { return parts_.codec(); }
    size_t partition_target_bytes() const { return parts_.partition_target_bytes(); }

    void persist(const std::filesystem::path& dir) const;
    static ArrayRep load(const std::filesystem::path& dir);

  private:
    AuxTable parts_; // sealed runs only, overlay always empty
};

// Hash-partitioned rows: every key lives in partition (key mod partition
// count). Partition payload is key-sorted rows; lookup rebuilds a hash map
// from the decompressed bytes, and that rebuild time is counted separately.
class HashRep {
  public:
    struct Partition {
        uint32_t entry_count = 0;
        uint64_t compressed_bytes = 0;
        Bytes blob;                 // set while in memory
        std::filesystem::path file; // set when backed by disk
    };

    HashRep() = default;

    static HashRep build(const EncodedRelation& data, CodecId codec, size_t partition_count,
                         int codec_level = 0);

    std::vector<MaybeRow> lookup(std::span<const uint64_t> keys, PartitionCache& cache,
                                 LookupStats* stats = nullptr) const;

    size_t columns() const { return columns_; }
    size_t partition_count() const { return parts_.size(); }
    size_t payload_bytes() const;
    size_t index_bytes() const;
    size_t serialized_size() const { return payload_bytes() + index_bytes(); }
    uint64_t row_count() const;
    CodecId codec() const { return codec_; }

    void persist(const std::filesystem::path& dir) const;
    static HashRep load(const std::filesystem::path& dir);

  private:
    std::shared_ptr<const Bytes> partition_bytes_for(size_t index, LookupStats* stats,
                                                     PartitionCache& cache) const;

    size_t columns_ = 0;
    CodecId codec_ = CodecId::zstandard;
    int codec_level_ = 0;
    std::vector<Partition> parts_;
    std::string cache_tag_;
};

} // namespace hybridmap
