#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hybridmap/auxtable.hpp"
#include "hybridmap/bitvector.hpp"
#include "hybridmap/cache.hpp"
#include "hybridmap/encoding.hpp"
#include "hybridmap/net.hpp"

namespace hybridmap {

struct HybridStats {
    uint64_t rows_total = 0;
    uint64_t rows_misclassified = 0;
    double memorization = 0.0;
};

struct HybridBuildConfig {
    size_t partition_target_bytes = 128 * 1024;
    CodecId aux_codec = CodecId::zstandard; // zstandard or lzma
    int codec_level = 0;                    // <=0: codec default
    double retrain_threshold = 0.20;        // fraction of original bytes
    std::string arch_note = "fixed";        // recorded in the manifest
};

// The deployable hybrid structure: model + aux table + existence bits +
// decode map. Lookups are exact; the model is only an accelerator.
class HybridMapping {
  public:
    // Places every row the net mispredicts (any head) into the aux table,
    // sets existence bits over the declared key domain, snapshots stats.
    static HybridMapping build(const EncodedRelation& data, MultiTaskNet net,
                               const HybridBuildConfig& cfg);

    // Algorithm: NULL when the existence bit is unset; otherwise the aux
    // entry if present, else the decoded model prediction. Absent keys never
    // reach the model or the aux table.
    std::vector<MaybeRow> lookup_batch(std::span<const uint64_t> keys, PartitionCache& cache,
                                       LookupStats* stats = nullptr) const;

    // Batch insert of new rows (keys must not exist). Rows the model already
    // predicts correctly are not stored; others go to the overlay.
    void insert_rows(const RowBlock& rows);
    // Clears existence bits; aux entries are shadowed with tombstones.
    void delete_keys(std::span<const uint64_t> keys);
    // Rewrites values for existing keys; existence bits untouched. A key whose
    // new value matches the model prediction drops its aux entry (tombstone).
    void update_rows(const RowBlock& rows);

    // All existing (key, values) pairs with lo <= key <= hi, by ascending key.
    std::vector<std::pair<uint64_t, std::vector<uint32_t>>> range_lookup(
        uint64_t lo, uint64_t hi, PartitionCache& cache) const;

    // Rebuilds everything from the current logical relation when accumulated
    // modified bytes exceed threshold * original bytes. `trainer` maps the
    // materialized relation to a trained replacement model.
    bool maybe_retrain(const std::function<MultiTaskNet(const EncodedRelation&)>& trainer,
                       PartitionCache& cache);

    // The current logical relation, materialized by a full existence sweep.
    EncodedRelation materialize(PartitionCache& cache) const;

    void compact(PartitionCache& cache) { aux_.compact(cache); }

    void persist(const std::filesystem::path& dir) const;
    static HybridMapping load(const std::filesystem::path& dir);

    size_t model_bytes() const { return serialized_size(model_); }
    size_t aux_bytes() const { return aux_.serialized_size(); }
    size_t exist_bytes() const { return exist_.serialized_size(); }
    size_t decode_bytes() const { return decode_.serialized_size(); }
    size_t total_size() const {
        return model_bytes() + aux_bytes() + exist_bytes() + decode_bytes();
    }

    const MultiTaskNet& model() const { return model_; }
    const AuxTable& aux() const { return aux_; }
    const ExistenceBitVector& exist() const { return exist_; }
    const DecodeMap& decode_map() const { return decode_; }
    const KeyCodec& key_codec() const { return key_codec_; }
    const std::vector<ColumnSchema>& value_columns() const { return value_columns_; }
    const HybridStats& stats() const { return stats_; }
    uint64_t modified_bytes() const { return modified_bytes_; }
    uint64_t original_bytes() const { return original_bytes_; }
    double retrain_threshold() const { return cfg_.retrain_threshold; }
    const HybridBuildConfig& build_config() const { return cfg_; }
    size_t columns() const { return value_columns_.size(); }
    size_t row_width() const { return 8 + 4 * columns(); }

  private:
    MultiTaskNet model_;
    AuxTable aux_;
    ExistenceBitVector exist_;
    DecodeMap decode_;
    KeyCodec key_codec_;
    std::vector<ColumnSchema> value_columns_;
    HybridStats stats_;
    HybridBuildConfig cfg_;
    uint64_t modified_bytes_ = 0;
    uint64_t original_bytes_ = 0;
};

} // namespace hybridmap
