#include "hybridmap/auxtable.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <numeric>

namespace hybridmap {

void RowBlock::sort_by_key() {
    size_t n = keys.size();
    std::vector<uint32_t> index(n);
    std::iota(index.begin(), index.end(), 0);
    std::sort(index.begin(), index.end(),
              [&](uint32_t a, uint32_t b) { return keys[a] < keys[b]; });
    std::vector<uint64_t> new_keys(n);
    std::vector<uint32_t> new_values(values.size());
    for (size_t i = 0; i < n; ++i) {
        new_keys[i] = keys[index[i]];
        for (size_t c = 0; c < columns; ++c) new_values[i * columns + c] = values[index[i] * columns + c];
    }
    keys = std::move(new_keys);
    values = std::move(new_values);
}

namespace {

std::string next_cache_tag() {
    static std::atomic<uint64_t> counter{0};
    return "aux-mem-" + std::to_string(counter.fetch_add(1));
}

} // namespace

AuxTable::AuxTable(size_t columns, size_t partition_target_bytes, CodecId codec, int codec_level)
    : columns_(columns),
      target_bytes_(std::max<size_t>(1, partition_target_bytes)),
      codec_(codec),
      codec_level_(codec_level),
      cache_tag_(next_cache_tag()) {}

AuxTable AuxTable::build(RowBlock rows, size_t partition_target_bytes, CodecId codec,
                         int codec_level) {
    AuxTable t(rows.columns, partition_target_bytes, codec, codec_level);
    rows.sort_by_key();
    for (size_t i = 1; i < rows.keys.size(); ++i)
        if (rows.keys[i] == rows.keys[i - 1]) throw DuplicateKey("aux row key " + std::to_string(rows.keys[i]));
    t.seal_rows(rows);
    return t;
}

void AuxTable::seal_rows(const RowBlock& rows) {
    sealed_.clear();
    size_t n = rows.row_count();
    if (n == 0) return;
    size_t row_width = rows.row_width();
    size_t per_partition = std::max<size_t>(1, target_bytes_ / row_width);
    for (size_t start = 0; start < n; start += per_partition) {
        size_t count = std::min(per_partition, n - start);
        Bytes payload;
        payload.reserve(count * row_width);
        for (size_t r = start; r < start + count; ++r) {
            put_le<uint64_t>(payload, rows.keys[r]);
            for (size_t c = 0; c < columns_; ++c)
                put_le<uint32_t>(payload, rows.values[r * columns_ + c]);
        }
        SealedPartition p;
        p.min_key = rows.keys[start];
        p.max_key = rows.keys[start + count - 1];
        p.entry_count = static_cast<uint32_t>(count);
        p.blob = compress(codec_, payload, codec_level_);
        p.compressed_bytes = p.blob.size();
        sealed_.push_back(std::move(p));
    }
}

std::shared_ptr<const Bytes> AuxTable::partition_rows(size_t partition_index, LookupStats* stats,
                                                      PartitionCache& cache) const {
    const auto& p = sealed_[partition_index];
    std::string id = cache_tag_ + "/part-" + std::to_string(partition_index);
    return cache.get(id, [&]() -> Bytes {
        Bytes compressed;
        if (p.blob.empty() && !p.file.empty()) {
            auto t0 = std::chrono::steady_clock::now();
            compressed = read_file(p.file);
            if (stats)
                stats->aux_load_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(
                                          std::chrono::steady_clock::now() - t0)
                                          .count();
        } else {
            compressed = p.blob;
        }
        auto t1 = std::chrono::steady_clock::now();
        Bytes raw = decompress(codec_, compressed);
        if (stats) {
            stats->aux_decompress_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(
                                            std::chrono::steady_clock::now() - t1)
                                            .count();
            stats->bytes_decompressed += raw.size();
        }
        size_t row_width = 8 + 4 * columns_;
        if (raw.size() != static_cast<size_t>(p.entry_count) * row_width)
            throw CorruptBlob("aux partition " + std::to_string(partition_index) + " size mismatch");
        return raw;
    });
}

std::vector<AuxTable::Probe> AuxTable::probe_batch(std::span<const uint64_t> keys,
                                                   PartitionCache& cache,
                                                   LookupStats* stats) const {
    std::vector<Probe> out(keys.size());
    std::vector<uint32_t> order(keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](uint32_t a, uint32_t b) { return keys[a] < keys[b]; });

    size_t row_width = 8 + 4 * columns_;
    std::shared_ptr<const Bytes> current; // decompressed rows of partition `current_idx`
    size_t current_idx = SIZE_MAX;
    for (uint32_t qi : order) {
        uint64_t key = keys[qi];
        auto it = overlay_.find(key);
        if (it != overlay_.end()) {
            if (it->second.op == OverlayOp::tombstone) {
                out[qi].kind = Probe::tombstone;
            } else {
                out[qi].kind = Probe::found;
                out[qi].values = it->second.values;
            }
            continue;
        }
        // locate sealed partition: first partition with max_key >= key
        auto pit = std::lower_bound(sealed_.begin(), sealed_.end(), key,
                                    [](const SealedPartition& p, uint64_t k) { return p.max_key < k; });
        if (pit == sealed_.end() || pit->min_key > key) continue;
        size_t pidx = static_cast<size_t>(pit - sealed_.begin());
        if (pidx != current_idx) {
            current = partition_rows(pidx, stats, cache);
            current_idx = pidx;
        }
        // binary search rows by key
        size_t lo = 0, hi = pit->entry_count;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            ByteReader r(current->data() + mid * row_width, 8);
            uint64_t k = r.le<uint64_t>();
            if (k < key)
                lo = mid + 1;
            else
                hi = mid;
        }
        if (lo < pit->entry_count) {
            ByteReader r(current->data() + lo * row_width, row_width);
            if (r.le<uint64_t>() == key) {
                out[qi].kind = Probe::found;
                out[qi].values.resize(columns_);
                for (size_t c = 0; c < columns_; ++c) out[qi].values[c] = r.le<uint32_t>();
            }
        }
    }
    return out;
}

void AuxTable::overlay_put(uint64_t key, std::span<const uint32_t> values) {
    if (values.size() != columns_) throw DimensionMismatch("overlay put arity");
    overlay_[key] = OverlayEntry{OverlayOp::put, {values.begin(), values.end()}};
}

void AuxTable::overlay_tombstone(uint64_t key) {
    overlay_[key] = OverlayEntry{OverlayOp::tombstone, {}};
}

const AuxTable::OverlayEntry* AuxTable::overlay_find(uint64_t key) const {
    auto it = overlay_.find(key);
    return it == overlay_.end() ? nullptr : &it->second;
}

bool AuxTable::sealed_range_covers(uint64_t key) const {
    auto pit = std::lower_bound(sealed_.begin(), sealed_.end(), key,
                                [](const SealedPartition& p, uint64_t k) { return p.max_key < k; });
    return pit != sealed_.end() && pit->min_key <= key;
}

RowBlock AuxTable::materialize(PartitionCache& cache) const {
    RowBlock out;
    out.columns = columns_;
    size_t row_width = 8 + 4 * columns_;
    auto overlay_it = overlay_.begin();
    auto flush_overlay_until = [&](uint64_t bound, bool inclusive) {
        while (overlay_it != overlay_.end() &&
               (inclusive ? overlay_it->first <= bound : overlay_it->first < bound)) {
            if (overlay_it->second.op == OverlayOp::put)
                out.push(overlay_it->first, overlay_it->second.values);
            ++overlay_it;
        }
    };
    std::vector<uint32_t> scratch(columns_);
    for (size_t pi = 0; pi < sealed_.size(); ++pi) {
        auto rows = partition_rows(pi, nullptr, cache);
        for (uint32_t r = 0; r < sealed_[pi].entry_count; ++r) {
            ByteReader br(rows->data() + r * row_width, row_width);
            uint64_t key = br.le<uint64_t>();
            flush_overlay_until(key, false);
            if (overlay_it != overlay_.end() && overlay_it->first == key) {
                if (overlay_it->second.op == OverlayOp::put)
                    out.push(key, overlay_it->second.values);
                ++overlay_it; // tombstone: sealed row dropped
                continue;
            }
            for (size_t c = 0; c < columns_; ++c) scratch[c] = br.le<uint32_t>();
            out.push(key, scratch);
        }
    }
    flush_overlay_until(UINT64_MAX, true);
    return out;
}

void AuxTable::compact(PartitionCache& cache) {
    if (overlay_.empty()) return;
    RowBlock live = materialize(cache);
    seal_rows(live);
    overlay_.clear();
    // Fresh cache identity: old cached partitions must not alias new content.
    cache_tag_ = next_cache_tag();
}

uint64_t AuxTable::live_entry_count(PartitionCache& cache) const {
    return materialize(cache).row_count();
}

size_t AuxTable::overlay_log_bytes() const {
    size_t total = 0;
    for (const auto& [key, entry] : overlay_) {
        (void)key;
        total += 1 + 8;
        if (entry.op == OverlayOp::put) total += 4 * columns_;
    }
    return total;
}

size_t AuxTable::sealed_bytes() const {
    size_t total = 0;
    for (const auto& p : sealed_) total += p.compressed_bytes;
    return total;
}

Bytes AuxTable::serialize_overlay() const {
    Bytes out;
    out.reserve(overlay_log_bytes());
    for (const auto& [key, entry] : overlay_) {
        put_le<uint8_t>(out, static_cast<uint8_t>(entry.op));
        put_le<uint64_t>(out, key);
        if (entry.op == OverlayOp::put)
            for (uint32_t v : entry.values) put_le<uint32_t>(out, v);
    }
    return out;
}

void AuxTable::replay_overlay(const Bytes& log) {
    overlay_.clear();
    ByteReader r(log);
    while (!r.done()) {
        uint8_t op = r.le<uint8_t>();
        uint64_t key = r.le<uint64_t>();
        if (op == static_cast<uint8_t>(OverlayOp::put)) {
            std::vector<uint32_t> values(columns_);
            for (auto& v : values) v = r.le<uint32_t>();
            overlay_[key] = OverlayEntry{OverlayOp::put, std::move(values)};
        } else if (op == static_cast<uint8_t>(OverlayOp::tombstone)) {
            overlay_[key] = OverlayEntry{OverlayOp::tombstone, {}};
        } else {
            throw CorruptBlob("overlay log: bad op " + std::to_string(op));
        }
    }
}

void AuxTable::persist(const std::filesystem::path& aux_dir) const {
    std::filesystem::create_directories(aux_dir);
    for (size_t i = 0; i < sealed_.size(); ++i) {
        const auto& p = sealed_[i];
        char name[32];
        std::snprintf(name, sizeof name, "part-%05zu.%s", i, codec_name(codec_));
        Bytes compressed = p.blob.empty() && !p.file.empty() ? read_file(p.file) : p.blob;
        write_file(aux_dir / name, compressed);
    }
    write_file(aux_dir / "overlay.log", serialize_overlay());
}

void AuxTable::attach_storage(std::vector<SealedPartition> sealed, std::string cache_tag) {
    sealed_ = std::move(sealed);
    cache_tag_ = std::move(cache_tag);
}

} // namespace hybridmap
