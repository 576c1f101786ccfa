#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "hybridmap/serde.hpp"

namespace hybridmap {

// Per-phase lookup timing/counters, filled when a sink is passed to a store.
struct LookupStats {
    uint64_t existence_ns = 0;
    uint64_t aux_load_ns = 0;       // partition file reads
    uint64_t aux_decompress_ns = 0; // codec time
    uint64_t aux_search_ns = 0;     // overlay lookups + partition binary search
    uint64_t inference_ns = 0;      // model forward + argmax
    uint64_t decode_ns = 0;         // code -> original value conversion
    uint64_t rebuild_ns = 0;        // hash-map deserialization (hash stores)
    uint64_t bytes_decompressed = 0;

    void add(const LookupStats& o) {
        existence_ns += o.existence_ns;
        aux_load_ns += o.aux_load_ns;
        aux_decompress_ns += o.aux_decompress_ns;
        aux_search_ns += o.aux_search_ns;
        inference_ns += o.inference_ns;
        decode_ns += o.decode_ns;
        rebuild_ns += o.rebuild_ns;
        bytes_decompressed += o.bytes_decompressed;
    }
};

// Byte-budgeted LRU pool of decompressed partitions, shared by every store
// kind. Entries larger than the whole budget are served transiently and never
// admitted, so resident bytes <= byte_budget holds after every admission.
class PartitionCache {
  public:
    struct Counters {
        uint64_t hits = 0;
        uint64_t misses = 0;
        uint64_t evictions = 0;
        uint64_t bytes_decompressed = 0; // sum of loader result sizes
    };

    explicit PartitionCache(size_t byte_budget) : budget_(byte_budget) {}

    using Loader = std::function<Bytes()>;

    // Returns the decompressed partition, loading (and counting) on miss.
    std::shared_ptr<const Bytes> get(const std::string& id, const Loader& load) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = index_.find(id);
        if (it != index_.end()) {
            ++counters_.hits;
            order_.splice(order_.begin(), order_, it->second);
            return it->second->data;
        }
        ++counters_.misses;
        auto data = std::make_shared<const Bytes>(load());
        counters_.bytes_decompressed += data->size();
        if (data->size() > budget_) return data; // transient, never admitted
        while (resident_ + data->size() > budget_) {
            auto& victim = order_.back();
            resident_ -= victim.data->size();
            index_.erase(victim.id);
            order_.pop_back();
            ++counters_.evictions;
        }
        order_.push_front(Entry{id, data});
        index_[id] = order_.begin();
        resident_ += data->size();
        return data;
    }

    bool resident(const std::string& id) const {
        std::lock_guard<std::mutex> lock(mu_);
        return index_.count(id) > 0;
    }

    size_t resident_bytes() const {
        std::lock_guard<std::mutex> lock(mu_);
        return resident_;
    }

    size_t byte_budget() const { return budget_; }
    Counters counters() const {
        std::lock_guard<std::mutex> lock(mu_);
        return counters_;
    }

    void reset_counters() {
        std::lock_guard<std::mutex> lock(mu_);
        counters_ = Counters{};
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        order_.clear();
        index_.clear();
        resident_ = 0;
    }

  private:
    struct Entry {
        std::string id;
        std::shared_ptr<const Bytes> data;
    };

    size_t budget_;
    mutable std::mutex mu_;
    std::list<Entry> order_; // front = most recent
    std::unordered_map<std::string, std::list<Entry>::iterator> index_;
    size_t resident_ = 0;
    Counters counters_;
};

} // namespace hybridmap
