#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hybridmap/baselines.hpp"
#include "hybridmap/hybrid.hpp"

namespace hybridmap {

struct WorkloadSpec {
    uint64_t batch_size = 10000;
    uint64_t batches = 1;
    uint64_t repeats = 5;
    double absent_fraction = 0.0; // fraction of queried keys guaranteed absent
    uint64_t memory_budget_bytes = 64ull * 1024 * 1024;
    uint64_t seed = 0;
};

struct StorageBreakdown {
    uint64_t model = 0;
    uint64_t aux = 0;
    uint64_t exist = 0;
    uint64_t decode = 0;
    uint64_t total = 0;
    uint64_t original = 0; // uncompressed fixed-width bytes of the relation
};

// Uniform query surface over every representation.
struct IStore {
    virtual ~IStore() = default;
    virtual std::vector<MaybeRow> lookup_rows(std::span<const uint64_t> keys,
                                              PartitionCache& cache,
                                              LookupStats* stats) const = 0;
    virtual StorageBreakdown storage() const = 0;
    virtual std::string kind() const = 0;
    virtual double memorization() const { return 0.0; }
};

class HybridStoreView : public IStore {
  public:
    explicit HybridStoreView(const HybridMapping& h, std::string kind = "dm")
        : h_(&h), kind_(std::move(kind)) {}
    std::vector<MaybeRow> lookup_rows(std::span<const uint64_t> keys, PartitionCache& cache,
                                      LookupStats* stats) const override {
        return h_->lookup_batch(keys, cache, stats);
    }
    StorageBreakdown storage() const override {
        return {h_->model_bytes(), h_->aux_bytes(), h_->exist_bytes(), h_->decode_bytes(),
                h_->total_size(), h_->original_bytes()};
    }
    std::string kind() const override { return kind_; }
    double memorization() const override { return h_->stats().memorization; }

  private:
    const HybridMapping* h_;
    std::string kind_;
};

class ArrayStoreView : public IStore {
  public:
    ArrayStoreView(const ArrayRep& rep, std::string kind) : rep_(&rep), kind_(std::move(kind)) {}
    std::vector<MaybeRow> lookup_rows(std::span<const uint64_t> keys, PartitionCache& cache,
                                      LookupStats* stats) const override {
        return rep_->lookup(keys, cache, stats);
    }
    StorageBreakdown storage() const override {
        uint64_t total = rep_->serialized_size();
        return {0, total, 0, 0, total, 0}; // payload + index reported as aux
    }
    std::string kind() const override { return kind_; }

  private:
    const ArrayRep* rep_;
    std::string kind_;
};

class HashStoreView : public IStore {
  public:
    HashStoreView(const HashRep& rep, std::string kind) : rep_(&rep), kind_(std::move(kind)) {}
    std::vector<MaybeRow> lookup_rows(std::span<const uint64_t> keys, PartitionCache& cache,
                                      LookupStats* stats) const override {
        return rep_->lookup(keys, cache, stats);
    }
    StorageBreakdown storage() const override {
        uint64_t total = rep_->serialized_size();
        return {0, total, 0, 0, total, 0};
    }
    std::string kind() const override { return kind_; }

  private:
    const HashRep* rep_;
    std::string kind_;
};

// Reference answers: row indices sorted by key, binary searched per lookup.
class ShadowOracle {
  public:
    explicit ShadowOracle(const EncodedRelation& rel);
    MaybeRow lookup(uint64_t key) const;
    bool exists(uint64_t key) const;

  private:
    const EncodedRelation* rel_;
    std::vector<uint32_t> order_;
};

struct Report {
    std::string store_kind;
    uint64_t relation_hash = 0;
    uint64_t rows = 0;
    uint64_t row_width = 0;
    StorageBreakdown storage;

    LookupStats phases; // totals over every timed batch
    double mean_batch_ns = 0.0;
    std::vector<double> repeat_mean_batch_ns;
    uint64_t bytes_decompressed = 0;
    uint64_t max_resident_bytes = 0;
    double memorization = 0.0;

    uint64_t batch_size = 0;
    uint64_t batches = 0;
    uint64_t repeats = 0;
    double absent_fraction = 0.0;
    uint64_t memory_budget_bytes = 0;
    uint64_t seed = 0;
    std::string cache_policy = "cleared-between-repeats";
    std::string notes;

    std::string to_json() const;
    static Report from_json(const std::string& text);
};

// Replays `batches` random key batches per repeat under the memory budget.
// Every answer is checked against the shadow oracle before any timing is
// aggregated; a mismatch aborts with AnswerMismatch.
Report run_workload(const IStore& store, const EncodedRelation& rel, const WorkloadSpec& spec);

struct Comparison {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const;
    std::string json() const;
    std::string table() const; // aligned human-readable text
};

// Paper-style table: one row per representation over the same relation and
// workload shape. Mismatched relation hashes or workload shapes are rejected.
Comparison compare(const std::vector<Report>& reports);

struct TuneMeasurement {
    size_t partition_size = 0;
    double mean_batch_ns = 0.0;
    uint64_t bytes_decompressed = 0;
};

struct TuneResult {
    size_t best_size = 0; // lowest mean batch latency, ties to the smaller size
    std::vector<TuneMeasurement> table;
};

TuneResult tune_partition_size(
    const std::function<std::unique_ptr<IStore>(size_t)>& builder, const EncodedRelation& data,
    const WorkloadSpec& workload, std::span<const size_t> candidate_sizes);

} // namespace hybridmap
