// Microbenchmarks for the hot query paths. Builds one shared 1e5-row fixture;
// numbers are per-batch lookup costs, hot cache unless the name says cold.

#include <benchmark/benchmark.h>

#include "hybridmap/baselines.hpp"
#include "hybridmap/datagen.hpp"
#include "hybridmap/hybrid.hpp"
#include "hybridmap/prng.hpp"
#include "hybridmap/workload.hpp"

using namespace hybridmap;

namespace {

struct Fixture {
    EncodedRelation rel;
    HybridMapping hybrid;
    ArrayRep array;
    HashRep hash;

    static const Fixture& get() {
        static Fixture f = make();
        return f;
    }

  private:
    static Fixture make() {
        SyntheticSpec spec;
        spec.rows = 100000;
        spec.seed = 1;
        spec.domain_headroom = 2.0;
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        auto gen = generate(spec);

        FeatureCodec fc = FeatureCodec::make(gen.relation.key_codec, 64);
        Rng rng(7);
        auto net = make_net<float>(fc, {128}, {{32}, {32}}, {8, 8}, rng);
        TrainConfig tc;
        tc.learning_rate = 0.3;
        tc.lr_decay = 0.999;
        tc.epochs = 4;
        tc.batch_size = 2048;
        train(net, gen.relation, tc);

        auto hybrid = HybridMapping::build(gen.relation, std::move(net), {});
        auto array = ArrayRep::build(gen.relation, CodecId::zstandard, 128 * 1024);
        auto hash = HashRep::build(gen.relation, CodecId::zstandard, 16);
        return {std::move(gen.relation), std::move(hybrid), std::move(array), std::move(hash)};
    }
};

std::vector<uint64_t> present_keys(size_t count, uint64_t seed) {
    const auto& rel = Fixture::get().rel;
    Rng rng(seed);
    std::vector<uint64_t> keys(count);
    for (auto& k : keys) k = rel.keys[rng.bounded(rel.row_count())];
    return keys;
}

void bench_batch(benchmark::State& state, const IStore& store, bool cold) {
    auto keys = present_keys(static_cast<size_t>(state.range(0)), 42);
    PartitionCache cache(256ull << 20);
    for (auto _ : state) {
        if (cold) cache.clear();
        auto rows = store.lookup_rows(keys, cache, nullptr);
        benchmark::DoNotOptimize(rows);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_HybridLookup(benchmark::State& state) {
    const auto& f = Fixture::get();
    bench_batch(state, HybridStoreView(f.hybrid), false);
}

void BM_ArrayLookupHot(benchmark::State& state) {
    const auto& f = Fixture::get();
    bench_batch(state, ArrayStoreView(f.array, "abc-z"), false);
}

void BM_ArrayLookupCold(benchmark::State& state) {
    const auto& f = Fixture::get();
    bench_batch(state, ArrayStoreView(f.array, "abc-z"), true);
}

void BM_HashLookupHot(benchmark::State& state) {
    const auto& f = Fixture::get();
    bench_batch(state, HashStoreView(f.hash, "hbc-z"), false);
}

void BM_NetForward(benchmark::State& state) {
    const auto& f = Fixture::get();
    auto keys = present_keys(static_cast<size_t>(state.range(0)), 42);
    for (auto _ : state) {
        auto codes = predict_codes(f.hybrid.model(), keys);
        benchmark::DoNotOptimize(codes);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_HybridLookup)->RangeMultiplier(8)->Range(256, 16384);
BENCHMARK(BM_ArrayLookupHot)->RangeMultiplier(8)->Range(256, 16384);
BENCHMARK(BM_ArrayLookupCold)->RangeMultiplier(8)->Range(256, 16384);
BENCHMARK(BM_HashLookupHot)->RangeMultiplier(8)->Range(256, 16384);
BENCHMARK(BM_NetForward)->RangeMultiplier(8)->Range(256, 16384);

BENCHMARK_MAIN();
