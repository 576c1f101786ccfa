#include "hybridmap/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "hybridmap/prng.hpp"

namespace hybridmap {

namespace {

uint64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

ShadowOracle::ShadowOracle(const EncodedRelation& rel) : rel_(&rel), order_(rel.row_count()) {
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(),
              [&](uint32_t a, uint32_t b) { return rel.keys[a] < rel.keys[b]; });
}

MaybeRow ShadowOracle::lookup(uint64_t key) const {
    auto it = std::lower_bound(order_.begin(), order_.end(), key,
                               [&](uint32_t idx, uint64_t k) { return rel_->keys[idx] < k; });
    if (it == order_.end() || rel_->keys[*it] != key) return std::nullopt;
    std::vector<uint32_t> row(rel_->column_count());
    for (size_t c = 0; c < row.size(); ++c) row[c] = rel_->columns[c][*it];
    return row;
}

bool ShadowOracle::exists(uint64_t key) const {
    auto it = std::lower_bound(order_.begin(), order_.end(), key,
                               [&](uint32_t idx, uint64_t k) { return rel_->keys[idx] < k; });
    return it != order_.end() && rel_->keys[*it] == key;
}

Report run_workload(const IStore& store, const EncodedRelation& rel, const WorkloadSpec& spec) {
    if (spec.repeats < 1) throw Error("workload repeats must be >= 1");
    if (spec.batches < 1) throw Error("workload batches must be >= 1");
    if (spec.batch_size < 1) throw Error("workload batch_size must be >= 1");
    if (spec.absent_fraction < 0.0 || spec.absent_fraction > 1.0)
        throw Error("absent_fraction outside [0,1]");

    ShadowOracle oracle(rel);
    uint64_t n = rel.row_count();
    uint64_t domain = rel.key_codec.domain_size();
    if (spec.absent_fraction > 0.0 && n >= domain)
        throw Error("absent keys requested but the key domain is fully populated");
    if (spec.absent_fraction < 1.0 && n == 0)
        throw Error("present keys requested from an empty relation");

    // queries are fixed per batch index and replayed identically every repeat
    std::vector<std::vector<uint64_t>> query(spec.batches);
    for (uint64_t b = 0; b < spec.batches; ++b) {
        Rng rng(derive_seed(spec.seed, b));
        auto& keys = query[b];
        keys.resize(spec.batch_size);
        for (uint64_t i = 0; i < spec.batch_size; ++i) {
            if (rng.unit() <= spec.absent_fraction) {
                uint64_t k = 0;
                int tries = 0;
                do {
                    k = rng.bounded(domain);
                    if (++tries > 10000) throw Error("absent-key sampling exhausted");
                } while (oracle.exists(k));
                keys[i] = k;
            } else {
                keys[i] = rel.keys[rng.bounded(n)];
            }
        }
    }

    Report rep;
    rep.store_kind = store.kind();
    rep.relation_hash = rel.content_hash();
    rep.rows = n;
    rep.row_width = rel.row_width();
    rep.storage = store.storage();
    rep.storage.original = n * rel.row_width();
    rep.memorization = store.memorization();
    rep.batch_size = spec.batch_size;
    rep.batches = spec.batches;
    rep.repeats = spec.repeats;
    rep.absent_fraction = spec.absent_fraction;
    rep.memory_budget_bytes = spec.memory_budget_bytes;
    rep.seed = spec.seed;

    DecodeMap decode = DecodeMap::from_relation(rel);
    size_t m = rel.column_count();
    std::vector<std::vector<MaybeCode>> code_columns(m);

    PartitionCache cache(spec.memory_budget_bytes);
    for (uint64_t repeat = 0; repeat < spec.repeats; ++repeat) {
        cache.clear(); // cold start each repeat (recorded policy)
        uint64_t repeat_ns = 0;
        for (uint64_t b = 0; b < spec.batches; ++b) {
            const auto& keys = query[b];
            uint64_t t0 = now_ns();
            auto answers = store.lookup_rows(keys, cache, &rep.phases);

            // decoding back to strings is part of the measured query path
            uint64_t t1 = now_ns();
            for (size_t c = 0; c < m; ++c) {
                code_columns[c].assign(keys.size(), std::nullopt);
                for (size_t i = 0; i < keys.size(); ++i)
                    if (answers[i]) code_columns[c][i] = (*answers[i])[c];
            }
            auto decoded = decode_predictions(code_columns, decode);
            (void)decoded;
            uint64_t t2 = now_ns();
            rep.phases.decode_ns += t2 - t1;
            repeat_ns += t2 - t0;

            // correctness gate: untimed, precedes any aggregation of this batch
            for (size_t i = 0; i < keys.size(); ++i) {
                MaybeRow expected = oracle.lookup(keys[i]);
                if (answers[i] != expected)
                    throw AnswerMismatch(store.kind() + " key " + std::to_string(keys[i]) +
                                         " batch " + std::to_string(b) + " repeat " +
                                         std::to_string(repeat));
            }
            rep.max_resident_bytes = std::max<uint64_t>(rep.max_resident_bytes,
                                                        cache.resident_bytes());
            if (cache.resident_bytes() > spec.memory_budget_bytes)
                throw Error("partition cache exceeded the memory budget");
        }
        rep.repeat_mean_batch_ns.push_back(static_cast<double>(repeat_ns) /
                                           static_cast<double>(spec.batches));
    }
    double total = 0;
    for (double v : rep.repeat_mean_batch_ns) total += v;
    rep.mean_batch_ns = total / static_cast<double>(rep.repeat_mean_batch_ns.size());
    rep.bytes_decompressed = cache.counters().bytes_decompressed;
    return rep;
}

std::string Report::to_json() const {
    nlohmann::json j;
    j["store_kind"] = store_kind;
    j["relation_hash"] = relation_hash;
    j["rows"] = rows;
    j["row_width"] = row_width;
    j["storage"] = {{"model", storage.model}, {"aux", storage.aux},   {"exist", storage.exist},
                    {"decode", storage.decode}, {"total", storage.total},
                    {"original", storage.original}};
    j["phases_ns"] = {{"existence", phases.existence_ns},
                      {"aux_load", phases.aux_load_ns},
                      {"aux_decompress", phases.aux_decompress_ns},
                      {"aux_search", phases.aux_search_ns},
                      {"inference", phases.inference_ns},
                      {"decode", phases.decode_ns},
                      {"rebuild", phases.rebuild_ns}};
    j["mean_batch_ns"] = mean_batch_ns;
    j["repeat_mean_batch_ns"] = repeat_mean_batch_ns;
    j["bytes_decompressed"] = bytes_decompressed;
    j["max_resident_bytes"] = max_resident_bytes;
    j["memorization"] = memorization;
    j["batch_size"] = batch_size;
    j["batches"] = batches;
    j["repeats"] = repeats;
    j["absent_fraction"] = absent_fraction;
    j["memory_budget_bytes"] = memory_budget_bytes;
    j["seed"] = seed;
    j["cache_policy"] = cache_policy;
    j["notes"] = notes;
    return j.dump(2);
}

Report Report::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptBlob(std::string("report json: ") + e.what());
    }
    try {
        Report r;
        r.store_kind = j.at("store_kind").get<std::string>();
        r.relation_hash = j.at("relation_hash").get<uint64_t>();
        r.rows = j.at("rows").get<uint64_t>();
        r.row_width = j.at("row_width").get<uint64_t>();
        const auto& s = j.at("storage");
        r.storage = {s.at("model").get<uint64_t>(),  s.at("aux").get<uint64_t>(),
                     s.at("exist").get<uint64_t>(),  s.at("decode").get<uint64_t>(),
                     s.at("total").get<uint64_t>(),  s.at("original").get<uint64_t>()};
        const auto& p = j.at("phases_ns");
        r.phases.existence_ns = p.at("existence").get<uint64_t>();
        r.phases.aux_load_ns = p.at("aux_load").get<uint64_t>();
        r.phases.aux_decompress_ns = p.at("aux_decompress").get<uint64_t>();
        r.phases.aux_search_ns = p.at("aux_search").get<uint64_t>();
        r.phases.inference_ns = p.at("inference").get<uint64_t>();
        r.phases.decode_ns = p.at("decode").get<uint64_t>();
        r.phases.rebuild_ns = p.at("rebuild").get<uint64_t>();
        r.mean_batch_ns = j.at("mean_batch_ns").get<double>();
        r.repeat_mean_batch_ns = j.at("repeat_mean_batch_ns").get<std::vector<double>>();
        r.bytes_decompressed = j.at("bytes_decompressed").get<uint64_t>();
        r.max_resident_bytes = j.at("max_resident_bytes").get<uint64_t>();
        r.memorization = j.at("memorization").get<double>();
        r.batch_size = j.at("batch_size").get<uint64_t>();
        r.batches = j.at("batches").get<uint64_t>();
        r.repeats = j.at("repeats").get<uint64_t>();
        r.absent_fraction = j.at("absent_fraction").get<double>();
        r.memory_budget_bytes = j.at("memory_budget_bytes").get<uint64_t>();
        r.seed = j.at("seed").get<uint64_t>();
        r.cache_policy = j.at("cache_policy").get<std::string>();
        r.notes = j.at("notes").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptBlob(std::string("report json fields: ") + e.what());
    }
}

Comparison compare(const std::vector<Report>& reports) {
    if (reports.empty()) throw IncompatibleReports("no reports to compare");
    const Report& first = reports.front();
    for (const Report& r : reports) {
        if (r.relation_hash != first.relation_hash)
            throw IncompatibleReports("relation hash differs for " + r.store_kind);
        if (r.batch_size != first.batch_size || r.batches != first.batches ||
            r.absent_fraction != first.absent_fraction || r.seed != first.seed)
            throw IncompatibleReports("workload shape differs for " + r.store_kind);
    }

    Comparison cmp;
    cmp.columns = {"representation", "rows",          "original_bytes", "model_bytes",
                   "aux_bytes",      "exist_bytes",   "decode_bytes",   "total_bytes",
                   "ratio",          "mean_batch_ms", "existence_ms",   "aux_load_ms",
                   "aux_decompress_ms", "aux_search_ms", "inference_ms", "decode_ms",
                   "rebuild_ms",     "bytes_decompressed", "memorization"};
    uint64_t timed = 0;
    for (const Report& r : reports) {
        timed = r.batches * r.repeats;
        double per_batch = timed ? 1.0 / (1e6 * static_cast<double>(timed)) : 0.0;
        double ratio = r.storage.original
                           ? static_cast<double>(r.storage.total) /
                                 static_cast<double>(r.storage.original)
                           : 0.0;
        cmp.rows.push_back({r.store_kind,
                            std::to_string(r.rows),
                            std::to_string(r.storage.original),
                            std::to_string(r.storage.model),
                            std::to_string(r.storage.aux),
                            std::to_string(r.storage.exist),
                            std::to_string(r.storage.decode),
                            std::to_string(r.storage.total),
                            fmt_g(ratio),
                            fmt_g(r.mean_batch_ns / 1e6),
                            fmt_g(static_cast<double>(r.phases.existence_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.aux_load_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.aux_decompress_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.aux_search_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.inference_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.decode_ns) * per_batch),
                            fmt_g(static_cast<double>(r.phases.rebuild_ns) * per_batch),
                            std::to_string(r.bytes_decompressed),
                            fmt_g(r.memorization)});
    }
    return cmp;
}

std::string Comparison::csv() const {
    std::string out;
    for (size_t c = 0; c < columns.size(); ++c) {
        if (c) out += ',';
        out += columns[c];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += row[c];
        }
        out += '\n';
    }
    return out;
}

std::string Comparison::json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json obj;
        for (size_t c = 0; c < columns.size(); ++c) obj[columns[c]] = row[c];
        arr.push_back(obj);
    }
    return arr.dump(2);
}

std::string Comparison::table() const {
    std::vector<size_t> width(columns.size());
    for (size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out += "  ";
            out += row[c];
            out.append(width[c] - row[c].size(), ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit(columns);
    for (const auto& row : rows) emit(row);
    return out;
}

TuneResult tune_partition_size(
    const std::function<std::unique_ptr<IStore>(size_t)>& builder, const EncodedRelation& data,
    const WorkloadSpec& workload, std::span<const size_t> candidate_sizes) {
    if (candidate_sizes.empty()) throw Error("tune_partition_size: no candidate sizes");
    TuneResult result;
    double best_ns = 0.0;
    for (size_t size : candidate_sizes) {
        auto store = builder(size);
        Report rep = run_workload(*store, data, workload);
        result.table.push_back({size, rep.mean_batch_ns, rep.bytes_decompressed});
        if (result.best_size == 0 || rep.mean_batch_ns < best_ns ||
            (rep.mean_batch_ns == best_ns && size < result.best_size)) {
            result.best_size = size;
            best_ns = rep.mean_batch_ns;
        }
    }
    return result;
}

} // namespace hybridmap
