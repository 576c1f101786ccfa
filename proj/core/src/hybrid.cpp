#include "hybridmap/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "hybridmap/manifest.hpp"

namespace hybridmap {

namespace {

uint64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Duplicate keys inside one mutation batch would make the outcome order
// dependent, so they are rejected up front.
void reject_batch_duplicates(std::span<const uint64_t> keys, const char* op) {
    std::vector<uint64_t> sorted(keys.begin(), keys.end());
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
        throw DuplicateKey(std::string(op) + " batch repeats key " + std::to_string(*dup));
}

} // namespace

HybridMapping HybridMapping::build(const EncodedRelation& data, MultiTaskNet net,
                                   const HybridBuildConfig& cfg) {
    if (data.row_count() == 0) throw EmptyDataset("build over empty relation");
    if (net.head_count() != data.column_count())
        throw DimensionMismatch("model head count != value column count");
    for (size_t h = 0; h < net.head_count(); ++h)
        if (net.head_cardinality(h) != data.value_columns[h].cardinality())
            throw DimensionMismatch("head " + std::to_string(h) + " cardinality mismatch");
    if (net.features.domain_size < data.key_codec.domain_size())
        throw DimensionMismatch("model feature domain smaller than key domain");

    HybridMapping h;
    h.key_codec_ = data.key_codec;
    h.value_columns_ = data.value_columns;
    h.decode_ = DecodeMap::from_relation(data);
    h.cfg_ = cfg;

    auto eval = evaluate(net, data);
    size_t n = data.row_count();
    size_t m = data.column_count();

    RowBlock mis;
    mis.columns = m;
    std::vector<uint32_t> codes(m);
    for (size_t r = 0; r < n; ++r) {
        if (eval.row_correct[r]) continue;
        for (size_t c = 0; c < m; ++c) codes[c] = data.columns[c][r];
        mis.push(data.keys[r], codes);
    }
    uint64_t mis_count = mis.row_count();
    mis.sort_by_key(); // relation rows may arrive in any order
    h.aux_ = AuxTable::build(std::move(mis), cfg.partition_target_bytes, cfg.aux_codec,
                             cfg.codec_level);

    h.exist_ = ExistenceBitVector(0, data.key_codec.domain_size());
    for (uint64_t k : data.keys) h.exist_.set(k, true);

    uint64_t span = h.exist_.span();
    if (span >= 4096 && n < span / 64)
        std::fprintf(stderr,
                     "warning: existence bits are sparse (%llu set of %llu); "
                     "a tighter key domain would shrink the bit vector\n",
                     static_cast<unsigned long long>(n), static_cast<unsigned long long>(span));

    h.model_ = std::move(net);
    h.stats_ = HybridStats{n, mis_count, eval.memorization};
    h.original_bytes_ = n * data.row_width();
    h.modified_bytes_ = 0;
    return h;
}

std::vector<MaybeRow> HybridMapping::lookup_batch(std::span<const uint64_t> keys,
                                                  PartitionCache& cache,
                                                  LookupStats* stats) const {
    size_t n = keys.size();
    std::vector<MaybeRow> out(n);
    uint64_t domain = key_codec_.domain_size();

    uint64_t t0 = now_ns();
    std::vector<uint32_t> present;
    present.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (keys[i] >= domain)
            throw KeyOutOfDomain("key " + std::to_string(keys[i]) + " >= domain " +
                                 std::to_string(domain));
        if (exist_.get(keys[i])) present.push_back(static_cast<uint32_t>(i));
    }
    if (stats) stats->existence_ns += now_ns() - t0;
    if (present.empty()) return out;

    std::vector<uint64_t> pkeys(present.size());
    for (size_t j = 0; j < present.size(); ++j) pkeys[j] = keys[present[j]];

    uint64_t load0 = stats ? stats->aux_load_ns : 0;
    uint64_t dec0 = stats ? stats->aux_decompress_ns : 0;
    uint64_t t1 = now_ns();
    auto probes = aux_.probe_batch(pkeys, cache, stats);
    if (stats) {
        uint64_t total = now_ns() - t1;
        uint64_t inner = (stats->aux_load_ns - load0) + (stats->aux_decompress_ns - dec0);
        stats->aux_search_ns += total > inner ? total - inner : 0;
    }

    std::vector<uint64_t> mkeys;
    std::vector<uint32_t> mpos;
    for (size_t j = 0; j < present.size(); ++j) {
        if (probes[j].kind == AuxTable::Probe::found) {
            out[present[j]] = std::move(probes[j].values);
        } else {
            mkeys.push_back(pkeys[j]);
            mpos.push_back(present[j]);
        }
    }

    if (!mkeys.empty()) {
        uint64_t t2 = now_ns();
        auto codes = predict_codes(model_, mkeys);
        size_t m = columns();
        for (size_t r = 0; r < mkeys.size(); ++r) {
            std::vector<uint32_t> row(m);
            for (size_t h = 0; h < m; ++h) row[h] = codes[h][r];
            out[mpos[r]] = std::move(row);
        }
        if (stats) stats->inference_ns += now_ns() - t2;
    }
    return out;
}

void HybridMapping::insert_rows(const RowBlock& rows) {
    if (rows.columns != columns()) throw DimensionMismatch("insert row arity");
    reject_batch_duplicates(rows.keys, "insert");
    uint64_t domain = key_codec_.domain_size();
    for (size_t r = 0; r < rows.row_count(); ++r) {
        uint64_t k = rows.keys[r];
        if (k >= domain)
            throw KeyOutOfDomain("insert key " + std::to_string(k) + " >= domain " +
                                 std::to_string(domain));
        if (exist_.get(k)) throw KeyAlreadyExists("key " + std::to_string(k));
        auto row = rows.row(r);
        for (size_t c = 0; c < rows.columns; ++c)
            if (row[c] >= value_columns_[c].cardinality())
                throw CodeOutOfRange("insert code " + std::to_string(row[c]) + " for column " +
                                     value_columns_[c].name);
    }

    auto codes = predict_codes(model_, rows.keys);
    for (size_t r = 0; r < rows.row_count(); ++r) {
        uint64_t k = rows.keys[r];
        exist_.set(k, true);
        auto row = rows.row(r);
        bool model_serves = true;
        for (size_t c = 0; c < rows.columns; ++c)
            if (codes[c][r] != row[c]) { model_serves = false; break; }
        if (model_serves) {
            // shadow any stale sealed entry left behind by an earlier delete
            if (aux_.overlay_find(k) || aux_.sealed_range_covers(k)) aux_.overlay_tombstone(k);
        } else {
            aux_.overlay_put(k, row);
        }
    }
    modified_bytes_ += rows.row_count() * row_width();
}

void HybridMapping::delete_keys(std::span<const uint64_t> keys) {
    reject_batch_duplicates(keys, "delete");
    uint64_t domain = key_codec_.domain_size();
    for (uint64_t k : keys) {
        if (k >= domain)
            throw KeyOutOfDomain("delete key " + std::to_string(k) + " >= domain " +
                                 std::to_string(domain));
        if (!exist_.get(k)) throw KeyNotFound("key " + std::to_string(k));
    }
    for (uint64_t k : keys) {
        exist_.set(k, false);
        if (aux_.overlay_find(k) || aux_.sealed_range_covers(k)) aux_.overlay_tombstone(k);
    }
    modified_bytes_ += keys.size() * row_width();
}

void HybridMapping::update_rows(const RowBlock& rows) {
    if (rows.columns != columns()) throw DimensionMismatch("update row arity");
    reject_batch_duplicates(rows.keys, "update");
    uint64_t domain = key_codec_.domain_size();
    for (size_t r = 0; r < rows.row_count(); ++r) {
        uint64_t k = rows.keys[r];
        if (k >= domain)
            throw KeyOutOfDomain("update key " + std::to_string(k) + " >= domain " +
                                 std::to_string(domain));
        if (!exist_.get(k)) throw KeyNotFound("key " + std::to_string(k));
        auto row = rows.row(r);
        for (size_t c = 0; c < rows.columns; ++c)
            if (row[c] >= value_columns_[c].cardinality())
                throw CodeOutOfRange("update code " + std::to_string(row[c]) + " for column " +
                                     value_columns_[c].name);
    }

    auto codes = predict_codes(model_, rows.keys);
    for (size_t r = 0; r < rows.row_count(); ++r) {
        uint64_t k = rows.keys[r];
        auto row = rows.row(r);
        bool model_serves = true;
        for (size_t c = 0; c < rows.columns; ++c)
            if (codes[c][r] != row[c]) { model_serves = false; break; }
        if (model_serves) {
            if (aux_.overlay_find(k) || aux_.sealed_range_covers(k)) aux_.overlay_tombstone(k);
        } else {
            aux_.overlay_put(k, row);
        }
    }
    modified_bytes_ += rows.row_count() * row_width();
}

std::vector<std::pair<uint64_t, std::vector<uint32_t>>> HybridMapping::range_lookup(
    uint64_t lo, uint64_t hi, PartitionCache& cache) const {
    if (lo > hi)
        throw InvalidRange("lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
    std::vector<std::pair<uint64_t, std::vector<uint32_t>>> out;
    if (exist_.span() == 0 || lo >= exist_.span()) return out;
    uint64_t end = std::min<uint64_t>(hi, exist_.span() - 1);

    std::vector<uint64_t> hits;
    for (uint64_t k = lo; k <= end; ++k)
        if (exist_.get(k)) hits.push_back(k);

    out.reserve(hits.size());
    constexpr size_t kChunk = 65536;
    for (size_t start = 0; start < hits.size(); start += kChunk) {
        size_t count = std::min(kChunk, hits.size() - start);
        std::span<const uint64_t> chunk(hits.data() + start, count);
        auto rows = lookup_batch(chunk, cache);
        for (size_t i = 0; i < count; ++i) out.emplace_back(chunk[i], std::move(*rows[i]));
    }
    return out;
}

EncodedRelation HybridMapping::materialize(PartitionCache& cache) const {
    EncodedRelation rel;
    rel.key_codec = key_codec_;
    rel.value_columns = value_columns_;
    rel.columns.resize(columns());

    constexpr size_t kChunk = 65536;
    std::vector<uint64_t> batch;
    batch.reserve(kChunk);
    auto flush = [&] {
        if (batch.empty()) return;
        auto rows = lookup_batch(batch, cache);
        for (size_t i = 0; i < batch.size(); ++i) {
            rel.keys.push_back(batch[i]);
            const auto& vals = *rows[i];
            for (size_t c = 0; c < vals.size(); ++c) rel.columns[c].push_back(vals[c]);
        }
        batch.clear();
    };
    for (uint64_t k = 0; k < exist_.span(); ++k) {
        if (!exist_.get(k)) continue;
        batch.push_back(k);
        if (batch.size() == kChunk) flush();
    }
    flush();
    return rel;
}

bool HybridMapping::maybe_retrain(
    const std::function<MultiTaskNet(const EncodedRelation&)>& trainer, PartitionCache& cache) {
    if (static_cast<double>(modified_bytes_) <=
        cfg_.retrain_threshold * static_cast<double>(original_bytes_))
        return false;

    EncodedRelation rel = materialize(cache);
    if (rel.row_count() == 0) {
        // everything was deleted: empty aux and bits, keep the old model inert
        aux_ = AuxTable::build(RowBlock{columns(), {}, {}}, cfg_.partition_target_bytes,
                               cfg_.aux_codec, cfg_.codec_level);
        exist_ = ExistenceBitVector(0, key_codec_.domain_size());
        stats_ = HybridStats{};
        original_bytes_ = 0;
        modified_bytes_ = 0;
        return true;
    }
    MultiTaskNet net = trainer(rel);
    *this = build(rel, std::move(net), cfg_);
    return true;
}

void HybridMapping::persist(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_file(dir / "model.dmnn", serialize(model_));
    write_file(dir / "exist.bv", exist_.serialize());
    write_file(dir / "decode.map", decode_.serialize());
    aux_.persist(dir / "aux");

    KvMap kv;
    kv["format"] = "hybrid-store-v1";
    kv["arch"] = cfg_.arch_note;
    kv["model.file"] = "model.dmnn";
    kv["model.bytes"] = std::to_string(model_bytes());
    kv["exist.file"] = "exist.bv";
    kv["exist.bytes"] = std::to_string(exist_bytes());
    kv["decode.file"] = "decode.map";
    kv["decode.bytes"] = std::to_string(decode_bytes());

    kv["aux.codec"] = codec_name(aux_.codec());
    kv["aux.codec_level"] = std::to_string(aux_.codec_level());
    kv["aux.partition_target_bytes"] = std::to_string(aux_.partition_target_bytes());
    kv["aux.part.count"] = std::to_string(aux_.sealed().size());
    for (size_t i = 0; i < aux_.sealed().size(); ++i) {
        const auto& p = aux_.sealed()[i];
        char name[32];
        std::snprintf(name, sizeof name, "part-%05zu.%s", i, codec_name(aux_.codec()));
        std::string prefix = "aux.part." + std::string(name).substr(5, 5);
        kv[prefix + ".file"] = std::string("aux/") + name;
        kv[prefix + ".min"] = std::to_string(p.min_key);
        kv[prefix + ".max"] = std::to_string(p.max_key);
        kv[prefix + ".entries"] = std::to_string(p.entry_count);
        kv[prefix + ".bytes"] = std::to_string(p.compressed_bytes);
    }
    kv["aux.overlay.file"] = "aux/overlay.log";
    kv["aux.overlay.bytes"] = std::to_string(aux_.overlay_log_bytes());

    const auto& comps = key_codec_.components();
    kv["key.component.count"] = std::to_string(comps.size());
    for (size_t i = 0; i < comps.size(); ++i) {
        std::string prefix = "key.component." + std::to_string(i);
        kv[prefix + ".name"] = comps[i].column;
        kv[prefix + ".min"] = std::to_string(comps[i].domain_min);
        kv[prefix + ".span"] = std::to_string(comps[i].domain_span);
    }
    kv["value.column.count"] = std::to_string(value_columns_.size());
    for (size_t i = 0; i < value_columns_.size(); ++i) {
        std::string prefix = "value.column." + std::to_string(i);
        kv[prefix + ".name"] = value_columns_[i].name;
        kv[prefix + ".cardinality"] = std::to_string(value_columns_[i].cardinality());
    }

    kv["size.model"] = std::to_string(model_bytes());
    kv["size.aux"] = std::to_string(aux_bytes());
    kv["size.exist"] = std::to_string(exist_bytes());
    kv["size.decode"] = std::to_string(decode_bytes());
    kv["size.total"] = std::to_string(total_size());

    kv["stats.rows_total"] = std::to_string(stats_.rows_total);
    kv["stats.rows_misclassified"] = std::to_string(stats_.rows_misclassified);
    kv["stats.memorization"] = fmt_double(stats_.memorization);
    kv["retrain.threshold"] = fmt_double(cfg_.retrain_threshold);
    kv["retrain.original_bytes"] = std::to_string(original_bytes_);
    kv["retrain.modified_bytes"] = std::to_string(modified_bytes_);

    write_file(dir / "manifest", kv_serialize(kv));
}

HybridMapping HybridMapping::load(const std::filesystem::path& dir) {
    KvMap kv = kv_parse(read_text_file(dir / "manifest"));
    if (kv_need(kv, "format") != "hybrid-store-v1")
        throw CorruptManifest("unknown format " + kv_need(kv, "format"));

    HybridMapping h;
    h.model_ = deserialize_net(read_file(dir / kv_need(kv, "model.file")));
    h.exist_ = ExistenceBitVector::deserialize(read_file(dir / kv_need(kv, "exist.file")));
    h.decode_ = DecodeMap::deserialize(read_file(dir / kv_need(kv, "decode.file")));

    size_t comp_count = kv_need_u64(kv, "key.component.count");
    std::vector<KeyComponent> comps(comp_count);
    for (size_t i = 0; i < comp_count; ++i) {
        std::string prefix = "key.component." + std::to_string(i);
        comps[i].column = kv_need(kv, prefix + ".name");
        comps[i].domain_min = kv_need_i64(kv, prefix + ".min");
        comps[i].domain_span = kv_need_u64(kv, prefix + ".span");
    }
    h.key_codec_ = KeyCodec(std::move(comps));
    if (h.model_.features.domain_size < h.key_codec_.domain_size())
        throw CorruptManifest("model feature domain smaller than key domain");

    size_t col_count = kv_need_u64(kv, "value.column.count");
    if (h.decode_.columns.size() != col_count)
        throw CorruptManifest("decode map column count mismatch");
    if (h.model_.head_count() != col_count)
        throw CorruptManifest("model head count mismatch");
    h.value_columns_.resize(col_count);
    for (size_t i = 0; i < col_count; ++i) {
        std::string prefix = "value.column." + std::to_string(i);
        h.value_columns_[i].name = kv_need(kv, prefix + ".name");
        h.value_columns_[i].kind = ColumnKind::value;
        h.value_columns_[i].dictionary = h.decode_.columns[i];
        if (h.value_columns_[i].cardinality() != kv_need_u64(kv, prefix + ".cardinality"))
            throw CorruptManifest("column " + h.value_columns_[i].name + " cardinality mismatch");
    }

    h.cfg_.partition_target_bytes = kv_need_u64(kv, "aux.partition_target_bytes");
    h.cfg_.aux_codec = codec_from_name(kv_need(kv, "aux.codec"));
    h.cfg_.codec_level = static_cast<int>(kv_need_i64(kv, "aux.codec_level"));
    h.cfg_.retrain_threshold = kv_need_double(kv, "retrain.threshold");
    h.cfg_.arch_note = kv_need(kv, "arch");

    h.aux_ = AuxTable(col_count, h.cfg_.partition_target_bytes, h.cfg_.aux_codec,
                      h.cfg_.codec_level);
    size_t part_count = kv_need_u64(kv, "aux.part.count");
    std::vector<AuxTable::SealedPartition> sealed(part_count);
    for (size_t i = 0; i < part_count; ++i) {
        char idx[32];
        std::snprintf(idx, sizeof idx, "%05zu", i);
        std::string prefix = "aux.part." + std::string(idx);
        sealed[i].file = dir / kv_need(kv, prefix + ".file");
        sealed[i].min_key = kv_need_u64(kv, prefix + ".min");
        sealed[i].max_key = kv_need_u64(kv, prefix + ".max");
        sealed[i].entry_count = static_cast<uint32_t>(kv_need_u64(kv, prefix + ".entries"));
        sealed[i].compressed_bytes = kv_need_u64(kv, prefix + ".bytes");
        if (sealed[i].min_key > sealed[i].max_key)
            throw CorruptManifest(prefix + " has min > max");
        if (i > 0 && sealed[i].min_key <= sealed[i - 1].max_key)
            throw CorruptManifest(prefix + " overlaps previous partition");
    }
    h.aux_.attach_storage(std::move(sealed), dir.lexically_normal().string());
    h.aux_.replay_overlay(read_file(dir / kv_need(kv, "aux.overlay.file")));

    h.stats_.rows_total = kv_need_u64(kv, "stats.rows_total");
    h.stats_.rows_misclassified = kv_need_u64(kv, "stats.rows_misclassified");
    h.stats_.memorization = kv_need_double(kv, "stats.memorization");
    h.original_bytes_ = kv_need_u64(kv, "retrain.original_bytes");
    h.modified_bytes_ = kv_need_u64(kv, "retrain.modified_bytes");
    return h;
}

} // namespace hybridmap
