// hmap: build, query, modify, and benchmark key-value representations.
//
// Representations (--repr):
//   dm            learned hybrid (model + aux table + existence bits + decode map)
//   ab            partitioned sorted array, uncompressed
//   abc-d/g/z/l   array compressed with dictionary / gzip / zstd / lzma
//   hb            hash-partitioned store, uncompressed
//   hbc-z/l       hash-partitioned store compressed with zstd / lzma
//
// Exit code is 0 only when every requested oracle check passed.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridmap/baselines.hpp"
#include "hybridmap/datagen.hpp"
#include "hybridmap/errors.hpp"
#include "hybridmap/hybrid.hpp"
#include "hybridmap/manifest.hpp"
#include "hybridmap/mhas.hpp"
#include "hybridmap/net.hpp"
#include "hybridmap/serde.hpp"
#include "hybridmap/workload.hpp"

namespace hm = hybridmap;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t p = s.find(sep, start);
        out.push_back(s.substr(start, p == std::string::npos ? p : p - start));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

int64_t parse_i64(const std::string& s) {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw hm::ParseError("not an integer: \"" + s + "\"");
    return v;
}

hm::EncodedRelation load_relation(const std::string& path) {
    return hm::EncodedRelation::deserialize(hm::read_file(path));
}

struct ReprInfo {
    enum Family { hybrid, array, hash } family;
    hm::CodecId codec;
};

ReprInfo repr_info(const std::string& repr) {
    if (repr == "dm") return {ReprInfo::hybrid, hm::CodecId::none};
    if (repr == "ab") return {ReprInfo::array, hm::CodecId::none};
    if (repr == "abc-d") return {ReprInfo::array, hm::CodecId::dictionary};
    if (repr == "abc-g") return {ReprInfo::array, hm::CodecId::gzip};
    if (repr == "abc-z") return {ReprInfo::array, hm::CodecId::zstandard};
    if (repr == "abc-l") return {ReprInfo::array, hm::CodecId::lzma};
    if (repr == "hb") return {ReprInfo::hash, hm::CodecId::none};
    if (repr == "hbc-z") return {ReprInfo::hash, hm::CodecId::zstandard};
    if (repr == "hbc-l") return {ReprInfo::hash, hm::CodecId::lzma};
    throw hm::Error("unknown representation \"" + repr + "\"");
}

std::string array_kind(hm::CodecId c) {
    switch (c) {
        case hm::CodecId::none: return "ab";
        case hm::CodecId::dictionary: return "abc-d";
        case hm::CodecId::gzip: return "abc-g";
        case hm::CodecId::zstandard: return "abc-z";
        case hm::CodecId::lzma: return "abc-l";
    }
    return "ab";
}

std::string hash_kind(hm::CodecId c) {
    switch (c) {
        case hm::CodecId::none: return "hb";
        case hm::CodecId::dictionary: return "hbc-d";
        case hm::CodecId::gzip: return "hbc-g";
        case hm::CodecId::zstandard: return "hbc-z";
        case hm::CodecId::lzma: return "hbc-l";
    }
    return "hb";
}

// A loaded store of any representation plus its workload view.
struct AnyStore {
    std::string kind;
    std::unique_ptr<hm::HybridMapping> dm;
    std::unique_ptr<hm::ArrayRep> array;
    std::unique_ptr<hm::HashRep> hash;
    std::unique_ptr<hm::IStore> view;
};

AnyStore open_store(const std::string& dir) {
    AnyStore s;
    if (fs::exists(fs::path(dir) / "manifest")) {
        s.dm = std::make_unique<hm::HybridMapping>(hm::HybridMapping::load(dir));
        s.kind = "dm";
        s.view = std::make_unique<hm::HybridStoreView>(*s.dm, s.kind);
        return s;
    }
    if (!fs::exists(fs::path(dir) / "index"))
        throw hm::MissingComponent("no manifest or index under " + dir);
    hm::Bytes raw = hm::read_file(fs::path(dir) / "index");
    std::string text(reinterpret_cast<const char*>(raw.data()), raw.size());
    auto kv = hm::kv_parse(text);
    std::string format = hm::kv_need(kv, "format");
    if (format == "array-rep-v1") {
        s.array = std::make_unique<hm::ArrayRep>(hm::ArrayRep::load(dir));
        s.kind = array_kind(s.array->codec());
        s.view = std::make_unique<hm::ArrayStoreView>(*s.array, s.kind);
    } else if (format == "hash-rep-v1") {
        s.hash = std::make_unique<hm::HashRep>(hm::HashRep::load(dir));
        s.kind = hash_kind(s.hash->codec());
        s.view = std::make_unique<hm::HashStoreView>(*s.hash, s.kind);
    } else {
        throw hm::CorruptManifest("unknown index format " + format);
    }
    return s;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hm::ParseError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// Key lines are comma-separated component tuples when a codec is available,
// otherwise raw encoded indexes.
std::vector<uint64_t> parse_keys(const std::vector<std::string>& lines, const hm::KeyCodec* codec) {
    std::vector<uint64_t> keys;
    keys.reserve(lines.size());
    for (const auto& line : lines) {
        auto parts = split(line, ',');
        if (codec) {
            if (parts.size() != codec->components().size())
                throw hm::ParseError("key \"" + line + "\" needs " +
                                     std::to_string(codec->components().size()) + " components");
            std::vector<int64_t> tuple;
            for (const auto& p : parts) tuple.push_back(parse_i64(p));
            keys.push_back(codec->encode(tuple));
        } else {
            if (parts.size() != 1) throw hm::ParseError("raw key \"" + line + "\" must be one integer");
            keys.push_back(static_cast<uint64_t>(parse_i64(parts[0])));
        }
    }
    return keys;
}

std::string format_row(const hm::MaybeRow& row, const hm::DecodeMap* dec) {
    if (!row) return "NULL";
    std::string out;
    for (size_t c = 0; c < row->size(); ++c) {
        if (c) out += ',';
        uint32_t code = (*row)[c];
        if (dec) {
            if (c >= dec->columns.size() || code >= dec->columns[c].size())
                throw hm::CodeOutOfRange("code " + std::to_string(code) + " in column " +
                                         std::to_string(c));
            out += dec->columns[c][code];
        } else {
            out += std::to_string(code);
        }
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    hm::Bytes b(text.begin(), text.end());
    hm::write_file(path, b);
}

// gen --column specs: mode:cardinality[:period[:noise]]
hm::ValueColumnSpec parse_column_spec(const std::string& spec) {
    auto parts = split(spec, ':');
    if (parts.empty() || parts.size() > 4) throw hm::ParseError("bad column spec \"" + spec + "\"");
    hm::ValueColumnSpec cs;
    if (parts[0] == "low")
        cs.mode = hm::ValueMode::low_corr;
    else if (parts[0] == "high")
        cs.mode = hm::ValueMode::high_corr;
    else
        throw hm::ParseError("column mode must be low or high");
    if (parts.size() > 1) cs.cardinality = static_cast<uint32_t>(parse_i64(parts[1]));
    if (parts.size() > 2) cs.period = static_cast<uint64_t>(parse_i64(parts[2]));
    if (parts.size() > 3) cs.noise_rate = std::stod(parts[3]);
    return cs;
}

void print_hybrid_summary(const hm::HybridMapping& h) {
    std::printf("rows            %" PRIu64 "\n", h.stats().rows_total);
    std::printf("memorization    %.6f\n", h.stats().memorization);
    std::printf("model bytes     %zu\n", h.model_bytes());
    std::printf("aux bytes       %zu\n", h.aux_bytes());
    std::printf("exist bytes     %zu\n", h.exist_bytes());
    std::printf("decode bytes    %zu\n", h.decode_bytes());
    std::printf("total bytes     %zu\n", h.total_size());
    std::printf("original bytes  %" PRIu64 "\n", h.original_bytes());
    if (h.original_bytes())
        std::printf("ratio           %.6f\n",
                    static_cast<double>(h.total_size()) / static_cast<double>(h.original_bytes()));
}

// Re-trains a model with the same topology as `current` on a fresh relation.
std::function<hm::MultiTaskNet(const hm::EncodedRelation&)> topology_trainer(
    const hm::MultiTaskNet& current, uint32_t epochs, uint32_t batch, uint64_t seed) {
    std::vector<uint32_t> shared_sizes;
    for (const auto& l : current.shared) shared_sizes.push_back(l.out_dim);
    std::vector<std::vector<uint32_t>> head_hidden;
    std::vector<uint32_t> cards;
    for (const auto& head : current.heads) {
        std::vector<uint32_t> hidden;
        for (size_t i = 0; i + 1 < head.size(); ++i) hidden.push_back(head[i].out_dim);
        head_hidden.push_back(std::move(hidden));
        cards.push_back(head.back().out_dim);
    }
    hm::FeatureCodec fc = current.features;
    return [=](const hm::EncodedRelation& rel) {
        hm::Rng rng(hm::derive_seed(seed, 11));
        auto net = hm::make_net<float>(fc, shared_sizes, head_hidden, cards, rng);
        hm::TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch;
        tc.seed = seed;
        hm::train(net, rel, tc);
        return net;
    };
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned key-value store and baseline representations"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags win");

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a synthetic relation");
    uint64_t g_rows = 0, g_seed = 0;
    double g_headroom = 2.0;
    std::vector<std::string> g_columns;
    std::string g_out;
    gen->add_option("--rows", g_rows, "row count")->required();
    gen->add_option("--column", g_columns,
                    "value column spec mode:cardinality[:period[:noise]] (repeatable)")
        ->required();
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--headroom", g_headroom, "key domain headroom factor (>= 1)");
    gen->add_option("--out", g_out, "output relation file")->required();

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "encode a CSV file");
    std::string i_csv, i_out;
    std::vector<std::string> i_keys;
    ingest->add_option("--csv", i_csv, "input CSV path")->required();
    ingest->add_option("--key-columns", i_keys, "key column names")->delimiter(',')->required();
    ingest->add_option("--out", i_out, "output relation file")->required();

    // ---- build ----
    auto* build = app.add_subcommand("build", "build a representation from a relation");
    std::string b_data, b_repr, b_out;
    size_t b_partition_bytes = 128 * 1024;
    int b_level = 0;
    size_t b_partitions = 0;
    std::vector<uint32_t> b_shared{64, 64};
    std::vector<uint32_t> b_head_hidden{64};
    uint32_t b_epochs = 5, b_batch = 16384, b_radix = 256;
    double b_lr = 0.001, b_decay = 0.999, b_stop = 0.0001, b_threshold = 0.20;
    uint64_t b_seed = 0;
    build->add_option("--data", b_data, "relation file")->required();
    build->add_option("--repr", b_repr, "dm|ab|abc-d|abc-g|abc-z|abc-l|hb|hbc-z|hbc-l")->required();
    build->add_option("--out", b_out, "output store directory")->required();
    build->add_option("--partition-bytes", b_partition_bytes, "partition payload target");
    build->add_option("--codec-level", b_level, "compressor level (0 = default)");
    build->add_option("--partitions", b_partitions, "hash partition count (0 = derive)");
    build->add_option("--shared", b_shared, "dm: trunk layer sizes")->delimiter(',');
    build->add_option("--head-hidden", b_head_hidden, "dm: head hidden sizes")->delimiter(',');
    build->add_option("--epochs", b_epochs, "dm: training epochs");
    build->add_option("--batch", b_batch, "dm: training batch size");
    build->add_option("--lr", b_lr, "dm: learning rate");
    build->add_option("--lr-decay", b_decay, "dm: per-update learning rate decay");
    build->add_option("--stop-delta", b_stop, "dm: early-stop epoch loss delta");
    build->add_option("--radix", b_radix, "dm: key feature radix");
    build->add_option("--retrain-threshold", b_threshold, "dm: modified-bytes retrain fraction");
    build->add_option("--train-seed", b_seed, "dm: training seed");

    // ---- search ----
    auto* search = app.add_subcommand("search", "architecture search, then build a dm store");
    std::string s_data, s_out;
    uint32_t s_nt = 200, s_nm = 200, s_nc = 4, s_period = 50;
    uint32_t s_max_shared = 2, s_max_private = 2;
    uint32_t s_m_epochs = 1, s_model_batch = 16384, s_ctrl_batch = 2048;
    uint32_t s_patience = 50, s_finetune = 20, s_radix = 256;
    double s_stop = 0.0001, s_threshold = 0.20;
    size_t s_partition_bytes = 128 * 1024;
    int s_level = 0;
    uint64_t s_seed = 0;
    std::vector<uint32_t> s_sizes{8, 16, 32, 64};
    search->add_option("--data", s_data, "relation file")->required();
    search->add_option("--out", s_out, "output store directory")->required();
    search->add_option("--nt", s_nt, "total search iterations");
    search->add_option("--nm", s_nm, "max model training iterations");
    search->add_option("--nc", s_nc, "max controller training iterations");
    search->add_option("--period", s_period, "controller trains every k-th iteration");
    search->add_option("--sizes", s_sizes, "candidate layer sizes")->delimiter(',');
    search->add_option("--max-shared", s_max_shared, "max trunk layers");
    search->add_option("--max-private", s_max_private, "max head layers");
    search->add_option("--m-epochs", s_m_epochs, "epochs per model iteration");
    search->add_option("--model-batch", s_model_batch, "model training batch size");
    search->add_option("--ctrl-batch", s_ctrl_batch, "rows per controller episode");
    search->add_option("--stop-delta", s_stop, "early-stop loss delta");
    search->add_option("--patience", s_patience, "non-improving evaluations before stop (0 = off)");
    search->add_option("--finetune", s_finetune, "finetune epochs for the best architecture");
    search->add_option("--radix", s_radix, "key feature radix");
    search->add_option("--partition-bytes", s_partition_bytes, "aux partition payload target");
    search->add_option("--codec-level", s_level, "aux compressor level");
    search->add_option("--retrain-threshold", s_threshold, "modified-bytes retrain fraction");
    search->add_option("--seed", s_seed, "search seed");

    // ---- query ----
    auto* query = app.add_subcommand("query", "look up keys in a store");
    std::string q_store, q_keys_file, q_data;
    uint64_t q_random = 0, q_seed = 0, q_budget = 256ull * 1024 * 1024;
    bool q_codes = false;
    query->add_option("--store", q_store, "store directory")->required();
    query->add_option("--keys-file", q_keys_file, "key tuples, one per line");
    query->add_option("--random", q_random, "look up N random in-domain keys");
    query->add_option("--seed", q_seed, "random query seed");
    query->add_option("--data", q_data, "relation file for key codec, decode map, and oracle");
    query->add_option("--budget-bytes", q_budget, "partition cache budget");
    query->add_flag("--codes", q_codes, "print integer codes instead of decoded values");

    // ---- insert / delete / update ----
    auto* ins = app.add_subcommand("insert", "insert rows into a dm store");
    auto* del = app.add_subcommand("delete", "delete keys from a dm store");
    auto* upd = app.add_subcommand("update", "update rows in a dm store");
    std::string m_store, m_rows_file, m_keys_file;
    uint32_t m_epochs = 5, m_batch = 16384;
    uint64_t m_seed = 0;
    bool m_no_retrain = false;
    for (auto* cmd : {ins, del, upd}) {
        cmd->add_option("--store", m_store, "dm store directory")->required();
        cmd->add_option("--retrain-epochs", m_epochs, "epochs when retraining triggers");
        cmd->add_option("--retrain-batch", m_batch, "batch size when retraining triggers");
        cmd->add_option("--retrain-seed", m_seed, "seed when retraining triggers");
        cmd->add_flag("--no-retrain", m_no_retrain, "skip the retrain check");
    }
    ins->add_option("--rows-file", m_rows_file, "key tuple + values per line")->required();
    upd->add_option("--rows-file", m_rows_file, "key tuple + values per line")->required();
    del->add_option("--keys-file", m_keys_file, "key tuples, one per line")->required();

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "run a lookup workload against a store");
    std::string w_store, w_data, w_out;
    uint64_t w_batch = 10000, w_batches = 1, w_repeats = 5, w_seed = 0;
    uint64_t w_budget = 64ull * 1024 * 1024;
    double w_absent = 0.0;
    bench->add_option("--store", w_store, "store directory")->required();
    bench->add_option("--data", w_data, "source relation file (oracle)")->required();
    bench->add_option("--batch", w_batch, "keys per batch");
    bench->add_option("--batches", w_batches, "batches per repeat");
    bench->add_option("--repeats", w_repeats, "repeat count (cache cleared between repeats)");
    bench->add_option("--absent", w_absent, "fraction of guaranteed-absent keys");
    bench->add_option("--budget-bytes", w_budget, "decompressed partition budget");
    bench->add_option("--seed", w_seed, "workload seed");
    bench->add_option("--out", w_out, "write the report as JSON");

    // ---- report ----
    auto* report = app.add_subcommand("report", "combine reports into a comparison table");
    std::string r_format = "table";
    std::vector<std::string> r_files;
    report->add_option("--format", r_format, "csv|json|table");
    report->add_option("files", r_files, "report JSON files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            hm::SyntheticSpec spec;
            spec.rows = g_rows;
            spec.seed = g_seed;
            spec.domain_headroom = g_headroom;
            for (const auto& c : g_columns) spec.value_columns.push_back(parse_column_spec(c));
            auto out = hm::generate(spec);
            hm::write_file(g_out, out.relation.serialize());
            std::printf("rows    %zu\n", out.relation.row_count());
            std::printf("domain  %" PRIu64 "\n", out.relation.key_codec.domain_size());
            for (size_t c = 0; c < out.pearson.size(); ++c)
                std::printf("pearson[%zu] %.6g\n", c, out.pearson[c]);
        } else if (*ingest) {
            auto rel = hm::ingest_csv(i_csv, i_keys);
            hm::write_file(i_out, rel.serialize());
            std::printf("rows %zu, key components %zu, value columns %zu\n", rel.row_count(),
                        rel.key_codec.components().size(), rel.column_count());
        } else if (*build) {
            auto rel = load_relation(b_data);
            auto info = repr_info(b_repr);
            fs::create_directories(b_out);
            if (info.family == ReprInfo::hybrid) {
                hm::FeatureCodec fc = hm::FeatureCodec::make(rel.key_codec, b_radix);
                std::vector<std::vector<uint32_t>> head_hidden(rel.column_count(), b_head_hidden);
                std::vector<uint32_t> cards;
                for (const auto& col : rel.value_columns) cards.push_back(col.cardinality());
                hm::Rng rng(hm::derive_seed(b_seed, 11));
                auto net = hm::make_net<float>(fc, b_shared, head_hidden, cards, rng);
                hm::TrainConfig tc;
                tc.learning_rate = b_lr;
                tc.lr_decay = b_decay;
                tc.epochs = b_epochs;
                tc.batch_size = b_batch;
                tc.seed = b_seed;
                tc.stop_delta = b_stop;
                auto tr = hm::train(net, rel, tc);
                hm::HybridBuildConfig cfg;
                cfg.partition_target_bytes = b_partition_bytes;
                cfg.aux_codec = hm::CodecId::zstandard;
                cfg.codec_level = b_level;
                cfg.retrain_threshold = b_threshold;
                auto h = hm::HybridMapping::build(rel, std::move(net), cfg);
                h.persist(b_out);
                std::printf("trained %u epochs, final loss %.6f\n", tr.epochs_run, tr.final_loss);
                print_hybrid_summary(h);
            } else if (info.family == ReprInfo::array) {
                auto rep = hm::ArrayRep::build(rel, info.codec, b_partition_bytes, b_level);
                rep.persist(b_out);
                std::printf("partitions %zu, payload %zu, index %zu, total %zu\n",
                            rep.partition_count(), rep.payload_bytes(), rep.index_bytes(),
                            rep.serialized_size());
            } else {
                size_t parts = b_partitions;
                if (parts == 0) {
                    size_t data_bytes = rel.row_count() * rel.row_width();
                    parts = std::max<size_t>(1, data_bytes / std::max<size_t>(1, b_partition_bytes));
                }
                auto rep = hm::HashRep::build(rel, info.codec, parts, b_level);
                rep.persist(b_out);
                std::printf("partitions %zu, payload %zu, index %zu, total %zu\n",
                            rep.partition_count(), rep.payload_bytes(), rep.index_bytes(),
                            rep.serialized_size());
            }
        } else if (*search) {
            auto rel = load_relation(s_data);
            hm::SearchSpace space;
            space.max_shared_layers = s_max_shared;
            space.max_private_layers = s_max_private;
            space.layer_sizes = s_sizes;
            space.heads = static_cast<uint32_t>(rel.column_count());
            hm::SearchConfig cfg;
            cfg.total_iterations = s_nt;
            cfg.model_iterations = s_nm;
            cfg.controller_iterations = s_nc;
            cfg.controller_period = s_period;
            cfg.controller_batch = s_ctrl_batch;
            cfg.model_batch = s_model_batch;
            cfg.m_epochs = s_m_epochs;
            cfg.stop_delta = s_stop;
            cfg.patience = s_patience;
            cfg.finetune_epochs = s_finetune;
            cfg.radix = s_radix;
            cfg.aux_partition_bytes = s_partition_bytes;
            cfg.aux_codec_level = s_level;
            cfg.seed = s_seed;
            auto res = hm::mhas_search(rel, space, cfg);
            fs::create_directories(s_out);
            write_text(fs::path(s_out) / "trace.csv", hm::trace_csv(res.trace));
            write_text(fs::path(s_out) / "arch.txt",
                       res.best_arch.serialize() + "\ncell " + res.cell_kind + "\n");
            hm::HybridBuildConfig bcfg;
            bcfg.partition_target_bytes = s_partition_bytes;
            bcfg.aux_codec = hm::CodecId::zstandard;
            bcfg.codec_level = s_level;
            bcfg.retrain_threshold = s_threshold;
            bcfg.arch_note = "mhas " + res.best_arch.serialize();
            auto h = hm::HybridMapping::build(rel, std::move(res.net), bcfg);
            h.persist(s_out);
            std::printf("evaluations %zu, best arch %s\n", res.trace.size(),
                        res.best_arch.serialize().c_str());
            std::printf("best loss %.6f\n", res.best_loss);
            print_hybrid_summary(h);
        } else if (*query) {
            auto store = open_store(q_store);
            std::optional<hm::EncodedRelation> rel;
            if (!q_data.empty()) rel = load_relation(q_data);

            const hm::KeyCodec* codec = nullptr;
            const hm::DecodeMap* dec = nullptr;
            hm::DecodeMap rel_dec;
            if (store.dm) {
                codec = &store.dm->key_codec();
                dec = &store.dm->decode_map();
            } else if (rel) {
                codec = &rel->key_codec;
                rel_dec = hm::DecodeMap::from_relation(*rel);
                dec = &rel_dec;
            }
            if (q_codes) dec = nullptr;

            std::vector<uint64_t> keys;
            std::vector<std::string> labels;
            if (!q_keys_file.empty()) {
                auto lines = read_lines(q_keys_file);
                keys = parse_keys(lines, codec);
                labels = lines;
            } else if (q_random > 0) {
                uint64_t domain = 0;
                if (store.dm)
                    domain = store.dm->key_codec().domain_size();
                else if (rel)
                    domain = rel->key_codec.domain_size();
                else
                    throw hm::Error("--random needs --data for this representation");
                hm::Rng rng(q_seed);
                for (uint64_t i = 0; i < q_random; ++i) {
                    uint64_t k = rng.bounded(domain);
                    keys.push_back(k);
                    labels.push_back(std::to_string(k));
                }
            } else {
                throw hm::Error("query needs --keys-file or --random");
            }

            hm::PartitionCache cache(q_budget);
            auto rows = store.view->lookup_rows(keys, cache, nullptr);

            size_t mismatches = 0;
            std::optional<hm::ShadowOracle> oracle;
            if (rel) oracle.emplace(*rel);
            for (size_t i = 0; i < keys.size(); ++i) {
                std::printf("%s\t%s\n", labels[i].c_str(), format_row(rows[i], dec).c_str());
                if (oracle && oracle->lookup(keys[i]) != rows[i]) ++mismatches;
            }
            if (mismatches) {
                std::fprintf(stderr, "oracle mismatches: %zu of %zu\n", mismatches, keys.size());
                return 1;
            }
        } else if (*ins || *del || *upd) {
            auto store = open_store(m_store);
            if (!store.dm) throw hm::Error("representation " + store.kind + " is immutable");
            auto& h = *store.dm;
            const auto& codec = h.key_codec();
            const auto& dec = h.decode_map();

            if (*del) {
                auto keys = parse_keys(read_lines(m_keys_file), &codec);
                h.delete_keys(keys);
                std::printf("deleted %zu keys\n", keys.size());
            } else {
                size_t kc = codec.components().size();
                size_t vc = h.columns();
                // value string -> code, per column
                std::vector<std::unordered_map<std::string, uint32_t>> rev(vc);
                for (size_t c = 0; c < vc; ++c)
                    for (size_t code = 0; code < dec.columns[c].size(); ++code)
                        rev[c][dec.columns[c][code]] = static_cast<uint32_t>(code);

                hm::RowBlock rows;
                rows.columns = vc;
                for (const auto& line : read_lines(m_rows_file)) {
                    auto parts = split(line, ',');
                    if (parts.size() != kc + vc)
                        throw hm::ParseError("row \"" + line + "\" needs " + std::to_string(kc) +
                                             " key + " + std::to_string(vc) + " value fields");
                    std::vector<int64_t> tuple;
                    for (size_t i = 0; i < kc; ++i) tuple.push_back(parse_i64(parts[i]));
                    std::vector<uint32_t> codes;
                    for (size_t c = 0; c < vc; ++c) {
                        const auto& cell = parts[kc + c];
                        auto it = rev[c].find(cell);
                        if (it == rev[c].end())
                            throw hm::UnknownColumn("value \"" + cell +
                                                    "\" not in dictionary of column " +
                                                    std::to_string(c));
                        codes.push_back(it->second);
                    }
                    rows.push(codec.encode(tuple), codes);
                }
                if (*ins)
                    h.insert_rows(rows);
                else
                    h.update_rows(rows);
                std::printf("%s %zu rows\n", *ins ? "inserted" : "updated", rows.row_count());
            }

            std::printf("modified %" PRIu64 " of %" PRIu64 " original bytes (threshold %.2f)\n",
                        h.modified_bytes(), h.original_bytes(), h.retrain_threshold());
            if (!m_no_retrain) {
                hm::PartitionCache cache(256ull * 1024 * 1024);
                bool retrained = h.maybe_retrain(
                    topology_trainer(h.model(), m_epochs, m_batch, m_seed), cache);
                std::printf("retrain %s\n", retrained ? "ran" : "not triggered");
            }
            h.persist(m_store);
        } else if (*bench) {
            auto store = open_store(w_store);
            auto rel = load_relation(w_data);
            hm::WorkloadSpec spec;
            spec.batch_size = w_batch;
            spec.batches = w_batches;
            spec.repeats = w_repeats;
            spec.absent_fraction = w_absent;
            spec.memory_budget_bytes = w_budget;
            spec.seed = w_seed;
            auto rep = hm::run_workload(*store.view, rel, spec);
            if (!w_out.empty()) write_text(w_out, rep.to_json());
            auto cmp = hm::compare({rep});
            std::printf("%s", cmp.table().c_str());
        } else if (*report) {
            std::vector<hm::Report> reports;
            for (const auto& f : r_files) {
                auto b = hm::read_file(f);
                reports.push_back(hm::Report::from_json(
                    std::string(reinterpret_cast<const char*>(b.data()), b.size())));
            }
            auto cmp = hm::compare(reports);
            if (r_format == "csv")
                std::printf("%s", cmp.csv().c_str());
            else if (r_format == "json")
                std::printf("%s", cmp.json().c_str());
            else if (r_format == "table")
                std::printf("%s", cmp.table().c_str());
            else
                throw hm::Error("unknown format " + r_format);
        }
    } catch (const hm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
