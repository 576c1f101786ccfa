// Acceptance gate: one line per criterion, nonzero exit on any failure.
// Tolerances are pinned in code next to each check.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "hybridmap/baselines.hpp"
#include "hybridmap/datagen.hpp"
#include "hybridmap/hybrid.hpp"
#include "hybridmap/mhas.hpp"
#include "hybridmap/net.hpp"
#include "hybridmap/prng.hpp"
#include "hybridmap/workload.hpp"

using namespace hybridmap;
namespace fs = std::filesystem;

namespace {

struct Gate {
    std::vector<std::string> lines;
    int failures = 0;

    void result(int criterion, bool ok, const std::string& detail) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "criterion %d: ", criterion);
        lines.push_back(std::string(buf) + (ok ? "PASS" : "FAIL") + " (" + detail + ")");
        if (!ok) ++failures;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void progress(const char* msg) {
    std::fprintf(stderr, "[acceptance] %s\n", msg);
    std::fflush(stderr);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---- shared dataset + model (criteria 1, 3, 4, 9) --------------------------

// High-correlation generator pinned by criterion 3: period 64, cardinality 8,
// noise 1%, n = 1e6, two value columns.
SyntheticSpec big_spec() {
    SyntheticSpec spec;
    spec.rows = 1000000;
    spec.seed = 1;
    spec.domain_headroom = 2.0;
    spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
    spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
    return spec;
}

// Radix 64 aligns one key digit with the period-64 pattern; the rest of the
// recipe is plain SGD at the library defaults scale.
MultiTaskNet train_big_model(const EncodedRelation& rel) {
    FeatureCodec fc = FeatureCodec::make(rel.key_codec, 64);
    std::vector<uint32_t> cards;
    for (const auto& c : rel.value_columns)
        cards.push_back(static_cast<uint32_t>(c.dictionary.size()));
    Rng rng(7);
    auto net = make_net<float>(fc, {128}, {{32}, {32}}, cards, rng);
    TrainConfig tc;
    tc.learning_rate = 0.3;
    tc.lr_decay = 0.999;
    tc.epochs = 8;
    tc.batch_size = 2048;
    tc.stop_delta = 1e-6;
    train(net, rel, tc);
    return net;
}

uint64_t sweep_mismatches(const HybridMapping& h, const EncodedRelation& rel,
                          PartitionCache& cache) {
    uint64_t bad = 0;
    size_t n = rel.row_count();
    size_t m = rel.column_count();
    for (size_t start = 0; start < n; start += 131072) {
        size_t rows = std::min<size_t>(131072, n - start);
        auto got = h.lookup_batch({rel.keys.data() + start, rows}, cache);
        for (size_t r = 0; r < rows; ++r) {
            if (!got[r]) {
                ++bad;
                continue;
            }
            for (size_t c = 0; c < m; ++c)
                if ((*got[r])[c] != rel.columns[c][start + r]) {
                    ++bad;
                    break;
                }
        }
    }
    return bad;
}

// ---- criterion 2 helpers ----------------------------------------------------

using Shadow = std::map<uint64_t, std::vector<uint32_t>>;

bool rows_equal(const MaybeRow& got, const Shadow& shadow, uint64_t key) {
    auto it = shadow.find(key);
    if (it == shadow.end()) return !got.has_value();
    return got.has_value() && *got == it->second;
}

uint64_t shadow_divergence(const HybridMapping& h, const Shadow& shadow, uint64_t domain,
                           PartitionCache& cache) {
    std::vector<uint64_t> keys(domain);
    for (uint64_t k = 0; k < domain; ++k) keys[k] = k;
    auto got = h.lookup_batch(keys, cache);
    uint64_t bad = 0;
    for (uint64_t k = 0; k < domain; ++k)
        if (!rows_equal(got[k], shadow, k)) ++bad;
    return bad;
}

// ---- criterion 5 helpers ----------------------------------------------------

// Relative error |a - fd| / max(1e-8, |a| + |fd|) above 1e-6 magnitude,
// absolute |a - fd| below it.
double grad_error(double analytic, double fd) {
    double mag = std::abs(analytic) + std::abs(fd);
    if (mag > 1e-6) return std::abs(analytic - fd) / std::max(1e-8, mag);
    return std::abs(analytic - fd);
}

double net_loss(const BasicNet<double>& net, const std::vector<uint64_t>& keys,
                const std::vector<std::vector<uint32_t>>& targets) {
    auto probs = forward(net, keys);
    double loss = 0;
    for (size_t h = 0; h < net.head_count(); ++h)
        loss += cross_entropy(probs[h], keys.size(), net.head_cardinality(h), targets[h].data());
    return loss;
}

// Worst relative error between analytic gradients and central differences
// over every weight and bias of the net.
double net_fd_worst(BasicNet<double>& net, const std::vector<uint64_t>& keys,
                    const std::vector<std::vector<uint32_t>>& targets, double h) {
    std::vector<const uint32_t*> tptr;
    for (const auto& t : targets) tptr.push_back(t.data());
    auto g = gradients(net, keys.data(), keys.size(), tptr);

    double worst = 0;
    for (size_t li = 0; li < net.layer_count(); ++li) {
        auto& layer = net.layer_at(li);
        for (std::vector<double>* block : {layer.W.get(), layer.b.get()}) {
            const std::vector<double>& ga = block == layer.W.get() ? g.w[li] : g.b[li];
            for (size_t i = 0; i < block->size(); ++i) {
                double keep = (*block)[i];
                (*block)[i] = keep + h;
                double up = net_loss(net, keys, targets);
                (*block)[i] = keep - h;
                double dn = net_loss(net, keys, targets);
                (*block)[i] = keep;
                worst = std::max(worst, grad_error(ga[i], (up - dn) / (2 * h)));
            }
        }
    }
    return worst;
}

double controller_objective(const Controller& c, const std::vector<Episode>& eps,
                            const std::vector<double>& adv) {
    double f = 0;
    for (size_t e = 0; e < eps.size(); ++e) f += adv[e] * -c.log_prob_of(eps[e].arch);
    return f;
}

double controller_fd_worst(Controller& c, const std::vector<Episode>& eps,
                           const std::vector<double>& adv, double h) {
    auto grads = controller_gradients(c, eps, adv);
    double worst = 0;
    auto check_block = [&](std::vector<double>& param, const std::vector<double>& ga) {
        for (size_t i = 0; i < param.size(); ++i) {
            double keep = param[i];
            param[i] = keep + h;
            double up = controller_objective(c, eps, adv);
            param[i] = keep - h;
            double dn = controller_objective(c, eps, adv);
            param[i] = keep;
            worst = std::max(worst, grad_error(ga[i], (up - dn) / (2 * h)));
        }
    };
    check_block(c.params.Wf, grads.Wf);
    check_block(c.params.bf, grads.bf);
    check_block(c.params.Wh, grads.Wh);
    check_block(c.params.bh, grads.bh);
    check_block(c.params.start, grads.start);
    for (size_t s = 0; s < c.params.steps.size(); ++s) {
        check_block(c.params.steps[s].embed, grads.steps[s].embed);
        check_block(c.params.steps[s].Wo, grads.steps[s].Wo);
        check_block(c.params.steps[s].bo, grads.steps[s].bo);
    }
    return worst;
}

// ---- criterion 8 helper -----------------------------------------------------

// Exhaustive decision odometer; returns the count of distinct valid specs.
uint64_t enumerate_specs(uint32_t n_sizes, uint32_t m_layers) {
    SearchSpace space;
    space.max_shared_layers = m_layers;
    space.max_private_layers = m_layers;
    for (uint32_t s = 0; s < n_sizes; ++s) space.layer_sizes.push_back(8u << s);
    space.validate();

    std::vector<uint32_t> arity;
    for (uint32_t i = 1; i <= m_layers; ++i) {
        arity.push_back(i);       // shared parent
        arity.push_back(n_sizes); // shared size
    }
    for (uint32_t j = 1; j <= m_layers; ++j) {
        arity.push_back(2 * j - 1); // private parent
        arity.push_back(n_sizes);   // private size
    }

    std::set<std::string> seen;
    std::vector<uint32_t> digits(arity.size(), 0);
    while (true) {
        ArchSpec arch;
        size_t d = 0;
        for (uint32_t i = 0; i < m_layers; ++i) {
            arch.shared_parent.push_back(digits[d++]);
            arch.shared_size.push_back(digits[d++]);
        }
        for (uint32_t j = 0; j < m_layers; ++j) {
            arch.private_parent.push_back(digits[d++]);
            arch.private_size.push_back(digits[d++]);
        }
        arch.realize();
        arch.validate(space);
        seen.insert(arch.serialize());

        size_t pos = 0;
        while (pos < digits.size() && ++digits[pos] == arity[pos]) digits[pos++] = 0;
        if (pos == digits.size()) break;
    }
    return seen.size();
}

// ---- criterion 7 / 10 store roster ------------------------------------------

struct NamedStore {
    std::string name;
    std::unique_ptr<IStore> view;
    std::function<void(const fs::path&)> persist;
    std::function<std::unique_ptr<IStore>(const fs::path&)> load;
};

} // namespace

int main() {
    Gate gate;
    fs::path work = fs::temp_directory_path() / "hybridmap-acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // ---- criteria 1, 3, 4: exactness, compression, memorization ------------
    {
        progress("criteria 1/3/4: generating 1e6-row relation and training");
        auto t0 = std::chrono::steady_clock::now();
        auto gen = generate(big_spec());
        const EncodedRelation& rel = gen.relation;
        auto net = train_big_model(rel);
        HybridBuildConfig cfg; // zstd partitions, 128KB target
        auto hybrid = HybridMapping::build(rel, std::move(net), cfg);
        double build_s = seconds_since(t0);

        PartitionCache cache(256ull << 20);
        uint64_t bad = sweep_mismatches(hybrid, rel, cache);

        // keys n..n+9999 sit inside the declared domain but above every
        // stored key, so they are guaranteed absent
        std::vector<uint64_t> absent(10000);
        for (size_t i = 0; i < absent.size(); ++i) absent[i] = rel.row_count() + i;
        auto null_rows = hybrid.lookup_batch(absent, cache);
        uint64_t bad_absent = 0;
        for (const auto& r : null_rows)
            if (r.has_value()) ++bad_absent;

        double total_s = seconds_since(t0);
        bool c1 = bad == 0 && bad_absent == 0 && total_s < 600.0;
        gate.result(1, c1,
                    fmt("%" PRIu64 " sweep mismatches, %" PRIu64
                        " of 10000 absent keys non-NULL, %.1fs of 600s budget",
                        bad, bad_absent, total_s));

        uint64_t raw = rel.row_count() * rel.row_width();
        double ratio = static_cast<double>(hybrid.total_size()) / static_cast<double>(raw);
        gate.result(3, ratio <= 0.3,
                    fmt("total %zu bytes / raw %" PRIu64 " bytes = %.4f, threshold 0.3 "
                        "(model %zu, aux %zu, exist %zu, decode %zu)",
                        hybrid.total_size(), raw, ratio, hybrid.model_bytes(),
                        hybrid.aux_bytes(), hybrid.exist_bytes(), hybrid.decode_bytes()));

        double mem = hybrid.stats().memorization;
        gate.result(4, mem >= 0.95,
                    fmt("model-alone memorization %.4f, threshold 0.95, train+build %.1fs",
                        mem, build_s));

        // ---- criterion 9: budgeted I/O --------------------------------------
        // The literal precondition (a compressed baseline larger than 64MB
        // while the hybrid fits) is unattainable at this scale: the block
        // codecs exploit the same periodic structure the model learns. The
        // counter-based property is asserted at the pinned 64MB budget and
        // again at a 4MB budget that forces evictions of the baseline's
        // 16MB decompressed working set.
        progress("criterion 9: budgeted workloads");
        ArrayRep abcz = ArrayRep::build(rel, CodecId::zstandard, 128 * 1024);

        WorkloadSpec w;
        w.batch_size = 100000;
        w.batches = 1;
        w.repeats = 2;
        w.absent_fraction = 0.0;
        w.seed = 5;

        bool c9 = true;
        std::string c9_detail;
        for (uint64_t budget : {64ull << 20, 4ull << 20}) {
            w.memory_budget_bytes = budget;
            Report dm = run_workload(HybridStoreView(hybrid), rel, w);
            Report az = run_workload(ArrayStoreView(abcz, "abc-z"), rel, w);
            bool ok = dm.bytes_decompressed < az.bytes_decompressed &&
                      dm.max_resident_bytes <= budget && az.max_resident_bytes <= budget;
            c9 = c9 && ok;
            c9_detail += fmt("%sbudget %" PRIu64 "MB: dm %" PRIu64 " < abc-z %" PRIu64
                             " bytes decompressed, resident %" PRIu64 "/%" PRIu64,
                             c9_detail.empty() ? "" : "; ", budget >> 20,
                             dm.bytes_decompressed, az.bytes_decompressed,
                             dm.max_resident_bytes, az.max_resident_bytes);
        }
        gate.result(9, c9, c9_detail);
    }

    // ---- criterion 2: modification consistency ------------------------------
    {
        progress("criterion 2: randomized modifications against a shadow map");
        SyntheticSpec spec;
        spec.rows = 20000;
        spec.seed = 2;
        spec.domain_headroom = 2.0;
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        auto gen = generate(spec);
        const EncodedRelation& rel = gen.relation;
        uint64_t domain = rel.key_codec.domain_size();

        FeatureCodec fc = FeatureCodec::make(rel.key_codec, 64);
        Rng netrng(7);
        auto net = make_net<float>(fc, {64}, {{16}, {16}}, {8, 8}, netrng);
        TrainConfig tc;
        tc.learning_rate = 0.3;
        tc.lr_decay = 0.999;
        tc.epochs = 3;
        tc.batch_size = 1024;
        train(net, rel, tc);

        HybridBuildConfig cfg;
        cfg.partition_target_bytes = 16 * 1024;
        cfg.retrain_threshold = 0.05;
        auto hybrid = HybridMapping::build(rel, std::move(net), cfg);

        Shadow shadow;
        std::vector<uint64_t> live;
        for (size_t r = 0; r < rel.row_count(); ++r) {
            std::vector<uint32_t> row(rel.column_count());
            for (size_t c = 0; c < row.size(); ++c) row[c] = rel.columns[c][r];
            shadow.emplace(rel.keys[r], std::move(row));
            live.push_back(rel.keys[r]);
        }

        PartitionCache cache(256ull << 20);
        Rng rng(123);
        uint64_t divergence = 0;
        auto random_row = [&] {
            std::vector<uint32_t> row(2);
            for (auto& v : row) v = static_cast<uint32_t>(rng.bounded(8));
            return row;
        };

        for (int op = 0; op < 10000; ++op) {
            uint64_t touched = 0;
            double pick = rng.unit();
            if (pick < 0.35 || live.empty()) { // insert
                uint64_t k;
                do k = rng.bounded(domain);
                while (shadow.count(k));
                auto row = random_row();
                RowBlock block;
                block.columns = 2;
                block.push(k, row);
                hybrid.insert_rows(block);
                shadow.emplace(k, row);
                live.push_back(k);
                touched = k;
            } else if (pick < 0.65) { // delete
                size_t at = rng.bounded(live.size());
                uint64_t k = live[at];
                live[at] = live.back();
                live.pop_back();
                hybrid.delete_keys(std::vector<uint64_t>{k});
                shadow.erase(k);
                touched = k;
            } else { // update
                uint64_t k = live[rng.bounded(live.size())];
                auto row = random_row();
                RowBlock block;
                block.columns = 2;
                block.push(k, row);
                hybrid.update_rows(block);
                shadow[k] = row;
                touched = k;
            }
            auto got = hybrid.lookup_batch(std::vector<uint64_t>{touched}, cache);
            if (!rows_equal(got[0], shadow, touched)) ++divergence;

            if (op % 500 == 499) { // interleaved random probes
                std::vector<uint64_t> probe(100);
                for (auto& k : probe) k = rng.bounded(domain);
                auto rows = hybrid.lookup_batch(probe, cache);
                for (size_t i = 0; i < probe.size(); ++i)
                    if (!rows_equal(rows[i], shadow, probe[i])) ++divergence;
            }
        }

        uint64_t after_ops = shadow_divergence(hybrid, shadow, domain, cache);
        hybrid.compact(cache);
        uint64_t after_compact = shadow_divergence(hybrid, shadow, domain, cache);

        auto trainer = [&](const EncodedRelation& current) {
            FeatureCodec f2 = FeatureCodec::make(current.key_codec, 64);
            std::vector<uint32_t> cards;
            for (const auto& c : current.value_columns)
                cards.push_back(static_cast<uint32_t>(c.dictionary.size()));
            Rng r2(7);
            auto m = make_net<float>(f2, {64}, {{16}, {16}}, cards, r2);
            TrainConfig t2 = tc;
            t2.epochs = 2;
            train(m, current, t2);
            return m;
        };
        bool retrained = hybrid.maybe_retrain(trainer, cache);
        uint64_t after_retrain = shadow_divergence(hybrid, shadow, domain, cache);

        bool c2 = divergence == 0 && after_ops == 0 && after_compact == 0 && retrained &&
                  after_retrain == 0;
        gate.result(2, c2,
                    fmt("10000 ops: %" PRIu64 " step divergences, full sweeps %" PRIu64
                        "/%" PRIu64 "/%" PRIu64 " (post-ops/compact/retrain), retrain %s",
                        divergence, after_ops, after_compact, after_retrain,
                        retrained ? "fired" : "DID NOT FIRE"));
    }

    // ---- criterion 5: gradient correctness ----------------------------------
    {
        progress("criterion 5: finite-difference gradient checks");
        double worst_net = 0;
        int checked = 0;
        for (int trial = 0; checked < 10 && trial < 100; ++trial) {
            KeyCodec kc({{"k", 0, 4096}});
            FeatureCodec fc = FeatureCodec::make(kc, 16);
            Rng rng(100 + trial);
            auto net = make_net<double>(fc, {6}, {{5}, {}}, {5, 3}, rng);

            std::vector<uint64_t> keys(8);
            for (auto& k : keys) k = rng.bounded(4096);
            // a relu kink within FD reach makes the comparison undefined
            if (testutil::min_relu_margin(net, keys) < 5e-3) continue;
            ++checked;
            std::vector<std::vector<uint32_t>> targets(2);
            for (auto& k : keys) {
                targets[0].push_back(static_cast<uint32_t>(rng.bounded(5)));
                targets[1].push_back(static_cast<uint32_t>(rng.bounded(3)));
            }
            worst_net = std::max(worst_net, net_fd_worst(net, keys, targets, 1e-4));
        }

        SearchSpace space;
        space.max_shared_layers = 2;
        space.max_private_layers = 2;
        space.layer_sizes = {8, 16};
        space.heads = 2;
        Controller ctrl = Controller::make(space, 3);
        Rng rng(4);
        std::vector<Episode> eps;
        for (int e = 0; e < 3; ++e) eps.push_back({sample_architecture(ctrl, space, rng).arch, 0.0});
        std::vector<double> adv = {0.4, -0.7, 2.4};
        double worst_ctrl = controller_fd_worst(ctrl, eps, adv, 1e-5);

        bool c5 = checked == 10 && worst_net <= 1e-4 && worst_ctrl <= 1e-3;
        gate.result(5, c5,
                    fmt("net worst rel err %.2e (tol 1e-4, %d nets), controller %.2e (tol 1e-3)",
                        worst_net, checked, worst_ctrl));
    }

    // ---- criterion 8: search space size -------------------------------------
    {
        progress("criterion 8: architecture enumeration");
        bool c8 = true;
        std::string detail;
        for (uint32_t n = 1; n <= 3; ++n)
            for (uint32_t m = 1; m <= 2; ++m) {
                uint64_t formula = search_space_size(n, m);
                uint64_t counted = enumerate_specs(n, m);
                if (counted != formula) c8 = false;
                detail += fmt("%sN=%u M=%u: %" PRIu64 "/%" PRIu64, detail.empty() ? "" : ", ",
                              n, m, counted, formula);
            }
        gate.result(8, c8, detail);
    }

    // ---- criterion 6: MHAS progress ------------------------------------------
    {
        // Criterion-3 distribution at reduced n so 200 child trainings fit the
        // runtime budget; the trace shape, not the absolute loss, is under test.
        progress("criterion 6: architecture search twice for determinism");
        SyntheticSpec spec;
        spec.rows = 50000;
        spec.seed = 1;
        spec.domain_headroom = 2.0;
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        auto gen = generate(spec);

        SearchSpace space;
        space.max_shared_layers = 2;
        space.max_private_layers = 2;
        space.layer_sizes = {8, 16, 32, 64};
        space.heads = 2;

        SearchConfig cfg;
        cfg.total_iterations = 200;
        cfg.model_iterations = 200;
        cfg.controller_iterations = 4;
        cfg.controller_period = 50;
        cfg.controller_batch = 2048;
        cfg.model_batch = 4096;
        cfg.m_epochs = 1;
        cfg.finetune_epochs = 4;
        cfg.radix = 64;
        cfg.patience = 0;
        cfg.seed = 11;

        SearchResult a = mhas_search(gen.relation, space, cfg);
        SearchResult b = mhas_search(gen.relation, space, cfg);

        bool nonincreasing = !a.trace.empty();
        for (size_t i = 1; i < a.trace.size(); ++i)
            if (a.trace[i].best_loss > a.trace[i - 1].best_loss) nonincreasing = false;
        bool ends_small = !a.trace.empty() && a.trace.back().best_loss < 1.0 && a.best_loss < 1.0;
        bool identical = trace_csv(a.trace) == trace_csv(b.trace) &&
                         a.best_loss == b.best_loss &&
                         a.best_arch.serialize() == b.best_arch.serialize();

        bool c6 = nonincreasing && ends_small && identical;
        gate.result(6, c6,
                    fmt("%zu trace rows, best loss %.4f < 1.0, nonincreasing %s, rerun %s",
                        a.trace.size(), a.best_loss, nonincreasing ? "yes" : "NO",
                        identical ? "bit-identical" : "DIVERGED"));
    }

    // ---- criteria 7 + 10: agreement and persistence --------------------------
    {
        progress("criteria 7/10: nine representations over one relation");
        SyntheticSpec spec;
        spec.rows = 200000;
        spec.seed = 3;
        spec.domain_headroom = 2.0;
        spec.value_columns.push_back({8, ValueMode::high_corr, 64, 0.01});
        spec.value_columns.push_back({5, ValueMode::low_corr});
        auto gen = generate(spec);
        const EncodedRelation& rel = gen.relation;
        uint64_t domain = rel.key_codec.domain_size();

        FeatureCodec fc = FeatureCodec::make(rel.key_codec, 64);
        Rng netrng(7);
        auto net = make_net<float>(fc, {64}, {{16}, {16}}, {8, 5}, netrng);
        TrainConfig tc;
        tc.learning_rate = 0.3;
        tc.lr_decay = 0.999;
        tc.epochs = 2;
        tc.batch_size = 2048;
        train(net, rel, tc);
        auto hybrid =
            std::make_shared<HybridMapping>(HybridMapping::build(rel, std::move(net), {}));

        auto arrays = std::make_shared<std::vector<ArrayRep>>();
        arrays->push_back(ArrayRep::build(rel, CodecId::none, 128 * 1024));
        arrays->push_back(ArrayRep::build(rel, CodecId::dictionary, 128 * 1024));
        arrays->push_back(ArrayRep::build(rel, CodecId::gzip, 128 * 1024));
        arrays->push_back(ArrayRep::build(rel, CodecId::zstandard, 128 * 1024));
        arrays->push_back(ArrayRep::build(rel, CodecId::lzma, 128 * 1024));
        auto hashes = std::make_shared<std::vector<HashRep>>();
        hashes->push_back(HashRep::build(rel, CodecId::none, 64));
        hashes->push_back(HashRep::build(rel, CodecId::zstandard, 64));
        hashes->push_back(HashRep::build(rel, CodecId::lzma, 64));

        std::vector<NamedStore> stores;
        stores.push_back({"dm", std::make_unique<HybridStoreView>(*hybrid),
                          [=](const fs::path& d) { hybrid->persist(d); },
                          [](const fs::path& d) -> std::unique_ptr<IStore> {
                              auto h = std::make_shared<HybridMapping>(HybridMapping::load(d));
                              struct V : HybridStoreView {
                                  std::shared_ptr<HybridMapping> own;
                                  V(std::shared_ptr<HybridMapping> h)
                                      : HybridStoreView(*h), own(std::move(h)) {}
                              };
                              return std::make_unique<V>(std::move(h));
                          }});
        const char* array_names[] = {"ab", "abc-d", "abc-g", "abc-z", "abc-l"};
        for (size_t i = 0; i < arrays->size(); ++i) {
            stores.push_back({array_names[i],
                              std::make_unique<ArrayStoreView>((*arrays)[i], array_names[i]),
                              [=](const fs::path& d) { (*arrays)[i].persist(d); },
                              [name = std::string(array_names[i])](const fs::path& d)
                                  -> std::unique_ptr<IStore> {
                                  auto rep = std::make_shared<ArrayRep>(ArrayRep::load(d));
                                  struct V : ArrayStoreView {
                                      std::shared_ptr<ArrayRep> own;
                                      V(std::shared_ptr<ArrayRep> r, const std::string& n)
                                          : ArrayStoreView(*r, n), own(std::move(r)) {}
                                  };
                                  return std::make_unique<V>(std::move(rep), name);
                              }});
        }
        const char* hash_names[] = {"hb", "hbc-z", "hbc-l"};
        for (size_t i = 0; i < hashes->size(); ++i) {
            stores.push_back({hash_names[i],
                              std::make_unique<HashStoreView>((*hashes)[i], hash_names[i]),
                              [=](const fs::path& d) { (*hashes)[i].persist(d); },
                              [name = std::string(hash_names[i])](const fs::path& d)
                                  -> std::unique_ptr<IStore> {
                                  auto rep = std::make_shared<HashRep>(HashRep::load(d));
                                  struct V : HashStoreView {
                                      std::shared_ptr<HashRep> own;
                                      V(std::shared_ptr<HashRep> r, const std::string& n)
                                          : HashStoreView(*r, n), own(std::move(r)) {}
                                  };
                                  return std::make_unique<V>(std::move(rep), name);
                              }});
        }

        // 1e5 uniform draws over the 2x domain: roughly half guaranteed absent
        std::vector<uint64_t> keys(100000);
        Rng rng(99);
        for (auto& k : keys) k = rng.bounded(domain);

        ShadowOracle oracle(rel);
        std::vector<MaybeRow> expected(keys.size());
        for (size_t i = 0; i < keys.size(); ++i) expected[i] = oracle.lookup(keys[i]);

        uint64_t disagreements = 0;
        std::vector<std::vector<MaybeRow>> answers;
        for (const auto& s : stores) {
            PartitionCache cache(256ull << 20);
            answers.push_back(s.view->lookup_rows(keys, cache, nullptr));
            for (size_t i = 0; i < keys.size(); ++i)
                if (answers.back()[i] != expected[i]) ++disagreements;
        }
        gate.result(7, disagreements == 0,
                    fmt("%zu stores x %zu lookups: %" PRIu64 " disagreements", stores.size(),
                        keys.size(), disagreements));

        // ---- criterion 10: persistence round trips + codec fuzz --------------
        progress("criterion 10: persist/load round trips and codec fuzz");
        uint64_t persist_bad = 0;
        for (size_t s = 0; s < stores.size(); ++s) {
            fs::path dir = work / stores[s].name;
            fs::create_directories(dir);
            stores[s].persist(dir);
            auto loaded = stores[s].load(dir);
            PartitionCache cache(256ull << 20);
            auto again = loaded->lookup_rows(keys, cache, nullptr);
            for (size_t i = 0; i < keys.size(); ++i)
                if (again[i] != answers[s][i]) ++persist_bad;
        }

        uint64_t fuzz_bad = 0;
        const CodecId codecs[] = {CodecId::none, CodecId::dictionary, CodecId::gzip,
                                  CodecId::zstandard, CodecId::lzma};
        Rng fz(2024);
        for (CodecId codec : codecs) {
            for (int t = 0; t < 2000; ++t) {
                size_t len = fz.bounded(4000);
                Bytes input(len);
                if (t % 2 == 0) {
                    for (auto& byte : input) byte = static_cast<uint8_t>(fz.bounded(256));
                } else { // runs + small alphabet: dictionary-friendly shapes
                    uint8_t sym = 0;
                    for (auto& byte : input) {
                        if (fz.unit() < 0.05) sym = static_cast<uint8_t>(fz.bounded(7));
                        byte = sym;
                    }
                }
                Bytes packed = compress(codec, input, 0);
                if (decompress(codec, packed) != input) ++fuzz_bad;
            }
        }

        bool c10 = persist_bad == 0 && fuzz_bad == 0;
        gate.result(10, c10,
                    fmt("%zu persisted stores: %" PRIu64 " post-load mismatches; 10000 codec "
                        "round trips: %" PRIu64 " failures",
                        stores.size(), persist_bad, fuzz_bad));
    }

    std::sort(gate.lines.begin(), gate.lines.end(), [](const std::string& a, const std::string& b) {
        auto num = [](const std::string& s) { return std::stoi(s.substr(10)); };
        return num(a) < num(b);
    });
    for (const auto& line : gate.lines) std::printf("%s\n", line.c_str());
    std::printf("%s\n", gate.failures == 0 ? "acceptance: ALL PASS"
                                           : fmt("acceptance: %d FAILED", gate.failures).c_str());
    fs::remove_all(work);
    return gate.failures == 0 ? 0 : 1;
}
