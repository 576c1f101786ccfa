#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hybridmap/codec.hpp"
#include "hybridmap/encoding.hpp"
#include "hybridmap/net.hpp"
#include "hybridmap/prng.hpp"

namespace hybridmap {

// Eq: (model + aux + exist + decode) / data bytes. Lower is better; > 1 means
// the hybrid is larger than the raw fixed-width rows.
double compression_loss(uint64_t model_bytes, uint64_t aux_bytes, uint64_t exist_bytes,
                        uint64_t decode_bytes, uint64_t data_bytes);

// N size choices, M maximum layers per stack: N^(2M) * M! * (2M-1)!!.
uint64_t search_space_size(uint64_t size_choices, uint64_t max_layers);

struct SearchSpace {
    uint32_t max_shared_layers = 2;
    uint32_t max_private_layers = 2;
    std::vector<uint32_t> layer_sizes; // candidate neuron counts, strictly increasing
    uint32_t heads = 1;

    void validate() const;
};

// One point of the search space: the full decision tuple plus the realized
// simple paths. Decisions are autoregressive, in sampling order:
//   shared node i = 1..Ms: parent in [0..i-1] (0 = input, t = shared node t),
//     then a size index;
//   private node j = 1..Mp: parent in [0..2j-2] (0 = head input, 2k-1 = the
//     output of private node k, 2k = private node k's input tensor), then a
//     size index. All heads reuse the same private decisions.
// The realized stack is the ancestor walk from the last node, so every stack
// keeps at least one layer; nodes off the walk stay dormant in the bank.
struct ArchSpec {
    std::vector<uint32_t> shared_parent;
    std::vector<uint32_t> shared_size;
    std::vector<uint32_t> private_parent;
    std::vector<uint32_t> private_size;

    std::vector<uint32_t> realized_shared;  // node ids, input side first
    std::vector<uint32_t> realized_private; // node ids, input side first

    void realize();
    void validate(const SearchSpace& space) const; // throws Error when invalid
    std::string serialize() const;                 // canonical decision text
    uint64_t id() const;                           // hash of serialize()
};

// (tree node, edge, dims) -> lazily created weight storage shared by every
// sampled child model. Initialization depends only on the key, never on the
// order keys are first touched.
class WeightBank {
  public:
    struct Key {
        uint32_t tree_node = 0; // 0 = trunk, 1 + h = head h
        uint32_t from = 0;
        uint32_t to = 0;
        uint32_t in_dim = 0;
        uint32_t out_dim = 0;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        size_t operator()(const Key& k) const;
    };
    struct Entry {
        std::shared_ptr<std::vector<float>> W;
        std::shared_ptr<std::vector<float>> b;
    };

    // init_stddev 0 scales per edge: sqrt(2 / in_dim), with the stddev
    // override in get() used by the sparse input edge.
    explicit WeightBank(uint64_t seed, double init_stddev = 0.0)
        : seed_(seed), stddev_(init_stddev) {}

    // stddev 0 falls back to the bank default for this edge; initialization
    // depends only on (key, chosen stddev), never on call order.
    Entry& get(const Key& key, double stddev = 0.0);
    size_t size() const { return map_.size(); }

  private:
    uint64_t seed_;
    double stddev_;
    std::unordered_map<Key, Entry, KeyHash> map_;
};

// Builds a net whose layers alias the bank's storage: training the net trains
// the bank, and re-materializing the same arch sees the updated weights.
MultiTaskNet materialize(const ArchSpec& arch, const SearchSpace& space, WeightBank& bank,
                         const FeatureCodec& features, const std::vector<uint32_t>& head_cards);

// Autoregressive categorical policy over the decision sequence. A minimal
// gated recurrent cell (64 hidden units) feeds per-step softmax classifiers;
// all math is double precision for finite-difference checkability.
class Controller {
  public:
    struct Tensors {
        struct Step {
            std::vector<double> embed; // arity x embed_dim, row per choice
            std::vector<double> Wo;    // arity x hidden
            std::vector<double> bo;    // arity
        };
        std::vector<double> Wf, bf; // hidden x (hidden + embed_dim), hidden
        std::vector<double> Wh, bh;
        std::vector<double> start; // embed_dim
        std::vector<Step> steps;
    };

    static Controller make(const SearchSpace& space, uint64_t seed);

    const std::vector<uint32_t>& step_arity() const { return arity_; }
    uint32_t hidden() const { return hidden_; }
    uint32_t embed_dim() const { return embed_; }

    Tensors params; // theta
    double learning_rate = 0.00035;
    double baseline = 0.0;
    bool baseline_init = false;
    double baseline_decay = 0.95;
    uint64_t adam_step_count = 0;
    Tensors adam_m, adam_v;

    // decisions flattened in sampling order (parent, size, parent, size, ...)
    std::vector<uint32_t> decisions_of(const ArchSpec& arch) const;
    ArchSpec arch_of(const std::vector<uint32_t>& decisions, const SearchSpace& space) const;

    double log_prob_of(const ArchSpec& arch) const;

  private:
    friend struct ControllerOps;
    uint32_t hidden_ = 64;
    uint32_t embed_ = 32;
    uint32_t max_shared_ = 0, max_private_ = 0, size_choices_ = 0;
    std::vector<uint32_t> arity_;
};

struct SampledArch {
    ArchSpec arch;
    double log_prob = 0.0;
};

// temperature 1 samples the softmax; temperature 0 takes the argmax.
SampledArch sample_architecture(const Controller& c, const SearchSpace& space, Rng& rng,
                                double temperature = 1.0);

struct Episode {
    ArchSpec arch;
    double reward = 0.0; // -compression_loss
};

// Gradients of sum_e advantage_e * (-log_prob(arch_e)) for testing against
// finite differences; controller_update drives Adam with them.
Controller::Tensors controller_gradients(const Controller& c, const std::vector<Episode>& episodes,
                                         const std::vector<double>& advantages);

// REINFORCE with an EMA baseline: one Adam step on
// -sum_e log_prob(arch_e) * (reward_e - baseline), then baseline update.
void controller_update(Controller& c, const std::vector<Episode>& episodes);

struct SearchConfig {
    uint32_t total_iterations = 2000;    // N_t
    uint32_t model_iterations = 2000;    // N_m (cap on model training iterations)
    uint32_t controller_iterations = 40; // N_c (cap on controller training iterations)
    uint32_t controller_period = 50;     // controller trains every k-th iteration
    uint32_t controller_batch = 2048;    // data rows per controller episode
    uint32_t model_batch = 16384;
    uint32_t m_epochs = 5;
    double stop_delta = 0.0001;
    uint32_t patience = 50; // consecutive non-improving evaluations; 0 disables
    uint32_t finetune_epochs = 20;
    uint32_t radix = 256; // key feature radix
    size_t aux_partition_bytes = 128 * 1024;
    CodecId aux_codec = CodecId::zstandard;
    int aux_codec_level = 0;
    uint64_t seed = 0;

    void validate() const;
};

struct TraceRow {
    uint32_t iteration = 0;
    uint64_t arch_id = 0;
    double loss = 0.0;
    double best_loss = 0.0;
    const char* phase = "model"; // "model" | "controller"
};

struct SearchResult {
    ArchSpec best_arch;
    double best_loss = 0.0; // after finetune
    MultiTaskNet net;       // best arch materialized and finetuned
    std::vector<TraceRow> trace;
    Controller controller;
    TrainResult finetune;
    std::string cell_kind = "minimal-gated-unit"; // recorded trace metadata
};

// Alternating search: sample-and-train model iterations against controller
// policy-gradient iterations, reward = -compression_loss of the full hybrid
// sized with the current bank weights. Returns the best architecture
// finetuned, plus the per-evaluation loss trace.
SearchResult mhas_search(const EncodedRelation& data, const SearchSpace& space,
                         const SearchConfig& cfg);

std::string trace_csv(const std::vector<TraceRow>& trace);

} // namespace hybridmap
